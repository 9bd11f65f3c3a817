"""Phase-plane flow of Phi(xi) = r w'(r) and its asymptotic constants.

Along any profile trajectory the pair (xi, Phi) = (w, r w') obeys an
autonomous first-order ODE, which gives direct access to the two tail
regimes: unbounded growth Phi ~ K(beta) xi^(p/2) below the critical rate,
and the linear vanishing Phi ~ K* (w* - xi) at it.  solve_phi() integrates
the flow, fit_tail() extracts the constants (from Phi solutions or from a
profile run for the logarithmic law), and check_phi_bounds() verifies the
comparison bounds and the strict ordering of Phi in beta.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .params import ParamsError, _pow, theory_constants
from .profile import ProfileSolution

_XI_CHART_SWITCH = 10.0
_SERIES_BUDGET = 1e-12


class PhiIntegrityError(RuntimeError):
    """The computed trajectory violated the strict bound 0 < Phi < mu xi."""


class PhiRegime(enum.Enum):
    UNBOUNDED = "Unbounded"
    APPROACHING_WSTAR = "ApproachingWStar"


class TailKind(enum.Enum):
    K_C = "K_C"
    K_LOG = "K_log"
    K_STAR = "K_star"


@dataclass(frozen=True)
class PhiOptions:
    rtol: float = 1e-10
    atol: float = 1e-14
    xi_max: float = 1e10
    xi_start: float | None = None
    # Phi < phi_floor_rel * mu * w* ends a run; keeps 1/Phi finite.
    phi_floor_rel: float = 1e-6

    def validated(self):
        if not (math.isfinite(self.rtol) and 0.0 < self.rtol < 1.0):
            raise ParamsError("rtol must be in (0, 1)")
        if not (math.isfinite(self.atol) and self.atol > 0.0):
            raise ParamsError("atol must be positive")
        if not (math.isfinite(self.xi_max) and self.xi_max > 0.0):
            raise ParamsError("xi_max must be positive")
        if self.xi_start is not None and not (
            math.isfinite(self.xi_start) and self.xi_start > 0.0
        ):
            raise ParamsError("xi_start must be positive when given")
        if not (math.isfinite(self.phi_floor_rel) and 0.0 < self.phi_floor_rel < 1.0):
            raise ParamsError("phi_floor_rel must be in (0, 1)")
        return self


@dataclass
class PhiSolution:
    params: object
    beta: float
    xi: np.ndarray
    phi: np.ndarray
    regime: PhiRegime
    end_state: dict
    opts: PhiOptions
    _interp: object = field(default=None, init=False, repr=False)

    def phi_at(self, x):
        """Interpolated Phi on the computed range (log-log monotone cubic)."""
        x = np.asarray(x, dtype=float)
        if np.any(x < self.xi[0]) or np.any(x > self.xi[-1]):
            raise ParamsError(
                "xi outside computed range [%r, %r]" % (self.xi[0], self.xi[-1])
            )
        if self._interp is None:
            lx = np.log(self.xi)
            # distinct xi can collapse to equal floats after log at large xi
            keep = np.concatenate(([True], np.diff(lx) > 0.0))
            self._interp = PchipInterpolator(
                lx[keep], np.log(self.phi[keep]), extrapolate=False
            )
        lq = np.clip(np.log(x), self._interp.x[0], self._interp.x[-1])
        return np.exp(self._interp(lq))


@dataclass(frozen=True)
class TailFit:
    kind: TailKind
    fitted: float
    theory: float
    window_lo: float
    window_hi: float
    rel_err: float


def phi_rhs(params, beta, xi, phi):
    """Slope of the phase-plane trajectory at (xi, phi); requires phi > 0."""
    if phi <= 0.0:
        raise ValueError("phi_rhs needs phi > 0 (flow is singular at phi = 0)")
    mu, p, N = params.mu, params.p, params.N
    gap = phi - mu * xi
    num = (
        (mu * p - N) * phi
        - mu * (mu - N) * xi
        - abs(gap) ** (2.0 - p) * (beta * phi - abs(gap) ** (0.5 * p))
    )
    return num / ((p - 1.0) * phi)


def phi_series(params, beta, xi):
    """Two-term start Phi = mu xi - (mu beta / N)^(1/(p-1)) xi^(1/(p-1))."""
    xi = np.asarray(xi, dtype=float)
    c = _pow(params.mu * beta / params.N, 1.0 / (params.p - 1.0))
    out = params.mu * xi - c * xi ** (1.0 / (params.p - 1.0))
    return out if out.ndim else float(out)


def default_xi_start(params, beta):
    """Start abscissa keeping the dropped series term below 1e-12.

    The first neglected correction is of relative size xi^((2-p)/(p-1))
    against the retained one, so the retained-term magnitude times that
    ratio serves as the remainder estimate.  Capped at 1e-4 and two
    decades under w* so degenerate parameter corners stay inside range.
    """
    c = _pow(params.mu * beta / params.N, 1.0 / (params.p - 1.0))
    ex = (3.0 - params.p) / (params.p - 1.0)
    cap = 1e-4
    if c > 0.0:
        cap = min(cap, _pow(_SERIES_BUDGET / c, 1.0 / ex))
    return min(cap, params.w_star / 100.0)


def solve_phi(params, beta, opts=None):
    """Integrate the phase-plane flow from the series start.

    Runs in xi out to xi = 10 and in log xi beyond, until xi_max
    (regime Unbounded) or until phi falls below the floor (regime
    ApproachingWStar).  A crossing of the invariant line phi = mu xi
    cannot happen for a true trajectory and raises PhiIntegrityError.
    """
    if not (isinstance(beta, (int, float)) and math.isfinite(beta) and beta > 0):
        raise ParamsError("beta must be a positive real")
    beta = float(beta)
    opts = (opts if opts is not None else PhiOptions()).validated()

    xi0 = opts.xi_start if opts.xi_start is not None else default_xi_start(params, beta)
    if xi0 >= opts.xi_max:
        raise ParamsError("xi_start must be below xi_max")
    phi0 = float(phi_series(params, beta, xi0))
    if not 0.0 < phi0 < params.mu * xi0:
        raise ParamsError("series start left the admissible wedge; lower xi_start")
    floor = opts.phi_floor_rel * params.mu * params.w_star

    def rhs_xi(xi, y):
        return [phi_rhs(params, beta, xi, y[0])]

    def rhs_log(s, y):
        xi = math.exp(s)
        return [xi * phi_rhs(params, beta, xi, y[0])]

    def ev_floor(t, y):
        return y[0] - floor

    ev_floor.terminal = True
    ev_floor.direction = -1.0

    def make_ev_wedge(to_xi):
        def ev_wedge(t, y):
            return params.mu * to_xi(t) - y[0]

        ev_wedge.terminal = True
        ev_wedge.direction = -1.0
        return ev_wedge

    legs = []
    hit_floor = False
    xi_hi1 = min(_XI_CHART_SWITCH, opts.xi_max)

    def run_leg(rhs, span, y0, to_xi):
        sol = solve_ivp(
            rhs,
            span,
            y0,
            method="RK45",
            rtol=opts.rtol,
            atol=opts.atol,
            dense_output=True,
            events=[ev_floor, make_ev_wedge(to_xi)],
        )
        if sol.status < 0:
            raise PhiIntegrityError("phase-plane step failure: %s" % sol.message)
        if sol.status == 1 and len(sol.t_events[1]):
            raise PhiIntegrityError(
                "trajectory reached phi = mu xi at xi = %r; integrator fault"
                % float(to_xi(sol.t_events[1][0]))
            )
        t0, t1 = sol.t[0], sol.t[-1]
        ts = np.union1d(sol.t, np.linspace(t0, t1, 257))
        span = t1 - t0
        if span > 0.0:
            # cluster extra samples toward the leg end; the approach branch
            # needs resolution on the last decades of w* - xi
            ts = np.union1d(ts, t1 - np.geomspace(span * 1e-7, span, 121))
        ts = ts[(ts >= t0) & (ts <= t1)]
        vals = sol.sol(ts)[0]
        legs.append((to_xi(ts), vals))
        floored = sol.status == 1 and len(sol.t_events[0]) > 0
        return floored, sol.t[-1]

    if xi0 < xi_hi1:
        hit_floor, t_end = run_leg(rhs_xi, (xi0, xi_hi1), [phi0], lambda t: t)
    else:
        t_end = xi0
        legs.append((np.array([xi0]), np.array([phi0])))

    if not hit_floor and opts.xi_max > _XI_CHART_SWITCH:
        s0 = math.log(max(t_end, xi0))
        y0 = [float(legs[-1][1][-1])]
        hit_floor, _ = run_leg(
            rhs_log, (s0, math.log(opts.xi_max)), y0, lambda t: np.exp(t)
        )

    xi = np.concatenate([leg[0] for leg in legs])
    phi = np.concatenate([leg[1] for leg in legs])
    order = np.argsort(xi)
    xi, phi = xi[order], phi[order]
    keep = np.concatenate(([True], np.diff(xi) > 0.0))
    xi, phi = xi[keep], phi[keep]

    if np.any(phi <= 0.0) or np.any(phi >= params.mu * xi * (1.0 + 1e-12)):
        raise PhiIntegrityError("samples violate 0 < phi < mu xi")

    regime = PhiRegime.APPROACHING_WSTAR if hit_floor else PhiRegime.UNBOUNDED
    end_state = {
        "xi_end": float(xi[-1]),
        "phi_end": float(phi[-1]),
        "reason": "phi_floor" if hit_floor else "xi_max",
    }
    return PhiSolution(
        params=params,
        beta=beta,
        xi=xi,
        phi=phi,
        regime=regime,
        end_state=end_state,
        opts=opts,
    )


def phi_from_profile(sol: ProfileSolution):
    """Reconstruct (xi, phi) = (w, r w') from a profile run.

    Valid on the region where w is strictly increasing, which is the whole
    run up to the first turning point.
    """
    wp = sol.wp
    n = len(wp)
    stop = n
    for i in range(n):
        if wp[i] <= 0.0:
            stop = i
            break
    if stop < 2:
        raise ParamsError("profile has no increasing-w region to map")
    return sol.w[:stop], sol.r[:stop] * wp[:stop]


def _window_mask(x, lo, hi):
    return (x >= lo) & (x <= hi)


def fit_tail(sol, kind):
    """Extract a tail constant by least squares over the default window.

    K_C: constant fit of phi xi^(-p/2) over the last decade of xi of an
    unbounded phase-plane run.  K_star: through-origin slope of phi against
    d = w* - xi over the last decade of d on the approach branch.  K_log:
    slope of w^((2-p)/2) against log r over the last decade of log r of a
    profile run; the fit model includes the subdominant log log r term
    (a s + b ln s + c in s = log r) so the reported slope is the limit
    value of the ratio rather than its slowly drifting finite-r value.
    Windows shorter than one decade are refused.
    """
    kind = TailKind(kind) if not isinstance(kind, TailKind) else kind
    if kind is TailKind.K_LOG:
        if not isinstance(sol, ProfileSolution):
            raise TypeError("K_log fits a ProfileSolution")
        return _fit_klog(sol)
    if not isinstance(sol, PhiSolution):
        raise TypeError("%s fits a PhiSolution" % kind.value)
    if kind is TailKind.K_C:
        return _fit_kc(sol)
    return _fit_kstar(sol)


def _require_decade(lo, hi, what):
    if not (hi > 0.0 and lo > 0.0 and hi / lo >= 10.0 - 1e-12):
        raise ParamsError(
            "%s window [%g, %g] is shorter than one decade" % (what, lo, hi)
        )


def _fit_kc(sol):
    p = sol.params.p
    hi = float(sol.xi[-1])
    lo = hi / 10.0
    _require_decade(sol.xi[0], hi, "K_C")
    m = _window_mask(sol.xi, lo, hi)
    ratio = sol.phi[m] * sol.xi[m] ** (-0.5 * p)
    fitted = float(np.mean(ratio))
    tc = theory_constants(sol.params, sol.beta)
    theory = tc.K
    return TailFit(
        kind=TailKind.K_C,
        fitted=fitted,
        theory=theory,
        window_lo=lo,
        window_hi=hi,
        rel_err=abs(fitted - theory) / abs(theory),
    )


def _fit_kstar(sol):
    w_star = sol.params.w_star
    below = sol.xi < w_star
    if not np.any(below):
        raise ParamsError("no samples below w*; K_star window is empty")
    xi = sol.xi[below]
    phi = sol.phi[below]
    # Restrict to the approach branch (after the hump of phi) and anchor
    # the window where the secant ratio phi/d is within 10% of its best
    # value: below that the trajectory has peeled off the linear law, since
    # any computed run sits at a slightly off-critical rate.  The slope fit
    # keeps a free intercept, which absorbs the residual offset.
    hump = int(np.argmax(phi))
    da = w_star - xi[hump:]
    pa = phi[hump:]
    if da.size < 8:
        raise ParamsError("K_star approach branch holds fewer than 8 samples")
    ratio = pa / da
    good = ratio >= 0.9 * ratio.max()
    d_lo = float(da[good].min())
    d_hi = 10.0 * d_lo
    _require_decade(d_lo, d_hi, "K_star")
    m = _window_mask(da, d_lo, d_hi)
    if np.count_nonzero(m) < 8:
        raise ParamsError("K_star window holds fewer than 8 samples")
    dd, pp = da[m], pa[m]
    if dd.max() < 3.0 * dd.min():
        raise ParamsError("K_star window covers less than half a decade of data")
    fitted = float(np.polyfit(dd, pp, 1)[0])
    tc = theory_constants(sol.params, sol.beta)
    theory = tc.K_star
    return TailFit(
        kind=TailKind.K_STAR,
        fitted=fitted,
        theory=theory,
        window_lo=d_lo,
        window_hi=d_hi,
        rel_err=abs(fitted - theory) / abs(theory),
    )


def _fit_klog(sol):
    p = sol.params.p
    pos = sol.r > 0.0
    s = np.log(sol.r[pos])
    W = sol.w[pos] ** (0.5 * (2.0 - p))
    s_hi = float(s[-1])
    s_lo = s_hi / 10.0
    _require_decade(s_lo, s_hi, "K_log")
    m = _window_mask(s, s_lo, s_hi)
    if np.count_nonzero(m) < 8:
        raise ParamsError("K_log window holds fewer than 8 samples")
    ss, ww = s[m], W[m]
    basis = np.vstack([ss, np.log(ss), np.ones_like(ss)]).T
    coef = np.linalg.lstsq(basis, ww, rcond=None)[0]
    fitted = float(coef[0])
    tc = theory_constants(sol.params, sol.beta)
    theory = 0.5 * (2.0 - p) * tc.K
    return TailFit(
        kind=TailKind.K_LOG,
        fitted=fitted,
        theory=theory,
        window_lo=s_lo,
        window_hi=s_hi,
        rel_err=abs(fitted - theory) / abs(theory),
    )


def phi_upper_coarse(params, beta, xi):
    """Global upper bound K xi^(p/2), K = max(mu^(p/2)/beta, (p mu - N)/(mu - N))."""
    xi = np.asarray(xi, dtype=float)
    mu, p, N = params.mu, params.p, params.N
    K = max(_pow(mu, 0.5 * p) / beta, (p * mu - N) / (mu - N))
    return K * xi ** (0.5 * p)


def refined_upper_xi0(params, beta):
    """Threshold xi_0 above which the refined upper bound applies."""
    mu, p, N = params.mu, params.p, params.N
    K = _pow(mu, 0.5 * p) / beta
    base = max(K, (p * mu - N) / (mu - N)) * (p * mu - N) / (mu * (mu - N))
    return _pow(base, 2.0 / (2.0 - p))


def phi_upper_refined(params, beta, xi):
    """Refined bound K xi^(p/2) + ((p mu - N)/(mu - N) - K)_+ xi_0^(p/2)."""
    xi = np.asarray(xi, dtype=float)
    mu, p, N = params.mu, params.p, params.N
    K = _pow(mu, 0.5 * p) / beta
    xi0 = refined_upper_xi0(params, beta)
    slack = max((p * mu - N) / (mu - N) - K, 0.0)
    return K * xi ** (0.5 * p) + slack * _pow(xi0, 0.5 * p)


def lower_bound_xi_eps(params, beta, eps):
    """Onset abscissa xi_eps of the lower bound, from its comparison proof."""
    mu, p, N = params.mu, params.p, params.N
    K = _pow(mu, 0.5 * p) / beta
    if not 0.0 < eps < K:
        raise ParamsError("eps must lie in (0, K(beta))")
    root = min(
        2.0 * (p * mu - N) / (p * (p - 1.0) * K),
        mu / (2.0 * K),
        _pow(0.5 * beta, 2.0 / p) * _pow(eps, 2.0 / p) / K,
        beta * eps / (2.0 * mu * (mu - N)) * _pow(0.5 * mu, 2.0 - p),
    )
    # root equals xi_eps^((p-2)/2) with p < 2, so invert with a negative power
    return _pow(root, 2.0 / (p - 2.0))


def phi_lower(params, beta, xi, eps):
    """Lower bound (K - eps)(xi^(p/2) - xi_eps^(p/2)) for xi > xi_eps."""
    xi = np.asarray(xi, dtype=float)
    mu, p = params.mu, params.p
    K = _pow(mu, 0.5 * p) / beta
    xi_eps = lower_bound_xi_eps(params, beta, eps)
    return (K - eps) * (xi ** (0.5 * p) - _pow(xi_eps, 0.5 * p))


def phi_bound_violations(sol: PhiSolution, tol=1e-9):
    """Check one solution against the wedge, upper, and lower bounds.

    Returns a list of violation records; empty means all bounds hold at
    mixed tolerance tol * max(1, bound).
    """
    params, beta = sol.params, sol.beta
    xi, phi = sol.xi, sol.phi
    out = []

    def slack(bound):
        return tol * np.maximum(1.0, np.abs(bound))

    def record(kind, mask, bound):
        for i in np.flatnonzero(mask)[:10]:
            out.append(
                {"kind": kind, "xi": float(xi[i]), "phi": float(phi[i]), "bound": float(np.asarray(bound)[i])}
            )

    wedge_hi = params.mu * xi
    record("wedge_low", phi <= -slack(0.0 * xi), 0.0 * xi)
    record("wedge_high", phi >= wedge_hi + slack(wedge_hi), wedge_hi)

    ub = phi_upper_coarse(params, beta, xi)
    record("upper_coarse", phi > ub + slack(ub), ub)

    xi0 = refined_upper_xi0(params, beta)
    m = xi > xi0
    if np.any(m):
        ub2 = phi_upper_refined(params, beta, xi[m])
        bad = phi[m] > ub2 + slack(ub2)
        for i, j in enumerate(np.flatnonzero(m)):
            if bad[i] and len(out) < 200:
                out.append(
                    {"kind": "upper_refined", "xi": float(xi[j]), "phi": float(phi[j]), "bound": float(ub2[i])}
                )

    tc = theory_constants(params, beta)
    eps = 0.5 * tc.K
    xi_eps = lower_bound_xi_eps(params, beta, eps)
    m = xi > xi_eps
    if np.any(m):
        lb = phi_lower(params, beta, xi[m], eps)
        bad = phi[m] < lb - slack(lb)
        for i, j in enumerate(np.flatnonzero(m)):
            if bad[i] and len(out) < 200:
                out.append(
                    {"kind": "lower", "xi": float(xi[j]), "phi": float(phi[j]), "bound": float(lb[i])}
                )
    return out


@dataclass(frozen=True)
class PhiBoundsReport:
    equal_beta: bool
    overlap: tuple
    n_checked: int
    violations: tuple

    @property
    def ok(self):
        return not self.equal_beta and len(self.violations) == 0


def check_phi_bounds(sol_a: PhiSolution, sol_b: PhiSolution, tol=1e-9):
    """Verify the beta-ordering on the overlap plus each solution's bounds.

    The solution with the smaller beta must lie strictly above the other
    wherever both are defined (flow comparison in beta); each solution is
    additionally checked against its own upper and lower bounds with
    eps = K(beta)/2.  Violations come back as findings in the report, never
    as exceptions; equal betas are flagged and skip the ordering check.
    """
    if sol_b.beta < sol_a.beta:
        sol_a, sol_b = sol_b, sol_a
    equal = sol_a.beta == sol_b.beta

    # Skip the first decade above the later series start: there both
    # trajectories hug mu xi to within the start remainder and an ordering
    # check would only measure interpolation noise.
    lo = 10.0 * max(float(sol_a.xi[0]), float(sol_b.xi[0]))
    hi = min(float(sol_a.xi[-1]), float(sol_b.xi[-1]))
    findings = []
    n = 0
    if not equal and hi > lo:
        grid = np.geomspace(lo, hi, 256)
        pa = sol_a.phi_at(grid)
        pb = sol_b.phi_at(grid)
        slack = tol * np.maximum(1.0, np.abs(pa))
        bad = pb >= pa + slack
        n = grid.size
        for i in np.flatnonzero(bad)[:10]:
            findings.append(
                {
                    "kind": "ordering",
                    "xi": float(grid[i]),
                    "phi_lo_beta": float(pa[i]),
                    "phi_hi_beta": float(pb[i]),
                }
            )
    for sol in (sol_a, sol_b):
        findings.extend(phi_bound_violations(sol, tol=tol))
    return PhiBoundsReport(
        equal_beta=equal,
        overlap=(lo, hi),
        n_checked=n,
        violations=tuple(findings),
    )
