"""Shooting integration of the profile ODE.

The profile f solves, for r > 0,

    (|f'|^{p-2} f')' + (N-1)/r |f'|^{p-2} f' + beta (r f' + mu f) = |f'|^{p/2},
    f(0) = 1,  f'(0) = 0,

which is integrated as a first-order system in the flux variable
g = -|f'|^{p-2} f' (g > 0 wherever f decreases).  r = 0 is a singular
point, so integration starts from a third-order series at a small
r_start and proceeds outward.  Beyond r_switch the run continues in
(w, dw/ds) variables with w = r^mu f and s = log r, which keeps the
slowly growing quantity w well scaled out to r = e^30 where f itself
would underflow.

Event detection drives the downstream trichotomy: the first zero of w'
(with the running max of w), the first zero of f, and the first
crossing of the certification threshold w_star*(1+delta_c).
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .params import ParamsError


class Termination(Enum):
    FZERO = "FZero"
    WPRIME_ZERO = "WPrimeZero"
    W_EXCEEDS_WSTAR = "WExceedsWStar"
    RMAX_REACHED = "RMaxReached"
    STEP_FAILURE = "StepFailure"


class SeriesRangeError(ValueError):
    """Radius outside the validity budget of the startup series."""


class ProfileRangeError(ValueError):
    """Evaluation request outside the computed profile range."""


class StepFailureError(RuntimeError):
    """Adaptive stepper underflowed; carries the partial solution."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances and stopping policy for integrate_profile.

    delta_c is the relative exceedance margin: w >= w_star*(1+delta_c)
    certifies the unbounded class.  A strictly positive margin is
    required because near-critical runs approach w_star from below.
    stop_on_w_exceed=False keeps integrating past the threshold (used
    for tail asymptotics and residual grids); the crossing radius is
    still recorded.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    r_max: float = math.exp(30.0)
    delta_c: float = 1e-6
    stop_on_w_exceed: bool = True
    r_start: float | None = None  # None: series remainder budget rule
    n_dense: int = 0  # extra log-spaced samples per integration leg
    series_budget: float = 1e-13  # |last retained term| at the handoff

    def validated(self):
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise ParamsError("tolerances must be strictly positive")
        if not (self.delta_c > 0.0):
            raise ParamsError("delta_c must be strictly positive")
        if self.r_start is not None and not (0.0 < self.r_start < self.r_max):
            raise ParamsError(
                f"r_start={self.r_start!r} must lie in (0, r_max={self.r_max!r})"
            )
        if not (self.r_max > 0.0) or not (self.series_budget > 0.0):
            raise ParamsError("r_max and series_budget must be positive")
        return self


@dataclass(frozen=True)
class EventSet:
    """Certifying events of one shooting run.

    R1:      first zero of w' (w_max = w(R1) there; if both R1 and R are
             present then R1 < R, w' changes sign once before f vanishes).
    R:       first zero of f.
    r_cross: first radius with w >= w_star*(1+delta_c).
    w_max:   running maximum of w over the whole run.
    """

    R1: float | None
    R: float | None
    r_cross: float | None
    w_max: float


@dataclass
class ProfileSolution:
    """One shooting run: sampled profile, events, termination reason.

    Sample arrays are parallel, ordered by strictly increasing r, and
    satisfy g = -|fp|^{p-2} fp and w = r^mu f to round-off (the second
    chart's samples are converted through exact formulas).  Immutable
    by convention once returned.
    """

    params: object
    beta: float
    r: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    g: np.ndarray
    w: np.ndarray
    wp: np.ndarray
    E: np.ndarray
    events: EventSet
    termination: Termination
    r_start: float
    r_switch: float
    opts: IntegratorOptions
    _interp: dict = field(default=None, init=False, repr=False)

    def f_at(self, rho):
        """Profile value at radii rho: startup series below r_start,
        monotone cubic interpolation of the samples elsewhere.

        Raises ProfileRangeError beyond the computed range.
        """
        rho = np.asarray(rho, dtype=float)
        scalar = rho.ndim == 0
        rho = np.atleast_1d(rho)
        if np.any(rho < 0.0) or np.any(rho > self.r[-1]):
            raise ProfileRangeError(
                f"radius outside computed range [0, {self.r[-1]!r}]"
            )
        out = np.empty_like(rho)
        low = rho < self.r_start
        if np.any(low):
            fs, _ = _series_pair(self.params, self.beta, rho[low])
            out[low] = fs
        if np.any(~low):
            out[~low] = self._interpolator("f")(np.log(rho[~low]))
        return float(out[0]) if scalar else out

    def fp_at(self, rho):
        """Profile slope at radii rho, same domain rules as f_at."""
        rho = np.asarray(rho, dtype=float)
        scalar = rho.ndim == 0
        rho = np.atleast_1d(rho)
        if np.any(rho < 0.0) or np.any(rho > self.r[-1]):
            raise ProfileRangeError(
                f"radius outside computed range [0, {self.r[-1]!r}]"
            )
        out = np.empty_like(rho)
        low = rho < self.r_start
        if np.any(low):
            _, fps = _series_pair(self.params, self.beta, rho[low])
            out[low] = fps
        if np.any(~low):
            out[~low] = self._interpolator("fp")(np.log(rho[~low]))
        return float(out[0]) if scalar else out

    def _interpolator(self, which):
        # f rides a Hermite cubic on the stored slopes (df/dlog r = r f'),
        # which keeps the decreasing shape and the integrator's accuracy;
        # fp has no stored derivative, so it gets the monotone fit.
        if self._interp is None:
            self._interp = {}
        if which not in self._interp:
            x = np.log(self.r)
            if which == "f":
                spline = CubicHermiteSpline(x, self.f, self.r * self.fp, extrapolate=False)
            else:
                spline = PchipInterpolator(x, self.fp, extrapolate=False)
            self._interp[which] = spline
        return self._interp[which]


def default_r_start(params, beta, budget=1e-13):
    """Series handoff radius: |last retained term| = budget, clamped to
    [1e-8, 1e-3].  Falls back to the second-order term when the
    third-order coefficient vanishes (beta = B1)."""
    c = params.exp_coeffs
    p, mu, N = params.p, params.mu, params.N
    A = beta * mu / N
    coef3 = abs(c.C3 * (beta - c.B1)) * A ** ((3.0 - p) / (p - 1.0))
    if coef3 > 1e-300:
        r = (budget / coef3) ** ((p - 1.0) / (2.0 * p))
    else:
        coef2 = c.C2 * A ** ((4.0 - p) / (2.0 * (p - 1.0)))
        r = (budget / coef2) ** (2.0 * (p - 1.0) / (3.0 * p))
    return min(max(r, 1e-8), 1e-3)


def series_range_max(params, beta, budget=1e-9):
    """Largest radius at which the truncated series is served, from the
    same last-term heuristic at a looser budget than the handoff."""
    c = params.exp_coeffs
    p, mu, N = params.p, params.mu, params.N
    A = beta * mu / N
    coef3 = abs(c.C3 * (beta - c.B1)) * A ** ((3.0 - p) / (p - 1.0))
    if coef3 > 1e-300:
        return (budget / coef3) ** ((p - 1.0) / (2.0 * p))
    coef2 = c.C2 * A ** ((4.0 - p) / (2.0 * (p - 1.0)))
    return (budget / coef2) ** (2.0 * (p - 1.0) / (3.0 * p))


def _series_pair(params, beta, r):
    """Third-order truncations of f and f' near the origin (no range check)."""
    c = params.exp_coeffs
    p, mu, N = params.p, params.mu, params.N
    r = np.asarray(r, dtype=float)
    A = beta * mu / N
    X = A ** (1.0 / (p - 1.0))
    f = (
        1.0
        - c.C1 * X * r ** (p / (p - 1.0))
        + c.C2 * A ** ((4.0 - p) / (2.0 * (p - 1.0))) * r ** (1.5 * p / (p - 1.0))
        + c.C3 * (beta - c.B1) * A ** ((3.0 - p) / (p - 1.0)) * r ** (2.0 * p / (p - 1.0))
    )
    fp3 = (beta - c.B0) / ((2.0 - p) * (p + N * (p - 1.0))) - 2.0 * c.B0 ** 2 / (
        p * p * (2.0 - p)
    )
    fp = (
        -X * r ** (1.0 / (p - 1.0))
        + (2.0 / (p * (2.0 * N + 1.0) - 2.0 * N))
        * A ** ((4.0 - p) / (2.0 * (p - 1.0)))
        * r ** ((p + 2.0) / (2.0 * (p - 1.0)))
        + fp3 * A ** ((3.0 - p) / (p - 1.0)) * r ** ((p + 1.0) / (p - 1.0))
    )
    return f, fp


def series_eval(params, beta, r):
    """Startup series (f, f') at small r.

    Refuses radii beyond the truncation budget; the admissible bound is
    reported in the error.
    """
    if beta <= 0.0:
        raise ParamsError(f"beta must be positive, got {beta!r}")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0.0):
        raise SeriesRangeError("series requires r > 0")
    r_ok = series_range_max(params, beta)
    if np.any(r_arr > r_ok):
        raise SeriesRangeError(
            f"r={r!r} beyond series validity; admissible bound r <= {r_ok!r}"
        )
    f, fp = _series_pair(params, beta, r_arr)
    if np.ndim(r) == 0:
        return float(f), float(fp)
    return f, fp


def rhs_fg(params, beta, r, f, g):
    """Right-hand side of the (f, g) system.

    f' = -|g|^{(2-p)/(p-1)} g
    g' = -(N-1) g / r + beta (mu f + r f') - |g|^{p/(2(p-1))}
    """
    p, mu, N = params.p, params.mu, params.N
    ag = abs(g)
    fp = -(ag ** ((2.0 - p) / (p - 1.0))) * g
    gp = -(N - 1.0) * g / r + beta * (mu * f + r * fp) - ag ** (p / (2.0 * (p - 1.0)))
    return fp, gp


def rhs_w_logr(params, beta, s, w, v):
    """Right-hand side of the (w, v) system in s = log r, v = dw/ds.

    Using r^2 w'' = v' - v, the second-order w-equation becomes
    v' = v - [ (N-1-2mu(p-1)) v + mu(mu-N) w
               + |v-mu w|^{2-p} (beta v - |v-mu w|^{p/2}) ] / (p-1).
    """
    p, mu, N = params.p, params.mu, params.N
    d = abs(v - mu * w)
    bracket = (
        (N - 1.0 - 2.0 * mu * (p - 1.0)) * v
        + mu * (mu - N) * w
        + d ** (2.0 - p) * (beta * v - d ** (0.5 * p))
    )
    return v, v - bracket / (p - 1.0)


def _event(fn, terminal, direction):
    fn.terminal = terminal
    fn.direction = direction
    return fn


def _leg_samples(sol, n_dense):
    """Sample abscissae for one integration leg: accepted steps plus
    optional log-spaced refinement, deduplicated and sorted."""
    t = sol.t
    if n_dense > 0 and t[-1] > t[0]:
        lo, hi = t[0], t[-1]
        if lo > 0:
            extra = np.geomspace(lo, hi, n_dense)
        else:
            extra = np.linspace(lo, hi, n_dense)
        t = np.unique(np.concatenate([t, extra]))
    return t, sol.sol(t)


def integrate_profile(params, beta, opts=None):
    """Shoot the profile ODE outward from the series handoff.

    Terminates on the first of: f = 0 crossing, w' = 0 crossing,
    w >= w_star*(1+delta_c) (when stop_on_w_exceed), or r = r_max.
    After a w' = 0 event the run is continued to locate the zero of f;
    the termination reason stays WPRIME_ZERO (the decisive event), and
    the zero radius is reported as events.R.  Step-controller underflow
    yields termination STEP_FAILURE with the samples accumulated so far.
    """
    beta = float(beta)
    if not (beta > 0.0) or not math.isfinite(beta):
        raise ParamsError(f"beta must be positive and finite, got {beta!r}")
    opts = (opts or IntegratorOptions()).validated()
    p, mu, N = params.p, params.mu, params.N
    thr = params.w_star * (1.0 + opts.delta_c)

    r0 = opts.r_start if opts.r_start is not None else default_r_start(
        params, beta, opts.series_budget
    )
    if not (r0 < opts.r_max):
        raise ParamsError(f"r_start={r0!r} must be below r_max={opts.r_max!r}")
    f0, fp0 = _series_pair(params, beta, r0)
    g0 = (-fp0) ** (p - 1.0)  # fp0 < 0 for every beta > 0
    r_switch = max(1.0, 10.0 * r0)

    chunks = []  # collected (r, f, fp, g, w, wp) blocks
    R1 = R = r_cross = None
    w_max = 0.0
    termination = None

    def fg_rhs(r, y):
        fp, gp = rhs_fg(params, beta, r, y[0], y[1])
        return (fp, gp)

    def wv_rhs(s, y):
        return rhs_w_logr(params, beta, s, y[0], y[1])

    def collect_fg(sol):
        t, y = _leg_samples(sol, opts.n_dense)
        f, g = y[0], y[1]
        ag = np.abs(g)
        fp = -(ag ** ((2.0 - p) / (p - 1.0))) * g
        w = t ** mu * f
        wp = t ** (mu - 1.0) * (mu * f + t * fp)
        chunks.append((t, f, fp, g, w, wp))
        return float(np.max(w))

    def collect_wv(sol):
        t, y = _leg_samples(sol, opts.n_dense)
        w, v = y[0], y[1]
        r = np.exp(t)
        f = w * np.exp(-mu * t)
        fp = (v - mu * w) * np.exp(-(mu + 1.0) * t)
        ag = np.abs(fp)
        g = -np.sign(fp) * ag ** (p - 1.0)
        wp = v / r
        chunks.append((r, f, fp, g, w, wp))
        return float(np.max(w))

    def run(rhs, span, y0, events):
        try:
            sol = solve_ivp(
                rhs,
                span,
                y0,
                method="RK45",
                rtol=opts.rtol,
                atol=opts.atol,
                dense_output=True,
                events=events,
            )
        except (ValueError, FloatingPointError, OverflowError) as exc:
            return None, f"integrator raised {exc!r}"
        if sol.status == -1:
            return None, sol.message
        return sol, None

    # ------- phase 1: (f, g) chart on [r0, min(r_switch, r_max)] -------
    ev_f = _event(lambda r, y: y[0], True, -1.0)
    ev_wp = _event(
        lambda r, y: mu * y[0] - r * (abs(y[1]) ** ((2.0 - p) / (p - 1.0))) * y[1],
        True,
        -1.0,
    )
    ev_cross = _event(
        lambda r, y: r ** mu * y[0] - thr, opts.stop_on_w_exceed, 1.0
    )

    r_hi = min(r_switch, opts.r_max)
    sol, err = run(fg_rhs, (r0, r_hi), (f0, g0), [ev_f, ev_wp, ev_cross])
    state = None  # carried (f, g) or (w, v) state for the next leg
    if sol is None:
        termination = Termination.STEP_FAILURE
    else:
        w_max = max(w_max, collect_fg(sol))
        if sol.t_events[2].size:  # threshold crossing recorded either way
            r_cross = float(sol.t_events[2][0])
        if sol.t_events[0].size:
            R = float(sol.t_events[0][0])
            termination = Termination.FZERO
        elif sol.t_events[1].size:
            R1 = float(sol.t_events[1][0])
            w_max = max(w_max, R1 ** mu * float(sol.y_events[1][0][0]))
            state = ("fg", R1, tuple(sol.y_events[1][0]))
            termination = Termination.WPRIME_ZERO
        elif r_cross is not None and opts.stop_on_w_exceed:
            termination = Termination.W_EXCEEDS_WSTAR
        else:
            state = ("fg", float(sol.t[-1]), (float(sol.y[0][-1]), float(sol.y[1][-1])))

    # ------- continuation after w' = 0: locate the zero of f -------
    def continue_to_fzero(kind, t_from, y_from):
        nonlocal R
        if kind == "fg" and t_from < min(r_switch, opts.r_max):
            sol1, err1 = run(
                fg_rhs, (t_from, min(r_switch, opts.r_max)), y_from, [ev_f]
            )
            if sol1 is None:
                return False
            collect_fg(sol1)
            if sol1.t_events[0].size:
                R = float(sol1.t_events[0][0])
                return True
            t_from = float(sol1.t[-1])
            y = (float(sol1.y[0][-1]), float(sol1.y[1][-1]))
            if t_from >= opts.r_max or opts.r_max <= r_switch:
                return True
            f1, g1 = y
            fp1 = -(abs(g1) ** ((2.0 - p) / (p - 1.0))) * g1
            s_from = math.log(t_from)
            y_from = (t_from ** mu * f1, t_from ** mu * (mu * f1 + t_from * fp1))
            kind = "wv"
        elif kind == "fg":
            kind = "wv"
            f1, g1 = y_from
            fp1 = -(abs(g1) ** ((2.0 - p) / (p - 1.0))) * g1
            s_from = math.log(t_from)
            y_from = (t_from ** mu * f1, t_from ** mu * (mu * f1 + t_from * fp1))
        else:
            s_from = t_from
        ev_w0 = _event(lambda s, y: y[0], True, -1.0)
        sol2, err2 = run(
            wv_rhs, (s_from, math.log(opts.r_max)), y_from, [ev_w0]
        )
        if sol2 is None:
            return False
        collect_wv(sol2)
        if sol2.t_events[0].size:
            R = math.exp(float(sol2.t_events[0][0]))
        return True

    if termination is Termination.WPRIME_ZERO and state is not None:
        kind, t_from, y_from = state
        if not continue_to_fzero(kind, t_from, y_from):
            pass  # decisive event already certified; keep WPRIME_ZERO
        state = None

    # ------- phase 2: (w, v) chart in s = log r up to log r_max -------
    if termination is None and state is not None and opts.r_max > r_switch:
        kind, r_from, (f1, g1) = state
        fp1 = -(abs(g1) ** ((2.0 - p) / (p - 1.0))) * g1
        w1 = r_from ** mu * f1
        v1 = r_from ** mu * (mu * f1 + r_from * fp1)
        s0, s1 = math.log(r_from), math.log(opts.r_max)

        ev_v = _event(lambda s, y: y[1], True, -1.0)
        ev_w0 = _event(lambda s, y: y[0], True, -1.0)
        ev_cross2 = _event(
            lambda s, y: y[0] - thr, opts.stop_on_w_exceed, 1.0
        )
        sol, err = run(wv_rhs, (s0, s1), (w1, v1), [ev_w0, ev_v, ev_cross2])
        if sol is None:
            termination = Termination.STEP_FAILURE
        else:
            w_max = max(w_max, collect_wv(sol))
            if sol.t_events[2].size and r_cross is None:
                r_cross = math.exp(float(sol.t_events[2][0]))
            if sol.t_events[0].size:
                R = math.exp(float(sol.t_events[0][0]))
                termination = Termination.FZERO
            elif sol.t_events[1].size:
                s_ev = float(sol.t_events[1][0])
                R1 = math.exp(s_ev)
                w_max = max(w_max, float(sol.y_events[1][0][0]))
                termination = Termination.WPRIME_ZERO
                continue_to_fzero("wv", s_ev, tuple(sol.y_events[1][0]))
            elif r_cross is not None and opts.stop_on_w_exceed:
                termination = Termination.W_EXCEEDS_WSTAR
            else:
                termination = Termination.RMAX_REACHED
    elif termination is None:
        termination = Termination.RMAX_REACHED

    # ------- assemble samples -------
    if not chunks:
        # stepper failed on the very first leg: report the start point
        wp0 = r0 ** (mu - 1.0) * (mu * f0 + r0 * fp0)
        chunks.append(tuple(np.array([x]) for x in (r0, f0, fp0, g0, r0 ** mu * f0, wp0)))
    rs = np.concatenate([c[0] for c in chunks])
    order = np.argsort(rs, kind="stable")
    cols = [np.concatenate([c[i] for c in chunks])[order] for i in range(1, 6)]
    rs = rs[order]
    keep = np.empty(rs.shape, dtype=bool)
    keep[0] = True
    keep[1:] = np.diff(rs) > 0.0  # drop duplicated leg junctions
    rs = rs[keep]
    f, fp, g, w, wp = (c[keep] for c in cols)
    E = (p - 1.0) / p * np.abs(fp) ** p + 0.5 * mu * beta * f ** 2
    w_max = max(w_max, float(np.max(w)))

    events = EventSet(R1=R1, R=R, r_cross=r_cross, w_max=w_max)
    return ProfileSolution(
        params=params,
        beta=beta,
        r=rs,
        f=f,
        fp=fp,
        g=g,
        w=w,
        wp=wp,
        E=E,
        events=events,
        termination=termination,
        r_start=r0,
        r_switch=r_switch,
        opts=opts,
    )


def energy_series(sol):
    """(r, E) pairs along the run; E = (p-1)|f'|^p/p + mu beta f^2/2 is
    nonincreasing along exact trajectories."""
    return sol.r, sol.E
