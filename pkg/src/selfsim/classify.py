"""Trichotomy verdicts and bisection for the critical shooting rate.

For small beta the rescaled profile w = r^mu f climbs past the plateau w*
(verdict C); for large beta, w turns around below w* or f reaches zero
(verdict A).  Both regimes are open intervals in beta, so the critical rate
beta* in between can be bracketed by bisection on verdicts alone.  classify()
turns one integration into a verdict with a numerical witness,
find_beta_star() runs the bisection, and solve_limit_profile() integrates
the beta -> infinity limit problem used as an independent cross-check of
the large-beta regime.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .params import ParamsError, _pow
from .profile import (
    IntegratorOptions,
    ProfileRangeError,
    Termination,
    integrate_profile,
)

# Doubling beta past this without an A verdict means the inputs are outside
# the regime the solver is built for; admissible params never get close.
BETA_HI_CAP = 1.0e6

_LIMIT_S_MAX = 50.0


class BracketError(RuntimeError):
    """Bracket seeding failed to certify both sides."""


class Verdict(enum.Enum):
    A = "A"
    C = "C"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Classification:
    """Verdict for one beta, with the witness radii that certify it."""

    beta: float
    verdict: Verdict
    witness: dict
    termination: Termination

    @property
    def witness_r(self):
        # Certificate radius: where w' = 0 (A), where f = 0 (A without a
        # prior turning point), where w crossed the margin (C), or how far
        # the run got (Inconclusive).
        for key in ("R1", "R", "r_cross", "r_max"):
            if key in self.witness and self.witness[key] is not None:
                return float(self.witness[key])
        return math.nan


def classify(params, beta, opts=None):
    """Integrate at one beta and map the termination to a verdict.

    WPrimeZero with w_max < w* or FZero certify A; crossing the exceedance
    margin w*(1 + delta_c) certifies C.  Reaching r_max, or a turning point
    inside the margin band [w*, w*(1+delta_c)), is Inconclusive.  Step
    failures propagate as StepFailureError with partial data attached.
    """
    opts = (opts if opts is not None else IntegratorOptions()).validated()
    sol = integrate_profile(params, beta, opts)
    ev = sol.events
    term = sol.termination

    if term is Termination.FZERO:
        return Classification(beta, Verdict.A, {"R": ev.R}, term)

    if term is Termination.WPRIME_ZERO:
        if ev.w_max < params.w_star:
            wit = {"R1": ev.R1, "w_max": ev.w_max}
            if ev.R is not None:
                wit["R"] = ev.R
            return Classification(beta, Verdict.A, wit, term)
        # w' = 0 inside the margin band: neither certificate applies.
        wit = {
            "R1": ev.R1,
            "w_max": ev.w_max,
            "r_max": float(sol.r[-1]),
        }
        return Classification(beta, Verdict.INCONCLUSIVE, wit, term)

    if term is Termination.W_EXCEEDS_WSTAR:
        wit = {"r_cross": ev.r_cross, "w_max": ev.w_max}
        return Classification(beta, Verdict.C, wit, term)

    # RMaxReached: report the end state so callers can judge proximity.
    wit = {
        "r_max": float(sol.r[-1]),
        "w": float(sol.w[-1]),
        "wp": float(sol.wp[-1]),
    }
    return Classification(beta, Verdict.INCONCLUSIVE, wit, term)


@dataclass(frozen=True)
class BisectionReport:
    params: object
    beta_star: float
    bracket_lo: float
    bracket_hi: float
    iterations: int
    tol_beta: float
    r_max_used: float
    history: tuple


def find_beta_star(params, tol_beta=1e-8, opts=None, max_iter=80):
    """Bracket the critical rate by bisection on classification verdicts.

    Seeding is certificate-backed: the C side starts from the closed-form
    guarantee that (2 beta mu)^(-2/(2-p)) > 2 w* forces exceedance, halving
    until the verdict confirms; the A side doubles from beta = 1.  An
    Inconclusive midpoint gets one retry with doubled r_max; if it stays
    Inconclusive the bisection stops and reports the bracket it achieved.
    The procedure is deterministic, so repeated calls are bit-identical.
    """
    if not (isinstance(tol_beta, float) or isinstance(tol_beta, int)):
        raise ParamsError("tol_beta must be a positive real")
    tol_beta = float(tol_beta)
    if not (math.isfinite(tol_beta) and tol_beta > 0.0):
        raise ParamsError("tol_beta must be a positive real")
    opts = (opts if opts is not None else IntegratorOptions()).validated()

    history = []

    def probe(beta, o):
        c = classify(params, beta, o)
        history.append(c)
        return c

    # Largest beta whose sup bound (2 beta mu)^(-2/(2-p)) still clears 2 w*.
    lo = _pow(2.0 * params.w_star, -(2.0 - params.p) / 2.0) / (2.0 * params.mu)
    c = probe(lo, opts)
    halvings = 0
    while c.verdict is not Verdict.C:
        lo *= 0.5
        halvings += 1
        if halvings > 200:
            raise BracketError("halving the C-side seed never produced a C verdict")
        c = probe(lo, opts)

    hi = 1.0
    c = probe(hi, opts)
    while c.verdict is not Verdict.A:
        hi *= 2.0
        if hi > BETA_HI_CAP:
            raise BracketError(
                "no A verdict found below beta = %g; inputs outside the "
                "supported regime" % BETA_HI_CAP
            )
        c = probe(hi, opts)
    if not lo < hi:
        raise BracketError("seeding produced an empty bracket")

    iterations = 0
    while hi - lo > tol_beta and iterations < max_iter:
        mid = 0.5 * (lo + hi)
        iterations += 1
        c = probe(mid, opts)
        if c.verdict is Verdict.INCONCLUSIVE:
            opts = replace(opts, r_max=2.0 * opts.r_max)
            c = probe(mid, opts)
            if c.verdict is Verdict.INCONCLUSIVE:
                # Both certificates out of reach: mid is numerically at
                # beta*, and the bracket cannot be split further.
                break
        if c.verdict is Verdict.A:
            hi = mid
        else:
            lo = mid

    return BisectionReport(
        params=params,
        beta_star=0.5 * (lo + hi),
        bracket_lo=lo,
        bracket_hi=hi,
        iterations=iterations,
        tol_beta=tol_beta,
        r_max_used=opts.r_max,
        history=tuple(history),
    )


@dataclass
class LimitProfile:
    """Solution of the large-beta limit problem with its first zero S0."""

    params: object
    s: np.ndarray
    h: np.ndarray
    hp: np.ndarray
    S0: float
    s_start: float
    _interp: object = field(default=None, init=False, repr=False)

    def h_at(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0) or np.any(x > self.S0):
            raise ProfileRangeError(
                "argument outside [0, %r]" % self.S0
            )
        if self._interp is None:
            self._interp = PchipInterpolator(self.s, self.h, extrapolate=False)
        small = x < self.s_start
        out = np.empty_like(x)
        if np.any(small):
            out[small] = _limit_series(self.params, x[small])[0]
        if np.any(~small):
            out[~small] = self._interp(np.minimum(x[~small], self.s[-1]))
        return out if out.ndim else float(out)


def _limit_series(params, s):
    # Leading behaviour at the origin: the flux G = -|h'|^(p-2) h' grows like
    # (mu/N) s, so h = 1 - C1 (mu/N)^(1/(p-1)) s^(p/(p-1)).  The half-integer
    # correction of the full equation is absent here (no absorption term).
    p, mu, N = params.p, params.mu, params.N
    s = np.asarray(s, dtype=float)
    A = mu / N
    C1 = (p - 1.0) / p
    h = 1.0 - C1 * _pow(A, 1.0 / (p - 1.0)) * s ** (p / (p - 1.0))
    hp = -_pow(A, 1.0 / (p - 1.0)) * s ** (1.0 / (p - 1.0))
    G = A * s
    return h, hp, G


def limit_rhs(params, s, h, G):
    """Right-hand side of the limit problem in (h, G), G = -|h'|^(p-2) h'."""
    ex = (2.0 - params.p) / (params.p - 1.0)
    hp = -abs(G) ** ex * G
    Gp = -(params.N - 1.0) * G / s + s * hp + params.mu * h
    return hp, Gp


def solve_limit_profile(params, opts=None):
    """Integrate the limit problem from a series start to the zero of h."""
    opts = (opts if opts is not None else IntegratorOptions()).validated()
    s0 = 1e-6
    h0, _, G0 = _limit_series(params, s0)

    def rhs(s, y):
        hp, Gp = limit_rhs(params, s, y[0], y[1])
        return [hp, Gp]

    def hit_zero(s, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1.0

    sol = solve_ivp(
        rhs,
        (s0, _LIMIT_S_MAX),
        [float(h0), float(G0)],
        method="RK45",
        rtol=opts.rtol,
        atol=opts.atol,
        events=[hit_zero],
        dense_output=True,
    )
    if sol.status < 0:
        raise RuntimeError("limit-problem integration failed: %s" % sol.message)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise RuntimeError(
            "h did not reach zero before s = %g" % _LIMIT_S_MAX
        )

    S0 = float(sol.t_events[0][0])
    s = sol.t
    if s[-1] < S0:
        s = np.append(s, S0)
    h, G = sol.sol(s)
    ex = (2.0 - params.p) / (params.p - 1.0)
    hp = -np.abs(G) ** ex * G
    # Clamp the event endpoint exactly; dense output leaves ~1e-15 dust.
    h[-1] = 0.0
    return LimitProfile(params=params, s=s, h=h, hp=hp, S0=S0, s_start=s0)
