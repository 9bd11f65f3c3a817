"""Problem instance and closed-form constants.

The PDE under study is the singular diffusion equation with critical
gradient absorption,

    u_t - div(|grad u|^{p-2} grad u) + |grad u|^{p/2} = 0,

on the exponent range p_c < p < 2 with p_c = 2N/(N+1).  Radially
symmetric eternal solutions have the form

    u(t, x) = exp(-mu*beta*t) * f(|x| * exp(-beta*t); beta),

with mu = p/(2-p), and everything downstream (shooting, classification,
phase-plane reduction) is parameterized by the pair (N, p) plus the
shooting parameter beta.  This module validates (N, p) and computes
every derived constant that has a closed form, once, at construction.
"""

import math
from dataclasses import dataclass


class ParamsError(ValueError):
    """Invalid problem parameters (N, p, beta, tolerances)."""


@dataclass(frozen=True)
class ExpansionCoeffs:
    """Coefficients of the third-order expansion of f near r = 0.

    f(r)  = 1 - C1*(beta*mu/N)^{1/(p-1)} r^{p/(p-1)}
              + C2*(beta*mu/N)^{(4-p)/(2(p-1))} r^{3p/(2(p-1))}
              + C3*(beta-B1)*(beta*mu/N)^{(3-p)/(p-1)} r^{2p/(p-1)} + ...

    B0 appears in the matching expansion of f'; B1 = B0 + 2(p+N(p-1))B0^2/p^2.
    All five are strictly positive on the admissible range.
    """

    C1: float
    C2: float
    C3: float
    B0: float
    B1: float


@dataclass(frozen=True)
class Params:
    """Validated problem instance with derived constants.

    w_star is the nonzero constant solution of the equation satisfied by
    w(r) = r^mu f(r): the critical plateau separating profiles with
    compact support from profiles with unbounded r^mu f.
    Immutable; safe to share between threads.
    """

    N: int
    p: float
    mu: float
    p_c: float
    w_star: float
    exp_coeffs: ExpansionCoeffs


@dataclass(frozen=True)
class TheoryConstants:
    """Predicted asymptotic constants at a given beta.

    K:       slope of Phi against xi^{p/2} in the unbounded regime, mu^{p/2}/beta.
    K_infty: amplitude of the logarithmic correction, K/(mu+1).
    a_star, b_star: limits at xi -> w_star of the coefficients in the
             linearized phase-plane equation 2*Psi*Psi' + a*Psi - 2*b*xi = 0.
    K_star:  linear rate of Phi at the plateau, (sqrt(a_star^2+16 b_star)-a_star)/4.
    """

    beta: float
    K: float
    K_infty: float
    a_star: float
    b_star: float
    K_star: float


def _pow(base, expo):
    # exp/log form for fractional powers; all bases are validated positive,
    # so no sign handling is needed beyond the assertion.
    if base <= 0.0:
        raise ParamsError(f"fractional power of non-positive base {base!r}")
    return math.exp(expo * math.log(base))


def make_params(N, p):
    """Validate (N, p) and build a Params with all derived constants.

    Requires integer N >= 1 and p strictly inside (2N/(N+1), 2); the
    inequalities are strict in floating point, no tolerance is applied.
    """
    if not isinstance(N, int) or isinstance(N, bool):
        raise ParamsError(f"N must be a positive integer, got {N!r}")
    if N < 1:
        raise ParamsError(f"N must be >= 1, got {N}")
    p = float(p)
    if not math.isfinite(p):
        raise ParamsError(f"p must be finite, got {p!r}")
    p_c = 2.0 * N / (N + 1.0)
    if not (p_c < p < 2.0):
        raise ParamsError(
            f"p={p!r} outside the admissible open interval "
            f"({p_c!r}, 2.0) for N={N}"
        )
    mu = p / (2.0 - p)
    # p > p_c is equivalent to mu > N; both must hold after rounding.
    if not (mu > N):
        raise ParamsError(f"p={p!r} gives mu={mu!r} <= N={N}; need mu > N")
    w_star = _pow(mu - N, 2.0 / (2.0 - p)) / mu
    coeffs = _expansion_coeffs(N, p)
    params = Params(N=N, p=p, mu=mu, p_c=p_c, w_star=w_star, exp_coeffs=coeffs)
    for name in ("mu", "p_c", "w_star"):
        if not math.isfinite(getattr(params, name)):
            raise ParamsError(f"derived constant {name} is not finite for {params!r}")
    return params


def _expansion_coeffs(N, p):
    C1 = (p - 1.0) / p
    C2 = 4.0 * (p - 1.0) / (3.0 * p * ((2.0 * N + 1.0) * p - 2.0 * N))
    C3 = (p - 1.0) / (2.0 * p * (2.0 - p) * (p + N * (p - 1.0)))
    B0 = p * (2.0 - p) / (p * (2.0 * N + 1.0) - 2.0 * N)
    B1 = B0 + 2.0 * (p + N * (p - 1.0)) * B0 * B0 / (p * p)
    return ExpansionCoeffs(C1=C1, C2=C2, C3=C3, B0=B0, B1=B1)


def expansion_coeffs(params):
    """Expansion coefficients of the given instance (stored at construction)."""
    return params.exp_coeffs


def theory_constants(params, beta):
    """Asymptotic constants predicted for shooting parameter beta.

    a_star = 2[(p-1)mu - beta(mu-N)^2 - mu w* B*]/(p-1) and
    b_star = mu^2 w* B*/(p-1) with B* = ((2-p)/2)(mu w*)^{-p/2}; these are
    the xi -> w* limits of the coefficient functions of the phase-plane
    equation written in the Psi(xi) = Phi(w*-xi) variable.
    """
    beta = float(beta)
    if not (beta > 0.0) or not math.isfinite(beta):
        raise ParamsError(f"beta must be positive and finite, got {beta!r}")
    N, p, mu, w_star = params.N, params.p, params.mu, params.w_star
    B_star = 0.5 * (2.0 - p) * _pow(mu * w_star, -0.5 * p)
    a_star = 2.0 * ((p - 1.0) * mu - beta * (mu - N) ** 2 - mu * w_star * B_star) / (p - 1.0)
    b_star = mu * mu * w_star * B_star / (p - 1.0)
    K = _pow(mu, 0.5 * p) / beta
    K_infty = K / (mu + 1.0)
    K_star = (math.sqrt(a_star * a_star + 16.0 * b_star) - a_star) / 4.0
    return TheoryConstants(
        beta=beta, K=K, K_infty=K_infty, a_star=a_star, b_star=b_star, K_star=K_star
    )
