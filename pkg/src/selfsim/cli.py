"""Command-line surface for the solver and verification suite.

Subcommands mirror the library one-to-one and default to the module
defaults, so a bare invocation reproduces the documented runs:

    params   closed-form constants as JSON
    profile  one shooting run, optional CSV of the samples
    classify verdict for one beta or a comma-separated list
    bisect   critical beta via bisection, cached on disk
    phi      phase-plane trajectory, optional CSV
    tailfit  asymptotic constants K_C, K_log, K_star
    residual space-time residual of the reconstructed solution
    check    cross-module invariant suite for one parameter set

Exit codes: 0 success, 1 invalid arguments or parameters, 2 numerical
failure (step-controller underflow, phase-plane integrity, no bracket)
or an invariant violation detected by `check`.
"""

import argparse
import math
import sys

import numpy as np

from .classify import BracketError, Verdict, classify, find_beta_star
from .io import (
    bisect_json,
    cached_bisect,
    dumps,
    export_phi_csv,
    export_profile_csv,
    export_residual_field_csv,
    params_json,
    residual_json,
    tailfit_json,
    write_text,
)
from .params import ParamsError, make_params, theory_constants
from .phiplane import (
    PhiIntegrityError,
    PhiOptions,
    TailKind,
    check_phi_bounds,
    fit_tail,
    phi_bound_violations,
    solve_phi,
)
from .profile import (
    IntegratorOptions,
    ProfileRangeError,
    SeriesRangeError,
    StepFailureError,
    integrate_profile,
    series_eval,
    series_range_max,
)
from .residual import (
    EvalRangeError,
    ResidualGrid,
    pde_residual,
    profile_options_for,
    selfsim_spec,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract wants 1
    # with usage on stderr, so errors are converted to an exception.
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _add_common(sub):
    sub.add_argument("--N", type=int, required=True, help="space dimension")
    sub.add_argument("--p", type=float, required=True, help="diffusion exponent")


def _add_integrator_flags(sub):
    sub.add_argument("--rtol", type=float, default=None)
    sub.add_argument("--atol", type=float, default=None)
    sub.add_argument("--r-max", type=float, default=None)
    sub.add_argument("--delta-c", type=float, default=None)
    sub.add_argument("--r-start", type=float, default=None)
    sub.add_argument("--n-dense", type=int, default=None)
    sub.add_argument("--series-budget", type=float, default=None)
    sub.add_argument(
        "--stop-on-w-exceed",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="stop at the certification threshold (default: on)",
    )


def _integrator_options(args):
    kw = {}
    for flag, name in (
        ("rtol", "rtol"),
        ("atol", "atol"),
        ("r_max", "r_max"),
        ("delta_c", "delta_c"),
        ("r_start", "r_start"),
        ("n_dense", "n_dense"),
        ("series_budget", "series_budget"),
        ("stop_on_w_exceed", "stop_on_w_exceed"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            kw[name] = val
    return IntegratorOptions(**kw)


def _phi_options(args):
    kw = {}
    for name in ("rtol", "atol", "xi_max", "xi_start", "phi_floor_rel"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    return PhiOptions(**kw)


def _emit(text, path=None):
    sys.stdout.write(text)
    if path:
        write_text(path, text)


def _cmd_params(args):
    params = make_params(args.N, args.p)
    _emit(params_json(params), args.json)
    return 0


def _profile_summary(sol):
    ev = sol.events
    return {
        "beta": sol.beta,
        "termination": sol.termination.value,
        "r_start": sol.r_start,
        "r_end": float(sol.r[-1]),
        "R1": ev.R1,
        "R": ev.R,
        "r_cross": ev.r_cross,
        "w_max": ev.w_max,
        "samples": int(sol.r.size),
    }


def _cmd_profile(args):
    params = make_params(args.N, args.p)
    sol = integrate_profile(params, args.beta, _integrator_options(args))
    if args.csv:
        export_profile_csv(sol, args.csv)
    _emit(dumps(_profile_summary(sol)), args.json)
    return 0


def _cmd_classify(args):
    params = make_params(args.N, args.p)
    if args.beta_list:
        betas = [float(tok) for tok in args.beta_list.split(",") if tok.strip()]
    elif args.beta is not None:
        betas = [args.beta]
    else:
        raise ParamsError("classify needs --beta or --beta-list")
    opts = _integrator_options(args)
    rows = []
    for beta in betas:
        c = classify(params, beta, opts)
        rows.append(
            {
                "beta": c.beta,
                "verdict": c.verdict.value,
                "termination": c.termination.value,
                "witness_r": c.witness_r,
                "witness": c.witness,
            }
        )
    _emit(dumps(rows[0] if len(rows) == 1 else rows), args.json)
    return 0


def _cmd_bisect(args):
    params = make_params(args.N, args.p)
    opts = _integrator_options(args)
    if args.no_cache:
        text = bisect_json(find_beta_star(params, tol_beta=args.tol_beta, opts=opts))
    else:
        text, _ = cached_bisect(params, tol_beta=args.tol_beta, opts=opts)
    _emit(text, args.json)
    return 0


def _cmd_phi(args):
    params = make_params(args.N, args.p)
    sol = solve_phi(params, args.beta, _phi_options(args))
    if args.csv:
        export_phi_csv(sol, args.csv)
    payload = {
        "beta": sol.beta,
        "regime": sol.regime.value,
        "samples": int(sol.xi.size),
    }
    payload.update(sol.end_state)
    _emit(dumps(payload), args.json)
    return 0


def _cmd_tailfit(args):
    params = make_params(args.N, args.p)
    kind = TailKind(args.kind)
    if kind is TailKind.K_LOG:
        # the log-correction lives on the profile itself, out at r = e^30
        kw = {"stop_on_w_exceed": False}
        for name in ("rtol", "atol"):
            val = getattr(args, name, None)
            if val is not None:
                kw[name] = val
        sol = integrate_profile(params, args.beta, IntegratorOptions(**kw))
    else:
        sol = solve_phi(params, args.beta, _phi_options(args))
    _emit(tailfit_json(fit_tail(sol, kind)), args.json)
    return 0


def _cmd_residual(args):
    params = make_params(args.N, args.p)
    grid = ResidualGrid(
        t_lo=args.t_lo,
        t_hi=args.t_hi,
        r_lo=args.r_lo,
        r_hi=args.r_hi,
        nt=args.nt,
        nr=args.nr,
    )
    popts = profile_options_for(grid, args.beta, args.t0)
    profile = integrate_profile(params, args.beta, popts)
    spec = selfsim_spec(profile, t0=args.t0, f_scale=args.f_scale)
    report = pde_residual(spec, grid, keep_field=bool(args.csv))
    if args.csv:
        export_residual_field_csv(report, args.csv)
    _emit(residual_json(report), args.json)
    return 0


def _check_lines(params, betas):
    """Cross-module invariant suite; yields (ok, label) pairs."""
    tol = 1e-9
    tc = theory_constants(params, 1.0)
    res = 2.0 * tc.K_star**2 + tc.a_star * tc.K_star - 2.0 * tc.b_star
    yield abs(res) <= tol * max(1.0, abs(tc.b_star)), "K_star solves its quadratic"
    yield abs(tc.K_infty * (params.mu + 1.0) - tc.K) <= tol * tc.K, "K_infty = K/(mu+1)"

    for beta in betas:
        tag = f"beta={beta:g}"
        sol = integrate_profile(params, beta)
        lim = (beta * params.mu) ** (2.0 / params.p)
        pos = sol.f > 0.0
        ok_fp = bool(
            np.all(sol.fp[pos] < 0.0) and np.all(sol.fp[pos] >= -lim * (1.0 + tol))
        )
        yield ok_fp, f"{tag}: -(beta mu)^(2/p) <= f' < 0 while f > 0"
        yield bool(np.all(np.diff(sol.E) <= tol * sol.E[0])), f"{tag}: energy nonincreasing"
        g_re = -np.abs(sol.fp) ** (params.p - 1.0) * np.sign(sol.fp)
        yield (
            bool(np.max(np.abs(g_re - sol.g)) <= 1e-7 * max(1.0, float(np.max(np.abs(sol.g)))))
        ), f"{tag}: g consistent with f'"
        w_re = sol.r**params.mu * sol.f
        yield (
            bool(np.max(np.abs(w_re - sol.w)) <= 1e-7 * max(1.0, float(np.max(np.abs(sol.w)))))
        ), f"{tag}: w = r^mu f"
        # probe well inside the series range: at the 1e-11 last-term radius
        # the true remainder sits comfortably below the 1e-8 allowance
        r_probe = series_range_max(params, beta, budget=1e-11)
        if sol.r_start < r_probe < sol.r[-1]:
            fs, _ = series_eval(params, beta, r_probe)
            yield (
                abs(sol.f_at(r_probe) - fs) <= 1e-8
            ), f"{tag}: series matches integration inside its range"

    phi_betas = betas[:2]
    sols = [solve_phi(params, b, PhiOptions(xi_max=1e6)) for b in phi_betas]
    for beta, s in zip(phi_betas, sols):
        v = phi_bound_violations(s, tol=tol)
        yield not v, f"beta={beta:g}: phase-plane wedge and tail bounds"
    if len(sols) == 2 and phi_betas[0] != phi_betas[1]:
        rep = check_phi_bounds(sols[0], sols[1], tol=tol)
        yield rep.ok, "monotonicity of Phi in beta"


def _cmd_check(args):
    params = make_params(args.N, args.p)
    betas = args.betas or [0.05, 0.5, 5.0]
    failures = 0
    for ok, label in _check_lines(params, betas):
        sys.stdout.write(("ok   " if ok else "FAIL ") + label + "\n")
        failures += 0 if ok else 1
    sys.stdout.write(f"{'PASS' if failures == 0 else 'FAIL'} ({failures} violations)\n")
    return 0 if failures == 0 else 2


def build_parser():
    top = _Parser(prog="selfsim")
    sub = top.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("params", help="closed-form constants as JSON")
    _add_common(sp)
    sp.add_argument("--json", default=None, help="also write the JSON here")
    sp.set_defaults(func=_cmd_params)

    sp = sub.add_parser("profile", help="one shooting run")
    _add_common(sp)
    sp.add_argument("--beta", type=float, required=True)
    _add_integrator_flags(sp)
    sp.add_argument("--csv", default=None, help="write samples as CSV")
    sp.add_argument("--json", default=None)
    sp.set_defaults(func=_cmd_profile)

    sp = sub.add_parser("classify", help="trichotomy verdict")
    _add_common(sp)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--beta-list", default=None, help="comma-separated betas")
    _add_integrator_flags(sp)
    sp.add_argument("--json", default=None)
    sp.set_defaults(func=_cmd_classify)

    sp = sub.add_parser("bisect", help="critical beta via bisection")
    _add_common(sp)
    sp.add_argument("--tol-beta", "--tol", dest="tol_beta", type=float, default=1e-8)
    _add_integrator_flags(sp)
    sp.add_argument("--no-cache", action="store_true")
    sp.add_argument("--json", default=None)
    sp.set_defaults(func=_cmd_bisect)

    sp = sub.add_parser("phi", help="phase-plane trajectory")
    _add_common(sp)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--rtol", type=float, default=None)
    sp.add_argument("--atol", type=float, default=None)
    sp.add_argument("--xi-max", type=float, default=None)
    sp.add_argument("--xi-start", type=float, default=None)
    sp.add_argument("--phi-floor-rel", type=float, default=None)
    sp.add_argument("--csv", default=None)
    sp.add_argument("--json", default=None)
    sp.set_defaults(func=_cmd_phi)

    sp = sub.add_parser("tailfit", help="asymptotic constant fits")
    _add_common(sp)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--kind", required=True, choices=[k.value for k in TailKind])
    sp.add_argument("--rtol", type=float, default=None)
    sp.add_argument("--atol", type=float, default=None)
    sp.add_argument("--xi-max", type=float, default=None)
    sp.add_argument("--xi-start", type=float, default=None)
    sp.add_argument("--json", default=None)
    sp.set_defaults(func=_cmd_tailfit)

    sp = sub.add_parser("residual", help="space-time PDE residual")
    _add_common(sp)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--t-lo", type=float, default=0.0)
    sp.add_argument("--t-hi", type=float, default=1.0)
    sp.add_argument("--r-lo", type=float, default=0.5)
    sp.add_argument("--r-hi", type=float, default=5.0)
    sp.add_argument("--nt", type=int, default=200)
    sp.add_argument("--nr", type=int, default=200)
    sp.add_argument("--f-scale", type=float, default=1.0)
    sp.add_argument("--csv", default=None, help="dump the residual field")
    sp.add_argument("--json", default=None)
    sp.set_defaults(func=_cmd_residual)

    sp = sub.add_parser("check", help="cross-module invariant suite")
    _add_common(sp)
    sp.add_argument(
        "--betas",
        type=lambda s: [float(tok) for tok in s.split(",") if tok.strip()],
        default=None,
        help="comma-separated probe betas (default 0.05,0.5,5)",
    )
    sp.set_defaults(func=_cmd_check)
    return top


def run_cli(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        sys.stderr.write(str(exc) + "\n")
        return 1
    except (ParamsError, SeriesRangeError, ProfileRangeError, EvalRangeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (StepFailureError, PhiIntegrityError, BracketError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2


def main():
    raise SystemExit(run_cli())


if __name__ == "__main__":
    main()
