"""Export formats and the bisection result cache.

The CSV and JSON layouts here are contracts: column order, key order,
and float formatting are fixed so that independently produced artifacts
can be compared byte for byte.  Floats are written with Python's repr,
the shortest decimal string that round-trips the IEEE-754 value, and
every file ends with a newline.

Bisection results are cached on disk keyed by everything the value
depends on: (N, p, tol_beta, r_max) plus a numerics tag that is bumped
whenever an algorithm change could move beta_star.  A stale tag simply
never matches, so old entries are invisible rather than wrong.
"""

import json
import os
from pathlib import Path

from .classify import find_beta_star
from .profile import IntegratorOptions

CACHE_TAG = "numerics-1"
_CACHE_ENV = "SELFSIM_CACHE_DIR"


def _fmt(x):
    return repr(float(x))


def dumps(payload):
    """Fixed-layout JSON text: two-space indent, insertion key order,
    trailing newline."""
    return json.dumps(payload, indent=2) + "\n"


def write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def params_payload(params):
    c = params.exp_coeffs
    return {
        "N": params.N,
        "p": params.p,
        "p_c": params.p_c,
        "mu": params.mu,
        "w_star": params.w_star,
        "C1": c.C1,
        "C2": c.C2,
        "C3": c.C3,
        "B0": c.B0,
        "B1": c.B1,
    }


def params_json(params):
    return dumps(params_payload(params))


def profile_csv_text(sol):
    lines = ["r,f,fp,g,w,wp,E"]
    for row in zip(sol.r, sol.f, sol.fp, sol.g, sol.w, sol.wp, sol.E):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def export_profile_csv(sol, path):
    write_text(path, profile_csv_text(sol))


def phi_csv_text(sol):
    p, mu = sol.params.p, sol.params.mu
    lines = ["xi,phi,phi_over_xi_p2,slack_upper"]
    for xi, phi in zip(sol.xi, sol.phi):
        xi = float(xi)
        phi = float(phi)
        vals = (xi, phi, phi * xi ** (-0.5 * p), mu * xi - phi)
        lines.append(",".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def export_phi_csv(sol, path):
    write_text(path, phi_csv_text(sol))


def bisect_payload(report):
    return {
        "N": report.params.N,
        "p": report.params.p,
        "beta_star": report.beta_star,
        "bracket_lo": report.bracket_lo,
        "bracket_hi": report.bracket_hi,
        "iterations": report.iterations,
        "tol_beta": report.tol_beta,
        "r_max": report.r_max_used,
        "history": [
            {
                "beta": c.beta,
                "verdict": c.verdict.value,
                "witness_r": c.witness_r,
            }
            for c in report.history
        ],
    }


def bisect_json(report):
    return dumps(bisect_payload(report))


def tailfit_payload(fit):
    return {
        "kind": fit.kind.value,
        "fitted": fit.fitted,
        "theory": fit.theory,
        "window_lo": fit.window_lo,
        "window_hi": fit.window_hi,
        "rel_err": fit.rel_err,
    }


def tailfit_json(fit):
    return dumps(tailfit_payload(fit))


def residual_payload(report):
    return {
        "sup_residual": report.sup_residual,
        "l2_residual": report.l2_residual,
        "refinement_order": report.refinement_order,
        "excluded_cells": report.excluded_cells,
    }


def residual_json(report):
    return dumps(residual_payload(report))


def residual_field_csv_text(report):
    """Residual field dump; requires pde_residual(..., keep_field=True)."""
    if report.field is None:
        raise ValueError("residual field was not kept; rerun with keep_field")
    t, r, res = report.field
    lines = ["t,r,residual"]
    for i, tv in enumerate(t[1:-1]):
        for j, rv in enumerate(r[2:-2]):
            lines.append(",".join(_fmt(v) for v in (tv, rv, res[i, j])))
    return "\n".join(lines) + "\n"


def export_residual_field_csv(report, path):
    write_text(path, residual_field_csv_text(report))


def cache_dir():
    override = os.environ.get(_CACHE_ENV)
    if override:
        return Path(override)
    return Path.home() / ".cache" / "selfsim"


def _cache_path(params, tol_beta, r_max):
    name = "bisect-N%d-p%s-tol%s-rmax%s-%s.json" % (
        params.N,
        _fmt(params.p),
        _fmt(tol_beta),
        _fmt(r_max),
        CACHE_TAG,
    )
    return cache_dir() / name


def cached_bisect(params, tol_beta=1e-8, opts=None, use_cache=True):
    """Bisection JSON text, served from the cache when possible.

    Returns (text, hit).  A cache hit returns the stored bytes untouched,
    so repeated calls are byte-identical; a miss runs the bisection and
    stores exactly the text it returns.
    """
    opts = opts if opts is not None else IntegratorOptions()
    path = _cache_path(params, tol_beta, opts.r_max)
    if use_cache and path.is_file():
        try:
            return path.read_text(), True
        except OSError as exc:
            raise OSError(f"reading {path}: {exc}") from exc
    report = find_beta_star(params, tol_beta=tol_beta, opts=opts)
    text = bisect_json(report)
    if use_cache:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"writing {path}: {exc}") from exc
    return text, False
