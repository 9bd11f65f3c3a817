import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from selfsim.params import ParamsError
from selfsim.profile import integrate_profile
from selfsim.residual import (
    EvalRangeError,
    ResidualGrid,
    SelfSimilarSpec,
    decay_report,
    eval_U,
    pde_residual,
    profile_options_for,
    selfsim_spec,
)


class PowerLawProfile:
    # w* r^{-mu} is a stationary solution for every beta: the beta terms
    # cancel on it, so the only residual left is FD truncation
    def __init__(self, params, beta):
        self.params = params
        self.beta = beta

    def f_at(self, r):
        return self.params.w_star * np.asarray(r, dtype=float) ** (-self.params.mu)

    def fp_at(self, r):
        r = np.asarray(r, dtype=float)
        return -self.params.mu * self.params.w_star * r ** (-self.params.mu - 1.0)


class PlateauProfile(PowerLawProfile):
    # flat gradient inside r < 3: those cells must be excluded, not divided by
    def f_at(self, r):
        r = np.asarray(r, dtype=float)
        inner = self.params.w_star * 3.0**-self.params.mu
        return np.where(r < 3.0, inner, super().f_at(np.maximum(r, 3.0)))

    def fp_at(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < 3.0, 0.0, super().fp_at(np.maximum(r, 3.0)))


class FlatProfile(PowerLawProfile):
    def f_at(self, r):
        return np.ones_like(np.asarray(r, dtype=float))

    def fp_at(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


@pytest.fixture(scope="module")
def spec21(p21):
    grid = ResidualGrid()
    sol = integrate_profile(p21, 0.05, profile_options_for(grid, 0.05))
    return selfsim_spec(sol)


def test_eval_matches_profile(spec21, p21):
    # at t = -t0 the rescaling is the identity
    assert eval_U(spec21, 0.0, 0.0) == pytest.approx(1.0, rel=1e-12)
    assert eval_U(spec21, 0.0, 1.0) == pytest.approx(0.9930514697021529, rel=1e-9)


@given(
    t=st.floats(min_value=0.0, max_value=1.0),
    r=st.floats(min_value=0.5, max_value=5.0),
    dt=st.floats(min_value=0.0, max_value=0.5),
)
@settings(max_examples=40, deadline=None)
def test_time_translation_identity(spec21, t, r, dt):
    # u(t + dt, r) = e^{-alpha dt} u(t, r e^{-beta dt})
    lhs = eval_U(spec21, t + dt, r)
    rhs = np.exp(-spec21.alpha * dt) * eval_U(spec21, t, r * np.exp(-spec21.beta * dt))
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_eval_range_error(spec21):
    with pytest.raises(EvalRangeError) as ei:
        eval_U(spec21, -5.0, 100.0)
    assert "rescaled radius" in str(ei.value)


def test_decay_report_matches_alpha(spec21):
    times = np.linspace(0.0, 2.0, 9)
    tab = decay_report(spec21, times)
    assert tab.shape == (9, 3)
    assert_allclose(tab[:, 1], tab[:, 2], rtol=1e-13)
    slope = np.polyfit(tab[:, 0], np.log(tab[:, 1]), 1)[0]
    assert slope == pytest.approx(-spec21.alpha, rel=1e-12)


def test_refinement_order(spec21):
    rep = pde_residual(spec21)
    assert rep.orders[0] >= 1.8 and rep.orders[1] >= 1.8
    assert rep.refinement_order >= 1.8
    assert rep.excluded_cells == 0
    assert rep.field is None
    assert rep.sup_residual == rep.sups[0]
    assert 0.0 < rep.l2_residual <= rep.sup_residual


def test_perturbed_profile_does_not_converge(spec21):
    bad = selfsim_spec(spec21.profile, f_scale=1.01)
    rep = pde_residual(bad)
    assert abs(rep.orders[0]) < 0.5
    assert rep.sups[1] >= 0.5 * rep.sups[0]
    assert rep.sups[2] >= 0.5 * rep.sups[0]


def test_field_shape(spec21):
    grid = ResidualGrid(nt=10, nr=12)
    rep = pde_residual(spec21, grid, keep_field=True)
    tt, rr, res = rep.field  # axes plus the interior residual matrix
    res = np.asarray(res)
    assert (len(tt), len(rr)) == (grid.nt, grid.nr)
    assert res.shape == (grid.nt - 2, grid.nr - 4)
    assert np.max(np.abs(res)) == rep.sup_residual


def test_synthetic_power_law(p21):
    spec = selfsim_spec(PowerLawProfile(p21, 0.3))
    rep = pde_residual(spec, ResidualGrid(r_lo=2.0, r_hi=5.0))
    assert rep.excluded_cells == 0
    assert rep.orders[0] > 1.5 and rep.orders[1] > 1.5


def test_flat_gradient_cells_excluded(p21):
    spec = selfsim_spec(PlateauProfile(p21, 0.3))
    rep = pde_residual(spec, ResidualGrid(r_lo=2.0, r_hi=5.0, nt=16, nr=32))
    assert rep.excluded_cells > 0
    assert np.isfinite(rep.sup_residual)


def test_all_flat_rejected(p21):
    spec = selfsim_spec(FlatProfile(p21, 0.3))
    with pytest.raises(ParamsError):
        pde_residual(spec, ResidualGrid(nt=8, nr=8))


@pytest.mark.parametrize(
    "kw",
    [
        dict(r_lo=0.0),
        dict(r_lo=-1.0),
        dict(r_lo=2.0, r_hi=1.0),
        dict(t_lo=1.0, t_hi=0.0),
        dict(nt=4),
        dict(nr=7),
    ],
)
def test_bad_grid_rejected(kw):
    with pytest.raises(ParamsError):
        ResidualGrid(**kw).validated()


def test_spec_validation(p21):
    sol = integrate_profile(p21, 0.3)
    with pytest.raises(ParamsError):
        SelfSimilarSpec(beta=0.4, t0=0.0, profile=sol)
    with pytest.raises(ParamsError):
        selfsim_spec(sol, f_scale=0.0)
    s = selfsim_spec(sol, t0=0.25)
    assert s.alpha == p21.mu * 0.3  # alpha = mu beta, exact


def test_profile_options_cover_grid(p21):
    grid = ResidualGrid()
    opts = profile_options_for(grid, 0.05)
    assert opts.r_max >= grid.r_hi
    assert opts.stop_on_w_exceed is False
    sol = integrate_profile(p21, 0.05, opts)
    # the whole rescaled window must be evaluable
    spec = selfsim_spec(sol)
    eval_U(spec, grid.t_lo, grid.r_hi)
    eval_U(spec, grid.t_hi, grid.r_hi)
