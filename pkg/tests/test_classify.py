import numpy as np
import pytest

from oracles import oracle_classify
from selfsim.classify import (
    BracketError,
    Verdict,
    classify,
    find_beta_star,
    solve_limit_profile,
)
from selfsim.profile import (
    IntegratorOptions,
    ProfileRangeError,
    Termination,
)


def test_c_certificate(p21):
    c = classify(p21, 0.05)
    assert c.verdict is Verdict.C
    assert c.termination is Termination.W_EXCEEDS_WSTAR
    assert set(c.witness) == {"r_cross", "w_max"}
    assert c.witness_r == pytest.approx(1.692226681854084, rel=1e-6)
    assert c.witness["w_max"] >= p21.w_star


def test_a_certificate(p21):
    c = classify(p21, 10.0)
    assert c.verdict is Verdict.A
    assert set(c.witness) == {"R1", "w_max", "R"}
    assert c.witness["w_max"] < p21.w_star
    assert 0.0 < c.witness["R1"] < c.witness["R"]
    assert c.witness_r == c.witness["R1"]


def test_inconclusive_when_window_too_short(p21):
    c = classify(p21, 0.6, IntegratorOptions(r_max=2.0))
    assert c.verdict is Verdict.INCONCLUSIVE
    assert c.termination is Termination.RMAX_REACHED
    assert set(c.witness) == {"r_max", "w", "wp"}
    assert c.witness_r == 2.0


def test_oracle_agrees_on_verdicts(p21, p11):
    # independent fixed-step integrator must reproduce every verdict
    for P, betas in ((p21, (0.05, 0.3, 2.0, 10.0)), (p11, (0.05, 0.2, 1.0, 5.0))):
        for b in betas:
            assert oracle_classify(P, b) == classify(P, b).verdict.value


def test_bisection_report_invariants(bisect21):
    rep = bisect21
    assert rep.iterations <= 80
    assert rep.bracket_hi - rep.bracket_lo <= rep.tol_beta
    assert rep.bracket_lo <= rep.beta_star <= rep.bracket_hi
    cs = [c.beta for c in rep.history if c.verdict is Verdict.C]
    as_ = [c.beta for c in rep.history if c.verdict is Verdict.A]
    # every certified-C beta sits below every certified-A beta
    assert cs and as_
    assert max(cs) < min(as_)
    assert max(cs) <= rep.bracket_lo + 1e-15
    assert min(as_) >= rep.bracket_hi - 1e-15


def test_bisection_reference_values(bisect21, bisect11):
    assert bisect21.beta_star == pytest.approx(0.677656474861, abs=1e-9)
    assert bisect11.beta_star == pytest.approx(0.384937793874, abs=1e-9)


def test_bisection_widens_short_windows(p21):
    # with r_max too small for nearby certificates the window doubles as needed
    rep = find_beta_star(p21, opts=IntegratorOptions(r_max=4.0))
    assert any(c.verdict is Verdict.INCONCLUSIVE for c in rep.history)
    assert rep.r_max_used > 4.0
    assert abs(rep.beta_star - 0.677656474861) < 1e-4


def test_bracket_failure_when_no_crossing_fits(p21):
    # w = r^mu f crosses w* no earlier than w_star^{1/mu} = 8^{1/4} > 1.5,
    # so no C certificate can ever appear inside [0, 1.5]
    with pytest.raises(BracketError):
        find_beta_star(p21, opts=IntegratorOptions(r_max=1.5))


def test_limit_profile_shape(p21, p11):
    for P, s0 in ((p21, 1.50135712), (p11, 0.90037443)):
        lim = solve_limit_profile(P)
        assert lim.S0 == pytest.approx(s0, abs=1e-4)
        assert lim.h_at(0.0) == pytest.approx(1.0, abs=1e-9)
        ss = np.linspace(0.0, 0.999 * lim.S0, 50)
        assert np.all(np.diff(lim.h_at(ss)) < 0.0)
        with pytest.raises(ProfileRangeError):
            lim.h_at(1.01 * lim.S0)
