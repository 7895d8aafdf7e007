import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from exitlab.profiles import (DomainError, LConditionWitness, LogCounterexampleProfile,
                              RegularlyVaryingProfile, StableProfile, TableProfile,
                              check_doubling, check_L_conditions, default_grid,
                              derive_c2_from_l2, doubling_constant, eval_L, eval_l, eval_Ltilde,
                              invert_L, make_profile)

# Reference values from 40-digit mpmath quadrature in the variable v = ln u, or closed forms.
RV_L = {0.1: 13.639556568820566, 1e-3: 5908.3689846210172, 1e-6: 12815511.171669913}
RV_LTILDE = {0.1: 33.025850929940457, 1e-3: 7907.7552789821371, 1e-6: 14815510.557964274}
LOG_L = {1e-2: 320.63763225599553, 1e-4: 667056.53892474072, 1e-6: 2833486910.9033697}


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_stable_closed_forms(alpha):
    p = StableProfile(alpha=alpha, R=2.0)
    r = default_grid(p)
    np.testing.assert_allclose(eval_L(p, r), r**-alpha / alpha, rtol=1e-12)
    np.testing.assert_allclose(eval_Ltilde(p, r), r**-alpha / (2 - alpha), rtol=1e-12)
    np.testing.assert_allclose(eval_l(p, r), r**-alpha, rtol=1e-14)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_stable_quadrature_route_agrees_with_closed_form(alpha):
    p = StableProfile(alpha=alpha, R=0.5, R0=1.0)
    r = np.geomspace(1e-6, 0.9, 12)
    np.testing.assert_allclose(p._L_quad(r), p.L(r), rtol=1e-10)


@pytest.mark.parametrize("r", sorted(RV_L))
def test_regularly_varying_against_reference(r):
    p = RegularlyVaryingProfile()
    assert p.L(r) == pytest.approx(RV_L[r], rel=1e-10)
    assert p.Ltilde(r) == pytest.approx(RV_LTILDE[r], rel=1e-8)


@pytest.mark.parametrize("r", sorted(LOG_L))
def test_log_counterexample_against_reference(r):
    p = LogCounterexampleProfile()
    assert p.L(r) == pytest.approx(LOG_L[r], rel=1e-10)
    assert p.Ltilde(r) == pytest.approx(r**-2 / math.log(1 / r), rel=1e-8)


def test_log_counterexample_ratio_grows_and_breaks_l2():
    p = LogCounterexampleProfile()
    ratios = [p.Ltilde(r) / p.L(r) for r in (1e-2, 1e-4, 1e-6)]
    assert ratios[0] < ratios[1] < ratios[2]
    assert ratios[2] > 5
    for c2 in (1.5, 3.0, 5.0):
        w = check_L_conditions(p, LConditionWitness(4.0, c2, 50.0, 2.0), r_min=1e-6)
        assert w.verdict_L2 is False
        assert not w.passed


def test_stable_witness_passes():
    p = StableProfile(alpha=1.0, R=2.0)
    w = check_L_conditions(p, LConditionWitness(2.0, 1.1, 11.0, 4.2))
    assert w.passed
    assert w.worst_L1 == pytest.approx(2.0)
    assert w.worst_L2 == pytest.approx(1.0)
    assert w.worst_L3 == pytest.approx(10.4)
    assert w.to_dict()["passed"] is True


def test_witness_failures_are_verdicts():
    p = StableProfile(alpha=1.0, R=2.0)
    w = check_L_conditions(p, LConditionWitness(1.5, 1.1, 5.0, 4.2))
    assert w.verdict_L1 is False and w.verdict_L3 is False and w.verdict_L2 is True


def test_stable_alpha_two_has_divergent_ltilde():
    p = StableProfile(alpha=2.0, R=0.5, R0=1.0)
    assert math.isinf(p.Ltilde(0.1))


def test_domain_errors():
    with pytest.raises(DomainError):
        StableProfile(alpha=1.0, R=2.0, R0=1.0)
    with pytest.raises(DomainError):
        StableProfile(alpha=-1.0)
    with pytest.raises(DomainError):
        RegularlyVaryingProfile(R0=2.0, R=1.0)
    with pytest.raises(DomainError):
        StableProfile(R0=1.0, R=0.5).l(1.5)
    with pytest.raises(DomainError):
        StableProfile().L(0.0)
    with pytest.raises(DomainError):
        make_profile("nonsense")


def test_make_profile_spellings():
    assert isinstance(make_profile("stable", alpha=1.0, R0="inf", R=2.0), StableProfile)
    assert isinstance(make_profile("geometric-like"), RegularlyVaryingProfile)
    assert isinstance(make_profile("log-counterexample"), LogCounterexampleProfile)


def test_table_profile_reproduces_power_law(tmp_path):
    u = np.geomspace(1e-4, 0.5, 30)
    path = tmp_path / "l.csv"
    path.write_text("u,l\n" + "".join(f"{a!r},{a**-1.2!r}\n" for a in u.tolist()))
    p = make_profile(f"table:{path}", R0=1.0, R=0.5)
    assert isinstance(p, TableProfile)
    ref = StableProfile(alpha=1.2, R0=1.0, R=0.5)
    r = np.geomspace(1e-6, 0.9, 9)
    np.testing.assert_allclose(p.L(r), ref.L(r), rtol=1e-9)


def test_table_profile_needs_header(tmp_path):
    path = tmp_path / "l.csv"
    path.write_text("0.1,10\n0.2,5\n")
    with pytest.raises(DomainError):
        TableProfile.from_csv(path, R0=1.0, R=0.5)


def test_doubling():
    assert doubling_constant(2.0, 11.0) == 14.0
    worst, ok = check_doubling(StableProfile(alpha=1.0, R=2.0), 2.0, 11.0)
    assert worst == pytest.approx(2.0) and ok


def test_c2_from_lower_scaling():
    # stable alpha=1 on (0, inf): gamma=1, c_L=1 gives c = 1, the exact ratio
    assert derive_c2_from_l2(1.0, 1.0, 2.0, math.inf) == pytest.approx(1.0)
    assert derive_c2_from_l2(1.0, 1.0, 0.25, 0.5) == pytest.approx(2.0)


profiles = st.sampled_from([StableProfile(alpha=0.5, R=2.0), StableProfile(alpha=1.5, R=2.0),
                            RegularlyVaryingProfile(), LogCounterexampleProfile()])


@settings(max_examples=60, deadline=None)
@given(p=profiles, x=st.floats(-7.0, math.log10(0.24)))
def test_invert_L_round_trip(p, x):
    r = 10.0**x
    assert invert_L(p, p.L(r)) == pytest.approx(r, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(p=profiles, x=st.floats(-7.0, math.log10(0.24)), f=st.floats(1.01, 10.0))
def test_L_is_decreasing_and_ltilde_dominates(p, x, f):
    r = 10.0**x
    assume(r * f < p.R0)
    assert p.L(r) > p.L(r * f)
    # Ltilde(r) >= l(r)/2 >= ... and L(r) <= Ltilde(r) * const; at least positivity and finiteness
    assert 0 < p.Ltilde(r) < math.inf
