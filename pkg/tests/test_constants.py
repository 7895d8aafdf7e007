import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exitlab.constants import (B_FRACTION, ConstantLedger, build_ledger, derive_stage1,
                               derive_stage2, fit_empirical_beta, run_holder_pipeline, select_b,
                               strengthen_J2, strengthen_J2_power, theoretical_bound,
                               two_point_bound)
from exitlab.profiles import DomainError, StableProfile

# b_sup = min(cubic root, quartic root, sqrt(3/2)) from 50-digit mpmath root finding
B_SUP = {0.6: 1.0455159171494204, 0.0016545868589270122: 1.0000919891389124,
         9.460236732964004e-05: 1.000005255907654}


def _def_ab(b, delta, a):
    return b**3 * (1 - 3 * delta) <= 1 - 2 * delta and a * b**4 < (1 - a * b) * delta


def test_stage_one_hand_chain():
    s = derive_stage1(1, 1.1, 1.1, 1.1, 1.1)
    assert s.C1 == pytest.approx(1.331, rel=1e-15)
    assert s.C4 == pytest.approx(3.2, rel=1e-15)
    assert s.C3 == pytest.approx(47.3, rel=1e-15)
    assert s.C2 == pytest.approx(2 * 1.1 * 3.2**2 + 1.1, rel=1e-15)


@pytest.mark.parametrize("d, kappa", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi)])
def test_stage_one_dimensions(d, kappa):
    s = derive_stage1(d, 1.5, 2.0, 3.0, 4.0)
    assert s.C1 == pytest.approx(2**d * 1.5 * 4.0 / kappa)
    assert s.C3 == pytest.approx(10 * kappa * 1.5 * 4.0 + 4.0)


def test_stage_two():
    s = derive_stage2(2.0, 3.0, 5.0, 7.0)
    assert (s.alpha_J1, s.alpha0_J2, s.a0_J2) == (1 / 7, 1 / 7, 1 / 7)
    assert s.delta0 == pytest.approx(1 / 210)
    assert s.C0_J2 == 6.0


@pytest.mark.parametrize("delta0", sorted(B_SUP))
def test_select_b_against_reference(delta0):
    delta, a, b = select_b(delta0)
    assert delta == pytest.approx(delta0 / 6) and a == pytest.approx(delta0 / 12)
    assert b == pytest.approx(1 + B_FRACTION * (B_SUP[delta0] - 1), rel=1e-14)
    assert _def_ab(b, delta, a)
    assert 1 < b < math.sqrt(1.5)


def test_select_b_example_value():
    _, _, b = select_b(0.6)
    assert b == pytest.approx(1.0454704, abs=1e-7)


@settings(max_examples=200, deadline=None)
@given(delta0=st.floats(1e-12, 0.99))
def test_select_b_is_always_feasible(delta0):
    delta, a, b = select_b(delta0)
    assert _def_ab(b, delta, a)
    assert 1 < b < math.sqrt(1.5)


def test_strengthen_J2_example():
    assert strengthen_J2(0.5, 0.5, 4, 0.25) == 1 / 32
    k = strengthen_J2_power(0.5, 0.5, 4, 0.25)
    assert k == 5
    assert not 0.5 ** (k - 1) < 0.25 / 4  # k - 1 fails the strict inequality


@settings(max_examples=200, deadline=None)
@given(a0=st.floats(0.01, 0.99), C0=st.floats(1.0, 1e4), target=st.floats(1e-8, 0.99))
def test_strengthen_J2_is_minimal(a0, C0, target):
    k = strengthen_J2_power(0.5, a0, C0, target)
    assert a0**k < target / C0
    assert k == 1 or not a0 ** (k - 1) < target / C0


def test_strengthen_J2_validation():
    with pytest.raises(DomainError):
        strengthen_J2(0.5, 1.0, 4, 0.25)
    with pytest.raises(DomainError):
        strengthen_J2(0.5, 0.5, 0.5, 0.25)


def test_hand_ledger():
    lg = build_ledger(1, 1.1, 1.1, 1.1, 1.1, 5.0)
    assert lg.delta0 == 1 / (3 * lg.C1 * lg.C3 * lg.C4)
    assert lg.k_J2 == 11  # (1/3.2)**k < (delta0/12) / (C1 C2) first at k = 11
    assert 0 < lg.beta < 1
    assert lg.beta == pytest.approx(math.log(lg.b) / math.log(1 / lg.alpha_final))
    assert lg.C == pytest.approx(3 * lg.alpha_final**-lg.beta)


def test_stable_1d_ledger(stable_ledger):
    lg = stable_ledger
    assert (lg.C1, lg.C4) == (pytest.approx(4.4), 14.0)
    assert lg.C2 == pytest.approx(442.2) and lg.C3 == pytest.approx(57.2)
    assert lg.delta0 == pytest.approx(9.46024e-5, rel=1e-5)
    assert lg.k_J2 == 8
    assert lg.alpha_final == pytest.approx(14.0**-8)
    assert lg.b == pytest.approx(1 + 0.999 * (B_SUP[9.460236732964004e-05] - 1), rel=1e-14)
    assert lg.beta == pytest.approx(2.48699e-7, rel=1e-5)
    assert lg.C == pytest.approx(3.0000158, rel=1e-7)


def test_ledger_serialises():
    lg = build_ledger(2, 1.2, 1.5, 1.5, 2.0, 3.0)
    d = lg.to_dict()
    assert ConstantLedger(**d) == lg
    assert "[stage 3]" in lg.table() and "beta" in lg.table()


@pytest.mark.parametrize("bad", [1.0, 0.5, math.inf, math.nan])
def test_ledger_rejects_constants_outside_unit_to_infinity(bad):
    with pytest.raises(DomainError):
        build_ledger(1, bad, 2.0, 2.0, 2.0, 2.0)
    with pytest.raises(DomainError):
        build_ledger(1, 1.1, 2.0, 2.0, 2.0, bad)


def test_pipeline_takes_the_smaller_alpha():
    s3 = run_holder_pipeline((0.001, 0.3), (0.5, 0.5, 1.0))
    assert s3.alpha_final == 0.001
    s3 = run_holder_pipeline((0.9, 0.3), (0.5, 0.5, 1.0))
    assert s3.alpha_final == s3.alpha_J2 == 0.5**s3.k_J2


def test_bounds(stable_ledger):
    p = StableProfile(alpha=1.0, R=2.0)
    lg = stable_ledger
    assert theoretical_bound(p, lg, [0.0], [0.0], 1.0, 1.0) == 0.0
    v = theoretical_bound(p, lg, [0.5], [0.0], 1.0, 2.0)
    assert v == pytest.approx(lg.C * 2.0 * 2.0**-lg.beta)
    w = two_point_bound(p, lg, 2.0, [0.1], [-0.1], 1.0, 1.0)
    assert w == pytest.approx(2.0 * lg.C * 0.2**lg.beta)
    with pytest.raises(DomainError):
        theoretical_bound(p, lg, [1.5], [0.0], 1.0, 1.0)
    with pytest.raises(DomainError):
        two_point_bound(p, lg, 2.0, [0.5], [0.0], 1.0, 1.0)


def test_beta_fit_recovers_a_power_law():
    x = np.geomspace(0.01, 0.5, 8)
    fit = fit_empirical_beta(np.column_stack([x, 0.3 * x**0.7]))
    assert fit.available
    assert fit.beta == pytest.approx(0.7) and fit.intercept == pytest.approx(math.log(0.3))
    assert fit.stderr < 1e-10


def test_beta_fit_needs_five_points_above_the_floor():
    x = np.geomspace(0.01, 0.5, 8)
    fit = fit_empirical_beta(np.column_stack([x, x]), floor=0.1)
    assert not fit.available and fit.n_used == 3 and "need 5" in fit.reason
