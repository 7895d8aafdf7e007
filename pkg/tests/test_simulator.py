import math

import numpy as np
import pytest

from exitlab.geometry import AnnularSector, Ball
from exitlab.kernel import KernelSpec
from exitlab.profiles import DomainError, StableProfile
from exitlab.simulator import (RadialTestFunction, SimConfig, check_dynkin, check_levy_system,
                               estimate_exit_time_mean, generator_table, psi, simulate_exit,
                               simulate_exits, with_epsilon)

U1 = Ball((0.0,), 1.0)


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(small_jump_mode="exact")
    with pytest.raises(DomainError):
        SimConfig(epsilon=0.0)
    with pytest.raises(DomainError):
        SimConfig(n_paths=0)
    assert with_epsilon(SimConfig(), 0.1).epsilon == 0.1


def test_exits_land_outside_and_are_reproducible(cauchy):
    cfg = SimConfig(master_seed=5, n_paths=2000)
    a = simulate_exits(cauchy, 0.0, U1, cfg)
    b = simulate_exits(cauchy, 0.0, U1, cfg)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.times, b.times)
    assert not a.censored.any()
    assert np.all(np.abs(a.positions[:, 0]) >= 1.0)
    assert np.all(a.n_jumps >= 1)


def test_prefix_and_single_path_consistency(cauchy):
    cfg = SimConfig(master_seed=9, n_paths=500)
    many = simulate_exits(cauchy, 0.0, U1, cfg)
    few = simulate_exits(cauchy, 0.0, U1, SimConfig(master_seed=9, n_paths=50))
    np.testing.assert_array_equal(many.positions[:50], few.positions)
    one = simulate_exit(cauchy, [0.0], U1, cfg, path_index=17)
    assert one.exit_position == tuple(many.positions[17])
    assert one.exit_time == many.times[17]


def test_common_random_numbers_couple_nearby_starts(cauchy):
    cfg = SimConfig(master_seed=2, n_paths=4000)
    ids = np.arange(4000)
    a = simulate_exits(cauchy, np.zeros((4000, 1)), U1, cfg, path_ids=ids)
    b = simulate_exits(cauchy, np.full((4000, 1), 1e-4), U1, cfg, path_ids=ids)
    same_side = np.sign(a.positions[:, 0]) == np.sign(b.positions[:, 0])
    assert same_side.mean() > 0.99


def test_censoring_at_a_short_horizon(cauchy):
    s = simulate_exits(cauchy, 0.0, U1, SimConfig(t_max=1e-3, n_paths=1000))
    assert s.censored_fraction > 0.9
    assert np.all(s.times[s.censored] == 1e-3)
    assert not estimate_exit_time_mean(cauchy, 0.0, U1, SimConfig(t_max=1e-3, n_paths=1000)).valid


def test_csv_round_trip(cauchy, tmp_path):
    s = simulate_exits(cauchy, 0.0, U1, SimConfig(n_paths=20))
    s.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "path_index,exit_radius,exit_time,n_jumps,censored"
    assert len(rows) == 21
    assert float(rows[5].split(",")[2]) == s.times[4]


@pytest.mark.slow
@pytest.mark.parametrize("x", [0.0, 0.5, -0.8])
def test_mean_exit_time_of_the_cauchy_process(cauchy, x):
    # E^x tau = sqrt(1 - x^2) / pi for the kernel dh / h^2 on (-1, 1)
    res = estimate_exit_time_mean(cauchy, x, U1, SimConfig(master_seed=11, n_paths=20000))
    exact = math.sqrt(1 - x * x) / math.pi
    assert res.ci[0] - 2e-3 <= exact <= res.ci[1] + 2e-3  # cutoff bias is O(eps) = 1e-3


@pytest.mark.slow
def test_exit_time_sandwich(cauchy, stable_ledger):
    res = estimate_exit_time_mean(cauchy, 0.0, U1, SimConfig(n_paths=5000), ledger=stable_ledger)
    assert res.bounds == (pytest.approx(1 / 57.2), pytest.approx(4.4))
    assert res.bounds_ok


def test_harmonic_right_half_probability(cauchy):
    from exitlab.exit_measure import HarmonicSpec, harmonic_eval

    f = HarmonicSpec.indicator(AnnularSector((0.0,), 1.0, math.inf, (1.0,), 0.0))
    for x in (0.0, 0.6):
        value, (lo, hi) = harmonic_eval(cauchy, f, U1, x, 20000, 3)
        exact = 0.5 + math.asin(x) / math.pi
        assert lo - 2e-3 <= exact <= hi + 2e-3


def test_psi_profile():
    u = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 1.5])
    v = psi(u)
    np.testing.assert_allclose(v[:5], [-2.0, -1.9375, -1.75, -1.4375, -1.0])
    assert v[-1] == 0.0
    assert np.all(np.diff(v) >= 0)


def test_generator_of_a_constant_vanishes(cauchy):
    tf = RadialTestFunction("constant", (0.0,), 1.0)
    _, full, small = generator_table(cauchy, tf, 1.0, 1e-3)
    assert np.max(np.abs(full)) < 1e-9 and np.max(np.abs(small)) < 1e-9


def test_generator_table_of_psi(cauchy):
    tf = RadialTestFunction("psi", (0.0,), 1.0)
    rho, full, small = generator_table(cauchy, tf, 1.0, 1e-3)
    assert rho[0] == 0.0 and rho[-1] == 1.0
    assert np.all(np.isfinite(full))
    # psi has its minimum at the centre, so G psi(0) > 0
    assert full[0] > 0
    assert np.max(np.abs(small)) < 0.05 * np.max(np.abs(full))


@pytest.mark.slow
@pytest.mark.parametrize("f", ["psi", "bump"])
def test_dynkin_residual(cauchy, f):
    rep = check_dynkin(cauchy, f, U1, 0.1, SimConfig(n_paths=10000, master_seed=4))
    assert abs(rep.residual) <= 3 * rep.stderr
    assert rep.within_3sigma


@pytest.mark.slow
def test_dynkin_bias_shrinks_with_the_cutoff(cauchy):
    biases = [abs(check_dynkin(cauchy, "psi", U1, 0.1,
                               SimConfig(epsilon=e, n_paths=2000)).bias) for e in (1e-2, 1e-3, 1e-4)]
    assert biases[0] > biases[1] > biases[2]


@pytest.mark.slow
def test_levy_system_residual(cauchy):
    A = AnnularSector((0.0,), 2.0, 3.0)
    rep = check_levy_system(cauchy, U1, A, 0.2, SimConfig(n_paths=10000, master_seed=8))
    assert rep.within_3sigma and rep.bias == 0.0


def test_levy_system_empty_target(cauchy):
    rep = check_levy_system(cauchy, U1, AnnularSector((0.0,), 2.0, 2.0), 0.2, SimConfig(n_paths=10))
    assert rep.n == 0 and rep.within_3sigma


def test_perturbed_mode_and_gaussian_substitute_run(cauchy):
    spec = KernelSpec(1, StableProfile(alpha=1.0, R=2.0), c0=1.5, mode="perturbed", omega=3.0)
    s = simulate_exits(spec, 0.0, U1, SimConfig(n_paths=500))
    assert not s.censored.any() and np.all(np.abs(s.positions) >= 1)
    with pytest.warns(UserWarning, match="cutoff"):
        g = simulate_exits(cauchy, 0.0, U1, SimConfig(n_paths=500, epsilon=0.05,
                                                       small_jump_mode="gaussian-substitute"))
    assert not g.censored.any()


def test_ball_must_fit_the_cutoff(cauchy):
    with pytest.raises(DomainError):
        simulate_exits(cauchy, 0.0, U1, SimConfig(epsilon=2.0, n_paths=10))
