"""Exit criteria of the build, each at its stated tolerance.

Every test reports one ``criterion N: PASS|FAIL`` line, collected in the
terminal summary. The Monte Carlo criteria share one preset run per step
group through module-scoped fixtures.
"""

import csv
import json
import math
import time

import numpy as np
import pytest

from exitlab import load_preset, run
from exitlab.constants import build_ledger, select_b, strengthen_J2, strengthen_J2_power
from exitlab.exit_measure import check_composition, estimate_exit_measure
from exitlab.geometry import AnnularSector, Ball
from exitlab.kernel import AnnulusSpec, KernelSpec, annulus_mu_mass
from exitlab.profiles import (LConditionWitness, LogCounterexampleProfile, RegularlyVaryingProfile,
                              StableProfile, check_L_conditions, eval_L, eval_Ltilde)
from exitlab.runner import run_manifest
from exitlab.simulator import SimConfig, check_dynkin, check_levy_system, estimate_exit_time_mean

pytestmark = pytest.mark.acceptance

U1 = Ball((0.0,), 1.0)
V_HALF = Ball((0.0,), 0.5)
N_BIG = 100_000


def test_1_scaling_oracles(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for alpha in (0.5, 1.0, 1.5):
        p = StableProfile(alpha=alpha, R=2.0)
        r = np.geomspace(1e-6, 2.0, 50)
        worst = max(worst,
                    np.max(np.abs(eval_L(p, r) / (r**-alpha / alpha) - 1)),
                    np.max(np.abs(eval_Ltilde(p, r) / (r**-alpha / (2 - alpha)) - 1)))
    dt = time.perf_counter() - t0
    criterion(1, worst <= 1e-10 and dt < 1, f"max rel err {worst:.2e}, {dt:.2f}s")


def test_2_annulus_identity(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for profile in (StableProfile(alpha=1.0, R=2.0), RegularlyVaryingProfile(),
                    LogCounterexampleProfile()):
        for d in (1, 2):
            spec = KernelSpec(d, profile)
            for r, s in [(1e-4, 1e-3), (1e-3, 0.1), (0.01, 0.2)]:
                closed, quad = annulus_mu_mass(spec, AnnulusSpec((0.0,) * d, r, s))
                worst = max(worst, abs(quad / closed - 1))
    dt = time.perf_counter() - t0
    criterion(2, worst <= 1e-8 and dt < 5, f"max rel err {worst:.2e}, {dt:.2f}s")


def test_3_log_counterexample(criterion):
    t0 = time.perf_counter()
    p = LogCounterexampleProfile()
    ratios = [p.Ltilde(r) / p.L(r) for r in (1e-2, 1e-4, 1e-6)]
    rejected = all(
        check_L_conditions(p, LConditionWitness(4.0, c2, 50.0, 2.0), r_min=1e-6).verdict_L2 is False
        for c2 in (1.01, 2.0, 3.5, 5.0))
    dt = time.perf_counter() - t0
    ok = ratios[0] < ratios[1] < ratios[2] and ratios[2] > 5 and rejected and dt < 5
    criterion(3, ok, "ratios " + ", ".join(f"{q:.3f}" for q in ratios)
              + f"; (L2) rejected for c2 <= 5: {rejected}, {dt:.2f}s")


def test_4_constant_pipeline(criterion):
    t0 = time.perf_counter()
    led = build_ledger(1, 1.1, 1.1, 1.1, 1.1, 5.0)
    delta, a, b = select_b(led.delta0)
    dt = time.perf_counter() - t0
    chain = (led.C1 == pytest.approx(1.331, rel=1e-15) and led.C4 == pytest.approx(3.2, rel=1e-15)
             and led.C3 == pytest.approx(47.3, rel=1e-15)
             and led.delta0 == pytest.approx(1 / (3 * led.C1 * led.C3 * led.C4), rel=1e-15))
    def_ab = b**3 * (1 - 3 * delta) <= 1 - 2 * delta and a * b**4 < (1 - a * b) * delta
    ok = chain and def_ab and 1 < b < math.sqrt(1.5) and 0 < led.beta < 1 and dt < 0.1
    criterion(4, ok, f"delta0 {led.delta0:.6e}, b {b:.10f}, beta {led.beta:.4e}, {dt * 1e3:.1f}ms")


def test_5_strengthened_J2(criterion):
    value = strengthen_J2(0.5, 0.5, 4, 0.25)
    k = strengthen_J2_power(0.5, 0.5, 4, 0.25)
    minimal = 0.5**k < 0.25 / 4 and not 0.5 ** (k - 1) < 0.25 / 4
    criterion(5, value == 1 / 32 and minimal, f"alpha = {value}, k = {k}")


@pytest.fixture(scope="module")
def cauchy_1d():
    return load_preset("stable-1d").kernel()


@pytest.mark.slow
def test_6_exit_measure_axioms(criterion, cauchy_1d):
    t0 = time.perf_counter()
    cfg = SimConfig(epsilon=1e-3)
    emp = estimate_exit_measure(cauchy_1d, 0.0, U1, N_BIG, 61, config=cfg)
    outside = bool(np.all(np.abs(emp.samples.positions[:, 0]) >= 1.0))
    comp = check_composition(cauchy_1d, V_HALF, U1, 0.0, N_BIG, 62, config=cfg)
    dt = time.perf_counter() - t0
    ok = emp.total_mass == 1.0 and outside and comp.ks <= comp.ks_allowance and dt < 120
    criterion(6, ok, f"mass {emp.total_mass}, outside U {outside}, "
                     f"KS {comp.ks:.4f} <= {comp.ks_allowance:.4f}, {dt:.0f}s")


@pytest.mark.slow
def test_7_exit_time_sandwich(criterion, cauchy_1d, stable_ledger):
    t0 = time.perf_counter()
    res = estimate_exit_time_mean(cauchy_1d, 0.0, U1, SimConfig(epsilon=1e-3, n_paths=N_BIG,
                                                                 master_seed=71), ledger=stable_ledger)
    L1 = cauchy_1d.profile.L(1.0)
    lo, hi = 1 / (stable_ledger.C3 * L1), stable_ledger.C1 / L1
    dt = time.perf_counter() - t0
    ok = lo <= res.ci[0] and res.ci[1] <= hi and dt < 120
    criterion(7, ok, f"99% CI [{res.ci[0]:.4f}, {res.ci[1]:.4f}] in [{lo:.4f}, {hi:.4f}], {dt:.0f}s")


@pytest.mark.slow
def test_8_dynkin_and_levy_system(criterion, cauchy_1d):
    t0 = time.perf_counter()
    dyn = check_dynkin(cauchy_1d, "psi", U1, 0.1, SimConfig(n_paths=10_000, master_seed=81))
    ls = check_levy_system(cauchy_1d, U1, AnnularSector((0.0,), 2.0, 3.0), 0.2,
                           SimConfig(n_paths=10_000, master_seed=82))
    dyn_bias = [abs(check_dynkin(cauchy_1d, "psi", U1, 0.1, SimConfig(epsilon=e, n_paths=2000,
                                                                       master_seed=83)).bias)
                for e in (1e-2, 1e-3, 1e-4)]
    ls_bias = [abs(check_levy_system(cauchy_1d, U1, AnnularSector((0.0,), 2.0, 3.0), 0.2,
                                     SimConfig(epsilon=e, n_paths=2000, master_seed=84)).bias)
               for e in (1e-2, 1e-3, 1e-4)]
    dt = time.perf_counter() - t0
    ok = (dyn.within_3sigma and ls.within_3sigma and dyn_bias[0] > dyn_bias[1] > dyn_bias[2]
          and ls_bias[0] >= ls_bias[1] >= ls_bias[2] and dt < 300)
    criterion(8, ok, f"Dynkin {dyn.residual:+.2e} (se {dyn.stderr:.1e}), "
                     f"LS {ls.residual:+.2e} (se {ls.stderr:.1e}), "
                     "Dynkin bias " + " > ".join(f"{b:.1e}" for b in dyn_bias)
              + ", LS bias " + " >= ".join(f"{b:.0e}" for b in ls_bias) + f", {dt:.0f}s")


@pytest.fixture(scope="module")
def preset_ledger():
    return load_preset("stable-1d").ledger()


@pytest.mark.slow
def test_9_regularity_conditions(criterion, tmp_path_factory, preset_ledger):
    t0 = time.perf_counter()
    out = tmp_path_factory.mktemp("conditions")
    run(load_preset("stable-1d"), out, steps=["derive", "conditions"])
    reports = {r["condition"]: r for r in json.loads((out / "conditions.json").read_text())["reports"]}
    d0 = preset_ledger.delta0
    j0, j1, j2 = reports["J0"]["ci"][0], reports["J1"]["ci"][0], reports["J2"]
    levels = j2["details"]["levels"]
    alpha = preset_ledger.alpha0_J2
    masses_ok = all(lv["m"] <= preset_ledger.C1 * preset_ledger.C2 * alpha ** lv["n"] + 3 * lv["se"]
                    for lv in levels)
    dt = time.perf_counter() - t0
    ok = j0 > d0 and j1 > d0 and j2["estimate"] < 1 and masses_ok and dt < 600
    criterion(9, ok, f"J0 lower {j0:.3f}, J1 lower {j1:.3f} > delta0 {d0:.2e}; "
                     f"a0 {j2['estimate']:.3f}; m_n " + ", ".join(f"{lv['m']:.4f}" for lv in levels)
              + f", {dt:.0f}s")


@pytest.mark.slow
def test_10_holder_and_oscillation(criterion, tmp_path_factory, preset_ledger):
    t0 = time.perf_counter()
    out = tmp_path_factory.mktemp("holder")
    run(load_preset("stable-1d"), out, steps=["derive", "holder", "oscillation"])
    with open(out / "holder.csv", newline="") as fh:
        rows = [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
    bound_ok = all(r["dh"] <= r["bound"] + 3 * r["se"] for r in rows)
    fit = json.loads((out / "holder_fit.json").read_text())["fit"]
    beta_ok = fit["available"] and fit["beta"] >= preset_ledger.beta - 2 * fit["stderr"]
    levels = json.loads((out / "oscillation.json").read_text())["levels"]
    b = preset_ledger.b
    osc_ok = all(lv["osc"] <= 3 * b ** -lv["n"] + 3 * lv["se"] for lv in levels if lv["n"] <= 6)
    dt = time.perf_counter() - t0
    ok = bound_ok and beta_ok and osc_ok and len(levels) == 7 and dt < 600
    criterion(10, ok, f"Hoelder bound at {len(rows)} radii {bound_ok}; beta_hat {fit['beta']:.3f} "
                      f"(se {fit['stderr']:.3f}) vs {preset_ledger.beta:.2e}; osc_0..6 {osc_ok}, "
                      f"{dt:.0f}s")


@pytest.mark.slow
def test_11_reproducible_manifest(criterion, tmp_path_factory):
    t0 = time.perf_counter()
    first = tmp_path_factory.mktemp("first")
    second = tmp_path_factory.mktemp("second")
    run(load_preset("stable-1d").with_overrides(paths=1000), first)
    run_manifest(first / "manifest.json", second)
    names = sorted(p.name for p in first.iterdir() if p.name != "manifest.json")
    same = [(first / n).read_bytes() == (second / n).read_bytes() for n in names]
    m1, m2 = (json.loads((d / "manifest.json").read_text()) for d in (first, second))
    m1.pop("timings"), m2.pop("timings")
    dt = time.perf_counter() - t0
    ok = names == sorted(p.name for p in second.iterdir() if p.name != "manifest.json") \
        and all(same) and m1 == m2
    criterion(11, ok, f"{sum(same)}/{len(names)} result files byte-identical, manifests equal "
                      f"apart from timings {m1 == m2}, {dt:.0f}s")
