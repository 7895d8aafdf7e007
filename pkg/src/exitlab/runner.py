"""Experiment orchestration: run a plan, persist its results and emit plot data.

Every step writes its own files into the output directory. All result
files are pure functions of the configuration (seeds included), so a rerun
from the manifest reproduces them byte for byte; wall-clock timings live
only in ``manifest.json``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .conditions import (check_HI, check_J0, check_J1, check_J2, default_payoff_family,
                         default_set_family, intrinsic_radius, x_grid)
from .config import ConfigError, LabConfig
from .exit_measure import check_composition, estimate_exit_measure, exit_samples
from .geometry import Ball
from .holder import measure_holder, verify_oscillation
from .kernel import check_K0
from .profiles import LConditionWitness, check_doubling, check_L_conditions
from .simulator import estimate_exit_time_mean

__all__ = ["RunManifest", "StepResult", "run", "run_manifest", "emit_plot_data", "PLOT_KINDS",
           "write_json"]

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
PLOT_KINDS = ("oscillation", "holder", "J2")


def _clean(v):
    """JSON-safe copy: numpy scalars become Python numbers, non-finite floats become strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


@dataclass
class StepResult:
    step: str
    files: list[str]
    verdicts: dict[str, str]
    summary: list[str]


@dataclass
class RunManifest:
    """What a run produced and how to reproduce it."""

    config: dict
    master_seed: int
    versions: dict
    steps: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    checksums: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 0 if all(v != FAIL for v in self.verdicts.values()) else 1

    def to_dict(self) -> dict:
        return {"config": self.config, "master_seed": self.master_seed, "versions": self.versions,
                "steps": self.steps, "outputs": self.outputs, "checksums": self.checksums, "verdicts": self.verdicts,
                "timings": self.timings, "exit_code": self.exit_code}


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("exitlab", "numpy", "scipy", "numba", "scikit-learn"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _status(ok: bool | None, inconclusive: bool = False) -> str:
    if inconclusive or ok is None:
        return INCONCLUSIVE
    return PASS if ok else FAIL


# -- steps ------------------------------------------------------------------------------

class _Context:
    def __init__(self, cfg: LabConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.spec = cfg.kernel()
        self.ledger = None

    @property
    def sim(self):
        return self.cfg.sim_config(C1=self.ledger.C1 if self.ledger else None)

    @property
    def U(self) -> Ball:
        return Ball(self.cfg.x0, self.cfg.r)


def _step_derive(ctx: _Context) -> StepResult:
    ctx.ledger = ctx.cfg.ledger()
    write_json(ctx.out / "ledger.json", ctx.ledger.to_dict())
    lg = ctx.ledger
    return StepResult("derive", ["ledger.json"], {},
                      [f"delta0={lg.delta0:.6g} alpha_final={lg.alpha_final:.6g} b={lg.b:.10g} "
                       f"beta={lg.beta:.6g} C={lg.C:.8g}"])


def _step_check_l(ctx: _Context) -> StepResult:
    cfg, spec = ctx.cfg, ctx.spec
    p = cfg.data["pipeline"]
    w = check_L_conditions(spec.profile, LConditionWitness(float(p["c1"]), float(p["c2"]),
                                                           float(p["c3"]), spec.K0), d=spec.d)
    worst_doubling, doubling_ok = check_doubling(spec.profile, float(p["c1"]), float(p["c3"]))
    k0_value, k0_ok, k0_msg = check_K0(spec)
    write_json(ctx.out / "check_l.json", {
        "witness": w.to_dict(), "doubling": {"worst": worst_doubling, "passed": doubling_ok},
        "K0": {"value": k0_value, "bound": spec.K0, "passed": k0_ok, "message": k0_msg},
    })
    verdicts = {"L1": _status(w.verdict_L1), "L2": _status(w.verdict_L2), "L3": _status(w.verdict_L3),
                "L_zero_infinite": _status(w.L_zero_infinite), "doubling": _status(doubling_ok),
                "K0": _status(k0_ok)}
    return StepResult("check-L", ["check_l.json"], verdicts,
                      [f"worst L1={w.worst_L1:.6g} L2={w.worst_L2:.6g} L3={w.worst_L3:.6g} "
                       f"K0 integral={k0_value:.6g}"])


def _step_simulate(ctx: _Context) -> StepResult:
    cfg = ctx.cfg
    sc = ctx.sim
    s = exit_samples(ctx.spec, cfg.x0, ctx.U, sc.n_paths, cfg.seed, label="simulate", config=sc)
    s.to_csv(ctx.out / "samples.csv")
    res = estimate_exit_time_mean(ctx.spec, cfg.x0, ctx.U, sc, ledger=ctx.ledger, samples=s)
    write_json(ctx.out / "exit_time.json", {**res.to_dict(), "eps": s.eps, "seed": cfg.seed})
    return StepResult("simulate", ["samples.csv", "exit_time.json"],
                      {"exit_time_sandwich": _status(res.bounds_ok, not res.valid)},
                      [f"mean exit time {res.mean:.6g} (99% CI {res.ci[0]:.6g}..{res.ci[1]:.6g}), "
                       f"bounds {res.bounds[0]:.6g}..{res.bounds[1]:.6g}"])


def _step_exit(ctx: _Context) -> StepResult:
    cfg = ctx.cfg
    sc = ctx.sim
    n = sc.n_paths
    emp = estimate_exit_measure(ctx.spec, cfg.x0, ctx.U, n, cfg.seed, config=sc, keep_samples=False)
    comp = check_composition(ctx.spec, Ball(cfg.x0, cfg.r / 2), ctx.U, cfg.x0, n, cfg.seed, sc)
    write_json(ctx.out / "exit_measure.json", {"exit_measure": emp.to_dict(),
                                                "total_mass": emp.total_mass,
                                                "composition": comp.to_dict()})
    verdicts = {"normalised": _status(emp.total_mass == 1.0, not emp.valid),
                "composition": _status(comp.passed)}
    return StepResult("exit", ["exit_measure.json"], verdicts,
                      [f"total mass {emp.total_mass!r}, KS {comp.ks:.4g} (allowance "
                       f"{comp.ks_allowance:.4g}), TV {comp.tv:.4g} (allowance {comp.tv_allowance:.4g})"])


def _step_conditions(ctx: _Context) -> StepResult:
    cfg, spec, lg = ctx.cfg, ctx.spec, ctx.ledger
    cc = cfg.data["conditions"]
    n, seed, r, sc = int(cc["n_paths"]), cfg.seed, cfg.r, ctx.sim
    grid_n = int(cc["grid_points"])
    c = np.asarray(cfg.x0)
    alpha = lg.alpha_J1
    reports = []
    for name in cc["which"]:
        if name == "J0":
            rep = check_J0(spec, c, r, alpha, n, seed, target=lg.delta0, config=sc)
        elif name == "J1":
            inner = intrinsic_radius(spec.profile, r, alpha)
            cells, fam = default_set_family(spec.d, r, inner, seed=seed, center=c)
            pts = x_grid(spec.d, intrinsic_radius(spec.profile, r, alpha**2), grid_n, c)
            rep = check_J1(spec, r, alpha, fam, pts, n, seed, cells=cells, target=lg.delta0,
                           center=c, config=sc)
        elif name == "J2":
            rep = check_J2(spec, r, lg.alpha0_J2, int(cc["n_max"]), grid_n, n, seed,
                           C0_bound=lg.C0_J2, center=c, config=sc)
        else:
            a = float(cc["hi_alpha"])
            pts = x_grid(spec.d, intrinsic_radius(spec.profile, r, a), grid_n, c)
            rep = check_HI(spec, r, a, default_payoff_family(spec.d, r, c), pts, n, seed,
                           center=c, config=sc)
        reports.append(rep)
    write_json(ctx.out / "conditions.json", {"reports": [rp.to_dict() for rp in reports]})
    return StepResult("conditions", ["conditions.json"],
                      {rp.condition: _status(rp.verdict) for rp in reports},
                      [f"{rp.condition}: estimate {rp.estimate:.6g}, 99% CI "
                       f"{rp.ci[0]:.6g}..{rp.ci[1]:.6g}, {'pass' if rp.verdict else 'fail'}"
                       for rp in reports])


HOLDER_COLUMNS = ("rho", "rho0", "h", "h0", "dh", "se", "bound", "within_bound")


def _step_holder(ctx: _Context) -> StepResult:
    cfg = ctx.cfg
    n = int(cfg.data["conditions"]["n_paths"])
    tr = measure_holder(ctx.spec, cfg.payoff(), cfg.r, ctx.ledger, cfg.data["geometry"]["holder_radii"],
                        n, cfg.seed, config=ctx.sim)
    with (ctx.out / "holder.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOLDER_COLUMNS)
        for row in tr.rows:
            w.writerow([repr(row[k]) if isinstance(row[k], float) else int(row[k])
                        for k in HOLDER_COLUMNS])
    write_json(ctx.out / "holder_fit.json", {"fit": tr.fit.to_dict(), "beta_ledger": tr.beta_ledger,
                                             "C_ledger": ctx.ledger.C, "bound_ok": tr.bound_ok,
                                             "beta_ok": tr.beta_ok})
    fit = tr.fit
    line = (f"fitted beta {fit.beta:.4g} +- {fit.stderr:.2g} on {fit.n_used} points"
            if fit.available else f"fit unavailable: {fit.reason}")
    return StepResult("holder", ["holder.csv", "holder_fit.json"],
                      {"holder_bound": _status(tr.bound_ok),
                       "holder_beta": _status(tr.beta_ok, not fit.available)},
                      [line, f"bound dominance at every radius: {tr.bound_ok}"])


def _step_oscillation(ctx: _Context) -> StepResult:
    cfg = ctx.cfg
    cc = cfg.data["conditions"]
    alpha = cc["oscillation_alpha"]
    tr = verify_oscillation(ctx.spec, cfg.payoff(), cfg.r, ctx.ledger, int(cc["oscillation_levels"]),
                            int(cc["n_paths"]), cfg.seed, alpha=None if alpha is None else float(alpha),
                            n_grid=int(cc["grid_points"]), config=ctx.sim)
    write_json(ctx.out / "oscillation.json", tr.to_dict())
    statuses = [lv.status for lv in tr.levels]
    status = FAIL if FAIL in statuses else (INCONCLUSIVE if INCONCLUSIVE in statuses else PASS)
    return StepResult("oscillation", ["oscillation.json"], {"oscillation": status},
                      [f"n={lv.n}: osc {lv.osc:.4g} vs 3b^-n {lv.bound:.6g} ({lv.status})"
                       for lv in tr.levels])


STEP_FUNCS = {"derive": _step_derive, "check-L": _step_check_l, "simulate": _step_simulate,
              "exit": _step_exit, "conditions": _step_conditions, "holder": _step_holder,
              "oscillation": _step_oscillation}
NEEDS_LEDGER = ("simulate", "conditions", "holder", "oscillation")


def _check_plan(steps) -> None:
    if len(set(steps)) != len(steps):
        raise ConfigError("a step may appear only once in the plan")
    for i, s in enumerate(steps):
        if s in NEEDS_LEDGER and "derive" not in steps[:i]:
            raise ConfigError(f"step {s!r} needs the constant ledger; put 'derive' before it")


def run(cfg: LabConfig, out_dir, *, steps=None, log=None) -> RunManifest:
    """Execute the plan's steps in order and write a manifest and a summary into ``out_dir``."""
    steps = cfg.steps if steps is None else list(steps)
    _check_plan(steps)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(cfg, out)
    man = RunManifest(cfg.snapshot(), cfg.seed, _versions(), list(steps))
    summary = [f"exitlab run, master seed {cfg.seed}, steps: {', '.join(steps) or '(none)'}"]
    for step in steps:
        t0 = time.perf_counter()
        res = STEP_FUNCS[step](ctx)
        man.timings[step] = round(time.perf_counter() - t0, 3)
        man.outputs[step] = res.files
        for k, v in res.verdicts.items():
            man.verdicts[f"{step}:{k}"] = v
        block = [f"[{step}]"] + [f"  {s}" for s in res.summary]
        block += [f"  verdict {k}: {v}" for k, v in res.verdicts.items()]
        summary += block
        if log:
            for line in block:
                log(line)
    summary.append(f"overall: {'pass' if man.exit_code == 0 else 'fail'}")
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    for files in man.outputs.values():
        for f in files:
            man.checksums[f] = hashlib.sha256((out / f).read_bytes()).hexdigest()
    write_json(out / "manifest.json", man.to_dict())
    return man


def run_manifest(path, out_dir, *, log=None) -> RunManifest:
    """Rerun the configuration and steps recorded in a manifest."""
    data = json.loads(Path(path).read_text())
    cfg = LabConfig.from_dict(data["config"], str(path))
    return run(cfg, out_dir, steps=data["steps"], log=log)


# -- plot data --------------------------------------------------------------------------

def _num(v) -> str:
    if isinstance(v, str):
        return v
    return f"{float(v):.10g}"


def _write_dat(path: Path, header: str, rows) -> None:
    lines = [f"# {header}"] + [" ".join(_num(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _ln(v: float) -> float:
    return math.log(v) if v > 0 else -math.inf


def emit_plot_data(result_dir, kind: str, out_dir=None) -> list[Path]:
    """Plain-text whitespace-separated data files for one result kind.

    ``oscillation`` gives ``(n, osc_n, 3 b^-n)``; ``holder`` a scatter of
    ``(ln rho0, ln|dh|, ln bound)`` plus the fitted line; ``J2`` the decay
    ``(n, m_n, C0 a0^n)`` plus the fitted curve on a fine grid.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    src = Path(result_dir)
    dst = Path(out_dir) if out_dir is not None else src
    dst.mkdir(parents=True, exist_ok=True)

    def need(name):
        p = src / name
        if not p.is_file():
            raise FileNotFoundError(f"{p} not found; run the corresponding step first")
        return p

    if kind == "oscillation":
        data = json.loads(need("oscillation.json").read_text())
        out = dst / "oscillation.dat"
        _write_dat(out, "n osc_n s_n", [(lv["n"], lv["osc"], lv["bound"]) for lv in data["levels"]])
        return [out]
    if kind == "holder":
        with need("holder.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        fit = json.loads(need("holder_fit.json").read_text())["fit"]
        pts = [(_ln(float(r["rho0"])), _ln(abs(float(r["dh"]))), _ln(float(r["bound"]))) for r in rows]
        scatter = dst / "holder_scatter.dat"
        _write_dat(scatter, "ln_rho0 ln_abs_dh ln_bound", pts)
        line = dst / "holder_line.dat"
        if fit.get("available"):
            xs = np.linspace(min(p[0] for p in pts), max(p[0] for p in pts), 50)
            _write_dat(line, f"ln_rho0 fitted_ln_abs_dh (beta={fit['beta']:.6g})",
                       [(x, fit["intercept"] + fit["beta"] * x) for x in xs])
        else:
            _write_dat(line, "ln_rho0 fitted_ln_abs_dh (fit unavailable)", [])
        return [scatter, line]
    data = json.loads(need("conditions.json").read_text())
    reps = [r for r in data["reports"] if r["condition"] == "J2"]
    if not reps:
        raise FileNotFoundError("conditions.json holds no J2 report")
    det = reps[0]["details"]
    C0, a0 = float(det["C0"]), float(det["a0"])
    decay = dst / "j2_decay.dat"
    _write_dat(decay, "n m_n C0_a0^n", [(lv["n"], lv["m"], C0 * a0 ** lv["n"]) for lv in det["levels"]])
    ns = np.linspace(1, max(lv["n"] for lv in det["levels"]), 50)
    fitted = dst / "j2_fit.dat"
    _write_dat(fitted, f"n C0_a0^n (C0={C0:.6g}, a0={a0:.6g})", [(x, C0 * a0**x) for x in ns])
    return [decay, fitted]
