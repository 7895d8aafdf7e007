"""Monte Carlo side of the Hoelder estimate: oscillation decay and the modulus of continuity.

Harmonic functions are ``h(x) = int f dmu_x^{U_r}`` for a bounded payoff
``f``, normalised by its sup-norm. Values at different points are computed
on common random numbers, so differences and oscillations have paired
standard errors far below the binomial error of a single value.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .conditions import intrinsic_radius, x_grid
from .constants import BetaFit, fit_empirical_beta, theoretical_bound
from .exit_measure import HarmonicSpec, harmonic_values
from .geometry import Ball
from .kernel import KernelSpec
from .profiles import DomainError
from .simulator import SimConfig

__all__ = ["OscillationLevel", "OscillationTrace", "verify_oscillation", "HolderTrace",
           "measure_holder"]


@dataclass(frozen=True)
class OscillationLevel:
    n: int
    radius: float
    sup: float
    inf: float
    M: float
    osc: float
    bound: float
    se: float
    status: str  # "pass", "fail" or "inconclusive"


@dataclass(frozen=True)
class OscillationTrace:
    """Per-level oscillation of ``h / ||f||`` over ``B_n = U_{alpha^n r}`` against ``3 b^-n``."""

    alpha: float
    b: float
    levels: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(lv.status != "fail" for lv in self.levels)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "b": self.b, "passed": self.passed,
                "levels": [asdict(lv) for lv in self.levels]}


def _level_points(d: int, radius: float, n_grid: int) -> np.ndarray:
    # x_grid puts its ring at half the given radius; doubling reaches 0.9 of the level radius
    return x_grid(d, 1.8 * radius, n_grid)


def verify_oscillation(spec: KernelSpec, h_spec: HarmonicSpec, r: float, ledger, n_max: int,
                       n_samples: int, seed: int, *, alpha: float | None = None,
                       n_grid: int = 16, config: SimConfig | None = None) -> OscillationTrace:
    """Oscillation of ``h`` over the nested balls ``B_n``, ``n = 0..n_max``.

    A level passes when ``osc_n <= 3 b^-n + 3 se``; it is inconclusive
    when three paired standard errors already exceed ``3 b^-n``.
    """
    if not 0 <= n_max <= 8:
        raise DomainError("n_max must lie in 0..8")
    M = h_spec.sup_norm
    if not M > 0:
        raise DomainError("the payoff must have a positive sup-norm")
    a = ledger.alpha_final if alpha is None else alpha
    U = Ball(tuple(np.zeros(spec.d)), r)
    cfg = config or SimConfig()
    eps = cfg.eps_for(spec, r)
    levels = []
    for n in range(n_max + 1):
        rad = intrinsic_radius(spec.profile, r, a**n)
        pts = _level_points(spec.d, rad, n_grid)
        vals, _ = harmonic_values(spec, [h_spec], U, pts, n_samples, seed, label="oscillation",
                                  config=cfg, eps=eps)
        v = vals[:, 0, :] / M
        h = v.mean(axis=1)
        i_max, i_min = int(np.argmax(h)), int(np.argmin(h))
        diff = v[i_max] - v[i_min]
        se = float(np.std(diff, ddof=1) / math.sqrt(n_samples))
        osc = float(h[i_max] - h[i_min])
        bound = 3.0 * ledger.b ** -n
        if osc <= bound + 3 * se:
            status = "pass"
        elif 3 * se >= bound:
            status = "inconclusive"
        else:
            status = "fail"
        levels.append(OscillationLevel(n, rad, float(h[i_max]), float(h[i_min]),
                                       0.5 * float(h[i_max] + h[i_min]), osc, bound, se, status))
    return OscillationTrace(a, ledger.b, levels)


@dataclass(frozen=True)
class HolderTrace:
    """``|h(x) - h(x0)|`` along a ray, the theoretical bound and the fitted exponent."""

    rows: list
    fit: BetaFit
    beta_ledger: float

    @property
    def bound_ok(self) -> bool:
        return all(row["within_bound"] for row in self.rows)

    @property
    def beta_ok(self) -> bool:
        return self.fit.available and self.fit.beta >= self.beta_ledger - 2 * self.fit.stderr

    def to_dict(self) -> dict:
        return {"rows": self.rows, "fit": self.fit.to_dict(), "beta_ledger": self.beta_ledger,
                "bound_ok": self.bound_ok, "beta_ok": self.beta_ok}


def measure_holder(spec: KernelSpec, h_spec: HarmonicSpec, r: float, ledger, radii, n: int,
                   seed: int, *, config: SimConfig | None = None) -> HolderTrace:
    """Paired estimates of ``h(x) - h(0)`` for ``x = rho e_1``, ``rho`` in ``radii``.

    Each point is compared with the bound ``C ||f|| (L(rho)/L(r))^-beta``
    plus three paired standard errors; the exponent is fitted on the points
    whose difference clears three standard errors.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(radii >= r):
        raise DomainError("radii must lie in (0, r)")
    M = h_spec.sup_norm
    e1 = np.eye(spec.d)[0]
    pts = np.vstack([np.zeros(spec.d), radii[:, None] * e1[None, :]])
    U = Ball(tuple(np.zeros(spec.d)), r)
    vals, _ = harmonic_values(spec, [h_spec], U, pts, n, seed, label="holder", config=config)
    v = vals[:, 0, :]
    h0 = float(v[0].mean())
    rows = []
    for i, rho in enumerate(radii, start=1):
        diff = v[i] - v[0]
        dh = float(diff.mean())
        se = float(np.std(diff, ddof=1) / math.sqrt(n))
        bound = theoretical_bound(spec.profile, ledger, [rho] + [0.0] * (spec.d - 1),
                                  np.zeros(spec.d), r, M)
        rows.append({"rho": float(rho), "rho0": 1.0 / spec.profile.L(rho), "h": float(v[i].mean()),
                     "h0": h0, "dh": dh, "se": se, "bound": bound,
                     "within_bound": bool(abs(dh) <= bound + 3 * se)})
    fit = fit_empirical_beta([(row["rho0"], abs(row["dh"])) for row in rows],
                             [3 * row["se"] for row in rows])
    return HolderTrace(rows, fit, ledger.beta)
