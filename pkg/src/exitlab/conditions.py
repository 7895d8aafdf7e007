"""Statistical checks of the exit-measure conditions J0, J1, J2 and HI.

Balls are intrinsic: for a Euclidean radius ``r`` and a factor ``q`` the
ball "``U_{q r}``" is the Euclidean ball of radius ``invert_L(L(r) / q)``
(``rho0 = 1/L(|x - x0|)`` is the intrinsic distance). All checks run on
common random numbers across the points of an x-grid, and all intervals are
99% Clopper-Pearson bounds used in the conservative direction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from .exit_measure import HarmonicSpec, harmonic_values
from .geometry import AnnularSector, Ball, as_points
from .kernel import KernelSpec
from .profiles import DomainError, ScalingProfile
from .simulator import SimConfig
from .stats import clopper_pearson

__all__ = [
    "ConditionReport",
    "intrinsic_radius",
    "x_grid",
    "default_set_family",
    "default_payoff_family",
    "check_J0",
    "check_J1",
    "check_J2",
    "check_HI",
    "derive_J_from_HI",
    "derive_alpha_from_HC",
]


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one condition check.

    ``estimate`` is the point estimate of the condition's constant (``delta0``
    for J0/J1, ``a0`` for J2, ``K`` for HI) and ``ci`` its 99% interval.
    """

    condition: str
    geometry: dict
    family: str
    estimate: float
    ci: tuple[float, float]
    verdict: bool
    seeds: dict
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ci"] = list(self.ci)
        return out


def intrinsic_radius(profile: ScalingProfile, r: float, q: float) -> float:
    """Euclidean radius of the intrinsic ball ``U_{q r}``: ``invert_L(L(r) / q)``."""
    if not (0 < q <= 1):
        raise DomainError("the factor must lie in (0, 1]")
    if q == 1:
        return r
    return profile.invert_L(profile.L(r) / q)


def x_grid(d: int, radius: float, n_points: int = 16, center=None) -> np.ndarray:
    """Centre plus ``n_points - 1`` points at half the given radius.

    In one dimension the ring degenerates to two points, so the remaining
    points are spread evenly over ``[-radius/2, radius/2]`` instead.
    """
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    m = n_points - 1
    if m <= 0:
        return c[None, :]
    if d == 1:
        ring = np.linspace(-0.5 * radius, 0.5 * radius, m)[:, None]
    elif d == 2:
        th = 2 * np.pi * np.arange(m) / m
        ring = 0.5 * radius * np.column_stack([np.cos(th), np.sin(th)])
    else:
        # Fibonacci sphere
        i = np.arange(m) + 0.5
        z = 1 - 2 * i / m
        ph = np.pi * (1 + 5**0.5) * i
        s = np.sqrt(1 - z * z)
        ring = 0.5 * radius * np.column_stack([s * np.cos(ph), s * np.sin(ph), z])
    return np.vstack([c[None, :], c[None, :] + ring])


def _seed_info(seed: int, label: str) -> dict:
    return {"master_seed": seed, "stream": label}


# -- J0 -------------------------------------------------------------------------------

def check_J0(spec: KernelSpec, x0, r: float, alpha: float, n: int, seed: int, *,
             target: float | None = None, config: SimConfig | None = None) -> ConditionReport:
    """Probability that the exit from ``U_{alpha r}`` (started at the centre) lands in ``U_r``.

    The reported ``delta0`` is the lower 99% bound; the verdict compares it
    with ``target`` (or with 0 when no target is given).
    """
    if not (0 < alpha < 1):
        raise DomainError("alpha must lie in (0, 1)")
    x0 = as_points(x0, spec.d)[0]
    inner = intrinsic_radius(spec.profile, r, alpha)
    vals, cens = harmonic_values(spec, [_InBall(x0, r)], Ball(tuple(x0), inner), x0, n, seed,
                                 label="J0", config=config)
    k = int(vals[0, 0].sum())
    lo, hi = clopper_pearson(k, n)
    thr = 0.0 if target is None else target
    return ConditionReport(
        "J0", {"x0": list(x0), "r": r, "alpha": alpha, "inner_radius": inner},
        "U_r", k / n, (float(lo), float(hi)), bool(lo > thr), _seed_info(seed, "J0"),
        {"delta0_lower": float(lo), "target": target, "n": n, "n_censored": int(cens.sum()),
         "tail_mass": 1 - k / n},
    )


class _InBall:
    """Indicator of an open Euclidean ball, as a payoff."""

    kind = "indicator"
    scale = 1.0
    sup_norm = 1.0

    def __init__(self, center, radius):
        self.ball = Ball(tuple(np.atleast_1d(center)), radius)

    def __call__(self, y):
        return self.ball.contains(y).astype(float)


class _Beyond:
    """Indicator of ``{|y - c| >= radius}``."""

    kind = "indicator"
    scale = 1.0
    sup_norm = 1.0

    def __init__(self, center, radius):
        self.ball = Ball(tuple(np.atleast_1d(center)), radius)

    def __call__(self, y):
        return (~self.ball.contains(y)).astype(float)


# -- J1 -------------------------------------------------------------------------------

def default_set_family(d: int, r: float, inner: float, *, n_rings: int = 4, n_random: int = 100,
                       seed: int = 0, center=None):
    """Cells partitioning ``U_r`` and the adversarial family of cell unions.

    Cells are the ball ``|y| < inner`` (never charged by the exit measure)
    and ``n_rings`` geometric rings between ``inner`` and ``r``, each split
    into the two half-spaces along the first axis. The family holds every
    union of at most three cells and ``n_random`` random unions.
    """
    c = tuple(np.zeros(d)) if center is None else tuple(center)
    edges = np.geomspace(inner, r, n_rings + 1)
    cells = [AnnularSector(c, 0.0, inner)]
    axis = tuple(np.eye(d)[0])
    neg = tuple(-np.eye(d)[0])
    for lo, hi in zip(edges[:-1], edges[1:]):
        cells.append(AnnularSector(c, lo, hi, axis, 0.0))
        cells.append(AnnularSector(c, lo, hi, neg, 0.0))
    m = len(cells)
    family = [(i,) for i in range(m)]
    family += list(combinations(range(m), 2)) + list(combinations(range(m), 3))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        size = int(rng.integers(2, m))
        family.append(tuple(sorted(rng.choice(m, size=size, replace=False).tolist())))
    return cells, family


def _cell_index(cells, r: float, pos: np.ndarray, center) -> np.ndarray:
    """Index of the cell containing each position, ``-1`` outside ``U_r`` (ties go to the first)."""
    idx = np.full(pos.shape[0], -1)
    inside = np.linalg.norm(pos - np.asarray(center), axis=1) < r
    for k in range(len(cells) - 1, -1, -1):
        idx = np.where(inside & cells[k].contains(pos), k, idx)
    return idx


def check_J1(spec: KernelSpec, r: float, alpha: float, set_family, x_grid_pts, n: int, seed: int,
             *, cells=None, target: float | None = None, center=None,
             config: SimConfig | None = None) -> ConditionReport:
    """Set dichotomy: ``delta(A) = max(min_x mu_x(A), min_x mu_x(U_r \\ A))`` with
    ``mu_x`` the exit law of ``U_{alpha r}`` and ``x`` over the grid.

    ``set_family`` is either a list of index tuples into ``cells`` (a
    partition of ``U_r``) or a list of sets with a ``contains`` method. The
    reported value is ``min_A delta(A)``, an upper estimate of the infimum
    over all sets; its lower 99% bound is compared with ``target``.
    """
    family = list(set_family)
    if not family:
        raise DomainError("the set family is empty")
    c = np.zeros(spec.d) if center is None else np.asarray(center, dtype=float)
    xs = as_points(x_grid_pts, spec.d)
    inner = intrinsic_radius(spec.profile, r, alpha)
    cfg = config or SimConfig()
    eps = cfg.eps_for(spec, inner)
    from .exit_measure import exit_samples  # local: avoid widening the public surface

    ids = np.arange(n, dtype=np.uint64)
    n_x = xs.shape[0]
    in_Ur = np.zeros(n_x, dtype=np.int64)
    by_cells = isinstance(family[0], tuple)
    if by_cells:
        if cells is None:
            raise DomainError("index-tuple families need their cells")
        counts = np.zeros((n_x, len(cells)), dtype=np.int64)
    else:
        counts = np.zeros((n_x, len(family)), dtype=np.int64)
    n_cens = 0
    for i, x in enumerate(xs):
        s = exit_samples(spec, x, Ball(tuple(c), inner), n, seed, label="J1", config=cfg,
                         path_ids=ids, eps=eps)
        ok = ~s.censored
        n_cens += int((~ok).sum())
        pos = s.positions[ok]
        inside = np.linalg.norm(pos - c, axis=1) < r
        in_Ur[i] = int(inside.sum())
        if by_cells:
            idx = _cell_index(cells, r, pos, c)
            counts[i] = np.bincount(idx[idx >= 0], minlength=len(cells))
        else:
            for j, A in enumerate(family):
                counts[i, j] = int(np.sum(inside & A.contains(pos)))
    if by_cells:
        kA = np.stack([counts[:, list(a)].sum(axis=1) for a in family], axis=1)
    else:
        kA = counts
    kC = in_Ur[:, None] - kA
    loA, _ = clopper_pearson(kA, n)
    loC, _ = clopper_pearson(kC, n)
    est = np.maximum((kA / n).min(axis=0), (kC / n).min(axis=0))
    low = np.maximum(loA.min(axis=0), loC.min(axis=0))
    worst = int(np.argmin(est))
    worst_low = int(np.argmin(low))
    delta_low = float(low[worst_low])
    _, hi_all = clopper_pearson(np.maximum(kA, kC), n)
    thr = 0.0 if target is None else target
    return ConditionReport(
        "J1", {"r": r, "alpha": alpha, "inner_radius": inner, "x_grid": xs.tolist()},
        f"{len(family)} sets" + (" (cell unions)" if by_cells else ""),
        float(est[worst]), (delta_low, float(hi_all[:, worst].max())), bool(delta_low > thr),
        _seed_info(seed, "J1"),
        {"delta0_lower": delta_low, "target": target, "worst_set": str(family[worst]),
         "n": n, "n_censored": n_cens, "per_set": est.tolist()},
    )


# -- J2 -------------------------------------------------------------------------------

def check_J2(spec: KernelSpec, r: float, alpha0: float, n_max: int, x_grid_per_level: int,
             n: int, seed: int, *, C0_bound: float | None = None, center=None,
             config: SimConfig | None = None) -> ConditionReport:
    """Overshoot decay ``m_k = max_x mu_x^{U_{alpha0^k r}}(U_r^c)`` for ``k = 1..n_max``.

    ``x`` runs over a grid in ``U_{alpha0^{k+1} r}``; ``(C0, a0)`` come from a
    least-squares fit of ``ln m_k`` on ``k`` over the nonzero levels. With
    ``C0_bound`` each level is also checked against ``C0_bound * alpha0**k``
    plus three binomial standard errors. All levels share path ids.
    """
    if n_max < 3:
        raise DomainError("n_max must be at least 3")
    c = np.zeros(spec.d) if center is None else np.asarray(center, dtype=float)
    levels = []
    cfg = config or SimConfig()
    for k in range(1, n_max + 1):
        rad = intrinsic_radius(spec.profile, r, alpha0**k)
        grid_r = intrinsic_radius(spec.profile, r, alpha0 ** (k + 1))
        xs = x_grid(spec.d, grid_r, x_grid_per_level, c)
        vals, cens = harmonic_values(spec, [_Beyond(c, r)], Ball(tuple(c), rad), xs, n, seed,
                                     label="J2", config=cfg)
        counts = vals[:, 0].sum(axis=1)
        j = int(np.argmax(counts))
        m = float(counts[j] / n)
        lo, hi = clopper_pearson(counts, n)
        se = math.sqrt(max(m * (1 - m), 1.0 / n) / n)
        row = {"n": k, "radius": rad, "m": m, "ci": [float(lo[j]), float(hi.max())], "se": se,
               "n_censored": int(cens.sum())}
        if C0_bound is not None:
            row["bound"] = C0_bound * alpha0**k
            row["within_bound"] = bool(m <= row["bound"] + 3 * se)
        levels.append(row)
    ks = np.array([lv["n"] for lv in levels], dtype=float)
    ms = np.array([lv["m"] for lv in levels])
    nz = ms > 0
    if not np.any(nz):
        C0, a0, a0_hi = 1.0, 0.0, 0.0
    elif nz.sum() == 1:
        k1 = ks[nz][0]
        C0, a0 = 1.0, float(ms[nz][0] ** (1.0 / k1))
        a0_hi = float(levels[int(np.flatnonzero(nz)[0])]["ci"][1] ** (1.0 / k1))
    else:
        A = np.column_stack([np.ones(nz.sum()), ks[nz]])
        coef, *_ = np.linalg.lstsq(A, np.log(ms[nz]), rcond=None)
        C0, a0 = float(math.exp(coef[0])), float(math.exp(coef[1]))
        resid = np.log(ms[nz]) - A @ coef
        dof = max(int(nz.sum()) - 2, 1)
        cov = (resid @ resid / dof) * np.linalg.inv(A.T @ A)
        a0_hi = float(math.exp(coef[1] + 2.576 * math.sqrt(max(cov[1, 1], 0.0))))
    ok = a0 < 1 and all(lv.get("within_bound", True) for lv in levels)
    return ConditionReport(
        "J2", {"r": r, "alpha0": alpha0, "n_max": n_max, "x_grid_per_level": x_grid_per_level},
        "U_r^c", a0, (0.0, a0_hi), bool(ok), _seed_info(seed, "J2"),
        {"C0": C0, "a0": a0, "levels": levels, "C0_bound": C0_bound},
    )


# -- HI -------------------------------------------------------------------------------

def default_payoff_family(d: int, r: float, center=None) -> list:
    """Nonnegative payoffs on ``U_r^c``: sector indicators of dyadic rings and two radial steps."""
    c = tuple(np.zeros(d)) if center is None else tuple(center)
    fam = []
    edges = [r, 2 * r, 4 * r, math.inf]
    axis = tuple(np.eye(d)[0])
    for lo, hi in zip(edges[:-1], edges[1:]):
        fam.append(HarmonicSpec.indicator(AnnularSector(c, lo, hi, axis, 0.0)))
        fam.append(HarmonicSpec.indicator(AnnularSector(c, lo, hi)))
    fam.append(HarmonicSpec("radial_step", edges=(r, 2 * r, 4 * r, 1e300), values=(1.0, 0.5, 0.25),
                            center=c))
    fam.append(HarmonicSpec("radial_step", edges=(r, 1.5 * r, 1e300), values=(0.2, 1.0), center=c))
    return fam


def check_HI(spec: KernelSpec, r: float, alpha: float, payoff_family, x_grid_pts, n: int,
             seed: int, *, center=None, config: SimConfig | None = None) -> ConditionReport:
    """Harnack ratio ``K(f) = max_x h_f / min_x h_f`` over the grid in ``U_{alpha r}``.

    ``h_f(x) = int f dmu_x^{U_r}``. Payoffs whose smallest value is below the
    noise floor (three standard errors) are excluded and listed.
    """
    fam = list(payoff_family)
    if not fam:
        raise DomainError("the payoff family is empty")
    for f in fam:
        if not getattr(f, "nonnegative", True):
            raise DomainError("Harnack payoffs must be nonnegative")
    c = np.zeros(spec.d) if center is None else np.asarray(center, dtype=float)
    xs = as_points(x_grid_pts, spec.d)
    vals, cens = harmonic_values(spec, fam, Ball(tuple(c), r), xs, n, seed, label="HI",
                                 config=config)
    h = vals.mean(axis=2)  # (n_x, n_f)
    se = vals.std(axis=2, ddof=1) / math.sqrt(n)
    per, excluded = [], []
    K, K_hi = 1.0, 1.0
    for j in range(len(fam)):
        i_min, i_max = int(np.argmin(h[:, j])), int(np.argmax(h[:, j]))
        floor = 3 * max(se[i_min, j], fam[j].sup_norm / n)
        if h[i_min, j] <= floor:
            excluded.append(j)
            continue
        k = float(h[i_max, j] / h[i_min, j])
        lo_min = max(h[i_min, j] - 2.576 * se[i_min, j], floor / 3)
        k_hi = float((h[i_max, j] + 2.576 * se[i_max, j]) / lo_min)
        per.append({"index": j, "K": k, "K_upper": k_hi, "min": float(h[i_min, j]),
                    "max": float(h[i_max, j])})
        K = max(K, k)
        K_hi = max(K_hi, k_hi)
    return ConditionReport(
        "HI", {"r": r, "alpha": alpha, "x_grid": xs.tolist()}, f"{len(fam)} payoffs",
        K, (1.0, K_hi), bool(math.isfinite(K) and len(per) > 0), _seed_info(seed, "HI"),
        {"per_payoff": per, "excluded": excluded, "n": n, "n_censored": int(cens.sum())},
    )


# -- deterministic derivations ---------------------------------------------------------

def derive_J_from_HI(K: float, delta0: float, alpha: float):
    """Constants implied by a Harnack inequality with constant ``K``:
    J1 ``(alpha, delta0 / (2K))`` and J2 ``(alpha**2, 1 - delta0 / K**2, C0 = 1)``."""
    if not K >= 1:
        raise DomainError("K must be at least 1")
    if not (0 < delta0 < 1):
        raise DomainError("delta0 must lie in (0, 1)")
    return (alpha, delta0 / (2 * K)), (alpha**2, 1 - delta0 / K**2, 1.0)


def derive_alpha_from_HC(C: float, beta: float, delta0: float, alpha0: float) -> float:
    """``min(alpha0 / 2, (delta0 / (8 C))**(1/beta))``, which gives ``C alpha**beta < delta0 / 4``."""
    if not (C > 0 and 0 < beta < 1 and 0 < delta0 < 1):
        raise DomainError("need C > 0, beta in (0, 1) and delta0 in (0, 1)")
    return min(alpha0 / 2, (delta0 / (8 * C)) ** (1 / beta))


