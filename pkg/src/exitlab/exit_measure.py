"""Empirical exit measures, harmonic functions and the consistency of two-stage exits.

The exit measure of a ball ``U`` from ``x`` is the law of the (overshooting)
exit position. Its empirical version is kept as a histogram over annular
cells of ``U^c`` whose radii grow geometrically, plus the far-tail mass
and, optionally, the raw samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as _st

from .geometry import Ball, as_points
from .kernel import KernelSpec
from .profiles import DomainError
from .rng import Stream, stream_id
from .simulator import ExitSamples, SimConfig, simulate_exits
from .stats import clopper_pearson, ks_allowance, normal_ci

__all__ = [
    "ExitEmpirical",
    "HarmonicSpec",
    "CompositionReport",
    "estimate_exit_measure",
    "exit_samples",
    "harmonic_eval",
    "harmonic_values",
    "check_composition",
    "tail_mass",
    "sectors_for",
]


def sectors_for(d: int) -> list[tuple[str, tuple | None, float]]:
    """Directional sectors of the histogram: the two half-lines in 1d, everything otherwise."""
    if d == 1:
        return [("-", (-1.0,), 0.0), ("+", (1.0,), 0.0)]
    return [("all", None, -1.0)]


@dataclass(frozen=True, eq=False)
class ExitEmpirical:
    """Histogram of exit positions over ``U^c``.

    ``counts[i]`` belongs to ``cells[i]``; ``tail_count`` collects exits
    beyond ``R_report``. Masses are ``count / n`` where ``n`` counts the
    uncensored paths, so they add up to one exactly in integer arithmetic.
    """

    ball: Ball
    x: tuple
    n: int
    cells: list
    counts: np.ndarray
    tail_count: int
    n_censored: int
    seed: int
    stream: int
    R_report: float
    point_mass: bool
    samples: ExitSamples | None = field(default=None, repr=False)

    @property
    def masses(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def tail_mass(self) -> float:
        return self.tail_count / self.n

    @property
    def total_mass(self) -> float:
        return (int(self.counts.sum()) + self.tail_count) / self.n

    @property
    def valid(self) -> bool:
        return self.n_censored <= 0.01 * (self.n + self.n_censored)

    def mass_of(self, region) -> tuple[float, tuple[float, float]]:
        """Mass of a set (anything with ``contains``) from the raw samples, with a 99% interval."""
        if self.samples is None:
            raise DomainError("raw samples were not kept")
        keep = ~self.samples.censored
        k = int(np.sum(region.contains(self.samples.positions[keep])))
        lo, hi = clopper_pearson(k, self.n)
        return k / self.n, (float(lo), float(hi))

    def to_dict(self) -> dict:
        lo, hi = clopper_pearson(self.counts, self.n)
        tlo, thi = clopper_pearson(self.tail_count, self.n)
        return {
            "ball": self.ball.to_dict(),
            "x": list(self.x),
            "n": self.n,
            "n_censored": self.n_censored,
            "cells": [
                {"r_lo": c[0], "r_hi": c[1], "sector": c[2], "mass": float(m), "ci": [float(a), float(b)]}
                for c, m, a, b in zip(self.cells, self.masses, lo, hi)
            ],
            "tail_mass": self.tail_mass,
            "tail_ci": [float(tlo), float(thi)],
            "R_report": self.R_report,
            "point_mass": self.point_mass,
            "seed": {"master_seed": self.seed, "stream": self.stream},
        }


def exit_samples(spec: KernelSpec, x, U: Ball, n: int, seed: int, *, label="exit-measure",
                 config: SimConfig | None = None, path_ids=None, eps=None) -> ExitSamples:
    """``n`` exits from ``U`` started at ``x`` under the stream ``(seed, label)``."""
    cfg = replace(config or SimConfig(), master_seed=seed, n_paths=n)
    pts = as_points(x, spec.d)
    if pts.shape[0] == 1:
        pts = np.repeat(pts, n, axis=0)
    return simulate_exits(spec, pts, U, cfg, path_ids=path_ids,
                          stream=Stream(seed, stream_id(label)), eps=eps)


def estimate_exit_measure(spec: KernelSpec, x, U: Ball, n: int, seed: int, *,
                          cell_ratio: float = 2.0, n_rings: int = 8,
                          config: SimConfig | None = None, keep_samples: bool = True,
                          label: str = "exit-measure") -> ExitEmpirical:
    """Empirical exit measure of ``U`` from ``x`` over ``n`` paths.

    Cell radii are ``radius * cell_ratio**k`` for ``k = 0..n_rings``; pass
    ``cell_ratio = 1/alpha`` to align cells with the levels of the
    regularity conditions.
    """
    if n < 1000:
        raise DomainError("need at least 10^3 paths")
    if not cell_ratio > 1:
        raise DomainError("cell_ratio must exceed 1")
    xs = as_points(x, spec.d)[0]
    point_mass = not bool(U.contains(xs)[0])
    s = exit_samples(spec, xs, U, n, seed, label=label, config=config)
    keep = ~s.censored
    n_ok = int(keep.sum())
    if n_ok == 0:
        raise DomainError("every path was censored")
    pos = s.positions[keep]
    rel = pos - np.asarray(U.center)
    rad = np.linalg.norm(rel, axis=1)
    edges = U.radius * cell_ratio ** np.arange(n_rings + 1)
    if point_mass:
        edges = np.unique(np.concatenate([[min(rad.min(), U.radius)], edges]))
    cells, counts = [], []
    ring = np.searchsorted(edges, rad, side="right") - 1
    for name, axis, cmin in sectors_for(spec.d):
        if axis is None:
            in_sector = np.ones(len(rad), dtype=bool)
        else:
            in_sector = rel @ np.asarray(axis) >= 0 if name == "+" else rel @ np.asarray(axis) > 0
        for k in range(len(edges) - 1):
            cells.append((float(edges[k]), float(edges[k + 1]), name))
            counts.append(int(np.sum(in_sector & (ring == k))))
    tail = int(np.sum(ring >= len(edges) - 1))
    return ExitEmpirical(U, tuple(xs), n_ok, cells, np.array(counts), tail,
                         int((~keep).sum()), seed, s.stream, float(edges[-1]), point_mass,
                         s if keep_samples else None)


# -- harmonic functions ------------------------------------------------------------

@dataclass(frozen=True)
class HarmonicSpec:
    """Bounded payoff ``f`` on ``U^c``.

    ``kind`` is ``"indicator"`` (of ``region``), ``"radial_step"`` (value
    ``values[i]`` for ``edges[i] <= |y - center| < edges[i+1]``, 0 elsewhere)
    or ``"radial_lipschitz"`` (piecewise linear through ``(edges, values)``,
    constant beyond the ends). ``scale`` multiplies the payoff.
    """

    kind: str
    region: object = None
    edges: tuple = ()
    values: tuple = ()
    center: tuple = (0.0,)
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("indicator", "radial_step", "radial_lipschitz", "constant"):
            raise DomainError(f"unknown payoff kind {self.kind!r}")
        if self.kind == "indicator" and self.region is None:
            raise DomainError("an indicator payoff needs a region")
        if self.kind == "radial_step" and len(self.values) != len(self.edges) - 1:
            raise DomainError("radial_step needs len(values) == len(edges) - 1")
        if self.kind == "radial_lipschitz" and len(self.values) != len(self.edges):
            raise DomainError("radial_lipschitz needs one value per knot")

    @classmethod
    def indicator(cls, region, scale: float = 1.0) -> "HarmonicSpec":
        return cls("indicator", region=region, scale=scale)

    @property
    def sup_norm(self) -> float:
        if self.kind in ("indicator", "constant"):
            return abs(self.scale)
        return abs(self.scale) * max((abs(v) for v in self.values), default=0.0)

    @property
    def nonnegative(self) -> bool:
        if self.kind in ("indicator", "constant"):
            return self.scale >= 0
        return all(self.scale * v >= 0 for v in self.values)

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.kind == "constant":
            return np.full(y.shape[0], float(self.scale))
        if self.kind == "indicator":
            return self.scale * self.region.contains(y).astype(float)
        r = np.linalg.norm(y - np.asarray(self.center), axis=1)
        e = np.asarray(self.edges, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.kind == "radial_step":
            idx = np.searchsorted(e, r, side="right") - 1
            ok = (idx >= 0) & (idx < len(v))
            return self.scale * np.where(ok, v[np.clip(idx, 0, len(v) - 1)], 0.0)
        return self.scale * np.interp(r, e, v)

    def complement(self) -> "HarmonicSpec":
        """``sup_norm - f``, so that the two payoffs add up to the constant ``sup_norm``."""
        return _Complement(self)


class _Complement:
    """``sup_norm - f`` for a payoff ``f``."""

    kind = "complement"

    def __init__(self, base: HarmonicSpec):
        self.base = base
        self.scale = base.sup_norm

    @property
    def sup_norm(self) -> float:
        return self.base.sup_norm

    @property
    def nonnegative(self) -> bool:
        return self.base.nonnegative

    def __call__(self, y):
        return self.base.sup_norm - self.base(y)


def _payoff_stats(values: np.ndarray, spec_h: HarmonicSpec):
    n = len(values)
    mean = float(np.mean(values))
    if spec_h.kind == "indicator" and spec_h.scale != 0:
        k = int(round(np.sum(values) / spec_h.scale))
        lo, hi = clopper_pearson(k, n)
        lo, hi = sorted((float(lo) * spec_h.scale, float(hi) * spec_h.scale))
        return mean, (lo, hi)
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    lo, hi = normal_ci(mean, se)
    M = spec_h.sup_norm
    return mean, (max(lo, -M), min(hi, M))


def harmonic_eval(spec: KernelSpec, h_spec: HarmonicSpec, U: Ball, x, n: int, seed: int,
                  config: SimConfig | None = None) -> tuple[float, tuple[float, float]]:
    """``h(x) = int f dmu_x^U`` with a 99% interval."""
    s = exit_samples(spec, x, U, n, seed, label="harmonic", config=config)
    vals = h_spec(s.positions[~s.censored])
    return _payoff_stats(vals, h_spec)


def harmonic_values(spec: KernelSpec, payoffs, U: Ball, xs, n: int, seed: int, *,
                    label: str = "harmonic", config: SimConfig | None = None,
                    eps: float | None = None):
    """Payoff values on common random numbers: array ``(len(xs), len(payoffs), n)``.

    Every start uses path ids ``0..n-1`` of the same stream, so differences
    between starts are estimated with paired samples. Censored paths score 0.
    """
    pts = as_points(xs, spec.d)
    out = np.empty((pts.shape[0], len(payoffs), n))
    cens = np.zeros(pts.shape[0], dtype=int)
    ids = np.arange(n, dtype=np.uint64)
    for i, x in enumerate(pts):
        s = exit_samples(spec, x, U, n, seed, label=label, config=config, path_ids=ids, eps=eps)
        cens[i] = int(s.censored.sum())
        for j, f in enumerate(payoffs):
            out[i, j] = np.where(s.censored, 0.0, f(s.positions))
    return out, cens


# -- two-stage exits -----------------------------------------------------------------

@dataclass(frozen=True)
class CompositionReport:
    ks: float
    ks_allowance: float
    tv: float
    tv_allowance: float
    n_direct: int
    n_two_stage: int
    restarted: int

    @property
    def passed(self) -> bool:
        return self.ks <= self.ks_allowance and self.tv <= self.tv_allowance

    def to_dict(self) -> dict:
        return {**self.__dict__, "passed": self.passed}


def check_composition(spec: KernelSpec, V: Ball, U: Ball, x, n: int, seed: int,
                      config: SimConfig | None = None) -> CompositionReport:
    """Compare the exit law of ``U`` with exiting ``V`` first and then restarting.

    Both estimators use the cutoff chosen for ``U`` and independent streams.
    Distances: two-sample KS on the exit radius and total variation over a
    fixed annular partition, each with a 3-sigma allowance.
    """
    xs = as_points(x, spec.d)[0]
    if not (bool(U.contains(xs)[0]) and V.radius <= U.radius):
        raise DomainError("need x in U and V inside U")
    if np.linalg.norm(np.asarray(V.center) - np.asarray(U.center)) + V.radius > U.radius * (1 + 1e-12):
        raise DomainError("V must be contained in U")
    cfg = config or SimConfig()
    eps = cfg.eps_for(spec, U.radius)
    direct = exit_samples(spec, xs, U, n, seed, label="composition-direct", config=cfg, eps=eps)
    if bool(V.contains(xs)[0]):
        first = exit_samples(spec, xs, V, n, seed, label="composition-stage1", config=cfg, eps=eps)
        mid = first.positions
        cens1 = first.censored
    else:
        mid = np.repeat(xs[None, :], n, axis=0)
        cens1 = np.zeros(n, dtype=bool)
    final = mid.copy()
    inside = U.contains(mid) & ~cens1
    idx = np.flatnonzero(inside)
    cens2 = np.zeros(n, dtype=bool)
    if idx.size:
        second = simulate_exits(spec, mid[idx], U, replace(cfg, master_seed=seed), path_ids=idx,
                                stream=Stream(seed, stream_id("composition-stage2")), eps=eps)
        final[idx] = second.positions
        cens2[idx] = second.censored
    a = U.dist(direct.positions[~direct.censored])
    b = U.dist(final[~(cens1 | cens2)])
    ks = float(_st.ks_2samp(a, b).statistic)
    edges = U.radius * np.array([1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, np.inf])
    pa = np.histogram(a, edges)[0] / len(a)
    pb = np.histogram(b, edges)[0] / len(b)
    tv = 0.5 * float(np.sum(np.abs(pa - pb)))
    pbar = 0.5 * (pa + pb)
    tv_allow = 0.5 * float(np.sum(3.0 * np.sqrt(pbar * (1 - pbar) * (1 / len(a) + 1 / len(b)))))
    return CompositionReport(ks, ks_allowance(len(a), len(b)), tv, tv_allow, len(a), len(b),
                             int(idx.size))


def tail_mass(spec: KernelSpec, x, r_inner: float, r_outer, n: int, seed: int, *,
              center=None, config: SimConfig | None = None, label: str = "tail-mass"):
    """Probability that the exit from the ball of radius ``r_inner`` lands at
    distance ``>= r_outer`` from the centre, with 99% Clopper-Pearson bounds.

    ``r_outer`` may be an array; all radii are read off the same run.
    """
    outer = np.asarray(r_outer, dtype=float)
    if np.any(outer < r_inner):
        raise DomainError("need r_inner <= r_outer")
    U = Ball(center if center is not None else tuple(np.zeros(spec.d)), r_inner)
    s = exit_samples(spec, x, U, n, seed, label=label, config=config)
    keep = ~s.censored
    rad = U.dist(s.positions[keep])
    k = np.sum(rad[:, None] >= outer.ravel()[None, :], axis=0)
    m = int(keep.sum())
    lo, hi = clopper_pearson(k, m)
    mass = (k / m).reshape(outer.shape)
    if outer.ndim == 0:
        return float(mass), (float(lo[0]), float(hi[0]))
    return mass, (lo.reshape(outer.shape), hi.reshape(outer.shape))
