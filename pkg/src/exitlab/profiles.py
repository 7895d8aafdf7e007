"""Scaling profiles ``l`` and the derived functions ``L`` and ``Ltilde``.

For a profile ``l`` on ``(0, R0)``::

    L(r)      = integral_r^R0  u**-1 l(u) du
    Ltilde(r) = r**-2 integral_0^r u l(u) du

Every family implements ``log_l(v) = ln l(exp(v))``. All quadrature runs in
``v = ln u`` on that log-density, so nothing under- or overflows however far
the integration reaches toward 0 or infinity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .quadrature import QuadratureError, integrate_segments

__all__ = [
    "DomainError",
    "ScalingProfile",
    "StableProfile",
    "RegularlyVaryingProfile",
    "LogCounterexampleProfile",
    "TableProfile",
    "LConditionWitness",
    "make_profile",
    "eval_l",
    "eval_L",
    "eval_Ltilde",
    "invert_L",
    "check_L_conditions",
    "doubling_constant",
    "check_doubling",
    "derive_c2_from_l2",
    "default_grid",
]

L_RTOL = 1e-10
LTILDE_RTOL = 1e-8
INVERT_RTOL = 1e-10
R_MIN = 1e-300


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


@dataclass(frozen=True)
class ScalingProfile:
    """Base class. Subclasses provide :meth:`log_l` and may override closed forms."""

    R0: float = math.inf
    R: float = 1.0
    c_L: float | None = None
    gamma: float | None = None

    family = "abstract"

    def __post_init__(self):
        if not (self.R0 > 0):
            raise DomainError("R0 must be positive")
        if not (0 < self.R < self.R0):
            raise DomainError(f"need 0 < R < R0, got R={self.R}, R0={self.R0}")
        if self.gamma is not None and not (0 < self.gamma < 2):
            raise DomainError("gamma must lie in (0, 2)")
        if self.c_L is not None and not (self.c_L > 0):
            raise DomainError("c_L must be positive")

    # -- to be provided by families ---------------------------------------
    def log_l(self, v):
        raise NotImplementedError

    def params(self) -> dict:
        return {"R0": self.R0, "R": self.R}

    # -- the profile itself -------------------------------------------------
    def _check_open(self, u, what="u"):
        if np.any(~(u > 0)) or np.any(~(u < self.R0)):
            raise DomainError(f"{what} must lie in (0, R0={self.R0})")

    def l(self, u):
        """``l(u)`` for ``0 < u < R0``."""
        u, scalar = _as_array(u)
        self._check_open(u)
        out = np.exp(self.log_l(np.log(u)))
        return float(out) if scalar else out

    # -- L ----------------------------------------------------------------
    def _L_quad(self, r):
        """Quadrature for ``L`` on a flat array with ``0 < r <= R0``."""
        order = np.argsort(r)
        rs = r[order]
        uniq, inverse = np.unique(rs, return_inverse=True)
        top = math.log(self.R0) if math.isfinite(self.R0) else math.inf
        edges = np.append(np.log(uniq), top)
        edges = np.minimum(edges, top)
        vals, _ = integrate_segments(lambda v: np.exp(self.log_l(v)), edges,
                                     rtol=L_RTOL, log_scale=False)
        tails = np.cumsum(vals[::-1])[::-1]
        out = np.empty_like(r)
        out[order] = tails[inverse]
        return out

    def _L_closed(self, r):
        return None

    def L(self, r):
        """``L(r) = int_r^R0 l(u)/u du`` for ``0 < r <= R0``."""
        r, scalar = _as_array(r)
        if np.any(~(r > 0)) or np.any(r > self.R0):
            raise DomainError(f"r must lie in (0, R0={self.R0}]")
        flat = r.ravel()
        out = self._L_closed(flat)
        if out is None:
            out = self._L_quad(flat)
        out = out.reshape(r.shape)
        return float(out) if scalar else out

    def L_ext(self, r):
        """``L`` extended by 0 beyond ``R0`` (jumps longer than ``R0`` carry no ``l`` mass)."""
        r, scalar = _as_array(r)
        out = np.zeros_like(r)
        inside = r < self.R0
        if np.any(inside):
            out[inside] = self.L(r[inside])
        return float(out) if scalar else out

    # -- Ltilde -----------------------------------------------------------
    def _Ltilde_closed(self, r):
        return None

    def second_moment(self, r):
        """``int_0^r u l(u) du``; ``inf`` when the integral diverges at 0."""
        r, scalar = _as_array(r)
        if np.any(~(r > 0)) or np.any(~(r < self.R0)):
            raise DomainError(f"r must lie in (0, R0={self.R0})")
        flat = r.ravel()
        closed = self._Ltilde_closed(flat)
        if closed is not None:
            out = closed * flat**2
        else:
            order = np.argsort(flat)
            uniq, inverse = np.unique(flat[order], return_inverse=True)
            edges = np.concatenate([[-math.inf], np.log(uniq)])
            try:
                vals, _ = integrate_segments(lambda v: np.exp(2.0 * v + self.log_l(v)), edges,
                                             rtol=LTILDE_RTOL, log_scale=False)
                cum = np.cumsum(vals)
                out = np.empty_like(flat)
                out[order] = cum[inverse]
            except QuadratureError:
                out = np.full_like(flat, np.inf)
        out = out.reshape(r.shape)
        return float(out) if scalar else out

    def Ltilde(self, r):
        """``r**-2 int_0^r u l(u) du``; ``inf`` if the integral diverges (``(K)`` violated)."""
        r, scalar = _as_array(r)
        out = np.asarray(self.second_moment(r)) / r**2
        return float(out) if scalar else out

    # -- inverse of L -------------------------------------------------------
    def _invert_closed(self, t):
        return None

    def invert_L(self, t: float) -> float:
        """Return ``r`` with ``L(r) = t`` to relative accuracy ``1e-10`` in ``L``."""
        t = float(t)
        if not (t > 0) or not math.isfinite(t):
            raise DomainError("t must be a positive finite number")
        closed = self._invert_closed(t)
        if closed is not None:
            if not (R_MIN <= closed < self.R0 or (closed == self.R0 and t == 0)):
                raise DomainError(f"t={t} outside the range of L")
            return closed
        return self._invert_bracketed(t)

    def _invert_bracketed(self, t):
        # bracket in v = ln r: L(e^lo) > t > L(e^hi)
        if math.isfinite(self.R0):
            hi = math.log(self.R0)
        else:
            hi = 0.0
            while self.L(math.exp(hi)) >= t:
                hi += 4.0
                if hi > 700:
                    raise DomainError(f"t={t} below the range of L")
        lo = min(hi - 1.0, 0.0)
        L_lo = self.L(math.exp(lo))
        while L_lo <= t:
            lo -= 4.0
            if lo < math.log(R_MIN):
                raise DomainError(f"t={t} above L(r_min)")
            L_lo = self.L(math.exp(lo))
        # safeguarded Newton on v; dL/dv = -l(e^v)
        v = lo
        Lv = L_lo
        for _ in range(200):
            if abs(Lv - t) <= INVERT_RTOL * t:
                return math.exp(v)
            slope = -math.exp(float(self.log_l(np.array(v))))
            step = v - (Lv - t) / slope if slope != 0 else math.nan
            v_new = step if lo < step < hi else 0.5 * (lo + hi)
            Lv_new = self.L(math.exp(v_new))
            if Lv_new > t:
                lo = v_new
            else:
                hi = v_new
            v, Lv = v_new, Lv_new
            if hi - lo < 4 * np.finfo(float).eps * max(1.0, abs(lo)):
                return math.exp(v)
        return math.exp(v)


@dataclass(frozen=True)
class StableProfile(ScalingProfile):
    """``l(u) = u**-alpha``: the (truncated) isotropic alpha-stable profile."""

    alpha: float = 1.0
    family = "stable"

    def __post_init__(self):
        if not (self.alpha > 0):
            raise DomainError("alpha must be positive")
        if self.alpha < 2:
            if self.c_L is None:
                object.__setattr__(self, "c_L", 1.0)
            if self.gamma is None:
                object.__setattr__(self, "gamma", self.alpha)
        super().__post_init__()

    def params(self):
        return {"alpha": self.alpha, **super().params()}

    def log_l(self, v):
        return -self.alpha * np.asarray(v, dtype=float)

    def l(self, u):
        u, scalar = _as_array(u)
        self._check_open(u)
        out = u ** -self.alpha
        return float(out) if scalar else out

    def _tail(self):
        return 0.0 if math.isinf(self.R0) else self.R0 ** -self.alpha

    def _L_closed(self, r):
        return (r ** -self.alpha - self._tail()) / self.alpha

    def _Ltilde_closed(self, r):
        if self.alpha >= 2:
            return np.full_like(r, np.inf)
        return r ** -self.alpha / (2.0 - self.alpha)

    def _invert_closed(self, t):
        return (self.alpha * t + self._tail()) ** (-1.0 / self.alpha)


@dataclass(frozen=True)
class RegularlyVaryingProfile(ScalingProfile):
    """``l(u) = u**-alpha * (ln 1/u)**p``, regularly varying at 0 with index ``-alpha``."""

    R0: float = 0.5
    R: float = 0.25
    alpha: float = 1.0
    p: float = 1.0
    family = "geometric-like"

    def __post_init__(self):
        if not (self.R0 < 1 or (self.R0 == 1 and self.p >= 0)):
            raise DomainError("the (ln 1/u)**p factor needs R0 < 1")
        super().__post_init__()

    def params(self):
        return {"alpha": self.alpha, "p": self.p, **super().params()}

    def log_l(self, v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            return -self.alpha * v + self.p * np.log(-v)


@dataclass(frozen=True)
class LogCounterexampleProfile(ScalingProfile):
    """``l(u) = u**-2 (ln 1/u)**-2``: the profile for which ``Ltilde / L`` is unbounded."""

    R0: float = 0.5
    R: float = 0.25
    family = "log-counterexample"

    def __post_init__(self):
        if not self.R0 < 1:
            raise DomainError("log-counterexample needs R0 < 1")
        super().__post_init__()

    def log_l(self, v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            return -2.0 * v - 2.0 * np.log(-v)


@dataclass(frozen=True)
class TableProfile(ScalingProfile):
    """Piecewise log-linear profile through ``(u, l(u))`` knots, extrapolated by the end slopes."""

    knots_u: tuple = ()
    knots_l: tuple = ()
    source: str = ""
    family = "table"

    def __post_init__(self):
        u = np.asarray(self.knots_u, dtype=float)
        lv = np.asarray(self.knots_l, dtype=float)
        if u.ndim != 1 or u.size < 2 or u.shape != lv.shape:
            raise DomainError("need at least two (u, l) knots")
        if np.any(np.diff(u) <= 0):
            raise DomainError("knots must be strictly increasing")
        if u[0] <= 0 or u[-1] >= self.R0:
            raise DomainError("knots must lie in (0, R0)")
        if np.any(lv <= 0):
            raise DomainError("l must be strictly positive at the knots")
        super().__post_init__()

    @classmethod
    def from_csv(cls, path, **kwargs) -> "TableProfile":
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DomainError(f"{path}: empty table")
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
        else:
            raise DomainError(f"{path}: header row required")
        u = tuple(float(r[0]) for r in rows if r)
        lv = tuple(float(r[1]) for r in rows if r)
        return cls(knots_u=u, knots_l=lv, source=str(path), **kwargs)

    def params(self):
        return {"table": self.source or "inline", "knots": len(self.knots_u), **super().params()}

    def log_l(self, v):
        v = np.asarray(v, dtype=float)
        x = np.log(np.asarray(self.knots_u))
        y = np.log(np.asarray(self.knots_l))
        out = np.interp(v, x, y)
        lo_slope = (y[1] - y[0]) / (x[1] - x[0])
        hi_slope = (y[-1] - y[-2]) / (x[-1] - x[-2])
        out = np.where(v < x[0], y[0] + lo_slope * (v - x[0]), out)
        out = np.where(v > x[-1], y[-1] + hi_slope * (v - x[-1]), out)
        return out


def make_profile(name: str, **params) -> ScalingProfile:
    """Build a profile from a preset name: ``stable``, ``geometric-like``,
    ``log-counterexample`` or ``table:<path>``."""
    params = {k: (math.inf if v in ("inf", "infinity") else v) for k, v in params.items()}
    if name == "stable":
        return StableProfile(**params)
    if name in ("geometric-like", "regularly-varying"):
        return RegularlyVaryingProfile(**params)
    if name == "log-counterexample":
        return LogCounterexampleProfile(**params)
    if name.startswith("table:"):
        return TableProfile.from_csv(name[len("table:"):], **params)
    raise DomainError(f"unknown profile preset {name!r}")


# functional spellings
def eval_l(profile: ScalingProfile, u):
    return profile.l(u)


def eval_L(profile: ScalingProfile, r):
    return profile.L(r)


def eval_Ltilde(profile: ScalingProfile, r):
    return profile.Ltilde(r)


def invert_L(profile: ScalingProfile, t: float) -> float:
    return profile.invert_L(t)


# -- conditions (L1)-(L3) ----------------------------------------------------

def default_grid(profile: ScalingProfile, n: int = 50, r_min: float = 1e-8) -> np.ndarray:
    """``n`` log-spaced radii in ``[max(1e-8, r_min), R)``."""
    lo = max(1e-8, r_min)
    if lo >= profile.R:
        raise DomainError("r_min must be below R")
    return np.geomspace(lo, profile.R, n, endpoint=False)


@dataclass(frozen=True)
class LConditionWitness:
    """Constants to test and, once checked, the worst ratios found on the grid."""

    c1: float
    c2: float
    c3: float
    K0: float
    grid: tuple | None = None
    worst_L1: float | None = None
    worst_L2: float | None = None
    worst_L3: float | None = None
    verdict_L1: bool | None = None
    verdict_L2: bool | None = None
    verdict_L3: bool | None = None
    L_zero_infinite: bool | None = None
    L_trend: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return bool(self.verdict_L1 and self.verdict_L2 and self.verdict_L3 and self.L_zero_infinite)

    def to_dict(self) -> dict:
        return {
            "c1": self.c1, "c2": self.c2, "c3": self.c3, "K0": self.K0,
            "grid_min": min(self.grid) if self.grid else None,
            "grid_max": max(self.grid) if self.grid else None,
            "grid_size": len(self.grid) if self.grid else 0,
            "worst_L1": self.worst_L1, "worst_L2": self.worst_L2, "worst_L3": self.worst_L3,
            "verdict_L1": self.verdict_L1, "verdict_L2": self.verdict_L2,
            "verdict_L3": self.verdict_L3, "L_zero_infinite": self.L_zero_infinite,
            "passed": self.passed,
        }


def check_L_conditions(profile: ScalingProfile, witness: LConditionWitness, d: int = 1,
                       r_min: float = 1e-8) -> LConditionWitness:
    """Evaluate (L1)-(L3) on a log grid and record worst ratios and verdicts.

    Failures are verdicts, never exceptions. ``L(0) = inf`` is judged by the
    trend test ``L(1e-8 R) > 1e3 L(R)`` with ``L(10**-k R)`` increasing.
    """
    grid = np.asarray(witness.grid if witness.grid else default_grid(profile, r_min=r_min))
    if grid.size < 2:
        raise DomainError("grid needs at least two radii")
    R = profile.R

    # (L1): l(r/2) <= c1 l(r)  and  s^-d l(s) <= c1 r^-d l(r) for r <= s
    half = profile.l(grid / 2) / profile.l(grid)
    k = grid ** -d * profile.l(grid)
    pair = k[None, :] / k[:, None]  # [i, j] = k(s_j) / k(r_i)
    pair = np.where(grid[None, :] >= grid[:, None], pair, 0.0)
    worst1 = float(max(half.max(), pair.max()))

    # (L2): Ltilde / L
    with np.errstate(invalid="ignore"):
        ratio2 = np.asarray(profile.Ltilde(grid)) / profile.L(grid)
    worst2 = float(np.max(ratio2)) if np.all(np.isfinite(ratio2)) else math.inf

    # (L3): L(R/2) + (1 v R^-2) K0 <= c3 L(R)
    worst3 = float((profile.L(R / 2) + max(1.0, R ** -2) * witness.K0) / profile.L(R))

    trend = profile.L(R * 10.0 ** -np.arange(0, 9))
    zero_inf = bool(trend[-1] > 1e3 * trend[0] and np.all(np.diff(trend) > 0))

    return replace(
        witness,
        grid=tuple(float(g) for g in grid),
        worst_L1=worst1, worst_L2=worst2, worst_L3=worst3,
        verdict_L1=worst1 <= witness.c1,
        verdict_L2=worst2 <= witness.c2,
        verdict_L3=worst3 <= witness.c3,
        L_zero_infinite=zero_inf,
        L_trend=tuple(float(x) for x in trend),
    )


def doubling_constant(c1: float, c3: float) -> float:
    """``C4 = 1 + c1 + c3``, the doubling constant of ``L`` below ``R``."""
    if not (c1 > 1 and c3 > 1):
        raise DomainError("c1 and c3 must exceed 1")
    return 1.0 + c1 + c3


def check_doubling(profile: ScalingProfile, c1: float, c3: float,
                   grid: Sequence[float] | None = None) -> tuple[float, bool]:
    """Worst ``L(r/2) / L(r)`` over the grid, and whether it stays below ``C4``."""
    g = np.asarray(grid if grid is not None else default_grid(profile))
    worst = float(np.max(profile.L(g / 2) / profile.L(g)))
    return worst, worst <= doubling_constant(c1, c3)


def derive_c2_from_l2(c_L: float, gamma: float, R: float, R0: float) -> float:
    """Constant ``c`` with ``int_0^r u l(u) du <= c r^2 L(r)`` under the lower scaling
    ``l(v)/l(u) >= c_L (v/u)**-gamma``: ``c = gamma / ((2 - gamma) a c_L**2)`` with
    ``a = 1 - (R/R0)**gamma``."""
    if not (0 < gamma < 2):
        raise DomainError("gamma must lie in (0, 2)")
    if not c_L > 0:
        raise DomainError("c_L must be positive")
    if not (0 < R < R0):
        raise DomainError("need 0 < R < R0")
    a = 1.0 if math.isinf(R0) else 1.0 - (R / R0) ** gamma
    return gamma / ((2.0 - gamma) * a * c_L**2)
