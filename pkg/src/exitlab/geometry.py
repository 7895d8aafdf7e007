"""Balls, annular sectors and their finite unions.

Annular sectors are the only sets the laboratory works with: target sets
for exit measures, payoff indicators and the adversarial families of the
set-dichotomy check are all finite unions of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profiles import DomainError

__all__ = ["Ball", "AnnularSector", "SetUnion", "as_points"]


def as_points(x, d: int) -> np.ndarray:
    """Coerce a point or an array of points to shape ``(n, d)``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, d) if d == 1 and arr.size != 1 else arr.reshape(1, -1)
    if arr.shape[1] != d:
        raise DomainError(f"points must have dimension {d}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball ``{|y - center| < radius}``."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not (self.radius > 0):
            raise DomainError("ball radius must be positive")

    @classmethod
    def centered(cls, d: int, radius: float, center=None) -> "Ball":
        return cls(tuple(np.zeros(d)) if center is None else center, radius)

    @property
    def d(self) -> int:
        return len(self.center)

    def dist(self, x) -> np.ndarray:
        pts = as_points(x, self.d)
        return np.linalg.norm(pts - np.asarray(self.center), axis=1)

    def contains(self, x) -> np.ndarray:
        return self.dist(x) < self.radius

    def to_dict(self) -> dict:
        return {"center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class AnnularSector:
    """``{r_lo <= |z - c| <= r_hi and <(z - c)/|z - c|, axis> >= cos_min}``.

    With ``cos_min = -1`` (default) the sector is the full closed annulus.
    In one dimension ``axis = (1,)`` with ``cos_min = 0`` selects the right
    half ``[c + r_lo, c + r_hi]``.
    """

    center: tuple
    r_lo: float
    r_hi: float
    axis: tuple | None = None
    cos_min: float = -1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.axis is not None:
            a = np.asarray(self.axis, dtype=float)
            if a.shape != (len(self.center),) or not np.linalg.norm(a) > 0:
                raise DomainError("axis must be a nonzero vector of the ambient dimension")
            object.__setattr__(self, "axis", tuple(a / np.linalg.norm(a)))
        if not (0 <= self.r_lo <= self.r_hi):
            raise DomainError("need 0 <= r_lo <= r_hi")

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def is_full(self) -> bool:
        return self.axis is None or self.cos_min <= -1.0

    @property
    def is_null(self) -> bool:
        return self.r_lo == self.r_hi or self.cos_min > 1.0

    def contains(self, x) -> np.ndarray:
        pts = as_points(x, self.d)
        rel = pts - np.asarray(self.center)
        r = np.linalg.norm(rel, axis=1)
        inside = (r >= self.r_lo) & (r <= self.r_hi) & (not self.is_null)
        if not self.is_full:
            with np.errstate(invalid="ignore", divide="ignore"):
                cosang = rel @ np.asarray(self.axis) / r
            inside &= np.where(r > 0, cosang >= self.cos_min, self.cos_min <= -1.0)
        return inside

    def disjoint_from(self, ball: Ball) -> bool:
        """Sufficient test: the sector's radial range clears the ball."""
        gap = np.linalg.norm(np.asarray(self.center) - np.asarray(ball.center))
        return self.is_null or self.r_lo >= ball.radius + gap

    def intervals_1d(self) -> list[tuple[float, float]]:
        """The sector as closed intervals of the real line (``d = 1`` only)."""
        if self.d != 1:
            raise DomainError("intervals_1d needs d = 1")
        if self.is_null:
            return []
        c = self.center[0]
        out = []
        for sign in (-1.0, 1.0):
            if self.is_full or sign * self.axis[0] >= self.cos_min:
                lo, hi = c + sign * self.r_lo, c + sign * self.r_hi
                out.append((min(lo, hi), max(lo, hi)))
        if len(out) == 2 and self.r_lo == 0:
            out = [(c - self.r_hi, c + self.r_hi)]
        return out

    def to_dict(self) -> dict:
        return {"center": list(self.center), "r_lo": self.r_lo, "r_hi": self.r_hi,
                "axis": list(self.axis) if self.axis else None, "cos_min": self.cos_min}


@dataclass(frozen=True)
class SetUnion:
    """Finite union of annular sectors (overlaps allowed)."""

    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains(self, x) -> np.ndarray:
        if not self.parts:
            return np.zeros(len(np.atleast_1d(x)), dtype=bool)
        out = self.parts[0].contains(x)
        for p in self.parts[1:]:
            out = out | p.contains(x)
        return out

    def to_dict(self) -> dict:
        return {"union": [p.to_dict() for p in self.parts]}


def sphere_fraction(d: int, rho, u, a: float, b: float) -> np.ndarray:
    """Fraction of directions ``theta`` with ``a <= |y + u theta| <= b`` where ``|y| = rho``."""
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 2.0 * rho * u
        zlo = np.clip((a * a - rho * rho - u * u) / denom, -1.0, 1.0)
        zhi = np.clip((b * b - rho * rho - u * u) / denom, -1.0, 1.0)
    if d == 3:
        frac = 0.5 * (zhi - zlo)
    elif d == 2:
        frac = (np.arccos(zlo) - np.arccos(zhi)) / math.pi
    else:
        raise DomainError("sphere_fraction is for d = 2 or 3")
    at_center = (a <= u) & (u <= b)
    return np.where(denom > 0, frac, at_center.astype(float))
