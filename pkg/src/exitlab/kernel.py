"""Isotropic jump kernels ``K(x, h) = k(|h|)`` with ``k(u) = u**-d l(u)``.

The kernel is exact (not merely bounded by the two-sided ``c0`` sandwich):
``levy`` mode uses ``k`` itself, ``perturbed`` mode multiplies it by a
bounded state-dependent factor with values in ``[1/c0, c0]``.

Beyond ``R0`` there are either no jumps (``truncate``) or an exponentially
damped continuation of the radial density (``exponential``)::

    kappa_d u**(d-1) k(u) = kappa_d l(R0-) / R0 * exp(-lam (u - R0)),   u > R0.

Radial quantities below are "per unit solid angle": the jump intensity of
``{u1 < |h| < u2}`` is ``kappa_d * radial_mass(u1, u2)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .profiles import DomainError, ScalingProfile, StableProfile
from .quadrature import QuadratureError, integrate_segments

__all__ = [
    "KAPPA",
    "kappa_d",
    "KernelSpec",
    "AnnulusSpec",
    "RadialSampler",
    "eval_k",
    "check_K0",
    "jump_rate_above",
    "sample_jump",
    "annulus_mu_mass",
    "small_jump_variance",
]

KAPPA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}
TABLE_KNOTS = 4096
_TABLE_DEPTH = 1e-12  # infinite R0: the table reaches S = L(u)/L(eps) = this value


def kappa_d(d: int) -> float:
    """Surface measure of the unit sphere in ``R^d`` (counting measure for ``d = 1``)."""
    try:
        return KAPPA[d]
    except KeyError:
        raise DomainError(f"dimension must be 1, 2 or 3, got {d}") from None


@dataclass(frozen=True)
class KernelSpec:
    """Jump kernel of an isotropic pure-jump process on ``R^d``.

    ``tail_rate`` is the decay rate ``lam`` of the exponential tail and is
    ignored under ``tail_policy="truncate"``. ``omega`` sets the spatial
    frequency of the experimental perturbation
    ``kappa(x) = c0 ** sin(omega * x_1)``.
    """

    d: int
    profile: ScalingProfile
    c0: float = 1.1
    K0: float = 2.0
    mode: str = "levy"
    tail_policy: str = "truncate"
    tail_rate: float = 1.0
    epsilon_default: float | None = None
    omega: float = 1.0

    def __post_init__(self):
        kappa_d(self.d)
        if not (self.c0 >= 1):
            raise DomainError("c0 must be at least 1")
        if not (self.K0 > 0):
            raise DomainError("K0 must be positive")
        if self.mode not in ("levy", "perturbed"):
            raise DomainError(f"unknown kernel mode {self.mode!r}")
        if self.tail_policy not in ("truncate", "exponential"):
            raise DomainError(f"unknown tail policy {self.tail_policy!r}")
        if self.tail_policy == "exponential":
            if math.isinf(self.profile.R0):
                raise DomainError("an exponential tail needs a finite R0")
            if not self.tail_rate > 0:
                raise DomainError("tail_rate must be positive")

    @property
    def kappa(self) -> float:
        return kappa_d(self.d)

    @property
    def has_tail(self) -> bool:
        return self.tail_policy == "exponential"

    def _l_edge(self) -> float:
        """``l(R0-)``, the density level continued by the exponential tail."""
        return float(np.exp(self.profile.log_l(math.log(self.profile.R0))))

    def k(self, u):
        """Reference kernel ``k(u)`` for ``0 < u < R0`` (tail beyond ``R0`` if enabled)."""
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        if np.any(~(u > 0)):
            raise DomainError("u must be positive")
        out = np.zeros_like(u)
        inside = u < self.profile.R0
        if not self.has_tail and not np.all(inside):
            raise DomainError(f"u must lie in (0, R0={self.profile.R0})")
        out[inside] = u[inside] ** -self.d * self.profile.l(u[inside])
        if self.has_tail:
            R0 = self.profile.R0
            t = u[~inside]
            out[~inside] = self._l_edge() / R0 * np.exp(-self.tail_rate * (t - R0)) * t ** (1 - self.d)
        return float(out[0]) if scalar else out

    def tail_mass(self, lo: float | np.ndarray = None):
        """``int_{max(lo, R0)}^inf`` of the tail density per unit solid angle."""
        if not self.has_tail:
            return 0.0 if lo is None or np.ndim(lo) == 0 else np.zeros(np.shape(lo))
        R0 = self.profile.R0
        lead = self._l_edge() / (R0 * self.tail_rate)
        if lo is None:
            return lead
        start = np.maximum(np.asarray(lo, dtype=float), R0)
        return lead * np.exp(-self.tail_rate * (start - R0))

    def radial_mass(self, u1, u2):
        """``int_{u1}^{u2} u**-1 l(u) du`` including the tail; ``u2`` may be ``inf``."""
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        body = self.profile.L_ext(u1) - self.profile.L_ext(np.minimum(u2, self.profile.R0))
        if self.has_tail:
            body = body + self.tail_mass(u1) - self.tail_mass(u2)
        return body

    def kappa_at(self, x):
        """State-dependent factor of the kernel (1 in ``levy`` mode)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.mode == "levy":
            return np.ones(x.shape[0])
        return self.c0 ** np.sin(self.omega * x[:, 0])

    def default_epsilon(self, radius: float) -> float:
        return self.epsilon_default if self.epsilon_default else 1e-3 * radius


@dataclass(frozen=True)
class AnnulusSpec:
    """The shell ``{r_inner <= |y - center| < r_outer}``."""

    center: tuple
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not (0 < self.r_inner < self.r_outer):
            raise DomainError("need 0 < r_inner < r_outer")


def eval_k(spec: KernelSpec, u):
    """``k(u) = u**-d l(u)``."""
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)) or np.any(~(u < spec.profile.R0)):
        raise DomainError(f"u must lie in (0, R0={spec.profile.R0})")
    out = u ** -spec.d * spec.profile.l(u)
    return float(out) if np.ndim(out) == 0 else out


def check_K0(spec: KernelSpec) -> tuple[float, bool, str]:
    """``kappa_d int_0^inf (1 ^ u**2) u**-1 l(u) du`` (times ``c0`` if perturbed) against ``K0``.

    Returns ``(value, verdict, message)``; a divergent integral gives
    ``(inf, False, diagnostics)``.
    """
    p = spec.profile
    top = math.log(p.R0) if math.isfinite(p.R0) else math.inf
    split = min(0.0, top)

    def f(v):
        return np.exp(p.log_l(v) + 2.0 * np.minimum(v, 0.0))

    edges = [-math.inf, split] + ([top] if top > split else [])
    try:
        vals, _ = integrate_segments(f, edges, rtol=1e-10, log_scale=False)
    except QuadratureError as exc:
        return math.inf, False, f"divergent integral: {exc}"
    total = float(np.sum(vals))
    if spec.has_tail:
        R0, lam = p.R0, spec.tail_rate

        def g(u):
            return np.minimum(u * u, 1.0) * np.exp(-lam * (u - R0))

        tail, _ = integrate_segments(g, [R0, max(R0, 1.0), math.inf], rtol=1e-10, log_scale=False)
        total += spec._l_edge() / R0 * float(np.sum(tail))
    value = spec.kappa * total
    if spec.mode == "perturbed":
        value *= spec.c0
    ok = value <= spec.K0
    return value, ok, f"value {value:.6g} {'<=' if ok else '>'} K0={spec.K0}"


def jump_rate_above(spec: KernelSpec, eps: float) -> float:
    """Total intensity of jumps longer than ``eps`` (``levy`` mode)."""
    if not (0 < eps < spec.profile.R0):
        raise DomainError(f"eps must lie in (0, R0={spec.profile.R0})")
    return spec.kappa * (spec.profile.L(eps) + spec.tail_mass())


def small_jump_variance(spec: KernelSpec, eps: float) -> float:
    """``int_{|h| < eps} |h|**2 k(|h|) dh = kappa_d int_0^eps u l(u) du``."""
    if not (0 < eps < spec.profile.R0):
        raise DomainError(f"eps must lie in (0, R0={spec.profile.R0})")
    value = spec.kappa * spec.profile.second_moment(eps)
    if not math.isfinite(value):
        raise QuadratureError("small-jump second moment diverges: the profile violates (K)")
    return value


def annulus_mu_mass(spec: KernelSpec, ann: AnnulusSpec) -> tuple[float, float]:
    """``kappa_d ln(L(r)/L(s))`` and, independently, ``kappa_d int_r^s l(u) / (u L(u)) du``.

    The second route integrates ``l / L`` numerically with ``L`` itself
    obtained by (nested) quadrature or closed form.
    """
    p = spec.profile
    r, s = ann.r_inner, ann.r_outer
    if not s < p.R0:
        raise DomainError("the annulus must lie inside (0, R0)")
    closed = spec.kappa * math.log(p.L(r) / p.L(s))

    def f(v):
        return np.exp(p.log_l(v)) / p.L(np.exp(v))

    vals, _ = integrate_segments(f, np.linspace(math.log(r), math.log(s), 9), rtol=1e-11,
                                 log_scale=False)
    return closed, spec.kappa * float(np.sum(vals))


# -- jump sampling -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialSampler:
    """Inverse-CDF sampler for jump lengths above ``eps``, packed for the path engine.

    The length law has density ``proportional to u**-1 l(u)`` on ``(eps, R0)``,
    i.e. survival ``S(u) = L(u) / L(eps)``, mixed with the exponential tail
    with probability ``p_tail``. ``kind`` is 0 for the closed-form stable
    inverse and 1 for the tabulated inverse.
    """

    eps: float
    rate: float
    kind: int
    params: np.ndarray
    log_u: np.ndarray
    log_S: np.ndarray
    p_tail: float
    R0: float
    tail_rate: float
    extra: dict = field(default_factory=dict)

    def radius(self, U):
        """Map uniforms to jump lengths (vectorised mirror of the engine code)."""
        from ._engine import radius_from_uniform

        U = np.asarray(U, dtype=float)
        out = np.empty_like(U)
        flat_in, flat_out = U.ravel(), out.ravel()
        for i in range(flat_in.size):
            flat_out[i] = radius_from_uniform(flat_in[i], self.kind, self.params, self.log_u,
                                              self.log_S, self.p_tail, self.R0, self.tail_rate)
        return out

    def survival(self, u):
        """Analytic ``P(|h| > u)`` for the sampled length law."""
        u = np.asarray(u, dtype=float)
        main = self.extra["main_survival"](u)
        return (1.0 - self.p_tail) * main + self.p_tail * self.extra["tail_survival"](u)


@functools.lru_cache(maxsize=64)
def radial_sampler(spec: KernelSpec, eps: float) -> RadialSampler:
    """Build (and cache) the length sampler for cutoff ``eps``."""
    p = spec.profile
    if not (0 < eps < p.R0):
        raise DomainError(f"eps must lie in (0, R0={p.R0})")
    L_eps = p.L(eps)
    tail = spec.tail_mass()
    rate = spec.kappa * (L_eps + tail)
    p_tail = tail / (L_eps + tail)
    R0 = p.R0

    def main_survival(u):
        u = np.asarray(u, dtype=float)
        out = np.ones_like(u)
        above = u > eps
        out[above] = p.L_ext(u[above]) / L_eps
        return out

    def tail_survival(u):
        u = np.asarray(u, dtype=float)
        if not spec.has_tail:
            return np.zeros_like(u)
        return np.exp(-spec.tail_rate * (np.maximum(u, R0) - R0))

    extra = {"main_survival": main_survival, "tail_survival": tail_survival}
    if isinstance(p, StableProfile):
        tail_term = 0.0 if math.isinf(R0) else R0 ** -p.alpha
        params = np.array([p.alpha, tail_term, L_eps])
        return RadialSampler(eps, rate, 0, params, np.zeros(1), np.zeros(1), p_tail,
                             R0 if math.isfinite(R0) else np.inf, spec.tail_rate, extra)

    # tabulated inverse: knots uniform in ln u, log S decreasing
    if math.isfinite(R0):
        top = R0 * (eps / R0) ** (1.0 / TABLE_KNOTS)
    else:
        top = p.invert_L(L_eps * _TABLE_DEPTH)
    log_u = np.linspace(math.log(eps), math.log(top), TABLE_KNOTS)
    S = p.L(np.exp(log_u)) / L_eps
    S[0] = 1.0
    log_S = np.log(S)
    if np.any(np.diff(log_S) >= 0):
        raise QuadratureError("tabulated survival function is not strictly decreasing")
    slope = (log_S[-2] - log_S[-1]) / (log_u[-1] - log_u[-2])
    params = np.array([slope])
    return RadialSampler(eps, rate, 1, params, log_u, log_S, p_tail,
                         R0 if math.isfinite(R0) else np.inf, spec.tail_rate, extra)


def sample_jump(spec: KernelSpec, eps: float, stream, n: int = 1, path_index: int = 0) -> np.ndarray:
    """``n`` jump vectors with ``|h| > eps`` from the kernel restricted to long jumps.

    ``stream`` is a :class:`exitlab.rng.Stream`; draw ``j`` uses counter
    ``(path_index, j, 0, 0)`` exactly as the path engine does.
    """
    from ._engine import direction_from_uniforms
    from .rng import uniform_block

    sampler = radial_sampler(spec, eps)
    U = uniform_block(stream, path_index, n)
    radii = sampler.radius(U[:, 1])
    out = np.empty((n, spec.d))
    for j in range(n):
        direction_from_uniforms(U[j, 2], U[j, 3], spec.d, out[j])
    return radii[:, None] * out
