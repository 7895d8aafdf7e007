"""Deterministic constant chain from the kernel constants to the Hoelder exponent.

Stage 1 turns ``(d, c0, c1, c2, c3)`` into the exit-time and overshoot
constants ``C1..C4``; stage 2 reads off the set-dichotomy and decay
constants ``(alpha, delta0, a0, C0)``; stage 3 chooses ``(delta, a, b)``,
strengthens the decay condition and returns ``beta`` and ``C`` of the
modulus ``|h(x) - h(x0)| <= C ||h|| (rho0(x) / r)**beta``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize
from scipy import stats as _st

from .kernel import kappa_d
from .profiles import DomainError, ScalingProfile

__all__ = [
    "ConstantLedger",
    "Stage1",
    "Stage2",
    "Stage3",
    "derive_stage1",
    "derive_stage2",
    "select_b",
    "strengthen_J2",
    "strengthen_J2_power",
    "run_holder_pipeline",
    "build_ledger",
    "theoretical_bound",
    "two_point_bound",
    "BetaFit",
    "fit_empirical_beta",
    "B_FRACTION",
]

B_FRACTION = 0.999  # b sits at this fraction of the way from 1 to the feasible supremum


@dataclass(frozen=True)
class Stage1:
    C1: float
    C2: float
    C3: float
    C4: float


@dataclass(frozen=True)
class Stage2:
    alpha_J1: float
    delta0: float
    alpha0_J2: float
    a0_J2: float
    C0_J2: float


@dataclass(frozen=True)
class Stage3:
    delta: float
    a: float
    b: float
    b_sup: float
    k_J2: int
    alpha_J2: float
    alpha_final: float
    beta: float
    C: float


def derive_stage1(d: int, c0: float, c1: float, c2: float, c3: float) -> Stage1:
    """``C1 = 2^d c0 c1^2 / kappa``, ``C2 = kappa c0 C4^2 + c3``,
    ``C3 = 10 kappa c0 (1 + c2) + c3``, ``C4 = 1 + c1 + c3``."""
    for name, v in (("c0", c0), ("c1", c1), ("c2", c2), ("c3", c3)):
        if not (v > 1 and math.isfinite(v)):
            raise DomainError(f"{name} must lie in (1, inf), got {v}")
    kappa = kappa_d(d)
    C4 = 1.0 + c1 + c3
    C1 = 2.0**d / kappa * c0 * c1**2
    C2 = kappa * c0 * C4**2 + c3
    C3 = 10.0 * kappa * c0 * (1.0 + c2) + c3
    return Stage1(C1, C2, C3, C4)


def derive_stage2(C1: float, C2: float, C3: float, C4: float) -> Stage2:
    """``alpha = a0 = 1/C4``, ``delta0 = 1/(3 C1 C3 C4)``, ``C0 = C1 C2``."""
    alpha = 1.0 / C4
    return Stage2(alpha, 1.0 / (3.0 * C1 * C3 * C4), alpha, alpha, C1 * C2)


def _def_ab(b: float, delta: float, a: float) -> tuple[bool, bool]:
    return (b**3 * (1 - 3 * delta) <= 1 - 2 * delta, a * b**4 < (1 - a * b) * delta)


def select_b(delta0: float) -> tuple[float, float, float]:
    """``delta = delta0/6``, ``a = delta/2`` and ``b`` in ``(1, sqrt(3/2))`` with
    ``b^3 (1 - 3 delta) <= 1 - 2 delta`` and ``a b^4 < (1 - a b) delta``.

    Both constraints are increasing in ``b``, so the feasible set is an
    interval ``(1, b*]``; the returned ``b`` is ``1 + 0.999 (b* - 1)``.
    """
    delta, a, b, _ = _select_b(delta0)
    return delta, a, b


def _select_b(delta0: float):
    if not (0 < delta0 < 1):
        raise DomainError("delta0 must lie in (0, 1)")
    delta = delta0 / 6.0
    a = delta / 2.0
    if not a < (1 - a) * delta:
        raise DomainError("a < (1 - a) delta fails")
    b_cubic = ((1 - 2 * delta) / (1 - 3 * delta)) ** (1.0 / 3.0)
    quartic = lambda b: a * b**4 + a * delta * b - delta  # noqa: E731
    b_max = math.sqrt(1.5)
    b_quart = optimize.brentq(quartic, 1.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps) \
        if quartic(2.0) > 0 else 2.0
    b_sup = min(b_cubic, b_quart, b_max)
    b = 1.0 + B_FRACTION * (b_sup - 1.0)
    ok_cubic, ok_quartic = _def_ab(b, delta, a)
    if not (ok_cubic and ok_quartic and 1 < b < b_max):
        raise ArithmeticError(f"selected b={b!r} violates its constraints")
    return delta, a, b, b_sup


def strengthen_J2_power(alpha0: float, a0: float, C0: float, target_a: float) -> int:
    """Smallest ``k >= 1`` with ``a0**k < target_a / C0``."""
    if not (0 < alpha0 < 1 and 0 <= a0 < 1 and 0 < target_a < 1):
        raise DomainError("alpha0, target_a must lie in (0, 1) and a0 in [0, 1)")
    if not C0 >= 1:
        raise DomainError("C0 must be at least 1")
    bound = target_a / C0
    if a0 == 0:
        return 1
    k = max(1, math.ceil(math.log(bound) / math.log(a0)))
    # repair the floating-point guess against the strict inequality by direct powering
    while a0**k >= bound:
        k += 1
    while k > 1 and a0 ** (k - 1) < bound:
        k -= 1
    return k


def strengthen_J2(alpha0: float, a0: float, C0: float, target_a: float) -> float:
    """``alpha0**k`` for the smallest ``k`` with ``a0**k < target_a / C0``."""
    return alpha0 ** strengthen_J2_power(alpha0, a0, C0, target_a)


def run_holder_pipeline(J1: tuple[float, float], J2: tuple[float, float, float]) -> Stage3:
    """Stage 3 from ``J1 = (alpha1, delta0)`` and ``J2 = (alpha0, a0, C0)``."""
    alpha1, delta0 = J1
    alpha0, a0, C0 = J2
    if not (0 < alpha1 < 1):
        raise DomainError("alpha1 must lie in (0, 1)")
    delta, a, b, b_sup = _select_b(delta0)
    k = strengthen_J2_power(alpha0, a0, C0, a)
    alpha_J2 = alpha0**k
    alpha = min(alpha1, alpha_J2)
    beta = math.log(b) / math.log(1.0 / alpha)
    if not 0 < beta < 1:
        raise ArithmeticError(f"beta={beta} outside (0, 1)")
    return Stage3(delta, a, b, b_sup, k, alpha_J2, alpha, beta, 3.0 * alpha**-beta)


@dataclass(frozen=True)
class ConstantLedger:
    """Every constant of the chain, inputs included."""

    d: int
    kappa: float
    c0: float
    c1: float
    c2: float
    c3: float
    K0: float
    C1: float
    C2: float
    C3: float
    C4: float
    alpha_J1: float
    delta0: float
    alpha0_J2: float
    a0_J2: float
    C0_J2: float
    delta: float
    a: float
    b: float
    b_sup: float
    k_J2: int
    alpha_J2: float
    alpha_final: float
    beta: float
    C: float

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        """The chain as an aligned two-column text table."""
        groups = [
            ("inputs", ("d", "kappa", "c0", "c1", "c2", "c3", "K0")),
            ("stage 1", ("C1", "C2", "C3", "C4")),
            ("stage 2", ("alpha_J1", "delta0", "alpha0_J2", "a0_J2", "C0_J2")),
            ("stage 3", ("delta", "a", "b", "b_sup", "k_J2", "alpha_J2", "alpha_final", "beta", "C")),
        ]
        lines = []
        for title, names in groups:
            lines.append(f"[{title}]")
            for n in names:
                v = getattr(self, n)
                lines.append(f"  {n:<12} {v!r}" if isinstance(v, int) else f"  {n:<12} {v:.12g}")
        return "\n".join(lines)


def build_ledger(d: int, c0: float, c1: float, c2: float, c3: float, K0: float) -> ConstantLedger:
    """Run all three stages on the kernel constants."""
    if not (K0 > 1 and math.isfinite(K0)):
        raise DomainError("K0 must lie in (1, inf)")
    s1 = derive_stage1(d, c0, c1, c2, c3)
    s2 = derive_stage2(s1.C1, s1.C2, s1.C3, s1.C4)
    s3 = run_holder_pipeline((s2.alpha_J1, s2.delta0), (s2.alpha0_J2, s2.a0_J2, s2.C0_J2))
    return ConstantLedger(d, kappa_d(d), c0, c1, c2, c3, K0, **asdict(s1), **asdict(s2), **asdict(s3))


# -- bounds ------------------------------------------------------------------------

def theoretical_bound(profile: ScalingProfile, ledger, x, x0, r: float, M: float) -> float:
    """``C M (L(|x - x0|) / L(r))**-beta``; zero at ``x = x0``."""
    dist = float(np.linalg.norm(np.atleast_1d(np.asarray(x, float) - np.asarray(x0, float))))
    if not (dist < r < profile.R):
        raise DomainError("need |x - x0| < r < R")
    if dist == 0:
        return 0.0
    return ledger.C * M * (profile.L(dist) / profile.L(r)) ** -ledger.beta


def two_point_bound(profile: ScalingProfile, ledger, c1: float, x, y, r: float, M: float,
                    x0=None) -> float:
    """``c1 C M L(r)**beta L(|x - y|)**-beta`` for ``x, y`` within ``r/3`` of ``x0``."""
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    x0 = np.zeros_like(x) if x0 is None else np.atleast_1d(np.asarray(x0, float))
    if np.linalg.norm(x - x0) >= r / 3 or np.linalg.norm(y - x0) >= r / 3:
        raise DomainError("both points must lie in the ball of radius r/3")
    dist = float(np.linalg.norm(x - y))
    if dist == 0:
        return 0.0
    return c1 * ledger.C * M * profile.L(r) ** ledger.beta * profile.L(dist) ** -ledger.beta


# -- empirical exponent ---------------------------------------------------------------

@dataclass(frozen=True)
class BetaFit:
    available: bool
    beta: float = math.nan
    intercept: float = math.nan
    stderr: float = math.nan
    n_used: int = 0
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def fit_empirical_beta(points, floor=0.0) -> BetaFit:
    """Least-squares slope of ``ln|dh|`` against ``ln rho0`` over the points above ``floor``.

    ``points`` is a sequence of ``(rho0, |dh|)``; ``floor`` a scalar or one
    noise level per point. At least five points must clear the floor.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    floor = np.broadcast_to(np.asarray(floor, dtype=float), (pts.shape[0],))
    keep = (pts[:, 1] > floor) & (pts[:, 1] > 0) & (pts[:, 0] > 0)
    n = int(keep.sum())
    if n < 5:
        return BetaFit(False, n_used=n, reason=f"only {n} points above the noise floor (need 5)")
    x = np.log(pts[keep, 0])
    y = np.log(pts[keep, 1])
    res = _st.linregress(x, y)
    return BetaFit(True, float(res.slope), float(res.intercept), float(res.stderr), n)
