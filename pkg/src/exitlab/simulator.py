"""Compound-Poisson simulation of exits from balls, with Dynkin and Levy-system checks.

Jumps shorter than the cutoff ``eps`` are dropped (or replaced by a
Brownian increment of matching variance); the remaining jumps arrive at
rate ``kappa_d L(eps)`` and are sampled exactly. The exit position is the
post-jump state, overshoot included.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import _engine
from .geometry import AnnularSector, Ball, as_points, sphere_fraction
from .kernel import KernelSpec, radial_sampler, small_jump_variance
from .profiles import DomainError
from .quadrature import integrate_segments
from .rng import Stream, stream_id

__all__ = [
    "SimConfig",
    "ExitSample",
    "ExitSamples",
    "TimeMeanResult",
    "ResidualReport",
    "RadialTestFunction",
    "psi",
    "simulate_exit",
    "simulate_exits",
    "estimate_exit_time_mean",
    "generator_table",
    "levy_system_table",
    "check_dynkin",
    "check_levy_system",
]

Z99 = float(stats.norm.ppf(0.995))
MAX_EVENTS = 10**8


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``epsilon=None`` means ``1e-3`` times the radius of the ball being
    exited. ``t_max=None`` means ``t_max_factor * C1 / L(radius)``, with
    ``C1`` taken from the constant ledger when the caller supplies it.
    """

    epsilon: float | None = None
    small_jump_mode: str = "drop"
    t_max: float | None = None
    t_max_factor: float = 1e3
    C1: float | None = None
    master_seed: int = 0
    n_paths: int = 10_000
    project_to_boundary: bool = False

    def __post_init__(self):
        if self.small_jump_mode not in ("drop", "gaussian-substitute"):
            raise DomainError(f"unknown small_jump_mode {self.small_jump_mode!r}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.t_max is not None and not self.t_max > 0:
            raise DomainError("t_max must be positive")
        if self.n_paths < 1:
            raise DomainError("n_paths must be at least 1")

    def eps_for(self, spec: KernelSpec, radius: float) -> float:
        return self.epsilon if self.epsilon is not None else spec.default_epsilon(radius)

    def t_max_for(self, spec: KernelSpec, radius: float) -> float:
        if self.t_max is not None:
            return self.t_max
        C1 = self.C1 if self.C1 is not None else 1.0
        return self.t_max_factor * C1 / spec.profile.L(min(radius, spec.profile.R0))


@dataclass(frozen=True)
class ExitSample:
    """A single simulated exit."""

    start: tuple
    ball: Ball
    exit_position: tuple
    exit_time: float
    n_jumps: int
    censored: bool


@dataclass(frozen=True, eq=False)
class ExitSamples:
    """A batch of exits from one ball, in path-index order."""

    ball: Ball
    starts: np.ndarray
    positions: np.ndarray
    times: np.ndarray
    n_jumps: np.ndarray
    censored: np.ndarray
    path_ids: np.ndarray
    eps: float
    seed: int
    stream: int
    integrals: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def exit_radius(self) -> np.ndarray:
        return self.ball.dist(self.positions)

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.censored)) if len(self) else 0.0

    def sample(self, i: int) -> ExitSample:
        return ExitSample(tuple(self.starts[i]), self.ball, tuple(self.positions[i]),
                          float(self.times[i]), int(self.n_jumps[i]), bool(self.censored[i]))

    def to_csv(self, path) -> None:
        """Rows ``path_index, exit_radius, exit_time, n_jumps, censored``."""
        rad = self.exit_radius
        with open(path, "w") as fh:
            fh.write("path_index,exit_radius,exit_time,n_jumps,censored\n")
            for i in range(len(self)):
                fh.write(f"{int(self.path_ids[i])},{float(rad[i])!r},{float(self.times[i])!r},"
                         f"{int(self.n_jumps[i])},{int(self.censored[i])}\n")


def _check_ball(spec: KernelSpec, ball: Ball, eps: float) -> None:
    if ball.d != spec.d:
        raise DomainError(f"ball dimension {ball.d} differs from kernel dimension {spec.d}")
    if ball.radius < eps:
        raise DomainError(f"ball radius {ball.radius} is below the cutoff {eps}")
    if eps > ball.radius / 100:
        warnings.warn(f"cutoff {eps} exceeds radius/100; the dropped small jumps bias the exit law",
                      stacklevel=3)


_EMPTY_TAB = np.zeros((0, 2))
_EMPTY_F = np.zeros(0)
_EMPTY_I = np.zeros(0, dtype=np.int64)


def simulate_exits(spec: KernelSpec, starts, ball: Ball, config: SimConfig, *,
                   path_ids=None, stream: Stream | None = None, t_stop: float | None = None,
                   tables=None, eps: float | None = None) -> ExitSamples:
    """Simulate one path per start (``starts`` of shape ``(n, d)``, or one point
    repeated ``config.n_paths`` times).

    Path ``i`` uses counter ``path_ids[i]`` (default ``i``) under ``stream``
    (default ``Stream(master_seed, stream_id("exit"))``), so two calls with the
    same ids reuse the same random numbers. ``t_stop`` replaces the safety
    horizon; paths still inside the ball at that time are flagged censored.
    ``tables`` is a list of ``(kind, lo, hi, values)`` functions tabulated on a
    uniform grid, integrated along each path up to ``tau ^ t``.
    """
    pts = as_points(starts, spec.d)
    if pts.shape[0] == 1 and path_ids is None:
        pts = np.repeat(pts, config.n_paths, axis=0)
    n = pts.shape[0]
    ids = np.arange(n, dtype=np.uint64) if path_ids is None else np.asarray(path_ids, dtype=np.uint64)
    if ids.shape != (n,):
        raise DomainError("path_ids must match the number of starts")
    eps = eps if eps is not None else config.eps_for(spec, ball.radius)
    _check_ball(spec, ball, eps)
    stream = stream if stream is not None else Stream(config.master_seed, stream_id("exit"))
    horizon = t_stop if t_stop is not None else config.t_max_for(spec, ball.radius)
    sampler = radial_sampler(spec, eps)
    gauss_sd = 0.0
    if config.small_jump_mode == "gaussian-substitute":
        gauss_sd = math.sqrt(small_jump_variance(spec, eps) / spec.d)
    thin_c0 = spec.c0 if spec.mode == "perturbed" else 1.0
    if tables:
        g_kind = np.array([t[0] for t in tables], dtype=np.int64)
        g_lo = np.array([t[1] for t in tables], dtype=float)
        g_hi = np.array([t[2] for t in tables], dtype=float)
        g_tab = np.vstack([np.asarray(t[3], dtype=float) for t in tables])
    else:
        g_kind, g_lo, g_hi, g_tab = _EMPTY_I, _EMPTY_F, _EMPTY_F, _EMPTY_TAB
    k0, k1 = stream.key
    pos, times, jumps, cens, integ = _engine.run_paths(
        np.ascontiguousarray(pts), np.asarray(ball.center, dtype=float), float(ball.radius),
        float(horizon), ids, k0, k1, float(sampler.rate),
        sampler.kind, sampler.params, sampler.log_u, sampler.log_S,
        float(sampler.p_tail), float(sampler.R0), float(sampler.tail_rate),
        gauss_sd, float(thin_c0), float(spec.omega), bool(config.project_to_boundary),
        g_kind, g_lo, g_hi, g_tab, MAX_EVENTS,
    )
    return ExitSamples(ball, pts, pos, times, jumps, cens, ids, eps, config.master_seed,
                       stream.stream, integ)


def simulate_exit(spec: KernelSpec, start, ball: Ball, config: SimConfig,
                  path_index: int = 0) -> ExitSample:
    """Exit of a single path (the one with counter ``path_index``)."""
    out = simulate_exits(spec, as_points(start, spec.d), ball, config, path_ids=[path_index])
    return out.sample(0)


# -- exit-time mean -------------------------------------------------------------

@dataclass(frozen=True)
class TimeMeanResult:
    mean: float
    ci: tuple[float, float]
    stderr: float
    n: int
    censored_fraction: float
    valid: bool
    bounds: tuple[float, float] | None = None
    bounds_ok: bool | None = None

    def to_dict(self) -> dict:
        return {"mean": self.mean, "ci": list(self.ci), "stderr": self.stderr, "n": self.n,
                "censored_fraction": self.censored_fraction, "valid": self.valid,
                "bounds": list(self.bounds) if self.bounds else None, "bounds_ok": self.bounds_ok}


def estimate_exit_time_mean(spec: KernelSpec, start, ball: Ball, config: SimConfig,
                            ledger=None, slack: float = 0.0,
                            samples: ExitSamples | None = None) -> TimeMeanResult:
    """Mean exit time with a 99% normal interval.

    With a ledger, ``bounds_ok`` says whether the interval lies inside
    ``[1/(C3 L(r)) - slack, C1/L(r) + slack]``.
    """
    s = samples if samples is not None else simulate_exits(spec, start, ball, config)
    cf = s.censored_fraction
    t = s.times
    mean = float(np.mean(t))
    se = float(np.std(t, ddof=1) / math.sqrt(len(t))) if len(t) > 1 else math.inf
    ci = (mean - Z99 * se, mean + Z99 * se)
    bounds = ok = None
    if ledger is not None:
        Lr = spec.profile.L(ball.radius)
        bounds = (1.0 / (ledger.C3 * Lr) - slack, ledger.C1 / Lr + slack)
        ok = bool(bounds[0] <= ci[0] and ci[1] <= bounds[1])
    return TimeMeanResult(mean, ci, se, len(t), cf, cf <= 0.01, bounds, ok)


# -- test functions and generator tables ------------------------------------------

def _smoothstep(t):
    """C-infinity step from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def psi(u):
    """``u**2 - 2`` on ``[-1, 1]``, blended smoothly to 0 on ``1 <= |u| <= 1.4``."""
    u = np.abs(np.asarray(u, dtype=float))
    s = _smoothstep((u - 1.0) / 0.4)
    inner = np.minimum(u, 1.4) ** 2
    return np.where(u <= 1.0, inner, (1.0 - s) * inner + 2.0 * s) - 2.0


def _bump(u):
    u = np.abs(np.asarray(u, dtype=float))
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(u < 1.0, np.exp(1.0 - 1.0 / np.maximum(1.0 - u * u, 1e-300)), 0.0)


@dataclass(frozen=True)
class RadialTestFunction:
    """``f(y) = phi(|y - x0| / scale)`` for a smooth bounded ``phi``."""

    name: str
    x0: tuple
    scale: float

    @property
    def phi(self):
        return {"psi": psi, "bump": _bump, "constant": lambda u: np.ones_like(np.asarray(u, float))}[self.name]

    def __call__(self, y) -> np.ndarray:
        pts = as_points(y, len(self.x0))
        return self.phi(np.linalg.norm(pts - np.asarray(self.x0), axis=1) / self.scale)

    def radial(self, rho):
        return self.phi(np.asarray(rho, dtype=float) / self.scale)

    def laplacian(self, rho, d: int):
        """Laplacian of ``f`` at distance ``rho`` from ``x0`` (central differences)."""
        rho = np.asarray(rho, dtype=float)
        h = 1e-4 * self.scale
        f0 = self.radial(rho)
        fp = self.radial(rho + h)
        fm = self.radial(np.abs(rho - h))
        second = (fp - 2 * f0 + fm) / h**2
        with np.errstate(divide="ignore", invalid="ignore"):
            first = (fp - fm) / (2 * h)
            lap = second + (d - 1) * np.where(rho > 10 * h, first / rho, second)
        return lap


_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _sphere_average(tf: RadialTestFunction, d: int, rho: float, u):
    """Average of ``f(y + u theta)`` over unit ``theta`` with ``|y - x0| = rho``."""
    u = np.asarray(u, dtype=float)
    if d == 1:
        return 0.5 * (tf.radial(np.abs(rho + u)) + tf.radial(np.abs(rho - u)))
    if d == 3:
        z = _GL_X
        w = 0.5 * _GL_W
    else:
        th = 0.5 * math.pi * (_GL_X + 1.0)
        z = np.cos(th)
        w = 0.5 * _GL_W
    with np.errstate(over="ignore", invalid="ignore"):
        r2 = rho * rho + u[..., None] ** 2 + 2.0 * rho * u[..., None] * z
        vals = tf.radial(np.sqrt(np.maximum(r2, 0.0)))
    vals = np.where(np.isfinite(u)[..., None], vals, tf.radial(np.inf))
    return vals @ w


def _generator_at(spec: KernelSpec, tf: RadialTestFunction, rho: float, u_lo: float,
                  u_hi: float, u_s: float) -> float:
    """``kappa_d int_{u_lo < |h| < u_hi} (f(y + h) - f(y)) k(|h|) dh`` at ``|y - x0| = rho``.

    Jumps shorter than ``u_s`` are handled by the second-order Taylor term.
    """
    p = spec.profile
    d = spec.d
    total = 0.0
    f0 = float(tf.radial(rho))
    if u_lo < u_s:
        top = min(u_s, u_hi)
        total += float(tf.laplacian(rho, d)) / (2 * d) * float(p.second_moment(top))
        u_lo = top
    if u_lo >= u_hi:
        return spec.kappa * total
    body_hi = min(u_hi, p.R0)
    if u_lo < body_hi:
        s = tf.scale
        cuts = [u_lo, body_hi]
        for b in (abs(s - rho), s + rho, abs(1.4 * s - rho), 1.4 * s + rho):
            if u_lo < b < body_hi:
                cuts.append(b)
        cuts = np.sort(np.array(cuts))

        def integrand(v):
            u = np.exp(v)
            with np.errstate(over="ignore", invalid="ignore"):
                return np.exp(p.log_l(v)) * (_sphere_average(tf, d, rho, u) - f0)

        vals, _ = integrate_segments(integrand, np.log(cuts), rtol=1e-9, atol=1e-11,
                                     log_scale=False)
        total += float(np.sum(vals))
    if spec.has_tail and u_hi > p.R0:
        R0, lam, edge = p.R0, spec.tail_rate, spec._l_edge()

        def tail(u):
            return edge / R0 * np.exp(-lam * (u - R0)) * (_sphere_average(tf, d, rho, u) - f0)

        lo = max(u_lo, R0)
        vals, _ = integrate_segments(tail, [lo, max(lo, 2 * tf.scale + rho), u_hi], rtol=1e-9,
                                     atol=1e-11, log_scale=False)
        total += float(np.sum(vals))
    return spec.kappa * total


def generator_table(spec: KernelSpec, tf: RadialTestFunction, radius: float, eps: float,
                    n: int = 401) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tabulate the full generator ``Gf`` and its small-jump part ``G_{<eps} f``
    at ``n`` distances ``rho`` in ``[0, radius]`` from ``x0``."""
    rho = np.linspace(0.0, radius, n)
    u_s = min(1e-4 * tf.scale, 0.1 * eps)
    full = np.array([_generator_at(spec, tf, r, 0.0, math.inf, u_s) for r in rho])
    small = np.array([_generator_at(spec, tf, r, 0.0, eps, u_s) for r in rho])
    return rho, full, small


def levy_system_table(spec: KernelSpec, sets, ball: Ball, n: int = 801):
    """``g_A(y) = int_A k(|z - y|) dz`` for ``y`` in the ball, tabulated for the engine.

    One dimension: exact through ``L`` on each interval, as a function of the
    coordinate. Higher dimensions: full annuli about the ball centre only,
    by a one-dimensional radial integral with the exact angular fraction.
    """
    sets = [s for s in sets if not s.is_null]
    for s in sets:
        if not s.disjoint_from(ball):
            raise DomainError("the target set must not intersect the ball")
    if spec.d == 1:
        c = ball.center[0]
        y = np.linspace(c - ball.radius, c + ball.radius, n)
        g = np.zeros(n)
        for s in sets:
            for lo, hi in s.intervals_1d():
                near = np.where(y < lo, lo - y, y - hi)
                far = np.where(y < lo, hi - y, y - lo)
                g += spec.radial_mass(near, far)
        return 1, y[0], y[-1], g
    rho = np.linspace(0.0, ball.radius, n)
    g = np.zeros(n)
    p = spec.profile
    for s in sets:
        if not s.is_full or s.center != ball.center:
            raise NotImplementedError("in d >= 2 only full annuli about the ball centre are supported")
        for i, r in enumerate(rho):
            lo, hi = s.r_lo - r, s.r_hi + r
            cuts = sorted({lo, hi, *(x for x in (s.r_lo + r, s.r_hi - r) if lo < x < hi)})

            def body(v, r=r, s=s):
                u = np.exp(v)
                dens = np.where(u < p.R0, np.exp(p.log_l(v)), 0.0)
                if spec.has_tail:
                    dens = dens + np.where(u >= p.R0, u * spec.tail_mass(u) * spec.tail_rate, 0.0)
                return dens * sphere_fraction(spec.d, r, u, s.r_lo, s.r_hi)

            vals, _ = integrate_segments(body, np.log(cuts), rtol=1e-10, atol=1e-14, log_scale=False)
            g[i] += spec.kappa * float(np.sum(vals))
    return 0, 0.0, ball.radius, g


# -- residual checks --------------------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    """``lhs - rhs`` of a path functional identity, paired per path.

    ``bias`` is the systematic part due to the cutoff, estimated on the same
    paths (``-E int G_{<eps} f`` for Dynkin, 0 for the Levy system with a
    target set farther than ``eps``).
    """

    name: str
    lhs: float
    rhs: float
    residual: float
    stderr: float
    bias: float
    eps: float
    n: int
    t: float
    within_3sigma: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("name", "lhs", "rhs", "residual", "stderr", "bias",
                                                "eps", "n", "t", "within_3sigma")} | self.details


def _summarise(name, lhs_p, rhs_p, bias_p, eps, t, details=None):
    diff = lhs_p - rhs_p
    n = len(diff)
    se = float(np.std(diff, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    res = float(np.mean(diff))
    return ResidualReport(name, float(np.mean(lhs_p)), float(np.mean(rhs_p)), res, se,
                          float(np.mean(bias_p)), eps, n, t,
                          bool(abs(res) <= 3 * se or (se == 0 and res == 0)), details or {})


def check_dynkin(spec: KernelSpec, f: str, ball: Ball, t: float, config: SimConfig,
                 start=None) -> ResidualReport:
    """Dynkin identity ``E f(X_{tau ^ t}) - f(x) = E int_0^{tau ^ t} Gf(X_u) du``.

    ``f`` is ``"psi"`` (``psi(|y - x0| / r)``), ``"bump"`` or ``"constant"``;
    the generator integral uses the full kernel, so the residual carries the
    cutoff bias reported in ``bias``.
    """
    if f not in ("psi", "bump", "constant"):
        raise DomainError(f"unknown test function {f!r}")
    start = ball.center if start is None else start
    tf = RadialTestFunction(f, ball.center, ball.radius)
    eps = config.eps_for(spec, ball.radius)
    rho, full, small = generator_table(spec, tf, ball.radius, eps)
    tables = [(0, 0.0, ball.radius, full), (0, 0.0, ball.radius, small)]
    s = simulate_exits(spec, start, ball, config, t_stop=t, tables=tables,
                       stream=Stream(config.master_seed, stream_id("dynkin", f)))
    x0 = as_points(start, spec.d)
    lhs_p = tf(s.positions) - tf(x0)[0]
    rhs_p = s.integrals[:, 0]
    bias_p = -s.integrals[:, 1]
    return _summarise(f"dynkin:{f}", lhs_p, rhs_p, bias_p, eps, t,
                      {"mean_time": float(np.mean(s.times))})


def check_levy_system(spec: KernelSpec, ball: Ball, A, t: float, config: SimConfig,
                      start=None) -> ResidualReport:
    """Levy-system identity ``P[X_{tau ^ t} in A] = E int_0^{tau ^ t} int_A k(|z - X_u|) dz du``.

    ``A`` is an :class:`AnnularSector` or a list of disjoint ones.
    """
    sets = [A] if isinstance(A, AnnularSector) else list(A)
    start = ball.center if start is None else start
    eps = config.eps_for(spec, ball.radius)
    live = [s for s in sets if not s.is_null]
    if not live:
        for s in sets:
            if not s.disjoint_from(ball):
                raise DomainError("the target set must not intersect the ball")
        return ResidualReport("levy-system", 0.0, 0.0, 0.0, 0.0, 0.0, eps, 0, t, True)
    table = levy_system_table(spec, live, ball)
    s = simulate_exits(spec, start, ball, config, t_stop=t, tables=[table],
                       stream=Stream(config.master_seed, stream_id("levy-system")))
    hit = np.zeros(len(s), dtype=bool)
    for a in live:
        hit |= a.contains(s.positions)
    hit &= ~s.censored
    near = min(a.r_lo - ball.radius for a in live)
    bias = np.zeros(len(s)) if near >= eps else np.full(len(s), np.nan)
    return _summarise("levy-system", hit.astype(float), s.integrals[:, 0], bias, eps, t)


def with_epsilon(config: SimConfig, eps: float) -> SimConfig:
    return replace(config, epsilon=eps)
