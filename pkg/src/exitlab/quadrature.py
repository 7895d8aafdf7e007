"""Adaptive Gauss-Kronrod quadrature for the radial integrals of a scaling profile.

The integrands met here (``u**-1 * l(u)``, ``u * l(u)`` and friends) are
power-law-like over many decades, so integration runs in the logarithmic
variable ``v = ln u`` by default; infinite ends of the ``v`` interval are
mapped onto a finite one with ``v = v0 +/- s / (1 - s)``.

Many segments can be integrated at once (:func:`integrate_segments`); each
segment converges against its own relative tolerance. This is what makes
``L`` cheap to evaluate on a whole grid of radii.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

__all__ = ["QuadResult", "QuadratureError", "integrate", "integrate_segments"]

# 15-point Kronrod nodes on [0, 1] (QUADPACK qk15) and the embedded 7-point Gauss rule.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full symmetric node set: 7 negative, centre, 7 positive
_NODES = np.concatenate([-_XK[:7], [0.0], _XK[6::-1]])
_WKRON = np.concatenate([_WK[:7], [_WK[7]], _WK[6::-1]])
_WGAUSS = np.zeros(15)
_WGAUSS[[1, 3, 5]] = _WG[:3]
_WGAUSS[7] = _WG[3]
_WGAUSS[[9, 11, 13]] = _WG[2::-1]

_EPS = np.finfo(float).eps
_V_MIN = math.log(np.finfo(float).smallest_subnormal) + 1.0
_V_MAX = math.log(np.finfo(float).max) - 1.0


class QuadResult(NamedTuple):
    value: float
    error: float


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach its tolerance (typically a divergent integral)."""

    def __init__(self, message: str, value: float = math.nan, error: float = math.nan,
                 n_intervals: int = 0):
        super().__init__(message)
        self.value = value
        self.error = error
        self.n_intervals = n_intervals


def _kronrod(g, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = g(x)
    k = half * (fx @ _WKRON)
    gauss = half * (fx @ _WGAUSS)
    kabs = np.abs(half) * (np.abs(fx) @ _WKRON)
    return k, np.abs(k - gauss), kabs


def _make_transform(f, log_scale):
    """Return the integrand in the integration variable, before any infinite-end map."""
    if not log_scale:
        return f

    def g(v):
        # clamp to the representable range so that far ends keep the integrand's trend
        u = np.exp(np.clip(v, _V_MIN, _V_MAX))
        return f(u) * u

    return g


def _to_var(x, log_scale):
    if not log_scale:
        return float(x)
    if x < 0:
        raise ValueError("log-scale integration needs non-negative limits")
    if x == 0:
        return -math.inf
    return math.log(x)


def integrate_segments(
    f: Callable[[np.ndarray], np.ndarray],
    edges,
    *,
    rtol: float = 1e-10,
    atol: float = 0.0,
    log_scale: bool = True,
    limit: int = 20000,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``f`` over each ``[edges[i], edges[i+1]]``.

    ``f`` must be vectorised. With ``log_scale`` the limits are lengths in
    ``[0, inf]`` and ``f`` is called on ``u = exp(v)``; integrands that
    overflow for extreme ``u`` should instead be written in ``v`` directly and
    integrated with ``log_scale=False`` over ``[ln a, ln b]``. Returns
    ``(values, error_estimates)`` per segment and raises
    :class:`QuadratureError` if any segment fails to converge.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two edges")
    g0 = _make_transform(f, log_scale)
    vs = np.array([_to_var(e, log_scale) for e in edges])
    if np.any(np.diff(vs) < 0):
        raise ValueError("edges must be non-decreasing")

    # Pieces in a canonical variable: kind 0 finite, 1 (-inf, b], 2 [a, inf).
    seg_ids, kinds, anchors, los, his = [], [], [], [], []
    for i in range(len(vs) - 1):
        a, b = vs[i], vs[i + 1]
        if a == b:
            continue
        if math.isinf(a) and math.isinf(b):
            seg_ids += [i, i]
            kinds += [1, 2]
            anchors += [0.0, 0.0]
            los += [0.0, 0.0]
            his += [1.0, 1.0]
        elif math.isinf(a):
            seg_ids.append(i); kinds.append(1); anchors.append(b); los.append(0.0); his.append(1.0)
        elif math.isinf(b):
            seg_ids.append(i); kinds.append(2); anchors.append(a); los.append(0.0); his.append(1.0)
        else:
            seg_ids.append(i); kinds.append(0); anchors.append(0.0); los.append(a); his.append(b)

    n_seg = len(vs) - 1
    values = np.zeros(n_seg)
    errors = np.zeros(n_seg)
    if not seg_ids:
        return values, errors

    seg = np.array(seg_ids)
    kind = np.array(kinds)
    anchor = np.array(anchors)
    lo = np.array(los)
    hi = np.array(his)

    def evaluate(seg, kind, anchor, lo, hi):
        def g(s):
            out = np.empty_like(s)
            k0 = kind == 0
            if np.any(k0):
                out[k0] = g0(s[k0])
            for sign, k in ((-1.0, 1), (1.0, 2)):
                m = kind == k
                if np.any(m):
                    ss = s[m]
                    w = 1.0 - ss
                    v = anchor[m][:, None] + sign * ss / w
                    out[m] = g0(v) / (w * w)
            return out

        with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
            return _kronrod(g, lo, hi)

    val, err, kabs = evaluate(seg, kind, anchor, lo, hi)
    while True:
        if not (np.all(np.isfinite(val)) and np.all(np.isfinite(err))):
            raise QuadratureError("non-finite integrand values (divergent integral?)",
                                  n_intervals=len(val))
        seg_val = np.bincount(seg, val, minlength=n_seg)
        seg_err = np.bincount(seg, err, minlength=n_seg)
        seg_abs = np.bincount(seg, kabs, minlength=n_seg)
        seg_cnt = np.bincount(seg, minlength=n_seg)
        tol = np.maximum(np.maximum(atol, rtol * np.abs(seg_val)), 50.0 * _EPS * seg_abs)
        bad = seg_err > tol
        if not np.any(bad):
            return seg_val, seg_err
        share = tol[seg] / np.maximum(seg_cnt[seg], 1)
        split = bad[seg] & (err > 0.5 * share)
        # intervals at float resolution cannot be refined further
        width_ok = np.abs(hi - lo) > 64 * _EPS * np.maximum(np.abs(lo), np.abs(hi))
        split &= width_ok
        if not np.any(split) or len(val) + int(split.sum()) > limit:
            worst = int(np.argmax(np.where(bad, seg_err / np.maximum(tol, 1e-300), 0)))
            raise QuadratureError(
                f"no convergence on segment {worst}: value={seg_val[worst]:.6g}, "
                f"error estimate={seg_err[worst]:.3g}, intervals={len(val)}",
                value=float(seg_val[worst]), error=float(seg_err[worst]), n_intervals=len(val),
            )
        mid = 0.5 * (lo[split] + hi[split])
        new_seg = np.concatenate([seg[split], seg[split]])
        new_kind = np.concatenate([kind[split], kind[split]])
        new_anchor = np.concatenate([anchor[split], anchor[split]])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        nv, ne, na = evaluate(new_seg, new_kind, new_anchor, new_lo, new_hi)
        keep = ~split
        seg = np.concatenate([seg[keep], new_seg])
        kind = np.concatenate([kind[keep], new_kind])
        anchor = np.concatenate([anchor[keep], new_anchor])
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        kabs = np.concatenate([kabs[keep], na])


def integrate(f, a: float, b: float, *, rtol: float = 1e-10, atol: float = 0.0,
              log_scale: bool = True, limit: int = 20000) -> QuadResult:
    """Integrate a vectorised ``f`` over ``[a, b]`` (``b`` may be ``inf``)."""
    if b < a:
        res = integrate(f, b, a, rtol=rtol, atol=atol, log_scale=log_scale, limit=limit)
        return QuadResult(-res.value, res.error)
    vals, errs = integrate_segments(f, [a, b], rtol=rtol, atol=atol, log_scale=log_scale,
                                    limit=limit)
    return QuadResult(float(vals[0]), float(errs[0]))
