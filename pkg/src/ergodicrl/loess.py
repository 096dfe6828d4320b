"""Robust locally weighted linear regression (LOESS).

Local linear fits with tricube weights over the ``ceil(span * n)``
nearest neighbours, optionally followed by bisquare robustness
reweighting of the residuals (Cleveland 1979).

For large samples the local fit is evaluated only at up to
``max_anchors`` abscissae spread over the data quantiles and linearly
interpolated in between, the same shortcut as the ``delta`` argument of
the classic lowess routine.  With ``n <= max_anchors`` every distinct
abscissa is an anchor and the result is the exact smoother.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["LoessFit", "loess_fit", "tricube", "bisquare"]


def tricube(d):
    d = np.clip(np.abs(d), 0.0, 1.0)
    return (1.0 - d**3) ** 3


def bisquare(e):
    e = np.clip(np.abs(e), 0.0, 1.0)
    return (1.0 - e**2) ** 2


@dataclass(frozen=True)
class LoessFit:
    x: np.ndarray
    y: np.ndarray
    span: float
    robust_iterations: int

    def __call__(self, x):
        """Piecewise-linear evaluation, constant beyond the end anchors."""
        return np.interp(x, self.x, self.y)


def _window_starts(xs, targets, q):
    """Left end of the ``q``-point window of nearest neighbours of each target.

    In one dimension the ``q`` nearest points of a sorted array are a
    contiguous run; the best run start minimises the larger of the two
    end distances, found by bisection on the crossing point.
    """
    n = xs.size
    lo = np.zeros(targets.size, dtype=np.intp)
    hi = np.full(targets.size, n - q, dtype=np.intp)
    # invariant: optimum start in [lo, hi]
    while np.any(lo < hi):
        mid = (lo + hi) // 2
        # moving right from mid is no worse while the left gap exceeds the right one
        probe = np.minimum(mid, n - q - 1)  # inactive entries may sit at n - q
        go_right = (targets - xs[probe]) > (xs[probe + q] - targets)
        active = lo < hi
        lo = np.where(active & go_right, mid + 1, lo)
        hi = np.where(active & ~go_right, mid, hi)
    return lo


def _local_fit(xs, ys, rw, targets, q):
    n = xs.size
    out = np.empty(targets.size)
    starts = _window_starts(xs, targets, q) if q < n else np.zeros(targets.size, dtype=np.intp)
    for i, (x0, s) in enumerate(zip(targets, starts)):
        xw = xs[s : s + q]
        h = max(x0 - xw[0], xw[-1] - x0)
        if h <= 0:
            w = np.ones(q)
        else:
            w = tricube((xw - x0) / h)
        w = w * rw[s : s + q]
        sw = w.sum()
        if sw <= 0:
            # every neighbour down-weighted to zero; fall back to the plain window
            w = np.ones(q)
            sw = float(q)
        yw = ys[s : s + q]
        xbar = np.dot(w, xw) / sw
        ybar = np.dot(w, yw) / sw
        dx = xw - xbar
        sxx = np.dot(w, dx * dx)
        scale = max(abs(xbar), np.max(np.abs(dx)), 1e-300)
        if sxx <= (1e-12 * scale) ** 2 * sw:
            out[i] = ybar
        else:
            out[i] = ybar + np.dot(w, dx * (yw - ybar)) / sxx * (x0 - xbar)
    return out


def loess_fit(x, y, span: float = 0.3, robust_iterations: int = 2, max_anchors: int = 400) -> LoessFit:
    """Fit a LOESS curve to the scatter ``(x, y)``.

    Parameters
    ----------
    x, y : array_like
        Sample coordinates; need not be sorted.
    span : float
        Fraction of the sample used in each local fit, in ``(0, 1]``.
    robust_iterations : int
        Number of bisquare reweighting passes after the initial fit.
    max_anchors : int
        Upper bound on the number of abscissae at which local fits are
        computed exactly.

    Returns
    -------
    LoessFit
        Anchor abscissae (sorted, distinct) and fitted ordinates.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if not (0.0 < span <= 1.0):
        raise ValueError(f"span must lie in (0, 1], got {span}")
    if robust_iterations < 0:
        raise ValueError("robust_iterations must be nonnegative")
    n = x.size
    q = max(int(math.ceil(span * n)), 2)
    if n < max(3, q):
        raise ValueError(f"need at least {max(3, q)} samples for span {span}, got {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite samples")

    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    q = min(q, n)

    ux = np.unique(xs)
    if ux.size <= max_anchors:
        anchors = ux
    else:
        idx = np.unique(np.round(np.linspace(0, n - 1, max_anchors)).astype(np.intp))
        anchors = np.unique(xs[idx])

    rw = np.ones(n)
    fit = _local_fit(xs, ys, rw, anchors, q)
    for _ in range(robust_iterations):
        resid = ys - np.interp(xs, anchors, fit)
        s = np.median(np.abs(resid))
        if s <= 0:
            break
        rw = bisquare(resid / (6.0 * s))
        fit = _local_fit(xs, ys, rw, anchors, q)
    if not np.all(np.isfinite(fit)):
        raise FloatingPointError("LOESS produced non-finite values")
    return LoessFit(anchors, fit, float(span), int(robust_iterations))
