"""Monotonicity-preserving piecewise cubic Hermite interpolation.

Slopes follow the Fritsch-Carlson construction: interior knots take the
weighted harmonic mean of adjacent secants (zero across local extrema),
endpoints use the non-centered three-point formula with the monotonicity
clamp. Knot values are reproduced exactly and monotone data stays monotone.
"""

from __future__ import annotations

import numpy as np

__all__ = ["pchip_slopes", "pchip_eval", "resample_grid"]


def pchip_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Derivative at each knot for a monotone cubic Hermite interpolant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"x and y must be equal-length 1-d arrays, got {x.shape} vs {y.shape}")
    n = x.size
    if n < 2:
        raise ValueError("need at least two knots")
    h = np.diff(x)
    if (h <= 0).any():
        raise ValueError("knot abscissae must be strictly increasing")
    delta = np.diff(y) / h
    if n == 2:
        return np.array([delta[0], delta[0]])

    d = np.zeros(n)
    # interior: harmonic mean weighted by interval lengths, zero at extrema
    d0, d1 = delta[:-1], delta[1:]
    h0, h1 = h[:-1], h[1:]
    same_sign = (np.sign(d0) * np.sign(d1)) > 0
    w1 = 2.0 * h1 + h0
    w2 = h1 + 2.0 * h0
    with np.errstate(divide="ignore", invalid="ignore"):
        harm = (w1 + w2) / (w1 / d0 + w2 / d1)
    d[1:-1] = np.where(same_sign, harm, 0.0)

    d[0] = _edge_slope(h[0], h[1], delta[0], delta[1])
    d[-1] = _edge_slope(h[-1], h[-2], delta[-1], delta[-2])
    return d


def _edge_slope(h0: float, h1: float, d0: float, d1: float) -> float:
    # three-point estimate, clamped into the monotone region
    d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if np.sign(d) != np.sign(d0):
        return 0.0
    if np.sign(d0) != np.sign(d1) and abs(d) > 3.0 * abs(d0):
        return 3.0 * d0
    return d


def pchip_eval(x: np.ndarray, y: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """Evaluate the monotone interpolant through (x, y) at query points xq.

    Queries must lie within [x[0], x[-1]]; no extrapolation.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xq = np.asarray(xq, dtype=np.float64)
    if xq.size and (xq.min() < x[0] or xq.max() > x[-1]):
        raise ValueError(
            f"query range [{xq.min()}, {xq.max()}] outside knot span [{x[0]}, {x[-1]}]"
        )
    d = pchip_slopes(x, y)
    i = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, x.size - 2)
    h = x[i + 1] - x[i]
    t = (xq - x[i]) / h
    t2 = t * t
    t3 = t2 * t
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + t
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    return h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1]


def resample_grid(t_first: float, t_last: float, dt: float, origin: float | None = None) -> np.ndarray:
    """Uniform dt grid covering [t_first, t_last].

    With `origin=None` the grid starts at t_first. Otherwise grid points are
    origin + k*dt, so tracks resampled with a shared origin land on a common
    phase-aligned grid.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_last < t_first:
        raise ValueError("t_last precedes t_first")
    if origin is None:
        n = int(np.floor((t_last - t_first) / dt + 1e-9)) + 1
        return t_first + dt * np.arange(n)
    k0 = int(np.ceil((t_first - origin) / dt - 1e-9))
    k1 = int(np.floor((t_last - origin) / dt + 1e-9))
    if k1 < k0:
        return np.empty(0)
    return origin + dt * np.arange(k0, k1 + 1)
