"""
Classical void-filling baselines: inverse distance weighting, thin-plate
spline and guide-free harmonic diffusion.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve as dense_solve
from scipy.ndimage import distance_transform_edt
from scipy.spatial import cKDTree

from .errors import DegenerateGeometry, NoKnownCells
from .raster import Grid, VoidMask, _check_shape
from .solver import SolveConfig, fill

_EVAL_CHUNK = 4096


def _split(dsm: Grid, mask: VoidMask | None) -> np.ndarray:
    void = dsm.nodata
    if mask is not None:
        _check_shape(dsm.shape, mask.shape)
        void = void | mask.bits
    if void.all():
        raise NoKnownCells("no known cells to interpolate from")
    return void


def _constant_fill(dsm: Grid, void: np.ndarray) -> Grid | None:
    """Exact fill for constant known data, which interpolation would round."""
    kv = dsm.values[~void]
    if kv.min() != kv.max():
        return None
    out = dsm.values.copy()
    out[void] = kv[0]
    return dsm.with_values(out)


def idw_fill(dsm: Grid, mask: VoidMask | None = None, power: float = 2.0, k: int = 16) -> Grid:
    """Inverse distance weighting over the ``k`` nearest known pixels.

    Neighbours are exact Euclidean nearest neighbours in pixel units; equal
    distances are broken by row-major index of the known pixel.
    """
    if not power > 0:
        raise ValueError("power must be positive")
    if k < 1:
        raise ValueError("k must be at least 1")
    void = _split(dsm, mask)
    out = dsm.values.copy()
    if not void.any():
        return dsm.with_values(out)
    flat = _constant_fill(dsm, void)
    if flat is not None:
        return flat

    known_rc = np.argwhere(~void)  # row-major order == tie-break order
    z = dsm.values[~void]
    void_rc = np.argwhere(void)
    n_known = len(known_rc)
    k = min(k, n_known)
    kq = min(n_known, k + 8)

    tree = cKDTree(known_rc.astype(np.float64))
    _, idx = tree.query(void_rc.astype(np.float64), k=kq)
    idx = np.asarray(idx).reshape(len(void_rc), kq)

    diff = known_rc[idx] - void_rc[:, None, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    order = np.lexsort((idx, d2), axis=1)
    idx = np.take_along_axis(idx, order, axis=1)
    d2 = np.take_along_axis(d2, order, axis=1)

    # a tie at the k-th distance may continue past the retrieved candidates
    if kq < n_known:
        ambiguous = np.nonzero(d2[:, k - 1] == d2[:, kq - 1])[0]
        for q in ambiguous:
            cand = np.asarray(tree.query_ball_point(void_rc[q], np.sqrt(d2[q, k - 1]) + 1e-6))
            dd = known_rc[cand] - void_rc[q]
            dd2 = np.einsum("ij,ij->i", dd, dd)
            o = np.lexsort((cand, dd2))[:k]
            idx[q, :k] = cand[o]
            d2[q, :k] = dd2[o]

    idx, d2 = idx[:, :k], d2[:, :k].astype(np.float64)
    wts = d2 ** (-0.5 * power)
    out[void] = np.sum(wts * z[idx], axis=1) / np.sum(wts, axis=1)
    return dsm.with_values(out)


def farthest_point_sample(points: np.ndarray, m: int) -> np.ndarray:
    """Indices of ``m`` points chosen greedily by max-min distance, starting at index 0."""
    n = len(points)
    m = min(m, n)
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = 0
    d = np.sum((points - points[0]) ** 2, axis=1)
    for t in range(1, m):
        i = int(np.argmax(d))
        chosen[t] = i
        d = np.minimum(d, np.sum((points - points[i]) ** 2, axis=1))
    return chosen


def tps_kernel(r2: np.ndarray) -> np.ndarray:
    """``r^2 log r`` evaluated from squared distances, zero at the origin."""
    out = np.zeros_like(r2, dtype=np.float64)
    pos = r2 > 0
    out[pos] = 0.5 * r2[pos] * np.log(r2[pos])
    return out


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def _affine_rank(pts: np.ndarray) -> int:
    return int(np.linalg.matrix_rank(np.c_[np.ones(len(pts)), pts]))


class ThinPlateSpline:
    """``z = a0 + a1 x + a2 y + sum c_i phi(|p - p_i|)`` with ``phi(r) = r^2 log r``."""

    def __init__(self, points: np.ndarray, values: np.ndarray, reg: float = 0.0):
        points = np.asarray(points, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        n = len(points)
        if n < 3 or _affine_rank(points) < 3:
            raise DegenerateGeometry("thin-plate spline needs three non-collinear samples")
        K = tps_kernel(_sqdist(points, points))
        K[np.diag_indices(n)] += reg
        P = np.c_[np.ones(n), points]
        A = np.zeros((n + 3, n + 3))
        A[:n, :n] = K
        A[:n, n:] = P
        A[n:, :n] = P.T
        rhs = np.zeros(n + 3)
        rhs[:n] = values
        sol = dense_solve(A, rhs, assume_a="sym")
        self.points = points
        self.weights = sol[:n]
        self.affine = sol[n:]

    def __call__(self, query: np.ndarray) -> np.ndarray:
        query = np.asarray(query, dtype=np.float64)
        out = np.empty(len(query))
        for s in range(0, len(query), _EVAL_CHUNK):
            q = query[s : s + _EVAL_CHUNK]
            out[s : s + _EVAL_CHUNK] = (
                self.affine[0] + q @ self.affine[1:] + tps_kernel(_sqdist(q, self.points)) @ self.weights
            )
        return out


def spline_fill(
    dsm: Grid,
    mask: VoidMask | None = None,
    max_samples: int = 800,
    ring: float = 16.0,
    reg: float | None = None,
) -> Grid:
    """Thin-plate spline through known pixels near the voids.

    Samples come from the known pixels within ``ring`` pixels of a void
    (all known pixels when fewer than three qualify), thinned to
    ``max_samples`` by farthest-point sampling. ``reg`` is added to the
    kernel diagonal, default ``1e-8 * max_samples``.
    """
    if max_samples < 3:
        raise ValueError("max_samples must be at least 3")
    reg = 1e-8 * max_samples if reg is None else reg
    void = _split(dsm, mask)
    out = dsm.values.copy()
    if not void.any():
        return dsm.with_values(out)
    flat = _constant_fill(dsm, void)
    if flat is not None:
        return flat

    known = ~void
    near = known & (distance_transform_edt(known) <= ring)
    if np.count_nonzero(near) < 3:
        near = known
    cand = np.argwhere(near).astype(np.float64)
    pts = cand[farthest_point_sample(cand, max_samples)]
    if _affine_rank(pts) < 3:
        everything = np.argwhere(known).astype(np.float64)
        if _affine_rank(everything) < 3:
            raise DegenerateGeometry("known pixels are collinear")
        # add the known pixel farthest from the sample line
        centred = pts - pts.mean(axis=0)
        direction = np.linalg.svd(centred, full_matrices=False)[2][0]
        offs = everything - pts.mean(axis=0)
        dist = np.abs(offs @ np.array([-direction[1], direction[0]]))
        pts = np.vstack([pts, everything[int(np.argmax(dist))]])

    rows, cols = pts[:, 0].astype(int), pts[:, 1].astype(int)
    scale = float(max(dsm.shape))
    # (x, y) = (col, row) in units of the raster extent for conditioning
    xy = np.c_[cols, rows] / scale
    tps = ThinPlateSpline(xy, dsm.values[rows, cols], reg=reg)
    vrc = np.argwhere(void)
    out[void] = tps(np.c_[vrc[:, 1], vrc[:, 0]] / scale)
    return dsm.with_values(out)


def harmonic_fill(dsm: Grid, mask: VoidMask | None = None, cfg: SolveConfig | None = None) -> Grid:
    """Guide-free diffusion: identity tensor, median initialization."""
    return fill(dsm, mask, guide=None, init_mode="median", cfg=cfg).filled
