"""
Coarse initial guesses for the void pixels.

``median_init`` fills every void with the median of the known cells.
``pyramid_init`` builds a known-aware 2x mean pyramid until the voids close,
then bilinearly pushes the coarse estimate back down into the void pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoKnownCells
from .raster import Grid, VoidMask, _check_shape, median


@dataclass(frozen=True)
class PyramidConfig:
    """``max_levels`` counts the full-resolution level, so 1 means median fill."""

    max_levels: int = 8

    def __post_init__(self):
        if self.max_levels < 1:
            raise ValueError("max_levels must be at least 1")


def _void_cells(dsm: Grid, mask: VoidMask) -> np.ndarray:
    _check_shape(dsm.shape, mask.shape)
    void = mask.bits | dsm.nodata
    if void.all():
        raise NoKnownCells("no known cells to initialize from")
    return void


def median_init(dsm: Grid, mask: VoidMask) -> Grid:
    void = _void_cells(dsm, mask)
    out = dsm.values.copy()
    out[void] = median(dsm.values[~void])
    return dsm.with_values(out)


def _downsample(values: np.ndarray, void: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean of the known children of each 2x2 block; void iff all children are void."""
    h, w = values.shape
    ph, pw = h + (h % 2), w + (w % 2)
    v = np.zeros((ph, pw))
    k = np.zeros((ph, pw))
    known = ~void
    v[:h, :w] = np.where(known, values, 0.0)
    k[:h, :w] = known
    sums = v[0::2, 0::2] + v[0::2, 1::2] + v[1::2, 0::2] + v[1::2, 1::2]
    counts = k[0::2, 0::2] + k[0::2, 1::2] + k[1::2, 0::2] + k[1::2, 1::2]
    coarse_void = counts == 0
    coarse = np.divide(sums, counts, out=np.zeros_like(sums), where=~coarse_void)
    return coarse, coarse_void


def _upsample_axis(a: np.ndarray, n: int, axis: int) -> np.ndarray:
    m = a.shape[axis]
    pos = np.clip((np.arange(n) + 0.5) / 2.0 - 0.5, 0.0, m - 1)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, m - 1)
    t = pos - i0
    shape = [1, 1]
    shape[axis] = n
    t = t.reshape(shape)
    return (1.0 - t) * np.take(a, i0, axis=axis) + t * np.take(a, i1, axis=axis)


def _upsample(coarse: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear 2x upsampling with pixel-centre alignment and clamped edges."""
    return _upsample_axis(_upsample_axis(coarse, shape[0], 0), shape[1], 1)


def pyramid_init(dsm: Grid, mask: VoidMask, cfg: PyramidConfig | None = None) -> Grid:
    cfg = cfg or PyramidConfig()
    void = _void_cells(dsm, mask)
    if not void.any():
        return dsm.with_values(dsm.values)

    values = [np.where(void, 0.0, dsm.values)]
    voids = [void]
    while voids[-1].any() and len(values) < cfg.max_levels:
        v, m = _downsample(values[-1], voids[-1])
        values.append(v)
        voids.append(m)

    top = values[-1].copy()
    if voids[-1].any():
        top[voids[-1]] = median(top[~voids[-1]])
    filled = top
    for v, m in zip(reversed(values[:-1]), reversed(voids[:-1])):
        filled = np.where(m, _upsample(filled, v.shape), v)

    known_vals = dsm.values[~void]
    out = dsm.values.copy()
    # clip guards against last-ulp rounding in the block means
    out[void] = np.clip(filled[void], known_vals.min(), known_vals.max())
    return dsm.with_values(out)
