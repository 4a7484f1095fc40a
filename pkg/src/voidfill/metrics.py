"""Per-pixel accuracy metrics (RMSE, NMAD, MedAE) over the void region and the full patch."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .errors import EmptyRegion, TruthHasNodata
from .raster import Grid, VoidMask, _check_shape, format_float, median

NMAD_SCALE = 1.4826

CSV_HEADER = "scene,mask,method,n_void,rmse_void,nmad_void,medae_void,rmse_full,nmad_full,medae_full"


def residuals(pred: Grid, truth: Grid, region: VoidMask) -> np.ndarray:
    """``pred - truth`` at the region pixels, row-major order."""
    _check_shape(pred.shape, truth.shape)
    _check_shape(pred.shape, region.shape)
    if np.any(truth.nodata & region.bits):
        raise TruthHasNodata("truth has nodata inside the evaluation region")
    if np.any(pred.nodata & region.bits):
        raise TruthHasNodata("prediction has nodata inside the evaluation region")
    return pred.values[region.bits] - truth.values[region.bits]


def _nonempty(e) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64).ravel()
    if e.size == 0:
        raise EmptyRegion("metric of an empty residual sequence")
    return e


def rmse(e) -> float:
    e = _nonempty(e)
    # scale first so tiny or huge residuals neither underflow nor overflow
    m = float(np.max(np.abs(e)))
    if m == 0.0:
        return 0.0
    s = e / m
    return m * math.sqrt(float(np.sum(s * s)) / e.size)


def medae(e) -> float:
    return median(np.abs(_nonempty(e)))


def nmad(e) -> float:
    e = _nonempty(e)
    return NMAD_SCALE * median(np.abs(e - median(e)))


@dataclass(frozen=True)
class MetricsReport:
    rmse_void: float
    nmad_void: float
    medae_void: float
    rmse_full: float
    nmad_full: float
    medae_full: float
    n_void: int
    n_full: int

    def to_csv_row(self, scene: str = "", mask: str = "", method: str = "") -> str:
        nums = (self.rmse_void, self.nmad_void, self.medae_void, self.rmse_full, self.nmad_full, self.medae_full)
        return ",".join([scene, mask, method, str(self.n_void)] + [format_float(x) for x in nums])

    def as_tuple(self) -> tuple:
        return astuple(self)


def evaluate(pred: Grid, truth: Grid, void: VoidMask) -> MetricsReport:
    """Metric triples over the void pixels and over every pixel of the patch."""
    ev = residuals(pred, truth, void)
    ef = residuals(pred, truth, VoidMask(np.ones(truth.shape, dtype=bool)))
    return MetricsReport(
        rmse_void=rmse(ev),
        nmad_void=nmad(ev),
        medae_void=medae(ev),
        rmse_full=rmse(ef),
        nmad_full=nmad(ef),
        medae_full=medae(ef),
        n_void=int(ev.size),
        n_full=int(ef.size),
    )
