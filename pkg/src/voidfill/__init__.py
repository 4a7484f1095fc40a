"""Guided anisotropic-diffusion void filling for elevation rasters."""

from .baselines import harmonic_fill, idw_fill, spline_fill
from .coarse import PyramidConfig, median_init, pyramid_init
from .errors import (
    AllVoid,
    CountMismatch,
    DegenerateGeometry,
    DegenerateRangeWarning,
    DimensionMismatch,
    EmptyRegion,
    HasNodata,
    MalformedHeader,
    MaxvalNot255,
    MethodIncompatible,
    NoKnownCells,
    NonNumericToken,
    NotSPD,
    RasterFormatError,
    TruncatedPayload,
    TruthHasNodata,
    Unreachable,
    UnsupportedMagic,
    VoidFillError,
)
from .masks import (
    PerlinParams,
    StrokeParams,
    irregular_mask,
    mask_coverage,
    perlin_mask,
    perlin_noise,
    rect_mask,
    sample_mask_with_coverage,
)
from .metrics import MetricsReport, evaluate, medae, nmad, residuals, rmse
from .raster import Grid, GuideImage, VoidMask, load_grid, load_guide, load_mask, read_ascii_grid, write_ascii_grid
from .scenes import SceneSpec, make_scene
from .solver import FillResult, SolveConfig, StencilField, assemble_stencil, fill, solve_steady_state
from .tensor import EdgeParams, TensorField, diffusion_tensor, guide_tensor

__version__ = "0.1.0"

__all__ = [
    "AllVoid",
    "CountMismatch",
    "DegenerateGeometry",
    "DegenerateRangeWarning",
    "DimensionMismatch",
    "EdgeParams",
    "EmptyRegion",
    "FillResult",
    "Grid",
    "GuideImage",
    "HasNodata",
    "MalformedHeader",
    "MaxvalNot255",
    "MethodIncompatible",
    "MetricsReport",
    "NoKnownCells",
    "NonNumericToken",
    "NotSPD",
    "PerlinParams",
    "PyramidConfig",
    "RasterFormatError",
    "SceneSpec",
    "SolveConfig",
    "StencilField",
    "StrokeParams",
    "TensorField",
    "TruncatedPayload",
    "TruthHasNodata",
    "Unreachable",
    "UnsupportedMagic",
    "VoidFillError",
    "VoidMask",
    "assemble_stencil",
    "diffusion_tensor",
    "evaluate",
    "fill",
    "guide_tensor",
    "harmonic_fill",
    "idw_fill",
    "irregular_mask",
    "load_grid",
    "load_guide",
    "load_mask",
    "make_scene",
    "mask_coverage",
    "medae",
    "median_init",
    "nmad",
    "perlin_mask",
    "perlin_noise",
    "pyramid_init",
    "read_ascii_grid",
    "rect_mask",
    "residuals",
    "rmse",
    "sample_mask_with_coverage",
    "solve_steady_state",
    "spline_fill",
    "write_ascii_grid",
]
