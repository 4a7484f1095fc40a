"""
Edge-aware diffusion tensors computed from an optical guide image.

The pipeline is luminance -> Gaussian pre-smoothing -> central-difference
gradient -> smoothed structure tensor -> diffusion tensor. The diffusion
tensor keeps unit diffusivity along guide edges and lowers it across them
with an exponential (Perona-Malik style) response on the leading
structure-tensor eigenvalue.

Axis convention: ``x`` runs along columns (east), ``y`` along rows (south),
so ``d_yy`` governs diffusion between vertically adjacent pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from os import PathLike

import numpy as np
from scipy.ndimage import correlate1d

from .errors import HasNodata
from .raster import GuideImage, Grid, _check_shape, _readonly, save_grid

#: Below this leading eigenvalue the tensor is exactly the identity.
FLAT_EPS = 1e-12

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class EdgeParams:
    """Parameters of the guide-to-tensor mapping.

    Attributes
    ----------
    sigma_g : float
        Gaussian pre-smoothing of the luminance, pixels.
    rho : float
        Gaussian smoothing of the structure tensor channels, pixels.
    lambda_c : float
        Contrast scale in luminance-gradient units.
    alpha : float
        Diffusivity floor across edges, in (0, 1].
    """

    sigma_g: float = 1.0
    rho: float = 2.0
    lambda_c: float = 0.02
    alpha: float = 0.05

    def __post_init__(self):
        if not self.sigma_g >= 0 or not self.rho >= 0:
            raise ValueError("sigma_g and rho must be non-negative")
        if not self.lambda_c > 0:
            raise ValueError("lambda_c must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class TensorField:
    """Per-pixel symmetric 2x2 tensor ``[[dxx, dxy], [dxy, dyy]]``."""

    dxx: np.ndarray
    dxy: np.ndarray
    dyy: np.ndarray

    def __post_init__(self):
        arrays = [np.array(a, dtype=np.float64, order="C", copy=True) for a in (self.dxx, self.dxy, self.dyy)]
        if arrays[0].ndim != 2 or any(a.shape != arrays[0].shape for a in arrays):
            raise ValueError("tensor channels must be 2-D arrays of one shape")
        for name, arr in zip(("dxx", "dxy", "dyy"), arrays):
            object.__setattr__(self, name, _readonly(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.dxx.shape

    @property
    def width(self) -> int:
        return self.dxx.shape[1]

    @property
    def height(self) -> int:
        return self.dxx.shape[0]

    @classmethod
    def identity(cls, height: int, width: int) -> TensorField:
        ones = np.ones((height, width))
        return cls(ones, np.zeros((height, width)), ones)

    @classmethod
    def uniform(cls, height: int, width: int, dxx: float, dxy: float, dyy: float) -> TensorField:
        full = lambda v: np.full((height, width), float(v))  # noqa: E731
        return cls(full(dxx), full(dxy), full(dyy))

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel eigenvalues ``(larger, smaller)``."""
        return _eig2(self.dxx, self.dxy, self.dyy)[:2]

    def is_spd(self) -> bool:
        det = self.dxx * self.dyy - self.dxy**2
        return bool(np.all(self.dxx > 0) and np.all(self.dyy > 0) and np.all(det > 0))


def _eig2(a: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Closed-form eigen-decomposition of symmetric ``[[a, b], [b, c]]``.

    Returns ``(mu1, mu2, vx, vy, gap)`` with ``mu1 >= mu2``, ``(vx, vy)`` an
    unnormalized eigenvector of ``mu1`` and ``gap = mu1 - mu2``.
    """
    half_tr = 0.5 * (a + c)
    gap = 2.0 * np.hypot(0.5 * (a - c), b)
    mu1 = half_tr + 0.5 * gap
    mu2 = half_tr - 0.5 * gap
    use_first = a >= c
    vx = np.where(use_first, mu1 - c, b)
    vy = np.where(use_first, b, mu1 - a)
    return mu1, mu2, vx, vy, gap


def _no_nodata(g: Grid) -> None:
    if g.nodata.any():
        raise HasNodata("operation requires a grid without nodata cells")


def luminance(img: GuideImage) -> Grid:
    """Rec. 601 luma scaled to [0, 1]; single-channel images are scaled directly."""
    s = img.samples.astype(np.float64)
    if img.channels == 1:
        lum = s[:, :, 0] / 255.0
    else:
        r, g, b = LUMA_WEIGHTS
        lum = (r * s[:, :, 0] + g * s[:, :, 1] + b * s[:, :, 2]) / 255.0
    return Grid(lum)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled Gaussian of radius ``ceil(3 sigma)``, normalized to unit sum."""
    radius = max(1, math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    with np.errstate(over="ignore"):
        k = np.exp(-0.5 * (x / sigma) ** 2)  # a subnormal sigma degrades to a delta
    return k / k.sum()


def _smooth(arr: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0:
        return np.array(arr, dtype=np.float64, copy=True)
    k = gaussian_kernel(sigma)
    out = correlate1d(np.asarray(arr, dtype=np.float64), k, axis=1, mode="nearest")
    return correlate1d(out, k, axis=0, mode="nearest")


def gaussian_smooth(g: Grid, sigma: float) -> Grid:
    """Separable Gaussian blur with clamp-to-edge borders; ``sigma=0`` is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    _no_nodata(g)
    return g.with_values(_smooth(g.values, sigma))


def _gradient(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, w = arr.shape
    # one-sided differences on the border rows/columns, central inside
    gx = np.gradient(arr, axis=1) if w > 1 else np.zeros_like(arr)
    gy = np.gradient(arr, axis=0) if h > 1 else np.zeros_like(arr)
    return gx, gy


def gradient(g: Grid) -> tuple[Grid, Grid]:
    """Central differences with unit spacing; ``gx`` along columns, ``gy`` along rows."""
    _no_nodata(g)
    gx, gy = _gradient(g.values)
    return g.with_values(gx), g.with_values(gy)


def structure_tensor(gx: Grid, gy: Grid, rho: float) -> TensorField:
    """Outer product of the gradient, each channel smoothed with ``rho``."""
    _check_shape(gx.shape, gy.shape)
    if rho < 0:
        raise ValueError("rho must be non-negative")
    x, y = gx.values, gy.values
    return TensorField(_smooth(x * x, rho), _smooth(x * y, rho), _smooth(y * y, rho))


def diffusion_tensor(J: TensorField, p: EdgeParams) -> TensorField:
    """Map a structure tensor to an edge-enhancing diffusion tensor.

    With ``mu1 >= mu2`` the eigenvalues of ``J`` and ``v1`` the across-edge
    eigenvector, the result is ``g(mu1) v1 v1^T + v2 v2^T`` where
    ``g(s) = alpha + (1 - alpha) exp(-s / lambda_c^2)``. Flat points
    (``mu1 < 1e-12``) give exactly the identity; at isotropic points with no
    preferred direction the tensor is ``g(mu1) I``.
    """
    mu1, _, vx, vy, gap = _eig2(J.dxx, J.dxy, J.dyy)
    lam = p.alpha + (1.0 - p.alpha) * np.exp(-np.maximum(mu1, 0.0) / (p.lambda_c * p.lambda_c))

    flat = mu1 < FLAT_EPS
    isotropic = ~flat & (gap <= FLAT_EPS * mu1)
    norm2 = vx * vx + vy * vy
    safe = np.where(flat | isotropic | (norm2 == 0), 1.0, norm2)
    scale = (lam - 1.0) / safe

    dxx = 1.0 + scale * vx * vx
    dxy = scale * vx * vy
    dyy = 1.0 + scale * vy * vy

    dxx = np.where(isotropic, lam, dxx)
    dyy = np.where(isotropic, lam, dyy)
    dxy = np.where(isotropic, 0.0, dxy)

    dxx = np.where(flat, 1.0, dxx)
    dyy = np.where(flat, 1.0, dyy)
    dxy = np.where(flat, 0.0, dxy)
    return TensorField(dxx, dxy, dyy)


def guide_tensor(guide: GuideImage, p: EdgeParams | None = None) -> TensorField:
    """Full guide-to-tensor pipeline."""
    p = p or EdgeParams()
    lum = luminance(guide)
    smoothed = gaussian_smooth(lum, p.sigma_g)
    gx, gy = gradient(smoothed)
    return diffusion_tensor(structure_tensor(gx, gy, p.rho), p)


def dump_tensor(D: TensorField, prefix: str | PathLike, like: Grid | None = None) -> list[str]:
    """Write ``<prefix>_dxx.asc``, ``_dxy`` and ``_dyy`` for inspection; returns the paths."""
    paths = []
    for name in ("dxx", "dxy", "dyy"):
        arr = getattr(D, name)
        grid = like.with_values(arr) if like is not None else Grid(arr)
        path = f"{prefix}_{name}.asc"
        save_grid(path, grid)
        paths.append(path)
    return paths
