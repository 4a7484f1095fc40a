"""
Synthetic ground-truth DSMs with co-registered guide images.

A scene is fBm terrain plus flat-roofed axis-aligned boxes. The guide is a
Lambert hillshade (light from the north-west) of the ground with each
building footprint painted in its own flat bright tone, so guide edges sit
exactly on the DSM discontinuities. Walls are invisible from nadir, so the
ground is shaded with the terrain slope rather than a finite-difference ramp
across the wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from os import PathLike

import numpy as np

from .masks import PerlinParams, normalize01, perlin_raw
from .raster import Grid, GuideImage, save_grid, save_pnm
from .rng import PCG32

TERRAIN_TONE = (0.3, 0.6)
ROOF_TONE = (0.8, 1.0)


@dataclass(frozen=True)
class SceneSpec:
    size: int = 256
    terrain_seed: int = 0
    n_buildings: int = 12
    building_height: tuple[float, float] = (4.0, 25.0)
    relief_amplitude: float = 15.0
    cellsize: float = 0.5

    def __post_init__(self):
        if self.size < 32:
            raise ValueError("scene size must be at least 32")
        if self.n_buildings < 0:
            raise ValueError("n_buildings must be non-negative")
        lo, hi = self.building_height
        if not 0 < lo <= hi:
            raise ValueError("building heights must be a positive range")
        if self.relief_amplitude < 0:
            raise ValueError("relief_amplitude must be non-negative")
        if not self.cellsize > 0:
            raise ValueError("cellsize must be positive")


@dataclass(frozen=True)
class Building:
    x0: int
    y0: int
    x1: int  # exclusive
    y1: int  # exclusive
    height: float
    tone: float


def hillshade(z: np.ndarray, cellsize: float, azimuth: float = 315.0, altitude: float = 45.0) -> np.ndarray:
    """Lambert shading in [0, 1]; azimuth clockwise from north, rows grow southward."""
    dz_drow, dz_dcol = np.gradient(z, cellsize)
    p = dz_dcol  # dz/d(east)
    q = -dz_drow  # dz/d(north)
    az, alt = math.radians(azimuth), math.radians(altitude)
    lx = math.cos(alt) * math.sin(az)
    ly = math.cos(alt) * math.cos(az)
    lz = math.sin(alt)
    shade = (-p * lx - q * ly + lz) / np.sqrt(1.0 + p * p + q * q)
    return np.clip(shade, 0.0, 1.0)


def _terrain(spec: SceneSpec, rng: PCG32) -> np.ndarray:
    p = PerlinParams(scale=spec.size / 2.0, octaves=4, persistence=0.5, lacunarity=2.0, base=rng.next_uint64())
    if spec.relief_amplitude == 0:
        return np.zeros((spec.size, spec.size))
    field, _ = normalize01(perlin_raw(spec.size, p))
    return spec.relief_amplitude * field


def _place_buildings(spec: SceneSpec, rng: PCG32) -> list[Building]:
    n = spec.size
    lo, hi = max(3, n // 16), max(4, n // 6)
    taken = np.zeros((n, n), dtype=bool)
    boxes = []
    for _ in range(spec.n_buildings):
        for _attempt in range(50):
            bw, bh = rng.randint(lo, hi), rng.randint(lo, hi)
            # one pixel of ground between footprints and the raster border
            x0, y0 = rng.randint(1, n - 1 - bw), rng.randint(1, n - 1 - bh)
            if not taken[max(0, y0 - 2) : y0 + bh + 2, max(0, x0 - 2) : x0 + bw + 2].any():
                taken[y0 : y0 + bh, x0 : x0 + bw] = True
                boxes.append((x0, y0, x0 + bw, y0 + bh, rng.uniform(*spec.building_height)))
                break
    tones = np.linspace(*ROOF_TONE, len(boxes)) if len(boxes) > 1 else np.array([ROOF_TONE[1]])
    order = rng.shuffle(list(range(len(boxes))))
    return [Building(*b, tone=float(tones[k])) for b, k in zip(boxes, order)]


def _to_guide(tone: np.ndarray) -> GuideImage:
    gray = np.rint(np.clip(tone, 0.0, 1.0) * 255.0).astype(np.uint8)
    return GuideImage(np.repeat(gray[:, :, None], 3, axis=2))


def make_scene(spec: SceneSpec) -> tuple[Grid, GuideImage]:
    """Truth DSM and guide image for ``spec``; a pure function of the spec."""
    truth, guide, _ = make_scene_with_buildings(spec)
    return truth, guide


def make_scene_with_buildings(spec: SceneSpec) -> tuple[Grid, GuideImage, list[Building]]:
    rng = PCG32(spec.terrain_seed)
    ground = _terrain(spec, rng)
    z = ground.copy()
    buildings = _place_buildings(spec, rng)
    footprint_tone = np.full(z.shape, np.nan)
    for b in buildings:
        sl = np.s_[b.y0 : b.y1, b.x0 : b.x1]
        roof = float(z[sl].max()) + b.height
        z[sl] = np.maximum(z[sl], roof)
        footprint_tone[sl] = b.tone
    shade = TERRAIN_TONE[0] + (TERRAIN_TONE[1] - TERRAIN_TONE[0]) * hillshade(ground, spec.cellsize)
    tone = np.where(np.isnan(footprint_tone), shade, footprint_tone)
    return Grid(z, cellsize=spec.cellsize), _to_guide(tone), buildings


def footprint_boundary(shape: tuple[int, int], buildings: list[Building]) -> np.ndarray:
    """Footprint pixels with at least one 4-neighbour outside their footprint."""
    out = np.zeros(shape, dtype=bool)
    for b in buildings:
        out[b.y0, b.x0 : b.x1] = out[b.y1 - 1, b.x0 : b.x1] = True
        out[b.y0 : b.y1, b.x0] = out[b.y0 : b.y1, b.x1 - 1] = True
    return out


def step_scene(size: int, low: float = 0.0, high: float = 10.0, cellsize: float = 1.0) -> tuple[Grid, GuideImage]:
    """Vertical step: columns ``< size // 2`` at ``low``, the rest at ``high``; guide edge on the same column."""
    z = np.full((size, size), low, dtype=np.float64)
    z[:, size // 2 :] = high
    tone = np.where(z == high, 0.8, 0.2)
    return Grid(z, cellsize=cellsize), _to_guide(tone)


def affine_scene(size: int, a: float, b: float, c: float, cellsize: float = 1.0) -> Grid:
    """``z = a x + b y + c`` with ``x`` the column and ``y`` the row index."""
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    return Grid(a * cols + b * rows + c, cellsize=cellsize)


def constant_guide(shape: tuple[int, int], level: int = 128) -> GuideImage:
    return GuideImage(np.full((*shape, 3), level, dtype=np.uint8))


def save_scene(prefix: str | PathLike, truth: Grid, guide: GuideImage) -> tuple[str, str]:
    """Write ``<prefix>.asc`` and ``<prefix>.ppm``."""
    asc, ppm = f"{prefix}.asc", f"{prefix}.ppm"
    save_grid(asc, truth)
    save_pnm(ppm, guide)
    return asc, ppm
