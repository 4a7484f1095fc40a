"""
Synthetic void masks.

Perlin masks threshold a min-max normalized fractal gradient-noise field
(``noise > threshold``). Irregular masks follow the free-form inpainting
recipe: random thick polylines stamped as discs plus axis-aligned rectangles.
All generators are pure functions of their seeds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateRangeWarning, Unreachable
from .raster import Grid, VoidMask
from .rng import PCG32

Size = Union[int, Sequence[int]]

#: Gradient directions indexed by the low three hash bits.
GRADIENTS = np.array(
    [(1, 1), (-1, 1), (1, -1), (-1, -1), (1, 0), (-1, 0), (0, 1), (0, -1)], dtype=np.float64
)

SMALL_BAND = (0.05, 0.25)
LARGE_BAND = (0.60, 0.80)


def _shape(size: Size) -> tuple[int, int]:
    if isinstance(size, (int, np.integer)):
        h = w = int(size)
    else:
        h, w = (int(s) for s in size)
    if h < 1 or w < 1:
        raise ValueError("mask size must be at least 1")
    return h, w


@dataclass(frozen=True)
class PerlinParams:
    scale: float = 64.0
    octaves: int = 4
    persistence: float = 0.5
    lacunarity: float = 2.0
    base: int = 0
    threshold: float | None = None

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.octaves < 1:
            raise ValueError("octaves must be at least 1")
        if not 0 < self.persistence <= 1:
            raise ValueError("persistence must lie in (0, 1]")
        if not self.lacunarity >= 1:
            raise ValueError("lacunarity must be at least 1")
        if self.threshold is not None and not 0 <= self.threshold <= 1:
            raise ValueError("threshold must lie in [0, 1]")


@dataclass(frozen=True)
class PerlinRanges:
    """Sampling ranges for :func:`random_perlin_params`."""

    scale: tuple[float, float] = (16.0, 128.0)
    octaves: tuple[int, int] = (1, 4)
    persistence: tuple[float, float] = (0.4, 0.7)
    lacunarity: tuple[float, float] = (1.8, 2.2)


def random_perlin_params(seed: int, ranges: PerlinRanges | None = None) -> PerlinParams:
    """Draw scale, octaves, persistence, lacunarity and base from ``PCG32(seed)``."""
    ranges = ranges or PerlinRanges()
    rng = PCG32(seed)
    return PerlinParams(
        scale=rng.uniform(*ranges.scale),
        octaves=rng.randint(*ranges.octaves),
        persistence=rng.uniform(*ranges.persistence),
        lacunarity=rng.uniform(*ranges.lacunarity),
        base=rng.next_uint64(),
    )


def permutation_table(base: int) -> np.ndarray:
    """0..255 shuffled by ``PCG32(base)``, repeated twice (512 entries)."""
    perm = PCG32(base).shuffle(list(range(256)))
    return np.array(perm + perm, dtype=np.int64)


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def gradient_noise(x: np.ndarray, y: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Single-octave 2-D Perlin noise; zero at every integer lattice point."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx, fy = x - x0, y - y0
    X = x0.astype(np.int64) & 255
    Y = y0.astype(np.int64) & 255
    u, v = _fade(fx), _fade(fy)

    def corner(h, dx, dy):
        g = GRADIENTS[h & 7]
        return g[..., 0] * dx + g[..., 1] * dy

    n00 = corner(perm[perm[X] + Y], fx, fy)
    n10 = corner(perm[perm[X + 1] + Y], fx - 1.0, fy)
    n01 = corner(perm[perm[X] + Y + 1], fx, fy - 1.0)
    n11 = corner(perm[perm[X + 1] + Y + 1], fx - 1.0, fy - 1.0)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    return nx0 + v * (nx1 - nx0)


def perlin_raw(size: Size, p: PerlinParams) -> np.ndarray:
    """Un-normalized fractal noise, ``noise[i, j] = fBm(i / scale, j / scale)``."""
    h, w = _shape(size)
    perm = permutation_table(p.base)
    i, j = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    total = np.zeros((h, w))
    for k in range(p.octaves):
        freq = p.lacunarity**k / p.scale
        total += p.persistence**k * gradient_noise(i * freq, j * freq, perm)
    return total


def normalize01(field: np.ndarray) -> tuple[np.ndarray, bool]:
    """Min-max map onto [0, 1]; a constant field becomes 0.5 and reports ``True``."""
    lo, hi = float(field.min()), float(field.max())
    if hi == lo:
        return np.full(field.shape, 0.5), True
    return (field - lo) / (hi - lo), False


def perlin_noise(size: Size, p: PerlinParams) -> Grid:
    """Fractal Perlin noise normalized to [0, 1] (min exactly 0, max exactly 1)."""
    noise, degenerate = normalize01(perlin_raw(size, p))
    if degenerate:
        warnings.warn("Perlin noise is constant over the grid", DegenerateRangeWarning, stacklevel=2)
    return Grid(noise)


def draw_threshold(rng_seed: int) -> float:
    return PCG32(rng_seed).random()


def threshold_mask(noise: Grid | np.ndarray, threshold: float) -> VoidMask:
    values = noise.values if isinstance(noise, Grid) else np.asarray(noise)
    return VoidMask(values > threshold)


def perlin_mask(size: Size, p: PerlinParams, rng_seed: int = 0) -> VoidMask:
    """Void where normalized noise exceeds the threshold (drawn uniformly when unset)."""
    threshold = p.threshold if p.threshold is not None else draw_threshold(rng_seed)
    return threshold_mask(perlin_noise(size, p), threshold)


def mask_coverage(m: VoidMask) -> float:
    return m.void_fraction


def coverage_threshold(
    noise: Grid | np.ndarray,
    target: tuple[float, float],
    first: float,
    max_tries: int = 64,
) -> float:
    """Threshold whose mask coverage falls inside ``target``.

    ``first`` is tried as is; after that the search bisects over the sorted
    noise values, so every achievable coverage level is reachable.
    """
    lo, hi = target
    if not 0 <= lo < hi <= 1:
        raise ValueError("coverage band must satisfy 0 <= lo < hi <= 1")
    values = (noise.values if isinstance(noise, Grid) else np.asarray(noise)).ravel()
    n = values.size
    s = np.sort(values)

    def coverage(t):
        return (n - np.searchsorted(s, t, side="right")) / n

    if lo <= coverage(first) <= hi:
        return float(first)
    # candidate thresholds: below the minimum (full coverage), then each sample
    candidates = np.concatenate([[s[0] - 1.0], s])
    a, b = 0, candidates.size - 1
    for _ in range(max_tries - 1):
        if a > b:
            break
        mid = (a + b) // 2
        t = float(candidates[mid])
        c = coverage(t)
        if lo <= c <= hi:
            return t
        if c > hi:
            a = mid + 1
        else:
            b = mid - 1
    raise Unreachable(f"no threshold gives coverage in [{lo}, {hi}] within {max_tries} tries")


def sample_mask_with_coverage(
    size: Size,
    p: PerlinParams,
    target: tuple[float, float],
    max_tries: int = 64,
    rng_seed: int = 0,
) -> VoidMask:
    """Perlin mask whose coverage lies in ``target``."""
    noise = perlin_noise(size, p)
    first = p.threshold if p.threshold is not None else draw_threshold(rng_seed)
    return threshold_mask(noise, coverage_threshold(noise, target, first, max_tries))


# ---------------------------------------------------------------------------
# Irregular (stroke + rectangle) masks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrokeParams:
    """Inclusive ranges for the free-form mask generator.

    ``rect_size`` defaults to one tenth to one third of the shorter side.
    """

    n_strokes: tuple[int, int] = (1, 4)
    brush_width: tuple[float, float] = (5.0, 20.0)
    n_vertices: tuple[int, int] = (2, 6)
    n_rects: tuple[int, int] = (0, 2)
    rect_size: tuple[int, int] | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("n_strokes", "n_rects"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must be a non-empty range of counts")
        lo, hi = self.brush_width
        if not 0 < lo <= hi:
            raise ValueError("brush_width must be a non-empty positive range")
        lo, hi = self.n_vertices
        if lo < 2 or hi < lo:
            raise ValueError("n_vertices must be a non-empty range starting at 2 or more")
        if self.rect_size is not None:
            lo, hi = self.rect_size
            if not 1 <= lo <= hi:
                raise ValueError("rect_size must be a non-empty positive range")


def stamp_disc(bits: np.ndarray, cx: float, cy: float, radius: float) -> None:
    """Set every pixel whose centre lies within ``radius`` of ``(cx, cy)``."""
    h, w = bits.shape
    r0, r1 = max(0, math.floor(cy - radius)), min(h - 1, math.ceil(cy + radius))
    c0, c1 = max(0, math.floor(cx - radius)), min(w - 1, math.ceil(cx + radius))
    if r0 > r1 or c0 > c1:
        return
    rr, cc = np.mgrid[r0 : r1 + 1, c0 : c1 + 1]
    bits[r0 : r1 + 1, c0 : c1 + 1] |= (cc - cx) ** 2 + (rr - cy) ** 2 <= radius * radius


def stamp_segment(bits: np.ndarray, p0: tuple[float, float], p1: tuple[float, float], width: float) -> None:
    """Discs of diameter ``width`` along ``p0 -> p1`` (``(x, y)`` points) at <= 1 px spacing."""
    (x0, y0), (x1, y1) = p0, p1
    steps = max(1, math.ceil(math.hypot(x1 - x0, y1 - y0)))
    for t in np.linspace(0.0, 1.0, steps + 1):
        stamp_disc(bits, x0 + t * (x1 - x0), y0 + t * (y1 - y0), 0.5 * width)


def rect_mask(size: Size, rects: Sequence[tuple[int, int, int, int]]) -> VoidMask:
    """Void rectangles given as inclusive ``(x0, y0, x1, y1)`` pixel corners."""
    h, w = _shape(size)
    bits = np.zeros((h, w), dtype=bool)
    for x0, y0, x1, y1 in rects:
        xa, xb = sorted((int(x0), int(x1)))
        ya, yb = sorted((int(y0), int(y1)))
        bits[max(0, ya) : min(h, yb + 1), max(0, xa) : min(w, xb + 1)] = True
    return VoidMask(bits)


def irregular_mask(size: Size, s: StrokeParams) -> VoidMask:
    h, w = _shape(size)
    rng = PCG32(s.seed)
    bits = np.zeros((h, w), dtype=bool)
    for _ in range(rng.randint(*s.n_strokes)):
        n_vertices = rng.randint(*s.n_vertices)
        pts = [(rng.uniform(0, w), rng.uniform(0, h)) for _ in range(n_vertices)]
        for a, b in zip(pts[:-1], pts[1:]):
            stamp_segment(bits, a, b, rng.uniform(*s.brush_width))
    lo, hi = s.rect_size or (max(1, min(h, w) // 10), max(1, min(h, w) // 3))
    for _ in range(rng.randint(*s.n_rects)):
        rw = min(w, rng.randint(lo, hi))
        rh = min(h, rng.randint(lo, hi))
        x0 = rng.randint(0, w - rw)
        y0 = rng.randint(0, h - rh)
        bits[y0 : y0 + rh, x0 : x0 + rw] = True
    return VoidMask(bits)


def sidecar(params: dict | object) -> str:
    """``key=value`` provenance lines for a generator parameter set."""
    if not isinstance(params, dict):
        params = asdict(params)
    lines = []
    for key, value in params.items():
        if isinstance(value, (tuple, list)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"
