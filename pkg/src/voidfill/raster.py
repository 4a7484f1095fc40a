"""
Raster containers and file I/O.

Elevation grids are stored as 64-bit floats with an explicit nodata sentinel
(never NaN). Guide images and masks travel as binary PNM (P5/P6, maxval 255),
elevation grids as ESRI ASCII. Every container is immutable: the backing
arrays are flagged read-only on construction.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from os import PathLike
from typing import Literal, Union

import numpy as np

from .errors import (
    CountMismatch,
    DegenerateRangeWarning,
    DimensionMismatch,
    MalformedHeader,
    MaxvalNot255,
    NoKnownCells,
    NonNumericToken,
    TruncatedPayload,
    UnsupportedMagic,
)

PathType = Union[str, PathLike]

DEFAULT_NODATA = -9999.0

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")
# Dot decimal only; rejects nan/inf/locale forms that float() would accept.
_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")
_INTEGER = re.compile(r"\+?\d+\Z")


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _same_bits(values: np.ndarray, sentinel: float) -> np.ndarray:
    return values.view(np.uint64) == np.array(sentinel, dtype=np.float64).view(np.uint64)


@dataclass(frozen=True, eq=False)
class Grid:
    """Single-band elevation raster, row 0 is the northernmost row.

    ``values`` has shape ``(height, width)``. Cells whose bit pattern equals
    ``nodata_value`` are missing; every other cell must be finite.
    """

    values: np.ndarray
    cellsize: float = 1.0
    origin_x: float = 0.0
    origin_y: float = 0.0
    nodata_value: float = DEFAULT_NODATA

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"grid values must be a non-empty 2-D array, got shape {values.shape}")
        nodata = float(self.nodata_value)
        if not np.isfinite(nodata):
            raise ValueError("nodata_value must be finite")
        if not float(self.cellsize) > 0:
            raise ValueError("cellsize must be positive")
        bad = ~np.isfinite(values) & ~_same_bits(values, nodata)
        if bad.any():
            raise ValueError("grid values must be finite or equal to nodata_value")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "cellsize", float(self.cellsize))
        object.__setattr__(self, "origin_x", float(self.origin_x))
        object.__setattr__(self, "origin_y", float(self.origin_y))
        object.__setattr__(self, "nodata_value", nodata)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def nodata(self) -> np.ndarray:
        """Boolean array, true where the cell holds the nodata sentinel."""
        return _same_bits(self.values, self.nodata_value)

    def with_values(self, values: np.ndarray, nodata_value: float | None = None) -> Grid:
        """Same georeferencing, new cell values."""
        return Grid(
            values,
            cellsize=self.cellsize,
            origin_x=self.origin_x,
            origin_y=self.origin_y,
            nodata_value=self.nodata_value if nodata_value is None else nodata_value,
        )

    def identical(self, other: Grid) -> bool:
        """Bit-exact equality of header and every cell."""
        return (
            isinstance(other, Grid)
            and self.shape == other.shape
            and self.cellsize == other.cellsize
            and self.origin_x == other.origin_x
            and self.origin_y == other.origin_y
            and _same_bits(np.array([self.nodata_value]), other.nodata_value)[0]
            and bool(np.array_equal(self.values.view(np.uint64), other.values.view(np.uint64)))
        )

    __hash__ = None  # type: ignore[assignment]

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.identical(other)


@dataclass(frozen=True, eq=False)
class VoidMask:
    """Boolean raster, true marks a void (missing) cell."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, order="C", copy=True)
        if bits.ndim != 2 or bits.shape[0] < 1 or bits.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2-D array, got shape {bits.shape}")
        object.__setattr__(self, "bits", _readonly(bits))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def void_fraction(self) -> float:
        return float(np.count_nonzero(self.bits)) / self.bits.size

    @classmethod
    def empty(cls, height: int, width: int) -> VoidMask:
        return cls(np.zeros((height, width), dtype=bool))

    def __or__(self, other: VoidMask) -> VoidMask:
        _check_shape(self.shape, other.shape)
        return VoidMask(self.bits | other.bits)

    __hash__ = None  # type: ignore[assignment]

    def __eq__(self, other):
        if not isinstance(other, VoidMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))


@dataclass(frozen=True, eq=False)
class GuideImage:
    """8-bit optical guide, ``samples`` has shape ``(height, width, channels)``."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim == 2:
            samples = samples[:, :, None]
        if samples.ndim != 3 or samples.shape[2] not in (1, 3):
            raise ValueError("guide samples must have shape (h, w), (h, w, 1) or (h, w, 3)")
        if samples.shape[0] < 1 or samples.shape[1] < 1:
            raise ValueError("guide image must be non-empty")
        if samples.dtype != np.uint8:
            if np.any(samples < 0) or np.any(samples > 255) or np.any(samples != np.round(samples)):
                raise ValueError("guide samples must be integers in 0..255")
        samples = np.array(samples, dtype=np.uint8, order="C", copy=True)
        object.__setattr__(self, "samples", _readonly(samples))

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape[:2]


def _check_shape(a: tuple[int, int], b: tuple[int, int]) -> None:
    if tuple(a) != tuple(b):
        raise DimensionMismatch(f"dimension mismatch: {tuple(a)} vs {tuple(b)}")


# ---------------------------------------------------------------------------
# ESRI ASCII grid
# ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips ``x`` (``1.0`` prints as ``1``)."""
    text = repr(float(x))
    if text.endswith(".0"):
        text = text[:-2]
    return text


def _parse_number(token: str) -> float:
    if not _NUMBER.match(token):
        raise NonNumericToken(f"not a number: {token!r}")
    return float(token)


def read_ascii_grid(data: bytes | str) -> Grid:
    """Parse an ESRI ASCII grid.

    The six header keys are required exactly once each, in any order and any
    letter case. Tokens equal to ``NODATA_value`` become nodata cells.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise NonNumericToken(f"non-ASCII byte at offset {exc.start}") from None
    tokens = data.split()

    header: dict[str, str] = {}
    pos = 0
    while pos < len(tokens) and tokens[pos][:1].isalpha():
        key = tokens[pos].lower()
        if key not in _HEADER_KEYS:
            raise MalformedHeader(f"unknown header key {tokens[pos]!r}")
        if key in header:
            raise MalformedHeader(f"duplicate header key {tokens[pos]!r}")
        if pos + 1 >= len(tokens):
            raise MalformedHeader(f"header key {tokens[pos]!r} has no value")
        header[key] = tokens[pos + 1]
        pos += 2
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise MalformedHeader(f"missing header keys: {', '.join(missing)}")

    for key in ("ncols", "nrows"):
        if not _INTEGER.match(header[key]) or int(header[key]) < 1:
            raise MalformedHeader(f"{key} must be a positive integer, got {header[key]!r}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    try:
        xll = _parse_number(header["xllcorner"])
        yll = _parse_number(header["yllcorner"])
        cellsize = _parse_number(header["cellsize"])
        nodata = _parse_number(header["nodata_value"])
    except NonNumericToken as exc:
        raise MalformedHeader(str(exc)) from None
    if not cellsize > 0:
        raise MalformedHeader(f"cellsize must be positive, got {header['cellsize']!r}")

    body = tokens[pos:]
    if len(body) != ncols * nrows:
        raise CountMismatch(f"expected {ncols * nrows} values, found {len(body)}")
    for token in body:
        if not _NUMBER.match(token):
            raise NonNumericToken(f"not a number: {token!r}")
    values = np.array(body, dtype=np.float64).reshape(nrows, ncols)
    if not np.isfinite(values).all():
        raise NonNumericToken("value overflows a 64-bit float")
    return Grid(values, cellsize=cellsize, origin_x=xll, origin_y=yll, nodata_value=nodata)


def write_ascii_grid(g: Grid) -> bytes:
    """Serialize ``g`` so that ``read_ascii_grid(write_ascii_grid(g))`` is bit-identical."""
    lines = [
        f"ncols {g.width}",
        f"nrows {g.height}",
        f"xllcorner {format_float(g.origin_x)}",
        f"yllcorner {format_float(g.origin_y)}",
        f"cellsize {format_float(g.cellsize)}",
        f"NODATA_value {format_float(g.nodata_value)}",
    ]
    nodata_token = format_float(g.nodata_value)
    mask = g.nodata
    for row, row_mask in zip(g.values.tolist(), mask):
        lines.append(
            " ".join(nodata_token if m else format_float(v) for v, m in zip(row, row_mask))
        )
    return ("\n".join(lines) + "\n").encode("ascii")


# ---------------------------------------------------------------------------
# Binary PNM
# ---------------------------------------------------------------------------


def _pnm_header(data: bytes) -> tuple[bytes, int, int, int, int]:
    """Return (magic, width, height, maxval, payload offset)."""
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedMagic(f"unsupported PNM magic {magic!r}")
    fields: list[int] = []
    pos = 2
    n = len(data)
    while len(fields) < 3:
        while pos < n and (data[pos : pos + 1].isspace() or data[pos : pos + 1] == b"#"):
            if data[pos : pos + 1] == b"#":
                while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise TruncatedPayload("incomplete PNM header")
        fields.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the payload
    if pos >= n or not data[pos : pos + 1].isspace():
        raise TruncatedPayload("incomplete PNM header")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise UnsupportedMagic("PNM dimensions must be positive")
    if maxval != 255:
        raise MaxvalNot255(f"maxval must be 255, got {maxval}")
    return magic, width, height, maxval, pos + 1


def read_pnm(data: bytes, role: Literal["guide", "mask"] = "guide") -> GuideImage | VoidMask:
    """Decode a binary P5/P6 image as a guide image or, for ``role="mask"``, a void mask.

    Masks must be P5; a nonzero sample marks a void.
    """
    if role not in ("guide", "mask"):
        raise ValueError(f"role must be 'guide' or 'mask', got {role!r}")
    magic, width, height, _, offset = _pnm_header(data)
    channels = 3 if magic == b"P6" else 1
    if role == "mask" and channels != 1:
        raise UnsupportedMagic("void masks must be P5 (grayscale)")
    need = width * height * channels
    payload = data[offset : offset + need]
    if len(payload) < need:
        raise TruncatedPayload(f"expected {need} payload bytes, found {len(payload)}")
    samples = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    if role == "mask":
        return VoidMask(samples[:, :, 0] > 0)
    return GuideImage(samples)


def write_pnm(image: GuideImage | VoidMask) -> bytes:
    """Encode a guide image (P5 or P6) or a mask (P5, void = 255)."""
    if isinstance(image, VoidMask):
        samples = np.where(image.bits, 255, 0).astype(np.uint8)[:, :, None]
    else:
        samples = image.samples
    h, w, c = samples.shape
    magic = b"P6" if c == 3 else b"P5"
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + samples.tobytes()


def load_grid(path: PathType) -> Grid:
    with open(path, "rb") as fh:
        return read_ascii_grid(fh.read())


def save_grid(path: PathType, g: Grid) -> None:
    with open(path, "wb") as fh:
        fh.write(write_ascii_grid(g))


def load_mask(path: PathType) -> VoidMask:
    with open(path, "rb") as fh:
        return read_pnm(fh.read(), role="mask")


def load_guide(path: PathType) -> GuideImage:
    with open(path, "rb") as fh:
        return read_pnm(fh.read(), role="guide")


def save_pnm(path: PathType, image: GuideImage | VoidMask) -> None:
    with open(path, "wb") as fh:
        fh.write(write_pnm(image))


# ---------------------------------------------------------------------------
# Masks, normalization, statistics
# ---------------------------------------------------------------------------


def extract_void_mask(g: Grid) -> VoidMask:
    return VoidMask(g.nodata)


def apply_mask(g: Grid, m: VoidMask) -> Grid:
    """Copy of ``g`` with every void cell of ``m`` set to nodata."""
    _check_shape(g.shape, m.shape)
    values = g.values.copy()
    values[m.bits] = g.nodata_value
    return g.with_values(values)


@dataclass(frozen=True)
class NormParams:
    lo: float
    hi: float
    mode: Literal["unit", "symmetric"]
    nodata_value: float
    degenerate: bool = False


_BOUNDS = {"unit": (0.0, 1.0), "symmetric": (-1.0, 1.0)}


def normalize(g: Grid, mode: Literal["unit", "symmetric"] = "unit") -> tuple[Grid, NormParams]:
    """Min-max map the known cells onto [0, 1] or [-1, 1].

    A constant grid cannot be stretched; it maps to the interval midpoint and
    ``NormParams.degenerate`` is set. If the nodata sentinel falls inside the
    target interval the normalized grid carries ``DEFAULT_NODATA`` instead.
    """
    if mode not in _BOUNDS:
        raise ValueError(f"mode must be 'unit' or 'symmetric', got {mode!r}")
    known = ~g.nodata
    if not known.any():
        raise NoKnownCells("cannot normalize a grid without known cells")
    kv = g.values[known]
    lo, hi = float(kv.min()), float(kv.max())
    lower, upper = _BOUNDS[mode]

    out = g.values.copy()
    degenerate = hi == lo
    if degenerate:
        warnings.warn("constant grid, normalized to interval midpoint", DegenerateRangeWarning, stacklevel=2)
        out[known] = 0.5 * (lower + upper)
    elif mode == "unit":
        out[known] = (kv - lo) / (hi - lo)
    else:
        out[known] = 2.0 * ((kv - lo) / (hi - lo)) - 1.0

    nodata = g.nodata_value
    if lower <= nodata <= upper:
        nodata = DEFAULT_NODATA
        out[~known] = nodata
    params = NormParams(lo=lo, hi=hi, mode=mode, nodata_value=g.nodata_value, degenerate=degenerate)
    return g.with_values(out, nodata_value=nodata), params


def denormalize(g: Grid, params: NormParams) -> Grid:
    """Inverse of :func:`normalize`; restores the original nodata sentinel."""
    known = ~g.nodata
    out = np.full(g.shape, params.nodata_value, dtype=np.float64)
    v = g.values[known]
    if params.degenerate:
        out[known] = params.lo
    elif params.mode == "unit":
        out[known] = v * (params.hi - params.lo) + params.lo
    else:
        out[known] = (v + 1.0) * 0.5 * (params.hi - params.lo) + params.lo
    return g.with_values(out, nodata_value=params.nodata_value)


def median(values: np.ndarray) -> float:
    """Median with the mean-of-middles convention for even counts."""
    v = np.asarray(values, dtype=np.float64).ravel()
    n = v.size
    if n == 0:
        raise ValueError("median of an empty sequence")
    k = n // 2
    if n % 2:
        return float(np.partition(v, k)[k])
    part = np.partition(v, (k - 1, k))
    return float((part[k - 1] + part[k]) / 2.0)


def grid_median_known(g: Grid, m: VoidMask) -> float:
    """Median of ``g`` over the cells where ``m`` is false."""
    _check_shape(g.shape, m.shape)
    known = ~m.bits
    if not known.any():
        raise NoKnownCells("mask leaves no known cells")
    return median(g.values[known])
