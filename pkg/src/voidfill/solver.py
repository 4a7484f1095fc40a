"""
Steady-state anisotropic diffusion over void pixels.

``assemble_stencil`` discretizes ``div(D grad u)`` in divergence form on a
unit grid: axis fluxes use face-averaged ``dxx``/``dyy``, the mixed term uses
the diagonal neighbours with corner-averaged ``dxy``. Weights towards pixels
outside the raster are zero, which gives a zero-flux outer boundary and keeps
the operator symmetric. ``solve_steady_state`` then finds ``L u = 0`` on the
void pixels with the known pixels held fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import AllVoid, DimensionMismatch, HasNodata, MethodIncompatible, NotSPD
from .raster import GuideImage, Grid, VoidMask, _check_shape, _readonly, normalize, denormalize
from .tensor import EdgeParams, TensorField, guide_tensor

EPS = 1e-30

#: (row offset, column offset) of each neighbour weight.
OFFSETS = {
    "n": (-1, 0),
    "s": (1, 0),
    "e": (0, 1),
    "w": (0, -1),
    "ne": (-1, 1),
    "nw": (-1, -1),
    "se": (1, 1),
    "sw": (1, -1),
}
OPPOSITE = {"n": "s", "s": "n", "e": "w", "w": "e", "ne": "sw", "sw": "ne", "nw": "se", "se": "nw"}

DEFAULT_MAX_ITERS = {"explicit": 10_000, "jacobi": 10_000, "cg": 2_000}


@dataclass(frozen=True, eq=False)
class StencilField:
    """Per-pixel 3x3 weights; ``c`` closes every row sum to zero."""

    n: np.ndarray
    s: np.ndarray
    e: np.ndarray
    w: np.ndarray
    ne: np.ndarray
    nw: np.ndarray
    se: np.ndarray
    sw: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        shape = np.shape(self.c)
        for name in (*OFFSETS, "c"):
            arr = np.array(getattr(self, name), dtype=np.float64, order="C", copy=True)
            if arr.shape != shape or arr.ndim != 2:
                raise ValueError("stencil channels must share one 2-D shape")
            object.__setattr__(self, name, _readonly(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.c.shape

    def neighbours(self):
        for name, (dr, dc) in OFFSETS.items():
            yield name, dr, dc, getattr(self, name)

    def is_symmetric(self) -> bool:
        """True when the weight from p to q equals the weight from q to p everywhere."""
        h, w = self.shape
        for name, dr, dc, wts in self.neighbours():
            other = getattr(self, OPPOSITE[name])
            r0, r1 = max(0, -dr), h - max(0, dr)
            c0, c1 = max(0, -dc), w - max(0, dc)
            if not np.array_equal(wts[r0:r1, c0:c1], other[r0 + dr : r1 + dr, c0 + dc : c1 + dc]):
                return False
            # weights pointing off the raster must vanish
            outside = np.ones((h, w), dtype=bool)
            outside[r0:r1, c0:c1] = False
            if np.any(wts[outside] != 0):
                return False
        return True

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``L u`` over the whole raster."""
        return apply_stencil(self, u)


def apply_stencil(S: StencilField, u: np.ndarray) -> np.ndarray:
    h, w = S.shape
    out = S.c * u
    for _, dr, dc, wts in S.neighbours():
        r0, r1 = max(0, -dr), h - max(0, dr)
        c0, c1 = max(0, -dc), w - max(0, dc)
        if r0 >= r1 or c0 >= c1:
            continue
        out[r0:r1, c0:c1] += wts[r0:r1, c0:c1] * u[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    return out


def stencil_matrix(S: StencilField) -> np.ndarray:
    """Dense ``(h*w, h*w)`` matrix of the stencil operator, row-major pixel order."""
    h, w = S.shape
    n = h * w
    A = np.zeros((n, n))
    idx = np.arange(n).reshape(h, w)
    A[idx.ravel(), idx.ravel()] = S.c.ravel()
    for _, dr, dc, wts in S.neighbours():
        r0, r1 = max(0, -dr), h - max(0, dr)
        c0, c1 = max(0, -dc), w - max(0, dc)
        rows = idx[r0:r1, c0:c1].ravel()
        cols = idx[r0 + dr : r1 + dr, c0 + dc : c1 + dc].ravel()
        A[rows, cols] += wts[r0:r1, c0:c1].ravel()
    return A


def assemble_stencil(D: TensorField, nonneg_stencil: bool = False) -> StencilField:
    """Finite-volume stencil of ``div(D grad u)``.

    With ``nonneg_stencil`` each negative diagonal weight is folded into the
    opposite diagonal of its 2x2 block and subtracted from the block's four
    axis edges. The mixed term stays consistent, every off-centre weight is
    non-negative (discrete maximum principle) and the operator stays
    symmetric. Where the axis edges are too weak to absorb the fold the mixed
    coefficient is clipped.
    """
    if not D.is_spd():
        raise NotSPD("diffusion tensor is not symmetric positive definite everywhere")
    h, w = D.shape
    z = lambda: np.zeros((h, w))  # noqa: E731
    wn, ws, we, ww = z(), z(), z(), z()
    wne, wnw, wse, wsw = z(), z(), z(), z()

    fe = 0.5 * (D.dxx[:, :-1] + D.dxx[:, 1:])  # east faces, (h, w-1)
    fs = 0.5 * (D.dyy[:-1, :] + D.dyy[1:, :])  # south faces, (h-1, w)
    bq = 0.25 * (D.dxy[:-1, :-1] + D.dxy[:-1, 1:] + D.dxy[1:, :-1] + D.dxy[1:, 1:])  # corners

    # 2x2 block with corner bq: TL=(i,j) TR=(i,j+1) BL=(i+1,j) BR=(i+1,j+1).
    # TL-BR diagonal carries +bq/2, TR-BL carries -bq/2 (rows grow southwards).
    diag_main = 0.5 * bq
    diag_anti = -0.5 * bq

    if nonneg_stencil and bq.size:
        fold = 0.5 * np.abs(bq)
        edge_min = np.minimum.reduce([fe[:-1, :], fe[1:, :], fs[:, :-1], fs[:, 1:]])
        fold = np.minimum(fold, 0.5 * edge_min)
        positive = bq >= 0
        diag_main = np.where(positive, 2.0 * fold, 0.0)
        diag_anti = np.where(positive, 0.0, 2.0 * fold)
        fe = fe.copy()
        fs = fs.copy()
        fe[:-1, :] -= fold  # top edge of each block
        fe[1:, :] -= fold  # bottom edge
        fs[:, :-1] -= fold  # left edge
        fs[:, 1:] -= fold  # right edge
        fe = np.maximum(fe, 0.0)
        fs = np.maximum(fs, 0.0)

    we[:, :-1] = fe
    ww[:, 1:] = fe
    ws[:-1, :] = fs
    wn[1:, :] = fs
    wse[:-1, :-1] = diag_main
    wnw[1:, 1:] = diag_main
    wsw[:-1, 1:] = diag_anti
    wne[1:, :-1] = diag_anti

    wc = -(wn + ws + we + ww + wne + wnw + wse + wsw)
    return StencilField(n=wn, s=ws, e=we, w=ww, ne=wne, nw=wnw, se=wse, sw=wsw, c=wc)


@dataclass(frozen=True)
class SolveConfig:
    """Iterative solver settings.

    ``tol = 0`` selects fixed-iteration mode: exactly ``max_iters`` updates are
    run and the result is never flagged as unconverged.
    """

    method: Literal["explicit", "jacobi", "cg"] = "cg"
    dt: float = 0.24
    tol: float = 1e-6
    max_iters: int | None = None
    nonneg_stencil: bool = False

    def __post_init__(self):
        if self.method not in DEFAULT_MAX_ITERS:
            raise ValueError(f"unknown solver method {self.method!r}")
        if not 0 < self.dt <= 0.25:
            raise ValueError("dt must lie in (0, 0.25]")
        if not self.tol >= 0:
            raise ValueError("tol must be non-negative")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    @property
    def iteration_limit(self) -> int:
        return self.max_iters if self.max_iters is not None else DEFAULT_MAX_ITERS[self.method]


@dataclass(frozen=True)
class FillResult:
    filled: Grid
    iterations: int
    final_residual: float
    method: str
    converged: bool = True
    trace: tuple[float, ...] = field(default=(), repr=False)

    def trace_csv(self) -> str:
        """Residual history as ``iter,residual`` CSV (iteration 0 is the initial state)."""
        lines = ["iter,residual"]
        lines += [f"{i},{r!r}" for i, r in enumerate(self.trace)]
        return "\n".join(lines) + "\n"


def _norm(v: np.ndarray) -> float:
    # np.sum is pairwise and ordered, so norms do not depend on threading
    return math.sqrt(float(np.sum(v * v)))


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b))


def solve_steady_state(init: Grid, mask: VoidMask, S: StencilField, cfg: SolveConfig | None = None) -> FillResult:
    """Solve ``L u = 0`` on void pixels with known pixels as Dirichlet data.

    The relative residual is ``||L u|| / (||L init|| + 1e-30)`` over void
    pixels. When it is still above ``cfg.tol`` after the iteration budget the
    best iterate is returned with ``converged=False``.
    """
    cfg = cfg or SolveConfig()
    _check_shape(init.shape, mask.shape)
    _check_shape(init.shape, S.shape)
    if init.nodata.any():
        raise HasNodata("initial grid must not contain nodata; run a coarse initializer first")
    void = mask.bits
    u = np.array(init.values, dtype=np.float64, copy=True)
    if not void.any():
        return FillResult(init, 0, 0.0, cfg.method, True, (0.0,))
    if cfg.method == "cg" and not S.is_symmetric():
        raise MethodIncompatible("conjugate gradient needs a symmetric stencil")

    solver = {"explicit": _explicit, "jacobi": _jacobi, "cg": _cg}[cfg.method]
    u, iterations, residual, trace = solver(u, void, S, cfg)
    converged = cfg.tol == 0 or residual <= cfg.tol
    # Dirichlet data is restored bit-for-bit no matter what the iteration did.
    u[~void] = init.values[~void]
    return FillResult(init.with_values(u), iterations, residual, cfg.method, converged, tuple(trace))


def _explicit(u, void, S, cfg):
    r = S.apply(u)[void]
    r0 = _norm(r) + EPS
    trace = [_norm(r) / r0]
    limit = cfg.iteration_limit
    k = 0
    while k < limit and not (cfg.tol > 0 and trace[-1] <= cfg.tol):
        u[void] += cfg.dt * r
        k += 1
        r = S.apply(u)[void]
        trace.append(_norm(r) / r0)
    return u, k, trace[-1], trace


def _jacobi(u, void, S, cfg):
    diag = S.c[void]
    if np.any(diag >= 0):
        raise MethodIncompatible("Jacobi needs a strictly negative stencil centre on void pixels")
    r = S.apply(u)[void]
    r0 = _norm(r) + EPS
    trace = [_norm(r) / r0]
    best_u, best = u[void].copy(), trace[0]
    limit = cfg.iteration_limit
    k = 0
    while k < limit and not (cfg.tol > 0 and trace[-1] <= cfg.tol):
        u[void] -= r / diag
        k += 1
        r = S.apply(u)[void]
        trace.append(_norm(r) / r0)
        if trace[-1] < best:
            best, best_u = trace[-1], u[void].copy()
    u[void] = best_u
    return u, k, best, trace


def _cg(u, void, S, cfg):
    """Jacobi-preconditioned CG on ``-L_vv d = L u`` restricted to void unknowns."""
    diag = -S.c[void]
    if np.any(diag <= 0):
        raise MethodIncompatible("CG needs a strictly negative stencil centre on void pixels")
    minv = 1.0 / diag
    work = np.zeros(u.shape)

    def matvec(p):  # -L restricted to void unknowns
        work[void] = p
        return -S.apply(work)[void]

    res = S.apply(u)[void]
    r0 = _norm(res) + EPS
    trace = [_norm(res) / r0]
    x = u[void].copy()
    best_x, best = x.copy(), trace[0]
    limit = cfg.iteration_limit
    z = minv * res
    p = z.copy()
    rz = _dot(res, z)
    k = 0
    while k < limit and not (cfg.tol > 0 and trace[-1] <= cfg.tol):
        if rz == 0:
            break
        Ap = matvec(p)
        pAp = _dot(p, Ap)
        if pAp <= 0:
            break
        alpha = rz / pAp
        x += alpha * p
        res -= alpha * Ap
        k += 1
        trace.append(_norm(res) / r0)
        if trace[-1] < best:
            best, best_x = trace[-1], x.copy()
        z = minv * res
        rz_new = _dot(res, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    u[void] = best_x
    # report the true residual of the returned iterate, not the recursive one
    true_res = _norm(S.apply(u)[void]) / r0
    return u, k, true_res, trace


def identity_stencil(height: int, width: int) -> StencilField:
    return assemble_stencil(TensorField.identity(height, width))


def fill(
    dsm: Grid,
    mask: VoidMask | None = None,
    guide: GuideImage | None = None,
    edge: EdgeParams | None = None,
    init_mode: Literal["median", "pyramid"] = "median",
    cfg: SolveConfig | None = None,
    tensor: TensorField | None = None,
) -> FillResult:
    """Guided void filling: coarse init, guide tensor, stencil, steady-state solve.

    Voids are the union of ``mask`` and the nodata cells of ``dsm``. Elevations
    are min-max normalized to [0, 1] for the solve and mapped back afterwards;
    known cells of the output are copied from ``dsm`` unchanged. Without a
    guide the diffusion tensor is the identity. ``tensor`` overrides the
    guide-derived tensor (used for dumps and experiments).
    """
    from .coarse import median_init, pyramid_init

    cfg = cfg or SolveConfig()
    void = VoidMask(dsm.nodata)
    if mask is not None:
        _check_shape(dsm.shape, mask.shape)
        void = void | mask
    if void.bits.all():
        raise AllVoid("every cell is void; nothing to diffuse from")
    if guide is not None and guide.shape != dsm.shape:
        raise DimensionMismatch(f"guide is {guide.shape}, dsm is {dsm.shape}")
    if init_mode not in ("median", "pyramid"):
        raise ValueError(f"init_mode must be 'median' or 'pyramid', got {init_mode!r}")

    known = ~void.bits
    masked = dsm.values.copy()
    masked[void.bits] = dsm.nodata_value
    masked_grid = dsm.with_values(masked)

    kv = dsm.values[known]
    if kv.min() == kv.max():
        # constant Dirichlet data: the steady state is that constant
        out = dsm.values.copy()
        out[void.bits] = kv[0]
        return FillResult(dsm.with_values(out), 0, 0.0, cfg.method, True, (0.0,))

    norm_grid, params = normalize(masked_grid, "unit")
    if init_mode == "median":
        init = median_init(norm_grid, void)
    else:
        init = pyramid_init(norm_grid, void)

    if tensor is None:
        tensor = guide_tensor(guide, edge) if guide is not None else TensorField.identity(*dsm.shape)
    elif tensor.shape != dsm.shape:
        raise DimensionMismatch(f"tensor is {tensor.shape}, dsm is {dsm.shape}")
    S = assemble_stencil(tensor, cfg.nonneg_stencil)
    result = solve_steady_state(init, void, S, cfg)

    out = denormalize(result.filled, params).values.copy()
    out[known] = dsm.values[known]
    return FillResult(
        dsm.with_values(out), result.iterations, result.final_residual, result.method, result.converged, result.trace
    )
