"""
Command-line interface: ``voidfill {maskgen,fill,eval,bench,scenegen}``.

Exit codes: 0 ok, 2 usage, 3 solver did not converge (output still
written), 4 I/O or data error.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import idw_fill, spline_fill
from .coarse import pyramid_init
from .errors import DimensionMismatch, VoidFillError
from .masks import (
    LARGE_BAND,
    SMALL_BAND,
    PerlinParams,
    StrokeParams,
    irregular_mask,
    perlin_mask,
    random_perlin_params,
    rect_mask,
    sample_mask_with_coverage,
    sidecar,
)
from .metrics import CSV_HEADER, evaluate
from .raster import Grid, VoidMask, format_float, load_grid, load_guide, load_mask, save_grid, save_pnm
from .scenes import SceneSpec, make_scene, save_scene
from .solver import SolveConfig, fill
from .tensor import EdgeParams, dump_tensor, guide_tensor

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_DATA = 0, 2, 3, 4

METHODS = ("spline", "idw", "harmonic", "dfilled")
SUITES = {"small": SMALL_BAND, "large": LARGE_BAND}

# Diffusion budget shared by every diffusion arm of the bench: a fixed number
# of explicit time steps, so the initialization still matters (see README).
BENCH_SOLVER = "explicit"
BENCH_ITERS = 500


class UsageError(Exception):
    pass


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not 0 <= lo < hi <= 1:
        raise argparse.ArgumentTypeError("coverage band must satisfy 0 <= lo < hi <= 1")
    return lo, hi


def _int_range(text: str) -> tuple[int, int]:
    try:
        parts = [int(t) for t in text.split(":")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return parts[0], parts[1]


def _float_range(text: str) -> tuple[float, float]:
    try:
        parts = [float(t) for t in text.split(":")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return parts[0], parts[1]


def _rect(text: str) -> tuple[int, int, int, int]:
    try:
        x0, y0, x1, y1 = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x0,y0,x1,y1, got {text!r}") from None
    return x0, y0, x1, y1


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


# ---------------------------------------------------------------------------
# Parser


def _add_solver_flags(p: argparse.ArgumentParser, method: str = "cg", tol: float = 1e-6) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--solver", choices=("explicit", "jacobi", "cg"), default=method)
    g.add_argument("--dt", type=float, default=0.24)
    g.add_argument("--tol", type=float, default=tol, help="relative residual target; 0 runs exactly --max-iters")
    g.add_argument("--max-iters", type=int, default=None)
    g.add_argument("--nonneg-stencil", action="store_true")


def _add_edge_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("guide tensor")
    d = EdgeParams()
    g.add_argument("--sigma-g", type=float, default=d.sigma_g)
    g.add_argument("--rho", type=float, default=d.rho)
    g.add_argument("--lambda-c", type=float, default=d.lambda_c)
    g.add_argument("--alpha", type=float, default=d.alpha)


def _add_baseline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("baselines")
    g.add_argument("--idw-power", type=float, default=2.0)
    g.add_argument("--idw-k", type=int, default=16)
    g.add_argument("--spline-samples", type=int, default=800)
    g.add_argument("--spline-ring", type=float, default=16.0)
    g.add_argument("--spline-reg", type=float, default=None)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="voidfill", description="Guided void filling for elevation rasters.")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["maskgen"] = sub.add_parser("maskgen", help="write a synthetic void mask (P5) and a params sidecar")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--kind", choices=("perlin", "irregular", "rect"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coverage", type=_band, default=None, help="perlin: accepted coverage band lo:hi")
    p.add_argument("--rect", type=_rect, action="append", default=None, help="rect: x0,y0,x1,y1 inclusive")
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--octaves", type=int, default=None)
    p.add_argument("--persistence", type=float, default=None)
    p.add_argument("--lacunarity", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--n-strokes", type=_int_range, default=(1, 4))
    p.add_argument("--brush-width", type=_float_range, default=(5.0, 20.0))
    p.add_argument("--n-vertices", type=_int_range, default=(2, 6))
    p.add_argument("--n-rects", type=_int_range, default=(0, 2))
    p.add_argument("--out", required=True)

    p = subs["fill"] = sub.add_parser("fill", help="fill the voids of a DSM")
    p.add_argument("--dsm", required=True)
    p.add_argument("--mask", default=None, help="P5 mask, nonzero = void; default: nodata cells")
    p.add_argument("--guide", default=None)
    p.add_argument("--method", choices=METHODS, default="dfilled")
    p.add_argument("--init", choices=("median", "pyramid"), default="median")
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None, help="run-report path (default: <out>.report.txt)")
    p.add_argument("--dump-tensor", default=None, metavar="PREFIX")
    p.add_argument("--trace", default=None, help="write residual history CSV here")
    _add_solver_flags(p)
    _add_edge_flags(p)
    _add_baseline_flags(p)

    p = subs["eval"] = sub.add_parser("eval", help="print the metrics CSV row of a prediction")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--scene", default="")
    p.add_argument("--mask-label", default="")
    p.add_argument("--method", default="")
    p.add_argument("--no-header", action="store_true")

    p = subs["bench"] = sub.add_parser("bench", help="method grid over synthetic scenes and mask suites")
    p.add_argument("--scenes", type=int, default=20)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="CSV path, '-' for standard output")
    p.add_argument("--summary", default=None, help="summary text path (default: standard error)")
    p.add_argument("--jobs", type=int, default=1)
    _add_solver_flags(p, method=BENCH_SOLVER, tol=0.0)
    p.set_defaults(max_iters=BENCH_ITERS)
    _add_edge_flags(p)
    _add_baseline_flags(p)

    p = subs["scenegen"] = sub.add_parser("scenegen", help="write a synthetic truth DSM (.asc) and guide (.ppm)")
    d = SceneSpec()
    p.add_argument("--size", type=int, default=d.size)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-buildings", type=int, default=d.n_buildings)
    p.add_argument("--building-height", type=_float_range, default=d.building_height)
    p.add_argument("--relief", type=float, default=d.relief_amplitude)
    p.add_argument("--cellsize", type=float, default=d.cellsize)
    p.add_argument("--out-prefix", required=True)

    for p in subs.values():
        p.add_argument("--config", default=None, help="key=value file; command-line flags take precedence")
    return parser, subs


def read_config(path: str) -> dict[str, str]:
    """``key=value`` lines; ``#`` starts a comment; keys use flag spelling with or without dashes."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, conf: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in conf.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = _bool(value)
        elif isinstance(action, argparse._AppendAction):
            defaults[key] = [action.type(v) for v in value.split(";")]
        else:
            try:
                defaults[key] = action.type(value) if action.type else value
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            if action.choices is not None and defaults[key] not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
        # a config value satisfies a required flag
        action.required = False
    sub.set_defaults(**defaults)


def parse_args(argv: list[str] | None) -> argparse.Namespace:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is not None and argv and argv[0] in subs:
        _apply_config(subs[argv[0]], read_config(known.config))
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# Commands


def _solve_config(a: argparse.Namespace) -> SolveConfig:
    return SolveConfig(method=a.solver, dt=a.dt, tol=a.tol, max_iters=a.max_iters, nonneg_stencil=a.nonneg_stencil)


def _edge_params(a: argparse.Namespace) -> EdgeParams:
    return EdgeParams(sigma_g=a.sigma_g, rho=a.rho, lambda_c=a.lambda_c, alpha=a.alpha)


def cmd_maskgen(a: argparse.Namespace) -> int:
    size = a.size
    if size < 1:
        raise UsageError("--size must be positive")
    info: dict = {"kind": a.kind, "size": size, "seed": a.seed}
    if a.kind == "rect":
        if not a.rect:
            raise UsageError("--kind rect needs at least one --rect x0,y0,x1,y1")
        m = rect_mask(size, a.rect)
        info["rects"] = ";".join(",".join(str(v) for v in r) for r in a.rect)
    elif a.kind == "irregular":
        s = StrokeParams(
            n_strokes=a.n_strokes, brush_width=a.brush_width, n_vertices=a.n_vertices, n_rects=a.n_rects, seed=a.seed
        )
        m = irregular_mask(size, s)
        info.update({k: v for k, v in vars(s).items() if k != "seed"})
    else:
        p = random_perlin_params(a.seed)
        overrides = {
            k: getattr(a, k)
            for k in ("scale", "octaves", "persistence", "lacunarity", "threshold")
            if getattr(a, k) is not None
        }
        p = PerlinParams(**{**vars(p), **overrides})
        if a.coverage is not None:
            m = sample_mask_with_coverage(size, p, a.coverage, rng_seed=a.seed)
            info["coverage_band"] = f"{a.coverage[0]!r}:{a.coverage[1]!r}"
        else:
            m = perlin_mask(size, p, rng_seed=a.seed)
        info.update(vars(p))
    info["coverage"] = m.void_fraction
    save_pnm(a.out, m)
    Path(a.out + ".params").write_text(sidecar(info))
    return EXIT_OK


def run_method(
    method: str,
    dsm: Grid,
    mask: VoidMask | None,
    guide,
    init: str,
    cfg: SolveConfig,
    edge: EdgeParams,
    a: argparse.Namespace,
):
    """Grid plus solver statistics (``None`` for non-iterative methods)."""
    if method == "idw":
        return idw_fill(dsm, mask, power=a.idw_power, k=a.idw_k), None
    if method == "spline":
        return spline_fill(dsm, mask, max_samples=a.spline_samples, ring=a.spline_ring, reg=a.spline_reg), None
    if method == "harmonic":
        res = fill(dsm, mask, guide=None, init_mode="median", cfg=cfg)
        return res.filled, res
    res = fill(dsm, mask, guide=guide, edge=edge, init_mode=init, cfg=cfg)
    return res.filled, res


def cmd_fill(a: argparse.Namespace) -> int:
    dsm = load_grid(a.dsm)
    mask = load_mask(a.mask) if a.mask else None
    guide = load_guide(a.guide) if a.guide else None
    cfg, edge = _solve_config(a), _edge_params(a)
    if guide is not None and guide.shape != dsm.shape:
        raise DimensionMismatch(f"guide is {guide.shape}, dsm is {dsm.shape}")

    t0 = time.perf_counter()
    filled, res = run_method(a.method, dsm, mask, guide, a.init, cfg, edge, a)
    wall = time.perf_counter() - t0
    save_grid(a.out, filled)

    if a.dump_tensor and a.method == "dfilled" and guide is not None:
        dump_tensor(guide_tensor(guide, edge), a.dump_tensor, like=dsm)
    if a.trace and res is not None:
        Path(a.trace).write_text(res.trace_csv())

    n_void = int(np.count_nonzero(dsm.nodata | (mask.bits if mask is not None else False)))
    lines = [
        f"method={a.method}",
        f"dsm={a.dsm}",
        f"mask={a.mask or ''}",
        f"guide={a.guide or ''}",
        f"void_pixels={n_void}",
    ]
    if a.method == "dfilled":
        lines.append(f"init={a.init}")
        lines += [f"{k}={format_float(v)}" for k, v in vars(edge).items()]
    if a.method in ("dfilled", "harmonic"):
        lines += [
            f"solver={cfg.method}",
            f"dt={format_float(cfg.dt)}",
            f"tol={format_float(cfg.tol)}",
            f"max_iters={cfg.iteration_limit}",
            f"nonneg_stencil={cfg.nonneg_stencil}",
            f"iterations={res.iterations}",
            f"final_residual={res.final_residual!r}",
            f"converged={res.converged}",
        ]
    elif a.method == "idw":
        lines += [f"power={format_float(a.idw_power)}", f"k={a.idw_k}"]
    else:
        lines += [f"max_samples={a.spline_samples}", f"ring={format_float(a.spline_ring)}", f"reg={a.spline_reg}"]
    lines.append(f"wall_time_s={wall:.3f}")
    Path(a.report or a.out + ".report.txt").write_text("\n".join(lines) + "\n")

    if res is not None and not res.converged:
        print(
            f"voidfill: solver did not converge: residual {res.final_residual:.3g} > tol {cfg.tol:g} "
            f"after {res.iterations} iterations; best iterate written",
            file=sys.stderr,
        )
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_eval(a: argparse.Namespace) -> int:
    pred, truth, mask = load_grid(a.pred), load_grid(a.truth), load_mask(a.mask)
    report = evaluate(pred, truth, mask)
    if not a.no_header:
        print(CSV_HEADER)
    print(report.to_csv_row(a.scene, a.mask_label, a.method))
    return EXIT_OK


def cmd_scenegen(a: argparse.Namespace) -> int:
    spec = SceneSpec(
        size=a.size,
        terrain_seed=a.seed,
        n_buildings=a.n_buildings,
        building_height=a.building_height,
        relief_amplitude=a.relief,
        cellsize=a.cellsize,
    )
    truth, guide = make_scene(spec)
    save_scene(a.out_prefix, truth, guide)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Bench

_MASK64 = (1 << 64) - 1


def mask_seed(seed: int, scene: int, suite: str) -> int:
    """Seed of the Perlin mask for one (scene, suite) cell of the bench."""
    return (seed * 1_000_003 + scene * 2 + (1 if suite == "large" else 0) + 1) & _MASK64


def bench_scene(a: argparse.Namespace, k: int) -> list[tuple[str, str, str, object, float]]:
    """Rows ``(scene, suite, method, MetricsReport, wall seconds)`` for scene index ``k``."""
    cfg, edge = _solve_config(a), _edge_params(a)
    spec = SceneSpec(size=a.size, terrain_seed=(a.seed + k) & _MASK64)
    truth, guide = make_scene(spec)
    name = f"scene{k:03d}"
    rows = []
    for suite, band in SUITES.items():
        ms = mask_seed(a.seed, k, suite)
        mask = sample_mask_with_coverage(a.size, random_perlin_params(ms), band, rng_seed=ms)
        arms = [(m, m) for m in METHODS]
        if suite == "large":
            arms += [("dfilled:init-only", "init-only"), ("dfilled:diffusion-only", "diffusion-only")]
        for label, arm in arms:
            t0 = time.perf_counter()
            if arm == "init-only":
                pred = pyramid_init(truth, mask)
            elif arm == "diffusion-only":
                pred = fill(truth, mask, guide=guide, edge=edge, init_mode="median", cfg=cfg).filled
            elif arm == "dfilled":
                pred = fill(truth, mask, guide=guide, edge=edge, init_mode="pyramid", cfg=cfg).filled
            else:
                pred, _ = run_method(arm, truth, mask, guide, "median", cfg, edge, a)
            wall = time.perf_counter() - t0
            rows.append((name, suite, label, evaluate(pred, truth, mask), wall))
    return rows


@dataclass
class _BenchJob:
    args: argparse.Namespace

    def __call__(self, k: int):
        return bench_scene(self.args, k)


def summarize(rows) -> str:
    cells: dict[tuple[str, str], list] = {}
    for _, suite, method, rep, wall in rows:
        cells.setdefault((suite, method), []).append((rep, wall))
    out = ["suite,method,n,rmse_void_mean,rmse_void_std,nmad_void_mean,nmad_void_std,medae_void_mean,medae_void_std,wall_s_mean"]
    for (suite, method), items in cells.items():
        fields = [suite, method, str(len(items))]
        for attr in ("rmse_void", "nmad_void", "medae_void"):
            v = np.array([getattr(r, attr) for r, _ in items])
            fields += [f"{v.mean():.4f}", f"{v.std():.4f}"]
        fields.append(f"{np.mean([w for _, w in items]):.3f}")
        out.append(",".join(fields))
    return "\n".join(out) + "\n"


def cmd_bench(a: argparse.Namespace) -> int:
    if a.scenes < 1 or a.size < 32 or a.jobs < 1:
        raise UsageError("--scenes and --jobs must be positive and --size at least 32")
    if a.jobs == 1:
        per_scene = [bench_scene(a, k) for k in range(a.scenes)]
    else:
        with ProcessPoolExecutor(max_workers=a.jobs) as ex:
            per_scene = list(ex.map(_BenchJob(a), range(a.scenes)))  # map keeps scene order
    rows = [r for scene in per_scene for r in scene]
    text = CSV_HEADER + "\n" + "".join(rep.to_csv_row(s, suite, m) + "\n" for s, suite, m, rep, _ in rows)
    if a.out == "-":
        sys.stdout.write(text)
    else:
        Path(a.out).write_text(text)
    summary = summarize(rows)
    if a.summary:
        Path(a.summary).write_text(summary)
    else:
        sys.stderr.write(summary)
    return EXIT_OK


COMMANDS = {"maskgen": cmd_maskgen, "fill": cmd_fill, "eval": cmd_eval, "bench": cmd_bench, "scenegen": cmd_scenegen}


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse: --help (0) or usage error (2)
        return int(exc.code or 0)
    except (UsageError, OSError) as exc:
        print(f"voidfill: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, UsageError) else EXIT_DATA
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"voidfill: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, VoidFillError) as exc:
        print(f"voidfill: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:  # invalid parameter values, e.g. negative sigma
        print(f"voidfill: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
