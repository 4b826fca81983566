"""Command-line entry point: ``nbtsp solve|exact|nn|bench|render|ljf``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import bench, ljf
from .baselines import (
    BRUTE_FORCE_MAX,
    exact_brute_force,
    exact_held_karp,
    nearest_neighbor,
    nearest_neighbor_best,
)
from .errors import NbtspError
from .instances import (
    CityInstance,
    bundled_names,
    gen_grid,
    gen_random_uniform,
    load_named,
    parse_tsplib,
)
from .render import RenderSpec, render_tour, write_trace_svgs
from .sim import (
    CONFIG_FIELDS,
    GRID_BUBBLE_CONFIG,
    SimConfig,
    Variant,
    config_with,
    format_config,
    parse_config_text,
    read_trace_csv,
    run,
    write_trace_csv,
)
from .tour import format_tour, parse_tour, percent_error

DEFAULT_SEED = 0
PRESETS = {"default": SimConfig(), "grid": GRID_BUBBLE_CONFIG}
SWEEP_SIZES = (8, 9, 10, 11, 12)


class CliError(Exception):
    pass


def _grid_spec(text):
    try:
        rows, cols = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC such as 4x4, got {text!r}") from None
    return rows, cols


def _add_source(p):
    p.add_argument("instance", nargs="?",
                   help="TSPLIB file (EUC_2D or ATT), or a bundled name when no such file exists")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid", type=_grid_spec, metavar="RxC", help="unit lattice instance")
    g.add_argument("--random", type=int, metavar="N", help="N uniform cities on the unit square")
    g.add_argument("--named", metavar="NAME", help="bundled instance, e.g. att48")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"seed for generated instances and simulation jitter (default {DEFAULT_SEED})")
    p.add_argument("--jitter-duplicates", action="store_true",
                   help="separate repeated coordinates by 1e-9 x diameter instead of failing")


def _load_source(args) -> CityInstance:
    chosen = [args.instance is not None, args.grid is not None, args.random is not None,
              args.named is not None]
    if sum(chosen) != 1:
        raise CliError("give exactly one of: a TSPLIB path, --grid, --random, --named")
    if args.grid is not None:
        return gen_grid(*args.grid)
    if args.random is not None:
        return gen_random_uniform(args.random, args.seed)
    if args.named is not None:
        return load_named(args.named)
    path = Path(args.instance)
    if not path.exists() and args.instance in bundled_names():
        return load_named(args.instance)
    text = path.read_text()
    return parse_tsplib(text, jitter_seed=args.seed if args.jitter_duplicates else None)


def _flag(name):
    return "--" + name.replace("_", "-")


def _add_config(p):
    p.add_argument("--preset", choices=sorted(PRESETS), default="default",
                   help="starting config; 'grid' is tuned for square grid instances")
    p.add_argument("--config", metavar="FILE", help="key=value config file applied before flags")
    g = p.add_argument_group("simulation config (flags mirror the config field names)")
    defaults = SimConfig()
    for name in CONFIG_FIELDS:
        if name == "variant":
            continue
        value = getattr(defaults, name)
        g.add_argument(_flag(name), dest=f"cfg_{name}", metavar="V",
                       help=f"default {'auto' if value is None else value}")


def _config_from(args, variant=None):
    base = PRESETS[args.preset]
    if args.config:
        base = parse_config_text(Path(args.config).read_text(), base)
    overrides = {name: getattr(args, f"cfg_{name}") for name in CONFIG_FIELDS
                 if name != "variant" and getattr(args, f"cfg_{name}", None) is not None}
    cfg = config_with(base, overrides)
    if variant is not None:
        cfg = replace(cfg, variant=Variant.parse(variant))
    return cfg


def _reference(inst):
    if inst.optimal_cost is not None:
        return inst.optimal_cost
    if inst.n <= BRUTE_FORCE_MAX:
        return exact_held_karp(inst).cost
    return None


def cmd_solve(args, out):
    inst = _load_source(args)
    cfg = _config_from(args, args.variant)
    if args.trace_out or args.frames_dir:
        if cfg.snapshot_stride == 0:
            cfg = replace(cfg, snapshot_stride=max(1, args.stride))
    res = run(inst, cfg, args.seed)
    ref = _reference(inst)
    print(f"instance {inst.name} ({inst.n} cities), variant {cfg.variant.value}", file=out)
    print(f"cost {res.tour.cost:.3f}", file=out)
    if ref is not None:
        print(f"optimal {ref:.3f}", file=out)
        print(f"percent error {percent_error(res.tour.cost, ref):.3f}", file=out)
    print(f"steps {res.steps}  converged {str(res.converged).lower()}  "
          f"wall clock {res.wall_clock_s:.2f}s", file=out)
    print("tour " + " ".join(map(str, res.tour.order)), file=out)
    if args.tour_out:
        Path(args.tour_out).write_text(format_tour(res.tour))
    if args.report_out:
        row = bench.RunReport(inst.name, inst.n, cfg.variant.value, args.seed, res.tour.cost,
                              ref, None if ref is None else percent_error(res.tour.cost, ref),
                              res.wall_clock_s, res.converged)
        Path(args.report_out).write_text(bench.emit_reports([row]))
    if args.trace_out:
        with open(args.trace_out, "w") as fh:
            write_trace_csv(res.trace, fh)
    if args.svg_out:
        Path(args.svg_out).write_text(render_tour(inst, res.tour, title=f"cost {res.tour.cost:.3f}"))
    if args.frames_dir:
        write_trace_svgs(res.trace, args.frames_dir)
    return 0


def cmd_exact(args, out):
    inst = _load_source(args)
    tour = exact_brute_force(inst) if args.brute_force else exact_held_karp(inst)
    print(f"{tour.cost:.3f}", file=out)
    if args.verbose:
        print("tour " + " ".join(map(str, tour.order)), file=out)
    if args.tour_out:
        Path(args.tour_out).write_text(format_tour(tour))
    return 0


def cmd_nn(args, out):
    inst = _load_source(args)
    tour = nearest_neighbor_best(inst) if args.best else nearest_neighbor(inst, args.start)
    print(f"{tour.cost:.3f}", file=out)
    if args.verbose:
        print("tour " + " ".join(map(str, tour.order)), file=out)
    if args.tour_out:
        Path(args.tour_out).write_text(format_tour(tour))
    return 0


def _variant_list(text):
    if text == "all":
        return list(bench.NAMED_VARIANTS)
    return [Variant.parse(v) for v in text.split(",")]


def cmd_bench(args, out):
    cfg = _config_from(args, args.variant)
    if args.runs < 1:
        raise CliError(f"--runs must be at least 1, got {args.runs}")
    if args.named:
        insts = [load_named(name) for name in args.named]
        reports = bench.experiment_named(insts, _variant_list(args.variants), cfg,
                                         runs=args.runs, base_seed=args.seed)
        summary = bench.summarize(reports, "instance", not args.exclude_nonconverged)
    else:
        sizes = args.n_values or list(SWEEP_SIZES)
        reports, _ = bench.experiment_random(
            sizes, args.runs, args.seed, cfg, brute_force=args.brute_force,
            cross_check=args.cross_check, nn_best=args.nn_best,
        )
        summary = bench.summarize(reports, "n", not args.exclude_nonconverged)
    csv_text = bench.emit_reports(reports)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        out.write(csv_text)
    if args.summary_out:
        Path(args.summary_out).write_text(bench.emit_summary(summary))
    out.write("\n" + bench.format_table(summary))
    return 0


def cmd_render(args, out):
    spec = RenderSpec(width=args.width, height=args.height, stride=args.stride)
    if args.trace:
        trace = read_trace_csv(Path(args.trace).read_text())
        paths = write_trace_svgs(trace, args.out, spec)
        print(f"wrote {len(paths)} frames to {args.out}", file=out)
        return 0
    if not args.tour:
        raise CliError("render needs --tour (with an instance) or --trace")
    inst = _load_source(args)
    tour = parse_tour(Path(args.tour).read_text())
    Path(args.out).write_text(render_tour(inst, tour, spec, title=f"cost {tour.cost:.3f}"))
    print(f"wrote {args.out}", file=out)
    return 0


def cmd_ljf(args, out):
    def emit(**kv):
        for k, v in kv.items():
            print(f"{k}={v!r}", file=out)

    if args.canonical:
        G, H, q, p = args.canonical
        shape, r_infl = ljf.shape_from_canonical(ljf.LjfCanonical(G, H, q, p))
        emit(L=shape.L, r_min=shape.r_min, M=shape.M, delta=shape.delta, r_infl=r_infl)
        if args.r is not None:
            emit(F=ljf.force_eval(ljf.LjfCanonical(G, H, q, p), args.r))
    elif args.shape:
        c = ljf.canonical_from_shape(ljf.LjfShape(*args.shape))
        emit(G=c.G, H=c.H, q=c.q, p=c.p)
        if args.r is not None:
            emit(F=ljf.force_eval(c, args.r))
    elif args.r_eps_for:
        L, r_min, eps = args.r_eps_for
        emit(R_eps=ljf.solve_R_eps(L, r_min, eps))
    elif args.solve_delta:
        L, r_min, M, eps, r_eps = args.solve_delta
        emit(delta=ljf.solve_delta(L, r_min, M, eps, r_eps))
    else:
        raise CliError("ljf needs one of --canonical, --shape, --r-eps-for, --solve-delta")
    return 0


def build_parser():
    epilog = "default simulation config:\n" + "".join(
        "  " + line + "\n" for line in format_config(SimConfig()).splitlines()
    )
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="nbtsp", description="N-body heuristic for the Euclidean travelling salesman problem",
        epilog=epilog, formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the N-body simulation", epilog=epilog, formatter_class=fmt)
    _add_source(p)
    p.add_argument("--variant", default=None,
                   help="simple|pressure|bubble|pressure+bubble (default from config)")
    _add_config(p)
    p.add_argument("--tour-out", metavar="FILE")
    p.add_argument("--report-out", metavar="CSV")
    p.add_argument("--trace-out", metavar="CSV", help="snapshot trace as CSV")
    p.add_argument("--svg-out", metavar="SVG", help="picture of the final tour")
    p.add_argument("--frames-dir", metavar="DIR", help="one SVG per snapshot")
    p.add_argument("--stride", type=int, default=500,
                   help="snapshot stride when a trace is requested and the config has none")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact", help="exact optimum (Held-Karp or brute force)")
    _add_source(p)
    p.add_argument("--brute-force", action="store_true",
                   help=f"enumerate all tours (at most {BRUTE_FORCE_MAX} cities)")
    p.add_argument("--tour-out", metavar="FILE")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("nn", help="nearest-neighbour tour")
    _add_source(p)
    p.add_argument("--start", type=int, default=0, help="start city (default 0)")
    p.add_argument("--best", action="store_true", help="best over all start cities")
    p.add_argument("--tour-out", metavar="FILE")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_nn)

    p = sub.add_parser("bench", help="random-instance sweep or named-instance comparison",
                       epilog=epilog, formatter_class=fmt)
    p.add_argument("--random-sweep", "--table1", dest="random_sweep", action="store_true",
                   help=f"random sweep over n = {','.join(map(str, SWEEP_SIZES))} (the default mode)")
    p.add_argument("--n-values", type=int, nargs="+", metavar="N")
    p.add_argument("--named", nargs="+", metavar="NAME", help="compare variants on bundled instances")
    p.add_argument("--variants", default="all",
                   help="comma list or 'all' (simple,pressure,bubble)")
    p.add_argument("--variant", default=None, help="N-body variant for the random sweep")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="base seed")
    p.add_argument("--brute-force", action="store_true", help="brute-force exact solver")
    p.add_argument("--cross-check", action="store_true", help="run both exact solvers")
    p.add_argument("--nn-best", action="store_true", help="nearest neighbour from every start")
    p.add_argument("--exclude-nonconverged", action="store_true")
    p.add_argument("--out", metavar="CSV", help="raw rows (default: standard output)")
    p.add_argument("--summary-out", metavar="CSV")
    _add_config(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", help="SVG of a tour file or a trace CSV")
    _add_source(p)
    p.add_argument("--tour", metavar="FILE", help="tour file written by solve/exact/nn")
    p.add_argument("--trace", metavar="CSV", help="trace CSV written by solve --trace-out")
    p.add_argument("--out", required=True, help="SVG path (tour) or directory (trace)")
    p.add_argument("--width", type=int, default=600)
    p.add_argument("--height", type=int, default=600)
    p.add_argument("--stride", type=int, default=1, help="render every k-th snapshot")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("ljf", help="force-function conversions and solvers")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--canonical", type=float, nargs=4, metavar=("G", "H", "Q", "P"))
    g.add_argument("--shape", type=float, nargs=4, metavar=("L", "R_MIN", "M", "DELTA"))
    g.add_argument("--r-eps-for", type=float, nargs=3, metavar=("L", "R_MIN", "EPS"))
    g.add_argument("--solve-delta", type=float, nargs=5, metavar=("L", "R_MIN", "M", "EPS", "R_EPS"))
    p.add_argument("--r", type=float, help="also evaluate F at this distance")
    p.set_defaults(func=cmd_ljf)
    return parser


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except (NbtspError, CliError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
