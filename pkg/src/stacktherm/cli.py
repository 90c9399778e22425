"""Command-line front end: ``stacktherm simulate|sweep|render|validate``.

Exit status: 0 success, 1 input/validation error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import dtm_from_ini, file_resolver, read_ini, stack_from_ini
from .dtm import DtmPolicy
from .errors import ConfigError, SolverError, StackThermError, SweepError
from .grid import build_grid_model, stack_sample
from .microchannel import layout_channels
from .report import (emit_csv_grid, emit_ppm_heatmap, render_csv_to_ppm,
                     result_block_stats, run_summary, write_block_stats)
from .solver import SolveSettings, steady_solve, transient_run
from .sweep import parse_sweep_config, run_sweep, write_ranking

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2

# used by --dtm on when the config has no [dtm] section
DEFAULT_DTM = DtmPolicy(trigger_temp=358.15, release_temp=353.15, throttle_factor=0.5)


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected MIN:MAX in Celsius") from None
    if not hi > lo:
        raise argparse.ArgumentTypeError("MAX must exceed MIN")
    return lo, hi


def _grid(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected RxC, e.g. 64x64") from None
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be >= 1")
    return rows, cols


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; exit 2 is reserved for solver failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stacktherm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="steady or transient run of one stack")
    sim.add_argument("config")
    sim.add_argument("--mode", choices=("steady", "transient"), default="steady")
    sim.add_argument("--out", required=True)
    sim.add_argument("--dtm", choices=("on", "off"), default="off")
    sim.add_argument("--range", type=_range, help="fixed heat-map scale MIN:MAX (Celsius)")
    sim.add_argument("--grid", type=_grid, help="grid override RxC")
    sim.add_argument("--power-stat", choices=("max", "mean"), default="max",
                     help="per-block trace reduction for steady mode")

    sw = sub.add_parser("sweep", help="rank stack orderings and cooling options")
    sw.add_argument("config")
    sw.add_argument("--out", required=True)
    sw.add_argument("--grid", type=_grid)
    sw.add_argument("--heatmaps", action="store_true", help="write per-candidate heat maps")
    sw.add_argument("--threads", type=int, help="override STACKTHERM_THREADS")

    ren = sub.add_parser("render", help="turn a CSV grid into a PPM heat map")
    ren.add_argument("csv")
    ren.add_argument("ppm")
    ren.add_argument("--range", type=_range)

    val = sub.add_parser("validate", help="parse and check a config")
    val.add_argument("config")
    return parser


def _fail(code: int, message: str) -> int:
    print(f"stacktherm: {message}", file=sys.stderr)
    return code


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror or exc}", source=path) from None


def _load(path: str, grid=None):
    cp = read_ini(_read(path), path)
    stack = stack_from_ini(cp, file_resolver(Path(path).parent), source=path)
    if grid is not None:
        stack = replace(stack, grid_rows=grid[0], grid_cols=grid[1])
    return stack, dtm_from_ini(cp, path)


def _write_fields(model, field, out: Path, value_range, block_stats):
    out.mkdir(parents=True, exist_ok=True)
    for l in range(model.num_layers):
        with open(out / f"layer{l}.csv", "w", newline="") as fh:
            emit_csv_grid(model, field, l, fh)
        with open(out / f"layer{l}.ppm", "w", newline="") as fh:
            emit_ppm_heatmap(model, field, l, fh, value_range)
    with open(out / "blocks.csv", "w", newline="") as fh:
        write_block_stats(block_stats, fh)


def cmd_simulate(args) -> int:
    try:
        stack, policy = _load(args.config, args.grid)
        model = build_grid_model(stack)
    except StackThermError as exc:
        return _fail(EXIT_INPUT, str(exc))

    settings = SolveSettings()
    if args.dtm == "on":
        if args.mode != "transient":
            print("stacktherm: --dtm only affects transient runs", file=sys.stderr)
        settings = replace(settings, dtm=policy or DEFAULT_DTM)
    try:
        if args.mode == "steady":
            result = steady_solve(model, stack_sample(stack, statistic=args.power_stat),
                                  settings)
        else:
            result = transient_run(model, settings=settings)
    except SolverError as exc:
        return _fail(EXIT_SOLVER, f"solver failed: {exc}")
    except ValueError as exc:
        return _fail(EXIT_INPUT, str(exc))

    out = Path(args.out)
    try:
        if result.is_steady:
            _write_fields(model, result.final, out, args.range, result_block_stats(result))
        else:
            for step in range(len(result.times)):
                _write_fields(model, result.temperatures[step], out / f"step{step:04d}",
                              args.range, result_block_stats(result, step))
            if settings.dtm is not None:
                with open(out / "dtm_log.csv", "w", newline="") as fh:
                    fh.write("time_s,layer,block,action\n")
                    for e in result.dtm_log:
                        fh.write(f"{e.time:.9g},{e.block[0]},{e.block[1]},{e.action}\n")
        (out / "summary.txt").write_text(run_summary(result))
    except OSError as exc:
        return _fail(EXIT_INPUT, f"cannot write output: {exc}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec, base = parse_sweep_config(_read(args.config),
                                        file_resolver(Path(args.config).parent), args.config)
        if args.grid is not None:
            base = replace(base, grid_rows=args.grid[0], grid_cols=args.grid[1])
        out = Path(args.out)
        ranked = run_sweep(spec, base, workers=args.threads,
                           heatmap_dir=out / "heatmaps" if args.heatmaps else None)
    except (StackThermError, OSError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ranking.csv", "w", newline="") as fh:
        write_ranking(ranked, fh)
    failed = [c for c in ranked if c.status != "ok"]
    for c in failed:
        print(f"stacktherm: candidate {c.ordering_str} @ {c.flow_rate:g}: {c.status}",
              file=sys.stderr)
    if ranked and len(failed) == len(ranked):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        text = _read(args.csv)
        Path(args.ppm).parent.mkdir(parents=True, exist_ok=True)
        with open(args.ppm, "w", newline="") as fh:
            render_csv_to_ppm(text, fh, args.range, source=args.csv)
    except ConfigError as exc:
        return _fail(EXIT_INPUT, str(exc))
    except OSError as exc:
        return _fail(EXIT_INPUT, f"cannot write {args.ppm}: {exc}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        text = _read(args.config)
        cp = read_ini(text, args.config)
        has_layers = any(s.startswith("layer.") for s in cp.sections())
        if has_layers or not cp.has_section("sweep"):
            stack, _ = _load(args.config)
            for layer in stack.layers:
                if layer.kind == "microchannel":
                    layout_channels(layer, stack.grid_rows, stack.grid_cols,
                                    stack.die_width, stack.die_height)
        if cp.has_section("sweep"):
            parse_sweep_config(text, file_resolver(Path(args.config).parent), args.config)
    except (StackThermError, SweepError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    print(f"{args.config}: ok")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep,
            "render": cmd_render, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
