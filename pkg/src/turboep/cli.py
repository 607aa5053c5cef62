"""Command-line entry point: `turboep simulate` and `turboep plot`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .channel import save_taps


def _parse_ebn0(text: str) -> list[float]:
    """Accept 'start:step:stop' (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("grid must be start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        grid = []
        value = start
        while value <= stop + 1e-9:
            grid.append(round(value, 9))
            value += step
        return grid
    return [float(p) for p in text.split(",") if p]


def _load_config(path: str) -> dict:
    """Flat key=value file; '#' starts a comment."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    return values


def _build_spec(args: argparse.Namespace) -> harness.ExperimentSpec:
    cfg = _load_config(args.config) if args.config else {}

    def pick(name: str, default, cast):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        if name in cfg:
            return cast(cfg[name])
        return default

    schemes = pick("scheme", "lmmse", str)
    ebn0 = pick("ebn0", "8:1:16", str)
    return harness.ExperimentSpec(
        schemes=[s.strip().lower() for s in schemes.split(",") if s.strip()],
        modulation=int(pick("mod", 64, int)),
        taps=int(pick("taps", 7, int)),
        n_channels=int(pick("channels", 10, int)),
        frames_per_channel=int(pick("frames", 100, int)),
        ebn0_grid_db=_parse_ebn0(ebn0),
        seed=int(pick("seed", 1234, int)),
        code_length=int(pick("code_length", 4096, int)),
        min_bit_errors=(
            None if int(pick("min_errors", 200, int)) <= 0
            else int(pick("min_errors", 200, int))
        ),
        outer_iters=(
            int(pick("iters", -1, int)) if int(pick("iters", -1, int)) >= 0 else None
        ),
        workers=int(pick("workers", 1, int)),
        diagnostics_path=pick("diagnostics", None, str),
    )


def _cmd_simulate(args: argparse.Namespace) -> int:
    spec = _build_spec(args)
    out = Path(args.out)
    if args.emit_channel:
        emit_dir = Path(args.emit_channel)
        emit_dir.mkdir(parents=True, exist_ok=True)
        for idx in range(spec.n_channels):
            ch = harness._channel_for(spec, idx)
            save_taps(ch, emit_dir / f"channel_{idx:03d}.txt")
    records = harness.run_sweep(spec)
    harness.emit_csv(records, out)
    from .plotting import render_ber_figure

    figure = out.with_suffix(".png")
    render_ber_figure(harness.read_csv(out), figure)
    print(f"wrote {out} and {figure}")
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    from .plotting import render_ber_figure

    rows = harness.read_csv(args.results)
    out = Path(args.out) if args.out else Path(args.results).with_suffix(".png")
    render_ber_figure(rows, out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turboep", description="EP turbo-equalization BER experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a BER sweep and write CSV + figure")
    sim.add_argument("--scheme", help="comma-separated scheme list")
    sim.add_argument("--mod", type=int, help="constellation order")
    sim.add_argument("--taps", type=int, help="channel taps L")
    sim.add_argument("--channels", type=int, help="random channel draws")
    sim.add_argument("--frames", type=int, help="frames per channel")
    sim.add_argument("--ebn0", help="Eb/N0 grid, start:step:stop or list")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--code-length", dest="code_length", type=int)
    sim.add_argument("--iters", type=int, help="outer turbo iterations T")
    sim.add_argument("--min-errors", dest="min_errors", type=int,
                     help="early-stop bit-error target, <=0 disables")
    sim.add_argument("--workers", type=int, help="worker processes")
    sim.add_argument("--config", help="flat key=value config file")
    sim.add_argument("--emit-channel", help="directory for channel tap dumps")
    sim.add_argument("--diagnostics", help="per-frame JSONL output path")
    sim.add_argument("--out", required=True, help="CSV output path")
    sim.set_defaults(func=_cmd_simulate)

    plot = sub.add_parser("plot", help="re-render a figure from a results CSV")
    plot.add_argument("results", help="CSV written by simulate")
    plot.add_argument("--out", help="figure path (default: CSV stem + .png)")
    plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
