"""Command-line front end.

Subcommands wire ingestion, the event transform, baselines, file formats,
rendering, statistics, traces, and benchmarks into reproducible runs.
Exit codes: 0 success, 2 usage, 3 input parse, 4 domain/shape, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    REPRESENTATIONS,
    SYNTH_PATTERNS,
    bench_csv,
    pixel_trace,
    sparsity_stats,
    stats_csv,
    synth_video,
    throughput_bench,
    trace_csv,
)
from .baselines import DEFAULT_LOG_DIFF_THETA, gray_diff, log_diff_events, rgb_diff
from .core import (
    EdrConfig,
    EdrProcessor,
    TimescaleParams,
    fast_slow_config,
)
from .errors import DomainError, ParseError, ShapeError
from .io import (
    densify,
    read_dense,
    read_frames,
    read_raw_frames,
    read_sparse,
    render_event_frame,
    write_dense,
    write_netpbm,
    write_sparse,
)

_CONFIG_KEYS = {"timescales", "return_mode", "threshold_mode", "color_mode", "epsilon"}
_TIMESCALE_KEYS = {"tau_half", "alpha", "beta", "nu_on", "nu_off"}


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

def parse_run_config(doc: object) -> EdrConfig:
    """Build a transform config from a JSON document.

    Structural problems (wrong types, unknown keys, neither or both of
    tau_half/alpha) raise parse errors; out-of-range values surface as
    the core's domain errors.
    """
    if not isinstance(doc, dict):
        raise ParseError(f"config must be a JSON object, got {type(doc).__name__}")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ParseError(f"unknown config keys: {sorted(unknown)}")
    raw_scales = doc.get("timescales")
    if not isinstance(raw_scales, list) or not raw_scales:
        raise ParseError("config needs a nonempty 'timescales' list")
    timescales = []
    for i, entry in enumerate(raw_scales):
        if not isinstance(entry, dict):
            raise ParseError(f"timescales[{i}] must be an object")
        unknown = set(entry) - _TIMESCALE_KEYS
        if unknown:
            raise ParseError(f"timescales[{i}]: unknown keys {sorted(unknown)}")
        has_tau = "tau_half" in entry
        has_alpha = "alpha" in entry
        if has_tau == has_alpha:
            raise ParseError(f"timescales[{i}]: exactly one of tau_half/alpha is required")
        rest = {k: entry[k] for k in ("beta", "nu_on", "nu_off") if k in entry}
        if has_alpha:
            timescales.append(TimescaleParams.from_alpha(entry["alpha"], **rest))
        else:
            timescales.append(TimescaleParams.from_half_life(entry["tau_half"], **rest))
    kwargs = {k: doc[k] for k in ("return_mode", "threshold_mode", "color_mode", "epsilon")
              if k in doc}
    return EdrConfig(timescales=tuple(timescales), **kwargs)


def _load_config(args: argparse.Namespace) -> EdrConfig:
    if getattr(args, "config", None):
        text = Path(args.config).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{args.config}: invalid JSON: {exc}") from exc
        return parse_run_config(doc)
    # --preset fast-slow is also the default when no config is given
    return fast_slow_config()


def _load_frames(args: argparse.Namespace, color_mode: str, epsilon: float):
    if args.raw:
        if args.width is None or args.height is None:
            args.parser.error("--raw input needs --width and --height")
        return read_raw_frames(args.frames, args.width, args.height, args.channels,
                               color_mode=color_mode, epsilon=epsilon)
    return read_frames(args.frames, color_mode=color_mode, epsilon=epsilon)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_transform(args: argparse.Namespace) -> int:
    if not args.dense and not args.sparse:
        args.parser.error("at least one of --dense/--sparse is required")
    config = _load_config(args)
    frames = _load_frames(args, config.color_mode, config.epsilon)
    first = frames[0]
    events = []
    with EdrProcessor(config, first.width, first.height,
                      channels=first.channels, threads=args.threads) as proc:
        events = [proc.process(f) for f in frames]
    if args.dense:
        write_dense(args.dense, events)
    if args.sparse:
        write_sparse(args.sparse, events)
    total = sum(int(np.count_nonzero(e.data)) for e in events)
    cells = len(events) * events[0].data.size
    print(f"processed {len(frames)} frames ({first.width}x{first.height}, "
          f"{events[0].n_pairs} ON/OFF pairs); {total} events; density {total / cells:.6g}")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    frames = read_dense(args.dense)
    if not frames:
        raise DomainError(f"{args.dense} holds no frames to render")
    if args.frame is not None:
        frames = [f for f in frames if f.frame_idx == args.frame]
        if not frames:
            raise DomainError(f"frame index {args.frame} not present in {args.dense}")
    timescales = [args.timescale] if args.timescale is not None else range(frames[0].n_pairs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for frame in frames:
        for k in timescales:
            on, off = render_event_frame(frame, k, max_magnitude=args.max_mag)
            write_netpbm(out_dir / f"frame_{frame.frame_idx:06d}_k{k}_on.pgm", on)
            write_netpbm(out_dir / f"frame_{frame.frame_idx:06d}_k{k}_off.pgm", off)
            written += 2
    print(f"wrote {written} images to {out_dir}")
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    config = _load_config(args)
    frames = _load_frames(args, config.color_mode, config.epsilon)
    trace = pixel_trace(frames, config, args.x, args.y)
    csv = trace_csv(trace)
    if args.out:
        Path(args.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    peak = float(trace.returns.max()) if trace.returns.size else 0.0
    print(f"traced pixel ({args.x}, {args.y}) over {len(frames)} frames; "
          f"peak return {peak:.6g}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    if bool(args.dense) == bool(args.sparse):
        args.parser.error("exactly one of --dense/--sparse is required")
    if args.dense:
        frames = read_dense(args.dense)
    else:
        header, records = read_sparse(args.sparse)
        indices = range(args.n_frames) if args.n_frames is not None else None
        frames = densify(records, header.width, header.height, header.n_pairs,
                         frame_indices=indices)
    report = sparsity_stats(frames, bins=args.bins)
    if args.out:
        Path(args.out).write_text(stats_csv(report))
    print(f"{report.n_frames} frames, {report.n_channels} channels "
          f"({report.width}x{report.height}); overall density {report.overall_density:.6g}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = _load_config(args)
    report = throughput_bench(args.repr, args.width, args.height, args.n_frames,
                              config=config, threads=args.threads)
    if args.out:
        Path(args.out).write_text(bench_csv([report]))
    print(f"{report.representation} {report.width}x{report.height} "
          f"threads={report.threads}: {report.fps:.1f} fps "
          f"({report.frames} frames in {report.seconds:.4f} s)")
    return 0


def cmd_diff(args: argparse.Namespace) -> int:
    color_mode = "per_channel" if args.baseline == "rgb-diff" else "luma"
    frames = _load_frames(args, color_mode, epsilon=1e-3)
    if len(frames) < 2:
        raise DomainError("difference baselines need at least two frames")
    outputs = []
    for prev, cur in zip(frames, frames[1:]):
        if args.baseline == "gray-diff":
            outputs.append(gray_diff(prev, cur).data)
        elif args.baseline == "rgb-diff":
            outputs.append(rgb_diff(prev, cur).data)
        else:
            outputs.append(log_diff_events(prev, cur, theta=args.theta).data)
    # the first frame of a stream has no predecessor: all-zero by definition
    outputs.insert(0, np.zeros_like(outputs[0]))
    if args.out:
        with open(args.out, "wb") as f:
            for planes in outputs:
                f.write(np.ascontiguousarray(planes, dtype="<f4").tobytes())
    stacked = np.stack(outputs)
    print(f"{args.baseline} over {len(outputs)} frames: "
          f"mean |v| {float(np.abs(stacked).mean()):.6g}, "
          f"max |v| {float(np.abs(stacked).max()):.6g}, "
          f"nonzero {int(np.count_nonzero(stacked))}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    params = {}
    if args.params:
        try:
            params = json.loads(args.params)
        except json.JSONDecodeError as exc:
            raise ParseError(f"--params: invalid JSON: {exc}") from exc
        if not isinstance(params, dict):
            raise ParseError("--params must be a JSON object")
    frames = synth_video(args.pattern, args.width, args.height, args.n_frames,
                         seed=args.seed, **params)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        u8 = np.floor(np.clip(frame.data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
        write_netpbm(out_dir / f"frame_{i:06d}.pgm", u8)
    print(f"wrote {len(frames)} {args.width}x{args.height} frames to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--config", help="JSON transform config")
    g.add_argument("--preset", choices=["fast-slow"],
                   help="named config shorthand (default when no --config is given)")


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--frames", required=True,
                   help="input directory, glob, or raw stream file")
    p.add_argument("--raw", action="store_true",
                   help="treat --frames as a headerless 8-bit stream")
    p.add_argument("--width", type=int, help="raw stream width")
    p.add_argument("--height", type=int, help="raw stream height")
    p.add_argument("--channels", type=int, choices=[1, 3], default=1,
                   help="raw stream channel count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edr",
        description="Event-driven representations from frame video.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="convert frames to event streams")
    _add_input_flags(p)
    _add_config_flags(p)
    p.add_argument("--dense", help="write a dense event container here")
    p.add_argument("--sparse", help="write a sparse event container here")
    p.add_argument("--threads", type=int, default=1, help="row-tile parallelism")
    p.set_defaults(func=cmd_transform, parser=p)

    p = sub.add_parser("render", help="render event channels to PGM images")
    p.add_argument("--dense", required=True, help="dense event container to read")
    p.add_argument("--out-dir", required=True, help="directory for rendered images")
    p.add_argument("--frame", type=int, help="render only this frame index")
    p.add_argument("--timescale", type=int, help="render only this ON/OFF pair")
    p.add_argument("--max-mag", type=float, default=1.0,
                   help="magnitude mapped to full white")
    p.set_defaults(func=cmd_render, parser=p)

    p = sub.add_parser("trace", help="trace every pipeline stage at one pixel")
    _add_input_flags(p)
    _add_config_flags(p)
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--y", type=int, required=True)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_trace, parser=p)

    p = sub.add_parser("stats", help="sparsity statistics for an event stream")
    p.add_argument("--dense", help="dense event container to read")
    p.add_argument("--sparse", help="sparse event container to read")
    p.add_argument("--n-frames", type=int,
                   help="frame count for sparse input (recovers trailing empty frames)")
    p.add_argument("--bins", type=int, default=64, help="histogram bin count")
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_stats, parser=p)

    p = sub.add_parser("bench", help="measure transform throughput")
    p.add_argument("--repr", choices=list(REPRESENTATIONS), default="EDR",
                   help="representation to time")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--n-frames", type=int, default=520,
                   help="frames per run including warmup")
    p.add_argument("--threads", type=int, default=1, help="row-tile parallelism")
    _add_config_flags(p)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_bench, parser=p)

    p = sub.add_parser("diff", help="frame-difference baselines")
    _add_input_flags(p)
    p.add_argument("--baseline", choices=["gray-diff", "rgb-diff", "log-diff"],
                   default="gray-diff")
    p.add_argument("--theta", type=float, default=DEFAULT_LOG_DIFF_THETA,
                   help="log-diff event threshold")
    p.add_argument("--out", help="raw float32 plane dump output path")
    p.set_defaults(func=cmd_diff, parser=p)

    p = sub.add_parser("synth", help="generate synthetic test frames")
    p.add_argument("--pattern", required=True,
                   choices=[s.replace("_", "-") for s in SYNTH_PATTERNS])
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--n-frames", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", help="pattern parameters as a JSON object")
    p.add_argument("--out-dir", required=True, help="directory for PGM frames")
    p.set_defaults(func=cmd_synth, parser=p)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DomainError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
