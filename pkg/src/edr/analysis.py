"""Sparsity statistics, per-pixel traces, throughput benchmarks, synthetic video.

Everything here operates on in-memory frames; file handling stays in the
CLI so benchmark timings and statistics never include I/O.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import baselines
from .core import (
    DEFAULT_EPSILON,
    DTYPE,
    EdrConfig,
    EdrProcessor,
    EventFrame,
    IntensityFrame,
    fast_slow_config,
)
from .errors import DomainError, ShapeError

WARMUP_FRAMES = 20
BENCH_RUNS = 5
DEFAULT_HIST_BINS = 64

REPRESENTATIONS = ("EDR", "GrayDiff", "RGBDiff", "LogDiffEvents", "NoOp")
SYNTH_PATTERNS = ("constant", "impulse", "step", "moving_square", "global_gain")


# ---------------------------------------------------------------------------
# Sparsity statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SparsityReport:
    """Per-channel event density and magnitude statistics for a stream."""

    width: int
    height: int
    n_channels: int
    n_frames: int
    density: np.ndarray          # (channels, frames) fraction of nonzero pixels
    mean_magnitude: np.ndarray   # (channels, frames) mean of nonzero magnitudes, 0 if none
    channel_density: np.ndarray  # (channels,) aggregate over all frames
    overall_density: float
    hist_edges: np.ndarray       # (bins + 1,)
    hist_counts: np.ndarray      # (channels, bins), zeros included


def sparsity_stats(frames: Sequence[EventFrame], bins: int = DEFAULT_HIST_BINS) -> SparsityReport:
    """Count nonzero events per channel per frame and histogram magnitudes.

    Histogram range is [0, max magnitude] (or [0, 1] for an all-zero
    stream so the bins stay well formed); zero entries land in the first
    bin, so counts sum to width*height*frames per channel.
    """
    if not frames:
        raise DomainError("sparsity stats need at least one frame")
    if bins < 1:
        raise DomainError(f"histogram needs at least one bin, got {bins}")
    w, h, channels = frames[0].width, frames[0].height, frames[0].n_channels
    n = len(frames)
    density = np.zeros((channels, n), dtype=np.float64)
    mean_mag = np.zeros((channels, n), dtype=np.float64)
    nonzero = np.zeros((channels, n), dtype=np.int64)
    hi = 0.0
    for t, frame in enumerate(frames):
        if (frame.width, frame.height, frame.n_channels) != (w, h, channels):
            raise ShapeError(f"frame {t} geometry differs from the first frame")
        counts = np.count_nonzero(frame.data, axis=(1, 2))
        sums = frame.data.sum(axis=(1, 2), dtype=np.float64)
        nonzero[:, t] = counts
        density[:, t] = counts / (w * h)
        np.divide(sums, counts, out=mean_mag[:, t], where=counts > 0)
        hi = max(hi, float(frame.data.max()))
    hist_hi = hi if hi > 0 else 1.0
    hist_counts = np.zeros((channels, bins), dtype=np.int64)
    for c in range(channels):
        values = np.concatenate([f.data[c].ravel() for f in frames])
        hist_counts[c], edges = np.histogram(values, bins=bins, range=(0.0, hist_hi))
    channel_density = nonzero.sum(axis=1) / (w * h * n)
    return SparsityReport(
        width=w, height=h, n_channels=channels, n_frames=n,
        density=density, mean_magnitude=mean_mag,
        channel_density=channel_density,
        overall_density=float(nonzero.sum()) / (channels * w * h * n),
        hist_edges=edges, hist_counts=hist_counts,
    )


def stats_csv(report: SparsityReport) -> str:
    lines = ["channel,frame,density,mean_magnitude"]
    for c in range(report.n_channels):
        for t in range(report.n_frames):
            lines.append(f"{c},{t},{report.density[c, t]:.9g},{report.mean_magnitude[c, t]:.9g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Per-pixel traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PixelTrace:
    """Time series of every pipeline stage at one pixel."""

    x: int
    y: int
    intensity: np.ndarray  # (frames,)
    ema: np.ndarray        # (timescales, frames)
    returns: np.ndarray    # (timescales, frames)
    e_on: np.ndarray       # (timescales, frames)
    e_off: np.ndarray      # (timescales, frames)


def pixel_trace(frames: Sequence[IntensityFrame], config: EdrConfig, x: int, y: int) -> PixelTrace:
    """Run the full pipeline over the sequence and extract one pixel's series.

    The series are sliced from the same frame-wide step the processor
    performs, so they equal the corresponding process() outputs exactly.
    """
    if not frames:
        raise DomainError("pixel trace needs at least one frame")
    first = frames[0]
    if first.channels != 1:
        raise DomainError("pixel traces support single-channel streams")
    if not (0 <= x < first.width and 0 <= y < first.height):
        raise DomainError(
            f"pixel ({x}, {y}) out of bounds for {first.width}x{first.height}"
        )
    k = config.n_timescales
    n = len(frames)
    trace = PixelTrace(
        x=x, y=y,
        intensity=np.zeros(n, dtype=DTYPE),
        ema=np.zeros((k, n), dtype=DTYPE),
        returns=np.zeros((k, n), dtype=DTYPE),
        e_on=np.zeros((k, n), dtype=DTYPE),
        e_off=np.zeros((k, n), dtype=DTYPE),
    )
    with EdrProcessor(config, first.width, first.height, channels=1) as proc:
        for t, frame in enumerate(frames):
            step = proc.process_detailed(frame)
            trace.intensity[t] = step.intensity[0, y, x]
            trace.ema[:, t] = step.ema[:, 0, y, x]
            trace.returns[:, t] = step.returns.values[:, 0, y, x]
            for j in range(k):
                trace.e_on[j, t] = step.events.on(j)[y, x]
                trace.e_off[j, t] = step.events.off(j)[y, x]
    return trace


def trace_csv(trace: PixelTrace) -> str:
    k = trace.ema.shape[0]
    header = (["frame", "intensity"]
              + [f"ema_{j}" for j in range(k)]
              + [f"return_{j}" for j in range(k)]
              + [f"e_on_{j}" for j in range(k)]
              + [f"e_off_{j}" for j in range(k)])
    lines = [",".join(header)]
    for t in range(len(trace.intensity)):
        row = [str(t), f"{trace.intensity[t]:.9g}"]
        for series in (trace.ema, trace.returns, trace.e_on, trace.e_off):
            row.extend(f"{series[j, t]:.9g}" for j in range(k))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Throughput benchmarks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchReport:
    """Steady-state transform throughput for one representation."""

    representation: str
    width: int
    height: int
    threads: int
    frames: int  # timed frames, warmup excluded
    seconds: float
    fps: float


def _bench_input(representation: str, config: EdrConfig, width: int, height: int,
                 n_frames: int) -> list[IntensityFrame]:
    channels = 3 if representation == "RGBDiff" else 1
    if representation == "EDR" and config.color_mode == "per_channel":
        channels = 3
    rng = np.random.default_rng(0)
    data = rng.uniform(0.1, 0.9, size=(n_frames, channels, height, width))
    return [IntensityFrame(data=data[i].astype(DTYPE)) for i in range(n_frames)]


def _bench_step(representation: str, config: EdrConfig, width: int, height: int,
                threads: int, frames: list[IntensityFrame],
                ) -> tuple[Callable[[int], object], Callable[[], None]]:
    """Build the per-frame transform closure; index i selects the input frame."""
    if representation == "EDR":
        proc = EdrProcessor(config, width, height,
                            channels=frames[0].channels, threads=threads)
        return (lambda i: proc.process(frames[i])), proc.close
    if representation == "GrayDiff":
        step = lambda i: baselines.gray_diff(frames[i - 1], frames[i]) if i else None
    elif representation == "RGBDiff":
        step = lambda i: baselines.rgb_diff(frames[i - 1], frames[i]) if i else None
    elif representation == "LogDiffEvents":
        step = lambda i: baselines.log_diff_events(frames[i - 1], frames[i]) if i else None
    elif representation == "NoOp":
        # timing control: proves the harness itself costs (almost) nothing
        step = lambda i: None
    else:
        raise DomainError(f"unknown representation {representation!r}, "
                          f"expected one of {REPRESENTATIONS}")
    return step, lambda: None


def throughput_bench(representation: str, width: int, height: int, n_frames: int,
                     config: EdrConfig | None = None, threads: int = 1,
                     runs: int = BENCH_RUNS) -> BenchReport:
    """Measure steady-state transform throughput.

    Input is pre-generated so I/O and synthesis stay outside the timed
    region; the first WARMUP_FRAMES frames are processed untimed, then
    the remaining frames are timed ``runs`` times and the median wall
    time is reported.
    """
    if representation not in REPRESENTATIONS:
        raise DomainError(f"unknown representation {representation!r}, "
                          f"expected one of {REPRESENTATIONS}")
    if width < 1 or height < 1:
        raise DomainError(f"invalid geometry {width}x{height}")
    if n_frames < WARMUP_FRAMES + 100:
        raise DomainError(
            f"need at least {WARMUP_FRAMES + 100} frames for a stable measurement, got {n_frames}"
        )
    if runs < 1:
        raise DomainError(f"need at least one timed run, got {runs}")
    if config is None:
        config = fast_slow_config()
    frames = _bench_input(representation, config, width, height, n_frames)
    step, cleanup = _bench_step(representation, config, width, height, threads, frames)
    timed = n_frames - WARMUP_FRAMES
    samples = []
    try:
        for i in range(WARMUP_FRAMES):
            step(i)
        for _ in range(runs):
            t0 = time.perf_counter()
            for i in range(WARMUP_FRAMES, n_frames):
                step(i)
            samples.append(time.perf_counter() - t0)
    finally:
        cleanup()
    seconds = float(np.median(samples))
    return BenchReport(
        representation=representation, width=width, height=height, threads=threads,
        frames=timed, seconds=seconds, fps=timed / seconds,
    )


def bench_csv(reports: Sequence[BenchReport]) -> str:
    lines = ["repr,width,height,threads,frames,seconds,fps"]
    for r in reports:
        lines.append(f"{r.representation},{r.width},{r.height},{r.threads},"
                     f"{r.frames},{r.seconds:.9g},{r.fps:.9g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Synthetic video
# ---------------------------------------------------------------------------

def _check_level(name: str, value: float, low: float = 0.0, high: float = 1.0) -> float:
    value = float(value)
    if not (low < value <= high) or not np.isfinite(value):
        raise DomainError(f"{name} must be in ({low}, {high}], got {value}")
    return value


def synth_video(pattern: str, width: int, height: int, n_frames: int,
                seed: int = 0, **params) -> list[IntensityFrame]:
    """Generate a deterministic single-channel test sequence.

    Patterns (extra keyword parameters, with defaults):

    * ``constant``: ``level=0.5``
    * ``impulse``: ``background=0.3``, ``amplitude=0.4``, ``frame=5``;
      exactly one frame jumps to background+amplitude
    * ``step``: ``background=0.3``, ``level=0.6``, ``frame=5``;
      intensity switches to ``level`` from ``frame`` onward
    * ``moving_square``: ``background=0.2``, ``foreground=0.9``,
      ``size=8``, ``velocity=(1, 0)``, ``start=(0, 0)``; a bright square
      translates by the integer velocity each frame, wrapping at the edges
    * ``global_gain``: ``gain=1.02``, ``low=0.25``, ``high=0.75``; a
      seeded random base image scaled by gain**t (values may exceed 1;
      the transform's input clamp handles that)
    """
    # accept "moving_square", "moving-square", and "MovingSquare" alike
    key = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", "_", pattern).replace("-", "_").lower()
    if key not in SYNTH_PATTERNS:
        raise DomainError(f"unknown pattern {pattern!r}, expected one of {SYNTH_PATTERNS}")
    if width < 1 or height < 1 or n_frames < 1:
        raise DomainError(f"invalid geometry {width}x{height}x{n_frames}")

    def blank(value: float) -> np.ndarray:
        return np.full((1, height, width), value, dtype=DTYPE)

    frames: list[np.ndarray] = []
    if key == "constant":
        level = _check_level("level", params.pop("level", 0.5))
        frames = [blank(level) for _ in range(n_frames)]
    elif key == "impulse":
        bg = _check_level("background", params.pop("background", 0.3))
        amp = float(params.pop("amplitude", 0.4))
        at = int(params.pop("frame", 5))
        if amp == 0 or not np.isfinite(amp):
            raise DomainError(f"amplitude must be nonzero, got {amp}")
        _check_level("background+amplitude", bg + amp)
        if not 0 <= at < n_frames:
            raise DomainError(f"impulse frame {at} out of range [0, {n_frames})")
        frames = [blank(bg + amp if t == at else bg) for t in range(n_frames)]
    elif key == "step":
        bg = _check_level("background", params.pop("background", 0.3))
        level = _check_level("level", params.pop("level", 0.6))
        at = int(params.pop("frame", 5))
        if not 0 <= at < n_frames:
            raise DomainError(f"step frame {at} out of range [0, {n_frames})")
        frames = [blank(level if t >= at else bg) for t in range(n_frames)]
    elif key == "moving_square":
        bg = _check_level("background", params.pop("background", 0.2))
        fg = _check_level("foreground", params.pop("foreground", 0.9))
        size = int(params.pop("size", 8))
        vx, vy = (int(v) for v in params.pop("velocity", (1, 0)))
        x0, y0 = (int(v) for v in params.pop("start", (0, 0)))
        if not 0 < size < min(width, height):
            raise DomainError(f"square size {size} must be in (0, {min(width, height)})")
        for t in range(n_frames):
            frame = blank(bg)
            xs = (x0 + t * vx + np.arange(size)) % width
            ys = (y0 + t * vy + np.arange(size)) % height
            frame[0, ys[:, np.newaxis], xs[np.newaxis, :]] = fg
            frames.append(frame)
    elif key == "global_gain":
        gain = float(params.pop("gain", 1.02))
        low = float(params.pop("low", 0.25))
        high = _check_level("high", params.pop("high", 0.75))
        if not (gain > 0 and np.isfinite(gain)):
            raise DomainError(f"gain must be positive, got {gain}")
        if not 0 < low < high:
            raise DomainError(f"need 0 < low < high, got low={low} high={high}")
        rng = np.random.default_rng(seed)
        base = rng.uniform(low, high, size=(1, height, width))
        frames = [(base * gain ** t).astype(DTYPE) for t in range(n_frames)]
    if params:
        raise DomainError(f"unknown parameters for pattern {pattern!r}: {sorted(params)}")
    return [IntensityFrame(data=f) for f in frames]
