"""Event-driven representations from frame video.

A streaming engine that turns conventional frames into multi-timescale
bipolar ON/OFF event streams: per pixel, an exponential moving average
tracks each configured timescale, a dimensionless return compares the
current intensity against that average, and thresholding emits ON and
OFF event magnitudes. Baseline frame-difference representations, two
bit-exact event file formats, statistics, traces, benchmarks, and a CLI
come along for the ride.
"""

from .errors import (
    DomainError,
    EdrError,
    FormatError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .core import (
    DEFAULT_EPSILON,
    DTYPE,
    LUMA_WEIGHTS,
    EdrConfig,
    EdrProcessor,
    EmaState,
    EventFrame,
    IntensityFrame,
    ReturnFrame,
    StepDetail,
    TimescaleParams,
    alpha_from_half_life,
    clamp_intensity,
    compute_returns,
    ema_step,
    fast_slow_config,
    half_life_from_alpha,
    normalize_u8,
    stack_channels,
    threshold_events,
    to_luma,
)
from .baselines import (
    DEFAULT_LOG_DIFF_THETA,
    DiffFrame,
    gray_diff,
    log_diff_events,
    rgb_diff,
)
from .io import (
    DENSE_MAGIC,
    SPARSE_MAGIC,
    SPARSE_RECORD_DTYPE,
    StreamHeader,
    densify,
    frame_from_u8,
    read_dense,
    read_frames,
    read_netpbm,
    read_raw_frames,
    read_sparse,
    render_event_frame,
    sparsify,
    write_dense,
    write_netpbm,
    write_sparse,
)
from .analysis import (
    REPRESENTATIONS,
    SYNTH_PATTERNS,
    BenchReport,
    PixelTrace,
    SparsityReport,
    bench_csv,
    pixel_trace,
    sparsity_stats,
    stats_csv,
    synth_video,
    throughput_bench,
    trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_EPSILON",
    "DEFAULT_LOG_DIFF_THETA",
    "DENSE_MAGIC",
    "DTYPE",
    "LUMA_WEIGHTS",
    "REPRESENTATIONS",
    "SPARSE_MAGIC",
    "SPARSE_RECORD_DTYPE",
    "SYNTH_PATTERNS",
    "BenchReport",
    "DiffFrame",
    "DomainError",
    "EdrConfig",
    "EdrError",
    "EdrProcessor",
    "EmaState",
    "EventFrame",
    "FormatError",
    "IntensityFrame",
    "ParseError",
    "PixelTrace",
    "ReturnFrame",
    "ShapeError",
    "SparsityReport",
    "StepDetail",
    "StreamHeader",
    "TimescaleParams",
    "ValidationError",
    "alpha_from_half_life",
    "bench_csv",
    "clamp_intensity",
    "compute_returns",
    "densify",
    "ema_step",
    "fast_slow_config",
    "frame_from_u8",
    "gray_diff",
    "half_life_from_alpha",
    "log_diff_events",
    "normalize_u8",
    "pixel_trace",
    "read_dense",
    "read_frames",
    "read_netpbm",
    "read_raw_frames",
    "read_sparse",
    "render_event_frame",
    "rgb_diff",
    "sparsify",
    "sparsity_stats",
    "stack_channels",
    "stats_csv",
    "synth_video",
    "threshold_events",
    "to_luma",
    "trace_csv",
    "throughput_bench",
    "write_dense",
    "write_netpbm",
    "write_sparse",
]
