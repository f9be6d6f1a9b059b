"""Core math for the retinomorphic event-driven representation.

A frame stream is turned into bipolar ON/OFF event channels in three
stages, applied per pixel and per timescale:

1. an exponential moving average (EMA) smooths the intensity stream,
2. a dimensionless return measures the current intensity against its EMA,
3. a bipolar threshold rectifies the return into ON and OFF magnitudes.

Several timescales (fast/slow decay) run side by side; their event
channels are concatenated.  All per-pixel state is independent, so a
frame may be processed in disjoint row tiles with identical results.
Working precision is float32; the update rules are dtype-generic so
tests can drive them in float64.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError

DTYPE = np.float32
DEFAULT_EPSILON = 1e-3

# BT.601 luma weights for normalized RGB.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

RETURN_MODES = ("ratio", "log")
THRESHOLD_MODES = ("soft", "hard")
COLOR_MODES = ("luma", "per_channel")


def alpha_from_half_life(tau_half: float) -> float:
    """EMA update weight for a given half-life in frames.

    A new sample's influence on the average decays to half after
    ``tau_half`` frames: ``alpha = 1 - 2**(-1/tau_half)``.
    """
    tau_half = float(tau_half)
    if not math.isfinite(tau_half) or tau_half <= 0.0:
        raise DomainError(f"half-life must be a positive finite frame count, got {tau_half}")
    return 1.0 - 2.0 ** (-1.0 / tau_half)


def half_life_from_alpha(alpha: float) -> float:
    """Inverse of :func:`alpha_from_half_life`."""
    alpha = float(alpha)
    if not math.isfinite(alpha) or not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    return -1.0 / math.log2(1.0 - alpha)


@dataclass(frozen=True)
class TimescaleParams:
    """Decay, sensitivity and threshold parameters for one timescale.

    ``alpha`` and ``tau_half`` describe the same decay and must agree via
    ``alpha = 1 - 2**(-1/tau_half)``; use :meth:`from_alpha` or
    :meth:`from_half_life` to supply just one.  ``nu_on``/``nu_off`` are
    relative-change thresholds (0.05 means a 5% deviation fires).
    """

    alpha: float
    tau_half: float
    beta: float = 1.0
    nu_on: float = 0.05
    nu_off: float = 0.05

    def __post_init__(self):
        if not math.isfinite(self.alpha) or not 0.0 < self.alpha < 1.0:
            # alpha == 1 would pin the EMA to the input and silence all events
            raise DomainError(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
        if not math.isfinite(self.tau_half) or self.tau_half <= 0.0:
            raise DomainError(f"tau_half must be positive and finite, got {self.tau_half}")
        expected = half_life_from_alpha(self.alpha)
        if abs(self.tau_half - expected) > 1e-9 * expected:
            raise DomainError(
                f"tau_half={self.tau_half} inconsistent with alpha={self.alpha} "
                f"(expected tau_half={expected!r})"
            )
        if not math.isfinite(self.beta):
            raise DomainError(f"beta must be finite, got {self.beta}")
        if not math.isfinite(self.nu_on) or self.nu_on < 0.0:
            raise DomainError(f"nu_on must be >= 0, got {self.nu_on}")
        if not math.isfinite(self.nu_off) or not 0.0 <= self.nu_off < 1.0:
            # keeps the OFF threshold 1 - nu_off strictly positive
            raise DomainError(f"nu_off must lie in [0, 1), got {self.nu_off}")

    @classmethod
    def from_alpha(cls, alpha: float, beta: float = 1.0,
                   nu_on: float = 0.05, nu_off: float = 0.05) -> "TimescaleParams":
        return cls(alpha=float(alpha), tau_half=half_life_from_alpha(alpha),
                   beta=beta, nu_on=nu_on, nu_off=nu_off)

    @classmethod
    def from_half_life(cls, tau_half: float, beta: float = 1.0,
                       nu_on: float = 0.05, nu_off: float = 0.05) -> "TimescaleParams":
        return cls(alpha=alpha_from_half_life(tau_half), tau_half=float(tau_half),
                   beta=beta, nu_on=nu_on, nu_off=nu_off)


@dataclass(frozen=True)
class EdrConfig:
    """Full transform configuration: timescale list plus mode switches."""

    timescales: tuple[TimescaleParams, ...]
    return_mode: str = "ratio"
    threshold_mode: str = "soft"
    color_mode: str = "luma"
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        object.__setattr__(self, "timescales", tuple(self.timescales))
        if len(self.timescales) < 1:
            raise DomainError("at least one timescale is required")
        if not all(isinstance(t, TimescaleParams) for t in self.timescales):
            raise DomainError("timescales must be TimescaleParams instances")
        if self.return_mode not in RETURN_MODES:
            raise DomainError(f"return_mode must be one of {RETURN_MODES}, got {self.return_mode!r}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise DomainError(f"threshold_mode must be one of {THRESHOLD_MODES}, got {self.threshold_mode!r}")
        if self.color_mode not in COLOR_MODES:
            raise DomainError(f"color_mode must be one of {COLOR_MODES}, got {self.color_mode!r}")
        if not (math.isfinite(self.epsilon) and 0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def n_timescales(self) -> int:
        return len(self.timescales)


def fast_slow_config(threshold_mode: str = "soft", return_mode: str = "ratio",
                     color_mode: str = "luma", epsilon: float = DEFAULT_EPSILON) -> EdrConfig:
    """Default two-timescale configuration: fast decay (alpha=0.5, one-frame
    half-life) plus slow decay (alpha=0.166, ~3.8-frame half-life), 5%
    thresholds, unit sensitivity."""
    return EdrConfig(
        timescales=(TimescaleParams.from_alpha(0.5), TimescaleParams.from_alpha(0.166)),
        return_mode=return_mode, threshold_mode=threshold_mode,
        color_mode=color_mode, epsilon=epsilon,
    )


# ---------------------------------------------------------------------------
# Frame and state containers
# ---------------------------------------------------------------------------

@dataclass
class IntensityFrame:
    """One normalized video frame: planar ``(channels, height, width)``
    reals in ``[epsilon, 1]``.  1 channel for luma, 3 for RGB."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ShapeError(f"intensity data must be (channels, height, width), got {self.data.shape}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass
class EmaState:
    """Per-pixel EMA values for every timescale: ``(K, channels, H, W)``."""

    values: np.ndarray
    frame_count: int = 0

    @classmethod
    def zeros(cls, n_timescales: int, channels: int, height: int, width: int,
              dtype=DTYPE) -> "EmaState":
        return cls(values=np.zeros((n_timescales, channels, height, width), dtype=dtype))


@dataclass
class ReturnFrame:
    """Dimensionless change measures, ``(K, channels, H, W)``.

    Ratio mode values are strictly positive with baseline 1; log mode
    values are signed with baseline 0.
    """

    values: np.ndarray
    mode: str = "ratio"


@dataclass
class EventFrame:
    """Nonnegative ON/OFF event magnitudes for one frame.

    ``data`` is planar ``(2 * n_pairs, H, W)``: plane ``2j`` holds ON and
    plane ``2j + 1`` holds OFF magnitudes for pathway ``j``.  With 1-channel
    input a pathway is simply a timescale; with per-channel color the
    pathways enumerate (timescale, channel) pairs timescale-major.
    """

    frame_idx: int
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] % 2 != 0:
            raise ShapeError(f"event data must be (2*pairs, height, width), got {self.data.shape}")
        if self.frame_idx < 0:
            raise DomainError(f"frame_idx must be nonnegative, got {self.frame_idx}")

    @property
    def n_pairs(self) -> int:
        return self.data.shape[0] // 2

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def on(self, pair: int) -> np.ndarray:
        return self.data[2 * pair]

    def off(self, pair: int) -> np.ndarray:
        return self.data[2 * pair + 1]


# ---------------------------------------------------------------------------
# Intensity helpers
# ---------------------------------------------------------------------------

def normalize_u8(raw: np.ndarray) -> np.ndarray:
    """Map 8-bit samples to [0, 1] float32 (no clamp yet)."""
    return np.asarray(raw, dtype=DTYPE) / DTYPE(255.0)


def to_luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma from planar normalized RGB ``(3, H, W)`` -> ``(1, H, W)``."""
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise ShapeError(f"luma conversion expects (3, H, W), got {rgb.shape}")
    w = np.asarray(LUMA_WEIGHTS, dtype=rgb.dtype).reshape(3, 1, 1)
    return np.sum(rgb * w, axis=0, keepdims=True).astype(rgb.dtype, copy=False)


def clamp_intensity(values: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Clamp normalized intensities into [epsilon, 1] so logs and divisions
    stay finite.  Returns a new array."""
    return np.clip(values, epsilon, 1.0)


# ---------------------------------------------------------------------------
# Transform stages
# ---------------------------------------------------------------------------

def _check_frame_geometry(frame: IntensityFrame, state: EmaState):
    if state.values.shape[1:] != frame.data.shape:
        raise ShapeError(
            f"frame shape {frame.data.shape} does not match state {state.values.shape[1:]}"
        )


def _alphas_column(config: EdrConfig, dtype) -> np.ndarray:
    return np.asarray([t.alpha for t in config.timescales], dtype=dtype).reshape(-1, 1, 1, 1)


def ema_step(state: EmaState, frame: IntensityFrame, config: EdrConfig) -> EmaState:
    """Advance the per-timescale EMA by one frame, in place.

    The very first frame initializes the average to the frame itself, so
    startup produces no spurious deviation.  Afterwards each timescale k
    follows ``ema += alpha_k * (frame - ema)``.
    """
    _check_frame_geometry(frame, state)
    if state.frame_count == 0:
        state.values[...] = frame.data
    else:
        alphas = _alphas_column(config, state.values.dtype)
        delta = frame.data - state.values
        delta *= alphas
        state.values += delta
    state.frame_count += 1
    return state


def _returns_into(frame_data: np.ndarray, state_values: np.ndarray,
                  betas: np.ndarray, log_mode: bool, out: np.ndarray) -> np.ndarray:
    np.divide(frame_data, state_values, out=out)
    if log_mode:
        np.log(out, out=out)
        if betas is not None:
            np.multiply(out, betas, out=out)
    elif betas is not None:
        np.power(out, betas, out=out)
    return out


def _betas_column(config: EdrConfig, dtype) -> np.ndarray | None:
    betas = [t.beta for t in config.timescales]
    if all(b == 1.0 for b in betas):
        return None  # x**1 is the identity; skip the expensive pow/multiply
    return np.asarray(betas, dtype=dtype).reshape(-1, 1, 1, 1)


def compute_returns(frame: IntensityFrame, state: EmaState, config: EdrConfig) -> ReturnFrame:
    """Dimensionless returns of the frame against its (already updated) EMA.

    Ratio mode: ``(I / ema) ** beta``; log mode: ``beta * ln(I / ema)``.
    """
    _check_frame_geometry(frame, state)
    out = np.empty_like(state.values)
    _returns_into(frame.data, state.values, _betas_column(config, out.dtype),
                  config.return_mode == "log", out)
    return ReturnFrame(values=out, mode=config.return_mode)


def _thresholds(config: EdrConfig, dtype) -> tuple[np.ndarray, np.ndarray]:
    # Precompute in float64, cast once: ratio baselines sit at 1, log at 0.
    if config.return_mode == "log":
        on = [t.nu_on for t in config.timescales]
        off = [-t.nu_off for t in config.timescales]
    else:
        on = [1.0 + t.nu_on for t in config.timescales]
        off = [1.0 - t.nu_off for t in config.timescales]
    shape = (-1, 1, 1, 1)
    return (np.asarray(on, dtype=dtype).reshape(shape),
            np.asarray(off, dtype=dtype).reshape(shape))


def _events_into(returns: np.ndarray, on_thresh: np.ndarray, off_thresh: np.ndarray,
                 hard: bool, out_pairs: np.ndarray) -> None:
    """Rectify returns into the ``(K, C, 2, H, W)`` view of an event buffer."""
    on = out_pairs[:, :, 0]
    off = out_pairs[:, :, 1]
    np.subtract(returns, on_thresh, out=on)
    np.maximum(on, 0.0, out=on)
    np.subtract(off_thresh, returns, out=off)
    np.maximum(off, 0.0, out=off)
    if hard:
        # magnitudes are >= 0, so sign() is exactly the (> 0) indicator
        np.sign(on, out=on)
        np.sign(off, out=off)


def threshold_events(returns: ReturnFrame, config: EdrConfig, frame_idx: int = 0) -> EventFrame:
    """Bipolar ON/OFF event detection on a return frame.

    Soft mode keeps the rectified magnitude above threshold; hard mode
    emits a binary indicator wherever the soft magnitude would be positive.
    A deviation must exceed ``nu_on`` upward (ON) or ``nu_off`` downward
    (OFF) relative to baseline; the two can never fire together.
    """
    if returns.mode != config.return_mode:
        raise DomainError(
            f"returns were computed in {returns.mode!r} mode but config expects {config.return_mode!r}"
        )
    k, c, h, w = returns.values.shape
    out = np.empty((2 * k * c, h, w), dtype=returns.values.dtype)
    on_t, off_t = _thresholds(config, returns.values.dtype)
    _events_into(returns.values, on_t, off_t, config.threshold_mode == "hard",
                 out.reshape(k, c, 2, h, w))
    return EventFrame(frame_idx=frame_idx, data=out)


def stack_channels(rgb: IntensityFrame, events: EventFrame) -> np.ndarray:
    """Concatenate RGB planes with event planes: ``(3 + 2*pairs, H, W)``.

    The appearance stream comes first, then ON/OFF planes in event order,
    giving the two-stream input layout (e.g. 5 planes for one timescale).
    """
    if rgb.channels != 3:
        raise ShapeError(f"stacking expects a 3-channel frame, got {rgb.channels} channels")
    if (rgb.height, rgb.width) != (events.height, events.width):
        raise ShapeError(
            f"frame geometry {(rgb.height, rgb.width)} does not match "
            f"events {(events.height, events.width)}"
        )
    return np.concatenate([rgb.data, events.data], axis=0)


# ---------------------------------------------------------------------------
# Streaming processor
# ---------------------------------------------------------------------------

@dataclass
class StepDetail:
    """Events plus the intermediate stages that produced them."""

    events: EventFrame
    returns: ReturnFrame
    ema: np.ndarray  # (K, C, H, W) snapshot after the update
    intensity: np.ndarray  # (C, H, W) clamped input


class EdrProcessor:
    """Stateful streaming transform: feed frames in order, get event frames.

    Geometry is fixed at construction.  A processor is exclusively owned
    while a step runs; with ``threads > 1`` a frame is split into disjoint
    row bands processed in parallel, which leaves results bit-identical
    because every pixel is independent.
    """

    def __init__(self, config: EdrConfig, width: int, height: int,
                 channels: int = 1, threads: int = 1):
        if width < 1 or height < 1:
            raise DomainError(f"frame geometry must be positive, got {width}x{height}")
        if channels not in (1, 3):
            raise DomainError(f"channels must be 1 or 3, got {channels}")
        if config.color_mode == "luma" and channels != 1:
            raise DomainError("luma color mode processes 1-channel frames; convert first")
        if threads < 1:
            raise DomainError(f"threads must be >= 1, got {threads}")
        self.config = config
        self.width = int(width)
        self.height = int(height)
        self.channels = int(channels)
        k = config.n_timescales
        self.state = EmaState.zeros(k, channels, height, width)
        self._scratch = np.empty_like(self.state.values)
        self._clamped = np.empty((channels, height, width), dtype=DTYPE)
        self._alphas = _alphas_column(config, DTYPE)
        self._betas = _betas_column(config, DTYPE)
        self._on_t, self._off_t = _thresholds(config, DTYPE)
        self._log_mode = config.return_mode == "log"
        self._hard = config.threshold_mode == "hard"
        self.threads = int(threads)
        self._pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    @property
    def n_pairs(self) -> int:
        return self.config.n_timescales * self.channels

    @property
    def frame_count(self) -> int:
        return self.state.frame_count

    def reset(self) -> "EdrProcessor":
        """Return to the pre-first-frame state; the next frame re-seeds the EMA."""
        self.state.frame_count = 0
        self.state.values[...] = 0.0
        return self

    def _check_input(self, frame: IntensityFrame):
        if frame.data.shape != (self.channels, self.height, self.width):
            raise ShapeError(
                f"frame shape {frame.data.shape} does not match processor "
                f"({self.channels}, {self.height}, {self.width})"
            )

    def _step_rows(self, x: np.ndarray, ev: np.ndarray, first: bool, rows: slice):
        s = self.state.values[:, :, rows]
        xr = x[:, rows]
        r = self._scratch[:, :, rows]
        if first:
            s[...] = xr
        else:
            np.subtract(xr, s, out=r)
            np.multiply(r, self._alphas, out=r)
            np.add(s, r, out=s)
        _returns_into(xr, s, self._betas, self._log_mode, r)
        _events_into(r, self._on_t, self._off_t, self._hard, ev[:, :, :, rows])

    def _step(self, frame: IntensityFrame) -> np.ndarray:
        self._check_input(frame)
        np.clip(frame.data, self.config.epsilon, 1.0, out=self._clamped)
        x = self._clamped
        k, c = self.config.n_timescales, self.channels
        out = np.empty((2 * k * c, self.height, self.width), dtype=DTYPE)
        ev = out.reshape(k, c, 2, self.height, self.width)
        first = self.state.frame_count == 0
        if self._pool is None or self.height < 2 * self.threads:
            self._step_rows(x, ev, first, slice(None))
        else:
            bounds = np.linspace(0, self.height, self.threads + 1, dtype=int)
            jobs = [self._pool.submit(self._step_rows, x, ev, first, slice(a, b))
                    for a, b in zip(bounds[:-1], bounds[1:])]
            for job in jobs:
                job.result()
        self.state.frame_count += 1
        return out

    def process(self, frame: IntensityFrame) -> EventFrame:
        """Clamp, smooth, compute returns, and threshold one frame."""
        idx = self.state.frame_count
        return EventFrame(frame_idx=idx, data=self._step(frame))

    def process_detailed(self, frame: IntensityFrame) -> StepDetail:
        """Like :meth:`process`, also snapshotting every intermediate stage."""
        idx = self.state.frame_count
        data = self._step(frame)
        return StepDetail(
            events=EventFrame(frame_idx=idx, data=data),
            returns=ReturnFrame(values=self._scratch.copy(), mode=self.config.return_mode),
            ema=self.state.values.copy(),
            intensity=self._clamped.copy(),
        )

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self) -> "EdrProcessor":
        return self

    def __exit__(self, *exc):
        self.close()
