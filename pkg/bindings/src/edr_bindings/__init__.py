"""Array-in/array-out bindings for the edr streaming event transform.

The core package works in planar ``(channels, H, W)`` dataclasses; this
package trades that for plain channel-last numpy arrays so a training
loop can compute the event representation on the fly:

    import edr_bindings as eb

    proc = eb.create({"preset": "fast-slow"}, width=84, height=84)
    events = eb.process(proc, frame)        # (H, W) or (H, W, 3) in,
    net_in = eb.stack(rgb, events)          # (H, W, 3 + 2K) out

Input value convention (auto-detected from dtype): integer arrays hold
8-bit samples in [0, 255] and are divided by 255; floating arrays are
taken to already lie in [0, 1]. Out-of-range values are clamped by the
core transform either way.

A processor must not be used from two threads at once; distinct
processors share no state and may run in parallel.
"""

import numpy as np

import edr
from edr import (
    DomainError,
    EdrConfig,
    EdrProcessor,
    IntensityFrame,
    ShapeError,
    TimescaleParams,
    clamp_intensity,
    fast_slow_config,
    normalize_u8,
    to_luma,
)

__version__ = edr.__version__

__all__ = ["BoundProcessor", "create", "process", "stack", "reset", "__version__"]

_CONFIG_KEYS = {"preset", "timescales", "return_mode", "threshold_mode",
                "color_mode", "epsilon"}
_TIMESCALE_KEYS = {"tau_half", "alpha", "beta", "nu_on", "nu_off"}
_PRESETS = {"fast-slow": fast_slow_config}


class BoundProcessor:
    """Opaque handle owning one streaming transform.

    Geometry is fixed at construction; ``config`` echoes the parsed
    configuration. Create via :func:`create`, drive via
    :func:`process` and :func:`reset`.
    """

    def __init__(self, config: EdrConfig, width: int, height: int):
        self.config = config
        self.width = width
        self.height = height
        channels = 3 if config.color_mode == "per_channel" else 1
        self._proc = EdrProcessor(config, width=width, height=height,
                                  channels=channels)

    def __repr__(self):
        return (f"BoundProcessor({self.width}x{self.height}, "
                f"K={self.config.n_timescales}, {self.config.return_mode}/"
                f"{self.config.threshold_mode})")


def _parse_timescale(entry) -> TimescaleParams:
    if not isinstance(entry, dict):
        raise DomainError(f"timescale entry must be an object, got {type(entry).__name__}")
    unknown = set(entry) - _TIMESCALE_KEYS
    if unknown:
        raise DomainError(f"unknown timescale keys: {sorted(unknown)}")
    if ("alpha" in entry) == ("tau_half" in entry):
        raise DomainError("each timescale needs exactly one of 'alpha' or 'tau_half'")
    rest = {k: entry[k] for k in ("beta", "nu_on", "nu_off") if k in entry}
    if "alpha" in entry:
        return TimescaleParams.from_alpha(entry["alpha"], **rest)
    return TimescaleParams.from_half_life(entry["tau_half"], **rest)


def _parse_config(doc) -> EdrConfig:
    """Map a configuration dict onto the core config.

    ``None`` / ``{}`` selects a single fast-decay timescale (half-life 1
    frame): the conventional single-pathway setup when no timescale is
    stated. ``{"preset": "fast-slow"}`` selects the two-timescale
    preset. Schema violations raise the core's domain error.
    """
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise DomainError(f"config must be a dict, got {type(doc).__name__}")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise DomainError(f"unknown config keys: {sorted(unknown)}")
    if "preset" in doc:
        if "timescales" in doc:
            raise DomainError("'preset' and 'timescales' are mutually exclusive")
        if doc["preset"] not in _PRESETS:
            raise DomainError(f"unknown preset {doc['preset']!r}")
        base = _PRESETS[doc["preset"]]()
        timescales = base.timescales
    elif "timescales" in doc:
        entries = doc["timescales"]
        if not isinstance(entries, (list, tuple)) or not entries:
            raise DomainError("'timescales' must be a non-empty list")
        timescales = tuple(_parse_timescale(e) for e in entries)
    else:
        timescales = (TimescaleParams.from_alpha(0.5),)
    rest = {k: doc[k] for k in ("return_mode", "threshold_mode", "color_mode",
                                "epsilon") if k in doc}
    return EdrConfig(timescales=timescales, **rest)


def create(config, width: int, height: int) -> BoundProcessor:
    """Build a processor with fixed geometry from a configuration dict.

    See :func:`_parse_config` for the accepted document; ``None`` gives
    the single fast-decay default.
    """
    return BoundProcessor(_parse_config(config), int(width), int(height))


def _ingest(proc: BoundProcessor, frame: np.ndarray) -> IntensityFrame:
    frame = np.asarray(frame)
    if frame.ndim == 2:
        planar = frame[np.newaxis]
    elif frame.ndim == 3 and frame.shape[-1] == 3:
        planar = np.ascontiguousarray(np.moveaxis(frame, -1, 0))
    else:
        raise ShapeError(f"frame must be (H, W) or (H, W, 3), got {frame.shape}")
    if planar.shape[1:] != (proc.height, proc.width):
        raise ShapeError(f"frame is {planar.shape[1:]}, processor expects "
                         f"({proc.height}, {proc.width})")
    # integer arrays hold 8-bit samples; floats are already normalized
    if np.issubdtype(planar.dtype, np.integer):
        x = normalize_u8(planar)
    else:
        x = np.ascontiguousarray(planar, dtype=np.float32)
    if proc.config.color_mode == "luma" and x.shape[0] == 3:
        x = to_luma(x)
    return IntensityFrame(data=clamp_intensity(x, proc.config.epsilon))


def process(proc: BoundProcessor, frame: np.ndarray) -> np.ndarray:
    """Advance the stream by one frame and return its event planes.

    ``frame`` is ``(H, W)`` grayscale or ``(H, W, 3)`` RGB, integer
    8-bit samples or floats in [0, 1]; non-contiguous input is copied.
    Returns nonnegative float32 ``(H, W, 2K)``, channel-last, ON before
    OFF within each timescale.
    """
    events = proc._proc.process(_ingest(proc, frame))
    return np.ascontiguousarray(np.moveaxis(events.data, 0, -1))


def stack(rgb: np.ndarray, events: np.ndarray) -> np.ndarray:
    """Concatenate an appearance frame with event planes, channel-last.

    ``(H, W, 3)`` + ``(H, W, 2K)`` -> float32 ``(H, W, 3 + 2K)`` with
    the appearance planes first; values pass through unchanged.
    """
    rgb = np.asarray(rgb, dtype=np.float32)
    events = np.asarray(events, dtype=np.float32)
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise ShapeError(f"appearance input must be (H, W, 3), got {rgb.shape}")
    if events.ndim != 3 or events.shape[-1] % 2:
        raise ShapeError(f"event input must be (H, W, 2K), got {events.shape}")
    if rgb.shape[:2] != events.shape[:2]:
        raise ShapeError(f"geometry mismatch: {rgb.shape[:2]} vs {events.shape[:2]}")
    return np.concatenate([rgb, events], axis=-1)


def reset(proc: BoundProcessor) -> None:
    """Clear the stream state so the next frame starts a fresh sequence."""
    proc._proc.reset()
