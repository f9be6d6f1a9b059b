"""Frame-difference and DVS-style baselines for speed/sparsity comparisons.

These are the cheap alternatives the event transform is measured against:
signed inter-frame differences (gray or per-channel RGB) and a two-frame
hard-thresholded log-intensity change that emulates an event camera.
All of them are stateless beyond the previous frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EventFrame, IntensityFrame
from .errors import DomainError, ShapeError

DEFAULT_LOG_DIFF_THETA = 0.15  # placeholder magnitude, not a calibrated value


@dataclass
class DiffFrame:
    """Signed intensity differences, planar ``(channels, H, W)`` in [-1, 1]."""

    data: np.ndarray

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def _check_pair(prev: IntensityFrame, cur: IntensityFrame, channels: int):
    if prev.data.shape != cur.data.shape:
        raise ShapeError(f"frame shapes differ: {prev.data.shape} vs {cur.data.shape}")
    if prev.channels != channels:
        raise ShapeError(f"expected {channels}-channel frames, got {prev.channels}")


def gray_diff(prev: IntensityFrame, cur: IntensityFrame) -> DiffFrame:
    """Signed per-pixel difference of two grayscale frames: ``cur - prev``."""
    _check_pair(prev, cur, 1)
    return DiffFrame(data=cur.data - prev.data)


def rgb_diff(prev: IntensityFrame, cur: IntensityFrame) -> DiffFrame:
    """Signed per-pixel, per-channel difference of two RGB frames."""
    _check_pair(prev, cur, 3)
    return DiffFrame(data=cur.data - prev.data)


def log_diff_events(prev: IntensityFrame, cur: IntensityFrame,
                    theta: float = DEFAULT_LOG_DIFF_THETA) -> EventFrame:
    """Two-frame event-camera emulation: hard-threshold the log-intensity change.

    ON fires where ``ln(cur) - ln(prev) > theta``, OFF where it drops below
    ``-theta``.  This keeps the emulation invariant to global gain applied
    to both frames.  It is an approximation of real sensor behavior: the
    reference level here is simply the previous frame, not the level at the
    pixel's last emitted event.
    """
    theta = float(theta)
    if not math.isfinite(theta) or theta <= 0.0:
        raise DomainError(f"theta must be a positive finite log-intensity step, got {theta}")
    _check_pair(prev, cur, 1)
    ldiff = np.log(cur.data) - np.log(prev.data)
    out = np.zeros((2,) + ldiff.shape[1:], dtype=ldiff.dtype)
    out[0] = ldiff[0] > theta
    out[1] = ldiff[0] < -theta
    return EventFrame(frame_idx=0, data=out)
