"""Shared fixtures and independent reference implementations.

The oracles here are deliberately written in the most direct form
possible (explicit weighted sums, per-element loops over float64), so
they share no code path with the streaming engine they check.
"""

import numpy as np
import pytest

from edr import EdrConfig, IntensityFrame, TimescaleParams


def ema_weighted_sum_oracle(seq: np.ndarray, alpha: float) -> np.ndarray:
    """Direct (non-recursive) EMA: for each t,
    ema(t) = alpha * sum_{s=0}^{t-1} (1-alpha)^s * seq[t-s] + (1-alpha)^t * seq[0].

    ``seq`` has time on axis 0; everything runs in float64.
    """
    seq = np.asarray(seq, dtype=np.float64)
    t_count = seq.shape[0]
    alpha = float(alpha)
    weights = np.zeros((t_count, t_count), dtype=np.float64)
    for t in range(t_count):
        for u in range(1, t + 1):
            weights[t, u] = alpha * (1.0 - alpha) ** (t - u)
        weights[t, 0] = (1.0 - alpha) ** t
    return np.tensordot(weights, seq, axes=(1, 0))


def reference_events(frames, config: EdrConfig) -> list[np.ndarray]:
    """Scalar-at-a-time float64 re-implementation of the whole pipeline.

    Returns one (2*K*C, H, W) float64 array per frame.  Slow by design;
    keep inputs small.
    """
    first = frames[0]
    c, h, w = first.data.shape
    k = config.n_timescales
    ema = np.zeros((k, c, h, w), dtype=np.float64)
    out = []
    for t, frame in enumerate(frames):
        x = np.clip(np.asarray(frame.data, dtype=np.float64), config.epsilon, 1.0)
        events = np.zeros((2 * k * c, h, w), dtype=np.float64)
        for ki, ts in enumerate(config.timescales):
            for ci in range(c):
                for yy in range(h):
                    for xx in range(w):
                        v = x[ci, yy, xx]
                        if t == 0:
                            ema[ki, ci, yy, xx] = v
                        else:
                            ema[ki, ci, yy, xx] += ts.alpha * (v - ema[ki, ci, yy, xx])
                        ratio = v / ema[ki, ci, yy, xx]
                        if config.return_mode == "log":
                            r = ts.beta * np.log(ratio)
                            e_on = max(r - ts.nu_on, 0.0)
                            e_off = max(-ts.nu_off - r, 0.0)
                        else:
                            r = ratio ** ts.beta
                            e_on = max(r - (1.0 + ts.nu_on), 0.0)
                            e_off = max((1.0 - ts.nu_off) - r, 0.0)
                        if config.threshold_mode == "hard":
                            e_on = 1.0 if e_on > 0 else 0.0
                            e_off = 1.0 if e_off > 0 else 0.0
                        pair = ki * c + ci
                        events[2 * pair, yy, xx] = e_on
                        events[2 * pair + 1, yy, xx] = e_off
        out.append(events)
    return out


def random_frames(rng: np.random.Generator, n: int, width: int, height: int,
                  channels: int = 1, lo: float = 0.05, hi: float = 1.0):
    data = rng.uniform(lo, hi, size=(n, channels, height, width)).astype(np.float32)
    return [IntensityFrame(data=data[i]) for i in range(n)]


def single_timescale_config(alpha: float, **kwargs) -> EdrConfig:
    ts_kwargs = {k: kwargs.pop(k) for k in ("beta", "nu_on", "nu_off") if k in kwargs}
    return EdrConfig(timescales=(TimescaleParams.from_alpha(alpha, **ts_kwargs),), **kwargs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
