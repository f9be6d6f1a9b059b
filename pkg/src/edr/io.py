"""Frame ingestion, binary event containers, and event-channel rendering.

Three byte-level surfaces live here:

* Netpbm images (binary PGM/P5 and PPM/P6, 8-bit, maxval 255) for
  input frame sequences and rendered event channels.
* "EDRD", a dense little-endian container holding every event plane of
  every frame as float32.
* "EDRS", a sparse address-event container holding one 13-byte record
  per nonzero event magnitude, sorted by (frame, row, column, channel).

Both containers round-trip bit-exactly.  The sparse layout stores no
frame count, so reconstructing a stream with trailing all-zero frames
needs the frame count (or explicit frame indices) supplied by the caller.
"""

from __future__ import annotations

import glob
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    DEFAULT_EPSILON,
    DTYPE,
    EventFrame,
    IntensityFrame,
    clamp_intensity,
    normalize_u8,
    to_luma,
)
from .errors import DomainError, FormatError, ParseError, ShapeError, ValidationError

DENSE_MAGIC = b"EDRD"
SPARSE_MAGIC = b"EDRS"
FORMAT_VERSION = 1

_DENSE_HEADER = struct.Struct("<4sBHHBBI")   # magic, version, width, height, pairs, reserved, frame_count
_SPARSE_HEADER = struct.Struct("<4sBHHBBQ")  # magic, version, width, height, pairs, reserved, event_count
_FRAME_IDX = struct.Struct("<I")

SPARSE_RECORD_DTYPE = np.dtype([
    ("frame_idx", "<u4"),
    ("x", "<u2"),
    ("y", "<u2"),
    ("channel", "u1"),
    ("magnitude", "<f4"),
])
assert SPARSE_RECORD_DTYPE.itemsize == 13

MAX_PAIRS = 127
_WHITESPACE = b" \t\r\n\x0b\x0c"


@dataclass(frozen=True)
class StreamHeader:
    """Decoded container header: geometry plus payload count."""

    kind: str  # "dense" | "sparse"
    version: int
    width: int
    height: int
    n_pairs: int
    count: int  # frames (dense) or events (sparse)


# ---------------------------------------------------------------------------
# Netpbm images
# ---------------------------------------------------------------------------

def _next_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        b = buf[pos]
        if b in _WHITESPACE:
            pos += 1
        elif b == 0x23:  # '#' comment runs to end of line
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise ParseError("unexpected end of header", offset=pos)
    start = pos
    while pos < n and buf[pos] not in _WHITESPACE:
        pos += 1
    return buf[start:pos], pos


def _header_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    token, end = _next_token(buf, pos)
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"{what} is not an integer: {token!r}", offset=pos) from None
    if value <= 0:
        raise ParseError(f"{what} must be positive, got {value}", offset=pos)
    return value, end


def read_netpbm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file as planar uint8 ``(C, H, W)``."""
    buf = Path(path).read_bytes()
    magic, pos = _next_token(buf, 0)
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(f"not a binary PGM/PPM file, magic {magic!r}", offset=0)
    width, pos = _header_int(buf, pos, "width")
    height, pos = _header_int(buf, pos, "height")
    maxval, pos = _header_int(buf, pos, "maxval")
    if maxval != 255:
        raise ParseError(f"only 8-bit maxval 255 is supported, got {maxval}", offset=pos)
    if pos >= len(buf) or buf[pos] not in _WHITESPACE:
        raise ParseError("missing whitespace after maxval", offset=pos)
    pos += 1
    need = width * height * channels
    if len(buf) - pos < need:
        raise ParseError(
            f"pixel data truncated: need {need} bytes, have {len(buf) - pos}", offset=len(buf)
        )
    raster = np.frombuffer(buf, dtype=np.uint8, count=need, offset=pos)
    return np.transpose(raster.reshape(height, width, channels), (2, 0, 1)).copy()


def write_netpbm(path: str | os.PathLike, image: np.ndarray) -> None:
    """Write planar uint8 ``(1, H, W)`` as PGM or ``(3, H, W)`` as PPM."""
    if image.ndim == 2:
        image = image[np.newaxis]
    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise ShapeError(f"image must be (1|3, H, W) uint8, got {image.shape}")
    if image.dtype != np.uint8:
        raise DomainError(f"image samples must be uint8, got {image.dtype}")
    magic = b"P5" if image.shape[0] == 1 else b"P6"
    _, h, w = image.shape
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(np.transpose(image, (1, 2, 0))).tobytes())


# ---------------------------------------------------------------------------
# Frame ingestion
# ---------------------------------------------------------------------------

def frame_from_u8(samples: np.ndarray, color_mode: str = "luma",
                  epsilon: float = DEFAULT_EPSILON) -> IntensityFrame:
    """Normalize 8-bit planar samples to an intensity frame.

    Samples map to v/255; 3-channel input collapses to BT.601 luma first
    when ``color_mode`` is ``"luma"``; the result is clamped to
    ``[epsilon, 1]`` so downstream logs and divisions stay finite.
    """
    if samples.ndim == 2:
        samples = samples[np.newaxis]
    x = normalize_u8(samples)
    if color_mode == "luma" and x.shape[0] == 3:
        x = to_luma(x)
    return IntensityFrame(data=clamp_intensity(x, epsilon).astype(DTYPE, copy=False))


def list_frame_files(source: str | os.PathLike | Sequence[str | os.PathLike]) -> list[Path]:
    """Resolve a directory, glob pattern, or explicit list into a sorted file list."""
    if isinstance(source, (list, tuple)):
        paths = [Path(p) for p in source]
    else:
        src = Path(source)
        if src.is_dir():
            paths = [p for p in src.iterdir()
                     if p.suffix.lower() in (".pgm", ".ppm") and p.is_file()]
        elif any(ch in str(source) for ch in "*?["):
            paths = [Path(p) for p in glob.glob(str(source))]
        else:
            paths = [src]
    if not paths:
        raise ParseError(f"no frame files matched {source!r}")
    return sorted(paths, key=lambda p: p.name)


def read_frames(source, color_mode: str = "luma",
                epsilon: float = DEFAULT_EPSILON) -> list[IntensityFrame]:
    """Read a PGM/PPM sequence in filename-lexicographic order.

    All frames must share geometry (and channel count after color handling).
    """
    frames: list[IntensityFrame] = []
    for path in list_frame_files(source):
        try:
            samples = read_netpbm(path)
        except ParseError as exc:
            raise type(exc)(f"{path}: {exc.args[0]}") from exc
        frame = frame_from_u8(samples, color_mode=color_mode, epsilon=epsilon)
        if frames and frame.data.shape != frames[0].data.shape:
            raise ShapeError(
                f"{path}: frame shape {frame.data.shape} differs from "
                f"first frame {frames[0].data.shape}"
            )
        frames.append(frame)
    return frames


def read_raw_frames(path: str | os.PathLike, width: int, height: int, channels: int,
                    color_mode: str = "luma",
                    epsilon: float = DEFAULT_EPSILON) -> list[IntensityFrame]:
    """Read a headerless stream of interleaved 8-bit frames."""
    if width < 1 or height < 1 or channels not in (1, 3):
        raise DomainError(f"invalid raw geometry {width}x{height}x{channels}")
    buf = Path(path).read_bytes()
    frame_bytes = width * height * channels
    n, rem = divmod(len(buf), frame_bytes)
    if rem:
        raise ParseError(
            f"raw stream length {len(buf)} is not a multiple of frame size {frame_bytes}",
            offset=n * frame_bytes,
        )
    raster = np.frombuffer(buf, dtype=np.uint8).reshape(n, height, width, channels)
    return [frame_from_u8(np.transpose(raster[i], (2, 0, 1)), color_mode, epsilon)
            for i in range(n)]


# ---------------------------------------------------------------------------
# Dense container (EDRD)
# ---------------------------------------------------------------------------

def _stream_geometry(frames: Sequence[EventFrame]) -> tuple[int, int, int]:
    if not frames:
        return 0, 0, 0
    w, h, pairs = frames[0].width, frames[0].height, frames[0].n_pairs
    for f in frames:
        if (f.width, f.height, f.n_pairs) != (w, h, pairs):
            raise ShapeError(
                f"frame {f.frame_idx} geometry {(f.width, f.height, f.n_pairs)} "
                f"differs from stream {(w, h, pairs)}"
            )
    if pairs > MAX_PAIRS:
        raise DomainError(f"at most {MAX_PAIRS} ON/OFF pairs fit the channel byte, got {pairs}")
    if w > 0xFFFF or h > 0xFFFF:
        raise DomainError(f"geometry {w}x{h} exceeds the u16 header fields")
    return w, h, pairs


def write_dense(path: str | os.PathLike, frames: Sequence[EventFrame]) -> None:
    """Write event frames as a dense EDRD container (read back bit-exactly)."""
    w, h, pairs = _stream_geometry(frames)
    with open(path, "wb") as f:
        f.write(_DENSE_HEADER.pack(DENSE_MAGIC, FORMAT_VERSION, w, h, pairs, 0, len(frames)))
        for frame in frames:
            f.write(_FRAME_IDX.pack(frame.frame_idx))
            f.write(np.ascontiguousarray(frame.data, dtype="<f4").tobytes())


def read_dense(path: str | os.PathLike) -> list[EventFrame]:
    """Read an EDRD container written by :func:`write_dense`."""
    buf = Path(path).read_bytes()
    if len(buf) < _DENSE_HEADER.size:
        raise ParseError("file shorter than the container header", offset=len(buf))
    magic, version, w, h, pairs, _, n_frames = _DENSE_HEADER.unpack_from(buf, 0)
    if magic != DENSE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {DENSE_MAGIC!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    pos = _DENSE_HEADER.size
    plane_bytes = 2 * pairs * w * h * 4
    frames = []
    for _ in range(n_frames):
        if len(buf) - pos < _FRAME_IDX.size + plane_bytes:
            raise ParseError(
                f"payload truncated: header declares {n_frames} frames", offset=len(buf)
            )
        (idx,) = _FRAME_IDX.unpack_from(buf, pos)
        pos += _FRAME_IDX.size
        data = np.frombuffer(buf, dtype="<f4", count=2 * pairs * w * h, offset=pos)
        pos += plane_bytes
        frames.append(EventFrame(frame_idx=idx, data=data.reshape(2 * pairs, h, w).copy()))
    if pos != len(buf):
        raise ParseError(
            f"{len(buf) - pos} trailing bytes beyond the declared {n_frames} frames", offset=pos
        )
    return frames


# ---------------------------------------------------------------------------
# Sparse container (EDRS)
# ---------------------------------------------------------------------------

def sparsify(frames: Sequence[EventFrame]) -> np.ndarray:
    """Extract nonzero events as sorted address-event records.

    Zero magnitudes are never stored; records come out sorted by
    (frame_idx, y, x, channel).
    """
    _stream_geometry(frames)
    chunks = []
    for frame in frames:
        # nonzero on the (H, W, 2P) view yields (y, x, channel) lexicographic order
        planes = np.transpose(frame.data, (1, 2, 0))
        ys, xs, cs = np.nonzero(planes)
        rec = np.empty(len(ys), dtype=SPARSE_RECORD_DTYPE)
        rec["frame_idx"] = frame.frame_idx
        rec["x"] = xs
        rec["y"] = ys
        rec["channel"] = cs
        rec["magnitude"] = planes[ys, xs, cs]
        chunks.append(rec)
    records = (np.concatenate(chunks) if chunks
               else np.empty(0, dtype=SPARSE_RECORD_DTYPE))
    if len(records) and np.any(np.diff(records["frame_idx"].astype(np.int64)) < 0):
        records = records[np.argsort(records["frame_idx"], kind="stable")]
    return records


def densify(records: np.ndarray, width: int, height: int, n_pairs: int,
            frame_indices: Iterable[int] | None = None) -> list[EventFrame]:
    """Rebuild dense event frames from sparse records.

    ``frame_indices`` names the frames to materialize (so trailing or
    interior all-zero frames survive the round trip); by default frames
    0..max(frame_idx) are produced.
    """
    if frame_indices is None:
        last = int(records["frame_idx"].max()) if len(records) else -1
        frame_indices = range(last + 1)
    frames = []
    for idx in frame_indices:
        data = np.zeros((2 * n_pairs, height, width), dtype=DTYPE)
        rec = records[records["frame_idx"] == idx]
        data[rec["channel"], rec["y"], rec["x"]] = rec["magnitude"]
        frames.append(EventFrame(frame_idx=int(idx), data=data))
    return frames


def write_sparse(path: str | os.PathLike, frames: Sequence[EventFrame]) -> None:
    """Write event frames as a sparse EDRS container.

    An all-zero stream produces a header-only file; see :func:`densify`
    for how frame counts are recovered.
    """
    w, h, pairs = _stream_geometry(frames)
    records = sparsify(frames)
    with open(path, "wb") as f:
        f.write(_SPARSE_HEADER.pack(SPARSE_MAGIC, FORMAT_VERSION, w, h, pairs, 0, len(records)))
        f.write(records.tobytes())


def read_sparse(path: str | os.PathLike, strict: bool = False) -> tuple[StreamHeader, np.ndarray]:
    """Read an EDRS container; returns its header and validated records.

    Records arriving out of order are re-sorted unless ``strict`` is set,
    in which case they are rejected.
    """
    buf = Path(path).read_bytes()
    if len(buf) < _SPARSE_HEADER.size:
        raise ParseError("file shorter than the container header", offset=len(buf))
    magic, version, w, h, pairs, _, n_events = _SPARSE_HEADER.unpack_from(buf, 0)
    if magic != SPARSE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SPARSE_MAGIC!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    payload = len(buf) - _SPARSE_HEADER.size
    if payload != n_events * SPARSE_RECORD_DTYPE.itemsize:
        raise ParseError(
            f"payload is {payload} bytes but header declares {n_events} "
            f"{SPARSE_RECORD_DTYPE.itemsize}-byte records",
            offset=len(buf),
        )
    records = np.frombuffer(buf, dtype=SPARSE_RECORD_DTYPE, offset=_SPARSE_HEADER.size).copy()
    header = StreamHeader("sparse", version, w, h, pairs, n_events)

    def _offset(i: int) -> int:
        return _SPARSE_HEADER.size + i * SPARSE_RECORD_DTYPE.itemsize

    for name, bound in (("x", w), ("y", h), ("channel", 2 * pairs)):
        bad = np.nonzero(records[name] >= bound)[0]
        if len(bad):
            i = int(bad[0])
            raise ValidationError(
                f"record {i}: {name}={records[name][i]} out of range [0, {bound})",
                offset=_offset(i),
            )
    bad = np.nonzero(~np.isfinite(records["magnitude"]) | (records["magnitude"] < 0))[0]
    if len(bad):
        i = int(bad[0])
        raise ValidationError(
            f"record {i}: magnitude {records['magnitude'][i]} is not a finite nonnegative value",
            offset=_offset(i),
        )
    order = np.lexsort((records["channel"], records["x"], records["y"], records["frame_idx"]))
    if not np.array_equal(order, np.arange(len(records))):
        if strict:
            raise ValidationError("records are not sorted by (frame, y, x, channel)")
        records = records[order]
    return header, records


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render_event_frame(frame: EventFrame, timescale: int,
                       max_magnitude: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Map one timescale's ON and OFF planes to 8-bit grayscale images.

    ``value = round(255 * min(magnitude / max_magnitude, 1))`` with
    round-half-up, so hard (0/1) events render as pure black/white at the
    default scale.
    """
    if not 0 <= timescale < frame.n_pairs:
        raise DomainError(f"timescale {timescale} out of range [0, {frame.n_pairs})")
    if not max_magnitude > 0:
        raise DomainError(f"max_magnitude must be positive, got {max_magnitude}")

    def to_u8(plane: np.ndarray) -> np.ndarray:
        scaled = np.minimum(plane.astype(np.float64) / max_magnitude, 1.0)
        return np.floor(255.0 * scaled + 0.5).astype(np.uint8)

    return to_u8(frame.on(timescale)), to_u8(frame.off(timescale))
