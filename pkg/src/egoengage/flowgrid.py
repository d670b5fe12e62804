"""Grid-quantized optical flow: containers, EEFL binary IO, block-matching estimation,
and temporal Gaussian smoothing.

EEFL file layout (little-endian): magic ``EEFL``, version u16 (=1), grid_w u16,
grid_h u16, fps f32, frame_count u32, then frame_count * grid_h * grid_w * 2
f32 values (dx, dy), frame-major with row-major cells.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np
from scipy.ndimage import convolve1d

from .errors import (
    BadMagic,
    MismatchedDimensions,
    NonFiniteValue,
    TooFewFrames,
    TruncatedPayload,
    VersionUnsupported,
)

MAGIC = b"EEFL"
FORMAT_VERSION = 1
DEFAULT_GRID_W = 16
DEFAULT_GRID_H = 12
DEFAULT_FPS = 15.0

_HEADER = struct.Struct("<4sHHHfI")


@dataclass(frozen=True)
class FlowField:
    """One frame's grid of 2-D flow vectors, shape (grid_h, grid_w, 2) as (dx, dy)."""

    frame_index: int
    vectors: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 2:
            raise ValueError(f"vectors must have shape (grid_h, grid_w, 2), got {v.shape}")
        if not np.isfinite(v).all():
            raise NonFiniteValue(f"non-finite flow at frame {self.frame_index}")
        object.__setattr__(self, "vectors", v)

    @property
    def grid_h(self) -> int:
        return self.vectors.shape[0]

    @property
    def grid_w(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class FlowSequence:
    """Time-ordered flow fields for one video, with consecutive frame indices."""

    video_id: str
    fps: float
    fields: tuple[FlowField, ...]
    grid_w: int = DEFAULT_GRID_W
    grid_h: int = DEFAULT_GRID_H

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        fields = tuple(self.fields)
        if not fields:
            raise ValueError("fields must be nonempty")
        first = fields[0].frame_index
        for k, f in enumerate(fields):
            if f.frame_index != first + k:
                raise ValueError("frame_index must increase by exactly 1")
            if f.grid_h != self.grid_h or f.grid_w != self.grid_w:
                raise ValueError("all fields must share the declared grid shape")
        object.__setattr__(self, "fields", fields)

    def __len__(self) -> int:
        return len(self.fields)

    def to_array(self) -> np.ndarray:
        """Stack all fields into shape (n_frames, grid_h, grid_w, 2)."""
        return np.stack([f.vectors for f in self.fields])

    @classmethod
    def from_array(
        cls,
        video_id: str,
        fps: float,
        array: np.ndarray,
        start_index: int = 0,
    ) -> "FlowSequence":
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim != 4 or arr.shape[3] != 2:
            raise ValueError(f"expected shape (n, grid_h, grid_w, 2), got {arr.shape}")
        fields = tuple(
            FlowField(start_index + i, arr[i]) for i in range(arr.shape[0])
        )
        return cls(video_id, fps, fields, grid_w=arr.shape[2], grid_h=arr.shape[1])


def write_flow(seq: FlowSequence, writer: BinaryIO) -> None:
    """Serialize a FlowSequence to the EEFL binary format."""
    writer.write(
        _HEADER.pack(MAGIC, FORMAT_VERSION, seq.grid_w, seq.grid_h, seq.fps, len(seq))
    )
    payload = seq.to_array().astype("<f4")
    writer.write(payload.tobytes())


def ingest_flow(reader: BinaryIO, video_id: str = "") -> FlowSequence:
    """Parse an EEFL stream; vectors round-trip bit-exactly through write_flow."""
    head = reader.read(_HEADER.size)
    if len(head) < 4:
        raise TruncatedPayload("stream shorter than the EEFL magic")
    if head[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {head[:4]!r}")
    if len(head) < _HEADER.size:
        raise TruncatedPayload("incomplete EEFL header")
    _, version, grid_w, grid_h, fps, frame_count = _HEADER.unpack(head)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"EEFL version {version} not supported")
    expected = frame_count * grid_h * grid_w * 2 * 4
    payload = reader.read()
    if len(payload) != expected:
        raise TruncatedPayload(
            f"payload has {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    if not np.isfinite(values).all():
        raise NonFiniteValue("flow payload contains non-finite values")
    arr = values.reshape(frame_count, grid_h, grid_w, 2)
    return FlowSequence.from_array(video_id, float(fps), arr)


def read_flow_file(path, video_id: str = "") -> FlowSequence:
    with open(path, "rb") as fh:
        return ingest_flow(fh, video_id=video_id)


def read_flow_header(path) -> tuple[int, int, float, int]:
    """(grid_w, grid_h, fps, frame_count) from an EEFL file without the payload."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < 4 or head[:4] != MAGIC:
        raise BadMagic(f"{path} is not an EEFL file")
    if len(head) < _HEADER.size:
        raise TruncatedPayload("incomplete EEFL header")
    _, version, grid_w, grid_h, fps, frame_count = _HEADER.unpack(head)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"EEFL version {version} not supported")
    return grid_w, grid_h, float(fps), frame_count


def write_flow_file(seq: FlowSequence, path) -> None:
    with open(path, "wb") as fh:
        write_flow(seq, fh)


def estimate_flow(
    frames: Sequence[np.ndarray],
    grid_w: int = DEFAULT_GRID_W,
    grid_h: int = DEFAULT_GRID_H,
    search_radius: int = 4,
    *,
    fps: float = DEFAULT_FPS,
    video_id: str = "",
) -> FlowSequence:
    """Coarse per-cell block matching between consecutive luminance images.

    For each grid cell, picks the integer displacement in
    [-search_radius, +search_radius]^2 minimizing the sum of absolute
    luminance differences against the next frame.  Field i describes motion
    from image i to i+1; the last field duplicates the penultimate one so the
    sequence has one field per input frame.
    """
    if len(frames) < 2:
        raise TooFewFrames("flow estimation needs at least two frames")
    imgs = [np.asarray(f, dtype=np.float64) for f in frames]
    shape = imgs[0].shape
    if any(im.shape != shape for im in imgs) or len(shape) != 2:
        raise MismatchedDimensions("all frames must be 2-D and identically sized")
    height, width = shape
    if height % grid_h or width % grid_w:
        raise MismatchedDimensions(
            f"image {width}x{height} not divisible by grid {grid_w}x{grid_h}"
        )
    cell_h, cell_w = height // grid_h, width // grid_w
    r = int(search_radius)
    # Fixed scan order makes ties deterministic and prefers the smallest motion.
    shifts = sorted(
        ((dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)),
        key=lambda s: (abs(s[0]) + abs(s[1]), s[0], s[1]),
    )
    fields = []
    for i in range(len(imgs) - 1):
        cur = imgs[i]
        padded = np.pad(imgs[i + 1], r, mode="edge")
        best_cost = np.full((grid_h, grid_w), np.inf)
        best = np.zeros((grid_h, grid_w, 2))
        for dy, dx in shifts:
            shifted = padded[r + dy : r + dy + height, r + dx : r + dx + width]
            diff = np.abs(cur - shifted)
            cost = diff.reshape(grid_h, cell_h, grid_w, cell_w).sum(axis=(1, 3))
            better = cost < best_cost
            best_cost[better] = cost[better]
            best[better] = (dx, dy)
        fields.append(best)
    fields.append(fields[-1].copy())
    return FlowSequence.from_array(video_id, fps, np.stack(fields))


def gaussian_kernel(sigma_frames: float) -> np.ndarray:
    """Unit-sum Gaussian kernel truncated at +-3 sigma."""
    radius = int(math.ceil(3.0 * sigma_frames))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (k / sigma_frames) ** 2)
    return kernel / kernel.sum()


def smooth_temporal(seq: FlowSequence, sigma_seconds: float) -> FlowSequence:
    """Convolve every cell component along time with a Gaussian of the given width.

    Sigma is given in seconds and converted to frames via the sequence fps.
    At the sequence boundaries the kernel is renormalized over the available
    support, so constant sequences stay constant.
    """
    if sigma_seconds <= 0:
        raise ValueError("sigma_seconds must be positive")
    kernel = gaussian_kernel(sigma_seconds * seq.fps)
    arr = seq.to_array()
    n = arr.shape[0]
    flat = arr.reshape(n, -1)
    num = convolve1d(flat, kernel, axis=0, mode="constant", cval=0.0)
    den = convolve1d(np.ones(n), kernel, mode="constant", cval=0.0)
    out = (num / den[:, None]).reshape(arr.shape)
    return FlowSequence.from_array(
        seq.video_id, seq.fps, out, start_index=seq.fields[0].frame_index
    )
