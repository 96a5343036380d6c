"""Video ingestion: decode inputs into grayscale luma frames in [0, 1].

Accepted containers are YUV4MPEG2 (``.y4m``), the TPQIRAW1 raw-luma binary
format, and directories of PNG/PPM image files.  Compressed containers are
out of scope; pre-decode with ffmpeg or similar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

RAW_MAGIC = b"TPQIRAW1"

# BT.601 full-range luma weights for RGB inputs.
BT601_WEIGHTS = np.array([0.299, 0.587, 0.114])

# Chroma plane size per luma pixel count, by Y4M colorspace family.
_Y4M_CHROMA_FRACTION = {
    "420": 0.25,
    "422": 0.5,
    "444": 1.0,
    "mono": 0.0,
}


class FormatError(ValueError):
    """Raised when an input file violates its container format."""


@dataclass
class LumaSequence:
    """Ordered grayscale frames sharing one geometry.

    ``frames`` is an (n, height, width) float32 array with samples in [0, 1].
    ``frame_rate`` is informational only.
    """

    frames: np.ndarray
    frame_rate: float = 30.0
    source_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 3:
            raise ValueError(f"frames must be 3-D (n, h, w), got shape {self.frames.shape}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def validate(self) -> "LumaSequence":
        if self.n_frames < 3:
            raise ValueError(f"sequence needs >= 3 frames, got {self.n_frames}")
        if not np.isfinite(self.frames).all():
            raise ValueError("frames contain non-finite samples")
        lo, hi = float(self.frames.min()), float(self.frames.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"samples outside [0, 1]: min={lo}, max={hi}")
        return self


def _parse_y4m_header(line: bytes, offset: int) -> tuple[int, int, float, str]:
    text = line.decode("ascii", errors="replace")
    fields = text.split(" ")
    if fields[0] != "YUV4MPEG2":
        raise FormatError(f"not a YUV4MPEG2 stream (byte offset {offset}): {fields[0]!r}")
    width = height = 0
    fps = 30.0
    colorspace = "420"
    for tok in fields[1:]:
        if not tok:
            continue
        key, val = tok[0], tok[1:]
        if key == "W":
            width = int(val)
        elif key == "H":
            height = int(val)
        elif key == "F":
            m = re.fullmatch(r"(\d+):(\d+)", val)
            if not m:
                raise FormatError(f"bad frame-rate token {tok!r} (byte offset {offset})")
            num, den = int(m.group(1)), int(m.group(2))
            fps = num / den if den else 30.0
        elif key == "C":
            if val.startswith("420"):
                colorspace = "420"
            elif val.startswith("422"):
                colorspace = "422"
            elif val.startswith("444"):
                colorspace = "444"
            elif val.startswith("mono"):
                colorspace = "mono"
            else:
                raise FormatError(f"unsupported colorspace C{val} (8-bit 420/422/444/mono only)")
    if width <= 0 or height <= 0:
        raise FormatError(f"missing or invalid W/H in Y4M header (byte offset {offset})")
    return width, height, fps, colorspace


def read_y4m(path) -> LumaSequence:
    """Read a YUV4MPEG2 file, keeping the Y plane only (8-bit, scaled by /255)."""
    data = Path(path).read_bytes()
    eol = data.find(b"\n")
    if eol < 0:
        raise FormatError("no header line terminator found (byte offset 0)")
    width, height, fps, colorspace = _parse_y4m_header(data[:eol], 0)
    y_size = width * height
    c_size = int(y_size * _Y4M_CHROMA_FRACTION[colorspace]) * 2
    frames = []
    pos = eol + 1
    index = 0
    while pos < len(data):
        frame_eol = data.find(b"\n", pos)
        if frame_eol < 0 or not data[pos:frame_eol].startswith(b"FRAME"):
            raise FormatError(f"expected FRAME marker for frame {index} at byte offset {pos}")
        start = frame_eol + 1
        end = start + y_size + c_size
        if end > len(data):
            raise FormatError(f"truncated payload for frame {index} (byte offset {start})")
        y = np.frombuffer(data[start : start + y_size], dtype=np.uint8)
        frames.append(y.reshape(height, width))
        pos = end
        index += 1
    if not frames:
        raise FormatError("no frames in Y4M stream")
    planes = np.stack(frames).astype(np.float32) / 255.0
    return LumaSequence(planes, frame_rate=fps, source_id=str(path))


def write_y4m(seq: LumaSequence, path) -> None:
    """Write a sequence as 8-bit 4:2:0 Y4M with neutral chroma."""
    fps_num = max(1, round(seq.frame_rate * 1000))
    header = f"YUV4MPEG2 W{seq.width} H{seq.height} F{fps_num}:1000 Ip A1:1 C420\n"
    if seq.width % 2 or seq.height % 2:
        raise ValueError("4:2:0 output needs even frame dimensions")
    chroma = np.full((seq.height // 2) * (seq.width // 2), 128, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for plane in seq.frames:
            fh.write(b"FRAME\n")
            y8 = np.clip(np.rint(plane * 255.0), 0, 255).astype(np.uint8)
            fh.write(y8.tobytes())
            fh.write(chroma.tobytes())
            fh.write(chroma.tobytes())


def read_raw(path) -> LumaSequence:
    """Read the TPQIRAW1 format: 8-byte magic, u32 LE width, u32 LE height,
    then concatenated width*height float32 LE row-major frames."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != RAW_MAGIC:
        raise FormatError("missing TPQIRAW1 magic (byte offset 0)")
    width = int(np.frombuffer(data[8:12], dtype="<u4")[0])
    height = int(np.frombuffer(data[12:16], dtype="<u4")[0])
    frame_bytes = width * height * 4
    payload = len(data) - 16
    if frame_bytes == 0 or payload % frame_bytes:
        raise FormatError(f"payload is not a whole number of {width}x{height} f32 frames")
    n = payload // frame_bytes
    if n == 0:
        raise FormatError("no frames in raw stream")
    planes = np.frombuffer(data[16:], dtype="<f4").reshape(n, height, width)
    return LumaSequence(planes.copy(), source_id=str(path))


def write_raw(seq: LumaSequence, path) -> None:
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(np.array([seq.width, seq.height], dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(seq.frames, dtype="<f4").tobytes())


def _to_luma(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 2:
        img = arr.astype(np.float64)
    elif arr.ndim == 3:
        img = arr[..., :3].astype(np.float64) @ BT601_WEIGHTS
    else:
        raise FormatError(f"unsupported image array shape {arr.shape}")
    if arr.dtype == np.uint8:
        img /= 255.0
    elif arr.dtype == np.uint16:
        img /= 65535.0
    return img.astype(np.float32)


def read_image_sequence(directory, pattern: str = "*") -> LumaSequence:
    """Read a lexicographically ordered PNG/PPM image sequence as luma frames."""
    root = Path(directory)
    files = sorted(p for p in root.glob(pattern) if p.suffix.lower() in (".png", ".ppm", ".pgm"))
    if len(files) < 3:
        raise FormatError(f"need >= 3 image files in {root}, found {len(files)}")
    planes = []
    shape = None
    for p in files:
        arr = np.asarray(Image.open(p))
        plane = _to_luma(arr)
        if shape is None:
            shape = plane.shape
        elif plane.shape != shape:
            raise FormatError(f"dimension mismatch: {p.name} is {plane.shape}, expected {shape}")
        planes.append(plane)
    return LumaSequence(np.stack(planes), source_id=str(root))


def read_video(path) -> LumaSequence:
    """Dispatch on path type/extension: directory, .y4m, or .raw/.tpqiraw."""
    p = Path(path)
    if p.is_dir():
        return read_image_sequence(p)
    suffix = p.suffix.lower()
    if suffix == ".y4m":
        return read_y4m(p)
    if suffix in (".raw", ".tpqiraw"):
        return read_raw(p)
    raise FormatError(f"unrecognized input {p} (expected .y4m, .raw, or an image directory)")


def resize_plane(plane: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Bilinear resample with half-pixel-center alignment; no anti-alias prefilter."""
    h, w = plane.shape
    if (w, h) == (target_w, target_h):
        return plane.copy()
    sx = w / target_w
    sy = h / target_h
    xs = (np.arange(target_w) + 0.5) * sx - 0.5
    ys = (np.arange(target_h) + 0.5) * sy - 0.5
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(np.intp)
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(xs - x0, 0.0, 1.0).astype(plane.dtype)
    fy = np.clip(ys - y0, 0.0, 1.0).astype(plane.dtype)
    top = plane[np.ix_(y0, x0)] * (1 - fx) + plane[np.ix_(y0, x1)] * fx
    bot = plane[np.ix_(y1, x0)] * (1 - fx) + plane[np.ix_(y1, x1)] * fx
    return top * (1 - fy[:, None]) + bot * fy[:, None]


def resize(seq: LumaSequence, target_w: int, target_h: int) -> LumaSequence:
    """Resize every frame to a fixed geometry (aspect ratio not preserved)."""
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    if (seq.width, seq.height) == (target_w, target_h):
        return LumaSequence(seq.frames.copy(), seq.frame_rate, seq.source_id)
    out = np.stack([resize_plane(f, target_w, target_h) for f in seq.frames])
    return LumaSequence(out, seq.frame_rate, seq.source_id)
