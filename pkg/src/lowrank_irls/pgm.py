"""Minimal PGM (P2/P5, maxval <= 255) reader and P5 writer."""

import dataclasses
import re

import numpy as np

from .exceptions import FormatError


@dataclasses.dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale image; ``pixels`` is a ``height x width`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise FormatError("image must be a nonempty 2-D array")
        if np.issubdtype(px.dtype, np.floating) and not np.all(px == np.round(px)):
            raise FormatError("pixel values must be integers")
        if px.min() < 0 or px.max() > 255:
            raise FormatError("pixel values must lie in [0, 255]")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px, dtype=np.uint8))

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header(data, count, pos):
    values = []
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated PGM header")
        values.append(m.group(1))
        pos = m.end()
    return values, pos


def read_pgm(data):
    """Decode P5 (binary) or P2 (plain) PGM bytes."""
    data = bytes(data)
    (magic,), pos = _header(data, 1, 0)
    if magic not in (b"P5", b"P2"):
        raise FormatError(f"unsupported magic {magic!r}")
    try:
        tokens, pos = _header(data, 3, pos)
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError("malformed PGM header") from exc
    if width < 1 or height < 1:
        raise FormatError("image dimensions must be positive")
    if not 0 < maxval <= 255:
        raise FormatError(f"maxval {maxval} not supported (must be 1..255)")
    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates header and raster
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise FormatError("missing whitespace after PGM header")
        raster = data[pos + 1 : pos + 1 + count]
        if len(raster) < count:
            raise FormatError(f"truncated raster: {len(raster)} of {count} bytes")
        px = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    else:
        parts = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(parts) < count:
            raise FormatError(f"truncated raster: {len(parts)} of {count} values")
        try:
            px = np.array([int(t) for t in parts[:count]], dtype=np.int64).reshape(height, width)
        except ValueError as exc:
            raise FormatError("non-integer pixel in plain PGM") from exc
    if px.max() > maxval:
        raise FormatError("pixel value exceeds maxval")
    if maxval != 255:
        px = np.round(px.astype(np.float64) * 255.0 / maxval)
    return GrayImage(px)


def write_pgm(img):
    """Encode as P5 with maxval 255."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def write_pgm_plain(img):
    rows = "\n".join(" ".join(str(v) for v in row) for row in img.pixels.tolist())
    return f"P2\n{img.width} {img.height}\n255\n{rows}\n".encode("ascii")
