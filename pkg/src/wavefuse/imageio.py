"""Grayscale image I/O (binary PGM and 8-bit PNG) plus bilinear resizing.

Pixels live in [0, 1] as float64: byte value b loads as b / 255 exactly, and
saving quantizes with round-half-up to round(clamp(p, 0, 1) * 255).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError

__all__ = ["GrayImage", "load_grayscale", "save_grayscale", "resize_bilinear", "quantize_u8"]

# ITU-R BT.601 luma weights for RGB inputs
_LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale raster: float64 pixels in [0, 1], shape [height, width]."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", np.asarray(self.pixels, dtype=np.float64))
        p = self.pixels
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"pixels must be a non-empty 2D array, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("pixels must be finite")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError(f"pixels must lie in [0, 1], got [{p.min()}, {p.max()}]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def quantize_u8(pixels: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats to 0..255 bytes, rounding halves up."""
    p = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    return np.floor(p * 255.0 + 0.5).astype(np.uint8)


def load_grayscale(path) -> GrayImage:
    """Load a PGM (binary P5) or PNG file; format detected from magic bytes."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:2] == b"P5":
        return _load_pgm(path)
    if head == b"\x89PNG\r\n\x1a\n":
        return _load_png(path)
    raise FormatError(f"{path}: unrecognized image format (magic {head[:4]!r})")


def _pgm_tokens(data: bytes):
    """First four whitespace-separated header tokens; '#' comments run to EOL."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise FormatError("truncated PGM header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    # exactly one whitespace byte separates the maxval token from the raster
    return tokens, pos + 1


def _load_pgm(path: Path) -> GrayImage:
    data = path.read_bytes()
    tokens, raster_start = _pgm_tokens(data)
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header tokens {tokens[1:]}") from None
    if width < 1 or height < 1:
        raise FormatError(f"{path}: invalid PGM dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{path}: unsupported PGM maxval {maxval}; only 8-bit (255) is handled")
    raster = data[raster_start : raster_start + width * height]
    if len(raster) < width * height:
        raise FormatError(f"{path}: truncated PGM raster ({len(raster)} of {width * height} bytes)")
    pix = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(pix.astype(np.float64) / 255.0)


def _load_png(path: Path) -> GrayImage:
    with Image.open(path) as im:
        im.load()
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64) / 255.0
        elif im.mode == "RGB":
            rgb = np.asarray(im, dtype=np.float64)
            arr = (_LUMA[0] * rgb[..., 0] + _LUMA[1] * rgb[..., 1] + _LUMA[2] * rgb[..., 2]) / 255.0
        else:
            raise FormatError(
                f"{path}: unsupported PNG mode '{im.mode}'; need 8-bit grayscale or RGB"
            )
    return GrayImage(np.clip(arr, 0.0, 1.0))


def save_grayscale(image: GrayImage, path) -> None:
    """Write 8-bit output; the container is chosen by file extension."""
    path = Path(path)
    q = quantize_u8(image.pixels)
    ext = path.suffix.lower()
    if ext == ".pgm":
        header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
        path.write_bytes(header + q.tobytes())
    elif ext == ".png":
        Image.fromarray(q, mode="L").save(path)
    else:
        raise FormatError(f"cannot infer output format from extension '{ext}' (use .pgm or .png)")


def resize_bilinear(image: GrayImage, new_width: int, new_height: int) -> GrayImage:
    """Bilinear resample with half-pixel-centered sampling, clamped at edges."""
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target dims must be >= 1, got {new_width}x{new_height}")
    src = image.pixels
    h, w = src.shape
    sx = np.clip((np.arange(new_width) + 0.5) * (w / new_width) - 0.5, 0.0, w - 1.0)
    sy = np.clip((np.arange(new_height) + 0.5) * (h / new_height) - 0.5, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = (sy - y0)[:, None]
    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1.0 - fy) + bot * fy
    return GrayImage(np.clip(out, 0.0, 1.0))
