"""8-bit binary portable graymap (P5) I/O and pixel <-> float conversion.

P5 is the one required image format: trivially parsed bit-exactly, so
save followed by load round-trips every pixel. Floats live in [0, 1];
conversion back to 8 bits clamps then rounds half away from zero.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError


@dataclass
class GrayImage:
    pixels: np.ndarray  # uint8, (height, width)

    def __post_init__(self):
        if self.pixels.dtype != np.uint8 or self.pixels.ndim != 2:
            raise ValueError("GrayImage wants a 2-D uint8 array")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(np.float32) / 255.0


def float_to_u8(a: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1], scale to 0..255, round half away from zero."""
    scaled = np.clip(a, 0.0, 1.0).astype(np.float64) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Whitespace- and comment-skipping token scan; returns (token, new pos)."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError(f"unexpected end of header at byte {start}")
    return data[start:pos], pos


def load_pgm(path) -> GrayImage:
    data = Path(path).read_bytes()
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise FormatError(f"unsupported magic {magic!r} at byte 0; only binary "
                          "8-bit grayscale P5 is supported")
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _next_token(data, pos)
        if not tok.isdigit():
            raise FormatError(f"bad {name} token {tok!r} at byte {pos - len(tok)}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"maxval {maxval} unsupported; only 8-bit (255) P5")
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError(f"missing whitespace before raster at byte {pos}")
    pos += 1
    need = width * height
    raster = data[pos:pos + need]
    if len(raster) != need:
        raise FormatError(f"raster truncated at byte {pos + len(raster)}: "
                          f"need {need} bytes, have {len(raster)}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()
    return GrayImage(pixels)


def save_pgm(img: GrayImage, path) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def central_crop(pixels: np.ndarray, granule: int) -> tuple[np.ndarray, int, int]:
    """Largest centered region whose dims divide by granule; returns
    (cropped, top, left)."""
    h, w = pixels.shape
    ch, cw = (h // granule) * granule, (w // granule) * granule
    if ch == 0 or cw == 0:
        raise DataError(f"image {w}x{h} smaller than one {granule}x{granule} block")
    top, left = (h - ch) // 2, (w - cw) // 2
    return pixels[top:top + ch, left:left + cw], top, left
