"""Core raster types, luma conversion, and bit-exact image / disparity I/O.

Supported containers:

* PNG  - 8-bit gray or RGB for images, 16-bit gray for disparity (Pillow)
* PNM  - binary PGM (P5) and PPM (P6), maxval <= 255
* PFM  - little-endian single-channel "Pf", the lossless disparity format

Images stay real-valued after decode; nothing is re-quantized to 8 bits
mid-pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError, DecodeError, DimensionError, FormatError

# Rec.601 luma weights.
LUMA_R = 0.299
LUMA_G = 0.587
LUMA_B = 0.114

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _frozen_f64(arr, ndim, name):
    a = np.ascontiguousarray(arr, dtype=np.float64)
    if a.ndim != ndim or a.size == 0:
        raise DimensionError(f"{name} must be a non-empty {ndim}-d raster")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GrayImage:
    """Single-channel luminance raster, float64 in [0, 255], shape (h, w)."""

    data: np.ndarray

    def __post_init__(self):
        a = _frozen_f64(self.data, 2, "GrayImage")
        if not np.all(np.isfinite(a)):
            raise DataError("GrayImage contains non-finite values")
        if a.min() < 0.0 or a.max() > 255.0:
            raise DataError("GrayImage values must lie in [0, 255]")
        object.__setattr__(self, "data", a)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel signed horizontal disparity in pixels, left-view-referenced.

    Sign convention: d = x_left - x_right, positive = crossed (in front of
    the screen plane).
    """

    data: np.ndarray

    def __post_init__(self):
        a = _frozen_f64(self.data, 2, "DisparityMap")
        if not np.all(np.isfinite(a)):
            raise DataError("DisparityMap contains non-finite values")
        object.__setattr__(self, "data", a)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class StereoPair:
    """Rectified left/right views plus an optional left-referenced disparity."""

    left: GrayImage
    right: GrayImage
    disparity: DisparityMap | None = None
    rgb_left: np.ndarray | None = None
    rgb_right: np.ndarray | None = None

    def __post_init__(self):
        if self.left.shape != self.right.shape:
            raise DimensionError(
                f"view shapes differ: {self.left.shape} vs {self.right.shape}"
            )
        if self.disparity is not None and self.disparity.shape != self.left.shape:
            raise DimensionError(
                f"disparity shape {self.disparity.shape} does not match "
                f"views {self.left.shape}"
            )

    @property
    def height(self):
        return self.left.height

    @property
    def width(self):
        return self.left.width


def to_gray(rgb) -> GrayImage:
    """Rec.601 luma of an (h, w, 3) RGB raster with channels in [0, 255].

    Y = 0.299 R + 0.587 G + 0.114 B, kept real-valued (no rounding).
    """
    a = np.asarray(rgb, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 3 or a.shape[0] == 0 or a.shape[1] == 0:
        raise DimensionError("expected a non-empty (h, w, 3) RGB raster")
    y = LUMA_R * a[:, :, 0] + LUMA_G * a[:, :, 1] + LUMA_B * a[:, :, 2]
    return GrayImage(y)


# --- PNM (PGM/PPM) -----------------------------------------------------------


def _pnm_token(buf, pos):
    n = len(buf)
    while True:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise DecodeError("truncated PNM header")
    return buf[start:pos], pos


def _read_pnm(buf):
    magic, pos = _pnm_token(buf, 0)
    channels = {b"P5": 1, b"P6": 3}.get(magic)
    if channels is None:
        raise FormatError(f"unsupported PNM magic {magic!r}")
    fields = []
    for _ in range(3):
        tok, pos = _pnm_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError as exc:
            raise DecodeError(f"bad PNM header field {tok!r}") from exc
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise DimensionError("PNM dimensions must be positive")
    if not 0 < maxval <= 255:
        raise FormatError(f"only 8-bit PNM supported (maxval={maxval})")
    pos += 1  # single whitespace byte before the raster
    need = width * height * channels
    raster = buf[pos : pos + need]
    if len(raster) < need:
        raise DecodeError("truncated PNM raster")
    arr = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    if channels == 1:
        return arr.reshape(height, width)
    return arr.reshape(height, width, 3)


def _write_pgm(arr_u8, path):
    h, w = arr_u8.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(arr_u8.tobytes())


# --- PFM ---------------------------------------------------------------------


def _read_pfm(buf):
    magic, pos = _pnm_token(buf, 0)
    if magic == b"PF":
        raise FormatError("color PFM not supported; expected grayscale 'Pf'")
    if magic != b"Pf":
        raise FormatError(f"unsupported PFM magic {magic!r}")
    wtok, pos = _pnm_token(buf, pos)
    htok, pos = _pnm_token(buf, pos)
    stok, pos = _pnm_token(buf, pos)
    try:
        width, height, scale = int(wtok), int(htok), float(stok)
    except ValueError as exc:
        raise DecodeError("bad PFM header") from exc
    if width <= 0 or height <= 0:
        raise DimensionError("PFM dimensions must be positive")
    pos += 1
    need = width * height * 4
    raster = buf[pos : pos + need]
    if len(raster) < need:
        raise DecodeError("truncated PFM raster")
    dtype = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return np.flipud(arr).astype(np.float64)  # PFM rows run bottom-to-top


def _write_pfm(arr, path):
    h, w = arr.shape
    payload = np.flipud(arr).astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
        f.write(payload)


# --- public loaders / savers -------------------------------------------------


def _sniff(path):
    with open(path, "rb") as f:
        head = f.read(8)
    if head.startswith(_PNG_MAGIC):
        return "png"
    if head[:2] in (b"P5", b"P6"):
        return "pnm"
    if head[:2] in (b"Pf", b"PF"):
        return "pfm"
    raise FormatError(f"unrecognized image format in {path}")


def _open_png(path):
    try:
        with Image.open(path) as im:
            im.load()
            return im.mode, np.array(im)
    except UnidentifiedImageError as exc:
        raise FormatError(f"not a decodable PNG: {path}") from exc
    except (OSError, SyntaxError) as exc:
        raise DecodeError(f"corrupt PNG: {path}") from exc


def load_gray(path) -> GrayImage:
    """Load an 8-bit PNG / PGM / PPM as luminance.

    RGB inputs go through :func:`to_gray`; 16-bit rasters are rejected here
    (they are disparity payloads, see :func:`load_disparity`).
    """
    kind = _sniff(path)
    if kind == "pnm":
        arr = _read_pnm(Path(path).read_bytes())
        if arr.ndim == 3:
            return to_gray(arr)
        return GrayImage(arr)
    if kind == "png":
        mode, arr = _open_png(path)
        if mode in ("RGB", "RGBA", "P"):
            if mode != "RGB":
                with Image.open(path) as im:
                    arr = np.array(im.convert("RGB"))
            return to_gray(arr[:, :, :3])
        if mode == "L":
            return GrayImage(arr.astype(np.float64))
        raise FormatError(
            f"PNG mode {mode!r} is not an 8-bit image; "
            "use load_disparity for 16-bit maps"
        )
    raise FormatError(f"{path} is a PFM; use load_disparity")


def load_rgb(path) -> np.ndarray:
    """Load an RGB raster as float64 (h, w, 3) in [0, 255]."""
    kind = _sniff(path)
    if kind == "pnm":
        arr = _read_pnm(Path(path).read_bytes())
        if arr.ndim != 3:
            raise FormatError(f"{path} is grayscale, not RGB")
        return arr
    if kind == "png":
        mode, arr = _open_png(path)
        if mode not in ("RGB", "RGBA", "P"):
            raise FormatError(f"PNG mode {mode!r} is not RGB")
        if mode != "RGB":
            with Image.open(path) as im:
                arr = np.array(im.convert("RGB"))
        return arr[:, :, :3].astype(np.float64)
    raise FormatError(f"{path} is not an RGB container")


def save_gray(img: GrayImage, path) -> None:
    """Write a luminance raster as 8-bit PNG or binary PGM (by extension)."""
    arr = np.clip(np.rint(img.data), 0, 255).astype(np.uint8)
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        Image.fromarray(arr, "L").save(path, format="PNG")
    elif suffix == ".pgm":
        _write_pgm(arr, path)
    else:
        raise FormatError(f"unsupported image extension {suffix!r}")


def load_disparity(path, scale: float = 1.0, offset: float = 0.0) -> DisparityMap:
    """Load a disparity map from PFM or 16-bit grayscale PNG.

    PFM values pass through untouched (scale/offset ignored); 16-bit PNG
    decodes as d = raw * scale + offset. Non-finite values are rejected.
    """
    kind = _sniff(path)
    if kind == "pfm":
        arr = _read_pfm(Path(path).read_bytes())
    elif kind == "png":
        mode, raw = _open_png(path)
        if mode not in ("I;16", "I", "I;16B"):
            raise FormatError(
                f"PNG mode {mode!r} is not a 16-bit grayscale disparity map"
            )
        arr = raw.astype(np.float64) * scale + offset
    else:
        raise FormatError(f"{path} is not a disparity container")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"non-finite disparities in {path}")
    return DisparityMap(arr)


def save_disparity(
    dmap: DisparityMap, path, scale: float = 1.0 / 256.0, offset: float = -128.0
) -> None:
    """Write a disparity map as PFM (lossless) or 16-bit PNG (by extension).

    The PNG path quantizes to raw = rint((d - offset) / scale) clipped to
    [0, 65535], so a reload lands within scale/2 of the original.
    """
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        _write_pfm(dmap.data, path)
    elif suffix == ".png":
        raw = np.clip(np.rint((dmap.data - offset) / scale), 0, 65535)
        Image.fromarray(raw.astype(np.uint16)).save(path, format="PNG")
    else:
        raise FormatError(f"unsupported disparity extension {suffix!r}")
