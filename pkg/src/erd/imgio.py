"""Image file I/O, normalization and seeded noise injection.

Supported files are binary and ASCII PGM (``P5``/``P2``, 8 or 16 bit) and PNG
(8-bit gray or RGB for read/write, 16-bit gray read only). Samples are mapped
to ``[0, 1]`` by dividing by the maximum sample value; saving clamps to
``[0, 1]`` and rounds half away from zero.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, PngImagePlugin

__all__ = [
    "ImageFormatError", "UnsupportedImageError", "LoadedImage", "load", "save",
    "read_pgm", "write_pgm", "add_gaussian_noise", "split_channels",
    "merge_channels", "to_uint8", "NOISE_GENERATOR",
]

#: Recorded in the header of every noisy image written by the CLI.
NOISE_GENERATOR = "numpy.random.Generator(PCG64(seed)).standard_normal, channel-major"


class ImageFormatError(ValueError):
    """Malformed image data; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedImageError(OSError):
    """A readable file in a format or bit depth this module does not handle."""


@dataclass
class LoadedImage:
    """One or three equally shaped channels.

    Channels read from files lie in ``[0, 1]``; noisy copies produced by
    :func:`add_gaussian_noise` are deliberately left unclamped.
    """

    channels: list[np.ndarray]
    source_bit_depth: int = 8
    comments: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.channels = [np.asarray(c, dtype=np.float64) for c in self.channels]
        if len(self.channels) not in (1, 3):
            raise ValueError(f"expected 1 or 3 channels, got {len(self.channels)}")
        shape = self.channels[0].shape
        if len(shape) != 2 or any(c.shape != shape for c in self.channels):
            raise ValueError("channels must be 2-D and share one shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels[0].shape

    @property
    def is_color(self) -> bool:
        return len(self.channels) == 3

    def stack(self) -> np.ndarray:
        """Channels as a ``(C, H, W)`` array."""
        return np.stack(self.channels)


# ---------------------------------------------------------------- PGM

def _pgm_tokens(data: bytes, count: int, pos: int = 0):
    """Read `count` whitespace-separated tokens from `pos`, collecting comments.

    Offsets are absolute positions in `data`.
    """
    tokens, comments = [], []
    n = len(data)
    while len(tokens) < count:
        if pos >= n:
            raise ImageFormatError("truncated PGM data", pos)
        c = data[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            end = data.find(b"\n", pos)
            end = n if end < 0 else end
            comments.append(data[pos + 1:end].decode("latin-1").strip())
            pos = end + 1
        else:
            start = pos
            while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            tokens.append((data[start:pos], start))
    return tokens, comments, pos


def read_pgm(data: bytes):
    """Parse PGM bytes; returns ``(samples uint16 array, maxval, comments)``."""
    if len(data) < 2:
        raise ImageFormatError("file too short for a PGM header", 0)
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"bad PGM magic {magic!r}", 0)
    tokens, comments, pos = _pgm_tokens(data, 3, 2)
    values = []
    for tok, off in tokens:
        try:
            values.append(int(tok))
        except ValueError:
            raise ImageFormatError(f"non-integer header field {tok!r}", off) from None
    width, height, maxval = values
    if width < 1 or height < 1:
        raise ImageFormatError(f"non-positive size {width}x{height}", tokens[0][1])
    if not 1 <= maxval <= 65535:
        raise ImageFormatError(f"maxval {maxval} outside 1..65535", tokens[2][1])
    npix = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise ImageFormatError("missing whitespace before raster", pos)
        start = pos + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = npix * dtype.itemsize
        if len(data) - start < need:
            raise ImageFormatError(f"raster needs {need} bytes, found {len(data) - start}", start)
        samples = np.frombuffer(data, dtype=dtype, count=npix, offset=start)
    else:
        toks, body_comments, _ = _pgm_tokens(data, npix, pos)
        comments.extend(body_comments)
        try:
            samples = np.array([int(t) for t, _ in toks], dtype=np.int64)
        except ValueError:
            bad = next(off for t, off in toks if not t.isdigit())
            raise ImageFormatError("non-integer sample", bad) from None
    samples = np.asarray(samples, dtype=np.int64).reshape(height, width)
    if samples.max(initial=0) > maxval:
        raise ImageFormatError(f"sample exceeds maxval {maxval}", pos)
    return samples, maxval, comments


def write_pgm(samples: np.ndarray, maxval: int = 255, ascii: bool = False,
              comments: Sequence[str] = ()) -> bytes:
    """Encode an integer ``(H, W)`` array as PGM bytes."""
    samples = np.asarray(samples)
    h, w = samples.shape
    head = [b"P2" if ascii else b"P5"]
    head += [b"# " + c.replace("\n", " ").encode("latin-1", "replace") for c in comments]
    head.append(f"{w} {h}".encode())
    head.append(str(maxval).encode())
    out = b"\n".join(head) + b"\n"
    if ascii:
        rows = (" ".join(str(int(v)) for v in row) for row in samples)
        return out + "\n".join(rows).encode() + b"\n"
    dtype = ">u2" if maxval > 255 else "u1"
    return out + samples.astype(dtype).tobytes()


# ---------------------------------------------------------------- generic

def to_uint8(x: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize with round-half-away-from-zero."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return np.floor(x * 255.0 + 0.5).astype(np.uint8)


def _kind(path: Path) -> str:
    ext = path.suffix.lower()
    if ext in (".pgm", ".pnm"):
        return "pgm"
    if ext == ".png":
        return "png"
    raise UnsupportedImageError(f"unsupported image format {ext or '(none)'!r} for {path}")


def load(path) -> LoadedImage:
    path = Path(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] in (b"P2", b"P5"):
        samples, maxval, comments = read_pgm(data)
        depth = 8 if maxval <= 255 else 16
        return LoadedImage([samples / float(maxval)], depth, comments)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _load_png(path)
    if data[:2] in (b"P1", b"P3", b"P4", b"P6", b"P7"):
        raise UnsupportedImageError(f"netpbm variant {data[:2].decode()} is not supported: {path}")
    raise UnsupportedImageError(f"unrecognized image format: {path}")


def _load_png(path: Path) -> LoadedImage:
    with Image.open(path) as im:
        im.load()
        mode = im.mode
        comments = [str(v) for k, v in im.info.items() if k.lower() == "comment"]
        if mode == "L":
            arr = np.asarray(im, dtype=np.float64) / 255.0
            return LoadedImage([arr], 8, comments)
        if mode == "RGB":
            arr = np.asarray(im, dtype=np.float64) / 255.0
            return LoadedImage([arr[..., c] for c in range(3)], 8, comments)
        if mode in ("I;16", "I;16B", "I") and im.info.get("bitdepth", 16) == 16:
            arr = np.asarray(im, dtype=np.float64) / 65535.0
            return LoadedImage([arr], 16, comments)
    raise UnsupportedImageError(f"PNG mode {mode!r} is not supported "
                                f"(need 8-bit gray or RGB): {path}")


def save(img: LoadedImage | np.ndarray, path, comments: Sequence[str] = (),
         ascii: bool = False) -> None:
    """Write an 8-bit PGM or PNG, chosen by file extension."""
    if not isinstance(img, LoadedImage):
        arr = np.asarray(img)
        img = LoadedImage(list(arr) if arr.ndim == 3 else [arr])
    path = Path(path)
    kind = _kind(path)
    comments = list(img.comments) + list(comments)
    q = [to_uint8(c) for c in img.channels]
    if kind == "pgm":
        if img.is_color:
            raise UnsupportedImageError(f"PGM cannot hold a color image: {path}")
        payload = write_pgm(q[0], 255, ascii=ascii, comments=comments)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(payload)
        os.replace(tmp, path)
        return
    pil = Image.fromarray(q[0], "L") if not img.is_color else Image.fromarray(np.stack(q, -1), "RGB")
    info = PngImagePlugin.PngInfo()
    for c in comments:
        info.add_text("Comment", c)
    pil.save(path, format="PNG", pnginfo=info)


# ---------------------------------------------------------------- noise & channels

def add_gaussian_noise(img: LoadedImage, sigma_255: float, seed: int) -> LoadedImage:
    """Add i.i.d. ``N(0, (sigma_255/255)^2)`` noise to every channel.

    The result is not clamped. Draws come from ``PCG64(seed)`` in channel
    order, so a given seed reproduces the same noise on every platform.
    """
    if not sigma_255 > 0:
        raise ValueError(f"sigma must be positive, got {sigma_255}")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    sigma = sigma_255 / 255.0
    noisy = [c + sigma * rng.standard_normal(c.shape) for c in img.channels]
    note = f"gaussian noise sigma={sigma_255:g}/255 seed={int(seed)} generator={NOISE_GENERATOR}"
    return replace(img, channels=noisy, comments=list(img.comments) + [note])


def split_channels(img: LoadedImage) -> list[np.ndarray]:
    return [c.copy() for c in img.channels]


def merge_channels(channels: Sequence[np.ndarray], like: LoadedImage | None = None) -> LoadedImage:
    if like is not None and len(channels) != len(like.channels):
        raise ValueError(f"channel count mismatch: {len(channels)} vs {len(like.channels)}")
    depth = like.source_bit_depth if like is not None else 8
    comments = list(like.comments) if like is not None else []
    return LoadedImage([np.array(c, dtype=np.float64) for c in channels], depth, comments)
