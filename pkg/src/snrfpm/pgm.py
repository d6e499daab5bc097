"""Binary PGM (P5) and flat float32 image files."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .optics import Led


def frame_name(led: Led) -> str:
    return f"frame_r{led[0]}_c{led[1]}.pgm"


def write_pgm(path, image: np.ndarray, bit_depth: int = 16):
    """Write an integer image as binary PGM; 16-bit samples are big-endian."""
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM images must be 2D")
    maxval = (1 << bit_depth) - 1
    if img.min() < 0 or img.max() > maxval:
        raise ValueError(f"pixel values outside [0, {maxval}]")
    dtype = np.dtype(">u2") if bit_depth == 16 else np.dtype("u1")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(np.rint(img).astype(dtype).tobytes())


def _tokens(data: bytes):
    """Yield header tokens and the offset just past each, skipping comments."""
    pos = 0
    n = len(data)
    while True:
        while pos < n and chr(data[pos]).isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not chr(data[pos]).isspace():
            pos += 1
        yield data[start:pos].decode("ascii"), pos


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM into an integer array (uint8 or uint16)."""
    data = Path(path).read_bytes()
    tok = _tokens(data)
    magic, _ = next(tok)
    if magic != "P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    w = int(next(tok)[0])
    h = int(next(tok)[0])
    maxval, pos = next(tok)
    maxval = int(maxval)
    pos += 1  # single whitespace after maxval
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    count = w * h
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    return arr.reshape(h, w).astype(np.uint16 if maxval >= 256 else np.uint8)


def read_pgm_maxval(path) -> int:
    tok = _tokens(Path(path).read_bytes()[:64])
    next(tok), next(tok), next(tok)
    return int(next(tok)[0])


def write_float_image(path, image: np.ndarray, pitch: float):
    """Little-endian float32 raw file plus a ``.hdr`` text sidecar."""
    path = Path(path)
    img = np.asarray(image, dtype="<f4")
    path.write_bytes(img.tobytes())
    h, w = img.shape
    header = f"width={w}\nheight={h}\npitch={pitch:.9g}\nendianness=little\ndtype=float32\n"
    path.with_suffix(".hdr").write_text(header)


def read_float_image(path) -> tuple[np.ndarray, float]:
    path = Path(path)
    meta = dict(line.split("=", 1) for line in path.with_suffix(".hdr").read_text().split())
    dtype = "<f4" if meta.get("endianness", "little") == "little" else ">f4"
    w, h = int(meta["width"]), int(meta["height"])
    arr = np.frombuffer(path.read_bytes(), dtype=dtype).reshape(h, w).astype(float)
    return arr, float(meta["pitch"])


def amplitude_preview(amplitude: np.ndarray) -> np.ndarray:
    """Linear 16-bit scaling of an amplitude image (min -> 0, max -> 65535)."""
    a = np.asarray(amplitude, dtype=float)
    lo, hi = a.min(), a.max()
    if hi <= lo:
        return np.zeros(a.shape, dtype=np.uint16)
    return np.rint((a - lo) / (hi - lo) * 65535).astype(np.uint16)


def phase_preview(phase: np.ndarray) -> np.ndarray:
    """Map phase from [-pi, pi] to the 16-bit range."""
    p = np.clip(np.asarray(phase, dtype=float), -math.pi, math.pi)
    return np.rint((p + math.pi) / (2 * math.pi) * 65535).astype(np.uint16)
