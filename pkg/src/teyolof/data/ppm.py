"""Binary PPM (P6, maxval 255) images."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import DataError


def encode_ppm(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise DataError(f"PPM needs an HxWx3 uint8 image, got {image.shape} {image.dtype}")
    h, w = image.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(image).tobytes()


def write_ppm(path, image: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(image))


def decode_ppm(blob: bytes) -> np.ndarray:
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(blob):
            raise DataError("truncated PPM header")
        if blob[pos:pos + 1] == b"#":
            end = blob.find(b"\n", pos)
            pos = len(blob) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos])
    if tokens[0] != b"P6":
        raise DataError(f"unsupported PPM magic {tokens[0]!r}; only binary P6 is read")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError("malformed PPM header") from None
    if maxval != 255:
        raise DataError(f"unsupported PPM maxval {maxval}; only 255 is supported")
    pos += 1  # single whitespace after maxval
    data = blob[pos:pos + w * h * 3]
    if len(data) != w * h * 3:
        raise DataError("truncated PPM pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def read_ppm(path) -> np.ndarray:
    return decode_ppm(Path(path).read_bytes())
