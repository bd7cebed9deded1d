"""RPPGCLIP binary interchange format.

Layout (little-endian): magic "RPPGCLIP", u16 version = 1, u8 dtype code
(0 = uint8, 1 = float32), u32 T, H, W, C, then raw row-major sample data.
A JSON sidecar at <path>.json carries {"fps", "key_file", "gt_ppg"} so
external consumers can locate the ground truth without parsing anything
beyond JSON.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import Clip

MAGIC = b"RPPGCLIP"
VERSION = 1
_HEADER = struct.Struct("<8sHBIIII")

_DTYPE_CODES = {np.dtype(np.uint8): 0, np.dtype(np.float32): 1}
_CODE_DTYPES = {0: np.dtype(np.uint8), 1: np.dtype("<f4")}


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def write_clip(
    path: str | Path,
    clip: Clip,
    key_file: str | None = None,
    gt_ppg: str | None = None,
) -> Path:
    """Write a clip and its JSON sidecar; returns the binary path."""
    path = Path(path)
    code = _DTYPE_CODES.get(clip.data.dtype)
    if code is None:
        raise DataError(f"cannot serialize dtype {clip.data.dtype}", code="shape-mismatch")
    t, h, w, c = clip.data.shape
    data = clip.data if code == 0 else clip.data.astype("<f4", copy=False)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, code, t, h, w, c))
        fh.write(np.ascontiguousarray(data).tobytes())
    sidecar = {"fps": clip.fps, "key_file": key_file, "gt_ppg": gt_ppg}
    sidecar_path(path).write_text(json.dumps(sidecar) + "\n")
    return path


def read_clip(path: str | Path, source_id: str = "") -> tuple[Clip, dict]:
    """Read a clip plus its sidecar (empty dict when the sidecar is absent)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"clip file not found: {path}", code="missing-dir")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path} is too short to be an RPPGCLIP file", code="decode-failure")
    magic, version, code, t, h, w, c = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataError(f"{path} has wrong magic {magic!r}", code="decode-failure")
    if version != VERSION:
        raise DataError(f"unsupported RPPGCLIP version {version}", code="decode-failure")
    dtype = _CODE_DTYPES.get(code)
    if dtype is None:
        raise DataError(f"unknown dtype code {code}", code="decode-failure")
    expected = t * h * w * c * dtype.itemsize
    payload = blob[_HEADER.size :]
    if len(payload) != expected:
        raise DataError(
            f"{path} payload is {len(payload)} bytes, header promises {expected}",
            code="decode-failure",
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(t, h, w, c)
    if dtype.itemsize > 1:
        data = data.astype(np.float32)

    sidecar: dict = {}
    sc = sidecar_path(path)
    if sc.exists():
        sidecar = json.loads(sc.read_text())
    fps = float(sidecar.get("fps") or 30.0)
    return Clip(data, fps=fps, source_id=source_id or path.stem), sidecar
