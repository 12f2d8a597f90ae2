"""Parameter checkpoints: text header plus raw little-endian payload.

Header layout: the magic line ``CKPT1``, zero or more ``meta key value``
lines, one ``param name dtype dim0,dim1,...`` line per array (sorted by
name, so the ordering is deterministic), then ``---`` and the payloads
concatenated in header order.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .errors import FramecastError

MAGIC = b"CKPT1\n"
_HEADER_END = b"---\n"
_DTYPES = {"f4": "<f4", "f8": "<f8"}


class CheckpointError(FramecastError):
    """Malformed checkpoint file."""


def save_checkpoint(path, params: dict, meta: dict | None = None) -> None:
    """Write named arrays (or Tensors) plus scalar metadata to path."""
    arrays = {}
    for name, value in params.items():
        arr = value.data if isinstance(value, Tensor) else np.asarray(value)
        if arr.dtype == np.float32:
            arrays[name] = np.ascontiguousarray(arr, dtype="<f4")
        else:
            arrays[name] = np.ascontiguousarray(arr, dtype="<f8")

    lines = []
    for key, value in sorted((meta or {}).items()):
        lines.append(f"meta {key} {value}")
    for name in sorted(arrays):
        arr = arrays[name]
        code = "f4" if arr.dtype == np.dtype("<f4") else "f8"
        dims = ",".join(str(d) for d in arr.shape) if arr.ndim else "scalar"
        lines.append(f"param {name} {code} {dims}")
    header = "\n".join(lines).encode("ascii") + b"\n" if lines else b""
    payload = b"".join(arrays[name].tobytes() for name in sorted(arrays))
    Path(path).write_bytes(MAGIC + header + _HEADER_END + payload)


def _parse_meta_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read back (arrays, meta) from a checkpoint file."""
    blob = Path(path).read_bytes()
    if not blob.startswith(MAGIC):
        raise CheckpointError("missing CKPT1 magic")
    end = blob.find(_HEADER_END)
    if end < 0:
        raise CheckpointError("header terminator not found")

    meta: dict = {}
    entries: list[tuple[str, str, tuple[int, ...]]] = []
    for raw in blob[len(MAGIC) : end].decode("ascii", errors="replace").splitlines():
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "meta" and len(parts) >= 3:
            meta[parts[1]] = _parse_meta_value(" ".join(parts[2:]))
        elif parts[0] == "param" and len(parts) == 4:
            name, code, dims = parts[1], parts[2], parts[3]
            if code not in _DTYPES:
                raise CheckpointError(f"unknown dtype code {code!r}")
            shape = () if dims == "scalar" else tuple(int(d) for d in dims.split(","))
            entries.append((name, code, shape))
        else:
            raise CheckpointError(f"malformed header line: {raw!r}")

    arrays: dict[str, np.ndarray] = {}
    offset = end + len(_HEADER_END)
    for name, code, shape in entries:
        dtype = np.dtype(_DTYPES[code])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dtype.itemsize
        chunk = blob[offset : offset + nbytes]
        if len(chunk) < nbytes:
            raise CheckpointError(f"payload truncated at parameter {name!r}")
        arrays[name] = np.frombuffer(chunk, dtype=dtype).reshape(shape).copy()
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError("trailing bytes after final parameter")
    return arrays, meta
