"""Self-describing binary checkpoint container.

File layout (documented contract, version 1):

* bytes 0-3: magic ``SLU1``
* bytes 4-11: header length as a little-endian unsigned 64-bit integer
* header: UTF-8 JSON with keys ``format_version``, ``config``, ``vocab``,
  ``best_dev`` (metrics dict or null), ``epoch``, and ``params`` -- a list
  of ``{name, shape, dtype, offset, size}`` records where ``offset``/
  ``size`` are byte positions into the blob section
* blob section: the concatenated parameter arrays, little-endian,
  row-major, in record order (float32 unless a record says otherwise)

Round trips are bit-exact: load(save(model)) restores every parameter
to the identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config
from .data import Vocab

MAGIC = b"SLU1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable, corrupt, or incompatible checkpoint file."""


@dataclass
class Checkpoint:
    config: Config
    vocab: Vocab
    params: dict[str, np.ndarray]
    best_dev: dict | None = None
    epoch: int = 0


def _le_dtype(arr: np.ndarray) -> np.ndarray:
    dt = arr.dtype.newbyteorder("<")
    return arr.astype(dt, copy=False)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    records = []
    blobs = []
    offset = 0
    for name in sorted(ckpt.params):
        arr = _le_dtype(np.ascontiguousarray(ckpt.params[name]))
        raw = arr.tobytes()
        records.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": arr.dtype.str,  # '<f4' style: explicit little-endian
            "offset": offset,
            "size": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({
        "format_version": FORMAT_VERSION,
        "config": ckpt.config.to_dict(),
        "vocab": ckpt.vocab.to_dict(),
        "best_dev": ckpt.best_dev,
        "epoch": ckpt.epoch,
        "params": records,
    }).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    header_len = int.from_bytes(raw[4:12], "little")
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from None
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {version!r} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    blob = raw[12 + header_len :]
    params: dict[str, np.ndarray] = {}
    for rec in header["params"]:
        start, size = rec["offset"], rec["size"]
        if start + size > len(blob):
            raise CheckpointError(
                f"{path}: parameter {rec['name']!r} extends past end of file"
            )
        arr = np.frombuffer(blob[start : start + size], dtype=np.dtype(rec["dtype"]))
        params[rec["name"]] = arr.reshape(rec["shape"]).copy()
    return Checkpoint(
        config=Config.from_dict(header["config"]),
        vocab=Vocab.from_dict(header["vocab"]),
        params=params,
        best_dev=header.get("best_dev"),
        epoch=int(header.get("epoch", 0)),
    )


def model_from_checkpoint(ckpt: Checkpoint):
    """Rebuild a ready-to-evaluate model from a loaded checkpoint."""
    from .model import JointModel

    model = JointModel(ckpt.config, ckpt.vocab)
    model.load_state_arrays(ckpt.params)
    return model
