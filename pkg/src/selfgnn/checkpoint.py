"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"SGNN" | u32 version | u64 manifest length | manifest (UTF-8 JSON)
    | float64 payload | u32 CRC32 of every preceding byte

The manifest lists every tensor as ``{"name", "shape", "offset"}`` with the
offset counted in float64 elements from the start of the payload.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import HyperParams
from .errors import CheckpointError
from .numerics.optim import AdamState

MAGIC = b"SGNN"
VERSION = 1


@dataclass
class Checkpoint:
    hp: HyperParams
    n_users: int
    n_items: int
    params: dict[str, np.ndarray]
    adam: AdamState
    epoch: int = 0
    rng_state: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    best_params: dict[str, np.ndarray] | None = None

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        out = [(f"param/{k}", v) for k, v in self.params.items()]
        out += [(f"adam_m/{k}", v) for k, v in self.adam.m.items()]
        out += [(f"adam_v/{k}", v) for k, v in self.adam.v.items()]
        if self.best_params is not None:
            out += [(f"best/{k}", v) for k, v in self.best_params.items()]
        return out


def to_bytes(ckpt: Checkpoint) -> bytes:
    entries, chunks, offset = [], [], 0
    for name, arr in ckpt.tensors():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.size
    manifest = {
        "hyperparams": ckpt.hp.to_dict(),
        "n_users": ckpt.n_users,
        "n_items": ckpt.n_items,
        "epoch": ckpt.epoch,
        "rng_state": ckpt.rng_state,
        "meta": ckpt.meta,
        "adam": {
            "step": ckpt.adam.step,
            "beta1": ckpt.adam.beta1,
            "beta2": ckpt.adam.beta2,
            "eps": ckpt.adam.eps,
        },
        "tensors": entries,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = MAGIC + struct.pack("<IQ", VERSION, len(blob)) + blob + b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def from_bytes(raw: bytes) -> Checkpoint:
    if len(raw) < 20 or raw[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CheckpointError("checkpoint checksum mismatch (file corrupt or truncated)")
    version, n_manifest = struct.unpack("<IQ", body[4:16])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    try:
        manifest = json.loads(body[16 : 16 + n_manifest].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint manifest: {exc}") from None
    payload = np.frombuffer(body, dtype="<f8", offset=16 + n_manifest)

    groups: dict[str, dict[str, np.ndarray]] = {"param": {}, "adam_m": {}, "adam_v": {}, "best": {}}
    for entry in manifest["tensors"]:
        kind, name = entry["name"].split("/", 1)
        shape = tuple(entry["shape"])
        n = int(np.prod(shape, dtype=np.int64))
        start = entry["offset"]
        if start + n > payload.size:
            raise CheckpointError(f"tensor {entry['name']} runs past the payload")
        groups[kind][name] = payload[start : start + n].astype(np.float64).reshape(shape)

    a = manifest["adam"]
    adam = AdamState(groups["adam_m"], groups["adam_v"], int(a["step"]), a["beta1"], a["beta2"], a["eps"])
    return Checkpoint(
        hp=HyperParams.from_dict(manifest["hyperparams"]),
        n_users=int(manifest["n_users"]),
        n_items=int(manifest["n_items"]),
        params=groups["param"],
        adam=adam,
        epoch=int(manifest["epoch"]),
        rng_state=manifest["rng_state"],
        meta=manifest["meta"],
        best_params=groups["best"] or None,
    )


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(ckpt))
    tmp.replace(path)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return from_bytes(path.read_bytes())
