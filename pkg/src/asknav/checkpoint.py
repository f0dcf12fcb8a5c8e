"""Versioned binary checkpoints.

Layout (all integers little-endian)::

    b"ASKNAV01"                 magic, 8 bytes
    uint32 version              currently 1
    uint32 header_len
    header_len bytes            UTF-8 JSON: architecture, action_dim, iteration,
                                Adam scalars, run config snapshot
    float64[P] parameters
    float64[P] Adam first moment
    float64[P] Adam second moment
    32 bytes                    SHA-256 of everything above
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .policy import Architecture, PolicyParams
from .ppo import AdamState

MAGIC = b"ASKNAV01"
VERSION = 1
_DIGEST = 32
_F64 = np.dtype("<f8")


class CheckpointError(Exception):
    pass


class CorruptCheckpoint(CheckpointError):
    """Truncated file, bad magic, malformed header or checksum failure."""


class VersionMismatch(CheckpointError):
    pass


@dataclass
class Checkpoint:
    arch: Architecture
    params: np.ndarray
    adam: AdamState
    iteration: int = 0
    config: dict = field(default_factory=dict)

    @property
    def action_dim(self) -> int:
        return self.arch.action_dim

    def policy(self) -> PolicyParams:
        return PolicyParams(self.arch, self.params.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (
            self.arch == other.arch
            and self.iteration == other.iteration
            and self.config == other.config
            and np.array_equal(self.params, other.params)
            and np.array_equal(self.adam.m, other.adam.m)
            and np.array_equal(self.adam.v, other.adam.v)
            and (self.adam.t, self.adam.beta1, self.adam.beta2, self.adam.eps)
            == (other.adam.t, other.adam.beta1, other.adam.beta2, other.adam.eps)
        )


def to_bytes(ckpt: Checkpoint) -> bytes:
    header = {
        "architecture": ckpt.arch.to_dict(),
        "action_dim": ckpt.arch.action_dim,
        "num_params": ckpt.arch.num_params,
        "iteration": ckpt.iteration,
        "adam": {"t": ckpt.adam.t, "beta1": ckpt.adam.beta1, "beta2": ckpt.adam.beta2, "eps": ckpt.adam.eps},
        "config": ckpt.config,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join([
        MAGIC,
        struct.pack("<II", VERSION, len(head)),
        head,
        np.ascontiguousarray(ckpt.params, dtype=_F64).tobytes(),
        np.ascontiguousarray(ckpt.adam.m, dtype=_F64).tobytes(),
        np.ascontiguousarray(ckpt.adam.v, dtype=_F64).tobytes(),
    ])
    return body + hashlib.sha256(body).digest()


def from_bytes(data: bytes) -> Checkpoint:
    if len(data) < len(MAGIC) + 8 + _DIGEST:
        raise CorruptCheckpoint(f"file too short ({len(data)} bytes)")
    if data[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpoint("bad magic; not an ASKNAV01 checkpoint")
    version, head_len = struct.unpack_from("<II", data, len(MAGIC))
    if version != VERSION:
        raise VersionMismatch(f"checkpoint format version {version}, this build reads {VERSION}")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptCheckpoint("checksum mismatch")
    pos = len(MAGIC) + 8
    try:
        header = json.loads(body[pos:pos + head_len].decode("utf-8"))
        arch = Architecture.from_dict(header["architecture"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"malformed header: {exc}") from None
    pos += head_len
    n = arch.num_params
    if header.get("num_params") != n or header.get("action_dim") != arch.action_dim:
        raise CorruptCheckpoint("header does not match architecture")
    if len(body) - pos != 3 * n * 8:
        raise CorruptCheckpoint(f"expected {3 * n} float64 values, found {(len(body) - pos) // 8}")
    arrays = np.frombuffer(body, dtype=_F64, count=3 * n, offset=pos).astype(np.float64).reshape(3, n)
    a = header["adam"]
    adam = AdamState(arrays[1].copy(), arrays[2].copy(), int(a["t"]), a["beta1"], a["beta2"], a["eps"])
    return Checkpoint(arch, arrays[0].copy(), adam, int(header["iteration"]), header.get("config", {}))


def atomic_write(path: str, data: bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    atomic_write(path, to_bytes(ckpt))


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def export_json(ckpt: Checkpoint, path: Optional[str] = None) -> str:
    """Human-readable dump of the weights, keyed by tensor name."""
    params = ckpt.policy()
    doc: dict[str, Any] = {
        "architecture": ckpt.arch.to_dict(),
        "iteration": ckpt.iteration,
        "tensors": {name: t.tolist() for name, t in params.tensors().items()},
    }
    text = json.dumps(doc)
    if path:
        atomic_write(path, text.encode("utf-8"))
    return text
