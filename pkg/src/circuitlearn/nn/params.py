"""Named trainable tensors: deterministic initialization and checkpoints.

Initialization draws from SplitMix64 streams keyed by (master seed,
parameter name), so identical seeds give bit-identical parameters
regardless of platform RNG details.  Checkpoints are a flat binary
container of named float32 tensors with a small versioned header.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .tensor import Tensor

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_MAGIC = b"CLNN"
_VERSION = 1


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First n outputs of the SplitMix64 stream for ``seed`` (uint64)."""
    i = np.arange(1, n + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + i * _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniform_from_seed(seed: int, shape: tuple[int, ...], scale: float) -> np.ndarray:
    """Uniform(-scale, +scale) floats from the SplitMix64 stream."""
    n = int(np.prod(shape)) if shape else 1
    u = (splitmix64(seed, n) >> np.uint64(11)) * 2.0**-53  # [0, 1)
    return ((2.0 * u - 1.0) * scale).reshape(shape).astype(np.float32)


def _param_seed(master_seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class ModelParams:
    """Ordered map of named trainable tensors."""

    def __init__(self, seed: int, hyper: dict | None = None):
        self.seed = seed
        self.hyper = dict(hyper or {})
        self.tensors: dict[str, Tensor] = {}

    def create(self, name: str, shape: tuple[int, ...], fan_in: int | None = None) -> Tensor:
        """New trainable tensor, uniform(-1/sqrt(fan_in), +1/sqrt(fan_in));
        fan_in defaults to the first dimension (or 1 for vectors/scalars)."""
        if name in self.tensors:
            raise ValueError(f"parameter {name!r} already exists")
        if fan_in is None:
            fan_in = shape[0] if len(shape) >= 2 else 1
        scale = 1.0 / np.sqrt(max(1, fan_in))
        data = uniform_from_seed(_param_seed(self.seed, name), shape, scale)
        t = Tensor(data, requires_grad=True)
        self.tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self) -> list[str]:
        return list(self.tensors)

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def save(self, path: str | Path) -> None:
        path = Path(path)
        header = json.dumps(
            {"seed": self.seed, "hyper": self.hyper}, sort_keys=True
        ).encode()
        with path.open("wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<B", _VERSION))
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(struct.pack("<I", len(self.tensors)))
            for name, t in self.tensors.items():
                data = np.ascontiguousarray(t.data, dtype=np.float32)
                nb = name.encode()
                fh.write(struct.pack("<H", len(nb)))
                fh.write(nb)
                fh.write(struct.pack("<B", data.ndim))
                for d in data.shape:
                    fh.write(struct.pack("<I", d))
                fh.write(data.tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "ModelParams":
        path = Path(path)
        with path.open("rb") as fh:
            if fh.read(4) != _MAGIC:
                raise ValueError(f"{path}: not a parameter checkpoint")
            (version,) = struct.unpack("<B", fh.read(1))
            if version > _VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {version}")
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen).decode())
            params = cls(seed=header["seed"], hyper=header.get("hyper", {}))
            (count,) = struct.unpack("<I", fh.read(4))
            for _ in range(count):
                (nlen,) = struct.unpack("<H", fh.read(2))
                name = fh.read(nlen).decode()
                (ndim,) = struct.unpack("<B", fh.read(1))
                shape = tuple(
                    struct.unpack("<I", fh.read(4))[0] for _ in range(ndim)
                )
                n = int(np.prod(shape)) if shape else 1
                data = np.frombuffer(fh.read(n * 4), dtype=np.float32).reshape(shape)
                params.tensors[name] = Tensor(data.copy(), requires_grad=True)
        return params
