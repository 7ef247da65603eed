"""LPMW weight file: read, validate, fold weight norm, write.

Layout (little-endian):
  magic "LPMW" | version u32 | input_dim, embed_dim, vocab_size,
  num_blocks, tap_id (u32 each) | tensor count u32 | per tensor:
  name len u16 + UTF-8 name, ndim u8, dims u32 each, float32 payload |
  CRC32 u32 over all preceding bytes.

Convolution kernels may be stored either folded ("<base>.weight") or as
a weight-norm pair ("<base>.weight_v" + "<base>.weight_g"); pairs are
folded at load time to kernel = g * v / |v| with the norm taken per
output channel.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    CorruptFileError,
    ShapeMismatchError,
    TruncatedFileError,
    VersionMismatchError,
)

LPMW_MAGIC = b"LPMW"
LPMW_VERSION = 1
CONV_KERNEL_WIDTH = 5


@dataclass(frozen=True)
class WeightsMeta:
    input_dim: int = 64
    embed_dim: int = 128
    vocab_size: int = 300
    num_blocks: int = 6
    tap_id: int = 6  # 1-based block whose output feeds the exported embedding

    def __post_init__(self):
        for name in ("input_dim", "embed_dim", "vocab_size", "num_blocks"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 1 <= self.tap_id <= self.num_blocks:
            raise ValueError(f"tap_id {self.tap_id} outside 1..{self.num_blocks}")


@dataclass(frozen=True)
class ModelWeights:
    """Validated, weight-norm-folded tensors plus their metadata."""

    meta: WeightsMeta
    tensors: dict[str, np.ndarray] = field(repr=False)

    @property
    def fingerprint(self) -> bytes:
        """32-byte digest of metadata plus folded float32 tensors."""
        h = hashlib.sha256()
        h.update(struct.pack("<5I", self.meta.input_dim, self.meta.embed_dim,
                             self.meta.vocab_size, self.meta.num_blocks,
                             self.meta.tap_id))
        for name in sorted(self.tensors):
            t = np.ascontiguousarray(self.tensors[name], dtype=np.float32)
            h.update(name.encode())
            h.update(struct.pack(f"<B{t.ndim}I", t.ndim, *t.shape))
            h.update(t.tobytes())
        return h.digest()


def _conv_slots(meta: WeightsMeta) -> list[tuple[str, tuple[int, ...]]]:
    c = meta.input_dim
    slots = []
    for i in range(meta.num_blocks):
        slots.append((f"blocks.{i}.conv1", (c, c, CONV_KERNEL_WIDTH)))
        slots.append((f"blocks.{i}.conv2", (c, c, 1)))
    return slots


def expected_tensors(meta: WeightsMeta) -> dict[str, tuple[int, ...]]:
    """Canonical (folded) tensor manifest: name -> shape."""
    c, e, v = meta.input_dim, meta.embed_dim, meta.vocab_size
    out: dict[str, tuple[int, ...]] = {}
    for base, shape in _conv_slots(meta):
        out[f"{base}.weight"] = shape
        out[f"{base}.bias"] = (c,)
    out["proj.weight"] = (e, c)
    out["proj.bias"] = (e,)
    out["head.weight"] = (v + 1, e)
    out["head.bias"] = (v + 1,)
    return out


def fold_weight_norm(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    """kernel = g * v / |v|, norm per output channel over (in, width)."""
    norms = np.sqrt(np.sum(v.astype(np.float64) ** 2, axis=(1, 2), keepdims=True))
    return g.astype(np.float64)[:, None, None] * v / norms


def _validate_and_fold(meta: WeightsMeta,
                       raw: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    manifest = expected_tensors(meta)
    folded: dict[str, np.ndarray] = {}
    claimed: set[str] = set()

    for base, shape in _conv_slots(meta):
        plain, v, g = f"{base}.weight", f"{base}.weight_v", f"{base}.weight_g"
        if plain in raw and v in raw:
            raise ShapeMismatchError(f"{base}: both folded and weight-norm forms present")
        if plain in raw:
            if raw[plain].shape != shape:
                raise ShapeMismatchError(
                    f"{plain}: expected {shape}, got {raw[plain].shape}")
            folded[plain] = raw[plain].astype(np.float64)
            claimed.add(plain)
        elif v in raw or g in raw:
            if v not in raw or g not in raw:
                raise ShapeMismatchError(f"{base}: weight-norm pair incomplete")
            if raw[v].shape != shape:
                raise ShapeMismatchError(
                    f"{v}: expected {shape}, got {raw[v].shape}")
            if raw[g].shape != (shape[0],):
                raise ShapeMismatchError(
                    f"{g}: expected {(shape[0],)}, got {raw[g].shape}")
            folded[plain] = fold_weight_norm(raw[v], raw[g])
            claimed.update((v, g))
        else:
            raise ShapeMismatchError(f"{plain}: missing")

    for name, shape in manifest.items():
        if name in folded:
            continue
        if name not in raw:
            raise ShapeMismatchError(f"{name}: missing")
        if raw[name].shape != shape:
            raise ShapeMismatchError(
                f"{name}: expected {shape}, got {raw[name].shape}")
        folded[name] = raw[name].astype(np.float64)
        claimed.add(name)

    extras = set(raw) - claimed
    if extras:
        raise ShapeMismatchError(f"unexpected tensor {sorted(extras)[0]}")
    return folded


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.buf)}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_weight_file(path) -> tuple[WeightsMeta, dict[str, np.ndarray]]:
    """Parse an LPMW file; returns metadata and raw (unfolded) tensors."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 4 or buf[:4] != LPMW_MAGIC:
        raise BadMagicError(f"{path}: not an LPMW file")
    if len(buf) < 8:
        raise TruncatedFileError(f"{path}: header cut short")
    crc_stored = struct.unpack("<I", buf[-4:])[0]
    if zlib.crc32(buf[:-4]) != crc_stored:
        raise CorruptFileError(f"{path}: CRC32 mismatch")
    r = _Reader(buf[:-4])
    r.take(4)
    version = r.u32()
    if version != LPMW_VERSION:
        raise VersionMismatchError(
            f"{path}: version {version}, reader supports {LPMW_VERSION}")
    try:
        meta = WeightsMeta(r.u32(), r.u32(), r.u32(), r.u32(), r.u32())
    except ValueError as e:
        raise CorruptFileError(f"{path}: bad metadata ({e})") from e
    count = r.u32()
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take(r.u16()).decode("utf-8")
        ndim = r.u8()
        dims = tuple(r.u32() for _ in range(ndim))
        n = int(np.prod(dims)) if dims else 1
        payload = r.take(4 * n)
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if r.pos != len(r.buf):
        raise CorruptFileError(f"{path}: {len(r.buf) - r.pos} trailing bytes")
    return meta, tensors


def load_weights(path) -> ModelWeights:
    """Load, validate against the architecture manifest, and fold."""
    meta, raw = read_weight_file(path)
    return ModelWeights(meta=meta, tensors=_validate_and_fold(meta, raw))


def write_weights(path, meta: WeightsMeta, tensors: dict[str, np.ndarray]) -> None:
    """Serialize tensors as given (folded or weight-norm pairs)."""
    parts = [LPMW_MAGIC, struct.pack("<I", LPMW_VERSION),
             struct.pack("<5I", meta.input_dim, meta.embed_dim,
                         meta.vocab_size, meta.num_blocks, meta.tap_id),
             struct.pack("<I", len(tensors))]
    for name, tensor in tensors.items():
        t = np.ascontiguousarray(tensor, dtype="<f4")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack(f"<B{t.ndim}I", t.ndim, *t.shape))
        parts.append(t.tobytes())
    body = b"".join(parts)
    with open(path, "wb") as f:
        f.write(body)
        f.write(struct.pack("<I", zlib.crc32(body)))


def random_weights(seed: int, meta: WeightsMeta = WeightsMeta()) -> ModelWeights:
    """Random but numerically tame weights, for tests and probes."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in expected_tensors(meta).items():
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
        scale = 0.5 / np.sqrt(fan_in)
        tensors[name] = rng.normal(0.0, scale, size=shape)
    return ModelWeights(meta=meta, tensors=_validate_and_fold(meta, tensors))
