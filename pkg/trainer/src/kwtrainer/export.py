"""LPMW serialization of a trained net.

Writes the portable weight file the matching runtime loads: magic
"LPMW", format version u32, metadata u32 block (input_dim, embed_dim,
vocab_size, num_blocks, embedding tap id), tensor count, then per tensor
name (u16 length + UTF-8), ndim u8, u32 dims, float32 payload, all
little-endian, with a trailing CRC32 of the preceding bytes. Convolution
weight-norm pairs are stored unfolded as <base>.weight_v / .weight_g.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np
import torch

from .model import KeywordNet

LPMW_MAGIC = b"LPMW"
LPMW_VERSION = 1


def collect_tensors(model: KeywordNet) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for i, block in enumerate(model.blocks):
        for tag, conv in (("conv1", block.conv1), ("conv2", block.conv2)):
            par = conv.parametrizations.weight
            g = par.original0.detach().numpy().reshape(-1)
            v = par.original1.detach().numpy()
            out[f"blocks.{i}.{tag}.weight_v"] = v
            out[f"blocks.{i}.{tag}.weight_g"] = g
            out[f"blocks.{i}.{tag}.bias"] = conv.bias.detach().numpy()
    out["proj.weight"] = model.proj.weight.detach().numpy()
    out["proj.bias"] = model.proj.bias.detach().numpy()
    out["head.weight"] = model.head.weight.detach().numpy()
    out["head.bias"] = model.head.bias.detach().numpy()
    return out


def export_weights(model: KeywordNet, path) -> None:
    """Serialize the model so the runtime can load and fold it."""
    with torch.no_grad():
        tensors = collect_tensors(model)
    parts = [LPMW_MAGIC, struct.pack("<I", LPMW_VERSION),
             struct.pack("<5I", model.input_dim, model.embed_dim,
                         model.vocab_size, model.num_blocks,
                         model.num_blocks),  # tap = output of last block
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


def parameter_manifest(model: KeywordNet) -> dict[str, tuple[int, ...]]:
    """name -> shape of every exported tensor (for parity checks)."""
    with torch.no_grad():
        return {k: tuple(v.shape) for k, v in collect_tensors(model).items()}
