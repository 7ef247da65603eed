"""Inference for the dilated temporal CNN, plus the spectral fallback.

The net is six residual blocks; block i runs Conv1D(k=5, dilation=i+1)
-> LeakyReLU -> Conv1D(k=1) -> LeakyReLU with symmetric same-padding, so
output length always equals input length and each output frame sees at
most +-42 input frames (85-frame, 850 ms total receptive field). A
linear projection of the tap block's output gives the exported per-frame
embedding; a second linear head over the final block yields vocab+1
sigmoid posteriors whose last channel is speech activity.

Backends give the matcher one interface over two phrase representations:
learned embeddings (KwsBackend) or the raw log-mel frames with an
energy-gate activity track (SpectralBackend).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .audio import LOG_FLOOR, N_MELS, MelSpectrogram
from .errors import DimensionMismatchError, NoSpeechDetectedError
from .weights import CONV_KERNEL_WIDTH, ModelWeights

LEAKY_SLOPE = 0.01

# spectral-backend activity gate: a frame is speech if its mel power is
# above an absolute floor (10x the log floor, i.e. not digital silence)
# and within 40 dB of the loudest frame in the clip
SPECTRAL_ABS_FLOOR = 10.0 * LOG_FLOOR
SPECTRAL_DYNAMIC_RANGE_DB = 40.0
SPECTRAL_FINGERPRINT = hashlib.sha256(b"phrasematch-spectral-backend-v1").digest()


@dataclass(frozen=True)
class EmbeddingSequence:
    """Per-frame feature matrix (t x f) with speech-activity posteriors."""

    frames: np.ndarray
    sad: np.ndarray

    def __post_init__(self):
        if self.frames.ndim != 2:
            raise ValueError("frames must be 2-D")
        if self.sad.shape != (self.frames.shape[0],):
            raise ValueError("sad length must match frame count")
        if self.sad.size and (self.sad.min() < 0.0 or self.sad.max() > 1.0):
            raise ValueError("sad values must lie in [0, 1]")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def _leaky(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0.0, x, LEAKY_SLOPE * x)


def receptive_field_frames(num_blocks: int = 6) -> int:
    """Total receptive-field width in frames (85 for the 6-block net)."""
    return 1 + (CONV_KERNEL_WIDTH - 1) * sum(range(1, num_blocks + 1))


def _dilated_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray, d: int) -> np.ndarray:
    """Same-padded 1-D correlation; x is (channels, t), w is (out, in, k)."""
    k = w.shape[2]
    half = (k - 1) // 2 * d
    t = x.shape[1]
    xp = np.zeros((x.shape[0], t + 2 * half))
    xp[:, half:half + t] = x
    out = np.zeros((w.shape[0], t))
    for tap in range(k):
        out += w[:, :, tap] @ xp[:, tap * d:tap * d + t]
    return out + b[:, None]


def _forward(weights: ModelWeights, mel: MelSpectrogram):
    """Block stack; returns (final activations, tap activations), (c, t)."""
    meta = weights.meta
    if mel.frames.shape[1] != meta.input_dim:
        raise DimensionMismatchError(
            f"mel has {mel.frames.shape[1]} bins, model expects {meta.input_dim}")
    ten = weights.tensors
    x = np.ascontiguousarray(mel.frames.T, dtype=np.float64)
    tapped = None
    for i in range(meta.num_blocks):
        h = _leaky(_dilated_conv(x, ten[f"blocks.{i}.conv1.weight"],
                                 ten[f"blocks.{i}.conv1.bias"], d=i + 1))
        h = _leaky(ten[f"blocks.{i}.conv2.weight"][:, :, 0] @ h
                   + ten[f"blocks.{i}.conv2.bias"][:, None])
        x = x + h
        if i + 1 == meta.tap_id:
            tapped = x
    return x, tapped


def infer(weights: ModelWeights, mel: MelSpectrogram) -> EmbeddingSequence:
    """Run the net on a log-mel matrix; output length equals input length."""
    ten = weights.tensors
    final, tapped = _forward(weights, mel)
    final_embed = ten["proj.weight"] @ final + ten["proj.bias"][:, None]
    if weights.meta.tap_id == weights.meta.num_blocks:
        embed = final_embed
    else:
        embed = ten["proj.weight"] @ tapped + ten["proj.bias"][:, None]
    logits = ten["head.weight"] @ _leaky(final_embed) + ten["head.bias"][:, None]
    return EmbeddingSequence(frames=embed.T.copy(), sad=expit(logits[-1, :]))


def keyword_posteriors(weights: ModelWeights, mel: MelSpectrogram) -> np.ndarray:
    """Full (t x vocab+1) sigmoid outputs; last column is speech activity."""
    ten = weights.tensors
    final, _ = _forward(weights, mel)
    embed = ten["proj.weight"] @ final + ten["proj.bias"][:, None]
    logits = ten["head.weight"] @ _leaky(embed) + ten["head.bias"][:, None]
    return expit(logits).T


def trim_silence(seq: EmbeddingSequence, sad_threshold: float = 0.5,
                 drop_interior: bool = False) -> EmbeddingSequence:
    """Cut frames before the first and after the last active frame.

    Interior low-activity frames are kept unless drop_interior is set.
    Raises NoSpeechDetectedError when no frame reaches the threshold.
    """
    if not 0.0 < sad_threshold < 1.0:
        raise ValueError("sad_threshold must lie strictly inside (0, 1)")
    active = np.nonzero(seq.sad >= sad_threshold)[0]
    if active.size == 0:
        raise NoSpeechDetectedError(
            f"no frame reached activity threshold {sad_threshold}")
    if drop_interior:
        return EmbeddingSequence(frames=seq.frames[active], sad=seq.sad[active])
    lo, hi = active[0], active[-1] + 1
    return EmbeddingSequence(frames=seq.frames[lo:hi], sad=seq.sad[lo:hi])


def _energy_gate_sad(mel: MelSpectrogram) -> np.ndarray:
    power = np.maximum(np.exp(mel.frames) - LOG_FLOOR, 0.0).mean(axis=1)
    loudest = power.max()
    active = power > SPECTRAL_ABS_FLOOR
    if loudest > 0.0:
        rel_floor = loudest * 10.0 ** (-SPECTRAL_DYNAMIC_RANGE_DB / 10.0)
        active &= power >= rel_floor
    return active.astype(np.float64)


class SpectralBackend:
    """Phrase representation = the log-mel frames themselves."""

    backend_id = "spectral"
    fingerprint = SPECTRAL_FINGERPRINT
    feature_dim = N_MELS

    def embed(self, mel: MelSpectrogram) -> EmbeddingSequence:
        return EmbeddingSequence(frames=mel.frames.copy(),
                                 sad=_energy_gate_sad(mel))


class KwsBackend:
    """Phrase representation = per-frame embeddings from the keyword net."""

    def __init__(self, weights: ModelWeights):
        self.weights = weights
        self.fingerprint = weights.fingerprint
        self.backend_id = f"kws:{self.fingerprint.hex()[:16]}"
        self.feature_dim = weights.meta.embed_dim

    def embed(self, mel: MelSpectrogram) -> EmbeddingSequence:
        return infer(self.weights, mel)
