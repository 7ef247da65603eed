"""Glue from audio files to trimmed embeddings to enroll/detect calls."""

from __future__ import annotations

from dataclasses import dataclass, field

from .audio import AudioClip, compute_log_mel, load_audio
from .dtw import DtwConfig
from .matcher import DetectionResult, PhraseSet, detect, enroll
from .network import (
    EmbeddingSequence,
    KwsBackend,
    SpectralBackend,
    trim_silence,
)
from .weights import load_weights


@dataclass
class Engine:
    """One embedding backend plus the matching configuration.

    Stateless after construction; every method is safe to call
    concurrently.
    """

    backend: object = field(default_factory=SpectralBackend)
    dtw_config: DtwConfig = field(default_factory=DtwConfig)
    sad_threshold: float = 0.5
    drop_interior_silence: bool = False

    @classmethod
    def spectral(cls, **kwargs) -> "Engine":
        return cls(backend=SpectralBackend(), **kwargs)

    @classmethod
    def from_weights(cls, weights_path, **kwargs) -> "Engine":
        return cls(backend=KwsBackend(load_weights(weights_path)), **kwargs)

    def embed_clip(self, clip: AudioClip) -> EmbeddingSequence:
        seq = self.backend.embed(compute_log_mel(clip))
        return trim_silence(seq, self.sad_threshold,
                            drop_interior=self.drop_interior_silence)

    def embed_path(self, path) -> EmbeddingSequence:
        return self.embed_clip(load_audio(path))

    def enroll_paths(self, grouped: dict[str, list], alpha: float = 1.25) -> PhraseSet:
        """grouped maps phrase label -> list of recording paths."""
        utterances = [(label, self.embed_path(p))
                      for label, paths in grouped.items() for p in paths]
        return enroll(utterances, alpha=alpha, cfg=self.dtw_config,
                      backend=self.backend)

    def detect_path(self, pset: PhraseSet, path, rule: str = "literal") -> DetectionResult:
        return detect(pset, self.embed_path(path), rule=rule)
