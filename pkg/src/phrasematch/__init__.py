"""Few-shot, open-set spoken phrase matching over DTW on frame embeddings."""

from .audio import (
    AudioClip,
    MelSpectrogram,
    compute_log_mel,
    load_audio,
    mix_noise_at_snr,
)
from .dtw import DtwConfig, dtw_distance, dtw_one_to_many, frame_distance
from .engine import Engine
from .errors import PhrasematchError
from .matcher import (
    DetectionResult,
    PhraseSet,
    PhraseTemplate,
    detect,
    enroll,
    load_phrase_set,
    save_phrase_set,
    with_alpha,
)
from .network import (
    EmbeddingSequence,
    KwsBackend,
    SpectralBackend,
    infer,
    trim_silence,
)
from .weights import ModelWeights, WeightsMeta, load_weights, random_weights, write_weights

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "MelSpectrogram",
    "compute_log_mel",
    "load_audio",
    "mix_noise_at_snr",
    "DtwConfig",
    "dtw_distance",
    "dtw_one_to_many",
    "frame_distance",
    "Engine",
    "PhrasematchError",
    "DetectionResult",
    "PhraseSet",
    "PhraseTemplate",
    "detect",
    "enroll",
    "load_phrase_set",
    "save_phrase_set",
    "with_alpha",
    "EmbeddingSequence",
    "KwsBackend",
    "SpectralBackend",
    "infer",
    "trim_silence",
    "ModelWeights",
    "WeightsMeta",
    "load_weights",
    "random_weights",
    "write_weights",
    "__version__",
]
