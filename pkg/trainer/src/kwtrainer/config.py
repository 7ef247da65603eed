"""Training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class TrainConfig:
    """Everything the desk-scale training run depends on.

    Architecture fields mirror the LPMW metadata the export writes.
    words_per_example = (0, 0) yields pure-silence sequences, useful for
    target-construction checks.
    """

    input_dim: int = 64
    embed_dim: int = 128
    num_blocks: int = 6
    dropout: float = 0.1

    words_per_example: tuple[int, int] = (2, 5)     # inclusive range
    silence_gap_s: tuple[float, float] = (0.08, 0.35)
    snr_range_db: tuple[float, float] = (5.0, 20.0)
    noise_dir: str | None = None                    # None -> white noise
    mix_noise: bool = True

    batch_size: int = 8
    steps_per_epoch: int = 40
    epochs: int = 12
    learning_rate: float = 3e-3
    weight_decay: float = 0.0
    heldout_clips_per_word: int = 3
    heldout_batches: int = 12
    seed: int = 0
    export_path: str | None = None

    def __post_init__(self):
        lo, hi = self.words_per_example
        if lo < 0 or hi < lo:
            raise ValueError("words_per_example must be a nondecreasing pair")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)        # one per step
    epoch_heldout_acc: list = field(default_factory=list)
    heldout_accuracy: float = 0.0
