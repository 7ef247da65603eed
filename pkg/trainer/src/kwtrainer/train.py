"""Desk-scale training loop with per-frame BCE and a held-out split."""

from __future__ import annotations

import logging

import numpy as np
import torch
from torch import nn

from .config import TrainConfig, TrainHistory
from .data import attach_noise_bank, build_batch
from .model import KeywordNet

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """Loss became non-finite; message names the failing step."""


def split_heldout(clips: dict[str, list[np.ndarray]], k: int):
    """Last k clips of every word go to the held-out pool."""
    train, held = {}, {}
    for word, bank in clips.items():
        if len(bank) <= k:
            raise ValueError(f"word {word!r} has only {len(bank)} clips; "
                             f"cannot hold out {k}")
        train[word] = bank[:-k]
        held[word] = bank[-k:]
    return train, held


def _to_tensors(batch):
    mel, targets, mask = batch
    return (torch.as_tensor(mel, dtype=torch.float32),
            torch.as_tensor(targets, dtype=torch.float32),
            torch.as_tensor(mask, dtype=torch.float32))


def frame_word_accuracy(model: KeywordNet, batches) -> float:
    """Argmax-over-word-channels accuracy on frames where a word is active."""
    model.eval()
    hit = total = 0
    with torch.no_grad():
        for mel, targets, mask in batches:
            _, logits = model(mel)
            word_targets = targets[:, :, :-1]
            active = (word_targets.sum(dim=2) > 0) & (mask > 0)
            if not active.any():
                continue
            pred = logits[:, :, :-1].argmax(dim=2)
            truth = word_targets.argmax(dim=2)
            hit += int((pred[active] == truth[active]).sum())
            total += int(active.sum())
    model.train()
    return hit / total if total else 0.0


def train(config: TrainConfig, clips: dict[str, list[np.ndarray]],
          model: KeywordNet | None = None) -> tuple[KeywordNet, TrainHistory]:
    """Train on generated sequences; returns the model and its history.

    Raises DivergenceError the moment the loss stops being finite.
    """
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    attach_noise_bank(config, config.noise_dir)
    vocab = len(clips)
    if model is None:
        model = KeywordNet(input_dim=config.input_dim,
                           embed_dim=config.embed_dim, vocab_size=vocab,
                           num_blocks=config.num_blocks,
                           dropout=config.dropout)
    train_clips, held_clips = split_heldout(clips, config.heldout_clips_per_word)
    held_rng = np.random.default_rng(config.seed + 1)
    held_batches = [_to_tensors(build_batch(config, held_rng, held_clips))
                    for _ in range(config.heldout_batches)]

    opt = torch.optim.AdamW(model.parameters(), lr=config.learning_rate,
                            weight_decay=config.weight_decay)
    bce = nn.BCEWithLogitsLoss(reduction="none")
    history = TrainHistory()
    model.train()
    step = 0
    for epoch in range(config.epochs):
        for _ in range(config.steps_per_epoch):
            mel, targets, mask = _to_tensors(build_batch(config, rng, train_clips))
            _, logits = model(mel)
            loss = (bce(logits, targets) * mask.unsqueeze(2)).sum() \
                / (mask.sum() * logits.shape[2])
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss at step {step}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            history.losses.append(float(loss.detach()))
            step += 1
        acc = frame_word_accuracy(model, held_batches)
        history.epoch_heldout_acc.append(acc)
        log.info("epoch %d: loss=%.4f heldout_acc=%.3f",
                 epoch, history.losses[-1], acc)
    history.heldout_accuracy = (history.epoch_heldout_acc[-1]
                                if history.epoch_heldout_acc
                                else frame_word_accuracy(model, held_batches))
    model.eval()
    return model, history
