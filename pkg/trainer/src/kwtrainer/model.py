"""Torch definition of the keyword/speech-activity net.

Must stay layer-for-layer compatible with the runtime that consumes the
exported weights: six residual blocks of Conv1D(k=5, d=i+1) -> LeakyReLU
-> Conv1D(k=1) -> LeakyReLU with symmetric same-padding and weight norm
on the convolutions, a linear projection to the embedding width, and a
linear head over the activated embedding producing vocab+1 sigmoid
channels (last = speech activity). Dropout lives inside the residual
branch and is inert at eval time.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.parametrizations import weight_norm

LEAKY_SLOPE = 0.01
KERNEL_WIDTH = 5


class ResidualBlock(nn.Module):
    def __init__(self, channels: int, dilation: int, dropout: float):
        super().__init__()
        self.conv1 = weight_norm(nn.Conv1d(channels, channels, KERNEL_WIDTH,
                                           dilation=dilation,
                                           padding=2 * dilation))
        self.conv2 = weight_norm(nn.Conv1d(channels, channels, 1))
        self.drop = nn.Dropout(dropout)

    def forward(self, x):
        h = F.leaky_relu(self.conv1(x), LEAKY_SLOPE)
        h = F.leaky_relu(self.conv2(h), LEAKY_SLOPE)
        return x + self.drop(h)


class KeywordNet(nn.Module):
    def __init__(self, input_dim: int = 64, embed_dim: int = 128,
                 vocab_size: int = 10, num_blocks: int = 6,
                 dropout: float = 0.1):
        super().__init__()
        self.input_dim = input_dim
        self.embed_dim = embed_dim
        self.vocab_size = vocab_size
        self.num_blocks = num_blocks
        self.blocks = nn.ModuleList(
            ResidualBlock(input_dim, i + 1, dropout) for i in range(num_blocks))
        self.proj = nn.Linear(input_dim, embed_dim)
        self.head = nn.Linear(embed_dim, vocab_size + 1)

    def forward(self, mel):
        """mel (B, T, input_dim) -> (embeddings (B, T, e), logits (B, T, v+1))."""
        x = mel.transpose(1, 2)
        for block in self.blocks:
            x = block(x)
        embed = self.proj(x.transpose(1, 2))
        logits = self.head(F.leaky_relu(embed, LEAKY_SLOPE))
        return embed, logits

    @torch.no_grad()
    def infer_numpy(self, mel_frames):
        """Eval-mode forward on a single (t, input_dim) float array."""
        was_training = self.training
        self.eval()
        x = torch.as_tensor(mel_frames, dtype=torch.float32).unsqueeze(0)
        embed, logits = self.forward(x)
        if was_training:
            self.train()
        return (embed.squeeze(0).numpy(),
                torch.sigmoid(logits.squeeze(0)[:, -1]).numpy())
