"""Audio-to-image GAN: audio encoder, image generator, discriminator.

The encoder folds a fixed-length waveform into a feature vector, the
generator upsamples that vector to a single-channel 64x64 image, and the
discriminator scores 64x64 images real/fake. Layer sizes are chosen to
train in seconds on CPU at toy scale.
"""

from __future__ import annotations

import torch
from torch import nn

IMAGE_SIDE = 64
FEATURE_DIM = 128


class AudioEncoder(nn.Module):
    """Strided 1D convolutions ending in a global average pool."""

    def __init__(self, feature_dim: int = FEATURE_DIM):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv1d(1, 16, kernel_size=64, stride=16, padding=24),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv1d(16, 32, kernel_size=16, stride=8, padding=4),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv1d(32, 64, kernel_size=8, stride=4, padding=2),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv1d(64, 128, kernel_size=8, stride=4, padding=2),
            nn.LeakyReLU(0.2, inplace=True),
            nn.AdaptiveAvgPool1d(1),
        )
        self.proj = nn.Linear(128, feature_dim)

    def forward(self, waveform: torch.Tensor) -> torch.Tensor:
        if waveform.dim() == 2:
            waveform = waveform.unsqueeze(1)  # (B, 1, T)
        features = self.net(waveform).squeeze(-1)
        return self.proj(features)


class ImageGenerator(nn.Module):
    """Transposed convolutions from the audio feature to a 64x64 image."""

    def __init__(self, feature_dim: int = FEATURE_DIM, channels: int = 1):
        super().__init__()
        self.fc = nn.Linear(feature_dim, 256 * 4 * 4)
        # GroupNorm keeps train and eval behavior identical, so the logged
        # training-set MSE reflects exactly what inference will produce
        self.net = nn.Sequential(
            nn.GroupNorm(8, 256),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(256, 128, 4, 2, 1),  # 8
            nn.GroupNorm(8, 128),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(128, 64, 4, 2, 1),  # 16
            nn.GroupNorm(8, 64),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(64, 32, 4, 2, 1),  # 32
            nn.GroupNorm(8, 32),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(32, channels, 4, 2, 1),  # 64
            nn.Tanh(),
        )

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        x = self.fc(features).view(-1, 256, 4, 4)
        return self.net(x)  # (B, 1, 64, 64) in [-1, 1]


class Discriminator(nn.Module):
    """Strided convolutions to a single real/fake logit."""

    def __init__(self, channels: int = 1):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(channels, 32, 4, 2, 1),  # 32
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(32, 64, 4, 2, 1),  # 16
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(64, 128, 4, 2, 1),  # 8
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(128, 256, 4, 2, 1),  # 4
            nn.LeakyReLU(0.2, inplace=True),
            nn.Flatten(),
            nn.Linear(256 * 4 * 4, 1),
        )

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.net(images)


def to_unit(images_u8: torch.Tensor) -> torch.Tensor:
    """uint8 images (B, H, W) -> float (B, 1, H, W) in [-1, 1]."""
    return images_u8.float().div(127.5).sub(1.0).unsqueeze(1)


def to_levels(images_unit: torch.Tensor) -> torch.Tensor:
    """Generator output in [-1, 1] -> uint8 luminance levels."""
    levels = images_unit.clamp(-1.0, 1.0).add(1.0).mul(127.5).round()
    return levels.clamp(0, 255).to(torch.uint8)
