"""Adversarial training of the audio-to-image model.

One training step per batch: the discriminator learns real-vs-generated,
then the encoder+generator pair takes an adversarial step plus a pixel
reconstruction (L1) term against the paired real image. The loss log
records per-epoch generator/discriminator losses and the training-set MSE
(computed with the same /255 convention the imaging pipeline reports).
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import CorpusError, PairedCorpus, fit_length, mse, read_image, read_wav_samples
from .model import (
    IMAGE_SIDE,
    AudioEncoder,
    Discriminator,
    ImageGenerator,
    to_levels,
    to_unit,
)


@dataclass
class TrainConfig:
    channels: int = 1
    lr_generator: float = 0.00001
    lr_discriminator: float = 0.00004
    epochs: int = 2000  # downsampled-corpus default; tiled corpora use 1000
    seed: int = 0
    batch_size: int = 16
    recon_weight: float = 10.0
    checkpoint_every: int = 0  # epochs between snapshots; 0 = final only

    def __post_init__(self):
        if self.channels != 1:
            raise CorpusError("model is single-channel (grayscale) only")
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise CorpusError("learning rates must be positive")
        if self.epochs < 1:
            raise CorpusError("epochs must be >= 1")


@dataclass
class TrainResult:
    checkpoint_path: Path
    loss_log_path: Path
    epochs: list[dict] = field(default_factory=list)


def _load_tensors(corpus: PairedCorpus):
    if not corpus.entries:
        raise CorpusError("empty training corpus")
    images = []
    for e in corpus.entries:
        images.append(read_image(e.image_path, expect_side=IMAGE_SIDE))
    first = read_wav_samples(corpus.entries[0].wav_path)
    input_samples = len(first)
    waves = [first] + [
        fit_length(read_wav_samples(e.wav_path), input_samples)
        for e in corpus.entries[1:]
    ]
    return (
        torch.from_numpy(np.stack(waves)),
        torch.from_numpy(np.stack(images)),
        input_samples,
    )


def _train_set_mse(encoder, generator, waves, images_u8) -> float:
    encoder.eval()
    generator.eval()
    with torch.no_grad():
        fake = to_levels(generator(encoder(waves))).squeeze(1).numpy()
    encoder.train()
    generator.train()
    real = images_u8.numpy()
    return float(np.mean([mse(fake[i], real[i]) for i in range(len(real))]))


def train(corpus: PairedCorpus, config: TrainConfig, out_dir) -> TrainResult:
    """Train on a paired corpus; writes checkpoint.pt and loss_log.csv.

    Images must be 64x64 grayscale (validated before any training starts).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    waves, images_u8, input_samples = _load_tensors(corpus)
    real_unit = to_unit(images_u8)

    torch.manual_seed(config.seed)
    encoder = AudioEncoder()
    generator = ImageGenerator(channels=config.channels)
    discriminator = Discriminator(channels=config.channels)
    opt_g = torch.optim.Adam(
        list(encoder.parameters()) + list(generator.parameters()),
        lr=config.lr_generator,
        betas=(0.5, 0.999),
    )
    opt_d = torch.optim.Adam(
        discriminator.parameters(), lr=config.lr_discriminator, betas=(0.5, 0.999)
    )
    bce = nn.BCEWithLogitsLoss()
    l1 = nn.L1Loss()

    n = len(corpus)
    shuffler = torch.Generator().manual_seed(config.seed)
    rows = []
    for epoch in range(1, config.epochs + 1):
        order = torch.randperm(n, generator=shuffler)
        g_losses, d_losses = [], []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            wave_batch = waves[idx]
            real_batch = real_unit[idx]

            with torch.no_grad():
                fake_detached = generator(encoder(wave_batch))
            real_logits = discriminator(real_batch)
            fake_logits = discriminator(fake_detached)
            d_loss = bce(real_logits, torch.ones_like(real_logits)) + bce(
                fake_logits, torch.zeros_like(fake_logits)
            )
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()

            fake = generator(encoder(wave_batch))
            adv_logits = discriminator(fake)
            g_loss = bce(adv_logits, torch.ones_like(adv_logits))
            g_loss = g_loss + config.recon_weight * l1(fake, real_batch)
            opt_g.zero_grad()
            g_loss.backward()
            opt_g.step()

            g_losses.append(g_loss.detach().item())
            d_losses.append(d_loss.detach().item())

        rows.append(
            {
                "epoch": epoch,
                "g_loss": float(np.mean(g_losses)),
                "d_loss": float(np.mean(d_losses)),
                "train_mse": _train_set_mse(encoder, generator, waves, images_u8),
            }
        )
        if config.checkpoint_every and epoch % config.checkpoint_every == 0:
            _save_checkpoint(
                out_dir / f"checkpoint_epoch{epoch:05d}.pt",
                encoder, generator, discriminator, config, input_samples,
            )

    checkpoint_path = _save_checkpoint(
        out_dir / "checkpoint.pt", encoder, generator, discriminator, config, input_samples
    )
    loss_log_path = out_dir / "loss_log.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "g_loss", "d_loss", "train_mse"])
    for row in rows:
        writer.writerow(
            [row["epoch"], f"{row['g_loss']:.6g}", f"{row['d_loss']:.6g}", f"{row['train_mse']:.6g}"]
        )
    loss_log_path.write_text(buf.getvalue(), encoding="utf-8")
    return TrainResult(checkpoint_path, loss_log_path, rows)


def _save_checkpoint(path, encoder, generator, discriminator, config, input_samples):
    torch.save(
        {
            "encoder": encoder.state_dict(),
            "generator": generator.state_dict(),
            "discriminator": discriminator.state_dict(),
            "config": asdict(config),
            "input_samples": input_samples,
            "image_side": IMAGE_SIDE,
        },
        path,
    )
    return Path(path)
