"""Checkpoint loading and deterministic audio-to-image inference."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import CorpusError, fit_length, read_wav_samples
from .model import AudioEncoder, ImageGenerator, to_levels


@dataclass
class Checkpoint:
    encoder: AudioEncoder
    generator: ImageGenerator
    input_samples: int
    config: dict


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"checkpoint '{path}' not found")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
        encoder = AudioEncoder()
        encoder.load_state_dict(payload["encoder"])
        generator = ImageGenerator(channels=payload["config"]["channels"])
        generator.load_state_dict(payload["generator"])
    except Exception as exc:
        raise CorpusError(f"corrupt checkpoint '{path}': {exc}") from exc
    encoder.eval()
    generator.eval()
    return Checkpoint(encoder, generator, payload["input_samples"], payload["config"])


def infer(checkpoint, wav_path) -> np.ndarray:
    """Generate the 64x64 grayscale image for one WAV.

    Deterministic for a fixed checkpoint and input: eval mode, no sampling,
    single-threaded math so reduction order never varies between runs.
    WAVs of any duration are symmetrically padded or truncated to the
    encoder's fixed input length.
    """
    if not isinstance(checkpoint, Checkpoint):
        checkpoint = load_checkpoint(checkpoint)
    samples = fit_length(read_wav_samples(wav_path), checkpoint.input_samples)
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        with torch.no_grad():
            wave = torch.from_numpy(np.ascontiguousarray(samples)).unsqueeze(0)
            image = to_levels(checkpoint.generator(checkpoint.encoder(wave)))
    finally:
        torch.set_num_threads(threads)
    return image.squeeze(0).squeeze(0).numpy()
