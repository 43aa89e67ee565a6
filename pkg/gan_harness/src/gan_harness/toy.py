"""Tiny synthetic paired corpus for smoke tests and demos.

Eight 64x64 images (dark disks of growing radius on a bright background)
paired with pure-tone WAVs of distinct frequencies, plus the manifest, in
exactly the on-disk formats the imaging pipeline emits.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .data import write_image


def write_tone_wav(path, freq_hz: float, duration_s: float = 1.0,
                   sample_rate: int = 44100, amplitude: float = 0.6) -> None:
    t = np.arange(int(round(sample_rate * duration_s))) / sample_rate
    samples = amplitude * np.sin(2 * np.pi * freq_hz * t)
    ints = np.clip(np.floor(samples * 32767.0 + 0.5), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(ints.tobytes())


def disk_image(radius: float, side: int = 64, background: int = 200) -> np.ndarray:
    yy, xx = np.indices((side, side))
    c = side / 2 - 0.5
    disk = (yy - c) ** 2 + (xx - c) ** 2 <= radius * radius
    return np.where(disk, 0, background).astype(np.uint8)


def make_toy_corpus(out_dir, pairs: int = 8, duration_s: float = 1.0) -> Path:
    """Write the paired corpus and return its manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for k in range(pairs):
        key = f"s{k:04d}"
        write_image(out_dir / f"{key}.png", disk_image(4 + 2.5 * k))
        write_tone_wav(out_dir / f"{key}.wav", 400.0 * (k + 1), duration_s)
        lines.append(f"{key}.png\t{key}.wav\n")
    manifest = out_dir / "manifest.tsv"
    manifest.write_text("".join(lines), encoding="utf-8")
    return manifest
