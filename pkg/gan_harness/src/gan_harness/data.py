"""Paired-corpus plumbing: manifests, WAV and image files, splits.

The training corpus is whatever the imaging pipeline emitted: a manifest of
tab-separated ``image<TAB>wav`` lines (paths relative to the manifest's
directory), 8-bit grayscale PNGs, and 16-bit mono PCM WAVs. Keys are file
stems and must be unique.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class CorpusError(ValueError):
    """Raised when the paired corpus violates its contract."""


@dataclass(frozen=True)
class PairEntry:
    key: str
    image_path: Path
    wav_path: Path


@dataclass
class PairedCorpus:
    entries: list[PairEntry]

    def keys(self) -> list[str]:
        return [e.key for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(manifest_path) -> PairedCorpus:
    """Read an image/WAV pairing manifest into a corpus.

    Every referenced file must exist and keys (image stems) must be unique.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise CorpusError(f"manifest '{manifest_path}' not found")
    base = manifest_path.parent
    entries = []
    seen = set()
    for lineno, line in enumerate(
        manifest_path.read_text(encoding="utf-8").splitlines(), 1
    ):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusError(
                f"{manifest_path}:{lineno}: expected 'image<TAB>wav', got '{line}'"
            )
        image_path = (base / parts[0]).resolve()
        wav_path = (base / parts[1]).resolve()
        key = image_path.stem
        if key in seen:
            raise CorpusError(f"{manifest_path}:{lineno}: duplicate key '{key}'")
        seen.add(key)
        for p in (image_path, wav_path):
            if not p.is_file():
                raise CorpusError(f"{manifest_path}:{lineno}: missing file '{p}'")
        entries.append(PairEntry(key, image_path, wav_path))
    return PairedCorpus(entries)


def read_wav_samples(path) -> np.ndarray:
    """Decode a 16-bit mono PCM WAV to float32 samples in [-1, 1]."""
    with wave.open(str(path), "rb") as wav:
        if wav.getnchannels() != 1 or wav.getsampwidth() != 2:
            raise CorpusError(f"'{path}' is not 16-bit mono PCM")
        raw = wav.readframes(wav.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32767.0


def fit_length(samples: np.ndarray, target: int) -> np.ndarray:
    """Pad or truncate symmetrically to the encoder's fixed input length."""
    n = len(samples)
    if n == target:
        return samples
    if n > target:
        start = (n - target) // 2
        return samples[start : start + target]
    pad = target - n
    left = pad // 2
    return np.pad(samples, (left, pad - left))


def read_image(path, expect_side: int | None = None) -> np.ndarray:
    """Load an 8-bit grayscale image as a uint8 (h, w) array."""
    with Image.open(path) as img:
        if img.mode != "L":
            img = img.convert("L")
        arr = np.asarray(img, dtype=np.uint8)
    if expect_side is not None and arr.shape != (expect_side, expect_side):
        raise CorpusError(
            f"'{path}' is {arr.shape[1]}x{arr.shape[0]}, "
            f"the model requires {expect_side}x{expect_side}"
        )
    return arr


def write_image(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image, mode="L").save(path, format="PNG")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error over pixels normalized to [0, 1] by /255.

    Matches the imaging pipeline's convention so reports are comparable.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise CorpusError(f"image dimensions differ: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) / 255.0 - b.astype(np.float64) / 255.0
    return float(np.mean(diff * diff))


def split_corpus(corpus: PairedCorpus, train_count: int, test_count: int, seed: int):
    """Seeded random disjoint train/test partition of the whole corpus."""
    if train_count < 0 or test_count < 0:
        raise CorpusError("split counts must be non-negative")
    if train_count + test_count != len(corpus):
        raise CorpusError(
            f"train {train_count} + test {test_count} != corpus size {len(corpus)}"
        )
    order = np.random.default_rng(seed).permutation(len(corpus))
    train = [corpus.entries[i] for i in order[:train_count]]
    test = [corpus.entries[i] for i in order[train_count:]]
    return PairedCorpus(train), PairedCorpus(test)
