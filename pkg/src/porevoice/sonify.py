"""Image-to-audio rendering.

The primary mode drives a 255-voice additive synthesizer from an image's
luminance histogram: voice L (luminance 1..255) is a phase-0 sine whose
amplitude is the fraction of pixels at that level. Level 0 stays silent,
and because the amplitudes sum to at most 1 the mix can never clip.

The alternate mode gives each pixel of a 16x16 image its own voice, pitched
by the pixel's row-major index, which trades resolution for a coarse sense
of where in the frame the bright pixels sit.

Rendering is fully deterministic: the same image and config always produce
byte-identical WAV output.
"""

from __future__ import annotations

import io
import os
import wave
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .segmentation import luminance_histogram
from .volume import (
    GrayVolume,
    downsample,
    load_gray_image,
    round_half_up,
    slice_name,
    write_bytes_atomic,
)

THREADS_ENV = "POREVOICE_THREADS"


class SonifyError(ValueError):
    """Raised when inputs violate a sonification contract."""


@dataclass(frozen=True)
class SynthConfig:
    sample_rate_hz: int = 44100
    duration_s: float = 1.0
    f_min_hz: float = 100.0
    f_max_hz: float = 7750.0
    global_gain: float = 1.0

    def __post_init__(self):
        if self.sample_rate_hz <= 0 or self.duration_s <= 0:
            raise SonifyError("sample rate and duration must be positive")
        if not 0 < self.f_min_hz < self.f_max_hz:
            raise SonifyError("need 0 < f_min_hz < f_max_hz")
        if self.f_max_hz >= self.sample_rate_hz / 2:
            raise SonifyError(
                f"f_max {self.f_max_hz} Hz violates Nyquist at {self.sample_rate_hz} Hz"
            )
        if not 0 < self.global_gain <= 1:
            raise SonifyError("global_gain must be in (0, 1]")

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate_hz * self.duration_s))


@dataclass(frozen=True)
class AudioClip:
    sample_rate_hz: int
    samples: np.ndarray  # float64 mono in [-1, 1]

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise SonifyError("clip must be mono (1D)")
        if s.size and np.abs(s).max() > 1.0:
            raise SonifyError("samples exceed [-1, 1]")
        object.__setattr__(self, "samples", s)


def voice_frequency(level: int, cfg: SynthConfig = SynthConfig()) -> float:
    """Frequency of the voice bound to one luminance level (1..255).

    Linear in level from f_min (level 1) to f_max (level 255). Level 0 has
    no voice: black pixels are rendered as silence.
    """
    if not 1 <= level <= 255:
        raise SonifyError(f"level {level} has no voice (valid range 1..255)")
    return cfg.f_min_hz + (level - 1) * (cfg.f_max_hz - cfg.f_min_hz) / 254.0


def render_voices(freqs: np.ndarray, amps: np.ndarray, cfg: SynthConfig) -> AudioClip:
    """Sum phase-0 sine voices; amplitudes must sum to <= 1."""
    t = np.arange(cfg.n_samples, dtype=np.float64) / cfg.sample_rate_hz
    out = np.zeros(cfg.n_samples)
    for f, a in zip(freqs, amps):
        if a:
            out += a * np.sin(2.0 * np.pi * f * t)
    out *= cfg.global_gain
    np.clip(out, -1.0, 1.0, out=out)
    return AudioClip(cfg.sample_rate_hz, out)


def sonify_histogram(hist: np.ndarray, cfg: SynthConfig = SynthConfig()) -> AudioClip:
    """Render one image's luminance histogram through the 255-voice bank.

    Voice L gets the fixed per-voice amplitude counts[L] / total_pixels, so
    relative voice levels mirror relative pixel populations and the sum of
    active amplitudes never exceeds 1.
    """
    hist = np.asarray(hist, dtype=np.float64)
    if hist.shape != (256,):
        raise SonifyError(f"histogram must have 256 bins, got {hist.shape}")
    total = hist.sum()
    if total <= 0:
        raise SonifyError("empty histogram")
    levels = np.arange(1, 256)
    amps = hist[1:] / total
    freqs = cfg.f_min_hz + (levels - 1) * (cfg.f_max_hz - cfg.f_min_hz) / 254.0
    return render_voices(freqs, amps, cfg)


def sonify_pixels(image: np.ndarray, cfg: SynthConfig = SynthConfig()) -> AudioClip:
    """Per-pixel pitch mode: one voice per pixel of a 16x16 image.

    The 256 voices span the same [f_min, f_max] band linearly in row-major
    pixel order (index 0 at f_min, index 255 at f_max), with amplitude
    luminance / (255 * 256) so the mix stays bounded by 1.
    """
    image = np.asarray(image)
    if image.shape != (16, 16):
        raise SonifyError(f"pixel mode needs a 16x16 image, got {image.shape}")
    flat = image.astype(np.float64).ravel()
    k = np.arange(256)
    freqs = cfg.f_min_hz + k * (cfg.f_max_hz - cfg.f_min_hz) / 255.0
    amps = flat / (255.0 * 256.0)
    return render_voices(freqs, amps, cfg)


def encode_wav(clip: AudioClip) -> bytes:
    """Encode a clip as canonical 44-byte-header RIFF/WAVE PCM 16-bit mono.

    Samples map symmetrically via round(s * 32767), so -1.0 stores -32767
    and in-range input can never produce -32768.
    """
    if clip.samples.size == 0:
        raise SonifyError("cannot encode an empty clip")
    ints = round_half_up(clip.samples * 32767.0)
    ints = np.clip(ints, -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(clip.sample_rate_hz)
        wav.writeframes(ints.tobytes())
    return buf.getvalue()


def write_wav(clip: AudioClip, path) -> None:
    """Encode and atomically write one WAV file."""
    write_bytes_atomic(path, encode_wav(clip))


def read_wav(path) -> AudioClip:
    """Read back a PCM 16-bit mono WAV written by this module."""
    with wave.open(str(path), "rb") as wav:
        if wav.getnchannels() != 1 or wav.getsampwidth() != 2:
            raise SonifyError(f"'{path}' is not 16-bit mono PCM")
        sr = wav.getframerate()
        raw = wav.readframes(wav.getnframes())
    ints = np.frombuffer(raw, dtype="<i2")
    return AudioClip(sr, ints.astype(np.float64) / 32767.0)


_FFT_SIZE = 4096


def spectral_peaks(clip: AudioClip, n_peaks: int, amp_floor: float = 1e-6):
    """Strongest spectral peaks of the clip's first 4096-sample block.

    Returns up to n_peaks (frequency_hz, magnitude) tuples sorted by
    magnitude, strongest first. Frequencies are bin centers (resolution
    sample_rate / 4096); magnitudes are amplitude-calibrated by correcting
    the Hann window's scalloping from the two neighboring bins, so a pure
    sine of amplitude A reports magnitude ~A regardless of where it falls
    within a bin. Peaks below amp_floor are noise and ignored.
    """
    if clip.samples.size < _FFT_SIZE:
        raise SonifyError(f"clip too short for spectral analysis (< {_FFT_SIZE} samples)")
    n = _FFT_SIZE
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    spectrum = np.fft.rfft(clip.samples[:n] * window)
    mag = np.abs(spectrum)
    wsum = n / 2.0  # sum of the periodic Hann window

    raw_floor = amp_floor * wsum / 2.0
    interior = mag[1:-1]
    is_peak = (interior > mag[:-2]) & (interior >= mag[2:]) & (interior > raw_floor)
    bins = np.flatnonzero(is_peak) + 1
    if bins.size == 0:
        return []
    order = np.argsort(-mag[bins], kind="stable")
    bins = bins[order][:n_peaks]

    peaks = []
    for k in bins:
        # Grandke interpolation for the fractional bin offset, then divide
        # out the Hann kernel magnitude sinc(d)/(1-d^2) at that offset.
        if mag[k + 1] >= mag[k - 1]:
            ratio = mag[k + 1] / mag[k]
            delta = (2.0 * ratio - 1.0) / (1.0 + ratio)
        else:
            ratio = mag[k - 1] / mag[k]
            delta = -(2.0 * ratio - 1.0) / (1.0 + ratio)
        gain = np.sinc(delta) / (1.0 - delta * delta) if abs(delta) < 0.999 else 0.5
        amplitude = 2.0 * mag[k] / (wsum * gain)
        peaks.append((k * clip.sample_rate_hz / n, float(amplitude)))
    return peaks


MANIFEST_NAME = "manifest.tsv"


def worker_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            return max(1, int(cap))
        except ValueError:
            raise SonifyError(f"{THREADS_ENV} must be an integer, got '{cap}'")
    return min(8, os.cpu_count() or 1)


def _image_items(source):
    """Normalize a batch source to (key, image loader) pairs."""
    if isinstance(source, GrayVolume):
        return [(slice_name(z), lambda z=z: source.data[z], None) for z in range(source.depth)]
    items = []
    for p in sorted(Path(p) for p in source):
        items.append((p.stem, lambda p=p: load_gray_image(p), p))
    return items


def batch_sonify(
    source,
    cfg: SynthConfig,
    out_dir,
    mode: str = "histogram",
    overwrite: bool = False,
) -> Path:
    """Render one WAV per image and write the pairing manifest.

    ``source`` is a GrayVolume or an iterable of image paths. WAVs take the
    image's name with the extension swapped; the manifest pairs image and
    wav paths (tab-separated, relative to the manifest's directory). An
    empty source yields an empty manifest. Existing WAVs are an error
    unless ``overwrite`` is set.
    """
    if mode not in ("histogram", "pixel"):
        raise SonifyError(f"unknown sonification mode '{mode}'")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    items = _image_items(source)

    jobs = []
    for key, loader, img_path in items:
        wav_path = out_dir / f"{key}.wav"
        if wav_path.exists() and not overwrite:
            raise SonifyError(f"output '{wav_path}' already exists (use overwrite)")
        jobs.append((key, loader, img_path, wav_path))

    def render(job):
        key, loader, img_path, wav_path = job
        image = loader()
        if mode == "pixel":
            if image.shape != (16, 16):
                side = image.shape[0]
                if image.shape[0] != image.shape[1] or side % 16:
                    raise SonifyError(
                        f"'{key}': pixel mode needs a square side divisible by 16, got {image.shape}"
                    )
                image = downsample(image, 16)
            clip = sonify_pixels(image, cfg)
        else:
            clip = sonify_histogram(luminance_histogram(image), cfg)
        write_wav(clip, wav_path)

    if jobs:
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            list(pool.map(render, jobs))

    lines = []
    for key, _, img_path, wav_path in jobs:
        left = os.path.relpath(img_path, out_dir) if img_path is not None else f"{key}"
        lines.append(f"{left}\t{wav_path.name}\n")
    manifest = out_dir / MANIFEST_NAME
    write_bytes_atomic(manifest, "".join(lines).encode("utf-8"))
    return manifest
