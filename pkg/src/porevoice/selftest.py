"""Built-in end-to-end checks against the synthetic oracles.

Every check uses a fixed seed and prints one PASS/FAIL line, so two runs of
``porevoice selftest`` produce byte-identical summaries. Returns the list
of failed check names.
"""

from __future__ import annotations

import numpy as np

from . import metrics, segmentation, sonify, stats, synthetic, volume


def _check_tiling() -> str | None:
    rng = np.random.default_rng(101)
    for _ in range(20):
        img = rng.integers(0, 256, size=(256, 256), dtype=np.uint8)
        back = volume.tile_reassemble(volume.tile_split(img, 64))
        if not np.array_equal(img, back):
            return "tile roundtrip not bit-identical"
    return None


def _check_otsu() -> str | None:
    rng = np.random.default_rng(102)
    for i in range(200):
        hist = rng.integers(0, 1000, size=256).astype(np.int64)
        hist[rng.random(256) < rng.uniform(0.2, 0.95)] = 0
        if hist.sum() == 0:
            hist[int(rng.integers(0, 256))] = 1
        ours = segmentation.otsu_threshold(hist).threshold
        brute = synthetic.brute_force_otsu(hist)
        if ours != brute:
            return f"histogram {i}: otsu {ours} != brute force {brute}"
    return None


def _check_distance() -> str | None:
    rng = np.random.default_rng(103)
    for i in range(10):
        dims = tuple(rng.integers(3, 11, size=3))
        mask = rng.random(dims) < rng.uniform(0.3, 0.8)
        fast = segmentation.distance_transform(mask)
        slow = synthetic.brute_force_distance_transform(mask)
        if not np.array_equal(fast, slow):
            return f"volume {i} {dims}: distance transforms differ"
    return None


def _check_sphere_pack() -> str | None:
    rng = np.random.default_rng(104)
    for n in (3, 7):
        spec = synthetic.random_sphere_pack_spec(rng, n)
        gray, truth = synthetic.gen_sphere_pack(spec)
        shed = segmentation.segment_volume(gray)
        if shed.n_labels != n:
            return f"{n}-sphere pack: watershed found {shed.n_labels} pores"
        pores = metrics.quantify_pores(shed.labels, 1.0)
        measured = sorted(p.equivalent_diameter_um for p in pores)
        expected = sorted(2.0 * r for _, r in spec.spheres)
        for m, e in zip(measured, expected):
            if abs(m - e) / e > 0.10:
                return f"{n}-sphere pack: diameter {m:.2f} vs analytic {e:.2f}"
        t = segmentation.otsu_threshold(segmentation.luminance_histogram(gray)).threshold
        mask = segmentation.majority_filter(segmentation.binarize(gray, t))
        if abs(metrics.porosity(mask) - truth.analytic_porosity) > 0.02:
            return f"{n}-sphere pack: porosity off by > 0.02"
    return None


def _check_connectivity() -> str | None:
    for wall, should_connect in ((1, True), (3, False)):
        labels = np.zeros((9, 9, 9 + wall), np.int32)
        labels[3:6, 3:6, 2:4] = 1
        labels[3:6, 3:6, 4 + wall : 6 + wall] = 2
        edges = metrics.connect_pores(labels)
        if ((1, 2) in edges) != should_connect:
            return f"{wall}-voxel wall connectivity wrong"
    return None


def _check_tortuosity() -> str | None:
    # straight bead chain spanning z: tau exactly 1
    gray, expected, _ = synthetic.gen_pearl_chain(
        (43, 13, 13), [(3, 6, 6), (39, 6, 6)]
    )
    shed = segmentation.segment_volume(gray)
    network = metrics.PoreNetwork.from_labels(shed.labels, 1.0)
    result = metrics.tortuosity_distribution(network, "z", 16)
    if not result.tau_values:
        return "straight chain produced no tau values"
    if any(abs(t - 1.0) > 1e-6 for t in result.tau_values):
        return f"straight chain tau {max(result.tau_values):.8f} != 1.0"

    # right angle as a V with diagonal legs so both ends face the z walls
    gray, expected, _ = synthetic.gen_pearl_chain(
        (53, 33, 13), [(6, 6, 6), (26, 26, 6), (46, 6, 6)], bead_step=5
    )
    shed = segmentation.segment_volume(gray)
    network = metrics.PoreNetwork.from_labels(shed.labels, 1.0)
    result = metrics.tortuosity_distribution(network, "z", 36)
    err = [abs(t - expected) for t in result.tau_values]
    if not err or max(err) > 0.05:
        return f"right-angle chain tau off target {expected:.4f}"
    return None


def _check_spectra() -> str | None:
    rng = np.random.default_rng(105)
    cfg = sonify.SynthConfig()
    bin_hz = cfg.sample_rate_hz / 4096
    for i in range(10):
        n_levels = int(rng.integers(2, 6))
        levels = np.sort(rng.choice(np.arange(1, 256), size=n_levels, replace=False))
        weights = np.sort(rng.uniform(1.0, 10.0, size=n_levels))
        while (np.diff(weights) / weights[:-1] < 0.3).any():
            weights = np.sort(rng.uniform(1.0, 10.0, size=n_levels))
        counts = np.zeros(256, np.int64)
        counts[levels] = np.round(weights * 1000).astype(np.int64)
        clip = sonify.sonify_histogram(counts, cfg)
        if np.abs(clip.samples).max() > cfg.global_gain:
            return f"clip {i} exceeds the gain bound"
        peaks = sonify.spectral_peaks(clip, n_levels)
        if len(peaks) < n_levels:
            return f"clip {i}: found {len(peaks)} of {n_levels} peaks"
        freqs = sorted(p[0] for p in peaks)
        for f_found, level in zip(freqs, levels):
            if abs(f_found - sonify.voice_frequency(int(level), cfg)) > bin_hz:
                return f"clip {i}: peak {f_found:.1f} Hz more than one bin off"
        by_mag = [p[0] for p in peaks]  # strongest first
        want = [sonify.voice_frequency(int(l), cfg) for l in levels[np.argsort(-counts[levels])]]
        if [round(f / bin_hz) for f in by_mag] != [round(f / bin_hz) for f in want]:
            return f"clip {i}: magnitude order does not match count order"
    return None


def _check_wav_determinism() -> str | None:
    rng = np.random.default_rng(106)
    img = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
    cfg = sonify.SynthConfig(duration_s=0.2)
    hist = segmentation.luminance_histogram(img)
    a = sonify.encode_wav(sonify.sonify_histogram(hist, cfg))
    b = sonify.encode_wav(sonify.sonify_histogram(hist, cfg))
    if a != b:
        return "two renders of the same image differ"
    if len(a) != 44 + 2 * cfg.n_samples:
        return f"unexpected WAV size {len(a)}"
    return None


def _check_stats() -> str | None:
    img_a = np.zeros((8, 8), np.uint8)
    img_b = np.full((8, 8), 255, np.uint8)
    if stats.mse(img_a, img_b) != 1.0 or stats.mse(img_a, img_a) != 0.0:
        return "mse endpoints wrong"
    ma = stats.moving_average([0, 1, 2, 3, 4], 3)
    if not np.allclose(ma, [0.5, 1, 2, 3, 3.5]):
        return "moving average hand case wrong"
    if abs(stats.percent_difference([100.0, 200.0], [108.0, 216.0]) - 8.0) > 1e-12:
        return "percent difference fixture wrong"
    return None


CHECKS = [
    ("tiling roundtrip", _check_tiling),
    ("otsu vs brute force", _check_otsu),
    ("distance transform vs brute force", _check_distance),
    ("sphere pack segmentation", _check_sphere_pack),
    ("pore connectivity walls", _check_connectivity),
    ("tortuosity chains", _check_tortuosity),
    ("sonification spectra", _check_spectra),
    ("wav determinism", _check_wav_determinism),
    ("comparison statistics", _check_stats),
]


def run(emit=print) -> list[str]:
    failures = []
    for name, fn in CHECKS:
        try:
            problem = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            problem = f"{type(exc).__name__}: {exc}"
        if problem is None:
            emit(f"PASS {name}")
        else:
            emit(f"FAIL {name}: {problem}")
            failures.append(name)
    emit(f"selftest: {len(CHECKS)} checks, {len(failures)} failed")
    return failures
