"""Original-versus-generated comparison statistics.

Per-pair MSE over [0,1]-normalized pixels, mean luminance and porosity /
pore-size series, moving averages for the plot-ready CSVs, and the percent
differences quoted when two corpora are compared. The per-slice pore
quantities come from the 2D variant of the segmentation chain (8-connected,
2x2 anchored median filter).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import metrics, segmentation
from .volume import write_bytes_atomic


class StatsError(ValueError):
    """Raised when inputs violate a statistics contract."""


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error between two images, pixels normalized by 255.

    Symmetric, zero iff identical, and bounded by 1 (all-black vs all-white).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise StatsError(f"image dimensions differ: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) / 255.0 - b.astype(np.float64) / 255.0
    return float(np.mean(diff * diff))


def mse_summary(pairs) -> tuple[np.ndarray, float]:
    """Per-pair MSE series and its arithmetic mean over a paired set."""
    values = [mse(a, b) for a, b in pairs]
    if not values:
        raise StatsError("empty pair set")
    series = np.array(values)
    return series, float(series.mean())


def mean_luminance(image: np.ndarray) -> float:
    """Arithmetic mean of the raw 0..255 pixel values."""
    image = np.asarray(image)
    if image.size == 0:
        raise StatsError("empty image")
    return float(image.astype(np.float64).mean())


def moving_average(series, window: int) -> np.ndarray:
    """Centered moving average; the window truncates at the boundaries.

    Output length equals input length. window=1 is the identity.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise StatsError("empty series")
    if window < 1:
        raise StatsError(f"window must be >= 1, got {window}")
    half = (window - 1) // 2
    n = series.size
    out = np.empty(n)
    csum = np.concatenate([[0.0], np.cumsum(series)])
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + window - half)
        out[i] = (csum[hi] - csum[lo]) / (hi - lo)
    return out


def percent_difference(orig, gen) -> float:
    """Mean absolute difference of gen from orig, in percent of orig.

    Entries whose original value is zero carry no defined percentage; they
    are dropped (an all-zero original is an error).
    """
    orig = np.asarray(orig, dtype=np.float64)
    gen = np.asarray(gen, dtype=np.float64)
    if orig.shape != gen.shape:
        raise StatsError(f"series lengths differ: {orig.shape} vs {gen.shape}")
    valid = orig != 0
    if not valid.any():
        raise StatsError("no nonzero original values to reference")
    o = orig[valid]
    g = gen[valid]
    return float(np.mean(np.abs(g - o) / o) * 100.0)


@dataclass(frozen=True)
class Slice2DStats:
    """Per-image statistics feeding the comparison report."""

    mean_luminance: float
    porosity: float
    mean_pore_diameter_um: float
    n_pores: int
    histogram: np.ndarray


def analyze_image_2d(
    image: np.ndarray, voxel_size_um: float, median_window: int = 2
) -> Slice2DStats:
    """Run the 2D slice pipeline on one image.

    Otsu -> binarize -> majority -> distance transform -> 2x2 median ->
    watershed, then porosity and the mean equivalent-circle pore diameter.
    A poreless image reports diameter 0.
    """
    hist = segmentation.luminance_histogram(image)
    t = segmentation.pore_threshold(hist)
    mask = segmentation.majority_filter(segmentation.binarize(image, t))
    dist = segmentation.median_filter(segmentation.distance_transform(mask), median_window)
    shed = segmentation.watershed_segment(dist, mask)
    pores = metrics.quantify_pores(shed.labels, voxel_size_um)
    mean_d = (
        float(np.mean([p.equivalent_diameter_um for p in pores])) if pores else 0.0
    )
    return Slice2DStats(
        mean_luminance=mean_luminance(image),
        porosity=metrics.porosity(mask),
        mean_pore_diameter_um=mean_d,
        n_pores=len(pores),
        histogram=hist,
    )


@dataclass(frozen=True)
class ImagePair:
    key: str
    original: np.ndarray
    generated: np.ndarray

    def __post_init__(self):
        if np.asarray(self.original).shape != np.asarray(self.generated).shape:
            raise StatsError(
                f"pair '{self.key}': dimensions differ "
                f"{np.asarray(self.original).shape} vs {np.asarray(self.generated).shape}"
            )


@dataclass
class PairSet:
    pairs: list[ImagePair] = field(default_factory=list)

    def keys(self) -> list[str]:
        return [p.key for p in self.pairs]


@dataclass
class CompareReport:
    keys: list[str]
    per_pair_mse: np.ndarray
    mean_mse: float
    mean_luminance_orig: np.ndarray
    mean_luminance_gen: np.ndarray
    porosity_orig: np.ndarray
    porosity_gen: np.ndarray
    pore_size_orig: np.ndarray
    pore_size_gen: np.ndarray
    hist_orig: np.ndarray
    hist_gen: np.ndarray
    percent_diffs: dict[str, float]


def sig6(value) -> str:
    """Canonical CSV number format: 6 significant digits, '.' separator."""
    return format(float(value), ".6g")


def write_csv(path, header: list[str], rows) -> None:
    """Write a comma-separated UTF-8 file with a header row, atomically.

    Floats are formatted to 6 significant digits; other values pass through.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [sig6(v) if isinstance(v, (float, np.floating)) else v for v in row]
        )
    write_bytes_atomic(path, buf.getvalue().encode("utf-8"))


def build_report(
    pair_set: PairSet,
    voxel_size_um: float,
    out_dir=None,
    ma_window: int = 25,
) -> CompareReport:
    """Assemble the full comparison report and optionally write its CSVs.

    Both sides of every pair go through the 2D analysis; series are keyed
    in pair order. With ``out_dir`` set, one CSV per report panel is
    written (see write_report_csvs for the files).
    """
    if not pair_set.pairs:
        raise StatsError("no pairs to compare")
    keys = pair_set.keys()
    per_mse, mean_val = mse_summary((p.original, p.generated) for p in pair_set.pairs)
    orig_stats = [analyze_image_2d(p.original, voxel_size_um) for p in pair_set.pairs]
    gen_stats = [analyze_image_2d(p.generated, voxel_size_um) for p in pair_set.pairs]

    def series(stats, attr):
        return np.array([getattr(s, attr) for s in stats])

    report = CompareReport(
        keys=keys,
        per_pair_mse=per_mse,
        mean_mse=mean_val,
        mean_luminance_orig=series(orig_stats, "mean_luminance"),
        mean_luminance_gen=series(gen_stats, "mean_luminance"),
        porosity_orig=series(orig_stats, "porosity"),
        porosity_gen=series(gen_stats, "porosity"),
        pore_size_orig=series(orig_stats, "mean_pore_diameter_um"),
        pore_size_gen=series(gen_stats, "mean_pore_diameter_um"),
        hist_orig=np.sum([s.histogram for s in orig_stats], axis=0),
        hist_gen=np.sum([s.histogram for s in gen_stats], axis=0),
        percent_diffs={},
    )
    for name in ("mean_luminance", "porosity", "pore_size"):
        orig = getattr(report, f"{name}_orig")
        gen = getattr(report, f"{name}_gen")
        try:
            report.percent_diffs[name] = percent_difference(orig, gen)
        except StatsError:
            report.percent_diffs[name] = float("nan")
    if out_dir is not None:
        write_report_csvs(report, out_dir, ma_window)
    return report


def write_report_csvs(report: CompareReport, out_dir, ma_window: int = 25) -> list:
    """Emit one plot-ready CSV per report panel.

    Files: mse_per_pair.csv, mse_histogram.csv, mean_luminance.csv,
    luminance_distribution.csv, porosity.csv, pore_size.csv, summary.csv.
    Series panels carry raw and moving-average columns.
    """
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, header, rows):
        path = out_dir / name
        write_csv(path, header, rows)
        written.append(path)

    emit(
        "mse_per_pair.csv",
        ["key", "mse"],
        zip(report.keys, report.per_pair_mse),
    )
    counts, edges = np.histogram(report.per_pair_mse, bins=40, range=(0.0, 1.0))
    emit(
        "mse_histogram.csv",
        ["bin_low", "bin_high", "count"],
        zip(edges[:-1], edges[1:], counts),
    )
    for name, attr in (
        ("mean_luminance", "mean_luminance"),
        ("porosity", "porosity"),
        ("pore_size", "pore_size"),
    ):
        orig = getattr(report, f"{attr}_orig")
        gen = getattr(report, f"{attr}_gen")
        emit(
            f"{name}.csv",
            ["key", "original", "generated", "original_ma", "generated_ma"],
            zip(
                report.keys,
                orig,
                gen,
                moving_average(orig, ma_window),
                moving_average(gen, ma_window),
            ),
        )
    total_o = max(1, int(report.hist_orig.sum()))
    total_g = max(1, int(report.hist_gen.sum()))
    emit(
        "luminance_distribution.csv",
        ["level", "original_count", "generated_count", "original_frequency", "generated_frequency"],
        (
            (lv, int(report.hist_orig[lv]), int(report.hist_gen[lv]),
             report.hist_orig[lv] / total_o, report.hist_gen[lv] / total_g)
            for lv in range(256)
        ),
    )
    summary_rows = [("pair_count", len(report.keys)), ("mean_mse", report.mean_mse)]
    summary_rows += [
        (f"pct_diff_{name}", value) for name, value in sorted(report.percent_diffs.items())
    ]
    emit("summary.csv", ["metric", "value"], summary_rows)
    return written
