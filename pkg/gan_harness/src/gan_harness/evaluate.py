"""Evaluation: generate images per WAV and score them against the originals.

Emits the generated images as a corpus (PNG files plus a one-name-per-line
manifest) so the imaging pipeline's compare command can ingest them
directly, and MSE CSVs in that pipeline's column format: per-pair values,
Fig.-5-style frequency histograms (per split when a split is given), and a
summary of means.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .data import PairedCorpus, mse, read_image, write_image
from .infer import Checkpoint, infer, load_checkpoint


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [f"{v:.6g}" if isinstance(v, float) else v for v in row]
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _histogram_rows(values):
    counts, edges = np.histogram(np.asarray(values, float), bins=40, range=(0.0, 1.0))
    return [
        (float(lo), float(hi), int(c))
        for lo, hi, c in zip(edges[:-1], edges[1:], counts)
    ]


def evaluate(
    checkpoint,
    corpus: PairedCorpus,
    out_dir,
    train_keys: set[str] | None = None,
    generate_fn=None,
) -> dict:
    """Score generated-vs-original images over a paired corpus.

    ``train_keys`` splits the report into train/test histograms; without it
    a single histogram is written. ``generate_fn(wav_path) -> uint8 image``
    overrides the checkpoint (test hook). Returns the summary mapping.
    """
    out_dir = Path(out_dir)
    gen_dir = out_dir / "generated"
    gen_dir.mkdir(parents=True, exist_ok=True)
    if generate_fn is None:
        if not isinstance(checkpoint, Checkpoint):
            checkpoint = load_checkpoint(checkpoint)
        generate_fn = lambda wav: infer(checkpoint, wav)

    per_pair = []
    names = []
    for entry in sorted(corpus.entries, key=lambda e: e.key):
        generated = generate_fn(entry.wav_path)
        write_image(gen_dir / f"{entry.key}.png", generated)
        names.append(f"{entry.key}.png")
        original = read_image(entry.image_path)
        per_pair.append((entry.key, mse(original, generated)))
    (gen_dir / "manifest.tsv").write_text(
        "".join(n + "\n" for n in names), encoding="utf-8"
    )

    _write_csv(out_dir / "mse_per_pair.csv", ["key", "mse"], per_pair)
    summary = {"pair_count": len(per_pair)}
    if train_keys is None:
        _write_csv(
            out_dir / "mse_histogram.csv",
            ["bin_low", "bin_high", "count"],
            _histogram_rows([v for _, v in per_pair]),
        )
        summary["mean_mse"] = float(np.mean([v for _, v in per_pair])) if per_pair else float("nan")
    else:
        splits = {
            "train": [v for k, v in per_pair if k in train_keys],
            "test": [v for k, v in per_pair if k not in train_keys],
        }
        for name, values in splits.items():
            _write_csv(
                out_dir / f"mse_histogram_{name}.csv",
                ["bin_low", "bin_high", "count"],
                _histogram_rows(values),
            )
            summary[f"mean_mse_{name}"] = (
                float(np.mean(values)) if values else float("nan")
            )
            summary[f"{name}_count"] = len(values)
    _write_csv(
        out_dir / "summary.csv",
        ["metric", "value"],
        [(k, float(v) if isinstance(v, float) else v) for k, v in summary.items()],
    )
    return summary
