"""Command-line surface: ingest -> preprocess -> sonify -> analyze -> compare.

Subcommands:
    gen         write a synthetic slice stack with known ground truth
    preprocess  ingest a stack and emit the downsampled or tiled corpus
    sonify      render one WAV per corpus image (histogram or pixel mode)
    analyze     2D per-image statistics or 3D pore-architecture CSVs
    compare     original-vs-generated report over paired corpora
    selftest    run the built-in oracle checks

Options resolve flag > config file > default; the config file is plain
``key = value`` lines with ``#`` comments. Exit codes: 0 success, 1 runtime
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics, segmentation, sonify, stats, synthetic
from .segmentation import SegmentationError
from .sonify import SonifyError, SynthConfig
from .stats import StatsError
from .synthetic import SyntheticError
from .volume import (
    GrayVolume,
    TileId,
    VolumeError,
    crop_center,
    downsample,
    emit_stack,
    ingest_stack,
    load_gray_image,
    parse_corpus_key,
    save_gray_image,
    slice_name,
    tile_name,
    tile_reassemble,
    tile_split,
    write_bytes_atomic,
)

RUNTIME_ERRORS = (
    VolumeError,
    SegmentationError,
    SonifyError,
    StatsError,
    SyntheticError,
    OSError,
)


class UsageError(ValueError):
    """Bad flags or config content: exit code 2."""


# option name -> (default, type); config files may set any of these
DEFAULTS = {
    "input": (None, str),
    "output": (None, str),
    "generated": (None, str),
    "pattern": ("*.png", str),
    "mode": ("downsample", str),
    "tile_side": (64, int),
    "target_side": (64, int),
    "voxel_size": (6.25, float),
    "axis": ("z", str),
    "grid_spacing": (16, int),
    "sample_rate": (44100, int),
    "duration": (1.0, float),
    "f_min": (100.0, float),
    "f_max": (7750.0, float),
    "gain": (1.0, float),
    "synth_mode": ("histogram", str),
    "overwrite": (False, bool),
    "seed": (0, int),
}

_CHOICES = {
    "mode": ("downsample", "tile"),
    "axis": ("x", "y", "z"),
    "synth_mode": ("histogram", "pixel"),
}


def load_config(path) -> dict:
    """Parse a plain key=value config file; unknown keys are usage errors."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file '{path}' not found")
    values: dict = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown config key '{key}'")
        values[key] = value
    return values


def _coerce(key: str, value):
    if isinstance(value, str):
        kind = DEFAULTS[key][1]
        try:
            if kind is bool:
                if value.lower() not in ("true", "false", "0", "1", "yes", "no"):
                    raise ValueError(value)
                value = value.lower() in ("true", "1", "yes")
            else:
                value = kind(value)
        except ValueError:
            raise UsageError(f"config value for '{key}' is not a valid {kind.__name__}: '{value}'")
    if key in _CHOICES and value not in _CHOICES[key]:
        raise UsageError(f"'{key}' must be one of {', '.join(_CHOICES[key])}")
    return value


class Options:
    """Flag-over-config-over-default resolution for one invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, key: str):
        flag = getattr(self.args, key, None)
        if flag is not None and flag is not False:
            return flag
        if key in self.config:
            return _coerce(key, self.config[key])
        return DEFAULTS[key][0]

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            sample_rate_hz=int(self.get("sample_rate")),
            duration_s=float(self.get("duration")),
            f_min_hz=float(self.get("f_min")),
            f_max_hz=float(self.get("f_max")),
            global_gain=float(self.get("gain")),
        )


# ---------------------------------------------------------------------------
# corpus plumbing

IMAGE_EXTENSIONS = (".png", ".pgm")


def read_corpus(directory) -> dict[str, Path]:
    """Map corpus keys (file stems) to image paths.

    Prefers the stage manifest; falls back to scanning for image files so
    hand-built corpora still work.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise VolumeError(f"corpus directory '{directory}' does not exist")
    manifest = directory / sonify.MANIFEST_NAME
    paths: list[Path] = []
    if manifest.is_file():
        for line in manifest.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            name = line.split("\t")[0]
            paths.append((directory / name).resolve())
    else:
        paths = sorted(
            p for p in directory.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
        )
    corpus = {}
    for p in paths:
        if p.stem in corpus:
            raise VolumeError(f"duplicate corpus key '{p.stem}' in '{directory}'")
        corpus[p.stem] = p
    return corpus


def write_image_corpus(images: dict[str, np.ndarray], out_dir, overwrite: bool) -> Path:
    """Write keyed images plus the one-filename-per-line manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for key in images:
        path = out_dir / f"{key}.png"
        if path.exists() and not overwrite:
            raise VolumeError(f"output '{path}' already exists (use --overwrite)")
        names.append(path.name)
    for key, image in images.items():
        save_gray_image(out_dir / f"{key}.png", image)
    write_bytes_atomic(
        out_dir / sonify.MANIFEST_NAME, ("".join(n + "\n" for n in names)).encode()
    )
    return out_dir / sonify.MANIFEST_NAME


def corpus_to_slices(corpus: dict[str, Path]) -> dict[str, np.ndarray]:
    """Load a corpus as whole slices, reassembling tile corpora first."""
    keys = {k: parse_corpus_key(k) for k in corpus}
    tile_keys = [k for k, v in keys.items() if isinstance(v, TileId)]
    if tile_keys and len(tile_keys) != len(corpus):
        raise VolumeError("corpus mixes tile and non-tile keys")
    if not tile_keys:
        return {k: load_gray_image(p) for k, p in sorted(corpus.items())}
    by_slice: dict[int, list] = {}
    for k in tile_keys:
        tid = keys[k]
        by_slice.setdefault(tid.slice_index, []).append((tid, load_gray_image(corpus[k])))
    return {
        slice_name(z): tile_reassemble(tiles) for z, tiles in sorted(by_slice.items())
    }


def slices_to_volume(slices: dict[str, np.ndarray], voxel_size_um: float) -> GrayVolume:
    ordered = [slices[k] for k in sorted(slices)]
    shapes = {s.shape for s in ordered}
    if len(shapes) > 1:
        raise VolumeError(f"slices disagree on size: {sorted(shapes)}")
    return GrayVolume(np.stack(ordered, axis=0), voxel_size_um)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(opts: Options) -> int:
    args = opts.args
    out_dir = Path(_required(opts, "output"))
    rng = np.random.default_rng(int(opts.get("seed")))
    voxel_size = float(opts.get("voxel_size"))
    dims = tuple(args.dims) if args.dims else None

    if args.kind == "spheres":
        spec = synthetic.random_sphere_pack_spec(
            rng, args.spheres, dims=dims or (64, 64, 64)
        )
        volume, truth = synthetic.gen_sphere_pack(spec, voxel_size)
        record = {
            "kind": "spheres",
            "sphere_count": len(spec.spheres),
            "sphere_voxel_counts": truth.sphere_voxel_counts,
            "sphere_radii": [r for _, r in spec.spheres],
            "pore_voxel_count": truth.pore_voxel_count,
            "porosity": truth.porosity,
            "analytic_porosity": truth.analytic_porosity,
            "overlaps": sorted(truth.overlaps),
        }
    else:
        waypoints, bead_step, measure_axis = _chain_waypoints(args.shape, args.size)
        margin = 6
        span = np.max(waypoints, axis=0) + margin
        dims = dims or tuple(int(v) for v in span)
        if args.kind == "chain":
            volume, tau, truth = synthetic.gen_pearl_chain(
                dims, waypoints, bead_step=bead_step, voxel_size_um=voxel_size
            )
            record = {
                "kind": "chain",
                "shape": args.shape,
                "expected_tau": tau,
                "measure_axis": measure_axis,
                "bead_count": len(truth.sphere_voxel_counts),
                "porosity": truth.porosity,
            }
        else:
            spec = synthetic.ChannelSpec(dims, waypoints, args.radius)
            volume, tau = synthetic.gen_channel(spec, voxel_size)
            record = {"kind": "channel", "shape": args.shape, "expected_tau": tau,
                      "measure_axis": measure_axis}

    emit_stack(volume, out_dir)
    write_bytes_atomic(out_dir / "truth.json", json.dumps(record, indent=2).encode())
    print(f"wrote {volume.depth} slices to {out_dir}")
    return 0


def _chain_waypoints(shape: str, leg: int):
    """Waypoints, bead step, and the axis whose faces see only the endpoints.

    Geometries keep both chain ends nearest their measurement faces and the
    corners mid-volume, so a tortuosity pass recovers the expected tau
    without corner pores capturing face grid points.
    """
    m = 6  # margin keeping beads inside the volume
    if shape == "straight":
        leg -= leg % 6
        return [(m, m, m), (m + leg, m, m)], 6, "z"
    if shape == "l":
        # right angle as a V with 45-degree legs; ends on opposite z faces
        leg -= leg % 5
        return (
            [(m, m, m), (m + leg, m + leg, m), (m + 2 * leg, m, m)],
            5,
            "z",
        )
    # u-shape: ends at low z on opposite y faces, corners at high z
    leg -= leg % 6
    return (
        [(m, m, m), (m + leg, m, m), (m + leg, m + leg, m), (m, m + leg, m)],
        6,
        "y",
    )


def cmd_preprocess(opts: Options) -> int:
    in_dir = _required(opts, "input")
    out_dir = _required(opts, "output")
    mode = opts.get("mode")
    volume = ingest_stack(in_dir, opts.get("pattern"), float(opts.get("voxel_size")))
    if opts.args.crop_size:
        w, h = opts.args.crop_size
        volume = crop_center(volume, w, h)
    images: dict[str, np.ndarray] = {}
    if mode == "downsample":
        side = int(opts.get("target_side"))
        for z in range(volume.depth):
            images[slice_name(z)] = downsample(volume.data[z], side)
    else:
        side = int(opts.get("tile_side"))
        for z in range(volume.depth):
            for tid, tile in tile_split(volume.data[z], side, z):
                images[tile_name(tid)] = tile
    write_image_corpus(images, out_dir, bool(opts.get("overwrite")))
    print(f"preprocess[{mode}]: wrote {len(images)} images to {out_dir}")
    return 0


def cmd_sonify(opts: Options) -> int:
    corpus = read_corpus(_required(opts, "input"))
    out_dir = Path(_required(opts, "output"))
    manifest = sonify.batch_sonify(
        corpus.values(),
        opts.synth_config(),
        out_dir,
        mode=opts.get("synth_mode"),
        overwrite=bool(opts.get("overwrite")),
    )
    print(f"sonify: wrote {len(corpus)} WAVs, manifest {manifest}")
    return 0


def cmd_analyze(opts: Options) -> int:
    corpus = read_corpus(_required(opts, "input"))
    out_dir = Path(_required(opts, "output"))
    out_dir.mkdir(parents=True, exist_ok=True)
    voxel_size = float(opts.get("voxel_size"))
    if opts.args.which == "2d":
        _analyze_2d(corpus, out_dir, voxel_size)
    else:
        _analyze_3d(
            corpus, out_dir, voxel_size,
            opts.get("axis"), int(opts.get("grid_spacing")),
            dump_dir=opts.args.dump_labels,
        )
    print(f"analyze[{opts.args.which}]: CSVs in {out_dir}")
    return 0


def _analyze_2d(corpus, out_dir, voxel_size) -> None:
    keys = sorted(corpus)
    if not keys:
        raise VolumeError("empty corpus")
    rows = []
    hist_total = np.zeros(256, dtype=np.int64)
    for key in keys:
        s = stats.analyze_image_2d(load_gray_image(corpus[key]), voxel_size)
        rows.append((key, s))
        hist_total += s.histogram
    stats.write_csv(
        out_dir / "mean_luminance.csv",
        ["key", "mean_luminance"],
        ((k, s.mean_luminance) for k, s in rows),
    )
    stats.write_csv(
        out_dir / "porosity.csv", ["key", "porosity"], ((k, s.porosity) for k, s in rows)
    )
    stats.write_csv(
        out_dir / "pore_size.csv",
        ["key", "mean_pore_diameter_um"],
        ((k, s.mean_pore_diameter_um) for k, s in rows),
    )
    total = max(1, int(hist_total.sum()))
    stats.write_csv(
        out_dir / "luminance_distribution.csv",
        ["level", "count", "frequency"],
        ((lv, int(hist_total[lv]), hist_total[lv] / total) for lv in range(256)),
    )


def _normalized_hist(values, bins, lo, hi):
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, range=(lo, hi))
    total = max(1, counts.sum())
    return zip(edges[:-1], edges[1:], counts / total)


def _analyze_3d(corpus, out_dir, voxel_size, axis, grid_spacing, dump_dir=None) -> None:
    volume = slices_to_volume(corpus_to_slices(corpus), voxel_size)
    shed = segmentation.segment_volume(volume)
    pores = metrics.quantify_pores(shed.labels, voxel_size)
    network = metrics.PoreNetwork.from_labels(shed.labels, voxel_size)
    degrees = metrics.coordination_numbers(network)
    mask = shed.labels > 0
    if dump_dir is not None:
        segmentation.dump_segmentation(shed.labels, dump_dir, voxel_size)

    stats.write_csv(
        out_dir / "porosity_per_slice.csv",
        ["slice", "porosity"],
        enumerate(metrics.porosity_per_slice(mask)),
    )
    stats.write_csv(
        out_dir / "pore_diameters.csv",
        ["pore_id", "voxel_count", "equivalent_diameter_um"],
        ((p.id, p.voxel_count, p.equivalent_diameter_um) for p in pores),
    )
    stats.write_csv(
        out_dir / "coordination_numbers.csv",
        ["pore_id", "coordination"],
        sorted(degrees.items()),
    )
    diameters = [p.equivalent_diameter_um for p in pores]
    stats.write_csv(
        out_dir / "pore_size_distribution.csv",
        ["bin_low_um", "bin_high_um", "frequency"],
        _normalized_hist(diameters, 20, 0.0, max(diameters) if diameters else 1.0),
    )
    max_deg = max(degrees.values()) if degrees else 0
    deg_counts = np.bincount(list(degrees.values()), minlength=max_deg + 1)
    total_deg = max(1, deg_counts.sum())
    stats.write_csv(
        out_dir / "connectivity_distribution.csv",
        ["coordination", "frequency"],
        ((d, deg_counts[d] / total_deg) for d in range(max_deg + 1)),
    )
    if pores:
        tau = metrics.tortuosity_distribution(network, axis, grid_spacing)
        tau_values = tau.tau_values
        unreachable, degenerate = tau.unreachable_pairs, tau.degenerate_pairs
    else:
        tau_values, unreachable, degenerate = [], 0, 0
    stats.write_csv(out_dir / "tortuosity_values.csv", ["tau"], ((v,) for v in tau_values))
    hi = max(tau_values) if tau_values else 2.0
    stats.write_csv(
        out_dir / "tortuosity_distribution.csv",
        ["bin_low", "bin_high", "frequency"],
        _normalized_hist(tau_values, 20, 1.0, max(hi, 1.05)),
    )
    stats.write_csv(
        out_dir / "summary_3d.csv",
        ["metric", "value"],
        [
            ("porosity", metrics.porosity(mask)),
            ("pore_count", len(pores)),
            ("edge_count", len(network.edges)),
            ("tau_count", len(tau_values)),
            ("tau_mean", float(np.mean(tau_values)) if tau_values else float("nan")),
            ("unreachable_pairs", unreachable),
            ("degenerate_pairs", degenerate),
        ],
    )


def cmd_compare(opts: Options) -> int:
    orig = corpus_to_slices(read_corpus(_required(opts, "input")))
    gen = corpus_to_slices(read_corpus(Path(opts.args.generated)))
    out_dir = Path(_required(opts, "output"))
    missing = sorted(set(orig) - set(gen))
    if missing:
        shown = ", ".join(missing[:10]) + (", ..." if len(missing) > 10 else "")
        raise StatsError(f"generated corpus is missing {len(missing)} keys: {shown}")
    pair_set = stats.PairSet(
        [stats.ImagePair(k, orig[k], gen[k]) for k in sorted(orig)]
    )
    report = stats.build_report(pair_set, float(opts.get("voxel_size")), out_dir)
    print(f"compare: {len(report.keys)} pairs, mean MSE {report.mean_mse:.4f}")
    for name, value in sorted(report.percent_diffs.items()):
        print(f"  {name} difference: {value:.2f}%")
    return 0


def cmd_selftest(opts: Options) -> int:
    from . import selftest

    failures = selftest.run(print)
    return 1 if failures else 0


def _required(opts: Options, key: str) -> str:
    value = opts.get(key)
    if not value:
        raise UsageError(f"--{key} is required")
    return value


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porevoice",
        description="Pore-architecture analysis and sonification pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, io=True):
        p.add_argument("--config", help="key=value config file; flags win")
        if io:
            p.add_argument("--input", help="input directory")
            p.add_argument("--output", help="output directory")
        p.add_argument("--voxel-size", dest="voxel_size", type=float, help="voxel edge length in um")
        p.add_argument("--overwrite", action="store_true", default=None, help="replace existing outputs")

    p = sub.add_parser("gen", help="generate a synthetic slice stack")
    common(p, io=False)
    p.add_argument("--output", help="output directory")
    p.add_argument("--kind", choices=("spheres", "chain", "channel"), default="spheres")
    p.add_argument("--spheres", type=int, default=5, help="sphere count for --kind spheres")
    p.add_argument("--shape", choices=("straight", "l", "u"), default="straight")
    p.add_argument("--size", type=int, default=24,
                   help="chain/channel leg length in voxels (rounded down to the bead step)")
    p.add_argument("--radius", type=float, default=3.0, help="channel tube radius")
    p.add_argument("--dims", type=int, nargs=3, metavar=("D", "H", "W"), help="volume dimensions")
    p.add_argument("--seed", type=int, help="generator seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("preprocess", help="ingest a stack and emit the image corpus")
    common(p)
    p.add_argument("--pattern", help="slice filename glob (default *.png)")
    p.add_argument("--mode", choices=_CHOICES["mode"], help="downsample or tile")
    p.add_argument("--tile-side", dest="tile_side", type=int, help="tile edge, tile mode")
    p.add_argument("--target-side", dest="target_side", type=int, help="output edge, downsample mode")
    p.add_argument("--crop-size", dest="crop_size", type=int, nargs=2, metavar=("W", "H"),
                   help="center-crop slices before processing")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("sonify", help="render one WAV per corpus image")
    common(p)
    p.add_argument("--synth-mode", dest="synth_mode", choices=_CHOICES["synth_mode"])
    p.add_argument("--sample-rate", dest="sample_rate", type=int)
    p.add_argument("--duration", type=float, help="seconds per clip")
    p.add_argument("--f-min", dest="f_min", type=float)
    p.add_argument("--f-max", dest="f_max", type=float)
    p.add_argument("--gain", type=float)
    p.set_defaults(func=cmd_sonify)

    p = sub.add_parser("analyze", help="2D per-image or 3D architecture statistics")
    common(p)
    p.add_argument("--which", choices=("2d", "3d"), required=True)
    p.add_argument("--axis", choices=_CHOICES["axis"], help="tortuosity axis")
    p.add_argument("--grid-spacing", dest="grid_spacing", type=int)
    p.add_argument("--dump-labels", dest="dump_labels",
                   help="also write the label volume as a debug slice stack")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="original-vs-generated comparison report")
    common(p)
    p.add_argument("--generated", required=True, help="generated corpus directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:  # argparse already printed usage
        return int(exit_.code or 0)
    try:
        opts = Options(args)
        return args.func(opts)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
