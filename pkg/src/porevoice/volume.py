"""Volume ingestion and geometric preprocessing.

A slice stack on disk becomes a :class:`GrayVolume` (8-bit luminance voxels,
slice-major), which the rest of the pipeline treats as immutable. All
operations here are pure functions: center crop, block-average downsampling,
and the 64x64 tile split/reassembly used by the full-resolution corpus.

Conventions:
    - arrays are indexed ``[z, y, x]`` for volumes and ``[y, x]`` for images
    - images/voxels are ``uint8`` luminance in 0..255
    - whenever a real value maps to a luminance level, rounding is half-up
"""

from __future__ import annotations

import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image


class VolumeError(ValueError):
    """Raised when inputs violate a volume/tiling contract."""


class TileId(NamedTuple):
    """Stable address of one tile within the tiled corpus."""

    slice_index: int
    row: int
    col: int


@dataclass(frozen=True)
class GrayVolume:
    """3D grid of 8-bit luminance voxels with a physical voxel size.

    Attributes:
        data: uint8 array of shape (depth, height, width), slice-major.
        voxel_size_um: isotropic voxel edge length in micrometers.
    """

    data: np.ndarray
    voxel_size_um: float

    def __post_init__(self):
        if self.data.ndim != 3:
            raise VolumeError(f"volume must be 3D, got shape {self.data.shape}")
        if self.data.dtype != np.uint8:
            raise VolumeError(f"volume must be uint8, got {self.data.dtype}")
        if self.data.shape[0] < 1:
            raise VolumeError("volume must contain at least one slice")
        if not self.voxel_size_um > 0:
            raise VolumeError(f"voxel_size_um must be positive, got {self.voxel_size_um}")

    @property
    def depth(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def slice(self, index: int) -> np.ndarray:
        return self.data[index]


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer with halves going up (toward +inf)."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


def convert_depth(value16):
    """Map 16-bit luminance to 8-bit via the fixed linear scale.

    Accepts scalars or arrays in 0..65535; returns round-half-up of
    ``v * 255 / 65535``. The map is monotone and hits every 8-bit level.
    """
    v = np.asarray(value16)
    if v.size and (v.min() < 0 or v.max() > 65535):
        raise VolumeError("16-bit luminance out of range 0..65535")
    out = round_half_up(v.astype(np.float64) * 255.0 / 65535.0).astype(np.uint8)
    return out if out.ndim else int(out)


def load_gray_image(path) -> np.ndarray:
    """Decode one single-channel raster image to a uint8 (h, w) array.

    Accepts 8-bit and 16-bit grayscale in lossless formats (PNG, PGM, TIFF);
    16-bit sources go through :func:`convert_depth`.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            arr = np.asarray(img)
    except Exception as exc:
        raise VolumeError(f"cannot decode image file '{path}': {exc}") from exc
    if mode == "L":
        return arr.astype(np.uint8)
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = arr.astype(np.int64)
        if arr.size and (arr.min() < 0 or arr.max() > 65535):
            raise VolumeError(f"'{path}': pixel values exceed the 16-bit range")
        return convert_depth(arr)
    raise VolumeError(f"'{path}': unsupported image mode '{mode}' (need single-channel grayscale)")


def write_bytes_atomic(path, payload: bytes) -> None:
    """Write a file via temp-then-rename so readers never see partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_gray_image(path, image: np.ndarray) -> None:
    """Encode a uint8 (h, w) array as an 8-bit lossless grayscale file.

    The container is picked from the extension (.png default, .pgm supported).
    Writes are atomic.
    """
    image = _require_image(image)
    path = Path(path)
    import io

    buf = io.BytesIO()
    fmt = "PPM" if path.suffix.lower() == ".pgm" else "PNG"
    Image.fromarray(image, mode="L").save(buf, format=fmt)
    write_bytes_atomic(path, buf.getvalue())


def _require_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 2:
        raise VolumeError(f"expected a 2D grayscale image, got shape {image.shape}")
    if image.dtype != np.uint8:
        raise VolumeError(f"expected uint8 image, got {image.dtype}")
    return image


def ingest_stack(directory, pattern: str = "*", voxel_size_um: float = 6.25) -> GrayVolume:
    """Load a slice stack from a directory into a GrayVolume.

    Files matching ``pattern`` are sorted lexicographically by filename and
    stacked in that order along depth. All slices must share one size.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise VolumeError(f"input directory '{directory}' does not exist")
    paths = sorted(p for p in directory.glob(pattern) if p.is_file())
    if not paths:
        raise VolumeError(f"no matching files for pattern '{pattern}' in '{directory}'")
    slices = []
    shape = None
    for i, p in enumerate(paths):
        img = load_gray_image(p)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise VolumeError(
                f"dimension mismatch: slice {i + 1} '{p.name}' is "
                f"{img.shape[1]}x{img.shape[0]}, expected {shape[1]}x{shape[0]}"
            )
        slices.append(img)
    return GrayVolume(np.stack(slices, axis=0), voxel_size_um)


def emit_stack(volume: GrayVolume, directory, prefix: str = "s", ext: str = ".png") -> list[Path]:
    """Write a volume back out as one 8-bit image per slice (s0000.png, ...)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for z in range(volume.depth):
        p = directory / f"{prefix}{z:04d}{ext}"
        save_gray_image(p, volume.data[z])
        paths.append(p)
    return paths


def crop_center(volume: GrayVolume, out_w: int, out_h: int) -> GrayVolume:
    """Crop every slice to the centered out_w x out_h window.

    Odd remainders land on the high side: offset = floor((in - out) / 2).
    """
    if out_w > volume.width or out_h > volume.height:
        raise VolumeError(
            f"crop {out_w}x{out_h} exceeds input size {volume.width}x{volume.height}"
        )
    off_x = (volume.width - out_w) // 2
    off_y = (volume.height - out_h) // 2
    data = volume.data[:, off_y : off_y + out_h, off_x : off_x + out_w].copy()
    return GrayVolume(data, volume.voxel_size_um)


def downsample(image: np.ndarray, out_side: int) -> np.ndarray:
    """Shrink a square image by block area-averaging.

    Each output pixel is the round-half-up mean of its k x k source block,
    k = side / out_side. Mean luminance is conserved to within rounding.
    """
    image = _require_image(image)
    h, w = image.shape
    if h != w:
        raise VolumeError(f"downsample requires a square image, got {w}x{h}")
    if out_side < 1 or h % out_side != 0:
        raise VolumeError(f"output side {out_side} does not divide input side {h}")
    k = h // out_side
    blocks = image.reshape(out_side, k, out_side, k).astype(np.int64)
    sums = blocks.sum(axis=(1, 3))
    # integer round-half-up of sums / k^2
    k2 = k * k
    return ((2 * sums + k2) // (2 * k2)).astype(np.uint8)


def tile_split(image: np.ndarray, tile_side: int, slice_index: int = 0) -> list[tuple[TileId, np.ndarray]]:
    """Partition an image into a grid of square tiles, row-major order."""
    image = _require_image(image)
    h, w = image.shape
    if tile_side < 1 or h % tile_side != 0 or w % tile_side != 0:
        raise VolumeError(f"tile side {tile_side} does not divide image size {w}x{h}")
    tiles = []
    for r in range(h // tile_side):
        for c in range(w // tile_side):
            block = image[r * tile_side : (r + 1) * tile_side, c * tile_side : (c + 1) * tile_side]
            tiles.append((TileId(slice_index, r, c), block.copy()))
    return tiles


def tile_reassemble(tiles: list[tuple[TileId, np.ndarray]]) -> np.ndarray:
    """Reassemble one slice from a complete grid x grid set of tiles.

    Inverse of :func:`tile_split`: the result is bit-identical to the image
    the tiles were split from.
    """
    if not tiles:
        raise VolumeError("no tiles to reassemble")
    side = tiles[0][1].shape[0]
    slice_index = tiles[0][0].slice_index
    by_pos: dict[tuple[int, int], np.ndarray] = {}
    for tid, img in tiles:
        img = _require_image(img)
        if tid.slice_index != slice_index:
            raise VolumeError(
                f"tiles mix slice indices {slice_index} and {tid.slice_index}"
            )
        if img.shape != (side, side):
            raise VolumeError(
                f"inconsistent tile sides: expected {side}x{side}, "
                f"got {img.shape[1]}x{img.shape[0]} at (row {tid.row}, col {tid.col})"
            )
        if (tid.row, tid.col) in by_pos:
            raise VolumeError(f"duplicate tile id (row {tid.row}, col {tid.col})")
        by_pos[(tid.row, tid.col)] = img
    # grid size comes from the tile ids, so an incomplete set names its hole
    grid = 1 + max(max(r, c) for r, c in by_pos)
    out = np.empty((grid * side, grid * side), np.uint8)
    for r in range(grid):
        for c in range(grid):
            if (r, c) not in by_pos:
                raise VolumeError(f"missing tile (row {r}, col {c})")
            out[r * side : (r + 1) * side, c * side : (c + 1) * side] = by_pos[(r, c)]
    return out


# Corpus naming: the stable join key across image and audio corpora.
_TILE_RE = re.compile(r"^s(\d{4,})_r(\d+)_c(\d+)$")
_SLICE_RE = re.compile(r"^s(\d{4,})$")


def slice_name(slice_index: int) -> str:
    return f"s{slice_index:04d}"


def tile_name(tile_id: TileId) -> str:
    return f"s{tile_id.slice_index:04d}_r{tile_id.row}_c{tile_id.col}"


def parse_corpus_key(stem: str):
    """Parse a corpus file stem into a TileId or a bare slice index.

    Returns a TileId for tile keys (``s0012_r1_c3``), an int for whole-slice
    keys (``s0012``), and None for anything else.
    """
    m = _TILE_RE.match(stem)
    if m:
        return TileId(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    m = _SLICE_RE.match(stem)
    if m:
        return int(m.group(1))
    return None
