"""Pore segmentation: threshold, clean, distance-transform, watershed.

The chain turns a grayscale volume into per-voxel pore labels:

    otsu -> binarize (dark = pore) -> majority transform -> exact EDT
         -> median filter -> marker-based watershed on the negated map

Everything is written for 3D volumes but works unchanged on 2D slices,
where neighborhoods shrink from 26- to 8-connectivity and the median
window follows the 2x2 upper-left-anchored variant used by the per-slice
analyses. Outside the volume counts as solid throughout, so distances are
finite and edge voxels see a stable boundary.
"""

from __future__ import annotations

import heapq
import os
from typing import NamedTuple

import numpy as np
from scipy import ndimage
from skimage.morphology import local_maxima

from .volume import GrayVolume

_FAULT_ENV = "POREVOICE_FAULT"


class SegmentationError(ValueError):
    """Raised when inputs violate a segmentation contract."""


class OtsuResult(NamedTuple):
    threshold: int
    degenerate: bool  # all mass at a single level


class WatershedResult(NamedTuple):
    labels: np.ndarray  # int32, 0 = solid, 1..n_labels = pore ids
    n_labels: int
    empty: bool  # no pore voxels at all


def _as_array(pixels) -> np.ndarray:
    if isinstance(pixels, GrayVolume):
        return pixels.data
    return np.asarray(pixels)


def luminance_histogram(pixels) -> np.ndarray:
    """Count pixels at each of the 256 luminance levels.

    Accepts an image, a volume array, or a GrayVolume; the sum of counts
    equals the pixel count.
    """
    arr = _as_array(pixels)
    if arr.size == 0:
        raise SegmentationError("cannot histogram an empty input")
    if arr.dtype != np.uint8:
        raise SegmentationError(f"expected uint8 luminance, got {arr.dtype}")
    return np.bincount(arr.ravel(), minlength=256).astype(np.int64)


def otsu_threshold(hist: np.ndarray) -> OtsuResult:
    """Pick the luminance threshold maximizing between-class variance.

    Classes are {level <= t} and {level > t}; ties break toward the smallest
    t. A single-populated-level histogram is returned as-is with the
    degenerate flag set.
    """
    hist = np.asarray(hist, dtype=np.float64)
    if hist.shape != (256,):
        raise SegmentationError(f"histogram must have 256 bins, got {hist.shape}")
    total = hist.sum()
    if total <= 0:
        raise SegmentationError("empty histogram")
    nonzero = np.flatnonzero(hist)
    if len(nonzero) == 1:
        return OtsuResult(int(nonzero[0]), True)

    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)  # mass of class {<= t}
    m0 = np.cumsum(hist * levels)  # first moment of class {<= t}
    mu = m0[-1] / total
    w1 = total - w0
    # between-class variance: w0*w1*(mu0-mu1)^2 / total^2, guarded where a
    # class is empty (variance 0 there)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = np.where(w0 > 0, m0 / w0, 0.0)
        mu1 = np.where(w1 > 0, (m0[-1] - m0) / w1, 0.0)
    sigma_b = w0 * w1 * (mu0 - mu1) ** 2
    sigma_b[w0 == 0] = 0.0
    sigma_b[w1 == 0] = 0.0
    return OtsuResult(int(np.argmax(sigma_b)), False)


def pore_threshold(hist: np.ndarray) -> int:
    """Otsu threshold adjusted for contrast-free inputs.

    A histogram with all mass at one level has no pore/solid contrast; the
    level itself decides: dark constants (< 128) read as pore, bright ones
    as solid (threshold just below the level).
    """
    result = otsu_threshold(hist)
    if result.degenerate and result.threshold >= 128:
        return result.threshold - 1
    return result.threshold


def binarize(volume, threshold: int) -> np.ndarray:
    """Boolean pore mask: a voxel is pore iff its luminance <= threshold.

    Micro-CT images voids dark, so the low class is the void phase.
    """
    arr = _as_array(volume)
    return arr <= threshold


def majority_filter(mask: np.ndarray, max_passes: int = 64) -> np.ndarray:
    """Majority transform over the face-connected neighborhood, to stability.

    Each voxel takes the majority of itself plus its face neighbors (7
    cells in 3D, 5 in 2D; at least 4 of 7 / 3 of 5 make pore); neighbors
    outside the volume count as solid. Passes repeat until the mask stops
    changing, so the result is idempotent. Removes salt-and-pepper features
    that would seed spurious watershed basins; the compact neighborhood
    keeps boundary erosion under half a voxel even on small round pores,
    where a full-box majority would shave enough surface to skew the
    recovered pore sizes. Natural masks settle within a few passes;
    max_passes only guards against pathological oscillators.
    """
    mask = np.asarray(mask, dtype=bool)
    kernel = ndimage.generate_binary_structure(mask.ndim, 1).astype(np.uint8)
    threshold = int(kernel.sum())
    previous = None
    current = mask
    for _ in range(max_passes):
        counts = ndimage.convolve(current.astype(np.uint8), kernel, mode="constant", cval=0)
        stepped = counts * 2 > threshold
        if np.array_equal(stepped, current):
            break
        if previous is not None and np.array_equal(stepped, previous):
            break  # period-2 oscillator; keep the current state
        previous = current
        current = stepped
    return current


def distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from each pore voxel to the nearest solid.

    All space beyond the volume faces is solid, so a one-voxel solid shell
    is padded on before the transform. Solid voxels map to 0.
    """
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded)
    inner = tuple(slice(1, -1) for _ in range(mask.ndim))
    return dist[inner]


def median_filter(dist: np.ndarray, window: int = 3) -> np.ndarray:
    """Median-filter a distance map; solid voxels stay exactly 0.

    Odd windows are centered with reflected boundaries, so a constant field
    passes through unchanged (the 3D pipeline default is 3). The even
    window 2 is only legal on 2D maps and is anchored at the upper-left of
    its 2x2 block with zero padding past the low-right edges, matching the
    per-slice analysis convention.
    """
    dist = np.asarray(dist, dtype=np.float64)
    solid = dist == 0
    if window == 1:
        return dist.copy()
    if window % 2 == 1:
        out = ndimage.median_filter(dist, size=window, mode="reflect")
    elif window == 2 and dist.ndim == 2:
        padded = np.pad(dist, ((0, 1), (0, 1)), constant_values=0.0)
        stack = np.stack(
            [padded[:-1, :-1], padded[:-1, 1:], padded[1:, :-1], padded[1:, 1:]]
        )
        out = np.median(stack, axis=0)
    else:
        raise SegmentationError(f"window {window} must be odd for {dist.ndim}D maps")
    out[solid] = 0.0
    return out


def _full_connectivity(ndim: int) -> np.ndarray:
    return np.ones((3,) * ndim, dtype=np.int8)


def _neighbor_offsets(ndim: int) -> list[tuple[int, ...]]:
    grids = np.meshgrid(*([[-1, 0, 1]] * ndim), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    return [tuple(o) for o in offs if any(o)]


def watershed_markers(dist: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Label the flooding seeds: regional maxima of the distance map.

    A marker is a connected plateau (26-connected in 3D) of pore voxels
    whose value strictly exceeds every neighbor outside the plateau.
    Returns (marker label array, marker count).
    """
    peaks = local_maxima(dist, connectivity=dist.ndim, allow_borders=True)
    peaks &= mask
    peaks &= dist > 0
    markers, n = ndimage.label(peaks, structure=_full_connectivity(dist.ndim))
    return markers.astype(np.int32), int(n)


def watershed_segment(dist: np.ndarray, mask: np.ndarray) -> WatershedResult:
    """Flood the negated distance map from its regional maxima.

    Every pore voxel ends up in exactly one basin; basins are labelled
    1..K in marker order and solid voxels stay 0. The flood is a single
    priority queue ordered by (-distance, linear index), so ties always
    resolve toward the lower linear index and the output is deterministic.
    """
    dist = np.asarray(dist, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if dist.shape != mask.shape:
        raise SegmentationError(
            f"distance map shape {dist.shape} does not match mask shape {mask.shape}"
        )
    labels, n = watershed_markers(dist, mask)
    if n == 0:
        return WatershedResult(np.zeros(mask.shape, np.int32), 0, True)

    shape = mask.shape
    offsets = _neighbor_offsets(mask.ndim)
    flat_labels = labels.ravel()
    flat_dist = dist.ravel()
    flat_mask = mask.ravel()

    heap: list[tuple[float, int]] = []
    for lin in np.flatnonzero(flat_labels):
        heapq.heappush(heap, (-flat_dist[lin], int(lin)))

    strides = np.array([int(np.prod(shape[d + 1 :])) for d in range(len(shape))])
    while heap:
        _, lin = heapq.heappop(heap)
        lab = flat_labels[lin]
        coord = np.unravel_index(lin, shape)
        for off in offsets:
            ok = True
            nlin = lin
            for d, o in enumerate(off):
                c = coord[d] + o
                if c < 0 or c >= shape[d]:
                    ok = False
                    break
                nlin += o * strides[d]
            if not ok or not flat_mask[nlin] or flat_labels[nlin]:
                continue
            flat_labels[nlin] = lab
            heapq.heappush(heap, (-flat_dist[nlin], int(nlin)))

    if os.environ.get(_FAULT_ENV) == "watershed":
        # deliberate corruption hook used by the selftest negative control
        labels[labels > 1] = 1
        n = int(labels.max())
    return WatershedResult(labels, n, False)


def segment_volume(volume, median_window: int = 3) -> WatershedResult:
    """Run the full chain on a grayscale volume (or 2D image array).

    otsu -> binarize -> majority -> EDT -> median filter -> watershed.
    """
    arr = _as_array(volume)
    t = pore_threshold(luminance_histogram(arr))
    mask = majority_filter(binarize(arr, t))
    dist = median_filter(distance_transform(mask), median_window)
    return watershed_segment(dist, mask)


def render_labels(labels: np.ndarray) -> np.ndarray:
    """Deterministic 8-bit rendering of a label array for debug dumps.

    Solid maps to 0 and pore label k maps to 1 + (k - 1) mod 255, so ids
    beyond 255 wrap but the image remains reproducible bit-for-bit.
    """
    labels = np.asarray(labels)
    out = np.where(labels > 0, 1 + (labels - 1) % 255, 0)
    return out.astype(np.uint8)


def dump_segmentation(volume, directory, voxel_size_um: float = 1.0) -> None:
    """Debug dump of a binary mask or label volume as a PNG slice stack.

    Boolean masks render pore as 255; label volumes go through
    render_labels. Slices are named s0000.png onward.
    """
    from .volume import GrayVolume, emit_stack

    arr = np.asarray(volume)
    if arr.dtype == bool:
        rendered = np.where(arr, 255, 0).astype(np.uint8)
    else:
        rendered = render_labels(arr)
    emit_stack(GrayVolume(rendered, voxel_size_um), directory)
