"""Architectural statistics over the labelled pore space.

Pores become nodes of a network graph (centroid, voxel volume, equivalent
sphere diameter); edges connect pores whose one-voxel dilations meet, with
Euclidean centroid distance as the edge length. Geometric tortuosity is the
shortest through-network path length divided by the straight-line endpoint
distance, sampled over a regular grid of inlet/outlet face points.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .volume import VolumeError


@dataclass(frozen=True)
class Pore:
    """One labelled pore region."""

    id: int
    voxel_count: int
    centroid: tuple[float, ...]  # voxel coordinates, same axis order as the array
    equivalent_diameter_um: float


@dataclass
class TortuosityResult:
    tau_values: list[float] = field(default_factory=list)
    unreachable_pairs: int = 0
    degenerate_pairs: int = 0  # start and finish mapped to the same pore


def porosity(mask: np.ndarray) -> float:
    """Pore voxel fraction of the whole volume."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        raise VolumeError("cannot compute porosity of an empty volume")
    return float(np.count_nonzero(mask)) / mask.size


def porosity_per_slice(mask: np.ndarray) -> np.ndarray:
    """Porosity of each slice along the depth axis."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 3 or mask.size == 0:
        raise VolumeError(f"expected a non-empty 3D mask, got shape {mask.shape}")
    flat = mask.reshape(mask.shape[0], -1)
    return flat.sum(axis=1) / flat.shape[1]


def equivalent_diameter(voxel_count: int, voxel_size_um: float, ndim: int = 3) -> float:
    """Diameter of the sphere (or circle, in 2D) of equal volume (area)."""
    if ndim == 3:
        return voxel_size_um * (6.0 * voxel_count / math.pi) ** (1.0 / 3.0)
    if ndim == 2:
        return voxel_size_um * 2.0 * math.sqrt(voxel_count / math.pi)
    raise VolumeError(f"unsupported dimensionality {ndim}")


def quantify_pores(labels: np.ndarray, voxel_size_um: float) -> list[Pore]:
    """One Pore record per label: voxel count, centroid, equivalent diameter.

    An empty labelling yields an empty list.
    """
    labels = np.asarray(labels)
    if not voxel_size_um > 0:
        raise VolumeError(f"voxel_size_um must be positive, got {voxel_size_um}")
    n = int(labels.max(initial=0))
    if n == 0:
        return []
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    if np.any(counts[1:] == 0):
        missing = int(np.flatnonzero(counts[1:] == 0)[0]) + 1
        raise VolumeError(f"labels are not contiguous: id {missing} is unused")
    flat = labels.ravel()
    sums = np.zeros((labels.ndim, n + 1))
    for d in range(labels.ndim):
        coord = np.indices(labels.shape)[d].ravel()
        sums[d] = np.bincount(flat, weights=coord, minlength=n + 1)
    pores = []
    for k in range(1, n + 1):
        centroid = tuple(float(sums[d, k] / counts[k]) for d in range(labels.ndim))
        pores.append(
            Pore(
                id=k,
                voxel_count=int(counts[k]),
                centroid=centroid,
                equivalent_diameter_um=equivalent_diameter(
                    int(counts[k]), voxel_size_um, labels.ndim
                ),
            )
        )
    return pores


def _half_offsets(ndim: int, reach: int) -> list[tuple[int, ...]]:
    # one representative of each +/- displacement pair within Chebyshev reach
    rng = range(-reach, reach + 1)
    grids = np.meshgrid(*([list(rng)] * ndim), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    keep = []
    for o in offs:
        nz = o[o != 0]
        if len(nz) and nz[0] > 0:
            keep.append(tuple(int(v) for v in o))
    return keep


def connect_pores(labels: np.ndarray) -> set[tuple[int, int]]:
    """Edges between pores whose one-voxel dilations intersect.

    Dilating both regions by the full 3x3x3 element makes them meet exactly
    when some voxel pair sits within Chebyshev distance 2, so a one-voxel
    solid wall still connects while walls of two or more voxels do not.
    Touching watershed basins are always connected.
    """
    labels = np.asarray(labels)
    edges: set[tuple[int, int]] = set()
    for off in _half_offsets(labels.ndim, 2):
        sl_a, sl_b = [], []
        for o, n in zip(off, labels.shape):
            if abs(o) >= n:
                sl_a = None
                break
            if o >= 0:
                sl_a.append(slice(0, n - o))
                sl_b.append(slice(o, n))
            else:
                sl_a.append(slice(-o, n))
                sl_b.append(slice(0, n + o))
        if sl_a is None:
            continue
        a = labels[tuple(sl_a)]
        b = labels[tuple(sl_b)]
        m = (a > 0) & (b > 0) & (a != b)
        if not m.any():
            continue
        pa, pb = a[m], b[m]
        lo = np.minimum(pa, pb)
        hi = np.maximum(pa, pb)
        for i, j in np.unique(np.stack([lo, hi], axis=1), axis=0):
            edges.add((int(i), int(j)))
    return edges


@dataclass
class PoreNetwork:
    """Graph of pores with centroid-distance edge lengths (micrometers)."""

    pores: list[Pore]
    edges: dict[tuple[int, int], float]
    dims: tuple[int, ...]
    voxel_size_um: float

    def __post_init__(self):
        ids = {p.id for p in self.pores}
        for (i, j), length in self.edges.items():
            if i == j:
                raise VolumeError(f"self edge on pore {i}")
            if i not in ids or j not in ids:
                raise VolumeError(f"edge ({i}, {j}) references a missing pore")
            if not length > 0:
                raise VolumeError(f"edge ({i}, {j}) has non-positive length {length}")

    @classmethod
    def from_labels(cls, labels: np.ndarray, voxel_size_um: float) -> "PoreNetwork":
        pores = quantify_pores(labels, voxel_size_um)
        by_id = {p.id: p for p in pores}
        edges = {}
        for i, j in connect_pores(labels):
            ca = np.asarray(by_id[i].centroid)
            cb = np.asarray(by_id[j].centroid)
            edges[(i, j)] = float(np.linalg.norm(ca - cb) * voxel_size_um)
        return cls(pores, edges, tuple(np.asarray(labels).shape), voxel_size_um)

    def adjacency(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {p.id: [] for p in self.pores}
        for (i, j), length in self.edges.items():
            adj[i].append((j, length))
            adj[j].append((i, length))
        for neighbors in adj.values():
            neighbors.sort()
        return adj


def coordination_numbers(network: PoreNetwork) -> dict[int, int]:
    """Edge count (degree) of every pore node."""
    degrees = {p.id: 0 for p in network.pores}
    for i, j in network.edges:
        degrees[i] += 1
        degrees[j] += 1
    return degrees


def shortest_path_lengths(network: PoreNetwork, source: int) -> dict[int, float]:
    """Dijkstra over the pore graph; unreachable nodes are absent.

    Heap entries are (distance, node id), so equal-length alternatives
    resolve toward the smaller node id and runs are reproducible.
    """
    adj = network.adjacency()
    if source not in adj:
        raise VolumeError(f"unknown pore id {source}")
    dist = {source: 0.0}
    done: set[int] = set()
    heap = [(0.0, source)]
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        for nb, w in adj[node]:
            nd = d + w
            if nb not in dist or nd < dist[nb]:
                dist[nb] = nd
                heapq.heappush(heap, (nd, nb))
    return dist


_AXIS_INDEX = {"z": 0, "y": 1, "x": 2}


def _face_grid(dims: tuple[int, ...], axis: int, face_coord: int, spacing: int) -> list[np.ndarray]:
    other = [d for d in range(len(dims)) if d != axis]
    points = []
    for a in range(0, dims[other[0]], spacing):
        for b in range(0, dims[other[1]], spacing):
            p = np.zeros(len(dims))
            p[axis] = face_coord
            p[other[0]] = a
            p[other[1]] = b
            points.append(p)
    return points


def _nearest_pore(point: np.ndarray, centroids: np.ndarray) -> int:
    d2 = ((centroids - point) ** 2).sum(axis=1)
    return int(np.argmin(d2)) + 1  # first minimum = lowest pore id


def tortuosity_distribution(
    network: PoreNetwork, axis: str = "z", grid_spacing: int = 16
) -> TortuosityResult:
    """Geometric tortuosities between opposite faces along one axis.

    Regularly spaced points on the inlet and outlet faces each attach to
    the nearest pore centroid (ties to the lower id). For every
    (start, finish) point pair, tau = shortest network path length over
    straight-line centroid distance. Pairs whose endpoints share a pore are
    skipped and counted as degenerate; pairs with no connecting path are
    counted as unreachable.
    """
    if not network.pores:
        raise VolumeError("cannot compute tortuosity of an empty network")
    if grid_spacing < 1:
        raise VolumeError(f"grid_spacing must be >= 1, got {grid_spacing}")
    if axis not in _AXIS_INDEX:
        raise VolumeError(f"axis must be one of x, y, z, got '{axis}'")
    ax = _AXIS_INDEX[axis] if len(network.dims) == 3 else 0
    centroids = np.array([p.centroid for p in network.pores])

    starts = [
        _nearest_pore(p, centroids)
        for p in _face_grid(network.dims, ax, 0, grid_spacing)
    ]
    finishes = [
        _nearest_pore(p, centroids)
        for p in _face_grid(network.dims, ax, network.dims[ax] - 1, grid_spacing)
    ]

    result = TortuosityResult()
    path_cache = {s: shortest_path_lengths(network, s) for s in set(starts)}
    for s in starts:
        lengths = path_cache[s]
        cs = centroids[s - 1]
        for f in finishes:
            if s == f:
                result.degenerate_pairs += 1
                continue
            if f not in lengths:
                result.unreachable_pairs += 1
                continue
            straight = float(np.linalg.norm(centroids[f - 1] - cs)) * network.voxel_size_um
            result.tau_values.append(lengths[f] / straight)
    return result
