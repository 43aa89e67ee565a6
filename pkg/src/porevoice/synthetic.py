"""Synthetic porous volumes with known ground truth, plus brute-force oracles.

Sphere packs, polyline channels, and pearl chains (beads along a polyline)
cover the segmentation, connectivity, and tortuosity checks: each generator
records the analytically known quantities the pipeline must recover. The
brute-force routines are deliberately naive re-derivations used to
cross-check the production implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import PoreNetwork
from .volume import GrayVolume

SOLID_LEVEL = 230
PORE_LEVEL = 0


class SyntheticError(ValueError):
    """Raised when a generator spec is out of bounds."""


@dataclass(frozen=True)
class SpherePackSpec:
    dims: tuple[int, int, int]  # (depth, height, width)
    spheres: list  # of (center (z, y, x) floats, radius)

    def __post_init__(self):
        for center, radius in self.spheres:
            if radius <= 0:
                raise SyntheticError(f"sphere radius {radius} must be positive")
            for c, n in zip(center, self.dims):
                if c - radius < 0 or c + radius > n - 1:
                    raise SyntheticError(
                        f"sphere at {tuple(center)} radius {radius} extends outside {self.dims}"
                    )


@dataclass(frozen=True)
class ChannelSpec:
    dims: tuple[int, int, int]
    waypoints: list  # ordered (z, y, x) coordinates
    channel_radius: float

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise SyntheticError("channel needs at least two waypoints")
        if self.channel_radius <= 0:
            raise SyntheticError("channel radius must be positive")
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            delta = np.subtract(b, a)
            if not delta.any():
                raise SyntheticError(f"disconnected waypoints: {a} repeats")
            steps = {abs(d) for d in delta if d}
            if len(steps) > 1:
                raise SyntheticError(
                    f"segment {a} -> {b} is neither axis-aligned nor diagonal"
                )


@dataclass
class SpherePackTruth:
    sphere_voxel_counts: list[int]
    pore_voxel_count: int  # union over all spheres
    porosity: float  # voxelized, equals metrics.porosity of the recovered mask
    analytic_porosity: float  # continuous void fraction (pairwise overlaps subtracted)
    overlaps: set = field(default_factory=set)  # 0-based sphere index pairs


def _sphere_mask(dims, center, radius) -> np.ndarray:
    # open grids keep peak memory at one full-size array per call
    gz, gy, gx = np.ogrid[: dims[0], : dims[1], : dims[2]]
    d2 = (
        (gz - float(center[0])) ** 2
        + (gy - float(center[1])) ** 2
        + (gx - float(center[2])) ** 2
    )
    return d2 <= radius * radius


def gen_sphere_pack(spec: SpherePackSpec, voxel_size_um: float = 1.0):
    """Voxelize a sphere pack: pore luminance 0 on a 230 solid background.

    The two fixed levels sit far apart so Otsu recovers the exact mask.
    Membership is voxel-center-inside-sphere, making the recorded voxelized
    porosity exactly what the pipeline's porosity() reports.
    """
    union = np.zeros(spec.dims, dtype=bool)
    counts = []
    for center, radius in spec.spheres:
        inside = _sphere_mask(spec.dims, center, radius)
        counts.append(int(inside.sum()))
        union |= inside
    volume = np.where(union, PORE_LEVEL, SOLID_LEVEL).astype(np.uint8)

    total = int(np.prod(spec.dims))
    analytic = sum((4.0 / 3.0) * math.pi * r**3 for _, r in spec.spheres)
    overlaps = set()
    for i in range(len(spec.spheres)):
        for j in range(i + 1, len(spec.spheres)):
            (ca, ra), (cb, rb) = spec.spheres[i], spec.spheres[j]
            d = float(np.linalg.norm(np.subtract(ca, cb)))
            if d < ra + rb:
                overlaps.add((i, j))
                analytic -= _lens_volume(ra, rb, d)
    truth = SpherePackTruth(
        sphere_voxel_counts=counts,
        pore_voxel_count=int(union.sum()),
        porosity=float(union.sum()) / total,
        analytic_porosity=analytic / total,
        overlaps=overlaps,
    )
    return GrayVolume(volume, voxel_size_um), truth


def _lens_volume(r1: float, r2: float, d: float) -> float:
    # volume of the intersection of two spheres at center distance d < r1+r2
    if d <= abs(r1 - r2):
        r = min(r1, r2)
        return (4.0 / 3.0) * math.pi * r**3
    return (
        math.pi
        * (r1 + r2 - d) ** 2
        * (d * d + 2 * d * (r1 + r2) - 3 * (r1 - r2) ** 2)
        / (12 * d)
    )


def _polyline_length(waypoints) -> float:
    return float(
        sum(
            np.linalg.norm(np.subtract(b, a))
            for a, b in zip(waypoints, waypoints[1:])
        )
    )


def _expected_tau(waypoints) -> float:
    endpoint = float(np.linalg.norm(np.subtract(waypoints[-1], waypoints[0])))
    if endpoint == 0:
        raise SyntheticError("channel endpoints coincide; tau undefined")
    return _polyline_length(waypoints) / endpoint


def gen_channel(spec: ChannelSpec, voxel_size_um: float = 1.0):
    """Voxelize a tube of channel_radius around the waypoint polyline.

    Returns the volume and the geometric expected tau: polyline length over
    endpoint straight-line distance.
    """
    grid = np.indices(spec.dims, dtype=np.float64)
    pts = np.stack([g.ravel() for g in grid], axis=1)
    inside = np.zeros(len(pts), dtype=bool)
    for a, b in zip(spec.waypoints, spec.waypoints[1:]):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        ab = b - a
        t = np.clip((pts - a) @ ab / (ab @ ab), 0.0, 1.0)
        nearest = a + t[:, None] * ab
        inside |= ((pts - nearest) ** 2).sum(axis=1) <= spec.channel_radius**2
    volume = np.where(
        inside.reshape(spec.dims), PORE_LEVEL, SOLID_LEVEL
    ).astype(np.uint8)
    return GrayVolume(volume, voxel_size_um), _expected_tau(spec.waypoints)


def gen_pearl_chain(
    dims,
    waypoints,
    radius: float = 2.5,
    bead_step: int = 6,
    voxel_size_um: float = 1.0,
):
    """Beads along a polyline: disjoint spheres separated by thin walls.

    Unlike a constant-radius tube (which the watershed keeps as one pore per
    straight run), the bead chain segments into one pore per bead. Segments
    must be axis-aligned or 45-degree diagonal with ``bead_step`` dividing
    their lattice extent, so every bead center lands on an integer voxel
    coordinate: the digitized beads are then point-symmetric, their measured
    centroids sit exactly on the polyline, and the measured tortuosity
    equals the returned expected tau (polyline length over endpoint
    distance).
    """
    waypoints = [np.asarray(w, dtype=np.int64) for w in waypoints]
    centers = [waypoints[0]]
    for a, b in zip(waypoints, waypoints[1:]):
        delta = b - a
        extent = int(np.abs(delta).max())
        if extent == 0:
            raise SyntheticError(f"disconnected waypoints: {tuple(a)} repeats")
        unit, remainder = np.divmod(delta, extent)
        if remainder.any():
            raise SyntheticError(
                f"segment {tuple(a)} -> {tuple(b)} is neither axis-aligned nor diagonal"
            )
        if extent % bead_step:
            raise SyntheticError(
                f"bead step {bead_step} does not divide segment extent {extent}"
            )
        for k in range(1, extent // bead_step + 1):
            centers.append(a + unit * (k * bead_step))
    spheres = [(tuple(float(v) for v in c), radius) for c in centers]
    pack = SpherePackSpec(tuple(dims), spheres)
    volume, truth = gen_sphere_pack(pack, voxel_size_um)
    return volume, _expected_tau(waypoints), truth


def brute_force_otsu(hist) -> int:
    """Exhaustive scan of all 256 thresholds, smallest argmax.

    Evaluates the between-class variance for every split independently of
    the production implementation's cumulative formulation.
    """
    hist = np.asarray(hist, dtype=np.float64)
    total = hist.sum()
    if total <= 0:
        raise SyntheticError("empty histogram")
    nonzero = np.flatnonzero(hist)
    if len(nonzero) == 1:
        return int(nonzero[0])
    levels = np.arange(256, dtype=np.float64)
    best_t, best_v = 0, -1.0
    for t in range(256):
        w0 = hist[: t + 1].sum()
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            variance = 0.0
        else:
            mu0 = (hist[: t + 1] * levels[: t + 1]).sum() / w0
            mu1 = (hist[t + 1 :] * levels[t + 1 :]).sum() / w1
            variance = w0 * w1 * (mu0 - mu1) ** 2
        if variance > best_v:
            best_t, best_v = t, variance
    return best_t


def brute_force_distance_transform(mask: np.ndarray) -> np.ndarray:
    """All-pairs nearest-solid search, outside-the-volume counted as solid.

    Exact for small volumes; squared distances stay integral so the final
    sqrt matches the production transform bit for bit.
    """
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, constant_values=False)
    solid = np.argwhere(~padded)
    pore = np.argwhere(padded)
    out = np.zeros(padded.shape)
    if len(pore):
        diff = pore[:, None, :] - solid[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        out[tuple(pore.T)] = np.sqrt(d2.min(axis=1))
    inner = tuple(slice(1, -1) for _ in range(mask.ndim))
    return out[inner]


def brute_force_shortest_path(network: PoreNetwork, start: int, finish: int) -> float:
    """Minimum total edge length over all simple paths, by full enumeration.

    Only sensible for tiny networks (<= 8 pores); returns inf when no path
    exists.
    """
    ids = {p.id for p in network.pores}
    if start not in ids or finish not in ids:
        raise SyntheticError(f"unknown pore id in ({start}, {finish})")
    if len(ids) > 8:
        raise SyntheticError("brute-force path search is limited to 8 pores")
    adj = network.adjacency()
    best = math.inf

    def walk(node, seen, length):
        nonlocal best
        if length >= best:
            return
        if node == finish:
            best = length
            return
        for nb, w in adj[node]:
            if nb not in seen:
                walk(nb, seen | {nb}, length + w)

    walk(start, {start}, 0.0)
    return best


def random_sphere_pack_spec(
    rng: np.random.Generator,
    n_spheres: int,
    dims=(64, 64, 64),
    radius_range=(3, 8),
    clearance: float = 3.0,
    max_tries: int = 20000,
) -> SpherePackSpec:
    """Random non-touching pack: surface gaps of at least ``clearance``."""
    spheres: list = []
    tries = 0
    while len(spheres) < n_spheres:
        tries += 1
        if tries > max_tries:
            raise SyntheticError(
                f"could not place {n_spheres} spheres in {dims} after {max_tries} tries"
            )
        r = float(rng.uniform(radius_range[0], radius_range[1]))
        center = tuple(float(rng.uniform(r + 1, n - r - 2)) for n in dims)
        if all(
            np.linalg.norm(np.subtract(center, c)) >= r + cr + clearance
            for c, cr in spheres
        ):
            spheres.append((center, r))
    return SpherePackSpec(tuple(dims), spheres)
