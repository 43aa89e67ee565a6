import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porevoice import synthetic
from porevoice.segmentation import (
    SegmentationError,
    binarize,
    distance_transform,
    luminance_histogram,
    majority_filter,
    median_filter,
    otsu_threshold,
    render_labels,
    segment_volume,
    watershed_markers,
    watershed_segment,
)


class TestHistogram:
    def test_single_level(self):
        img = np.full((64, 64), 128, np.uint8)
        hist = luminance_histogram(img)
        assert hist[128] == 4096
        assert hist.sum() == 4096
        assert (np.delete(hist, 128) == 0).all()

    def test_counting(self):
        img = np.array([0] * 10 + [255] * 6, np.uint8).reshape(4, 4)
        hist = luminance_histogram(img)
        assert hist[0] == 10 and hist[255] == 6

    def test_sum_matches_naive_tally(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (31, 17), dtype=np.uint8)
        hist = luminance_histogram(img)
        naive = np.zeros(256, np.int64)
        for v in img.ravel():
            naive[v] += 1
        assert np.array_equal(hist, naive)

    def test_empty_rejected(self):
        with pytest.raises(SegmentationError):
            luminance_histogram(np.zeros((0, 4), np.uint8))


class TestOtsu:
    def test_two_level_separates(self):
        hist = np.zeros(256, np.int64)
        hist[10], hist[200] = 500, 300
        result = otsu_threshold(hist)
        assert 10 <= result.threshold <= 199
        assert result.threshold == 10  # smallest maximizer
        assert not result.degenerate

    def test_single_level_degenerate(self):
        hist = np.zeros(256, np.int64)
        hist[77] = 123
        result = otsu_threshold(hist)
        assert result.threshold == 77
        assert result.degenerate

    def test_empty_rejected(self):
        with pytest.raises(SegmentationError):
            otsu_threshold(np.zeros(256, np.int64))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        hist = rng.integers(0, 1000, 256).astype(np.int64)
        hist[rng.random(256) < 0.7] = 0
        if hist.sum() == 0:
            hist[int(rng.integers(0, 256))] = 5
        assert otsu_threshold(hist).threshold == synthetic.brute_force_otsu(hist)


class TestBinarize:
    def test_all_dark_is_all_pore(self):
        assert binarize(np.zeros((4, 4, 4), np.uint8), 200).all()

    def test_all_bright_is_all_solid(self):
        assert not binarize(np.full((4, 4, 4), 255, np.uint8), 127).any()

    def test_two_level_with_otsu(self):
        vol = np.full((4, 4, 4), 200, np.uint8)
        vol[0, 0, :2] = 10
        t = otsu_threshold(luminance_histogram(vol)).threshold
        mask = binarize(vol, t)
        assert np.array_equal(mask, vol == 10)


class TestMajority:
    def test_uniform_unchanged(self):
        assert majority_filter(np.ones((5, 5, 5), bool)).all()
        assert not majority_filter(np.zeros((5, 5, 5), bool)).any()

    def test_isolated_pore_removed(self):
        mask = np.zeros((7, 7, 7), bool)
        mask[3, 3, 3] = True
        assert not majority_filter(mask).any()

    def test_isolated_solid_filled(self):
        mask = np.ones((7, 7, 7), bool)
        mask[3, 3, 3] = False
        assert majority_filter(mask).all()

    def test_idempotent_on_digitized_balls(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            r = rng.uniform(3.0, 8.0)
            c = np.array([10.0, 10.0, 10.0]) + rng.uniform(0, 1, 3)
            zz, yy, xx = np.indices((21, 21, 21))
            mask = (zz - c[0]) ** 2 + (yy - c[1]) ** 2 + (xx - c[2]) ** 2 <= r * r
            once = majority_filter(mask)
            assert np.array_equal(once, majority_filter(once))


class TestDistanceTransform:
    def test_solid_is_zero(self):
        mask = np.zeros((3, 3, 3), bool)
        assert (distance_transform(mask) == 0).all()

    def test_isolated_pore_unit_distance(self):
        mask = np.zeros((5, 5, 5), bool)
        mask[2, 2, 2] = True
        assert distance_transform(mask)[2, 2, 2] == 1.0

    def test_all_pore_center_reaches_virtual_solid(self):
        mask = np.ones((5, 5, 5), bool)
        assert distance_transform(mask)[2, 2, 2] == 3.0

    def test_matches_brute_force_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(15):
            dims = tuple(rng.integers(2, 13, 3))
            mask = rng.random(dims) < rng.uniform(0.2, 0.9)
            assert np.array_equal(
                distance_transform(mask),
                synthetic.brute_force_distance_transform(mask),
            )

    def test_2d_supported(self):
        mask = np.ones((5, 5), bool)
        assert distance_transform(mask)[2, 2] == 3.0


class TestMedianFilter:
    def test_constant_unchanged(self):
        dist = np.full((4, 4, 4), 2.5)
        assert np.array_equal(median_filter(dist, 3), dist)

    def test_spike_removed(self):
        dist = np.full((5, 5, 5), 2.0)
        dist[2, 2, 2] = 9.0
        out = median_filter(dist, 3)
        assert out[2, 2, 2] == 2.0

    def test_window_one_identity(self):
        rng = np.random.default_rng(3)
        dist = rng.random((4, 5, 6))
        assert np.array_equal(median_filter(dist, 1), dist)

    def test_solid_stays_zero(self):
        dist = np.full((5, 5, 5), 4.0)
        dist[0, 0, 0] = 0.0
        assert median_filter(dist, 3)[0, 0, 0] == 0.0

    def test_even_window_rejected_in_3d(self):
        with pytest.raises(SegmentationError):
            median_filter(np.ones((4, 4, 4)), 2)

    def test_2x2_window_upper_left_anchor(self):
        dist = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = median_filter(dist, 2)
        # window of (0,0) covers the whole block: median of 1,2,3,4 = 2.5;
        # windows hanging off the low-right edges read zero padding
        assert out[0, 0] == 2.5
        assert out[0, 1] == np.median([2.0, 0.0, 4.0, 0.0])
        assert out[1, 1] == np.median([4.0, 0.0, 0.0, 0.0])


def ball_volume(center, r, dims=(24, 24, 24)):
    zz, yy, xx = np.indices(dims)
    mask = (zz - center[0]) ** 2 + (yy - center[1]) ** 2 + (xx - center[2]) ** 2 <= r * r
    return np.where(mask, 0, 230).astype(np.uint8)


class TestWatershed:
    def test_single_spherical_pore(self):
        shed = segment_volume(ball_volume((12, 12, 12), 5))
        assert shed.n_labels == 1
        assert not shed.empty

    def test_two_separated_spheres(self):
        vol = np.full((40, 20, 20), 230, np.uint8)
        zz, yy, xx = np.indices((40, 20, 20))
        m1 = (zz - 10) ** 2 + (yy - 10) ** 2 + (xx - 10) ** 2 <= 25
        m2 = (zz - 29) ** 2 + (yy - 10) ** 2 + (xx - 10) ** 2 <= 25
        vol[m1 | m2] = 0
        shed = segment_volume(vol)
        assert shed.n_labels == 2
        labels_a = set(np.unique(shed.labels[m1])) - {0}
        labels_b = set(np.unique(shed.labels[m2])) - {0}
        assert labels_a.isdisjoint(labels_b)

    def test_overlapping_spheres_split_at_neck(self):
        vol = np.full((30, 17, 17), 230, np.uint8)
        zz, yy, xx = np.indices((30, 17, 17))
        m1 = (zz - 9) ** 2 + (yy - 8) ** 2 + (xx - 8) ** 2 <= 25
        m2 = (zz - 17) ** 2 + (yy - 8) ** 2 + (xx - 8) ** 2 <= 25
        vol[m1 | m2] = 0
        shed = segment_volume(vol)
        assert shed.n_labels == 2
        # basin boundary sits within 2 voxels of the neck plane z = 13
        boundary = [
            z
            for z in range(29)
            for y in range(17)
            for x in range(17)
            if shed.labels[z, y, x] and shed.labels[z + 1, y, x]
            and shed.labels[z, y, x] != shed.labels[z + 1, y, x]
        ]
        assert boundary and all(abs(z + 0.5 - 13) <= 2 for z in boundary)

    def test_empty_mask_flagged(self):
        dist = np.zeros((4, 4, 4))
        shed = watershed_segment(dist, np.zeros((4, 4, 4), bool))
        assert shed.empty and shed.n_labels == 0
        assert (shed.labels == 0).all()

    def test_labels_partition_pore_space(self):
        gray, _ = synthetic.gen_sphere_pack(
            synthetic.random_sphere_pack_spec(np.random.default_rng(4), 4)
        )
        t = otsu_threshold(luminance_histogram(gray)).threshold
        mask = majority_filter(binarize(gray, t))
        dist = median_filter(distance_transform(mask), 3)
        shed = watershed_segment(dist, mask)
        assert ((shed.labels > 0) == mask).all()
        assert set(np.unique(shed.labels)) == set(range(shed.n_labels + 1))

    def test_label_count_equals_marker_count(self):
        gray, _ = synthetic.gen_sphere_pack(
            synthetic.random_sphere_pack_spec(np.random.default_rng(5), 6)
        )
        t = otsu_threshold(luminance_histogram(gray)).threshold
        mask = majority_filter(binarize(gray, t))
        dist = median_filter(distance_transform(mask), 3)
        _, n_markers = watershed_markers(dist, mask)
        shed = watershed_segment(dist, mask)
        assert shed.n_labels == n_markers

    def test_deterministic(self):
        vol = ball_volume((12, 12, 12), 6)
        a = segment_volume(vol)
        b = segment_volume(vol)
        assert np.array_equal(a.labels, b.labels)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(SegmentationError):
            watershed_segment(np.zeros((3, 3, 3)), np.zeros((4, 4, 4), bool))


class TestRenderLabels:
    def test_deterministic_mapping(self):
        labels = np.array([[0, 1], [255, 256]], np.int32)
        out = render_labels(labels)
        assert out.dtype == np.uint8
        assert out.tolist() == [[0, 1], [255, 1]]
