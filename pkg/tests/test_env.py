import numpy as np
import pytest
from scipy.stats import chisquare

from droadmap import env
from droadmap.env import (
    FREE,
    OBSTACLE,
    UNKNOWN,
    MapLoadError,
    SamplingError,
    is_free,
    load_map,
    sample_free,
    segment_free,
    segment_witness,
)
from droadmap.scenarios import open_square


def make_map(rows, resolution=0.1):
    """Map from a list of strings: '.' free, '#' obstacle, '?' unknown."""
    codes = {".": FREE, "#": OBSTACLE, "?": UNKNOWN}
    cells = np.array([[codes[c] for c in row] for row in rows], dtype=np.int8)
    return env.OccupancyMap(
        width=cells.shape[1], height=cells.shape[0], cells=cells, resolution=resolution
    )


class TestLoadMap:
    def test_threshold_endpoints(self):
        occ = load_map(b"P2\n2 1\n255\n255 0\n")
        assert occ.cells[0, 0] == FREE
        assert occ.cells[0, 1] == OBSTACLE

    def test_midgray_is_unknown(self):
        occ = load_map(b"P2\n1 1\n255\n128\n")
        assert occ.cells[0, 0] == UNKNOWN

    def test_threshold_boundaries(self):
        occ = load_map(b"P2\n4 1\n255\n204 203 51 52\n")
        assert list(occ.cells[0]) == [FREE, UNKNOWN, OBSTACLE, UNKNOWN]

    def test_all_white(self):
        occ = load_map(b"P2\n10 10\n255\n" + b"255 " * 100)
        assert occ.free_cell_count() == 100

    def test_binary_matches_ascii(self):
        ascii_map = load_map(b"P2\n2 2\n255\n255 0 128 255\n")
        binary_map = load_map(b"P5\n2 2\n255\n" + bytes([255, 0, 128, 255]))
        assert (ascii_map.cells == binary_map.cells).all()

    def test_comments_skipped(self):
        occ = load_map(b"P2\n# a comment\n2 1 # another\n255\n255 0\n")
        assert occ.width == 2

    def test_bad_magic(self):
        with pytest.raises(MapLoadError) as exc:
            load_map(b"P6\n1 1\n255\nx")
        assert exc.value.offset == 0

    def test_truncated_raster_offset_reported(self):
        with pytest.raises(MapLoadError, match="offset"):
            load_map(b"P5\n4 4\n255\n" + bytes(3))

    def test_unsupported_maxval(self):
        with pytest.raises(MapLoadError, match="max value"):
            load_map(b"P2\n1 1\n65535\n0\n")

    def test_malformed_header(self):
        with pytest.raises(MapLoadError):
            load_map(b"P2\nzz 1\n255\n0\n")

    def test_resolution_default(self):
        occ = load_map(b"P2\n1 1\n255\n255\n")
        assert occ.resolution == 0.01


class TestIsFree:
    def test_center_of_free_cell(self):
        occ = make_map([".#"])
        assert is_free(occ, (0.05, 0.05))

    def test_obstacle_cell(self):
        occ = make_map([".#"])
        assert not is_free(occ, (0.15, 0.05))

    def test_out_of_bounds(self):
        occ = make_map(["."])
        assert not is_free(occ, (-0.1, 0.0))
        assert not is_free(occ, (0.0, 0.1))  # exactly on the far boundary

    def test_unknown_is_not_free(self):
        occ = make_map(["?"])
        assert not is_free(occ, (0.05, 0.05))


class TestSegmentFree:
    def test_degenerate_segment(self):
        occ = make_map(["..."])
        assert segment_free(occ, (0.05, 0.05), (0.05, 0.05))

    def test_crossing_single_obstacle(self):
        occ = make_map([".#."])
        assert not segment_free(occ, (0.05, 0.05), (0.25, 0.05))

    def test_free_corridor(self):
        occ = make_map(["...."])
        assert segment_free(occ, (0.05, 0.05), (0.35, 0.05))

    def test_symmetry(self, rng):
        occ = make_map(["..#.", ".#..", "....", "..?."])
        for _ in range(200):
            a = rng.random(2) * 0.4
            b = rng.random(2) * 0.4
            assert segment_free(occ, a, b) == segment_free(occ, b, a)

    def test_free_segment_implies_free_endpoints(self, rng):
        occ = make_map(["..#.", ".#..", "....", "..?."])
        for _ in range(200):
            a = rng.random(2) * 0.4
            b = rng.random(2) * 0.4
            if segment_free(occ, a, b):
                assert is_free(occ, a) and is_free(occ, b)

    def test_blocked_segment_has_witness(self, rng):
        occ = make_map(["..#.", ".#..", "....", "..?."])
        found = 0
        for _ in range(300):
            a = rng.random(2) * 0.4
            b = rng.random(2) * 0.4
            if not segment_free(occ, a, b):
                witness = segment_witness(occ, a, b)
                assert witness is not None
                assert not is_free(occ, witness)
                found += 1
        assert found > 0


class TestSampleFree:
    def test_count_zero(self, open_map, rng):
        assert sample_free(open_map, 0, rng).shape == (0, 2)

    def test_all_samples_free_and_reproducible(self, open_map):
        a = sample_free(open_map, 100, np.random.default_rng(9))
        b = sample_free(open_map, 100, np.random.default_rng(9))
        assert (a == b).all()
        assert all(is_free(open_map, p) for p in a)

    def test_sparse_free_space_errors(self):
        occ = make_map(["#" * 8] * 8)
        with pytest.raises(SamplingError):
            sample_free(occ, 1, np.random.default_rng(0))

    def test_uniform_over_free_cells(self, rng):
        # half the map is obstacle; occupancy over free cells should be uniform
        occ = make_map(["....####"] * 8, resolution=0.1)
        pts = sample_free(occ, 4000, rng)
        counts = np.zeros((8, 4))
        for x, y in pts:
            counts[int(y / 0.1), int(x / 0.1)] += 1
        assert (pts[:, 0] < 0.4).all()
        _, p = chisquare(counts.ravel())
        assert p > 0.01
