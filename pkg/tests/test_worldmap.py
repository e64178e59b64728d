import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collabsearch.worldmap import (MapFormatError, OccupancyGrid, Pose,
                                   grid_from_rows, line_of_sight, load_map,
                                   visible_cells)
from oracles import los_oracle, random_grid, visible_cells_oracle_fast


def write_map(tmp_path, data, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


OPEN3 = {"width": 3, "height": 3, "resolution": 1.0, "origin": [0.0, 0.0],
         "occupancy": ["...", "...", "..."]}


class TestLoadMap:
    def test_all_free(self, tmp_path):
        g = load_map(write_map(tmp_path, OPEN3))
        assert g.n_free == 9

    def test_blocked_center(self, tmp_path):
        data = dict(OPEN3, occupancy=["...", ".#.", "..."])
        g = load_map(write_map(tmp_path, data))
        assert g.n_free == 8
        assert g.free_id_at(1.5, 1.5) == -1

    def test_missing_resolution(self, tmp_path):
        data = {k: v for k, v in OPEN3.items() if k != "resolution"}
        with pytest.raises(MapFormatError, match="resolution"):
            load_map(write_map(tmp_path, data))

    def test_bitmap_rows(self, tmp_path):
        data = dict(OPEN3, occupancy=[[0, 0, 0], [0, 1, 0], [0, 0, 0]])
        g = load_map(write_map(tmp_path, data))
        assert g.n_free == 8

    def test_zero_free_cells(self, tmp_path):
        data = dict(OPEN3, occupancy=["###", "###", "###"])
        with pytest.raises(MapFormatError, match="free"):
            load_map(write_map(tmp_path, data))

    def test_row_length_mismatch(self, tmp_path):
        data = dict(OPEN3, occupancy=["...", "..", "..."])
        with pytest.raises(MapFormatError, match="row 1"):
            load_map(write_map(tmp_path, data))

    def test_row_major_enumeration(self):
        g = grid_from_rows(["..", ".."])
        assert g.free_id_at(0.5, 0.5) == 0
        assert g.free_id_at(1.5, 0.5) == 1
        assert g.free_id_at(0.5, 1.5) == 2


class TestPose:
    def test_heading_normalized(self):
        assert Pose(0, 0, 3 * math.pi).heading == pytest.approx(-math.pi)
        assert Pose(0, 0, math.pi).heading == pytest.approx(-math.pi)
        assert Pose(0, 0, 0.5).heading == 0.5


class TestLineOfSight:
    def test_identity(self):
        g = grid_from_rows(["..."])
        p = Pose(0.5, 0.5)
        assert line_of_sight(g, p, p)

    def test_open_corridor(self):
        g = grid_from_rows(["....."])
        assert line_of_sight(g, Pose(0.5, 0.5), Pose(4.5, 0.5))

    def test_wall_blocks_row(self):
        g = grid_from_rows(["....."] * 2 + ["..#.."] + ["....."] * 2)
        a, b = Pose(0.5, 2.5), Pose(4.5, 2.5)
        assert not line_of_sight(g, a, b)
        assert los_oracle(g, a, b) is False  # oracle agrees

    def test_out_of_bounds_is_blocked(self):
        g = grid_from_rows(["..."])
        assert not line_of_sight(g, Pose(-1.0, 0.5), Pose(0.5, 0.5))
        assert not line_of_sight(g, Pose(0.5, 0.5), Pose(9.0, 0.5))

    def test_symmetric(self):
        g = grid_from_rows(["....", ".#..", "....", "..#."])
        rng = np.random.default_rng(3)
        for _ in range(200):
            a = Pose(*rng.uniform(0, 4, 2))
            b = Pose(*rng.uniform(0, 4, 2))
            assert line_of_sight(g, a, b) == line_of_sight(g, b, a)

    def test_corner_graze_not_blocking(self):
        # diagonal through the corner point shared by the two walls
        g = grid_from_rows(["..#", "...", "#.."])
        assert line_of_sight(g, Pose(0.5, 0.5), Pose(2.5, 2.5))


class TestVisibleCells:
    def test_radius_zero(self):
        g = grid_from_rows(["...", "...", "..."])
        ids = visible_cells(g, Pose(1.5, 1.5), 0.0)
        assert list(ids) == [g.free_id_at(1.5, 1.5)]

    def test_radius_covers_open_map(self):
        g = grid_from_rows(["....."] * 5)
        ids = visible_cells(g, Pose(2.5, 2.5), 100.0)
        assert len(ids) == 25

    def test_blocked_pose_sees_nothing(self):
        g = grid_from_rows(["...", ".#.", "..."])
        assert visible_cells(g, Pose(1.5, 1.5), 10.0).size == 0

    def test_center_wall_from_corner_matches_oracle(self):
        g = grid_from_rows([".....", ".....", "..#..", ".....", "....."])
        p = Pose(0.5, 0.5)
        r = math.hypot(5, 5)
        assert set(visible_cells(g, p, r).tolist()) == \
            visible_cells_oracle_fast(g, p, r)

    def test_monotone_in_radius(self):
        g = grid_from_rows(["......", "..##..", "......"])
        p = Pose(0.5, 0.5)
        prev = set()
        for r in (0.5, 1.5, 2.5, 4.0, 8.0):
            cur = set(visible_cells(g, p, r).tolist())
            assert prev <= cur
            prev = cur

    def test_exact_radius_boundary_included(self):
        g = grid_from_rows(["....."])
        # center-to-center distance from (0.5,0.5) to (4.5,0.5) is exactly 4
        ids = visible_cells(g, Pose(0.5, 0.5), 4.0)
        assert g.free_id_at(4.5, 0.5) in ids


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(12))
    def test_exhaustive_pairs_random_maps(self, seed):
        rng = np.random.default_rng(seed)
        g = random_grid(rng, max_side=12, density=0.25)
        r = math.hypot(g.width, g.height)
        for cid in range(g.n_free):
            p = g.cell_center(cid)
            got = set(visible_cells(g, p, r).tolist())
            want = visible_cells_oracle_fast(g, p, r)
            assert got == want, f"cell {cid} on seed {seed}"

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_symmetry_property(self, seed):
        rng = np.random.default_rng(seed)
        g = random_grid(rng, max_side=9, density=0.3)
        r = math.hypot(g.width, g.height)
        vis = [set(visible_cells(g, g.cell_center(i), r).tolist())
               for i in range(g.n_free)]
        for a in range(g.n_free):
            for b in vis[a]:
                assert a in vis[b]
