import math

import numpy as np
import pytest

from raydrive import kernels, trackmap
from raydrive.trackmap import (BadNumber, Checkpoint, CheckpointOccupied,
                               DimensionMismatch, InvalidCell, InvalidDimensions,
                               InvalidRadii, MissingHeaderField, OccupancyGrid, Pose,
                               SpawnOccupied, TrackSpec, gen_corridor_track,
                               gen_ring_track, is_occupied, parse_trk, ray_cast,
                               serialize_trk)

from oracles import brute_ray_march

MINIMAL_3X3 = "TRK1\nsize 3 3\nspawn 1.5 1.5 0\ngrid\n...\n...\n...\n"


def open_grid(width, height):
    return OccupancyGrid(np.zeros((height, width), dtype=bool))


class TestParse:
    def test_minimal_document(self):
        spec = parse_trk(MINIMAL_3X3)
        assert spec.grid.width == 3 and spec.grid.height == 3
        assert int(spec.grid.cells.sum()) == 0
        assert spec.spawn == Pose(1.5, 1.5, 0.0)
        assert spec.checkpoints == ()

    def test_spawn_occupied(self):
        doc = MINIMAL_3X3.replace("...\n...\n...", "...\n.#.\n...")
        with pytest.raises(SpawnOccupied):
            parse_trk(doc)

    def test_checkpoint_occupied(self):
        doc = ("TRK1\nsize 3 3\nspawn 0.5 0.5 0\ncheckpoint 1.5 1.5 1.0\n"
               "grid\n...\n.#.\n...\n")
        with pytest.raises(CheckpointOccupied):
            parse_trk(doc)

    def test_checkpoints_ordered_by_line(self):
        doc = ("TRK1\nsize 3 3\nspawn 0.5 0.5 0\n"
               "checkpoint 1.5 1.5 1.0\ncheckpoint 2.5 2.5 0.5\n"
               "grid\n...\n...\n...\n")
        spec = parse_trk(doc)
        assert [cp.index for cp in spec.checkpoints] == [0, 1]
        assert spec.checkpoints[1] == Checkpoint(2.5, 2.5, 0.5, 1)

    def test_missing_magic(self):
        with pytest.raises(MissingHeaderField):
            parse_trk("size 3 3\nspawn 1.5 1.5 0\ngrid\n...\n...\n...\n")

    def test_missing_grid_line(self):
        with pytest.raises(MissingHeaderField):
            parse_trk("TRK1\nsize 3 3\nspawn 1.5 1.5 0\n...\n...\n...\n")

    def test_ragged_row(self):
        with pytest.raises(DimensionMismatch):
            parse_trk("TRK1\nsize 3 3\nspawn 1.5 1.5 0\ngrid\n...\n..\n...\n")

    def test_wrong_row_count(self):
        with pytest.raises(DimensionMismatch):
            parse_trk("TRK1\nsize 3 3\nspawn 1.5 1.5 0\ngrid\n...\n...\n")

    def test_invalid_cell_char(self):
        with pytest.raises(InvalidCell):
            parse_trk("TRK1\nsize 3 3\nspawn 1.5 1.5 0\ngrid\n...\n.x.\n...\n")

    def test_bad_number(self):
        with pytest.raises(BadNumber):
            parse_trk("TRK1\nsize 3 3\nspawn one 1.5 0\ngrid\n...\n...\n...\n")

    def test_non_finite_spawn_rejected(self):
        with pytest.raises(BadNumber):
            parse_trk("TRK1\nsize 3 3\nspawn nan 1.5 0\ngrid\n...\n...\n...\n")

    def test_zero_checkpoint_radius_rejected(self):
        doc = ("TRK1\nsize 3 3\nspawn 0.5 0.5 0\ncheckpoint 1.5 1.5 0\n"
               "grid\n...\n...\n...\n")
        with pytest.raises(BadNumber):
            parse_trk(doc)

    def test_missing_trailing_newline_tolerated(self):
        spec = parse_trk(MINIMAL_3X3.rstrip("\n"))
        assert spec.grid.width == 3

    def test_generator_roundtrip(self):
        ring = gen_ring_track()
        assert parse_trk(serialize_trk(ring)) == ring


class TestSerialize:
    def test_one_cell_document(self):
        spec = TrackSpec("tiny", open_grid(1, 1), Pose(0.5, 0.5, 90.0))
        lines = serialize_trk(spec).split("\n")
        assert lines[:-1] == ["TRK1", "size 1 1", "spawn 0.5 0.5 90.0", "grid", "."]
        assert lines[-1] == ""  # trailing LF

    def test_checkpoint_lines_in_index_order(self):
        spec = TrackSpec("two", open_grid(4, 4), Pose(0.5, 0.5, 0.0),
                         (Checkpoint(1.5, 1.5, 1.0, 0), Checkpoint(2.5, 2.5, 0.5, 1)))
        text = serialize_trk(spec)
        cp_lines = [l for l in text.split("\n") if l.startswith("checkpoint")]
        assert cp_lines == ["checkpoint 1.5 1.5 1.0", "checkpoint 2.5 2.5 0.5"]

    def test_ring_grid_section_shape(self):
        text = serialize_trk(gen_ring_track())
        lines = text.split("\n")
        grid_at = lines.index("grid")
        rows = lines[grid_at + 1:-1]
        assert len(rows) == 100
        assert all(len(row) == 100 for row in rows)

    def test_roundtrip_random_specs(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            w, h = int(rng.integers(1, 20)), int(rng.integers(1, 20))
            cells = rng.random((h, w)) < 0.3
            sx, sy = int(rng.integers(w)), int(rng.integers(h))
            cells[sy, sx] = False
            cps = []
            for i in range(int(rng.integers(0, 4))):
                cx, cy = int(rng.integers(w)), int(rng.integers(h))
                cells[cy, cx] = False
                cps.append(Checkpoint(cx + rng.random(), cy + rng.random(),
                                      float(rng.random() * 5 + 1e-3), i))
            spec = TrackSpec("rand", OccupancyGrid(cells),
                             Pose(sx + rng.random(), sy + rng.random(),
                                  float(rng.normal() * 720)), tuple(cps))
            assert parse_trk(serialize_trk(spec)) == spec


class TestIsOccupied:
    def test_open_cell(self):
        assert is_occupied(open_grid(10, 10), 5.0, 5.0) is False

    def test_out_of_bounds(self):
        g = open_grid(10, 10)
        assert is_occupied(g, -0.1, 5.0) is True
        assert is_occupied(g, 5.0, 10.0) is True

    def test_floor_mapping(self):
        cells = np.zeros((10, 10), dtype=bool)
        cells[4, 3] = True  # cell (x=3, y=4)
        g = OccupancyGrid(cells)
        assert is_occupied(g, 3.9, 4.9) is True
        assert is_occupied(g, 3.0, 4.0) is True
        assert is_occupied(g, 2.999, 4.5) is False


class TestRayCast:
    def test_wall_column_30_units_ahead(self):
        cells = np.zeros((100, 100), dtype=bool)
        cells[:, 80] = True
        g = OccupancyGrid(cells)
        assert brute_ray_march(cells, 50.5, 50.5, 0.0) == 30
        assert ray_cast(g, (50.5, 50.5), 0.0) == 30

    def test_open_plane_caps_at_max_len(self):
        g = open_grid(2000, 2000)
        for angle in (0.0, 37.0, 90.0, 201.5):
            assert ray_cast(g, (1000.0, 1000.0), angle) == 1000

    def test_occupied_origin_returns_zero(self):
        cells = np.ones((3, 3), dtype=bool)
        assert ray_cast(OccupancyGrid(cells), (1.5, 1.5), 0.0) == 0

    def test_bordered_grid_always_terminates_below_cap(self):
        cells = np.zeros((30, 30), dtype=bool)
        cells[0, :] = cells[-1, :] = True
        cells[:, 0] = cells[:, -1] = True
        g = OccupancyGrid(cells)
        rng = np.random.default_rng(3)
        for _ in range(50):
            r = ray_cast(g, (float(rng.uniform(1, 29)), float(rng.uniform(1, 29))),
                         float(rng.uniform(0, 360)))
            assert 1 <= r < 1000

    def test_oracle_equivalence_random_grids(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            w, h = int(rng.integers(2, 65)), int(rng.integers(2, 65))
            cells = rng.random((h, w)) < rng.uniform(0.0, 0.4)
            g = OccupancyGrid(cells)
            ox = float(rng.uniform(-2, w + 2))
            oy = float(rng.uniform(-2, h + 2))
            angle = float(rng.uniform(-360, 720))
            expected = brute_ray_march(cells, ox, oy, angle, max_len=200)
            assert ray_cast(g, (ox, oy), angle, max_len=200) == expected

    def test_monotone_in_obstacles(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            cells = rng.random((40, 40)) < 0.1
            ox, oy = float(rng.uniform(0, 40)), float(rng.uniform(0, 40))
            angle = float(rng.uniform(0, 360))
            before = ray_cast(OccupancyGrid(cells), (ox, oy), angle)
            more = cells.copy()
            more[rng.integers(40), rng.integers(40)] = True
            after = ray_cast(OccupancyGrid(more), (ox, oy), angle)
            assert after <= before

    def test_step_parameter_scales_march(self):
        cells = np.zeros((100, 100), dtype=bool)
        cells[:, 80] = True
        g = OccupancyGrid(cells)
        # 50.5 + 59 * 0.5 = 80.0 lands exactly on the wall column
        assert ray_cast(g, (50.5, 50.5), 0.0, max_len=100, step=0.5) == 59
        assert brute_ray_march(cells, 50.5, 50.5, 0.0, max_len=100, step=0.5) == 59


class TestBackends:
    def test_backends_bit_identical(self):
        impls = kernels.implementations()
        if len(impls) < 2:
            pytest.skip("numba backend unavailable")
        rng = np.random.default_rng(5)
        for _ in range(300):
            w, h = int(rng.integers(2, 50)), int(rng.integers(2, 50))
            cells = rng.random((h, w)) < rng.uniform(0.0, 0.5)
            ox = float(rng.uniform(-1, w + 1))
            oy = float(rng.uniform(-1, h + 1))
            angle = math.radians(float(rng.uniform(0, 360)))
            dx, dy = math.cos(angle), math.sin(angle)
            results = {name: impl["ray_march"](cells, ox, oy, dx, dy, 1.0, 300)
                       for name, impl in impls.items()}
            assert len(set(results.values())) == 1, results

    def test_any_occupied_backends_agree(self):
        impls = kernels.implementations()
        rng = np.random.default_rng(9)
        for _ in range(200):
            cells = rng.random((20, 20)) < 0.3
            xs = rng.uniform(-2, 22, size=9)
            ys = rng.uniform(-2, 22, size=9)
            results = {name: impl["any_occupied"](cells, xs, ys)
                       for name, impl in impls.items()}
            assert len(set(bool(v) for v in results.values())) == 1


class TestGenerators:
    def test_ring_spawn_and_heading(self):
        ring = gen_ring_track()
        assert ring.spawn == Pose(82.5, 50.0, 90.0)
        assert not ring.grid.is_occupied(ring.spawn.x, ring.spawn.y)

    def test_ring_checkpoint_layout(self):
        ring = gen_ring_track()
        assert len(ring.checkpoints) == 4
        expected = [(82.5, 50.0), (50.0, 82.5), (17.5, 50.0), (50.0, 17.5)]
        for cp, (ex, ey) in zip(ring.checkpoints, expected):
            assert cp.x == pytest.approx(ex, abs=1e-9)
            assert cp.y == pytest.approx(ey, abs=1e-9)
            assert cp.radius == 7.5
            assert not ring.grid.is_occupied(cp.x, cp.y)

    def test_ring_drivable_band(self):
        ring = gen_ring_track()
        ys, xs = np.nonzero(~ring.grid.cells)
        d = np.hypot(xs + 0.5 - 50.0, ys + 0.5 - 50.0)
        assert d.min() >= 25.0 and d.max() <= 40.0

    def test_ring_invalid_radii(self):
        with pytest.raises(InvalidRadii):
            gen_ring_track(100, 100, outer_radius=25, inner_radius=40)
        with pytest.raises(InvalidRadii):
            gen_ring_track(100, 100, outer_radius=60, inner_radius=25)

    def test_corridor_forward_ray_matches_oracle(self):
        corr = gen_corridor_track(200, 21)
        expected = brute_ray_march(corr.grid.cells, corr.spawn.x, corr.spawn.y, 0.0)
        assert expected in (199, 200)  # wall distance, spec'd to one unit
        assert ray_cast(corr.grid, (corr.spawn.x, corr.spawn.y), 0.0) == expected

    def test_corridor_side_ray_matches_oracle(self):
        corr = gen_corridor_track(200, 21)
        expected = brute_ray_march(corr.grid.cells, corr.spawn.x, corr.spawn.y, 90.0)
        assert expected in (10, 11)
        assert ray_cast(corr.grid, (corr.spawn.x, corr.spawn.y), 90.0) == expected

    def test_corridor_invalid_dimensions(self):
        with pytest.raises(InvalidDimensions):
            gen_corridor_track(200, 0)
        with pytest.raises(InvalidDimensions):
            gen_corridor_track(2, 21)


class TestGridType:
    def test_cells_immutable(self):
        g = open_grid(3, 3)
        with pytest.raises(ValueError):
            g.cells[0, 0] = True

    def test_equality_by_content(self):
        a = OccupancyGrid(np.zeros((2, 3), dtype=bool))
        b = OccupancyGrid(np.zeros((2, 3), dtype=bool))
        c = OccupancyGrid(np.zeros((3, 2), dtype=bool))
        assert a == b and a != c

    def test_name_excluded_from_spec_equality(self):
        a = TrackSpec("one", open_grid(2, 2), Pose(0.5, 0.5, 0.0))
        b = TrackSpec("two", open_grid(2, 2), Pose(0.5, 0.5, 0.0))
        assert a == b

    def test_normalized_theta_is_view(self):
        p = Pose(0.0, 0.0, 725.0)
        assert p.normalized_theta() == pytest.approx(5.0)
        assert p.theta == 725.0
