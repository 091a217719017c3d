import math

import numpy as np
import pytest

from planarpush.geometry import Pose2D, box, disk
from planarpush.perception import (IMAGE_SIZE, WINDOW_SIZE, BODY_HEIGHTS, MAX_HEIGHT,
                                   OccupancyGrid, egocentric_window, inflate, load_pgm,
                                   masked_depth, occupancy_from_depth,
                                   occupancy_from_world, render_depth, save_pgm)
from planarpush.world import (BodyState, Bounds, WorldState, ROLE_EE, ROLE_OBSTACLE,
                              ROLE_PUSHEE)

from conftest import random_grid
from oracles import contains_points, inflate_brute


def _world(bodies, bounds=Bounds(0, 0, 1, 1)):
    return WorldState(bodies=bodies, bounds=bounds, goal=Pose2D(0.9, 0.9, 0))


def _minimal_world(obstacles=(), pushee_pose=Pose2D(0.5, 0.5, 0.0),
                   ee_pose=Pose2D(0.3, 0.3, 0.0)):
    bodies = [BodyState(pushee_pose, box(0.025, 0.025), ROLE_PUSHEE),
              BodyState(ee_pose, disk(0.01), ROLE_EE)]
    bodies += [BodyState(p, s, ROLE_OBSTACLE) for p, s in obstacles]
    return _world(bodies)


class TestRenderDepth:
    def test_resolution_invariant(self):
        d = render_depth(_minimal_world())
        assert d.resolution == pytest.approx(1.0 / IMAGE_SIZE)
        assert d.values.shape == (IMAGE_SIZE, IMAGE_SIZE)

    def test_empty_world_renders_nothing(self):
        w = _world([BodyState(Pose2D(2.0, 2.0, 0), disk(0.01), ROLE_PUSHEE),
                    BodyState(Pose2D(2.2, 2.0, 0), disk(0.01), ROLE_EE)])
        assert np.count_nonzero(render_depth(w).values) == 0

    def test_box_pixel_count_matches_area(self):
        w = _minimal_world(obstacles=[(Pose2D(0.5003, 0.5007, 0.0), box(0.025, 0.025))],
                           pushee_pose=Pose2D(0.15, 0.15, 0.0))
        d = render_depth(w)
        res = d.resolution
        count = np.count_nonzero(d.values == BODY_HEIGHTS[ROLE_OBSTACLE])
        expected = (0.05 / res) ** 2
        perimeter = 4 * 0.05 / res
        assert abs(count - expected) <= 2 * perimeter

    def test_integer_pixel_shift(self):
        res = 1.0 / IMAGE_SIZE
        w1 = _minimal_world(obstacles=[(Pose2D(0.3001, 0.4002, 0.3), box(0.03, 0.02))],
                            pushee_pose=Pose2D(0.8, 0.8, 0.0), ee_pose=Pose2D(0.9, 0.9, 0))
        w2 = _minimal_world(obstacles=[(Pose2D(0.3001 + 5 * res, 0.4002 + 3 * res, 0.3),
                                        box(0.03, 0.02))],
                            pushee_pose=Pose2D(0.8, 0.8, 0.0), ee_pose=Pose2D(0.9, 0.9, 0))
        d1 = render_depth(w1).values
        d2 = render_depth(w2).values
        assert np.array_equal(d1[50:180, 50:180], d2[53:183, 55:185])

    def test_heights_by_role(self):
        w = _minimal_world(obstacles=[(Pose2D(0.7, 0.7, 0.0), disk(0.05))])
        d = render_depth(w)
        r, c = int(0.5 / d.resolution), int(0.5 / d.resolution)
        assert d.values[r, c] == BODY_HEIGHTS[ROLE_PUSHEE]
        r, c = int(0.7 / d.resolution), int(0.7 / d.resolution)
        assert d.values[r, c] == BODY_HEIGHTS[ROLE_OBSTACLE]


class TestOccupancy:
    def test_only_own_bodies_gives_free_grid(self):
        w = _minimal_world()
        occ = occupancy_from_world(w)
        assert not occ.cells.any()

    def test_single_obstacle_footprint(self):
        w = _minimal_world(obstacles=[(Pose2D(0.7, 0.6, 0.2), box(0.04, 0.02))])
        d = render_depth(w)
        occ = occupancy_from_depth(d, w.pushee, w.ee)
        assert np.array_equal(occ.cells, d.values == BODY_HEIGHTS[ROLE_OBSTACLE])

    def test_matches_pointwise_geometry_oracle(self):
        w = _minimal_world(obstacles=[(Pose2D(0.62, 0.41, 0.7), box(0.05, 0.02)),
                                      (Pose2D(0.3, 0.7, 0.0), disk(0.04))])
        occ = occupancy_from_world(w)
        res = occ.resolution
        xs = occ.origin[0] + (np.arange(IMAGE_SIZE) + 0.5) * res
        ys = occ.origin[1] + (np.arange(IMAGE_SIZE) + 0.5) * res
        gx, gy = np.meshgrid(xs, ys)
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        expect = np.zeros(len(pts), dtype=bool)
        for o in w.obstacles:
            expect |= contains_points(o.shape, o.pose, pts)
        for own in (w.pushee, w.ee):
            expect &= ~contains_points(own.shape, own.pose, pts)
        assert np.array_equal(occ.cells.ravel(), expect)


class TestInflate:
    def test_zero_radius_is_identity(self):
        rng = np.random.default_rng(0)
        cells = random_grid(rng, 32, 0.2)
        g = OccupancyGrid(cells=cells, resolution=1.0, origin=(0, 0))
        assert np.array_equal(inflate(g, 0.0).cells, cells)

    def test_single_cell_disk(self):
        cells = np.zeros((16, 16), dtype=bool)
        cells[8, 8] = True
        g = OccupancyGrid(cells=cells, resolution=1.0, origin=(0, 0))
        out = inflate(g, 2.0).cells
        ii, jj = np.indices(cells.shape)
        assert np.array_equal(out, (ii - 8) ** 2 + (jj - 8) ** 2 <= 4.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        cells = random_grid(rng, 32, rng.uniform(0.05, 0.3))
        radius_px = rng.uniform(0.0, 5.0)
        g = OccupancyGrid(cells=cells, resolution=1.0, origin=(0, 0))
        assert np.array_equal(inflate(g, radius_px).cells, inflate_brute(cells, radius_px))

    def test_monotone_in_radius(self):
        rng = np.random.default_rng(4)
        cells = random_grid(rng, 40, 0.1)
        g = OccupancyGrid(cells=cells, resolution=0.01, origin=(0, 0))
        prev = inflate(g, 0.0).cells
        for r in (0.01, 0.02, 0.04, 0.08):
            cur = inflate(g, r).cells
            assert (prev & ~cur).sum() == 0  # never shrinks
            prev = cur


class TestEgocentricWindow:
    def test_no_obstacles_all_background(self):
        w = _minimal_world()
        win = egocentric_window(render_depth(w), w.pushee, w.ee)
        assert win.values.shape == (WINDOW_SIZE, WINDOW_SIZE)
        assert np.all(win.values == 0.0)

    def test_obstacle_ahead_lands_on_plus_x(self):
        # pushee heading 30 degrees; obstacle 0.1 m ahead along the heading
        th = math.radians(30)
        ppose = Pose2D(0.5, 0.5, th)
        opos = Pose2D(0.5 + 0.1 * math.cos(th), 0.5 + 0.1 * math.sin(th), 0.0)
        w = _minimal_world(obstacles=[(opos, disk(0.02))], pushee_pose=ppose,
                           ee_pose=Pose2D(0.2, 0.2, 0.0))
        d = render_depth(w)
        win = egocentric_window(d, w.pushee, w.ee)
        rows, cols = np.nonzero(win.values)
        assert len(rows) > 0
        center = (WINDOW_SIZE - 1) / 2.0
        # blob centroid on +x axis of the window at 0.1/res pixels
        assert np.mean(rows) == pytest.approx(center, abs=1.0)
        assert np.mean(cols) == pytest.approx(center + 0.1 / d.resolution, abs=1.0)

    def test_rotation_equivariance_90_degrees(self):
        # rotating the world and pushee by 90 deg about a lattice-aligned
        # pushee center leaves the window unchanged (max abs diff <= 0.05)
        c = (0.5, 0.5)
        obst = (Pose2D(0.6103, 0.5702, 0.31), box(0.031, 0.0205))
        w1 = _minimal_world(obstacles=[obst], pushee_pose=Pose2D(c[0], c[1], 0.0),
                            ee_pose=Pose2D(0.1, 0.1, 0))
        win1 = egocentric_window(render_depth(w1), w1.pushee, w1.ee)

        rot = math.pi / 2
        dx, dy = obst[0].x - c[0], obst[0].y - c[1]
        opose2 = Pose2D(c[0] - dy, c[1] + dx, obst[0].theta + rot)
        w2 = _minimal_world(obstacles=[(opose2, obst[1])],
                            pushee_pose=Pose2D(c[0], c[1], rot),
                            ee_pose=Pose2D(0.1, 0.1, 0))
        win2 = egocentric_window(render_depth(w2), w2.pushee, w2.ee)
        assert np.max(np.abs(win1.values - win2.values)) <= 0.05

    def test_pushee_and_ee_masked(self):
        # EE parked right next to the pushee must not appear in the window
        w = _minimal_world(ee_pose=Pose2D(0.54, 0.5, 0.0))
        win = egocentric_window(render_depth(w), w.pushee, w.ee)
        assert np.all(win.values == 0.0)

    def test_masking_blocks_ee_influence_on_latent(self):
        from planarpush.encoding import builtin_encoder, encode_window

        w1 = _minimal_world(ee_pose=Pose2D(0.55, 0.5, 0.0))
        w2 = _minimal_world(ee_pose=Pose2D(0.45, 0.42, 1.0))
        enc = builtin_encoder()
        l1 = encode_window(egocentric_window(render_depth(w1), w1.pushee, w1.ee), enc)
        l2 = encode_window(egocentric_window(render_depth(w2), w2.pushee, w2.ee), enc)
        assert np.array_equal(l1, l2)

    def test_values_normalized(self):
        w = _minimal_world(obstacles=[(Pose2D(0.55, 0.5, 0.0), box(0.02, 0.02))])
        win = egocentric_window(render_depth(w), w.pushee, w.ee)
        assert win.values.max() == pytest.approx(BODY_HEIGHTS[ROLE_OBSTACLE] / MAX_HEIGHT)
        assert win.values.min() >= 0.0


class TestMaskedDepth:
    def test_mask_removes_own_pixels(self):
        w = _minimal_world()
        d = render_depth(w)
        m = masked_depth(d, w.pushee, w.ee)
        assert np.count_nonzero(d.values) > 0
        assert np.count_nonzero(m) == 0


class TestPgm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        cells = random_grid(rng, 24, 0.25)
        g = OccupancyGrid(cells=cells, resolution=0.0125, origin=(0.5, 0.25))
        p = tmp_path / "g.pgm"
        save_pgm(g, p)
        loaded = load_pgm(p)
        assert np.array_equal(loaded.cells, cells)
        assert loaded.resolution == 0.0125
        assert loaded.origin == (0.5, 0.25)
