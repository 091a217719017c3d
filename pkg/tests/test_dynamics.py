import math

import numpy as np
import pytest

from planarpush.dynamics import (CONTACT_EPSILON, DTHETA_MAX, DXY_MAX, PENETRATION_TOL,
                                 ActionDelta, LimitSurfaceParams, check_out_of_bounds,
                                 clamp_action, detect_contacts, resolve_push_contact,
                                 step_ee)
from planarpush.errors import DegenerateContact
from planarpush.geometry import Pose2D, box, disk, separation
from planarpush.world import BodyState, Bounds, WorldState, ROLE_EE, ROLE_OBSTACLE, ROLE_PUSHEE

from oracles import sampled_separation

PARAMS = LimitSurfaceParams()


def _world(pushee_pose, pushee_shape, ee_pose, obstacles=()):
    bodies = [BodyState(pushee_pose, pushee_shape, ROLE_PUSHEE),
              BodyState(ee_pose, disk(PARAMS.ee_radius), ROLE_EE)]
    bodies += [BodyState(p, s, ROLE_OBSTACLE) for p, s in obstacles]
    return WorldState(bodies=bodies, bounds=Bounds(0, 0, 1, 1),
                      goal=Pose2D(0.9, 0.5, 0.0))


def _max_penetration(world):
    """Worst penetration over the pairs the dynamics resolves.

    EE-obstacle overlap is excluded: the position-controlled EE is allowed
    to intersect obstacles (counted as a collision, never resolved).
    """
    pushee = world.pushee
    ee = world.ee
    worst = -separation(ee.shape, ee.pose, pushee.shape, pushee.pose)
    for obs in world.obstacles:
        worst = max(worst, -separation(pushee.shape, pushee.pose, obs.shape, obs.pose))
    return max(worst, 0.0)


class TestClamp:
    def test_inside_caps_untouched(self):
        a = ActionDelta(0.005, -0.003, 0.05)
        assert clamp_action(a) == a

    def test_clamps_each_component(self):
        a = clamp_action(ActionDelta(0.5, -0.5, 3.0))
        assert a == ActionDelta(DXY_MAX, -DXY_MAX, DTHETA_MAX)


class TestResolvePushContact:
    def test_center_push_translates(self):
        pushee = BodyState(Pose2D(0, 0, 0), disk(0.05), ROLE_PUSHEE)
        inc = resolve_push_contact(pushee, np.array([-0.05, 0.0]), np.array([1.0, 0.0]),
                                   np.array([0.004, 0.0]), PARAMS)
        assert inc.x == pytest.approx(0.004)
        assert inc.y == 0.0
        assert inc.theta == 0.0

    def test_off_center_push_rotates_clockwise(self):
        # push along +x above the center: r x n < 0, object turns clockwise
        pushee = BodyState(Pose2D(0, 0, 0), box(0.04, 0.04), ROLE_PUSHEE)
        inc = resolve_push_contact(pushee, np.array([-0.04, 0.02]), np.array([1.0, 0.0]),
                                   np.array([0.004, 0.0]), PARAMS)
        assert inc.theta < 0.0
        assert inc.x > 0.0

    def test_tangent_displacement_is_noop(self):
        pushee = BodyState(Pose2D(0, 0, 0), disk(0.05), ROLE_PUSHEE)
        inc = resolve_push_contact(pushee, np.array([-0.05, 0.0]), np.array([1.0, 0.0]),
                                   np.array([0.0, 0.01]), PARAMS)
        assert (inc.x, inc.y, inc.theta) == (0.0, 0.0, 0.0)

    def test_zero_normal_rejected(self):
        pushee = BodyState(Pose2D(0, 0, 0), disk(0.05), ROLE_PUSHEE)
        with pytest.raises(DegenerateContact):
            resolve_push_contact(pushee, np.array([-0.05, 0.0]), np.array([0.0, 0.0]),
                                 np.array([0.01, 0.0]), PARAMS)

    def test_contact_point_advances_by_normal_component(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            pushee = BodyState(Pose2D(0, 0, 0), box(0.04, 0.03), ROLE_PUSHEE)
            ang = rng.uniform(-math.pi, math.pi)
            n = np.array([math.cos(ang), math.sin(ang)])
            cp = rng.uniform(-0.04, 0.04, size=2)
            d = rng.uniform(-0.005, 0.005, size=2)
            inc = resolve_push_contact(pushee, cp, n, d, PARAMS)
            d_n = float(d @ n)
            v = np.array([inc.x, inc.y])
            omega = inc.theta
            r = cp - np.array([0.0, 0.0])
            cp_vel = v + omega * np.array([-r[1], r[0]])
            assert float(cp_vel @ n) == pytest.approx(max(d_n, 0.0), abs=1e-12)


class TestStepEE:
    def test_no_contact_no_motion(self):
        w = _world(Pose2D(0.5, 0.5, 0), disk(0.025), Pose2D(0.2, 0.2, 0))
        out = step_ee(w, ActionDelta(0.01, 0.0, 0.0), PARAMS)
        assert out.world.pushee.pose == w.pushee.pose
        assert not out.ee_object_contact
        assert out.world.ee.pose.x == pytest.approx(0.21)

    def test_center_line_disk_push_zero_rotation(self):
        w = _world(Pose2D(0.5, 0.5, 0.3), disk(0.025), Pose2D(0.46, 0.5, 0.0))
        world = w
        for _ in range(20):
            out = step_ee(world, ActionDelta(0.01, 0.0, 0.0), PARAMS)
            world = out.world
        p = world.pushee.pose
        assert p.theta == 0.3  # exact: zero moment arm throughout
        assert p.y == 0.5
        assert p.x > 0.5

    def test_zero_action_is_noop(self):
        w = _world(Pose2D(0.5, 0.5, 0.1), box(0.025, 0.025), Pose2D(0.42, 0.48, 0.7))
        out = step_ee(w, ActionDelta(0.0, 0.0, 0.0), PARAMS)
        assert out.world.pushee.pose == w.pushee.pose
        assert out.world.ee.pose == w.ee.pose

    def test_determinism_bitwise(self):
        w = _world(Pose2D(0.5, 0.5, 0.2), box(0.03, 0.02), Pose2D(0.455, 0.49, 0.0))
        a = ActionDelta(0.008, 0.002, 0.01)
        o1 = step_ee(w, a, PARAMS)
        o2 = step_ee(w, a, PARAMS)
        assert o1.world.pushee.pose == o2.world.pushee.pose
        assert o1.world.ee.pose == o2.world.ee.pose

    def test_obstacles_never_move(self):
        obst = (Pose2D(0.56, 0.5, 0.0), box(0.02, 0.1))
        w = _world(Pose2D(0.5, 0.5, 0.0), box(0.025, 0.025), Pose2D(0.462, 0.5, 0.0),
                   obstacles=[obst])
        world = w
        for _ in range(40):
            out = step_ee(world, ActionDelta(0.01, 0.0, 0.0), PARAMS)
            world = out.world
            assert world.obstacles[0].pose == obst[0]

    def test_penetration_bound_through_obstacle_push(self):
        obst = (Pose2D(0.56, 0.5, 0.0), box(0.02, 0.1))
        w = _world(Pose2D(0.5, 0.5, 0.0), box(0.025, 0.025), Pose2D(0.462, 0.5, 0.0),
                   obstacles=[obst])
        world = w
        for _ in range(60):
            out = step_ee(world, ActionDelta(0.01, 0.003, 0.0), PARAMS)
            world = out.world
            assert _max_penetration(world) <= PENETRATION_TOL

    def test_head_on_squeeze_stalls_ee(self):
        # object jammed between EE and wall: the EE must stop, not tunnel
        obst = (Pose2D(0.56, 0.5, 0.0), box(0.02, 0.1))
        w = _world(Pose2D(0.5, 0.5, 0.0), box(0.025, 0.025), Pose2D(0.462, 0.5, 0.0),
                   obstacles=[obst])
        world = w
        for _ in range(30):
            out = step_ee(world, ActionDelta(0.01, 0.0, 0.0), PARAMS)
            world = out.world
        # wall inner face at x=0.54, box half width 0.025: center <= 0.515
        assert world.pushee.pose.x == pytest.approx(0.515, abs=1e-3)
        assert world.ee.pose.x <= 0.515 - 0.025 + 1e-3
        assert _max_penetration(world) <= PENETRATION_TOL

    @pytest.mark.parametrize("shape,ee_y,dy", [
        (box(0.025, 0.025), 0.506, 0.0),
        (disk(0.025), 0.510, -0.001),
    ])
    def test_off_center_push_matches_fine_substeps(self, shape, ee_y, dy):
        # 100-step episode, default substepping vs a 100x finer reference
        start = _world(Pose2D(0.5, 0.5, 0.0), shape, Pose2D(0.462, ee_y, 0.0))
        action = ActionDelta(0.006, dy, 0.0)
        coarse = start
        fine = start
        for _ in range(100):
            coarse = step_ee(coarse, action, PARAMS).world
            fine = step_ee(fine, action, PARAMS, max_substep=1e-5).world
        pc, pf = coarse.pushee.pose, fine.pushee.pose
        assert math.hypot(pc.x - pf.x, pc.y - pf.y) <= 1e-3
        assert abs(pc.theta - pf.theta) <= 1e-2

    def test_substep_halving_converges(self):
        start = _world(Pose2D(0.5, 0.5, 0.0), box(0.025, 0.025), Pose2D(0.462, 0.509, 0.0))
        action = ActionDelta(0.007, 0.002, 0.0)
        a = start
        b = start
        for _ in range(100):
            a = step_ee(a, action, PARAMS, max_substep=0.5 * PARAMS.ee_radius).world
            b = step_ee(b, action, PARAMS, max_substep=0.25 * PARAMS.ee_radius).world
        pa, pb = a.pushee.pose, b.pushee.pose
        assert math.hypot(pa.x - pb.x, pa.y - pb.y) <= 1e-3

    def test_mirror_symmetry(self):
        # mirror about the line y = 0.5 inside the unit workspace
        def flip(p):
            return Pose2D(p.x, 1.0 - p.y, -p.theta)

        w1 = _world(Pose2D(0.5, 0.52, 0.2), box(0.03, 0.02), Pose2D(0.46, 0.54, 0.1),
                    obstacles=[(Pose2D(0.6, 0.56, 0.4), box(0.02, 0.05))])
        w2 = _world(flip(Pose2D(0.5, 0.52, 0.2)), box(0.03, 0.02),
                    flip(Pose2D(0.46, 0.54, 0.1)),
                    obstacles=[(flip(Pose2D(0.6, 0.56, 0.4)), box(0.02, 0.05))])
        a1 = ActionDelta(0.008, 0.004, 0.02)
        a2 = ActionDelta(0.008, -0.004, -0.02)
        s1, s2 = w1, w2
        for _ in range(50):
            s1 = step_ee(s1, a1, PARAMS).world
            s2 = step_ee(s2, a2, PARAMS).world
        p1, p2 = s1.pushee.pose, s2.pushee.pose
        assert p2.x == pytest.approx(p1.x, abs=1e-9)
        assert p2.y == pytest.approx(1.0 - p1.y, abs=1e-9)
        assert p2.theta == pytest.approx(-p1.theta, abs=1e-9)


class TestDetectContacts:
    def test_everything_far(self):
        w = _world(Pose2D(0.5, 0.5, 0), disk(0.025), Pose2D(0.1, 0.1, 0),
                   obstacles=[(Pose2D(0.9, 0.9, 0), disk(0.03))])
        rep = detect_contacts(w)
        assert not rep.ee_object and not rep.object_obstacle and not rep.ee_obstacle
        assert rep.min_separation > 0.1

    def test_tangent_counts_as_contact(self):
        # EE disk exactly touching the pushee box face
        w = _world(Pose2D(0.5, 0.5, 0.0), box(0.025, 0.025), Pose2D(0.465, 0.5, 0.0))
        rep = detect_contacts(w)
        assert rep.ee_object
        assert rep.min_separation == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(12))
    def test_flags_match_sampling_oracle(self, seed):
        rng = np.random.default_rng(200 + seed)
        shapes = [disk(0.03), box(0.03, 0.02)]
        pushee_shape = shapes[rng.integers(2)]
        obst_shape = shapes[rng.integers(2)]
        w = _world(Pose2D(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(-3, 3)),
                   pushee_shape,
                   Pose2D(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), 0.0),
                   obstacles=[(Pose2D(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                                      rng.uniform(-3, 3)), obst_shape)])
        rep = detect_contacts(w)
        pairs = [
            (w.ee, w.pushee, rep.ee_object),
            (w.pushee, w.obstacles[0], rep.object_obstacle),
            (w.ee, w.obstacles[0], rep.ee_obstacle),
        ]
        for a, b, flag in pairs:
            approx = sampled_separation(a.shape, a.pose, b.shape, b.pose, n=10_000)
            if abs(approx - CONTACT_EPSILON) < 5e-4:
                continue  # within sampling noise of the threshold
            assert flag == (approx <= CONTACT_EPSILON)


class TestOutOfBounds:
    def test_center_inside(self):
        w = _world(Pose2D(0.5, 0.5, 0), disk(0.025), Pose2D(0.2, 0.2, 0))
        assert not check_out_of_bounds(w)

    def test_center_outside(self):
        w = _world(Pose2D(1.01, 0.5, 0), disk(0.025), Pose2D(0.2, 0.2, 0))
        assert check_out_of_bounds(w)

    def test_center_on_boundary_is_inside(self):
        w = _world(Pose2D(1.0, 0.5, 0), disk(0.025), Pose2D(0.2, 0.2, 0))
        assert not check_out_of_bounds(w)
