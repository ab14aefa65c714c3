import math

import numpy as np
import pytest

from prototouch.kinematics import (
    Joint,
    JointConfig,
    KinematicChain,
    SurfacePoint,
    chain_from_dict,
    chain_to_dict,
    forward_kinematics,
    home_config,
    make_transform,
    point_jacobian,
    preset_chain,
    random_config,
    validate_chain,
    world_point,
)

def hand_transform(angle, tx=0.0, ty=0.0):
    """Independent homogeneous-matrix oracle: rotation about z then translation."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0, tx], [s, c, 0, ty], [0, 0, 1, 0], [0, 0, 0, 1]])


def planar_tip_oracle(q1, q2):
    # base -> rot(q1) -> translate(1,0) -> rot(q2) -> tip at local (1,0,0)
    t = hand_transform(q1) @ hand_transform(q2, tx=1.0)
    return (t @ np.array([1.0, 0.0, 0.0, 1.0]))[:3]


class TestForwardKinematics:
    def test_home_pose(self, planar_chain):
        tip = world_point(planar_chain, np.zeros(2), planar_chain.point(0))
        np.testing.assert_allclose(tip, [2.0, 0.0, 0.0], atol=1e-12)

    def test_first_joint_quarter_turn(self, planar_chain):
        expected = planar_tip_oracle(math.pi / 2, 0.0)
        np.testing.assert_allclose(expected, [0.0, 2.0, 0.0], atol=1e-12)
        tip = world_point(planar_chain, [math.pi / 2, 0.0], planar_chain.point(0))
        np.testing.assert_allclose(tip, expected, atol=1e-12)

    def test_second_joint_quarter_turn(self, planar_chain):
        expected = planar_tip_oracle(0.0, math.pi / 2)
        np.testing.assert_allclose(expected, [1.0, 1.0, 0.0], atol=1e-12)
        tip = world_point(planar_chain, [0.0, math.pi / 2], planar_chain.point(0))
        np.testing.assert_allclose(tip, expected, atol=1e-12)

    def test_base_pose_is_identity(self, planar_chain):
        poses = forward_kinematics(planar_chain, [0.3, -0.4])
        np.testing.assert_allclose(poses["base"], np.eye(4), atol=1e-15)

    def test_dimension_mismatch_rejected(self, planar_chain):
        with pytest.raises(ValueError):
            forward_kinematics(planar_chain, [0.1, 0.2, 0.3])


class TestWorldPoint:
    def test_midlink_point_home(self, planar_chain):
        p = world_point(planar_chain, np.zeros(2), planar_chain.point(1))
        np.testing.assert_allclose(p, [0.5, 0.0, 0.0], atol=1e-12)

    def test_midlink_point_rotated(self, planar_chain):
        p = world_point(planar_chain, [math.pi / 2, 0.0], planar_chain.point(1))
        np.testing.assert_allclose(p, [0.0, 0.5, 0.0], atol=1e-12)

    def test_link_origin_tracks_frame(self, planar_chain):
        for q in ([0.0, 0.0], [0.7, -0.3], [1.2, 0.4]):
            poses = forward_kinematics(planar_chain, q)
            p = world_point(planar_chain, q, ("link2", np.zeros(3)))
            np.testing.assert_allclose(p, poses["link2"][:3, 3], atol=1e-12)

    def test_unknown_link_rejected(self, planar_chain):
        with pytest.raises(KeyError):
            world_point(planar_chain, np.zeros(2), ("nope", np.zeros(3)))


class TestPointJacobian:
    def test_planar_tip_columns(self, planar_chain):
        jac = point_jacobian(planar_chain, np.zeros(2), "link2", [1.0, 0.0, 0.0])
        # Hand cross products: z x (2,0,0) and z x (1,0,0).
        np.testing.assert_allclose(jac[:, 0], [0.0, 2.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(jac[:, 1], [0.0, 1.0, 0.0], atol=1e-12)

    def test_zero_lever_arm(self, planar_chain):
        jac = point_jacobian(planar_chain, np.zeros(2), "link2", [0.0, 0.0, 0.0])
        np.testing.assert_allclose(jac[:, 1], np.zeros(3), atol=1e-12)

    def test_planar_chain_has_zero_z_row(self, planar_chain):
        rng = np.random.default_rng(3)
        for _ in range(10):
            q = rng.uniform(-np.pi, np.pi, size=2)
            jac = point_jacobian(planar_chain, q, "link2", [1.0, 0.0, 0.0])
            np.testing.assert_allclose(jac[2, :], 0.0, atol=1e-12)

    def test_finite_difference_identity_on_presets(self):
        # 100 random (preset, q, point) draws; central differences h=1e-6 rad.
        rng = np.random.default_rng(42)
        chains = [preset_chain("spotlike"), preset_chain("frankalike")]
        h = 1e-6
        worst = 0.0
        for trial in range(100):
            chain = chains[trial % 2]
            q = random_config(chain, rng)
            point = chain.surface_points[rng.integers(len(chain.surface_points))]
            jac = point_jacobian(chain, q, point.link_id, point.local_position)
            for j in range(chain.dof):
                qp, qm = q.copy(), q.copy()
                qp[j] += h
                qm[j] -= h
                fd = (world_point(chain, qp, point) - world_point(chain, qm, point)) / (2 * h)
                worst = max(worst, float(np.max(np.abs(jac[:, j] - fd))))
        assert worst < 1e-6


class TestChainValidation:
    def test_planar_chain_ok(self, planar_chain):
        report = validate_chain(planar_chain)
        assert report.ok
        assert report.violations == []

    def test_non_unit_axis(self):
        links = [("base", "base"), ("link1", "link1")]
        joints = [Joint("j1", "base", "link1", make_transform((0, 0, 0)), np.array([0.0, 0.0, 2.0]), (-1, 1))]
        report = validate_chain(KinematicChain("bad", links, joints))
        assert not report.ok
        assert any("non-unit axis" in v for v in report.violations)

    def test_cycle_detected(self):
        links = [("base", "base"), ("a", "a"), ("b", "b")]
        joints = [
            Joint("j1", "base", "a", make_transform((0, 0, 0)), np.array([0.0, 0.0, 1.0]), (-1, 1)),
            Joint("j2", "a", "b", make_transform((1, 0, 0)), np.array([0.0, 0.0, 1.0]), (-1, 1)),
            Joint("j3", "b", "a", make_transform((1, 0, 0)), np.array([0.0, 0.0, 1.0]), (-1, 1)),
        ]
        report = validate_chain(KinematicChain("cyclic", links, joints))
        assert not report.ok
        assert any("cycle" in v or "multiple parent" in v for v in report.violations)

    def test_bad_limits(self):
        links = [("base", "base"), ("link1", "link1")]
        joints = [Joint("j1", "base", "link1", make_transform((0, 0, 0)), np.array([0.0, 0.0, 1.0]), (1.0, -1.0))]
        report = validate_chain(KinematicChain("bad", links, joints))
        assert any("bad limits" in v for v in report.violations)


class TestJointConfig:
    def test_out_of_limits_rejected(self):
        chain = preset_chain("frankalike")
        q = home_config(chain)
        q[0] = 9.0
        with pytest.raises(ValueError, match="outside limits"):
            JointConfig(chain, q)

    def test_valid_config_accepted(self):
        chain = preset_chain("frankalike")
        cfg = chain.config(home_config(chain))
        assert cfg.q.shape == (7,)

    def test_wrong_length_rejected(self):
        chain = preset_chain("frankalike")
        with pytest.raises(ValueError):
            chain.config(np.zeros(19))


class TestPresets:
    def test_spotlike_counts(self):
        chain = preset_chain("spotlike")
        assert chain.dof == 19
        assert len(chain.surface_points) == 104
        ids = sorted(p.point_id for p in chain.surface_points)
        assert ids == list(range(104))

    def test_frankalike_counts(self):
        chain = preset_chain("frankalike")
        assert chain.dof == 7
        assert len(chain.surface_points) == 10

    def test_normals_are_unit(self):
        for name in ("spotlike", "frankalike"):
            chain = preset_chain(name)
            for p in chain.surface_points:
                assert abs(np.linalg.norm(p.normal) - 1.0) < 1e-9

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset_chain("atlaslike")


class TestFrameProperties:
    def test_rigid_distance_preservation(self):
        chain = preset_chain("spotlike")
        rng = np.random.default_rng(7)
        torso_points = [p for p in chain.surface_points if p.link_id == "torso"][:8]
        ref = None
        for _ in range(5):
            q = random_config(chain, rng)
            poses = forward_kinematics(chain, q)
            pts = np.array([world_point(chain, q, p, poses=poses) for p in torso_points])
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            if ref is None:
                ref = d
            else:
                np.testing.assert_allclose(d, ref, atol=1e-12)

    def test_rerooted_geometry_preserves_relative_layout(self, planar_chain):
        # Same two-bar geometry rooted at the far end: inter-point distances
        # must agree for the matching configuration.
        links = [("tip_base", "tip_base"), ("mid", "mid"), ("root_end", "root_end")]
        joints = [
            Joint("j2r", "tip_base", "mid", make_transform((1, 0, 0)), np.array([0.0, 0.0, 1.0]), (-np.pi, np.pi)),
            Joint("j1r", "mid", "root_end", make_transform((1, 0, 0)), np.array([0.0, 0.0, 1.0]), (-np.pi, np.pi)),
        ]
        rerooted = KinematicChain("planar2-rerooted", links, joints)
        rng = np.random.default_rng(11)
        for _ in range(10):
            q1, q2 = rng.uniform(-2.0, 2.0, size=2)
            # Original: points at tip (link2 local (1,0,0)) and joint-2 origin.
            a1 = world_point(planar_chain, [q1, q2], ("link2", [1.0, 0.0, 0.0]))
            a2 = world_point(planar_chain, [q1, q2], ("link2", [0.0, 0.0, 0.0]))
            a3 = world_point(planar_chain, [q1, q2], ("link1", [0.0, 0.0, 0.0]))
            # Rerooted traversal sees the bend angle with opposite sign.
            b1 = world_point(rerooted, [-q2, -q1], ("tip_base", [0.0, 0.0, 0.0]))
            b2 = world_point(rerooted, [-q2, -q1], ("mid", [0.0, 0.0, 0.0]))
            b3 = world_point(rerooted, [-q2, -q1], ("root_end", [0.0, 0.0, 0.0]))
            for u, v, x, y in [(a1, a2, b1, b2), (a2, a3, b2, b3), (a1, a3, b1, b3)]:
                assert np.linalg.norm(u - v) == pytest.approx(np.linalg.norm(x - y), abs=1e-12)


class TestChainSerialization:
    def test_round_trip(self, planar_chain):
        rebuilt = chain_from_dict(chain_to_dict(planar_chain), name="planar2")
        assert rebuilt.dof == planar_chain.dof
        q = [0.3, -0.8]
        np.testing.assert_allclose(
            world_point(rebuilt, q, rebuilt.point(0)),
            world_point(planar_chain, q, planar_chain.point(0)),
            atol=1e-12,
        )

    def test_round_trip_with_rotated_origin(self):
        links = [("base", "base"), ("link1", "link1")]
        joints = [
            Joint(
                "j1",
                "base",
                "link1",
                make_transform((0.1, 0.2, 0.3), (0.4, -0.5, 0.6)),
                np.array([0.0, 1.0, 0.0]),
                (-1.0, 1.0),
            )
        ]
        chain = KinematicChain("t", links, joints)
        rebuilt = chain_from_dict(chain_to_dict(chain), name="t")
        np.testing.assert_allclose(rebuilt.joints[0].origin, chain.joints[0].origin, atol=1e-12)
