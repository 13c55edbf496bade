"""Tests for frame transforms and the proportional tracking controller."""

import itertools
import math

import pytest
from hypothesis import given, strategies as st

from corridor_nav.control import (
    STOP,
    ControllerConfig,
    Frame,
    FramedPoint,
    Pose,
    angular_error,
    control_step,
    map_to_odom,
    normalize_angle,
    odom_to_map,
    pose_to_odom,
)
from corridor_nav.exceptions import ConfigurationError, DegenerateBearing, FrameMismatchError

finite = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False)
angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)


class TestNormalizeAngle:

    @pytest.mark.parametrize("angle,expected", [
        (0.0, 0.0),
        (math.pi, -math.pi),
        (-math.pi, -math.pi),
        (3 * math.pi / 2, -math.pi / 2),
        (-3 * math.pi / 2, math.pi / 2),
        (4 * math.pi + 0.25, 0.25),
    ])
    def test_known_values(self, angle, expected):
        assert normalize_angle(angle) == pytest.approx(expected)

    @given(angles)
    def test_range(self, angle):
        wrapped = normalize_angle(angle)
        assert -math.pi <= wrapped < math.pi

    def test_pose_heading_is_normalized(self):
        assert Pose(0.0, 0.0, 2 * math.pi + 0.5).theta == pytest.approx(0.5)


class TestFrameTransforms:
    """map_to_odom / odom_to_map."""

    def test_identity_anchor(self):
        p = map_to_odom(FramedPoint(1.5, -2.0, Frame.MAP), Pose(0.0, 0.0, 0.0))
        assert p.frame is Frame.ODOM
        assert p.position == pytest.approx((1.5, -2.0))

    def test_rotation_then_translation(self):
        """A quarter turn maps (1, 0) to (0, 1) before the offset is added."""
        p = map_to_odom(FramedPoint(1.0, 0.0, Frame.MAP), Pose(2.0, 3.0, math.pi / 2))
        assert p.position == pytest.approx((2.0, 4.0))

    @given(finite, finite, finite, finite, angles)
    def test_round_trip(self, x, y, ax, ay, theta):
        """odom_to_map undoes map_to_odom for the same anchor."""
        anchor = Pose(ax, ay, theta)
        back = odom_to_map(map_to_odom(FramedPoint(x, y, Frame.MAP), anchor), anchor)
        assert back.frame is Frame.MAP
        assert back.x == pytest.approx(x, abs=1e-9)
        assert back.y == pytest.approx(y, abs=1e-9)

    @given(finite, finite, finite, finite, angles, angles)
    def test_distances_preserved(self, x, y, ax, ay, theta, heading):
        """The transform is rigid, so the controller sees the same distance in both frames."""
        anchor = Pose(ax, ay, theta)
        robot = Pose(1.0, -1.0, heading)
        goal = FramedPoint(x, y, Frame.MAP)
        odom_robot = pose_to_odom(robot, anchor)
        odom_goal = map_to_odom(goal, anchor)
        d_map = math.hypot(x - robot.x, y - robot.y)
        d_odom = math.hypot(odom_goal.x - odom_robot.x, odom_goal.y - odom_robot.y)
        assert d_odom == pytest.approx(d_map, abs=1e-7)

    def test_wrong_frame_rejected(self):
        anchor = Pose(0.0, 0.0, 0.0)
        with pytest.raises(FrameMismatchError):
            map_to_odom(FramedPoint(0.0, 0.0, Frame.ODOM), anchor)
        with pytest.raises(FrameMismatchError):
            odom_to_map(FramedPoint(0.0, 0.0, Frame.MAP), anchor)


class TestAngularError:

    def test_opposite_direction_magnitude(self):
        """Pointing away from the target gives an error of magnitude pi."""
        alpha = angular_error(Pose(0.0, 0.0, -3 * math.pi / 4), (1.0, 1.0))
        assert abs(alpha) == pytest.approx(math.pi)

    def test_coincident_target(self):
        with pytest.raises(DegenerateBearing):
            angular_error(Pose(1.0, 1.0, 0.0), (1.0, 1.0))


# eight headings against eight target bearings offset by pi/8 so no case sits on the +-pi seam
SIGN_CASES = list(itertools.product(range(8), range(8)))


class TestControlStep:
    """One tick of the proportional tracker."""

    @pytest.fixture
    def cfg(self):
        return ControllerConfig()

    @pytest.mark.parametrize("heading_k,bearing_k", SIGN_CASES)
    def test_angular_sign_follows_shortest_turn(self, cfg, heading_k, bearing_k):
        """The commanded turn always has the sign of the wrapped bearing error."""
        # Arrange
        heading = heading_k * math.pi / 4
        bearing = bearing_k * math.pi / 4 + math.pi / 8
        pose = Pose(0.0, 0.0, heading)
        target = (2.0 * math.cos(bearing), 2.0 * math.sin(bearing))
        expected = normalize_angle(bearing - heading)

        # Act
        out = control_step(pose, target, cfg)

        # Assert
        assert out.alpha == pytest.approx(expected)
        assert math.copysign(1.0, out.command.angular) == math.copysign(1.0, expected)
        assert abs(out.command.angular) <= cfg.max_angular

    def test_linear_clamped(self, cfg):
        out = control_step(Pose(0.0, 0.0, 0.0), (10.0, 0.0), cfg)
        assert out.command.linear == cfg.max_linear
        assert out.command.angular == pytest.approx(0.0)

    def test_proportional_below_limit(self, cfg):
        out = control_step(Pose(0.0, 0.0, 0.0), (0.25, 0.0), cfg)
        assert out.command.linear == pytest.approx(cfg.k_linear * 0.25)

    def test_turn_in_place(self, cfg):
        """Large heading errors suppress forward motion."""
        out = control_step(Pose(0.0, 0.0, 0.0), (0.0, 3.0), cfg)
        assert out.command.linear == 0.0
        assert out.command.angular == cfg.max_angular

    def test_reached(self, cfg):
        out = control_step(Pose(1.0, 1.0, 0.0), (1.05, 1.0), cfg)
        assert out.reached
        assert out.command == STOP

    def test_converges(self, cfg):
        """Euler integration of the commands reaches a target behind and to the side."""
        pose = Pose(0.0, 0.0, 0.0)
        target = (-2.0, 3.0)
        dt = 0.05
        for _ in range(2000):
            out = control_step(pose, target, cfg)
            if out.reached:
                break
            v, w = out.command.linear, out.command.angular
            pose = Pose(pose.x + v * math.cos(pose.theta) * dt,
                        pose.y + v * math.sin(pose.theta) * dt,
                        pose.theta + w * dt)
        assert out.reached
        assert math.hypot(pose.x - target[0], pose.y - target[1]) <= cfg.distance_threshold

    @pytest.mark.parametrize("field", ["k_linear", "max_linear", "distance_threshold"])
    def test_config_rejects_non_positive(self, field):
        with pytest.raises(ConfigurationError, match=field):
            ControllerConfig(**{field: 0.0})
