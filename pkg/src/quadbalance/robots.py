"""Concrete robot constructions: the default quadruped and virtual pendulums.

The quadruped is a floating-base tree with four 3-DoF point-foot legs
(hip abduction about x, hip flexion and knee about y). Legs are indexed
LF=0, RF=1, LH=2, RH=3; diagonal stance pairs are named "14" (LF+RH) and
"23" (RF+LH). Default parameters give a 90 kg machine that can stand with
its torso between roughly 0.4 and 0.68 m above the feet.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import Body, Joint, JointType, RobotModel
from .spatial import rot_x, skew

LEG_NAMES = ("LF", "RF", "LH", "RH")
STANCE_PAIRS = {"14": (0, 3), "23": (1, 2)}  # front foot listed first
SWING_FOR = {"14": (1, 2), "23": (0, 3)}


class WorkspaceError(ValueError):
    def __init__(self, msg, closest_distance):
        super().__init__(msg)
        self.closest_distance = closest_distance


def _rod_inertia(mass, length):
    i = mass * length * length / 12.0
    return np.diag([i, i, 0.15 * i + 1e-4])


@dataclass(frozen=True)
class QuadrupedParams:
    torso_length: float = 0.747
    torso_width: float = 0.414
    torso_height: float = 0.20
    torso_mass: float = 50.0
    hip_mass: float = 4.0
    upper_mass: float = 3.0
    lower_mass: float = 3.0
    upper_len: float = 0.35
    lower_len: float = 0.35
    foot_radius: float = 0.02
    gravity: float = 9.81
    # +1 bends the knee forward (foot behind knee), -1 backward
    knee_signs: tuple = (-1.0, -1.0, 1.0, 1.0)


class Quadruped:
    """RobotModel plus leg-chain kinematics helpers (FK, IK, Jacobians)."""

    def __init__(self, params: QuadrupedParams | None = None):
        self.params = params or QuadrupedParams()
        p = self.params
        hx, hy = 0.5 * p.torso_length, 0.5 * p.torso_width
        self.hip_offsets = np.array(
            [[hx, hy, 0.0], [hx, -hy, 0.0], [-hx, hy, 0.0], [-hx, -hy, 0.0]]
        )
        self.foot_local = np.array([0.0, 0.0, -p.lower_len])

        tm = p.torso_mass
        torso_inertia = (
            np.diag(
                [
                    tm / 12.0 * (p.torso_width**2 + p.torso_height**2),
                    tm / 12.0 * (p.torso_length**2 + p.torso_height**2),
                    tm / 12.0 * (p.torso_length**2 + p.torso_width**2),
                ]
            )
        )
        bodies = [Body("torso", tm, np.zeros(3), torso_inertia)]
        joints = [
            Joint("base", JointType.FLOATING, -1, np.eye(3), np.zeros(3))
        ]
        hip_inertia = np.diag([0.01, 0.01, 0.01])
        for leg, name in enumerate(LEG_NAMES):
            parent_torso = 0
            joints.append(
                Joint(f"{name}_haa", JointType.REVOLUTE, parent_torso, np.eye(3),
                      self.hip_offsets[leg].copy(), np.array([1.0, 0.0, 0.0]))
            )
            bodies.append(Body(f"{name}_hip", p.hip_mass, np.zeros(3), hip_inertia))
            hip_body = len(bodies) - 1
            joints.append(
                Joint(f"{name}_hfe", JointType.REVOLUTE, hip_body, np.eye(3),
                      np.zeros(3), np.array([0.0, 1.0, 0.0]))
            )
            bodies.append(
                Body(f"{name}_upper", p.upper_mass, np.array([0.0, 0.0, -0.5 * p.upper_len]),
                     _rod_inertia(p.upper_mass, p.upper_len))
            )
            upper_body = len(bodies) - 1
            joints.append(
                Joint(f"{name}_kfe", JointType.REVOLUTE, upper_body, np.eye(3),
                      np.array([0.0, 0.0, -p.upper_len]), np.array([0.0, 1.0, 0.0]))
            )
            bodies.append(
                Body(f"{name}_lower", p.lower_mass, np.array([0.0, 0.0, -0.5 * p.lower_len]),
                     _rod_inertia(p.lower_mass, p.lower_len))
            )
        self.model = RobotModel(bodies, joints, gravity=(0.0, 0.0, -p.gravity))
        # body index of each lower-leg segment (carries the foot point)
        self.foot_bodies = tuple(3 + 3 * leg for leg in range(4))

    # ---- coordinate layout -------------------------------------------------

    def leg_q_slice(self, leg):
        return slice(7 + 3 * leg, 10 + 3 * leg)

    def leg_v_slice(self, leg):
        return slice(6 + 3 * leg, 9 + 3 * leg)

    def joint_q(self, state):
        return state.q[7:]

    def joint_qd(self, state):
        return state.qd[6:]

    # ---- leg chain in the torso frame --------------------------------------

    def leg_fk(self, leg, q3):
        q1, q2, q3k = q3
        p = self.params
        s2, c2 = np.sin(q2), np.cos(q2)
        s23, c23 = np.sin(q2 + q3k), np.cos(q2 + q3k)
        planar = np.array(
            [-(p.upper_len * s2 + p.lower_len * s23), 0.0,
             -(p.upper_len * c2 + p.lower_len * c23)]
        )
        return self.hip_offsets[leg] + rot_x(q1) @ planar

    def _leg_frames(self, leg, q3):
        """Joint axes/origins of a leg in the torso frame."""
        q1, q2, q3k = q3
        p = self.params
        R1 = rot_x(q1)
        h = self.hip_offsets[leg]
        a1 = np.array([1.0, 0.0, 0.0])
        a2 = R1 @ np.array([0.0, 1.0, 0.0])
        knee = h + R1 @ np.array([p.upper_len * -np.sin(q2), 0.0, -p.upper_len * np.cos(q2)])
        foot = self.leg_fk(leg, q3)
        return a1, a2, h, knee, foot

    def leg_jacobian(self, leg, q3):
        a1, a2, h, knee, foot = self._leg_frames(leg, q3)
        J = np.empty((3, 3))
        J[:, 0] = np.cross(a1, foot - h)
        J[:, 1] = np.cross(a2, foot - h)
        J[:, 2] = np.cross(a2, foot - knee)
        return J

    def leg_jacobian_dot(self, leg, q3, qd3):
        """Analytic time derivative of the leg Jacobian (torso frame)."""
        a1, a2, h, knee, foot = self._leg_frames(leg, q3)
        J = self.leg_jacobian(leg, q3)
        foot_dot = J @ qd3
        a2_dot = np.cross(a1 * qd3[0], a2)
        knee_dot = np.cross(a1, knee - h) * qd3[0] + np.cross(a2, knee - h) * qd3[1]
        Jd = np.empty((3, 3))
        Jd[:, 0] = np.cross(a1, foot_dot)
        Jd[:, 1] = np.cross(a2_dot, foot - h) + np.cross(a2, foot_dot)
        Jd[:, 2] = np.cross(a2_dot, foot - knee) + np.cross(a2, foot_dot - knee_dot)
        return Jd

    def leg_ik(self, leg, target_torso):
        """Analytic 3-DoF inverse kinematics for a foot target in the torso frame."""
        p = self.params
        r = np.asarray(target_torso, dtype=float) - self.hip_offsets[leg]
        rho = np.hypot(r[1], r[2])
        d = np.sqrt(r[0] ** 2 + rho**2)
        reach_max = p.upper_len + p.lower_len
        reach_min = abs(p.upper_len - p.lower_len)
        if d > reach_max - 1e-9 or d < reach_min + 1e-9:
            closest = min(abs(d - reach_max), abs(d - reach_min))
            raise WorkspaceError(
                f"leg {LEG_NAMES[leg]}: target at distance {d:.4f} m outside "
                f"reach ({reach_min:.4f}, {reach_max:.4f}); {closest:.4f} m from boundary",
                closest,
            )
        q1 = np.arctan2(r[1], -r[2])
        x, zp = r[0], -rho
        c3 = (d * d - p.upper_len**2 - p.lower_len**2) / (2.0 * p.upper_len * p.lower_len)
        c3 = np.clip(c3, -1.0, 1.0)
        q3 = self.params.knee_signs[leg] * np.arccos(c3)
        q2 = np.arctan2(-x, -zp) - np.arctan2(
            p.lower_len * np.sin(q3), p.upper_len + p.lower_len * np.cos(q3)
        )
        return np.array([q1, q2, q3])

    # ---- whole-robot helpers ------------------------------------------------

    def foot_position_world(self, kc, leg):
        return kc.point_world(self.foot_bodies[leg], self.foot_local)

    def foot_velocity_world(self, kc, leg):
        return kc.point_velocity_world(self.foot_bodies[leg], self.foot_local)

    def foot_position_torso(self, state, leg):
        return self.leg_fk(leg, state.q[self.leg_q_slice(leg)])

    def nominal_stance_joints(self, height, x_shift=0.0, y_spread=0.0):
        """Joint vector with every foot below its hip at the given torso height."""
        q12 = np.zeros(12)
        for leg in range(4):
            target = self.hip_offsets[leg] + np.array(
                [x_shift, np.sign(self.hip_offsets[leg, 1]) * y_spread, -height]
            )
            q12[3 * leg:3 * leg + 3] = self.leg_ik(leg, target)
        return q12

    def stance_state(self, height, feet_targets_torso=None):
        """Floating-base state standing on flat ground at z=0 with the given feet."""
        q = np.zeros(self.model.nq)
        q[2] = height + self.params.foot_radius
        q[3] = 1.0
        if feet_targets_torso is None:
            q[7:] = self.nominal_stance_joints(height)
        else:
            for leg in range(4):
                q[7 + 3 * leg:10 + 3 * leg] = self.leg_ik(leg, feet_targets_torso[leg])
        from .model import JointState

        return JointState(q, np.zeros(self.model.nv))


def quadruped_from_params(params_dict):
    return Quadruped(QuadrupedParams(**{k: (tuple(v) if k == "knee_signs" else v) for k, v in params_dict.items()})).model


# ---- virtual pendulum -------------------------------------------------------


class PendulumConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PendulumParams:
    """2-DoF planar inverted pendulum: passive pivot and actuated hip, both about +x."""

    leg_length: float = 0.55
    leg_mass: float = 8.0
    leg_com_z: float = 0.275      # along the leg, from the pivot
    leg_inertia_x: float = 0.25
    torso_mass: float = 82.0
    torso_com: tuple = (0.0, 0.0, 0.08)   # in the torso frame, origin at the hip
    torso_inertia: tuple = (4.0, 5.0, 6.0)
    gravity: float = 9.81


class PendulumModel:
    """Wrapper carrying the 2-joint pendulum tree plus the slider-extended tree."""

    def __init__(self, params: PendulumParams | None = None):
        self.params = params or PendulumParams()
        p = self.params
        if p.leg_length <= 0.0:
            raise PendulumConfigError("leg length must be positive")
        leg = Body("leg", p.leg_mass, np.array([0.0, 0.0, p.leg_com_z]),
                   np.diag([p.leg_inertia_x, p.leg_inertia_x, 1e-4]))
        torso = Body("torso", p.torso_mass, np.asarray(p.torso_com, dtype=float),
                     np.diag(p.torso_inertia))
        x = np.array([1.0, 0.0, 0.0])
        pivot = Joint("pivot", JointType.REVOLUTE, -1, np.eye(3), np.zeros(3), x)
        hip = Joint("hip", JointType.REVOLUTE, 0, np.eye(3),
                    np.array([0.0, 0.0, p.leg_length]), x)
        grav = (0.0, 0.0, -p.gravity)
        self.model = RobotModel([leg, torso], [pivot, hip], gravity=grav)

        slider_body = Body("carrier", 0.0, np.zeros(3), np.zeros((3, 3)))
        slider = Joint("fict_y", JointType.PRISMATIC, -1, np.eye(3), np.zeros(3),
                       np.array([0.0, 1.0, 0.0]))
        pivot_s = Joint("pivot", JointType.REVOLUTE, 0, np.eye(3), np.zeros(3), x)
        hip_s = Joint("hip", JointType.REVOLUTE, 1, np.eye(3),
                      np.array([0.0, 0.0, p.leg_length]), x)
        self.extended_model = RobotModel(
            [slider_body, leg, torso], [slider, pivot_s, hip_s], gravity=grav
        )
        # pivot actuation authority is structurally zero in every controller path
        self.pivot_passive = True

    @property
    def total_mass(self):
        return self.model.total_mass

    @property
    def g(self):
        return self.params.gravity
