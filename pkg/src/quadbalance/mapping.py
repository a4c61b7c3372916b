"""Kinematic mapping between the quadruped and the virtual pendulum.

Sensor data is reduced to the pendulum coordinates (y_p, y_h) and their
rates; the constraint matrices G_j / g_j map pendulum motion to desired
joint motion in three stages (pendulum -> torso -> stance feet -> leg
joints). Every stage matrix is expressed in `vbase` coordinates: an
inertial frame whose origin is the midpoint of the two stance feet, x
along the (horizontal) contact line pointing forward, z up. Torso spatial
velocities are referenced at the vbase origin, so the pivot screw is
S_p = [x; 0] and the hip screw passes through the torso origin.

Foot-stage quantities v_f / a_f are the velocity and acceleration of the
stance feet relative to the torso (the apparent quantities the leg
Jacobian relates to joint rates), expressed in vbase coordinates. With the
feet fixed in the world this yields exactly

    G_f = -[-p_f x  1],      g_f = v_f x omega_t,

with p_f the foot position in vbase. The joint stage inverts the leg
Jacobian, G_a = J^-1 and g_a = -J^-1 Jdot qd_f, with Jdot analytic.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import KinCache, bias_forces, point_jacobian
from .robots import LEG_NAMES, STANCE_PAIRS
from .spatial import crm, rot_z, skew

LEG_CONDITION_LIMIT = 1e6


class ExtractionError(ValueError):
    """Sensor data outside the virtual model's domain (rolled torso, bad pivot)."""


class LegSingularityError(RuntimeError):
    def __init__(self, leg, cond):
        super().__init__(f"stance leg {LEG_NAMES[leg]} near-singular (condition number {cond:.3e})")
        self.leg = leg
        self.cond = cond


class UnsupportedStanceError(ValueError):
    """The mapping is defined for the two diagonal stance pairs only."""


def check_pair(pair):
    if pair not in STANCE_PAIRS:
        raise UnsupportedStanceError(f"stance pair {pair!r} not one of {sorted(STANCE_PAIRS)}")
    return STANCE_PAIRS[pair]


# ---- sensor data to virtual states -------------------------------------------


@dataclass
class SensorSnapshot:
    """Proprioceptive data in the robot torso frame."""

    q: np.ndarray        # 12 joint positions
    qd: np.ndarray       # 12 joint rates
    omega: np.ndarray    # torso angular velocity
    up: np.ndarray       # unit gravity-opposite direction
    stance_pair: str     # "14" or "23"
    p_f1: np.ndarray     # front stance foot position
    p_f2: np.ndarray     # hind stance foot position

    def __post_init__(self):
        n = np.linalg.norm(self.up)
        if abs(n - 1.0) > 1e-9:
            raise ExtractionError(f"up vector norm {n} outside tolerance")
        if np.linalg.norm(self.p_f1 - self.p_f2) <= 1e-6:
            raise ExtractionError("stance feet coincident")
        check_pair(self.stance_pair)


@dataclass
class VirtualState:
    y_p: float
    y_h: float
    yd_p: float
    yd_h: float
    phi_t: float
    E_phi: np.ndarray  # rotation taking rtorso coordinates to vtorso coordinates

    @property
    def y(self):
        return np.array([self.y_p, self.y_h])

    @property
    def yd(self):
        return np.array([self.yd_p, self.yd_h])


def support_line_angle(p_f1, p_f2):
    """Angle of the support line in the torso xy-plane, in (-pi, pi]."""
    dx = p_f1[0] - p_f2[0]
    dy = p_f1[1] - p_f2[1]
    if np.hypot(dx, dy) <= 1e-9:
        raise ExtractionError("stance feet coincident in the torso plane")
    return float(np.arctan2(dy, dx))


def rot_rtorso_to_vtorso(phi_t):
    """E_phi: pure z-rotation mapping rtorso coordinates into vtorso coordinates."""
    return rot_z(phi_t).T


def _principal_hip_angle(p_y, p_z):
    # atan of the printed ratio p_y/p_z, branch-corrected for the pivot below
    ang = np.arctan2(p_y, p_z)
    if ang > 0.5 * np.pi:
        ang -= np.pi
    elif ang < -0.5 * np.pi:
        ang += np.pi
    return ang


def extract_virtual_state(robot, snap: SensorSnapshot) -> VirtualState:
    """Solve the four extraction relations for (y, ydot).

    The pivot point is the mean of the two stance-foot positions; its
    velocity comes from the stance-leg Jacobians (foot motion relative to
    the torso).
    """
    legs = check_pair(snap.stance_pair)
    phi_t = support_line_angle(snap.p_f1, snap.p_f2)
    E = rot_rtorso_to_vtorso(phi_t)

    sum_rate = float((E @ snap.omega)[0])
    s_arg = float((E @ snap.up)[1])
    if abs(s_arg) > 1.0:
        raise ExtractionError(f"up-vector projection {s_arg} outside [-1, 1]; torso rolled past horizontal")
    sum_angle = float(np.arcsin(s_arg))

    pivot_rt = 0.5 * (snap.p_f1 + snap.p_f2)
    v_rt = np.zeros(3)
    for leg in legs:
        sl = slice(3 * leg, 3 * leg + 3)
        v_rt += 0.5 * robot.leg_jacobian(leg, snap.q[sl]) @ snap.qd[sl]
    p = E @ pivot_rt
    v = E @ v_rt
    denom = p[1] ** 2 + p[2] ** 2
    if denom <= 1e-12:
        raise ExtractionError("pivot point degenerate in the vtorso y-z plane")

    y_h = float(_principal_hip_angle(p[1], p[2]))
    yd_h = float((p[2] * v[1] - p[1] * v[2]) / denom)
    return VirtualState(
        y_p=sum_angle - y_h,
        y_h=y_h,
        yd_p=sum_rate - yd_h,
        yd_h=yd_h,
        phi_t=phi_t,
        E_phi=E,
    )


def sensor_snapshot(robot, state, stance_pair, cache=None):
    """Assemble the proprioceptive snapshot the extraction consumes.

    All quantities are torso-frame: joint encoders, gyro rate, the gravity
    direction, and the stance feet from leg kinematics (front foot first).
    """
    legs = check_pair(stance_pair)
    kc = cache or KinCache(robot.model, state)
    R0 = kc.R[0]
    return SensorSnapshot(
        q=state.q[7:].copy(),
        qd=state.qd[6:].copy(),
        omega=state.qd[0:3].copy(),
        up=R0.T @ np.array([0.0, 0.0, 1.0]),
        stance_pair=stance_pair,
        p_f1=robot.leg_fk(legs[0], state.q[7 + 3 * legs[0]:10 + 3 * legs[0]]),
        p_f2=robot.leg_fk(legs[1], state.q[7 + 3 * legs[1]:10 + 3 * legs[1]]),
    )


# ---- the vbase frame ----------------------------------------------------------


@dataclass
class VirtualFrame:
    """World pose of `vbase` plus the per-tick virtual leg length."""

    R_wv: np.ndarray  # columns: contact-line x, horizontal y, world z
    p_wv: np.ndarray  # midpoint of the stance feet
    stance_pair: str
    leg_length: float

    @property
    def x_axis(self):
        return self.R_wv[:, 0]

    @property
    def y_axis(self):
        return self.R_wv[:, 1]

    def to_vbase(self, point_world):
        return self.R_wv.T @ (np.asarray(point_world) - self.p_wv)

    def x_along(self, point_world):
        return float(self.x_axis @ (np.asarray(point_world) - self.p_wv))


def build_virtual_frame(robot, state, stance_pair, cache=None):
    """Construct vbase from the world stance-foot positions (front foot first)."""
    legs = check_pair(stance_pair)
    kc = cache or KinCache(robot.model, state)
    f_front = robot.foot_position_world(kc, legs[0])
    f_hind = robot.foot_position_world(kc, legs[1])
    d = f_front - f_hind
    d[2] = 0.0
    n = np.linalg.norm(d)
    if n < 1e-6:
        raise ExtractionError("contact line degenerate: feet vertically aligned")
    x = d / n
    z = np.array([0.0, 0.0, 1.0])
    y = np.cross(z, x)
    R_wv = np.column_stack([x, y, z])
    p_wv = 0.5 * (f_front + f_hind)
    r = kc.p[0] - p_wv
    perp = r - (x @ r) * x
    return VirtualFrame(R_wv=R_wv, p_wv=p_wv, stance_pair=stance_pair,
                        leg_length=float(np.linalg.norm(perp)))


# ---- constraint stages ---------------------------------------------------------


@dataclass
class ConstraintMap:
    """Stage matrices of the pendulum-to-joint mapping, all in vbase coordinates.

    Columns of G_t / G_j are (y_p, y_h) plus any active motion coordinates.
    Swing-leg rows of G_j are zero.
    """

    G_t: np.ndarray
    g_t: np.ndarray
    G_f: dict
    g_f: dict
    G_a: dict
    g_a: dict
    G_j: np.ndarray
    g_j: np.ndarray
    stance_pair: str
    ydot: np.ndarray
    leg_condition: dict


def stage_torso(yd_p, yd_h, hip_point, motion_dirs=(), motion_rates=()):
    """Pivot/hip screw columns and the velocity-product remainder g_t.

    hip_point is the torso origin in vbase; motion_dirs are unit translation
    directions (vbase coords) appended as prismatic columns with fixed axes.
    """
    x = np.array([1.0, 0.0, 0.0])
    S_p = np.concatenate([x, np.zeros(3)])
    S_h = np.concatenate([x, np.cross(hip_point, x)])
    cols = [S_p, S_h] + [np.concatenate([np.zeros(3), np.asarray(d, float)]) for d in motion_dirs]
    G_t = np.column_stack(cols)
    # the pivot axis is fixed; the hip axis is swept by the pivot motion;
    # translation directions are fixed in the inertial frame
    g_t = crm(S_p * yd_p) @ S_h * yd_h
    return G_t, g_t


def stage_feet(p_foot, v_t):
    """Map torso twist to the apparent stance-foot velocity; remainder g_f."""
    G_f = np.hstack([skew(p_foot), -np.eye(3)])
    v_f = G_f @ v_t
    g_f = np.cross(v_f, v_t[:3])
    return G_f, v_f, g_f


def stage_joints(leg, J, Jdot, qd_leg):
    """Invert the stance-leg Jacobian; remainder g_a = -J^-1 Jdot qd."""
    cond = np.linalg.cond(J)
    if not np.isfinite(cond) or cond > LEG_CONDITION_LIMIT:
        raise LegSingularityError(leg, cond)
    G_a = np.linalg.inv(J)
    g_a = -G_a @ (Jdot @ qd_leg)
    return G_a, g_a, cond


def assemble_constraint_map(robot, q12, vframe, v_state, torso_R_w, torso_p_w,
                            motion_rates=()):
    """Collect the three stages into G_j / g_j for the active stance pair.

    motion_rates, when present, activate translation columns along the
    contact line (one rate per column); their axes are fixed in vbase so
    they only contribute velocity products through the foot/joint stages.
    """
    legs = check_pair(vframe.stance_pair)
    R_vt = vframe.R_wv.T @ torso_R_w  # rtorso -> vbase rotation
    hip_vb = vframe.to_vbase(torso_p_w)

    motion_rates = np.atleast_1d(np.asarray(motion_rates, dtype=float)).reshape(-1)
    nm = motion_rates.size
    dirs = [np.array([1.0, 0.0, 0.0])] * nm  # along-line translation
    G_t, g_t = stage_torso(v_state.yd_p, v_state.yd_h, hip_vb, dirs, motion_rates)
    ydot = np.concatenate([[v_state.yd_p, v_state.yd_h], motion_rates])
    v_t = G_t @ ydot

    k = 2 + nm
    G_j = np.zeros((12, k))
    g_j = np.zeros(12)
    G_f, g_f, G_a, g_a, conds = {}, {}, {}, {}, {}
    for leg in legs:
        sl = slice(3 * leg, 3 * leg + 3)
        q3 = q12[sl]
        foot_vb = vframe.to_vbase(torso_p_w + torso_R_w @ robot.leg_fk(leg, q3))
        Gf, v_f, gf = stage_feet(foot_vb, v_t)
        J_vb = R_vt @ robot.leg_jacobian(leg, q3)
        cond = np.linalg.cond(J_vb)
        if not np.isfinite(cond) or cond > LEG_CONDITION_LIMIT:
            raise LegSingularityError(leg, cond)
        Ga = np.linalg.inv(J_vb)
        qd_mapped = Ga @ v_f
        Jdot_vb = R_vt @ robot.leg_jacobian_dot(leg, q3, qd_mapped)
        ga = -Ga @ (Jdot_vb @ qd_mapped)
        G_j[sl] = Ga @ Gf @ G_t
        g_j[sl] = Ga @ (Gf @ g_t + gf) + ga
        G_f[leg], g_f[leg], G_a[leg], g_a[leg], conds[leg] = Gf, gf, Ga, ga, cond
    return ConstraintMap(G_t=G_t, g_t=g_t, G_f=G_f, g_f=g_f, G_a=G_a, g_a=g_a,
                         G_j=G_j, g_j=g_j, stance_pair=vframe.stance_pair,
                         ydot=ydot, leg_condition=conds)


# ---- whole-robot projection ------------------------------------------------------


def _vbase_twist_to_base_coords(vframe, base_R_w, base_p_w, sv):
    """Origin-referenced vbase twist -> body-frame base twist [omega_b; v_b]."""
    w_w = vframe.R_wv @ sv[:3]
    v_origin_w = vframe.R_wv @ sv[3:]
    v_base_w = v_origin_w + np.cross(w_w, base_p_w - vframe.p_wv)
    return np.concatenate([base_R_w.T @ w_w, base_R_w.T @ v_base_w])


def full_velocity_map(cm, vframe, base_R_w, base_p_w, with_fictitious=True):
    """Map extended pendulum rates to the 18-dim generalized velocity.

    Returns (M, g_full): qd = M @ [ydot_fict?, y_p, y_h, motion...] and
    qdd = M @ ydd + g_full. The fictitious column is a whole-robot unit
    translation along the vbase y axis (static, no velocity product).
    """
    k = cm.G_t.shape[1]
    cols = []
    if with_fictitious:
        s_fict = np.concatenate([np.zeros(3), np.array([0.0, 1.0, 0.0])])
        col = np.zeros(18)
        col[:6] = _vbase_twist_to_base_coords(vframe, base_R_w, base_p_w, s_fict)
        cols.append(col)
    for c in range(k):
        col = np.zeros(18)
        col[:6] = _vbase_twist_to_base_coords(vframe, base_R_w, base_p_w, cm.G_t[:, c])
        col[6:] = cm.G_j[:, c]
        cols.append(col)
    M = np.column_stack(cols)
    g_full = np.zeros(18)
    g_full[:6] = _vbase_twist_to_base_coords(vframe, base_R_w, base_p_w, cm.g_t)
    g_full[6:] = cm.g_j
    return M, g_full


def project_eom(H, C, M, g_full):
    """Project the robot EoM onto the extended pendulum coordinates."""
    H_y = M.T @ H @ M
    C_y = M.T @ (H @ g_full + C)
    return H_y, C_y


# ---- control law and gravity compensation -------------------------------------------


class GainConfigError(ValueError):
    pass


def _gain_array(k, name):
    arr = np.atleast_1d(np.asarray(k, dtype=float))
    if arr.size == 1:
        arr = np.full(12, arr[0])
    if arr.shape != (12,):
        raise GainConfigError(f"{name} must be scalar or length 12")
    if np.any(arr <= 0.0):
        raise GainConfigError(f"{name} must be positive definite (elementwise positive)")
    return arr


def torque_command(q, qd, q_vip, qd_vip, qdd_bal, kp, kd, kb, tau_gravity=None):
    """Joint torques tracking the pendulum-consistent configuration.

    PD on the vip configuration plus the balance-acceleration feedforward,
    plus gravity compensation when provided.
    """
    kp = _gain_array(kp, "K_P")
    kd = _gain_array(kd, "K_D")
    kb = _gain_array(kb, "K_B")
    tau = kp * (q_vip - q) + kd * (qd_vip - qd) + kb * qdd_bal
    if tau_gravity is not None:
        tau = tau + tau_gravity
    return tau


def gravity_compensation(robot, state, support_legs, cache=None):
    """Joint torques cancelling gravity given a static force distribution.

    Support forces solve the floating-base rows of the static EoM in the
    least-squares sense (the moment about the contact line is unservable by
    two point feet and is left to the balancer).
    """
    kc = cache or KinCache(robot.model, state)
    zero_qd = state.copy()
    zero_qd.qd = np.zeros(robot.model.nv)
    C_grav = bias_forces(robot.model, zero_qd)
    if not support_legs:
        return C_grav[6:].copy()
    jacs = [
        point_jacobian(robot.model, state, robot.foot_bodies[leg], robot.foot_local, cache=kc)
        for leg in support_legs
    ]
    A = np.hstack([J[:, :6].T for J in jacs])
    f, *_ = np.linalg.lstsq(A, C_grav[:6], rcond=None)
    tau = C_grav[6:].copy()
    for i, J in enumerate(jacs):
        tau -= J[:, 6:].T @ f[3 * i:3 * i + 3]
    return tau


# ---- pendulum-consistent poses and stance IK ------------------------------------------


def pendulum_torso_pose(vframe, y_p, y_h, phi_t, x_along):
    """Nominal world torso pose mimicking the pendulum at (y_p, y_h)."""
    l = vframe.leg_length
    p = vframe.p_wv + vframe.R_wv @ np.array(
        [x_along, -l * np.sin(y_p), l * np.cos(y_p)]
    )
    from .spatial import rot_x

    R = vframe.R_wv @ rot_x(y_p + y_h) @ rot_rtorso_to_vtorso(phi_t)
    return R, p


def stance_vip_joints(robot, nominal_R, nominal_p, feet_world, legs):
    """IK of the stance legs for the nominal pose; {leg: q3} for the pair."""
    out = {}
    for leg in legs:
        target = nominal_R.T @ (feet_world[leg] - nominal_p)
        out[leg] = robot.leg_ik(leg, target)
    return out
