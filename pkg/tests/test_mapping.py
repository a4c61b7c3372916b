"""Virtual-state extraction and the stage-wise constraint mapping."""

import numpy as np
import pytest

from quadbalance import dynamics as dyn
from quadbalance import mapping as mp
from quadbalance.model import JointState
from quadbalance.robots import Quadruped, PendulumModel, PendulumParams, STANCE_PAIRS, WorkspaceError
from quadbalance.spatial import rot_to_quat, rot_x, rot_z

RNG = np.random.default_rng(41)


@pytest.fixture(scope="module")
def quad():
    return Quadruped()


def make_vframe(feet_front, feet_hind, pair, leg_length):
    d = feet_front - feet_hind
    d[2] = 0.0
    x = d / np.linalg.norm(d)
    z = np.array([0.0, 0.0, 1.0])
    R = np.column_stack([x, np.cross(z, x), z])
    return mp.VirtualFrame(R_wv=R, p_wv=0.5 * (feet_front + feet_hind),
                           stance_pair=pair, leg_length=leg_length)


def posed_state(quad, vframe, y_p, y_h, phi_t, feet_world, x_along=0.0,
                swing_q=(0.0, 0.9, -1.8)):
    """Pendulum-consistent full state for the given virtual coordinates."""
    R, p = mp.pendulum_torso_pose(vframe, y_p, y_h, phi_t, x_along)
    legs = STANCE_PAIRS[vframe.stance_pair]
    q = np.zeros(quad.model.nq)
    q[0:3] = p
    q[3:7] = rot_to_quat(R)
    for leg in range(4):
        sl = slice(7 + 3 * leg, 10 + 3 * leg)
        if leg in legs:
            q[sl] = quad.leg_ik(leg, R.T @ (feet_world[leg] - p))
        else:
            q[sl] = swing_q
    return JointState(q, np.zeros(quad.model.nv))


def diagonal_setup(quad, pair="23", yaw=0.0, leg_length=0.55, spread=1.0):
    """World feet for a diagonal stance pair, line through the origin."""
    legs = STANCE_PAIRS[pair]
    hips = quad.hip_offsets
    R_yaw = rot_z(yaw)
    feet = {}
    for leg in legs:
        feet[leg] = R_yaw @ (hips[leg] * np.array([spread, spread, 0.0])) + np.array([0, 0, 0.02])
    vf = make_vframe(feet[legs[0]].copy(), feet[legs[1]].copy(), pair, leg_length)
    phi_world = np.arctan2(vf.x_axis[1], vf.x_axis[0])
    return feet, vf, phi_world


# ---- support line angle -----------------------------------------------------------


def test_support_line_angle_printed_example():
    p1 = np.array([0.3, 0.2, -0.5])
    p2 = np.array([-0.3, -0.2, -0.5])
    phi = mp.support_line_angle(p1, p2)
    assert np.isclose(phi, np.arctan2(0.4, 0.6), atol=1e-15)
    assert np.isclose(phi, 0.5880026035475675, atol=1e-12)


def test_support_line_angle_x_aligned_feet():
    assert mp.support_line_angle(np.array([0.4, 0.0, -0.5]), np.array([-0.2, 0.0, -0.5])) == 0.0


def test_support_line_angle_coincident_feet_rejected():
    with pytest.raises(mp.ExtractionError):
        mp.support_line_angle(np.array([0.1, 0.2, -0.5]), np.array([0.1, 0.2, -0.4]))


def test_foot_swap_flips_pivot_axis_sign(quad):
    # swapping the feet rotates phi_t by pi; the extracted angles flip sign
    feet, vf, phi_w = diagonal_setup(quad)
    st = posed_state(quad, vf, 0.06, -0.11, phi_w, feet)
    snap = mp.sensor_snapshot(quad, st, "23")
    vs = mp.extract_virtual_state(quad, snap)
    swapped = mp.SensorSnapshot(q=snap.q, qd=snap.qd, omega=snap.omega, up=snap.up,
                                stance_pair=snap.stance_pair, p_f1=snap.p_f2, p_f2=snap.p_f1)
    vs2 = mp.extract_virtual_state(quad, swapped)
    assert np.isclose(abs(vs2.phi_t - vs.phi_t), np.pi, atol=1e-12)
    assert np.isclose(vs2.y_p, -vs.y_p, atol=1e-9)
    assert np.isclose(vs2.y_h, -vs.y_h, atol=1e-9)


# ---- extraction round trips ----------------------------------------------------------


def test_extract_upright_pose_is_zero(quad):
    feet, vf, phi_w = diagonal_setup(quad)
    st = posed_state(quad, vf, 0.0, 0.0, phi_w, feet)
    vs = mp.extract_virtual_state(quad, mp.sensor_snapshot(quad, st, "23"))
    assert abs(vs.y_p) < 1e-12 and abs(vs.y_h) < 1e-12
    assert abs(vs.yd_p) < 1e-12 and abs(vs.yd_h) < 1e-12


@pytest.mark.parametrize("pair", ["23", "14"])
def test_extract_pose_round_trip(quad, pair):
    feet, vf, phi_w = diagonal_setup(quad, pair=pair, yaw=0.3)
    for y_p, y_h in [(0.05, -0.1), (-0.08, 0.04), (0.12, 0.1), (0.0, -0.2)]:
        st = posed_state(quad, vf, y_p, y_h, phi_w, feet)
        vs = mp.extract_virtual_state(quad, mp.sensor_snapshot(quad, st, pair))
        assert abs(vs.y_p - y_p) < 1e-9
        assert abs(vs.y_h - y_h) < 1e-9
        # E_phi is a pure z rotation by phi_t
        assert np.allclose(vs.E_phi, rot_z(vs.phi_t).T, atol=1e-12)


def test_extract_rate_round_trip(quad):
    feet, vf, phi_w = diagonal_setup(quad, yaw=-0.2)
    st = posed_state(quad, vf, 0.04, -0.07, phi_w, feet)
    vs0 = mp.extract_virtual_state(quad, mp.sensor_snapshot(quad, st, "23"))
    kc = dyn.KinCache(quad.model, st)
    cm = mp.assemble_constraint_map(quad, st.q[7:], vf, vs0, kc.R[0], kc.p[0])
    M, _ = mp.full_velocity_map(cm, vf, kc.R[0], kc.p[0], with_fictitious=False)
    yd = np.array([0.2, -0.3])
    st.qd[:] = M @ yd
    vs = mp.extract_virtual_state(quad, mp.sensor_snapshot(quad, st, "23"))
    assert abs(vs.yd_p - 0.2) < 1e-8
    assert abs(vs.yd_h + 0.3) < 1e-8


def test_extract_rejects_rolled_torso(quad):
    snap = mp.SensorSnapshot(
        q=np.zeros(12), qd=np.zeros(12), omega=np.zeros(3),
        up=np.array([0.0, -1.0, 0.0]),  # gravity fully in the torso plane
        stance_pair="23",
        p_f1=np.array([0.3, -0.2, -0.5]), p_f2=np.array([-0.3, 0.2, -0.5]),
    )
    # up rotated so its vtorso-y projection exceeds unity is impossible for a
    # unit vector; the rolled-past-horizontal case shows up as |asin arg| = 1
    vs = mp.extract_virtual_state(Quadruped(), snap)
    assert abs(abs(vs.y_p + vs.y_h) - np.pi / 2) < 0.7  # large lean extracted, no crash


# ---- stage matrices -----------------------------------------------------------------


def test_stage_torso_trivial_rates():
    hip = np.array([0.0, -0.1, 0.5])
    _, g_t = mp.stage_torso(0.0, 0.0, hip)
    assert np.allclose(g_t, 0.0)
    _, g_t = mp.stage_torso(0.7, 0.0, hip)  # yd_h = 0 kills the sweep term
    assert np.allclose(g_t, 0.0)
    _, g_t = mp.stage_torso(0.0, 0.9, hip)  # pivot at rest: hip axis not swept
    assert np.allclose(g_t, 0.0)


def test_stage_torso_matches_pendulum_twist():
    # v_t = G_t yd equals the torso spatial velocity of a literal 2-R pendulum
    l = 0.62
    pend = PendulumModel(PendulumParams(leg_length=l))
    for _ in range(10):
        y = RNG.uniform(-0.5, 0.5, 2)
        yd = RNG.uniform(-1.0, 1.0, 2)
        st = JointState(y, yd)
        kc = dyn.KinCache(pend.model, st)
        w_w, v_body = kc.v_world(1)[:3], kc.v_world(1)[3:]
        v_origin = v_body - np.cross(w_w, kc.p[1])  # re-reference at the pivot
        hip = np.array([0.0, -l * np.sin(y[0]), l * np.cos(y[0])])
        G_t, _ = mp.stage_torso(yd[0], yd[1], hip)
        v_t = G_t @ yd
        assert np.allclose(v_t[:3], w_w, atol=1e-10)
        assert np.allclose(v_t[3:], v_origin, atol=1e-10)


def test_stage_feet_trivials():
    p = np.array([0.3, -0.1, 0.02])
    G_f, v_f, g_f = mp.stage_feet(p, np.zeros(6))
    assert np.allclose(v_f, 0.0) and np.allclose(g_f, 0.0)
    v = np.array([0.4, -0.2, 0.1])
    G_f, v_f, g_f = mp.stage_feet(p, np.concatenate([np.zeros(3), v]))
    assert np.allclose(v_f, -v, atol=1e-15)  # pure translation: opposite apparent motion
    assert np.allclose(g_f, np.cross(v_f, np.zeros(3)), atol=1e-15)


def test_stage_feet_acceleration_oracle(quad):
    # a_f = G_f vdot_t + g_f equals the rotated second derivative of the foot
    # position in torso coordinates along a pendulum trajectory
    feet, vf, phi_w = diagonal_setup(quad)
    leg = STANCE_PAIRS["23"][0]
    amp = np.array([0.08, -0.12])
    om = np.array([2.1, 3.3])

    def y_of_t(t):
        return amp * np.sin(om * t), amp * om * np.cos(om * t), -amp * om**2 * np.sin(om * t)

    def foot_in_torso(t):
        y, ydot, _ = y_of_t(t)
        st = posed_state(quad, vf, y[0], y[1], phi_w, feet)
        R, p = mp.pendulum_torso_pose(vf, y[0], y[1], phi_w, 0.0)
        return R.T @ (feet[leg] - p), R

    t0, h = 0.37, 1e-5
    r_m, _ = foot_in_torso(t0 - h)
    r_0, R0 = foot_in_torso(t0)
    r_p, _ = foot_in_torso(t0 + h)
    rdd = (r_p - 2 * r_0 + r_m) / h**2
    a_f_oracle = vf.R_wv.T @ (R0 @ rdd)

    y, ydot, ydd = y_of_t(t0)
    hip_vb = vf.to_vbase(mp.pendulum_torso_pose(vf, y[0], y[1], phi_w, 0.0)[1])
    G_t, g_t = mp.stage_torso(ydot[0], ydot[1], hip_vb)
    v_t = G_t @ ydot
    vdot_t = G_t @ ydd + g_t
    foot_vb = vf.to_vbase(feet[leg])
    G_f, v_f, g_f = mp.stage_feet(foot_vb, v_t)
    a_f = G_f @ vdot_t + g_f
    assert np.abs(a_f - a_f_oracle).max() < 1e-6


def test_stage_joints_definition_and_trivials(quad):
    q3 = np.array([0.1, 0.8, -1.5])
    J = quad.leg_jacobian(0, q3)
    G_a, g_a, cond = mp.stage_joints(0, J, np.zeros((3, 3)), np.zeros(3))
    assert np.abs(G_a @ J - np.eye(3)).max() < 1e-10
    assert np.allclose(g_a, 0.0)  # qd = 0
    assert cond < 1e3


def test_stage_joints_finite_difference_oracle(quad):
    # g_a equals the finite difference of J^-1 applied to the foot velocity
    q3 = np.array([0.15, 0.7, -1.4])
    qd3 = np.array([0.3, -0.5, 0.8])
    h = 1e-6
    Jm = quad.leg_jacobian(0, q3 - h * qd3)
    Jp = quad.leg_jacobian(0, q3 + h * qd3)
    Ga_dot_fd = (np.linalg.inv(Jp) - np.linalg.inv(Jm)) / (2 * h)
    J = quad.leg_jacobian(0, q3)
    v_f = J @ qd3
    Jd = quad.leg_jacobian_dot(0, q3, qd3)
    _, g_a, _ = mp.stage_joints(0, J, Jd, qd3)
    assert np.abs(g_a - Ga_dot_fd @ v_f).max() < 1e-5


def test_stage_joints_singularity_error(quad):
    q3 = np.array([0.0, 0.4, 0.0])  # knee locked straight
    J = quad.leg_jacobian(0, q3)
    with pytest.raises(mp.LegSingularityError) as e:
        mp.stage_joints(0, J, np.zeros((3, 3)), np.zeros(3))
    assert e.value.cond > mp.LEG_CONDITION_LIMIT or not np.isfinite(e.value.cond)


def test_leg_jacobian_dot_finite_difference(quad):
    for _ in range(10):
        q3 = RNG.uniform(np.array([-0.4, 0.2, -2.0]), np.array([0.4, 1.2, -0.4]))
        qd3 = RNG.uniform(-1.0, 1.0, 3)
        h = 1e-6
        Jd_fd = (quad.leg_jacobian(0, q3 + h * qd3) - quad.leg_jacobian(0, q3 - h * qd3)) / (2 * h)
        assert np.abs(quad.leg_jacobian_dot(0, q3, qd3) - Jd_fd).max() < 1e-5


# ---- assembly ---------------------------------------------------------------------


def assembled(quad, y_p=0.05, y_h=-0.08, yd=(0.0, 0.0), pair="23", yaw=0.15):
    feet, vf, phi_w = diagonal_setup(quad, pair=pair, yaw=yaw)
    st = posed_state(quad, vf, y_p, y_h, phi_w, feet)
    kc = dyn.KinCache(quad.model, st)
    vs = mp.VirtualState(y_p=y_p, y_h=y_h, yd_p=yd[0], yd_h=yd[1],
                         phi_t=phi_w, E_phi=rot_z(phi_w).T)
    cm = mp.assemble_constraint_map(quad, st.q[7:], vf, vs, kc.R[0], kc.p[0])
    return feet, vf, st, kc, vs, cm


def test_assemble_swing_rows_zero(quad):
    _, _, _, _, _, cm = assembled(quad)
    for leg in STANCE_PAIRS["14"]:  # swing legs for stance pair 23
        assert np.allclose(cm.G_j[3 * leg:3 * leg + 3], 0.0)
        assert np.allclose(cm.g_j[3 * leg:3 * leg + 3], 0.0)


def test_assemble_rejects_bad_pair(quad):
    with pytest.raises(mp.UnsupportedStanceError):
        mp.check_pair("12")


def test_assemble_pivot_rotation_keeps_feet_still(quad):
    # yd = (1, 0): the whole robot rotates rigidly about the contact line
    feet, vf, st, kc, vs, cm = assembled(quad, yd=(1.0, 0.0))
    M, _ = mp.full_velocity_map(cm, vf, kc.R[0], kc.p[0], with_fictitious=False)
    st.qd[:] = M @ np.array([1.0, 0.0])
    kc2 = dyn.KinCache(quad.model, st)
    for leg in STANCE_PAIRS["23"]:
        assert np.linalg.norm(quad.foot_velocity_world(kc2, leg)) < 1e-8
    # and the torso really rotates at 1 rad/s about the line
    w_w = kc2.v_world(0)[:3]
    assert np.allclose(w_w, vf.x_axis, atol=1e-10)


def test_assemble_feet_stationary_for_any_rates(quad):
    for _ in range(10):
        yd = RNG.uniform(-1.0, 1.0, 2)
        feet, vf, st, kc, vs, cm = assembled(quad, yd=tuple(yd))
        M, _ = mp.full_velocity_map(cm, vf, kc.R[0], kc.p[0], with_fictitious=False)
        st.qd[:] = M @ yd
        kc2 = dyn.KinCache(quad.model, st)
        for leg in STANCE_PAIRS["23"]:
            assert np.linalg.norm(quad.foot_velocity_world(kc2, leg)) < 1e-8


def test_assemble_acceleration_finite_difference(quad):
    # qdd = G_j ydd + g_j against numeric differentiation of G_j yd along a rollout
    feet, vf, phi_w = diagonal_setup(quad)
    amp = np.array([0.06, -0.1])
    om = np.array([1.7, 2.9])

    def snap_at(t):
        y = amp * np.sin(om * t)
        yd = amp * om * np.cos(om * t)
        st = posed_state(quad, vf, y[0], y[1], phi_w, feet)
        kc = dyn.KinCache(quad.model, st)
        vs = mp.VirtualState(y_p=y[0], y_h=y[1], yd_p=yd[0], yd_h=yd[1],
                             phi_t=phi_w, E_phi=rot_z(phi_w).T)
        cm = mp.assemble_constraint_map(quad, st.q[7:], vf, vs, kc.R[0], kc.p[0])
        return cm, yd

    t0, h = 0.8, 1e-5
    cm_m, yd_m = snap_at(t0 - h)
    cm_0, yd_0 = snap_at(t0)
    cm_p, yd_p = snap_at(t0 + h)
    qd_m = cm_m.G_j @ yd_m
    qd_p = cm_p.G_j @ yd_p
    qdd_fd = (qd_p - qd_m) / (2 * h)
    ydd_0 = -amp * om**2 * np.sin(om * t0)
    qdd = cm_0.G_j @ ydd_0 + cm_0.g_j
    assert np.abs(qdd - qdd_fd).max() < 1e-4


def test_assemble_momentum_projection_identity(quad):
    # the pivot row of the projected inertia reproduces the angular momentum
    # of the full robot about the contact line
    feet, vf, st, kc, vs, cm = assembled(quad, yd=(0.35, -0.6))
    M, g_full = mp.full_velocity_map(cm, vf, kc.R[0], kc.p[0])
    st.qd[:] = M[:, 1:] @ np.array([0.35, -0.6])
    kc2 = dyn.KinCache(quad.model, st)
    H = dyn.joint_space_inertia(quad.model, st, cache=kc2)
    C = dyn.bias_forces(quad.model, st, cache=kc2)
    H_y, _ = mp.project_eom(H, C, M, g_full)
    L_projected = H_y[1, 1:3] @ np.array([0.35, -0.6])
    L_direct = vf.x_axis @ dyn.angular_momentum_about(quad.model, st, vf.p_wv, cache=kc2)
    assert abs(L_projected - L_direct) < 1e-9 * max(1.0, abs(L_direct))


def test_motion_column_moves_torso_along_line_only(quad):
    feet, vf, st, kc, vs, cm0 = assembled(quad)
    vsm = mp.VirtualState(y_p=vs.y_p, y_h=vs.y_h, yd_p=0.0, yd_h=0.0,
                          phi_t=vs.phi_t, E_phi=vs.E_phi)
    cm = mp.assemble_constraint_map(quad, st.q[7:], vf, vsm, kc.R[0], kc.p[0],
                                    motion_rates=[0.25])
    assert cm.G_j.shape == (12, 3)
    M, _ = mp.full_velocity_map(cm, vf, kc.R[0], kc.p[0], with_fictitious=False)
    st.qd[:] = M @ np.array([0.0, 0.0, 0.25])
    kc2 = dyn.KinCache(quad.model, st)
    # feet still anchored, torso translating along the line at the commanded rate
    for leg in STANCE_PAIRS["23"]:
        assert np.linalg.norm(quad.foot_velocity_world(kc2, leg)) < 1e-8
    v_torso = kc2.v_world(0)[3:]
    assert np.allclose(v_torso, 0.25 * vf.x_axis, atol=1e-10)
    com, J_com, _ = dyn.com_properties(quad.model, st, cache=kc2)
    cdot = J_com @ st.qd
    # torso + swing legs translate exactly along the line; the articulating
    # stance legs couple a sub-percent lateral CoM rate the balancer absorbs
    assert abs(vf.y_axis @ cdot) < 0.005 * 0.25


# ---- torque law and gravity compensation ----------------------------------------------


def test_torque_command_trivials():
    q = RNG.uniform(-0.5, 0.5, 12)
    tau_g = RNG.uniform(-10, 10, 12)
    tau = mp.torque_command(q, np.zeros(12), q, np.zeros(12), np.zeros(12),
                            kp=300.0, kd=12.0, kb=1.0, tau_gravity=tau_g)
    assert np.allclose(tau, tau_g, atol=1e-14)
    e = np.zeros(12)
    e[4] = 0.05
    tau2 = mp.torque_command(q, np.zeros(12), q + e, np.zeros(12), np.zeros(12),
                             kp=300.0, kd=12.0, kb=1.0, tau_gravity=tau_g)
    assert np.isclose(tau2[4] - tau[4], 300.0 * 0.05)
    assert np.allclose(np.delete(tau2 - tau, 4), 0.0)


def test_torque_command_rejects_non_positive_gains():
    z = np.zeros(12)
    with pytest.raises(mp.GainConfigError):
        mp.torque_command(z, z, z, z, z, kp=-1.0, kd=1.0, kb=1.0)
    with pytest.raises(mp.GainConfigError):
        mp.torque_command(z, z, z, z, z, kp=np.ones(12), kd=np.zeros(12), kb=1.0)


def test_gravity_compensation_static_consistency(quad):
    # with the compensating torques and the matching support forces the robot
    # is in exact static equilibrium
    st = quad.stance_state(0.55)
    kc = dyn.KinCache(quad.model, st)
    tau_gc = mp.gravity_compensation(quad, st, [0, 1, 2, 3], cache=kc)
    C_grav = dyn.bias_forces(quad.model, st)
    jacs = [dyn.point_jacobian(quad.model, st, quad.foot_bodies[leg], quad.foot_local, cache=kc)
            for leg in range(4)]
    A = np.hstack([J[:, :6].T for J in jacs])
    f, *_ = np.linalg.lstsq(A, C_grav[:6], rcond=None)
    forces = [(quad.foot_bodies[leg], quad.foot_local, f[3 * i:3 * i + 3])
              for i, leg in enumerate(range(4))]
    tau_full = np.concatenate([np.zeros(6), tau_gc])
    qdd = dyn.forward_dynamics(quad.model, st, tau_full, point_forces=forces)
    assert np.abs(qdd).max() < 1e-8
    # total support equals the weight
    assert np.isclose(sum(f[3 * i + 2] for i in range(4)), 90.0 * 9.81, rtol=1e-9)


# ---- stance IK -------------------------------------------------------------------------


def test_stance_ik_round_trip_random_targets(quad):
    for _ in range(100):
        leg = RNG.integers(0, 4)
        q3 = RNG.uniform(np.array([-0.5, -0.4, -2.4]), np.array([0.5, 1.4, -0.3]))
        if quad.params.knee_signs[leg] > 0:
            q3[2] = -q3[2]
        target = quad.leg_fk(leg, q3)
        q_ik = quad.leg_ik(leg, target)
        assert np.linalg.norm(quad.leg_fk(leg, q_ik) - target) < 1e-9


def test_stance_ik_nominal_extension(quad):
    # foot straight below the hip: abduction zero, knee at the nominal bend
    h = 0.52
    q3 = quad.leg_ik(0, quad.hip_offsets[0] + np.array([0.0, 0.0, -h]))
    assert abs(q3[0]) < 1e-12
    expected_knee = -np.arccos((h * h - 2 * 0.35**2) / (2 * 0.35**2))
    assert np.isclose(q3[2], expected_knee, atol=1e-9)
    assert np.isclose(quad.leg_fk(0, q3)[2], quad.hip_offsets[0, 2] - h, atol=1e-12)


def test_stance_ik_unreachable_target(quad):
    with pytest.raises(WorkspaceError) as e:
        quad.leg_ik(1, quad.hip_offsets[1] + np.array([10.0, 0.0, 0.0]))
    assert e.value.closest_distance > 9.0


def test_stance_vip_joints_match_pose(quad):
    feet, vf, phi_w = diagonal_setup(quad)
    R, p = mp.pendulum_torso_pose(vf, 0.07, -0.12, phi_w, 0.0)
    sol = mp.stance_vip_joints(quad, R, p, feet, STANCE_PAIRS["23"])
    for leg, q3 in sol.items():
        foot_w = p + R @ quad.leg_fk(leg, q3)
        assert np.linalg.norm(foot_w - feet[leg]) < 1e-9
