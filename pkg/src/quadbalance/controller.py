"""Per-tick balance controller for the quadruped.

High level (250 Hz): extract the virtual state, assemble the kinematic
mapping, project the robot EoM onto the extended pendulum coordinates,
schedule the four-term gains from the per-tick (Y1, Y2), solve the combined
balance + motion system, and produce the low-level tracking targets
(q_vip, qd_vip, qdd_bal, gravity compensation). Low level (1 kHz): joint PD
on the held targets plus the balance-acceleration feedforward.
"""

from dataclasses import dataclass, field

import numpy as np

from . import balancer as bal
from . import mapping as mp
from .dynamics import angular_momentum_about, bias_forces, com_properties, joint_space_inertia
from .robots import STANCE_PAIRS, SWING_FOR


class ControllerError(RuntimeError):
    pass


@dataclass
class ControlConfig:
    poles: tuple = (-2.0, -3.0, -4.0, -5.0)
    kp: float = 400.0
    kd: float = 15.0
    kb: float = 1.0
    control_dt: float = 0.004
    torque_limit: float = 150.0
    motion_kp: float = 16.0
    motion_kd: float = 8.0
    qdd_limit: float = 400.0   # clamp on commanded joint accelerations
    lean_limit: float = 0.35   # rad, sanity bound on the hip reference


@dataclass
class TickRecord:
    t: float
    L: float
    Ld: float
    Ldd: float
    q2: float
    q2_ref: float
    lddd: float
    w_h: float
    cond_Gj: float
    y_p: float
    y_h: float
    yd_p: float
    yd_h: float


@dataclass
class MotionReference:
    """Along-line torso position command (x in vbase coordinates)."""

    x: float = 0.0
    xd: float = 0.0
    xdd: float = 0.0


class BalanceController:
    """Stateful controller; one instance owns one robot's control loop."""

    def __init__(self, robot, config: ControlConfig | None = None,
                 y_h_reference: bal.ReferenceTrajectory | None = None):
        self.robot = robot
        self.cfg = config or ControlConfig()
        self.y_h_reference = y_h_reference
        self.mode = "full_stance"
        self.stance_pair = None
        self.q_hold = None
        self.swing_joint_targets = {}
        self.swing_world_targets = {}
        self.motion = MotionReference()
        self.records = []
        self.last_virtual_state = None
        self.last_vframe = None
        # held low-level targets
        self._q_vip = np.zeros(12)
        self._qd_vip = np.zeros(12)
        self._qdd_bal = np.zeros(12)
        self._tau_gc = np.zeros(12)

    # ---- mode switching -----------------------------------------------------

    def set_full_stance(self, q12_hold):
        self.mode = "full_stance"
        self.stance_pair = None
        self.q_hold = np.asarray(q12_hold, dtype=float).copy()

    def set_two_leg(self, stance_pair, state, world):
        """Activate balancing on the given diagonal pair, holding station."""
        mp.check_pair(stance_pair)
        self.mode = "two_leg"
        self.stance_pair = stance_pair
        vf = mp.build_virtual_frame(self.robot, state, stance_pair, cache=world.kc)
        self.motion = MotionReference(x=vf.x_along(world.kc.p[0]))
        self.last_vframe = vf

    def set_swing_joint_targets(self, targets):
        self.swing_joint_targets = dict(targets)
        self.swing_world_targets = {}

    def set_swing_world_targets(self, targets):
        self.swing_world_targets = dict(targets)

    def set_motion_reference(self, x, xd=0.0, xdd=0.0):
        self.motion = MotionReference(x=x, xd=xd, xdd=xdd)

    # ---- control ticks --------------------------------------------------------

    def reference_value(self, t):
        if self.y_h_reference is None:
            return 0.0
        v = self.y_h_reference.value(t)
        if abs(v) > self.cfg.lean_limit:
            raise ControllerError(f"hip reference {v:.3f} rad beyond lean limit")
        return v

    def tick(self, t, state, world):
        if self.mode == "full_stance":
            self._tick_full_stance(state, world)
        else:
            self._tick_two_leg(t, state, world)

    def _tick_full_stance(self, state, world):
        self._q_vip = self.q_hold.copy() if self.q_hold is not None else state.q[7:].copy()
        self._qd_vip = np.zeros(12)
        self._qdd_bal = np.zeros(12)
        self._tau_gc = mp.gravity_compensation(self.robot, state, [0, 1, 2, 3], cache=world.kc)

    def _tick_two_leg(self, t, state, world):
        robot, cfg = self.robot, self.cfg
        kc = world.kc
        pair = self.stance_pair
        legs = STANCE_PAIRS[pair]
        q12 = state.q[7:]
        qd12 = state.qd[6:]

        snap = mp.sensor_snapshot(robot, state, pair, cache=kc)
        vs = mp.extract_virtual_state(robot, snap)
        vf = mp.build_virtual_frame(robot, state, pair, cache=kc)
        self.last_virtual_state = vs
        self.last_vframe = vf

        # torso rate along the line for the motion channel
        v_torso_w = kc.v_world(0)[3:]
        x_meas = vf.x_along(kc.p[0])
        xd_meas = float(vf.x_axis @ v_torso_w)

        cm = mp.assemble_constraint_map(robot, q12, vf, vs, kc.R[0], kc.p[0],
                                        motion_rates=[xd_meas])
        M, g_full = mp.full_velocity_map(cm, vf, kc.R[0], kc.p[0])
        H = joint_space_inertia(robot.model, state, cache=kc)
        C = bias_forces(robot.model, state, cache=kc)
        H_y, C_y = mp.project_eom(H, C, M, g_full)
        eom = bal.GeneralizedEom(H=H_y, C=C_y, n_motion=1, g=-robot.model.gravity[2])

        # plant state of the real robot about the contact line
        com, J_com, mass = com_properties(robot.model, state, cache=kc)
        g = -robot.model.gravity[2]
        c_rel = com - vf.p_wv
        c_y = float(vf.y_axis @ c_rel)
        L = float(vf.x_axis @ angular_momentum_about(robot.model, state, vf.p_wv, cache=kc))
        Ld = -mass * g * c_y
        Ldd = -mass * g * float(vf.y_axis @ (J_com @ state.qd))

        # virtual-model gains from the projected EoM
        H_v = H_y[1:3, 1:3]
        J_y = (vf.R_wv.T @ J_com)[1, :] @ M[:, 1:3]
        G_v = J_y[1] - (H_v[0, 1] / H_v[0, 0]) * J_y[0]
        if abs(G_v) < 1e-9:
            raise ControllerError("virtual model unbalanceable: velocity gain ~ 0")
        Y1 = -J_y[0] / (H_v[0, 0] * G_v)
        Y2 = -1.0 / (mass * g * G_v)
        if not (Y1 > 0.0 and Y2 < 0.0):
            raise ControllerError(f"plant gains out of regime: Y1={Y1:.4g}, Y2={Y2:.4g}")

        q2_ref = self.reference_value(t)
        gains = bal.design_gains(Y1, Y2, cfg.poles)
        from .pendulum import BalancePlantState

        ps = BalancePlantState(L=L, Ld=Ld, Ldd=Ldd, q2=vs.y_h, Y1=Y1, Y2=Y2)
        lddd = bal.balance_step(ps, gains, q2_ref)

        m = self.motion
        ydd_m = m.xdd + cfg.motion_kp * (m.x - x_meas) + cfg.motion_kd * (m.xd - xd_meas)
        sol = bal.solve_combined(eom, lddd, [ydd_m])

        ydd = np.array([sol.ydd_p, sol.ydd_h, ydd_m])
        qdd_bal = cm.G_j @ ydd + cm.g_j
        np.clip(qdd_bal, -cfg.qdd_limit, cfg.qdd_limit, out=qdd_bal)
        qd_vip = cm.G_j @ cm.ydot

        # pendulum-consistent configuration: stance legs from IK at the
        # nominal pose, swing legs from the scenario targets
        R_nom, p_nom = mp.pendulum_torso_pose(vf, vs.y_p, vs.y_h, vs.phi_t, m.x)
        feet_w = {leg: robot.foot_position_world(kc, leg) for leg in legs}
        q_vip = q12.copy()
        ik = mp.stance_vip_joints(robot, R_nom, p_nom, feet_w, legs)
        for leg, q3 in ik.items():
            q_vip[3 * leg:3 * leg + 3] = q3
        for leg in SWING_FOR[pair]:
            sl = slice(3 * leg, 3 * leg + 3)
            if leg in self.swing_world_targets:
                q_vip[sl] = robot.leg_ik(leg, R_nom.T @ (self.swing_world_targets[leg] - p_nom))
            elif leg in self.swing_joint_targets:
                q_vip[sl] = self.swing_joint_targets[leg]
            qd_vip[sl] = 0.0
            qdd_bal[sl] = 0.0

        self._q_vip = q_vip
        self._qd_vip = qd_vip
        self._qdd_bal = qdd_bal
        self._tau_gc = mp.gravity_compensation(self.robot, state, list(legs), cache=kc)
        self.records.append(
            TickRecord(t=t, L=L, Ld=Ld, Ldd=Ldd, q2=vs.y_h, q2_ref=q2_ref,
                       lddd=lddd, w_h=sol.w_h,
                       cond_Gj=float(np.linalg.cond(cm.G_j[:, :2], 2)),
                       y_p=vs.y_p, y_h=vs.y_h, yd_p=vs.yd_p, yd_h=vs.yd_h)
        )

    def low_level_torques(self, state):
        """1 kHz joint PD on the held targets plus feedforward terms."""
        tau = mp.torque_command(state.q[7:], state.qd[6:], self._q_vip, self._qd_vip,
                                self._qdd_bal, self.cfg.kp, self.cfg.kd, self.cfg.kb,
                                self._tau_gc)
        return np.clip(tau, -self.cfg.torque_limit, self.cfg.torque_limit)
