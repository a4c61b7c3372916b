"""Deterministic fixed-step simulation of the floating-base quadruped.

Semi-implicit Euler at 1 kHz: forward dynamics with contact and disturbance
wrenches, velocity update first, then positions (base quaternion by the
exact exponential, renormalized). Bit-determinism follows from fixed
iteration order and pure float64 arithmetic; two runs of the same
configuration produce identical trajectories.
"""

from dataclasses import dataclass, field

import numpy as np

from .contact import ContactModel, FlatGround, contact_force
from .dynamics import KinCache, bias_forces, joint_space_inertia, point_jacobian
from .spatial import quat_integrate


class SimulationBlowUp(RuntimeError):
    def __init__(self, t_last, speed):
        super().__init__(f"simulation diverged at t={t_last:.3f} s (|qd|_max = {speed:.3e})")
        self.t_last = t_last


@dataclass(frozen=True)
class Disturbance:
    start: float
    duration: float
    force: np.ndarray                  # world frame, N
    point: np.ndarray = field(default_factory=lambda: np.zeros(3))  # base frame

    def active(self, t):
        return self.start <= t < self.start + self.duration


@dataclass
class DisturbanceSchedule:
    items: tuple = ()

    def __post_init__(self):
        items = sorted(self.items, key=lambda d: d.start)
        for a, b in zip(items, items[1:]):
            if a.start + a.duration > b.start + 1e-12:
                raise ValueError(f"disturbance windows overlap at t={b.start}")
        self.items = tuple(items)

    def wrench_at(self, t):
        """Active (force_world, point_base) or None."""
        for d in self.items:
            if d.active(t):
                return d.force, d.point
        return None


class SimWorld:
    """Owns the quadruped state and advances physics one fixed step at a time."""

    def __init__(self, robot, state, contact: ContactModel | None = None,
                 surface=None, disturbances: DisturbanceSchedule | None = None,
                 dt=1e-3, torque_limit=150.0, qd_limit=1e3):
        self.robot = robot
        self.state = state
        self.contact = contact or ContactModel()
        self.surface = surface or FlatGround()
        self.disturbances = disturbances or DisturbanceSchedule()
        self.dt = dt
        self.torque_limit = torque_limit
        self.qd_limit = qd_limit
        self.t = 0.0
        self.foot_forces = np.zeros((4, 3))
        self.kc = KinCache(robot.model, state)

    def apply_disturbance(self, t):
        """World wrench entry for the active disturbance window (zero outside)."""
        w = self.disturbances.wrench_at(t)
        if w is None:
            return np.zeros(3), np.zeros(3)
        return w[0], w[1]

    def step(self, tau12):
        """Advance one fixed step under the given joint torques.

        The contact spring and the saturated (sliding) friction are applied
        explicitly; the stiff viscous parts, normal damping and sticking
        friction, enter the velocity update implicitly. At v_reg = 1e-3 the
        sticking coefficient mu N / v_reg is ~1e5 N s/m, far beyond the
        explicit stability bound at 1 ms, and the implicit form is
        unconditionally stable without changing the modeled force law.
        Feet whose implied normal force turns negative are released and the
        velocity solve is repeated (deterministic active-set loop).
        """
        robot, st, dt = self.robot, self.state, self.dt
        cmod = self.contact
        kc = self.kc
        tau = np.zeros(robot.model.nv)
        tau[6:] = np.clip(tau12, -self.torque_limit, self.torque_limit)

        self.foot_forces[:] = 0.0
        active = []  # (leg, J, F_explicit, D_diag)
        for leg in range(4):
            p = robot.foot_position_world(kc, leg)
            v = robot.foot_velocity_world(kc, leg)
            z_s = self.surface.support_height(p[0], p[1])
            penetration = z_s + cmod.foot_radius - p[2]
            if penetration <= 0.0:
                continue
            n_test = cmod.stiffness * penetration - cmod.damping * v[2]
            if n_test <= 0.0:
                continue
            J = point_jacobian(robot.model, st, robot.foot_bodies[leg], robot.foot_local, cache=kc)
            F_exp = np.array([0.0, 0.0, cmod.stiffness * penetration])
            D = np.array([0.0, 0.0, cmod.damping])
            v_t = np.hypot(v[0], v[1])
            if v_t > cmod.v_reg:
                F_exp[:2] = -cmod.friction * n_test * v[:2] / v_t
            else:
                D[:2] = cmod.friction * n_test / cmod.v_reg
            active.append([leg, J, F_exp, D])

        H = joint_space_inertia(robot.model, st, cache=kc)
        rhs0 = tau - bias_forces(robot.model, st, cache=kc)
        force, point = self.apply_disturbance(self.t)
        if force.any():
            rhs0 = rhs0 + point_jacobian(robot.model, st, 0, point, cache=kc).T @ force

        implied = []
        for _ in range(4):
            H_eff = H.copy()
            rhs = H @ st.qd + dt * rhs0
            for leg, J, F_exp, D in active:
                H_eff += dt * (J.T * D) @ J
                rhs += dt * (J.T @ F_exp)
            qd = np.linalg.solve(H_eff, rhs)
            implied = [(leg, F_exp - D * (J @ qd)) for leg, J, F_exp, D in active]
            if all(F[2] >= 0.0 for _, F in implied):
                break
            keep = {leg for leg, F in implied if F[2] >= 0.0}
            active = [a for a in active if a[0] in keep]
        for leg, F in implied:
            self.foot_forces[leg] = F
        st.q[0:3] += dt * (kc.R[0] @ qd[3:6])
        st.q[3:7] = quat_integrate(st.q[3:7], qd[0:3], dt)
        st.q[7:] += dt * qd[6:]
        st.qd = qd
        self.t += dt
        self.kc = KinCache(robot.model, st)

        speed = np.abs(qd).max()
        if speed > self.qd_limit:
            raise SimulationBlowUp(self.t, speed)
        return st

    def swing_contact_forces(self, stance_pair):
        """Normal forces on the legs not in the given stance pair."""
        from .robots import SWING_FOR

        return {leg: self.foot_forces[leg][2] for leg in SWING_FOR[stance_pair]}
