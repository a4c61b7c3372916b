"""Kinematics and dynamics algorithms on RobotModel trees.

Inertia via the composite-rigid-body algorithm, bias forces via recursive
Newton-Euler, forward dynamics via a dense symmetric solve. All public
functions are pure; a KinCache can be shared between calls that use the
same (model, state) to avoid recomputing the kinematics pass.

The recursions run blockwise on (rotation, offset) pairs instead of full
6x6 spatial transforms; this file is the 1 kHz hot path of the simulator,
so the 3-vector cross products are inlined.
"""

import numpy as np

from .model import JointType, ModelError
from .spatial import skew


def _cross(a, b):
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])




class KinCache:
    """Per-(model, state) kinematics data: world poses, transforms, velocities.

    R, p, E_up, r_up and v are (n, ...) arrays filled by the compiled
    kinematics pass; rows index bodies.
    """

    __slots__ = ("model", "state", "R", "p", "E_np", "r_np", "v_np", "_v_world")

    def __init__(self, model, state):
        model.check_state(state)
        self.model = model
        self.state = state
        from . import fastdyn

        self.R, self.p, self.E_np, self.r_np, self.v_np = fastdyn.kinpass(model, state)
        self._v_world = [None] * model.n_bodies

    @property
    def v(self):
        return self.v_np

    def v_world(self, i):
        """[omega_w; v_origin_w] of body i."""
        vw = self._v_world[i]
        if vw is None:
            Ri = self.R[i]
            vw = np.concatenate([Ri @ self.v_np[i, :3], Ri @ self.v_np[i, 3:]])
            self._v_world[i] = vw
        return vw

    def point_world(self, body, point_local):
        return self.p[body] + self.R[body] @ np.asarray(point_local, dtype=float)

    def point_velocity_world(self, body, point_local):
        vw = self.v_world(body)
        r = self.R[body] @ np.asarray(point_local, dtype=float)
        return vw[3:] + _cross(vw[:3], r)


def forward_kinematics(model, state, cache=None):
    """World pose (R, p) and world spatial velocity [omega; v_origin] per body."""
    kc = cache or KinCache(model, state)
    return [(kc.R[i], kc.p[i], kc.v_world(i)) for i in range(model.n_bodies)]


def point_jacobian(model, state, body, point_local, cache=None):
    """3 x nv Jacobian of a body-fixed point's world linear velocity."""
    kc = cache or KinCache(model, state)
    if not 0 <= body < model.n_bodies:
        raise ModelError(f"unknown body index {body}")
    pt = kc.point_world(body, point_local)
    J = np.zeros((3, model.nv))
    i = body
    while i >= 0:
        joint = model.joints[i]
        vi = model.v_index[i]
        if joint.jtype is JointType.FLOATING:
            R0 = kc.R[i]
            J[:, vi:vi + 3] = -skew(pt - kc.p[i]) @ R0
            J[:, vi + 3:vi + 6] = R0
        elif joint.jtype is JointType.REVOLUTE:
            a_w = kc.R[i] @ joint.axis
            J[:, vi] = _cross(a_w, pt - kc.p[i])
        else:
            J[:, vi] = kc.R[i] @ joint.axis
        i = joint.parent
    return J


def joint_space_inertia(model, state, cache=None):
    """nv x nv symmetric positive definite joint-space inertia matrix."""
    from . import fastdyn

    kc = cache or KinCache(model, state)
    return fastdyn.crba(model, kc)


def inverse_dynamics(model, state, qdd, gravity=None, cache=None):
    """Generalized forces for the given accelerations (recursive Newton-Euler)."""
    from . import fastdyn

    kc = cache or KinCache(model, state)
    g = model.gravity if gravity is None else np.asarray(gravity, dtype=float)
    return fastdyn.rnea(model, kc, state.qd, np.asarray(qdd, dtype=float), g)


def bias_forces(model, state, gravity=None, cache=None):
    """Coriolis + centrifugal + gravity terms C(q, qd): inverse dynamics at qdd = 0."""
    return inverse_dynamics(model, state, np.zeros(model.nv), gravity=gravity, cache=cache)


def com_properties(model, state, cache=None):
    """Total CoM position, its 3 x nv Jacobian, and total mass."""
    if model.total_mass <= 0.0:
        raise ModelError("total mass must be positive")
    kc = cache or KinCache(model, state)
    com = np.zeros(3)
    J = np.zeros((3, model.nv))
    for i, b in enumerate(model.bodies):
        if b.mass == 0.0:
            continue
        com += b.mass * kc.point_world(i, b.com)
        J += b.mass * point_jacobian(model, state, i, b.com, cache=kc)
    com /= model.total_mass
    J /= model.total_mass
    return com, J, model.total_mass


def angular_momentum_about(model, state, point_world, cache=None):
    """Total angular momentum (world coords) about a fixed inertial point."""
    kc = cache or KinCache(model, state)
    P = np.asarray(point_world, dtype=float)
    L = np.zeros(3)
    for i, b in enumerate(model.bodies):
        if b.mass == 0.0 and not b.inertia.any():
            continue
        w = kc.v_world(i)[:3]
        c_w = kc.point_world(i, b.com)
        v_c = kc.point_velocity_world(i, b.com)
        I_w = kc.R[i] @ b.inertia @ kc.R[i].T
        L += I_w @ w + b.mass * _cross(c_w - P, v_c)
    return L


def forward_dynamics(model, state, tau=None, point_forces=(), cache=None):
    """Solve H qdd = tau_gen - C for qdd.

    tau is a full nv generalized-force vector (zeros on the floating-base
    rows for an unactuated base). point_forces is a sequence of
    (body, point_local, force_world) tuples added through point Jacobians.
    """
    kc = cache or KinCache(model, state)
    H = joint_space_inertia(model, state, cache=kc)
    C = bias_forces(model, state, cache=kc)
    rhs = -C
    if tau is not None:
        rhs = rhs + tau
    for body, point_local, force_world in point_forces:
        J = point_jacobian(model, state, body, point_local, cache=kc)
        rhs = rhs + J.T @ force_world
    return np.linalg.solve(H, rhs)
