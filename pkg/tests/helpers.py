"""Shared test utilities: random states, velocity-space perturbations, integrators."""

import numpy as np

from quadbalance.dynamics import KinCache, bias_forces, forward_dynamics, joint_space_inertia
from quadbalance.model import JointState, JointType
from quadbalance.spatial import quat_integrate, quat_normalize, quat_to_rot


def random_state(model, rng, q_scale=0.6, qd_scale=0.8):
    q = np.zeros(model.nq)
    qd = qd_scale * rng.standard_normal(model.nv)
    if model.floating:
        q[0:3] = rng.standard_normal(3)
        q[3:7] = quat_normalize(rng.standard_normal(4))
        q[7:] = q_scale * rng.standard_normal(model.nq - 7)
    else:
        q[:] = q_scale * rng.standard_normal(model.nq)
    return JointState(q, qd)


def advance_positions(model, state, dq, scale=1.0):
    """Move positions along velocity-space direction dq (length nv)."""
    q = state.q.copy()
    if model.floating:
        omega = dq[0:3] * scale
        v = dq[3:6] * scale
        R = quat_to_rot(q[3:7])
        q[0:3] += R @ v
        q[3:7] = quat_integrate(q[3:7], omega, 1.0)
        q[7:] += dq[6:] * scale
    else:
        q += dq * scale
    return JointState(q, state.qd.copy())


def fd_point_jacobian(model, state, body, point_local, h=1e-6):
    """Central finite differences of a point position over velocity coordinates."""
    J = np.zeros((3, model.nv))
    for k in range(model.nv):
        e = np.zeros(model.nv)
        e[k] = 1.0
        plus = KinCache(model, advance_positions(model, state, e, h))
        minus = KinCache(model, advance_positions(model, state, e, -h))
        J[:, k] = (plus.point_world(body, point_local) - minus.point_world(body, point_local)) / (2 * h)
    return J


def semi_implicit_step(model, state, tau, dt, point_forces=()):
    qdd = forward_dynamics(model, state, tau, point_forces=point_forces)
    qd = state.qd + dt * qdd
    nxt = advance_positions(model, JointState(state.q, qd), qd, dt)
    return JointState(nxt.q, qd)


def rk4_step(model, state, tau, dt):
    """Classic RK4 for fixed-base models (plain vector q)."""

    def f(q, qd):
        st = JointState(q, qd)
        return qd, forward_dynamics(model, st, tau)

    q, qd = state.q, state.qd
    k1q, k1v = f(q, qd)
    k2q, k2v = f(q + 0.5 * dt * k1q, qd + 0.5 * dt * k1v)
    k3q, k3v = f(q + 0.5 * dt * k2q, qd + 0.5 * dt * k2v)
    k4q, k4v = f(q + dt * k3q, qd + dt * k3v)
    return JointState(
        q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
        qd + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
    )


def kinetic_energy(model, state):
    H = joint_space_inertia(model, state)
    return 0.5 * state.qd @ H @ state.qd
