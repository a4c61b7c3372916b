"""Balance plant of the 2-DoF virtual inverted pendulum.

Conventions: the contact line is the +x axis of an inertial frame with z up
and y completing the right-handed triad. Both pendulum joints rotate about
+x; the plant momentum L is the x component of angular momentum about the
pivot. Gravity acts along -z, so Ldot = -m*g*c_y where c_y is the CoM
offset from the contact line.

The velocity gain is the momentum-conserving change in horizontal CoM
velocity per unit hip-rate change,

    G_v = c'_{y,2} - (H12/H11) * c'_{y,1},

with c'_{y,i} the columns of the CoM-Jacobian y row and H the 2x2 pendulum
inertia. The toppling time constant comes from the frozen-configuration
linearized fall, c_y(t) ~ exp(t/T_c):

    T_c = sqrt(-H11 / (m*g*c'_{y,1}))   (c'_{y,1} = -c_z at the pivot).

These definitions make the plant coupling qd2 = Y1*L + Y2*Lddot exact at
the linearization point, with Y1 = 1/(m*g*T_c^2*G_v) and Y2 = -1/(m*g*G_v).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import KinCache, angular_momentum_about, com_properties, joint_space_inertia
from .model import JointState


class NonInvertedError(ValueError):
    """CoM at or below the pivot: no toppling time constant exists."""


class UnbalanceableError(ValueError):
    """G_v = 0: hip motion has no authority over the horizontal CoM."""


@dataclass
class BalancePlantState:
    L: float
    Ld: float
    Ldd: float
    q2: float
    Y1: float
    Y2: float


def _pendulum_quantities(pend, q):
    state = JointState(np.asarray(q, dtype=float), np.zeros(2))
    kc = KinCache(pend.model, state)
    H = joint_space_inertia(pend.model, state, cache=kc)
    com, J_com, mass = com_properties(pend.model, state, cache=kc)
    return H, com, J_com, mass


def velocity_gain(pend, q):
    """G_v at configuration q; raises UnbalanceableError only downstream."""
    H, _, J, _ = _pendulum_quantities(pend, q)
    if H[0, 0] <= 0.0:
        raise ValueError("singular pivot inertia H11")
    return J[1, 1] - (H[0, 1] / H[0, 0]) * J[1, 0]


def toppling_time_constant(pend, q):
    """T_c of the frozen-configuration fall, linearized about the contact line."""
    H, com, J, mass = _pendulum_quantities(pend, q)
    g = pend.g
    # J[1,0] = d c_y / d q1 = -c_z for a pivot on the line
    if J[1, 0] >= 0.0 or com[2] <= 0.0:
        raise NonInvertedError(
            f"CoM height {com[2]:.4f} m not above the pivot; configuration is not inverted"
        )
    return float(np.sqrt(-H[0, 0] / (mass * g * J[1, 0])))


def plant_gains(pend, q):
    """Configuration-dependent plant gains (Y1, Y2)."""
    H, com, J, mass = _pendulum_quantities(pend, q)
    g = pend.g
    G_v = J[1, 1] - (H[0, 1] / H[0, 0]) * J[1, 0]
    if abs(G_v) < 1e-12:
        raise UnbalanceableError(
            "velocity gain is zero: the configuration cannot move the CoM over the pivot"
        )
    # identically 1/(m g T_c^2 G_v); written via the CoM Jacobian so the
    # identity with toppling_time_constant holds to machine precision
    Y1 = -J[1, 0] / (H[0, 0] * G_v)
    Y2 = -1.0 / (mass * g * G_v)
    return float(Y1), float(Y2)


def extract_plant_state(pend, q, qd):
    """(L, Ldot, Lddot, q2) plus gains at the current configuration.

    L is taken about the pivot axis; Ldot is the gravitational moment
    -m*g*c_y; Lddot differentiates it analytically through the CoM Jacobian
    (no numeric differentiation).
    """
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    H, com, J, mass = _pendulum_quantities(pend, q)
    g = pend.g
    L = float(H[0, :] @ qd)
    Ld = float(-mass * g * com[1])
    Ldd = float(-mass * g * (J[1, :] @ qd))
    Y1, Y2 = plant_gains(pend, q)
    return BalancePlantState(L=L, Ld=Ld, Ldd=Ldd, q2=float(q[1]), Y1=Y1, Y2=Y2)


def momentum_about_pivot(pend, q, qd):
    """Cross-check path: x component of the spatial angular momentum sum."""
    state = JointState(np.asarray(q, dtype=float), np.asarray(qd, dtype=float))
    return float(angular_momentum_about(pend.model, state, np.zeros(3))[0])


def plant_state_space(Y1, Y2):
    """State-space realization of the balance plant.

    States (L, Ldot, Lddot, q2), input the jerk command on L, output q2.
    The output coupling integrates qd2 = Y1*L + Y2*Lddot.
    """
    A = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [Y1, 0.0, Y2, 0.0],
        ]
    )
    B = np.array([[0.0], [0.0], [1.0], [0.0]])
    C = np.array([[0.0, 0.0, 0.0, 1.0]])
    D = np.zeros((1, 1))
    return A, B, C, D


def plant_transmission_zeros(Y1, Y2):
    """Finite transmission zeros of the plant (the non-minimum-phase pair).

    Computed from the generalized eigenvalue pencil of the Rosenbrock system
    matrix, not from the closed-form factorization, so it can serve as an
    independent check of the +1/T_c right-half-plane zero.
    """
    A, B, C, D = plant_state_space(Y1, Y2)
    n = A.shape[0]
    M = np.block([[A, B], [C, D]])
    N = np.zeros_like(M)
    N[:n, :n] = np.eye(n)
    eig = scipy.linalg.eigvals(M, N)
    finite = eig[np.isfinite(eig)]
    return np.sort_complex(finite)
