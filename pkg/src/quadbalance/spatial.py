"""Spatial (6-D) vector algebra for rigid-body dynamics.

Spatial vectors are ordered [angular; linear]. Motion transforms follow the
convention X_ba = motion_transform(R, p) where (R, p) is the pose of frame B
expressed in frame A (R columns are B's axes in A, p is B's origin in A),
so that v_B = X_ba @ v_A.
"""

import numpy as np

__all__ = [
    "skew",
    "rot_x",
    "rot_y",
    "rot_z",
    "axis_angle_rot",
    "motion_transform",
    "force_transform",
    "crm",
    "crf",
    "spatial_inertia",
    "quat_to_rot",
    "rot_to_quat",
    "quat_mul",
    "quat_normalize",
    "quat_integrate",
]


def skew(v):
    """3x3 cross-product matrix: skew(a) @ b == np.cross(a, b)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rot_x(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle_rot(axis, angle):
    """Rodrigues rotation about a unit axis."""
    a = np.asarray(axis, dtype=float)
    K = skew(a)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def motion_transform(R, p):
    """Motion-vector coordinate transform X_ba from the pose (R, p) of B in A."""
    X = np.zeros((6, 6))
    Rt = R.T
    X[:3, :3] = Rt
    X[3:, 3:] = Rt
    X[3:, :3] = -Rt @ skew(p)
    return X


def force_transform(R, p):
    """Force-vector coordinate transform X*_ba; equals motion_transform(R,p)^-T."""
    X = np.zeros((6, 6))
    Rt = R.T
    X[:3, :3] = Rt
    X[3:, 3:] = Rt
    X[:3, 3:] = -Rt @ skew(p)
    return X


def crm(v):
    """Spatial cross product operator for motion vectors (v x m)."""
    w, vo = v[:3], v[3:]
    W = skew(w)
    M = np.zeros((6, 6))
    M[:3, :3] = W
    M[3:, 3:] = W
    M[3:, :3] = skew(vo)
    return M


def crf(v):
    """Spatial cross product operator for force vectors (v x* f)."""
    return -crm(v).T


def spatial_inertia(mass, com, inertia_com):
    """6x6 spatial inertia from mass, CoM offset and rotational inertia about the CoM."""
    C = skew(com)
    I = np.zeros((6, 6))
    I[:3, :3] = inertia_com + mass * (C @ C.T)
    I[:3, 3:] = mass * C
    I[3:, :3] = mass * C.T
    I[3:, 3:] = mass * np.eye(3)
    return I


# quaternions are wxyz, scalar first

def quat_to_rot(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rot_to_quat(R):
    """Unit quaternion (w >= 0) from a rotation matrix."""
    tr = np.trace(R)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1.0 + R[i, i] - R[j, j] - R[k, k], 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_mul(q1, q2):
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_normalize(q):
    n = np.linalg.norm(q)
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return q / n


def quat_integrate(q, omega_body, dt):
    """Integrate a unit quaternion by a body-frame angular velocity over dt (exact exponential)."""
    th = np.linalg.norm(omega_body) * dt
    if th < 1e-12:
        dq = np.array([1.0, 0.5 * omega_body[0] * dt, 0.5 * omega_body[1] * dt, 0.5 * omega_body[2] * dt])
    else:
        axis = omega_body / np.linalg.norm(omega_body)
        half = 0.5 * th
        dq = np.concatenate(([np.cos(half)], np.sin(half) * axis))
    return quat_normalize(quat_mul(q, dq))
