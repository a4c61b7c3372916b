"""JIT-compiled kernels for the dynamics hot path.

The tree is flattened once per RobotModel into plain arrays (parents, joint
types, axes, fixed transforms, spatial inertias); the kinematics pass, the
composite-rigid-body inertia and the recursive Newton-Euler bias run as
numba kernels over those arrays. Joint type codes: 0 floating, 1 revolute,
2 prismatic.
"""

import numpy as np
from numba import njit

from .model import JointType

_JTYPE_CODE = {JointType.FLOATING: 0, JointType.REVOLUTE: 1, JointType.PRISMATIC: 2}


class FlatModel:
    __slots__ = ("n", "nv", "parent", "jtype", "axis", "R_tree", "p_tree",
                 "q_index", "v_index", "I_sp")

    def __init__(self, model):
        n = model.n_bodies
        self.n = n
        self.nv = model.nv
        self.parent = np.array([j.parent for j in model.joints], dtype=np.int64)
        self.jtype = np.array([_JTYPE_CODE[j.jtype] for j in model.joints], dtype=np.int64)
        self.axis = np.array([j.axis if j.jtype is not JointType.FLOATING else np.zeros(3)
                              for j in model.joints])
        self.R_tree = np.array([j.R_tree for j in model.joints])
        self.p_tree = np.array([j.p_tree for j in model.joints])
        self.q_index = np.array(model.q_index, dtype=np.int64)
        self.v_index = np.array(model.v_index, dtype=np.int64)
        self.I_sp = np.array(model.spatial_inertias)


def flat_model(model):
    fm = getattr(model, "_flat", None)
    if fm is None:
        fm = FlatModel(model)
        model._flat = fm
    return fm


@njit(cache=True, fastmath=False)
def _axis_rot(axis, angle, out):
    c = np.cos(angle)
    s = np.sin(angle)
    ax, ay, az = axis[0], axis[1], axis[2]
    t = 1.0 - c
    out[0, 0] = c + ax * ax * t
    out[0, 1] = ax * ay * t - az * s
    out[0, 2] = ax * az * t + ay * s
    out[1, 0] = ay * ax * t + az * s
    out[1, 1] = c + ay * ay * t
    out[1, 2] = ay * az * t - ax * s
    out[2, 0] = az * ax * t - ay * s
    out[2, 1] = az * ay * t + ax * s
    out[2, 2] = c + az * az * t


@njit(cache=True, fastmath=False)
def _kinpass(q, qd, parent, jtype, axis, R_tree, p_tree, q_index, v_index,
             R, p, E_up, r_up, v):
    n = parent.shape[0]
    Rj = np.empty((3, 3))
    for i in range(n):
        qi = q_index[i]
        vi = v_index[i]
        jt = jtype[i]
        vJ = np.zeros(6)
        if jt == 0:
            w, x, y, z = q[qi + 3], q[qi + 4], q[qi + 5], q[qi + 6]
            Rj[0, 0] = 1 - 2 * (y * y + z * z)
            Rj[0, 1] = 2 * (x * y - z * w)
            Rj[0, 2] = 2 * (x * z + y * w)
            Rj[1, 0] = 2 * (x * y + z * w)
            Rj[1, 1] = 1 - 2 * (x * x + z * z)
            Rj[1, 2] = 2 * (y * z - x * w)
            Rj[2, 0] = 2 * (x * z - y * w)
            Rj[2, 1] = 2 * (y * z + x * w)
            Rj[2, 2] = 1 - 2 * (x * x + y * y)
            for a in range(3):
                for b in range(3):
                    E_up[i, a, b] = Rj[a, b]
                r_up[i, a] = q[qi + a]
            for a in range(6):
                vJ[a] = qd[vi + a]
        elif jt == 1:
            _axis_rot(axis[i], q[qi], Rj)
            for a in range(3):
                for b in range(3):
                    s = 0.0
                    for k in range(3):
                        s += R_tree[i, a, k] * Rj[k, b]
                    E_up[i, a, b] = s
                r_up[i, a] = p_tree[i, a]
                vJ[a] = axis[i, a] * qd[vi]
        else:
            for a in range(3):
                for b in range(3):
                    E_up[i, a, b] = R_tree[i, a, b]
                off = 0.0
                for k in range(3):
                    off += R_tree[i, a, k] * axis[i, k]
                r_up[i, a] = p_tree[i, a] + off * q[qi]
                vJ[3 + a] = axis[i, a] * qd[vi]

        par = parent[i]
        if par < 0:
            for a in range(3):
                p[i, a] = r_up[i, a]
                for b in range(3):
                    R[i, a, b] = E_up[i, a, b]
            for a in range(6):
                v[i, a] = vJ[a]
        else:
            for a in range(3):
                acc = p[par, a]
                for k in range(3):
                    acc += R[par, a, k] * r_up[i, k]
                p[i, a] = acc
                for b in range(3):
                    s = 0.0
                    for k in range(3):
                        s += R[par, a, k] * E_up[i, k, b]
                    R[i, a, b] = s
            # v_child = [E' w_par; E' (v_par - r x w_par)] + vJ
            wx = v[par, 0]
            wy = v[par, 1]
            wz = v[par, 2]
            rx, ry, rz = r_up[i, 0], r_up[i, 1], r_up[i, 2]
            cx = ry * wz - rz * wy
            cy = rz * wx - rx * wz
            cz = rx * wy - ry * wx
            lx = v[par, 3] - cx
            ly = v[par, 4] - cy
            lz = v[par, 5] - cz
            for a in range(3):
                v[i, a] = E_up[i, 0, a] * wx + E_up[i, 1, a] * wy + E_up[i, 2, a] * wz + vJ[a]
                v[i, 3 + a] = E_up[i, 0, a] * lx + E_up[i, 1, a] * ly + E_up[i, 2, a] * lz + vJ[3 + a]


@njit(cache=True, fastmath=False)
def _build_X(E, r, X):
    # motion transform parent -> child from the child pose (E, r) in parent
    for a in range(3):
        for b in range(3):
            X[a, b] = E[b, a]
            X[a, 3 + b] = 0.0
            X[3 + a, 3 + b] = E[b, a]
    # lower-left: -E^T skew(r)
    for a in range(3):
        X[3 + a, 0] = -E[1, a] * r[2] + E[2, a] * r[1]
        X[3 + a, 1] = E[0, a] * r[2] - E[2, a] * r[0]
        X[3 + a, 2] = -E[0, a] * r[1] + E[1, a] * r[0]


@njit(cache=True, fastmath=False)
def _crba(parent, jtype, axis, v_index, I_sp, E_up, r_up, nv):
    n = parent.shape[0]
    Ic = I_sp.copy()
    H = np.zeros((nv, nv))
    X = np.empty((6, 6))
    for i in range(n - 1, -1, -1):
        par = parent[i]
        if par >= 0:
            _build_X(E_up[i], r_up[i], X)
            Ic[par] += X.T @ Ic[i] @ X
        vi = v_index[i]
        if jtype[i] == 0:
            F = Ic[i].copy()  # S = identity
            ni = 6
        else:
            s6 = np.zeros(6)
            if jtype[i] == 1:
                for a in range(3):
                    s6[a] = axis[i, a]
            else:
                for a in range(3):
                    s6[3 + a] = axis[i, a]
            F = (Ic[i] @ s6).reshape(6, 1)
            ni = 1
        if ni == 6:
            H[vi:vi + 6, vi:vi + 6] = F
        else:
            s = 0.0
            if jtype[i] == 1:
                for a in range(3):
                    s += axis[i, a] * F[a, 0]
            else:
                for a in range(3):
                    s += axis[i, a] * F[3 + a, 0]
            H[vi, vi] = s
        j = i
        Fw = np.empty_like(F) if ni == 6 else F
        Fcur = F
        while parent[j] >= 0:
            _build_X(E_up[j], r_up[j], X)
            Fcur = X.T @ Fcur
            j = parent[j]
            vj = v_index[j]
            if jtype[j] == 0:
                for a in range(6):
                    for b in range(ni):
                        H[vj + a, vi + b] = Fcur[a, b]
                        H[vi + b, vj + a] = Fcur[a, b]
            else:
                for b in range(ni):
                    s = 0.0
                    if jtype[j] == 1:
                        for a in range(3):
                            s += axis[j, a] * Fcur[a, b]
                    else:
                        for a in range(3):
                            s += axis[j, a] * Fcur[3 + a, b]
                    H[vj, vi + b] = s
                    H[vi + b, vj] = s
    return H


@njit(cache=True, fastmath=False)
def _rnea(qd, qdd, gravity, parent, jtype, axis, v_index, I_sp, E_up, r_up, v):
    n = parent.shape[0]
    a_arr = np.empty((n, 6))
    f_arr = np.empty((n, 6))
    a0 = np.zeros(6)
    for k in range(3):
        a0[3 + k] = -gravity[k]
    tau = np.zeros(v_index[n - 1] + (6 if jtype[n - 1] == 0 else 1))
    for i in range(n):
        vi = v_index[i]
        vJ = np.zeros(6)
        aJ = np.zeros(6)
        if jtype[i] == 0:
            for k in range(6):
                vJ[k] = qd[vi + k]
                aJ[k] = qdd[vi + k]
        elif jtype[i] == 1:
            for k in range(3):
                vJ[k] = axis[i, k] * qd[vi]
                aJ[k] = axis[i, k] * qdd[vi]
        else:
            for k in range(3):
                vJ[3 + k] = axis[i, k] * qd[vi]
                aJ[3 + k] = axis[i, k] * qdd[vi]
        par = parent[i]
        ap = a0 if par < 0 else a_arr[par]
        rx, ry, rz = r_up[i, 0], r_up[i, 1], r_up[i, 2]
        wx, wy, wz = ap[0], ap[1], ap[2]
        cx = ry * wz - rz * wy
        cy = rz * wx - rx * wz
        cz = rx * wy - ry * wx
        lx = ap[3] - cx
        ly = ap[4] - cy
        lz = ap[5] - cz
        vx, vy, vz = v[i, 0], v[i, 1], v[i, 2]
        ux, uy, uz = v[i, 3], v[i, 4], v[i, 5]
        for k in range(3):
            a_arr[i, k] = E_up[i, 0, k] * wx + E_up[i, 1, k] * wy + E_up[i, 2, k] * wz + aJ[k]
            a_arr[i, 3 + k] = E_up[i, 0, k] * lx + E_up[i, 1, k] * ly + E_up[i, 2, k] * lz + aJ[3 + k]
        # + v x vJ
        a_arr[i, 0] += vy * vJ[2] - vz * vJ[1]
        a_arr[i, 1] += vz * vJ[0] - vx * vJ[2]
        a_arr[i, 2] += vx * vJ[1] - vy * vJ[0]
        a_arr[i, 3] += uy * vJ[2] - uz * vJ[1] + vy * vJ[5] - vz * vJ[4]
        a_arr[i, 4] += uz * vJ[0] - ux * vJ[2] + vz * vJ[3] - vx * vJ[5]
        a_arr[i, 5] += ux * vJ[1] - uy * vJ[0] + vx * vJ[4] - vy * vJ[3]
        Iv = I_sp[i] @ v[i]
        Ia = I_sp[i] @ a_arr[i]
        # f = I a + v x* (I v)
        f_arr[i, 0] = Ia[0] + vy * Iv[2] - vz * Iv[1] + uy * Iv[5] - uz * Iv[4]
        f_arr[i, 1] = Ia[1] + vz * Iv[0] - vx * Iv[2] + uz * Iv[3] - ux * Iv[5]
        f_arr[i, 2] = Ia[2] + vx * Iv[1] - vy * Iv[0] + ux * Iv[4] - uy * Iv[3]
        f_arr[i, 3] = Ia[3] + vy * Iv[5] - vz * Iv[4]
        f_arr[i, 4] = Ia[4] + vz * Iv[3] - vx * Iv[5]
        f_arr[i, 5] = Ia[5] + vx * Iv[4] - vy * Iv[3]
    for i in range(n - 1, -1, -1):
        vi = v_index[i]
        if jtype[i] == 0:
            for k in range(6):
                tau[vi + k] = f_arr[i, k]
        elif jtype[i] == 1:
            s = 0.0
            for k in range(3):
                s += axis[i, k] * f_arr[i, k]
            tau[vi] = s
        else:
            s = 0.0
            for k in range(3):
                s += axis[i, k] * f_arr[i, 3 + k]
            tau[vi] = s
        par = parent[i]
        if par >= 0:
            fx, fy, fz = f_arr[i, 0], f_arr[i, 1], f_arr[i, 2]
            gx, gy, gz = f_arr[i, 3], f_arr[i, 4], f_arr[i, 5]
            rx, ry, rz = r_up[i, 0], r_up[i, 1], r_up[i, 2]
            Fax = E_up[i, 0, 0] * fx + E_up[i, 0, 1] * fy + E_up[i, 0, 2] * fz
            Fay = E_up[i, 1, 0] * fx + E_up[i, 1, 1] * fy + E_up[i, 1, 2] * fz
            Faz = E_up[i, 2, 0] * fx + E_up[i, 2, 1] * fy + E_up[i, 2, 2] * fz
            Flx = E_up[i, 0, 0] * gx + E_up[i, 0, 1] * gy + E_up[i, 0, 2] * gz
            Fly = E_up[i, 1, 0] * gx + E_up[i, 1, 1] * gy + E_up[i, 1, 2] * gz
            Flz = E_up[i, 2, 0] * gx + E_up[i, 2, 1] * gy + E_up[i, 2, 2] * gz
            f_arr[par, 0] += Fax + ry * Flz - rz * Fly
            f_arr[par, 1] += Fay + rz * Flx - rx * Flz
            f_arr[par, 2] += Faz + rx * Fly - ry * Flx
            f_arr[par, 3] += Flx
            f_arr[par, 4] += Fly
            f_arr[par, 5] += Flz
    return tau


def kinpass(model, state):
    fm = flat_model(model)
    n = fm.n
    R = np.empty((n, 3, 3))
    p = np.empty((n, 3))
    E_up = np.empty((n, 3, 3))
    r_up = np.empty((n, 3))
    v = np.empty((n, 6))
    _kinpass(state.q, state.qd, fm.parent, fm.jtype, fm.axis, fm.R_tree, fm.p_tree,
             fm.q_index, fm.v_index, R, p, E_up, r_up, v)
    return R, p, E_up, r_up, v


def crba(model, cache):
    fm = flat_model(model)
    return _crba(fm.parent, fm.jtype, fm.axis, fm.v_index, fm.I_sp,
                 cache.E_np, cache.r_np, fm.nv)


def rnea(model, cache, qd, qdd, gravity):
    fm = flat_model(model)
    return _rnea(qd, qdd, gravity, fm.parent, fm.jtype, fm.axis, fm.v_index,
                 fm.I_sp, cache.E_np, cache.r_np, cache.v_np)
