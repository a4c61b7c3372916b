"""Articulated rigid-body model description and state containers.

A model is a topologically sorted kinematic tree. Body i is the child of
joint i; joint parents refer to body indices (-1 is the world). A floating
base, when present, must be joint 0. Generalized coordinates stack the
floating-base pose (position + wxyz unit quaternion) ahead of the 1-DoF
joint positions; generalized velocities use a 6-D body-frame base twist
[omega; v] ahead of the joint rates.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .spatial import spatial_inertia

UNIT_AXIS_TOL = 1e-12
QUAT_NORM_TOL = 1e-9


class JointType(Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    FLOATING = "floating"


class ModelError(ValueError):
    """Raised for an inconsistent model description or mismatched state."""


@dataclass(frozen=True)
class Body:
    name: str
    mass: float
    com: np.ndarray
    inertia: np.ndarray  # 3x3 about the CoM, body frame


@dataclass(frozen=True)
class Joint:
    name: str
    jtype: JointType
    parent: int  # parent body index, -1 for the world
    R_tree: np.ndarray  # fixed rotation of the joint frame in the parent frame
    p_tree: np.ndarray  # fixed offset of the joint frame in the parent frame
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))


class RobotModel:
    """Immutable kinematic/dynamic description of a floating- or fixed-base tree."""

    def __init__(self, bodies, joints, gravity=(0.0, 0.0, -9.81)):
        if len(bodies) != len(joints):
            raise ModelError("need exactly one body per joint")
        self.bodies = tuple(bodies)
        self.joints = tuple(joints)
        self.gravity = np.asarray(gravity, dtype=float)
        self._validate()

        self.n_bodies = len(self.bodies)
        # coordinate layout per joint
        self.q_index = []
        self.v_index = []
        nq = nv = 0
        for j in self.joints:
            self.q_index.append(nq)
            self.v_index.append(nv)
            if j.jtype is JointType.FLOATING:
                nq += 7
                nv += 6
            else:
                nq += 1
                nv += 1
        self.nq = nq
        self.nv = nv
        self.spatial_inertias = tuple(
            spatial_inertia(b.mass, b.com, b.inertia) for b in self.bodies
        )
        self.total_mass = float(sum(b.mass for b in self.bodies))
        self.floating = self.joints[0].jtype is JointType.FLOATING

    def _validate(self):
        for i, j in enumerate(self.joints):
            if j.parent >= i:
                raise ModelError(f"joint {j.name}: parent index {j.parent} not below {i}")
            if j.jtype is JointType.FLOATING:
                if i != 0:
                    raise ModelError("floating base must be joint 0")
                if not np.allclose(j.R_tree, np.eye(3)) or np.any(j.p_tree != 0.0):
                    raise ModelError("floating base must carry an identity fixed transform")
            if j.jtype is not JointType.FLOATING:
                n = np.linalg.norm(j.axis)
                if abs(n - 1.0) > UNIT_AXIS_TOL:
                    raise ModelError(f"joint {j.name}: axis norm {n} not unit")
        for b in self.bodies:
            if b.mass < 0.0:
                raise ModelError(f"body {b.name}: negative mass")
            if not np.allclose(b.inertia, b.inertia.T, atol=1e-12):
                raise ModelError(f"body {b.name}: inertia not symmetric")
            if b.mass > 0.0 and np.linalg.eigvalsh(b.inertia).min() < -1e-12:
                raise ModelError(f"body {b.name}: inertia not positive semidefinite")

    def body_index(self, name):
        for i, b in enumerate(self.bodies):
            if b.name == name:
                return i
        raise ModelError(f"unknown body {name!r}")

    def zero_state(self):
        q = np.zeros(self.nq)
        if self.floating:
            q[3] = 1.0  # identity quaternion, wxyz
        return JointState(q, np.zeros(self.nv), np.zeros(self.nv))

    def check_state(self, state):
        if state.q.shape != (self.nq,) or state.qd.shape != (self.nv,):
            raise ModelError(
                f"state dims q{state.q.shape}/qd{state.qd.shape} do not match "
                f"model nq={self.nq}, nv={self.nv}"
            )
        if state.qdd is not None and state.qdd.shape != (self.nv,):
            raise ModelError("qdd dimension mismatch")
        if self.floating:
            n = np.linalg.norm(state.q[3:7])
            if abs(n - 1.0) > QUAT_NORM_TOL:
                raise ModelError(f"base quaternion norm {n} outside tolerance")


@dataclass
class JointState:
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qd = np.asarray(self.qd, dtype=float)
        if self.qdd is not None:
            self.qdd = np.asarray(self.qdd, dtype=float)

    def copy(self):
        return JointState(self.q.copy(), self.qd.copy(), None if self.qdd is None else self.qdd.copy())


def _as_inertia(spec):
    a = np.asarray(spec, dtype=float)
    if a.shape == (3,):
        return np.diag(a)
    if a.shape == (3, 3):
        return a
    raise ModelError(f"inertia spec must be diag(3) or 3x3, got shape {a.shape}")


def model_from_dict(cfg):
    """Build a RobotModel from a parsed configuration dictionary.

    Two layouts are accepted (see README for the schema):
      type: tree       explicit bodies/joints lists
      type: quadruped  parametric quadruped, handled by quadbalance.robots
    """
    kind = cfg.get("type", "tree")
    if kind == "quadruped":
        from .robots import quadruped_from_params

        return quadruped_from_params(cfg.get("params", {}))
    if kind != "tree":
        raise ModelError(f"unknown model type {kind!r}")

    gravity = cfg.get("gravity", [0.0, 0.0, -9.81])
    bodies = []
    joints = []
    names = {}
    for i, (bspec, jspec) in enumerate(zip(cfg["bodies"], cfg["joints"])):
        bodies.append(
            Body(
                name=bspec["name"],
                mass=float(bspec["mass"]),
                com=np.asarray(bspec.get("com", [0.0, 0.0, 0.0]), dtype=float),
                inertia=_as_inertia(bspec.get("inertia", [0.0, 0.0, 0.0])),
            )
        )
        names[bspec["name"]] = i
        parent = jspec.get("parent", -1)
        if isinstance(parent, str):
            parent = -1 if parent == "world" else names[parent]
        joints.append(
            Joint(
                name=jspec.get("name", f"joint{i}"),
                jtype=JointType(jspec["type"]),
                parent=parent,
                R_tree=np.asarray(jspec.get("rotation", np.eye(3).tolist()), dtype=float),
                p_tree=np.asarray(jspec.get("offset", [0.0, 0.0, 0.0]), dtype=float),
                axis=np.asarray(jspec.get("axis", [0.0, 0.0, 1.0]), dtype=float),
            )
        )
    return RobotModel(bodies, joints, gravity)


def load_robot_model(path):
    import yaml

    with open(path) as f:
        cfg = yaml.safe_load(f)
    return model_from_dict(cfg)
