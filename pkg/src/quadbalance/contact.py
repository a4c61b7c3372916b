"""Penalty contact between point feet and the ground / bridge geometry.

Normal force is a one-sided spring-damper on the sphere penetration,
clamped non-negative; tangential force is regularized Coulomb friction
(linear in slip velocity below v_reg). The bridge supports a foot only
inside its top face: a foot centre beyond the 6 cm strip drops to the gap
floor, which is how stepping off the edge turns into a fall.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ContactModel:
    stiffness: float = 2.0e5   # N/m
    damping: float = 2.0e3     # N s/m
    friction: float = 0.8
    v_reg: float = 1.0e-3      # m/s, tangential regularization velocity
    foot_radius: float = 0.02  # m

    def __post_init__(self):
        if self.stiffness <= 0.0 or self.damping <= 0.0:
            raise ValueError("contact stiffness and damping must be positive")
        if self.friction < 0.0:
            raise ValueError("friction coefficient must be non-negative")


class FlatGround:
    def __init__(self, height=0.0):
        self.height = height

    def support_height(self, x, y):
        return self.height


@dataclass(frozen=True)
class Bridge:
    length: float = 1.5
    width: float = 0.06
    top_height: float = 0.3
    x_start: float = 0.0
    y_center: float = 0.0


class BridgeWorld:
    """Bridge between two full-width platforms of the same top height.

    Beside the bridge (within its span but off the strip) the support drops
    by gap_depth; the strip itself carries the same contact properties as
    everything else.
    """

    def __init__(self, bridge: Bridge, gap_depth=0.5):
        self.bridge = bridge
        self.gap_depth = gap_depth

    def support_height(self, x, y):
        b = self.bridge
        if x < b.x_start or x > b.x_start + b.length:
            return b.top_height
        if abs(y - b.y_center) <= 0.5 * b.width:
            return b.top_height
        return b.top_height - self.gap_depth


def contact_force(model: ContactModel, surface, p_foot, v_foot):
    """World-frame force on a foot sphere centre at p_foot moving at v_foot."""
    z_s = surface.support_height(p_foot[0], p_foot[1])
    penetration = z_s + model.foot_radius - p_foot[2]
    if penetration <= 0.0:
        return np.zeros(3)
    normal = max(0.0, model.stiffness * penetration - model.damping * v_foot[2])
    v_t = np.array([v_foot[0], v_foot[1], 0.0])
    speed = np.linalg.norm(v_t)
    tangential = -model.friction * normal * v_t / max(speed, model.v_reg)
    return np.array([tangential[0], tangential[1], normal])
