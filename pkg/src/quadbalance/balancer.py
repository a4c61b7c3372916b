"""Four-term balance control law, reference prefiltering, combined solve.

The control law commands the third derivative of the plant momentum,

    Lddd = -(k_l*L + k_ld*Ldot + k_ldd*Lddot + k_q*(q2 - q2_ref)),

with gains from pole placement on the plant (Y1, Y2 frozen per tick).
Closed-loop characteristic polynomial, derived from the plant realization:

    s^4 + k_ldd s^3 + (k_ld + k_q Y2) s^2 + k_l s + k_q Y1

which is affine in the gains, so placement is an exact coefficient match.

Reference trajectories are prefiltered by a first-order low-pass run
backwards in time (pole at 1/T_c realized anticausally); this cancels the
plant's right-half-plane zero so the closed loop leans in anticipation of
future commands instead of undershooting.
"""

from dataclasses import dataclass, field

import numpy as np

POLE_RESIDUAL_TOL = 1e-9


class GainDesignError(ValueError):
    pass


class SingularConfigurationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BalancerGains:
    k_l: float
    k_ld: float
    k_ldd: float
    k_q: float
    poles: tuple


def closed_loop_matrix(gains, Y1, Y2):
    """System matrix of the controlled plant, states (L, Ldot, Lddot, q2 - q2d)."""
    return np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [-gains.k_l, -gains.k_ld, -gains.k_ldd, -gains.k_q],
            [Y1, 0.0, Y2, 0.0],
        ]
    )


def design_gains(Y1, Y2, poles):
    """Place the four closed-loop poles for the plant (Y1 > 0 > Y2)."""
    poles = tuple(complex(p) for p in poles)
    if len(poles) != 4:
        raise GainDesignError("exactly four poles required")
    if any(p.real >= 0.0 for p in poles):
        raise GainDesignError(f"poles must lie strictly in the open left half-plane: {poles}")
    cpoly = np.poly(np.array(poles))
    if np.abs(cpoly.imag).max() > 1e-9:
        raise GainDesignError("pole set must be closed under conjugation")
    if not (Y1 > 0.0 and Y2 < 0.0):
        raise GainDesignError(f"plant gains outside the balanceable regime: Y1={Y1}, Y2={Y2}")
    a3, a2, a1, a0 = cpoly.real[1:]
    k_ldd = a3
    k_l = a1
    k_q = a0 / Y1
    k_ld = a2 - k_q * Y2
    gains = BalancerGains(k_l=k_l, k_ld=k_ld, k_ldd=k_ldd, k_q=k_q, poles=poles)
    achieved = np.poly(closed_loop_matrix(gains, Y1, Y2))
    residual = np.abs(achieved - cpoly.real).max()
    if residual > POLE_RESIDUAL_TOL * max(1.0, np.abs(cpoly.real).max()):
        raise GainDesignError(
            f"placement failed for Y1={Y1}, Y2={Y2}: coefficient residual {residual:.3e}"
        )
    return gains


def balance_step(plant, gains, q2_ref):
    """Jerk command on L from the four-term feedback law."""
    return -(
        gains.k_l * plant.L
        + gains.k_ld * plant.Ld
        + gains.k_ldd * plant.Ldd
        + gains.k_q * (plant.q2 - q2_ref)
    )


# ---- reference trajectories and the backward filter --------------------------


@dataclass
class ReferenceTrajectory:
    """Samples of a desired q2 trajectory on a uniform time grid starting at t0."""

    dt: float
    samples: np.ndarray
    t0: float = 0.0
    filtered: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("reference trajectory needs a non-empty 1-D sample array")

    @property
    def duration(self):
        return (self.samples.size - 1) * self.dt

    def times(self):
        return self.t0 + self.dt * np.arange(self.samples.size)

    def value(self, t):
        """Linear interpolation, held constant beyond both ends."""
        s = (t - self.t0) / self.dt
        if s <= 0.0:
            return float(self.samples[0])
        if s >= self.samples.size - 1:
            return float(self.samples[-1])
        i = int(s)
        a = s - i
        return float((1.0 - a) * self.samples[i] + a * self.samples[i + 1])


def backward_filter(raw: ReferenceTrajectory, time_constant: float) -> ReferenceTrajectory:
    """First-order low-pass applied in reverse time (anticausal smoother).

    The filtered signal at index k depends only on raw samples at k and
    later; DC gain is exactly one, and the final value is preserved.
    """
    if time_constant <= 0.0:
        raise ValueError("time constant must be positive")
    x = raw.samples
    alpha = np.exp(-raw.dt / time_constant)
    y = np.empty_like(x)
    y[-1] = x[-1]
    for k in range(x.size - 2, -1, -1):
        y[k] = alpha * y[k + 1] + (1.0 - alpha) * x[k]
    return ReferenceTrajectory(dt=raw.dt, samples=y, t0=raw.t0, filtered=True)


# ---- combined balance + motion solve -----------------------------------------


@dataclass
class GeneralizedEom:
    """EoM blocks in the extended coordinates (fictitious slide, pivot, hip, motion).

    H is (3+nm)x(3+nm) symmetric, C the matching bias vector; index 0 is the
    fictitious (static) prismatic joint along the horizontal direction
    perpendicular to the contact line.
    """

    H: np.ndarray
    C: np.ndarray
    n_motion: int = 0
    g: float = 9.81

    def __post_init__(self):
        k = 3 + self.n_motion
        if self.H.shape != (k, k) or self.C.shape != (k,):
            raise ValueError(f"EoM blocks must be {k}x{k} / ({k},)")
        if np.abs(self.H - self.H.T).max() > 1e-8 * max(1.0, np.abs(self.H).max()):
            raise ValueError("H must be symmetric")


@dataclass
class CombinedSolution:
    w_h: float
    w_m: np.ndarray
    ydd_p: float
    ydd_h: float
    residual: float


def solve_combined(eom: GeneralizedEom, lddd: float, ydd_m=None) -> CombinedSolution:
    """Solve the combined balance + motion system for (w_h, w_m, ydd_p, ydd_h).

    Unknowns are ordered (w_h, w_m, ydd_p, ydd_h); the right-hand side
    carries -Lddd/g - C0 - H03 @ ydd_m on the fictitious-joint row, which
    encodes the direct relation tau0 = -Lddd/g.
    """
    nm = eom.n_motion
    if ydd_m is None:
        ydd_m = np.zeros(nm)
    ydd_m = np.atleast_1d(np.asarray(ydd_m, dtype=float))
    if ydd_m.shape != (nm,):
        raise ValueError(f"ydd_m must have {nm} entries")
    H, C = eom.H, eom.C
    k = 3 + nm
    A = np.zeros((k, k))
    # columns: [w_h | w_m (nm) | ydd_p | ydd_h]
    A[2, 0] = -1.0
    for i in range(nm):
        A[3 + i, 1 + i] = -1.0
    A[:, k - 2] = H[:, 1]
    A[:, k - 1] = H[:, 2]
    rhs = -C.copy()
    if nm:
        rhs -= H[:, 3:] @ ydd_m
    rhs[0] -= lddd / eom.g
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularConfigurationError(f"combined balance/motion system singular: {exc}")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularConfigurationError(f"combined system ill-conditioned (cond={cond:.2e})")
    residual = float(np.abs(A @ sol - rhs).max())
    return CombinedSolution(
        w_h=float(sol[0]),
        w_m=sol[1:1 + nm].copy(),
        ydd_p=float(sol[k - 2]),
        ydd_h=float(sol[k - 1]),
        residual=residual,
    )


def pendulum_generalized_eom(pend, q, qd):
    """Literal 3x3 extended EoM of the 2-DoF pendulum with the fictitious slide."""
    from .dynamics import bias_forces, joint_space_inertia
    from .model import JointState

    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    st = JointState(np.concatenate([[0.0], q]), np.concatenate([[0.0], qd]))
    H = joint_space_inertia(pend.extended_model, st)
    C = bias_forces(pend.extended_model, st)
    return GeneralizedEom(H=H, C=C, n_motion=0, g=pend.g)
