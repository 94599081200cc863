"""Effective-tensor bounds for two-phase isotropic mixtures and laminate checks.

For phases alpha*I and beta*I mixed in proportion theta, the achievable
effective tensors are the symmetric matrices whose eigenvalues lie between
the harmonic and arithmetic means of the phases and satisfy two trace
bounds. Rank-one laminates realize the extreme points: eigenvalue equal to
the harmonic mean across the layers, arithmetic mean along them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import DensityField
from .objective import Objective

RESIDUAL_FLOOR = 1e-14


@dataclass(frozen=True)
class PhasePair:
    """The two isotropic phase conductivities, 0 < alpha <= beta."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= self.beta:
            raise ValueError("phases must satisfy 0 < alpha <= beta")


@dataclass(frozen=True)
class SymmetricTensor2:
    """2x2 symmetric matrix stored as (a11, a22, a12)."""

    a11: float
    a22: float
    a12: float = 0.0

    @classmethod
    def isotropic(cls, value: float) -> "SymmetricTensor2":
        return cls(value, value, 0.0)

    @classmethod
    def diag(cls, d1: float, d2: float) -> "SymmetricTensor2":
        return cls(d1, d2, 0.0)

    def eigenvalues(self) -> tuple[float, float]:
        """Closed-form eigenvalues, ascending."""
        mid = 0.5 * (self.a11 + self.a22)
        rad = float(np.hypot(0.5 * (self.a11 - self.a22), self.a12))
        return mid - rad, mid + rad

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return np.array(
            [self.a11 * v[0] + self.a12 * v[1], self.a12 * v[0] + self.a22 * v[1]]
        )

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])


def _check_theta(theta: float) -> float:
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"volume fraction must lie in [0, 1], got {theta}")
    return float(theta)


def harmonic_mean(theta: float, phases: PhasePair) -> float:
    """Harmonic mean of the phases with weight theta on alpha.

    The smallest achievable effective eigenvalue at this fraction.
    """
    theta = _check_theta(theta)
    return 1.0 / (theta / phases.alpha + (1.0 - theta) / phases.beta)


def arithmetic_mean(theta: float, phases: PhasePair) -> float:
    """Arithmetic mean theta*alpha + (1-theta)*beta, the largest eigenvalue."""
    theta = _check_theta(theta)
    return theta * phases.alpha + (1.0 - theta) * phases.beta


def _inv_or_inf(x: float) -> float:
    return np.inf if x <= 0.0 else 1.0 / x


def in_gclosure(
    M: SymmetricTensor2, theta: float, phases: PhasePair, tol: float = 1e-10
) -> bool:
    """Membership test for the set of effective tensors at fraction theta.

    Checks the eigenvalue bracket [harmonic, arithmetic] and the two trace
    bounds (d = 2):

        sum_i 1/(lam_i - alpha) <= 1/(lam_minus - alpha) + 1/(lam_plus - alpha)
        sum_i 1/(beta - lam_i)  <= 1/(beta - lam_minus) + 1/(beta - lam_plus)

    within `tol`. A denominator at zero counts as +inf, so tensors touching a
    pure phase fail unless the fraction is the matching endpoint, where the
    set degenerates to that single isotropic tensor.
    """
    theta = _check_theta(theta)
    lam_minus = harmonic_mean(theta, phases)
    lam_plus = arithmetic_mean(theta, phases)
    lam = M.eigenvalues()

    for li in lam:
        if li < lam_minus - tol or li > lam_plus + tol:
            return False

    lower_sum = sum(_inv_or_inf(li - phases.alpha) for li in lam)
    lower_cap = _inv_or_inf(lam_minus - phases.alpha) + _inv_or_inf(
        lam_plus - phases.alpha
    )
    if lower_sum > lower_cap + tol:
        return False
    upper_sum = sum(_inv_or_inf(phases.beta - li) for li in lam)
    upper_cap = _inv_or_inf(phases.beta - lam_minus) + _inv_or_inf(
        phases.beta - lam_plus
    )
    if upper_sum > upper_cap + tol:
        return False
    return True


def rank_one_laminate(
    theta: float, phases: PhasePair, normal: np.ndarray
) -> SymmetricTensor2:
    """Effective tensor of a single-direction layering.

    `normal` must be a unit vector (within 1e-12); the tensor has the harmonic
    mean along it and the arithmetic mean across it.
    """
    theta = _check_theta(theta)
    n = np.asarray(normal, dtype=float)
    if n.shape != (2,):
        raise ValueError("lamination normal must be a 2-vector")
    norm = float(np.hypot(n[0], n[1]))
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"lamination normal must be a unit vector, got |n|={norm!r}")
    lam_minus = harmonic_mean(theta, phases)
    lam_plus = arithmetic_mean(theta, phases)
    # lam_minus n nT + lam_plus (I - n nT)
    d = lam_minus - lam_plus
    return SymmetricTensor2(
        a11=lam_plus + d * n[0] * n[0],
        a22=lam_plus + d * n[1] * n[1],
        a12=d * n[0] * n[1],
    )


def volume_fraction(a: float, kind: Objective, phases: PhasePair) -> float:
    """Fraction theta whose optimal mean equals the scalar coefficient a.

    Inverts the arithmetic mean for compliance and the harmonic mean for
    energy, the mean each cost kind realizes at optimality.
    """
    if not phases.alpha <= a <= phases.beta:
        raise ValueError(f"coefficient {a} outside [{phases.alpha}, {phases.beta}]")
    span = phases.beta - phases.alpha
    if span == 0.0:
        return 0.0
    if kind is Objective.COMPLIANCE:
        return (phases.beta - a) / span
    return (phases.alpha / a) * (phases.beta - a) / span


def _principal_direction(g_outer: np.ndarray) -> np.ndarray:
    """Unit eigenvector of the dominant eigenvalue of a 2x2 PSD matrix."""
    g11, g22, g12 = g_outer[0, 0], g_outer[1, 1], g_outer[0, 1]
    mid = 0.5 * (g11 + g22)
    rad = float(np.hypot(0.5 * (g11 - g22), g12))
    lam_max = mid + rad
    # pick the better-conditioned eigenvector formula
    v1 = np.array([g12, lam_max - g11])
    v2 = np.array([lam_max - g22, g12])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.array([1.0, 0.0])
    return v / norm


def optimality_residual(
    a_final: DensityField,
    sols,
    kind: Objective,
    phases: PhasePair,
    floor: float = RESIDUAL_FLOOR,
) -> np.ndarray:
    """Cell-wise alignment residual of the converged design.

    For each cell the best single lamination direction is taken from the
    weighted second-moment matrix of the scenario gradients (its principal
    direction transverse to the layers for compliance, along them for
    energy). The residual is

        sum_k w_k ||M* grad(u_k) - a grad(u_k)|| / (sum_k w_k ||grad(u_k)|| + floor)

    which vanishes wherever one direction serves every scenario, in
    particular for a single deterministic scenario. With several scenarios it
    quantifies how far the per-cell gradients are from sharing a direction.
    """
    grid = a_final.grid
    n_cells = grid.n_cells
    weights = [s.weight for s in sols]
    grads = [s.grad_u.values for s in sols]

    residual = np.zeros(n_cells)
    for c in range(n_cells):
        outer = np.zeros((2, 2))
        norm_sum = 0.0
        for w, gv in zip(weights, grads):
            v = gv[c]
            outer += w * np.outer(v, v)
            norm_sum += w * float(np.hypot(v[0], v[1]))
        dominant = _principal_direction(outer)
        if kind is Objective.COMPLIANCE:
            normal = np.array([-dominant[1], dominant[0]])
        else:
            normal = dominant
        theta = volume_fraction(float(a_final.values[c]), kind, phases)
        M = rank_one_laminate(theta, phases, normal / float(np.hypot(*normal)))
        num = 0.0
        for w, gv in zip(weights, grads):
            v = gv[c]
            err = M.matvec(v) - a_final.values[c] * v
            num += w * float(np.hypot(err[0], err[1]))
        residual[c] = num / (norm_sum + floor)
    return residual
