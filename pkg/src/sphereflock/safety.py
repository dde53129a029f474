"""Barrier functions and the linear constraint rows they induce.

Safety is encoded through scalar barriers of the form h(R) built from
e3^T R e3, the cosine of a tilt angle. Each barrier yields one linear
inequality a^T omega >= b in the body angular velocity; any input
satisfying the row keeps the barrier nonnegative, hence the protected set
forward invariant. Only linear gain schedules alpha(h) = c * h are
supported; the collision rows bake in the factor-2 schedule that makes the
per-agent split of a pairwise condition sound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import NetworkState
from .so3 import E3, hat

_HAT_E3 = hat(E3)


@dataclass(frozen=True)
class ConicParams:
    """Half-angle of the cone around the world z axis."""

    theta_c: float

    def __post_init__(self) -> None:
        if not (0.0 < self.theta_c < math.pi / 2.0):
            raise ValueError(f"theta_c must lie in (0, pi/2), got {self.theta_c}")


@dataclass(frozen=True)
class CollisionParams:
    """Pairwise separation parameters.

    weights maps ordered pairs (i, j) to the share w_ij of the pairwise
    budget taken by agent i; missing pairs default to the equal split 1/2.
    """

    D_c: float
    rho: float
    k: float
    weights: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0.0 < self.D_c < (self.rho * math.pi) / 2.0):
            raise ValueError(f"need 0 < D_c < rho*pi/2, got D_c={self.D_c}")
        if self.k <= 0.0:
            raise ValueError("gain k must be positive")
        for (i, j), w in self.weights.items():
            if not (0.0 < w < 1.0):
                raise ValueError(f"weight for pair ({i}, {j}) must lie in (0, 1)")
            w_back = self.weights.get((j, i))
            if w_back is None or abs(w + w_back - 1.0) > 1e-12:
                raise ValueError(
                    f"weights for pair ({i}, {j}) and ({j}, {i}) must sum to 1")

    def weight(self, i: int, j: int) -> float:
        return self.weights.get((i, j), 0.5)


@dataclass
class ConstraintRow:
    """One linear inequality a^T omega >= b on an agent's angular velocity."""

    a: np.ndarray
    b: float
    tag: str = ""


def conic_h(R, p: ConicParams) -> float:
    """Containment barrier e3^T R e3 - cos(theta_c); positive inside the cone."""
    return float(np.asarray(R)[2, 2]) - math.cos(p.theta_c)


def conic_containment_row(R, p: ConicParams, alpha_gain: float) -> ConstraintRow:
    """Row keeping the body z axis inside the cone.

    The barrier derivative along Rdot = R hat(omega) is
    -e3^T R hat(e3) omega, so the row is a = -(e3^T R hat(e3))^T with
    b = -alpha_gain * h. At the cone center the derivative vanishes and
    the row is vacuous (a = 0, b < 0).
    """
    if alpha_gain <= 0.0:
        raise ValueError("alpha_gain must be positive")
    R = np.asarray(R, dtype=float)
    a = -(E3 @ R @ _HAT_E3)
    return ConstraintRow(a=a, b=-alpha_gain * conic_h(R, p), tag="conic-containment")


def conic_exclusion_row(R, p: ConicParams, alpha_gain: float) -> ConstraintRow:
    """Row keeping the body z axis outside the cone (sign-flipped containment)."""
    if alpha_gain <= 0.0:
        raise ValueError("alpha_gain must be positive")
    R = np.asarray(R, dtype=float)
    a = E3 @ R @ _HAT_E3
    return ConstraintRow(a=a, b=alpha_gain * conic_h(R, p), tag="conic-exclusion")


def pairwise_h(R_rel, p: CollisionParams) -> float:
    """Separation barrier cos(D_c / rho) - e3^T R_rel e3.

    Nonnegative exactly when the geodesic distance of the pair is at least
    D_c. Symmetric in the pair order because e3^T R e3 = e3^T R^T e3.
    """
    return math.cos(p.D_c / p.rho) - float(np.asarray(R_rel)[2, 2])


def collision_row(R_rel, p: CollisionParams, weight: float = 0.5) -> ConstraintRow:
    """Agent-side separation row for one pair.

    a = (e3^T R_rel^T hat(e3))^T and b = 2 * weight * k * (e3^T R_rel e3 -
    cos(D_c / rho)), so the pair jointly guarantees
    hdot >= -2k h whenever both agents satisfy their rows. weight = 1/2 is
    the equal split; any split with the two weights summing to 1 works.
    The row uses only the relative attitude, so it is computable onboard.
    """
    if not (0.0 < weight < 1.0):
        raise ValueError(f"weight must lie in (0, 1), got {weight}")
    R_rel = np.asarray(R_rel, dtype=float)
    a = E3 @ R_rel.T @ _HAT_E3
    b = 2.0 * weight * p.k * (float(R_rel[2, 2]) - math.cos(p.D_c / p.rho))
    return ConstraintRow(a=a, b=b, tag="pair")


def assemble_agent_constraints(state: NetworkState, i: int, nd, p: CollisionParams) -> list[ConstraintRow]:
    """Collision rows for agent i, one per distance neighbor in nd."""
    R_i = state.agents[i].attitude
    rows = []
    for j in sorted(nd):
        R_rel = R_i.T @ state.agents[j].attitude
        row = collision_row(R_rel, p, weight=p.weight(i, j))
        row.tag = f"pair({i},{j})"
        rows.append(row)
    return rows
