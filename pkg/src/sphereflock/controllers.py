"""Nominal control laws and their barrier-filtered composition.

The nominal layer knows nothing about safety: attitude synchronization
pulls each agent toward its graph neighbors, and the tracking law chases a
time-parameterized reference. The safe variants project those nominals
onto the constraint rows through a per-agent QP, changing nothing when the
nominal is already safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import NetworkState
from .qp import QpInfeasibleError, QpProblem, solve
from .safety import CollisionParams, ConicParams, assemble_agent_constraints, conic_containment_row
from .so3 import sk_vee
from .topology import DirectedGraph, DistanceGraphParams, distance_neighbors, neighbors


@dataclass(frozen=True)
class SyncGains:
    k_c: float

    def __post_init__(self) -> None:
        if self.k_c <= 0.0:
            raise ValueError("k_c must be positive")


@dataclass(frozen=True)
class TrackingReference:
    """Reference attitude trajectory plus tracking gain.

    attitude_at(t) must return an orthonormal (3, 3) matrix; the feedforward
    term is recovered from it by central differences with spacing ff_delta,
    so no closed-form reference velocity is needed.
    """

    attitude_at: Callable[[float], np.ndarray]
    k_t: float
    ff_delta: float = 1e-5

    def __post_init__(self) -> None:
        if self.k_t <= 0.0:
            raise ValueError("k_t must be positive")
        if self.ff_delta <= 0.0:
            raise ValueError("ff_delta must be positive")


def sync_nominal(state: NetworkState, g: DirectedGraph, i: int, gains: SyncGains) -> np.ndarray:
    """Attitude-synchronization input k_c * sum_j sk_vee(R_i^T R_j) over in-neighbors."""
    R_i = state.agents[i].attitude
    total = np.zeros(3)
    for j in sorted(neighbors(g, i)):
        total += sk_vee(R_i.T @ state.agents[j].attitude)
    return gains.k_c * total


def tracking_nominal(R, ref: TrackingReference, t: float) -> np.ndarray:
    """Proportional attitude feedback plus finite-difference feedforward."""
    R = np.asarray(R, dtype=float)
    Rd = np.asarray(ref.attitude_at(t), dtype=float)
    err = ref.k_t * sk_vee(R.T @ Rd)
    d = ref.ff_delta
    Rd_dot = (np.asarray(ref.attitude_at(t + d), dtype=float)
              - np.asarray(ref.attitude_at(t - d), dtype=float)) / (2.0 * d)
    W = Rd.T @ Rd_dot
    S = 0.5 * (W - W.T)
    ff = np.array([S[2, 1], S[0, 2], S[1, 0]])
    return err + ff


def safe_input_single(R, nominal, p: ConicParams, alpha_gain: float,
                      omega_max: float | None = None) -> np.ndarray:
    """Project a nominal input onto the cone-containment row."""
    row = conic_containment_row(R, p, alpha_gain)
    sol = solve(QpProblem(omega_nom=np.asarray(nominal, dtype=float),
                          rows=[row], omega_max=omega_max))
    if sol.status != "optimal":
        raise QpInfeasibleError("containment QP infeasible")
    return sol.omega_star


def safe_input_network(state: NetworkState, g: DirectedGraph, collision: CollisionParams,
                       dist: DistanceGraphParams, gains: SyncGains, i: int,
                       omega_max: float | None = None) -> np.ndarray:
    """Synchronization input for agent i filtered through its collision rows.

    Reads only agents in N_i (graph neighbors, for the nominal) and N_d,i
    (distance neighbors, for the rows); everything else in the state is
    ignored.
    """
    nominal = sync_nominal(state, g, i, gains)
    nd = distance_neighbors(state, dist, i)
    rows = assemble_agent_constraints(state, i, nd, collision)
    sol = solve(QpProblem(omega_nom=nominal, rows=rows, omega_max=omega_max))
    if sol.status != "optimal":
        raise QpInfeasibleError(f"collision-avoidance QP infeasible for agent {i}")
    return sol.omega_star
