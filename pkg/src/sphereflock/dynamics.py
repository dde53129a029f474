"""Time evolution of sphere-bound rigid bodies.

Attitudes evolve by Rdot = R @ hat(omega); positions are never integrated
on their own but re-derived from the attitude each step, which keeps every
body exactly on the sphere. Updates use the closed-form exponential for a
zero-order-held omega, so group invariants hold to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .so3 import E3, check_rotation, embed_position, exp_so3, hat


@dataclass
class AgentState:
    """One rigid body: attitude, derived sphere position, last applied omega."""

    id: int
    attitude: np.ndarray
    position: np.ndarray
    last_omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def make(cls, agent_id: int, attitude, rho: float, last_omega=None) -> "AgentState":
        """Build a state with the position derived from the attitude."""
        attitude = check_rotation(attitude)
        omega = np.zeros(3) if last_omega is None else np.asarray(last_omega, dtype=float)
        return cls(id=agent_id, attitude=attitude,
                   position=embed_position(attitude, rho), last_omega=omega)


@dataclass
class NetworkState:
    """Snapshot of all agents at one instant."""

    agents: list[AgentState]
    time: float
    rho: float

    def __post_init__(self) -> None:
        ids = [a.id for a in self.agents]
        if ids != list(range(len(self.agents))):
            raise ValueError(f"agent ids must be 0..n-1 in order, got {ids}")
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")

    @property
    def n(self) -> int:
        return len(self.agents)

    def attitudes(self) -> np.ndarray:
        """Stacked (n, 3, 3) attitude array."""
        return np.stack([a.attitude for a in self.agents])

    def positions(self) -> np.ndarray:
        """Stacked (n, 3) position array."""
        return np.stack([a.position for a in self.agents])


def step_attitude(R, omega, dt: float) -> np.ndarray:
    """Advance Rdot = R @ hat(omega) by dt with omega held constant.

    Returns R @ exp_so3(omega / |omega|, |omega| * dt), which is the exact
    flow for constant omega and orthonormal by construction.
    """
    if dt <= 0.0:
        raise ValueError("step_attitude: dt must be positive")
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ValueError("step_attitude: omega must be finite")
    R = np.asarray(R, dtype=float)
    n = float(np.linalg.norm(omega))
    if n == 0.0:
        return R.copy()
    return R @ exp_so3(omega / n, n * dt)


def step_network(state: NetworkState, inputs, dt: float) -> NetworkState:
    """Advance every agent by one step; returns a fresh state.

    Args:
        state: network snapshot at the start of the step.
        inputs: sequence of (3,) angular velocities, one per agent.
        dt: step length, s.
    """
    if len(inputs) != state.n:
        raise ValueError(f"expected {state.n} inputs, got {len(inputs)}")
    new_agents = []
    for agent, omega in zip(state.agents, inputs):
        omega = np.asarray(omega, dtype=float)
        R_next = step_attitude(agent.attitude, omega, dt)
        new_agents.append(AgentState(
            id=agent.id,
            attitude=R_next,
            position=embed_position(R_next, state.rho),
            last_omega=omega.copy(),
        ))
    return replace(state, agents=new_agents, time=state.time + dt)


def _translation_integral(omega: np.ndarray, dt: float) -> np.ndarray:
    # V = integral_0^dt exp(hat(omega) s) ds, so p_next = p + R @ V @ v is the
    # exact flow for constant body (v, omega). Coefficients degrade gracefully
    # as |omega| -> 0; only the exact zero needs a branch.
    n = float(np.linalg.norm(omega))
    if n == 0.0:
        return dt * np.eye(3)
    K = hat(omega)
    a = n * dt
    return dt * np.eye(3) + ((1.0 - np.cos(a)) / n**2) * K + ((a - np.sin(a)) / n**3) * (K @ K)


def step_free(p, R, v, omega, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Advance free-space rigid body motion pdot = R v, Rdot = R hat(omega).

    Used for cross-validation: with v = -rho * hat(e3) @ omega and p on the
    sphere, this reproduces the sphere-constrained update exactly.
    """
    if dt <= 0.0:
        raise ValueError("step_free: dt must be positive")
    p = np.asarray(p, dtype=float)
    R = np.asarray(R, dtype=float)
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    p_next = p + R @ _translation_integral(omega, dt) @ v
    R_next = step_attitude(R, omega, dt)
    return p_next, R_next
