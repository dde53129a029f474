"""Deterministic simulation loop.

Each step reads one immutable snapshot: distance neighbors and constraint
rows are rebuilt from the step-start state, every agent solves its own
projection QP against that snapshot, the common drift velocity is added
after the filter, and only then do the attitudes advance. Logging happens
once per step including the final state.

The loop computes pairwise quantities in vectorized form (the cosine Gram
matrix of the radial axes carries distances, barrier values, and neighbor
sets at once); the per-pair module operations define the semantics and the
tests pin the two paths together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .qp import _solve_arrays, _strip_degenerate
from .scenario import ConfigError, ScenarioConfig, build_scenario
from .so3 import rot_x
from .controllers import TrackingReference, tracking_nominal
from .trajlog import ConicDemoLog, TrajectoryLog


class SafetyAbortError(RuntimeError):
    """A per-agent QP reported infeasibility mid-run."""

    def __init__(self, step: int, agent: int):
        super().__init__(f"QP infeasible at step {step} for agent {agent}")
        self.step = step
        self.agent = agent


def _batch_step(R: np.ndarray, omegas: np.ndarray, dt: float) -> np.ndarray:
    """Advance a stack of attitudes by the exact constant-omega flow."""
    n = R.shape[0]
    norms = np.linalg.norm(omegas, axis=1)
    out = R.copy()
    mask = norms > 0.0
    if not np.any(mask):
        return out
    axes = omegas[mask] / norms[mask, None]
    K = np.zeros((int(mask.sum()), 3, 3))
    K[:, 0, 1] = -axes[:, 2]
    K[:, 0, 2] = axes[:, 1]
    K[:, 1, 0] = axes[:, 2]
    K[:, 1, 2] = -axes[:, 0]
    K[:, 2, 0] = -axes[:, 1]
    K[:, 2, 1] = axes[:, 0]
    ang = norms[mask] * dt
    E = (np.eye(3)[None, :, :]
         + np.sin(ang)[:, None, None] * K
         + (1.0 - np.cos(ang))[:, None, None] * np.einsum("nij,njk->nik", K, K))
    out[mask] = np.einsum("nij,njk->nik", R[mask], E)
    return out


def _weight_matrix(cfg: ScenarioConfig) -> np.ndarray:
    W = np.full((cfg.n, cfg.n), 0.5)
    for (i, j), w in cfg.complete_weights().items():
        W[i, j] = w
    return W


def _tracking_reference(cfg: ScenarioConfig) -> TrackingReference:
    rate = cfg.conic.sweep_rate
    return TrackingReference(attitude_at=lambda t: rot_x(rate * t), k_t=cfg.conic.k_t)


@dataclass
class _Loop:
    """Precomputed per-run arrays shared by all steps."""

    e_src: np.ndarray
    e_dst: np.ndarray
    W: np.ndarray
    iu: tuple
    cos_dc: float
    cos_da: float


def run(cfg: ScenarioConfig) -> TrajectoryLog:
    """Simulate a scenario; deterministic given the config.

    Raises:
        ConfigError: invalid configuration.
        SafetyAbortError: a QP became infeasible (cannot happen from starts
            inside the safe set; surfaced rather than patched if it does).
    """
    cfg.validate()
    state0, graph = build_scenario(cfg)
    n, rho, dt = cfg.n, cfg.rho, cfg.dt
    steps = int(round(cfg.horizon / dt))
    filter_on = cfg.mode in ("flock", "single-conic")
    add_drift = cfg.mode in ("flock", "nominal-only") and n >= 2
    sync_mode = n >= 2
    tracking_ref = None if sync_mode else _tracking_reference(cfg)
    conic = cfg.conic
    cos_conic = math.cos(conic.theta_c) if conic is not None else 0.0

    edges = sorted(graph.edges)
    loop = _Loop(
        e_src=np.array([j for j, _ in edges], dtype=int),
        e_dst=np.array([i for _, i in edges], dtype=int),
        W=_weight_matrix(cfg),
        iu=np.triu_indices(n, 1),
        cos_dc=math.cos(cfg.D_c / rho),
        cos_da=math.cos(cfg.D_a / rho),
    )
    omega_c = np.asarray(cfg.omega_c, dtype=float)
    two_k = 2.0 * cfg.k

    log = TrajectoryLog(
        t=np.zeros(steps + 1),
        attitudes=np.zeros((steps + 1, n, 3, 3)),
        positions=np.zeros((steps + 1, n, 3)),
        omega=np.zeros((steps + 1, n, 3)),
        omega_nom=np.zeros((steps + 1, n, 3)),
        min_geodesic=np.full(steps + 1, np.nan),
        max_frobenius=np.full(steps + 1, np.nan),
        min_pair_h=np.full(steps + 1, np.nan),
    )

    R = state0.attitudes()
    for s in range(steps + 1):
        t = s * dt
        Z = np.ascontiguousarray(R[:, :, 2])
        C = np.clip(Z @ Z.T, -1.0, 1.0) if n >= 2 else None

        if n >= 2:
            cvals = C[loop.iu]
            cmax = float(np.max(cvals))
            log.min_geodesic[s] = rho * math.acos(cmax)
            F = R.reshape(n, 9)
            gram = F @ F.T
            frob_sq = np.clip(6.0 - 2.0 * gram[loop.iu], 0.0, None)
            log.max_frobenius[s] = math.sqrt(float(np.max(frob_sq)))
            log.min_pair_h[s] = loop.cos_dc - cmax
        else:
            log.min_pair_h[s] = float(R[0, 2, 2]) - cos_conic

        if sync_mode:
            nom = np.zeros((n, 3))
            if len(loop.e_src):
                Ri = R[loop.e_dst]
                Rj = R[loop.e_src]
                rel = np.einsum("eab,eac->ebc", Ri, Rj)
                v = 0.5 * np.stack([rel[:, 2, 1] - rel[:, 1, 2],
                                    rel[:, 0, 2] - rel[:, 2, 0],
                                    rel[:, 1, 0] - rel[:, 0, 1]], axis=1)
                np.add.at(nom, loop.e_dst, v)
                nom *= cfg.k_c
        else:
            nom = tracking_nominal(R[0], tracking_ref, t)[None, :]

        applied = nom.copy()
        if filter_on:
            if cfg.mode == "single-conic":
                # containment row: a = -(e3^T R hat(e3)) = (-R[2,1], R[2,0], 0)
                z_row = R[0, 2, :]
                a = np.array([[-z_row[1], z_row[0], 0.0]])
                b = np.array([-conic.alpha_gain * (float(R[0, 2, 2]) - cos_conic)])
                applied[0] = _filtered_input(nom[0], a, b, cfg.omega_max, s, 0)
            else:
                mask = C >= loop.cos_da
                np.fill_diagonal(mask, False)
                for i in range(n):
                    js = np.flatnonzero(mask[i])
                    if len(js) == 0:
                        continue
                    U = Z[js] @ R[i]           # row j = R_i^T z_j
                    A = np.stack([U[:, 1], -U[:, 0], np.zeros(len(js))], axis=1)
                    b = two_k * loop.W[i, js] * (C[i, js] - loop.cos_dc)
                    if float(np.min(A @ nom[i] - b)) >= 0.0 and (
                            cfg.omega_max is None
                            or float(np.linalg.norm(nom[i])) <= cfg.omega_max):
                        continue
                    applied[i] = _filtered_input(nom[i], A, b, cfg.omega_max, s, i)
        if add_drift:
            applied = applied + omega_c

        log.t[s] = t
        log.attitudes[s] = R
        log.positions[s] = rho * Z
        log.omega[s] = applied
        log.omega_nom[s] = nom
        if s < steps:
            R = _batch_step(R, applied, dt)
    return log


def _filtered_input(nom: np.ndarray, A: np.ndarray, b: np.ndarray,
                    omega_max: float | None, step: int, agent: int) -> np.ndarray:
    stripped = _strip_degenerate(A, b)
    if stripped is None:
        raise SafetyAbortError(step, agent)
    omega = _solve_arrays(nom, stripped[0], stripped[1], omega_max)
    if omega is None:
        raise SafetyAbortError(step, agent)
    return omega


def run_conic_demo(cfg: ScenarioConfig) -> ConicDemoLog:
    """Filtered single-body run plus the unfiltered counterfactual.

    Both runs share the reference sweep; the counterfactual demonstrates
    that the nominal law alone leaves the cone (its barrier trace goes
    negative) while the filtered trace does not.
    """
    if cfg.mode != "single-conic":
        raise ConfigError("run_conic_demo requires mode single-conic")
    filtered = run(cfg)
    counterfactual = run(replace(cfg, mode="nominal-only"))
    return ConicDemoLog(
        t=filtered.t,
        attitude=filtered.attitudes[:, 0],
        position=filtered.positions[:, 0],
        omega=filtered.omega[:, 0],
        omega_nom=filtered.omega_nom[:, 0],
        h_filtered=filtered.min_pair_h,
        h_nominal=counterfactual.min_pair_h,
    )


def compare_common_drift(cfg: ScenarioConfig) -> dict:
    """Run a flock scenario with and without the common drift velocity.

    Returns the largest absolute difference between the two minimum-distance
    traces plus both safety margins. The drift term is added in the body
    frame, which does not leave relative attitudes exactly invariant; this
    comparison quantifies the effect instead of assuming it away.
    """
    if cfg.mode != "flock":
        raise ConfigError("compare_common_drift requires mode flock")
    with_drift = run(cfg)
    without_drift = run(replace(cfg, omega_c=np.zeros(3)))
    return {
        "max_min_geodesic_diff": float(np.max(np.abs(
            with_drift.min_geodesic - without_drift.min_geodesic))),
        "min_geodesic_with_drift": float(np.min(with_drift.min_geodesic)),
        "min_geodesic_without_drift": float(np.min(without_drift.min_geodesic)),
    }
