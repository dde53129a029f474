"""Trajectory records, derived metrics, and file export.

Logs are plain array bundles, one row per step. Export targets round-trip
exactly: CSV prints every float with 17 significant digits and JSON relies
on Python's shortest-repr floats, so a reloaded log compares equal bit for
bit (NaN metric columns of single-body runs included).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import NetworkState
from .so3 import geodesic_distance

_FLOAT_FMT = ".17g"


@dataclass
class TrajectoryLog:
    """Per-step record of a network run.

    omega holds the applied input (common drift term included when the mode
    adds one); omega_nom the unfiltered nominal. For single-body runs the
    pairwise metric columns are NaN and min_pair_h carries the conic barrier
    value instead of a pairwise minimum.
    """

    t: np.ndarray              # (S+1,)
    attitudes: np.ndarray      # (S+1, n, 3, 3)
    positions: np.ndarray      # (S+1, n, 3)
    omega: np.ndarray          # (S+1, n, 3)
    omega_nom: np.ndarray      # (S+1, n, 3)
    min_geodesic: np.ndarray   # (S+1,)
    max_frobenius: np.ndarray  # (S+1,)
    min_pair_h: np.ndarray     # (S+1,)

    @property
    def n_agents(self) -> int:
        return self.attitudes.shape[1]

    @property
    def n_steps(self) -> int:
        return len(self.t)

    def equals(self, other: "TrajectoryLog") -> bool:
        """Exact equality, treating NaNs as equal."""
        return all(
            np.array_equal(getattr(self, name), getattr(other, name), equal_nan=True)
            for name in ("t", "attitudes", "positions", "omega", "omega_nom",
                         "min_geodesic", "max_frobenius", "min_pair_h"))


@dataclass
class ConicDemoLog:
    """Single-body containment demo: filtered trajectory plus both barrier traces."""

    t: np.ndarray            # (S+1,)
    attitude: np.ndarray     # (S+1, 3, 3) filtered run
    position: np.ndarray     # (S+1, 3)
    omega: np.ndarray        # (S+1, 3)
    omega_nom: np.ndarray    # (S+1, 3)
    h_filtered: np.ndarray   # (S+1,)
    h_nominal: np.ndarray    # (S+1,) counterfactual without the filter

    def equals(self, other: "ConicDemoLog") -> bool:
        return all(
            np.array_equal(getattr(self, name), getattr(other, name), equal_nan=True)
            for name in ("t", "attitude", "position", "omega", "omega_nom",
                         "h_filtered", "h_nominal"))


def metrics_min_geodesic(state: NetworkState) -> float:
    """Minimum geodesic distance over unordered agent pairs."""
    if state.n < 2:
        raise ValueError("minimum geodesic distance needs at least two agents")
    best = math.inf
    for i in range(state.n):
        for j in range(i + 1, state.n):
            rel = state.agents[i].attitude.T @ state.agents[j].attitude
            best = min(best, geodesic_distance(rel, state.rho))
    return best


def metrics_disagreement(state: NetworkState) -> float:
    """Maximum Frobenius distance between attitudes over unordered pairs."""
    if state.n < 2:
        raise ValueError("attitude disagreement needs at least two agents")
    worst = 0.0
    for i in range(state.n):
        for j in range(i + 1, state.n):
            worst = max(worst, float(np.linalg.norm(
                state.agents[i].attitude - state.agents[j].attitude)))
    return worst


def _agent_columns(i: int) -> list[str]:
    cols = [f"agent{i}_R{r}{c}" for r in range(3) for c in range(3)]
    cols += [f"agent{i}_p{ax}" for ax in "xyz"]
    cols += [f"agent{i}_w{ax}" for ax in "xyz"]
    cols += [f"agent{i}_wnom{ax}" for ax in "xyz"]
    return cols


def trajectory_header(n: int) -> list[str]:
    header = ["t"]
    for i in range(n):
        header += _agent_columns(i)
    header += ["min_geo_dist", "max_frob", "min_hij"]
    return header


def _f(x: float) -> str:
    return format(float(x), _FLOAT_FMT)


def export_log(log: TrajectoryLog, path, fmt: str = "csv") -> None:
    """Write a trajectory log to disk as csv or json."""
    if fmt == "csv":
        n = log.n_agents
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(trajectory_header(n))
            for s in range(log.n_steps):
                row = [_f(log.t[s])]
                for i in range(n):
                    row += [_f(v) for v in log.attitudes[s, i].ravel()]
                    row += [_f(v) for v in log.positions[s, i]]
                    row += [_f(v) for v in log.omega[s, i]]
                    row += [_f(v) for v in log.omega_nom[s, i]]
                row += [_f(log.min_geodesic[s]), _f(log.max_frobenius[s]),
                        _f(log.min_pair_h[s])]
                writer.writerow(row)
    elif fmt == "json":
        doc = {
            "schema": "sphereflock-trajectory-v1",
            "n": log.n_agents,
            "t": log.t.tolist(),
            "attitudes": log.attitudes.tolist(),
            "positions": log.positions.tolist(),
            "omega": log.omega.tolist(),
            "omega_nom": log.omega_nom.tolist(),
            "min_geo_dist": log.min_geodesic.tolist(),
            "max_frob": log.max_frobenius.tolist(),
            "min_hij": log.min_pair_h.tolist(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def load_log(path, fmt: str = "csv") -> TrajectoryLog:
    """Read back a log written by export_log."""
    if fmt == "csv":
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [r for r in reader if r]
        ncols = len(header)
        n, rem = divmod(ncols - 4, 18)
        if rem != 0 or header != trajectory_header(n):
            raise ValueError("file does not match the trajectory CSV schema")
        steps = len(rows)
        log = TrajectoryLog(
            t=np.zeros(steps),
            attitudes=np.zeros((steps, n, 3, 3)),
            positions=np.zeros((steps, n, 3)),
            omega=np.zeros((steps, n, 3)),
            omega_nom=np.zeros((steps, n, 3)),
            min_geodesic=np.zeros(steps),
            max_frobenius=np.zeros(steps),
            min_pair_h=np.zeros(steps),
        )
        for s, row in enumerate(rows):
            vals = [float(x) for x in row]
            log.t[s] = vals[0]
            pos = 1
            for i in range(n):
                log.attitudes[s, i] = np.array(vals[pos:pos + 9]).reshape(3, 3)
                log.positions[s, i] = vals[pos + 9:pos + 12]
                log.omega[s, i] = vals[pos + 12:pos + 15]
                log.omega_nom[s, i] = vals[pos + 15:pos + 18]
                pos += 18
            log.min_geodesic[s] = vals[pos]
            log.max_frobenius[s] = vals[pos + 1]
            log.min_pair_h[s] = vals[pos + 2]
        return log
    if fmt == "json":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("schema") != "sphereflock-trajectory-v1":
            raise ValueError("file does not match the trajectory JSON schema")
        return TrajectoryLog(
            t=np.asarray(doc["t"], dtype=float),
            attitudes=np.asarray(doc["attitudes"], dtype=float).reshape(-1, doc["n"], 3, 3),
            positions=np.asarray(doc["positions"], dtype=float).reshape(-1, doc["n"], 3),
            omega=np.asarray(doc["omega"], dtype=float).reshape(-1, doc["n"], 3),
            omega_nom=np.asarray(doc["omega_nom"], dtype=float).reshape(-1, doc["n"], 3),
            min_geodesic=np.asarray(doc["min_geo_dist"], dtype=float),
            max_frobenius=np.asarray(doc["max_frob"], dtype=float),
            min_pair_h=np.asarray(doc["min_hij"], dtype=float),
        )
    raise ValueError(f"unknown export format {fmt!r}")


def conic_demo_header() -> list[str]:
    header = ["t"]
    header += [f"R{r}{c}" for r in range(3) for c in range(3)]
    header += [f"p{ax}" for ax in "xyz"]
    header += [f"w{ax}" for ax in "xyz"]
    header += [f"wnom{ax}" for ax in "xyz"]
    header += ["h_filtered", "h_nominal"]
    return header


def export_conic_demo(log: ConicDemoLog, path, fmt: str = "csv") -> None:
    """Write a containment-demo log as csv or json."""
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(conic_demo_header())
            for s in range(len(log.t)):
                row = [_f(log.t[s])]
                row += [_f(v) for v in log.attitude[s].ravel()]
                row += [_f(v) for v in log.position[s]]
                row += [_f(v) for v in log.omega[s]]
                row += [_f(v) for v in log.omega_nom[s]]
                row += [_f(log.h_filtered[s]), _f(log.h_nominal[s])]
                writer.writerow(row)
    elif fmt == "json":
        doc = {
            "schema": "sphereflock-conic-demo-v1",
            "t": log.t.tolist(),
            "attitude": log.attitude.tolist(),
            "position": log.position.tolist(),
            "omega": log.omega.tolist(),
            "omega_nom": log.omega_nom.tolist(),
            "h_filtered": log.h_filtered.tolist(),
            "h_nominal": log.h_nominal.tolist(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
