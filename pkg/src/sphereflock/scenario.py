"""Scenario configuration and deterministic initial-state generation.

A single JSON document fully determines a run: agent count, radii, gains,
graph recipe, timestep, horizon, and seed. Initial positions are sampled
uniformly over the upper hemisphere and rejection-sampled until every pair
starts at least the collision distance apart; each attitude is the minimal
rotation carrying the world z axis onto the sampled point, which keeps all
relative rotation angles strictly below pi.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import AgentState, NetworkState
from .so3 import exp_so3
from .topology import DirectedGraph, complete_graph, cycle_graph, random_strongly_connected

MODES = ("flock", "sync-only", "nominal-only", "single-conic")
GRAPH_KINDS = ("cycle", "complete", "random")

_PLACEMENT_TRIES = 2000


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class ConicDemoParams:
    """Cone half-angle, barrier gain, and reference sweep for single-body runs.

    The reference tilts the body z axis along a great circle at sweep_rate,
    deliberately crossing the cone boundary so the unfiltered tracking law
    would violate the constraint.
    """

    theta_c: float = math.pi / 6.0
    alpha_gain: float = 2.0
    k_t: float = 2.0
    sweep_rate: float = 0.15

    def validate(self) -> None:
        if not (0.0 < self.theta_c < math.pi / 2.0):
            raise ConfigError("conic.theta_c must lie in (0, pi/2)")
        for name in ("alpha_gain", "k_t", "sweep_rate"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"conic.{name} must be positive")


@dataclass
class ScenarioConfig:
    """Full experiment description; defaults give the standard 20-body flock."""

    mode: str = "flock"
    n: int = 20
    rho: float = 1.0
    D_c: float = math.pi / 150.0
    D_a: float = 2.0 * math.pi / 150.0
    k: float = 1.0
    k_c: float = 5.0
    dt: float = 1e-3
    horizon: float = 20.0
    seed: int = 0
    graph_kind: str = "cycle"
    graph_extra_edges: int = 0
    omega_c: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.2, -0.4]))
    omega_max: float | None = None
    weights: dict[tuple[int, int], float] = field(default_factory=dict)
    conic: ConicDemoParams | None = None

    @property
    def theta_c(self) -> float:
        """Collision distance expressed as a tilt angle, D_c / rho."""
        return self.D_c / self.rho

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rho <= 0.0:
            raise ConfigError("rho must be positive")
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.horizon <= 0.0:
            raise ConfigError("horizon must be positive")
        if not (0.0 < self.D_c < self.D_a < (self.rho * math.pi) / 2.0):
            raise ConfigError(
                f"need 0 < D_c < D_a < rho*pi/2, got D_c={self.D_c}, D_a={self.D_a}")
        if self.k <= 0.0 or self.k_c <= 0.0:
            raise ConfigError("gains k and k_c must be positive")
        if self.mode == "single-conic":
            if self.n != 1:
                raise ConfigError("single-conic mode requires n = 1")
        elif self.mode in ("flock", "sync-only"):
            if self.n < 2:
                raise ConfigError(f"{self.mode} mode requires n >= 2")
        elif self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.n == 1 and self.conic is None:
            raise ConfigError("single-body runs need a conic section")
        if self.conic is not None:
            self.conic.validate()
        if self.graph_kind not in GRAPH_KINDS:
            raise ConfigError(f"graph kind must be one of {GRAPH_KINDS}")
        if self.graph_extra_edges < 0:
            raise ConfigError("graph extra_edges must be nonnegative")
        omega_c = np.asarray(self.omega_c, dtype=float)
        if omega_c.shape != (3,) or not np.all(np.isfinite(omega_c)):
            raise ConfigError("omega_c must be a finite 3-vector")
        if self.omega_max is not None and self.omega_max <= 0.0:
            raise ConfigError("omega_max must be positive when present")
        for (i, j), w in self.weights.items():
            if not (0 <= i < self.n and 0 <= j < self.n and i != j):
                raise ConfigError(f"weight pair ({i}, {j}) out of range")
            if not (0.0 < w < 1.0):
                raise ConfigError(f"weight for pair ({i}, {j}) must lie in (0, 1)")
            back = self.weights.get((j, i))
            if back is not None and abs(w + back - 1.0) > 1e-12:
                raise ConfigError(f"weights for ({i}, {j}) and ({j}, {i}) must sum to 1")

    def complete_weights(self) -> dict[tuple[int, int], float]:
        """Weight table with the implied reverse entries filled in."""
        out = dict(self.weights)
        for (i, j), w in self.weights.items():
            out.setdefault((j, i), 1.0 - w)
        return out

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode, "n": self.n, "rho": self.rho,
            "D_c": self.D_c, "D_a": self.D_a, "k": self.k, "k_c": self.k_c,
            "dt": self.dt, "horizon": self.horizon, "seed": self.seed,
            "graph": {"kind": self.graph_kind, "extra_edges": self.graph_extra_edges},
            "omega_c": list(np.asarray(self.omega_c, dtype=float)),
            "omega_max": self.omega_max,
        }
        if self.weights:
            d["weights"] = [[i, j, w] for (i, j), w in sorted(self.weights.items())]
        if self.conic is not None:
            d["conic"] = {
                "theta_c": self.conic.theta_c, "alpha_gain": self.conic.alpha_gain,
                "k_t": self.conic.k_t, "sweep_rate": self.conic.sweep_rate,
            }
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config document must be a JSON object")
        known = {"mode", "n", "rho", "D_c", "theta_c", "D_a", "k", "k_c", "dt",
                 "horizon", "seed", "graph", "omega_c", "omega_max", "weights", "conic"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict = {}
        for key in ("mode", "n", "rho", "D_a", "k", "k_c", "dt", "horizon", "seed"):
            if key in raw:
                kwargs[key] = raw[key]
        rho = float(raw.get("rho", 1.0))
        if "D_c" in raw and "theta_c" in raw:
            if abs(float(raw["D_c"]) - rho * float(raw["theta_c"])) > 1e-12:
                raise ConfigError("D_c and theta_c both given but inconsistent")
            kwargs["D_c"] = float(raw["D_c"])
        elif "D_c" in raw:
            kwargs["D_c"] = float(raw["D_c"])
        elif "theta_c" in raw:
            kwargs["D_c"] = rho * float(raw["theta_c"])
        if "graph" in raw:
            g = raw["graph"]
            if not isinstance(g, dict) or "kind" not in g:
                raise ConfigError("graph must be an object with a 'kind' key")
            extra_g = set(g) - {"kind", "extra_edges"}
            if extra_g:
                raise ConfigError(f"unknown graph keys: {sorted(extra_g)}")
            kwargs["graph_kind"] = g["kind"]
            kwargs["graph_extra_edges"] = int(g.get("extra_edges", 0))
        if "omega_c" in raw:
            kwargs["omega_c"] = np.asarray(raw["omega_c"], dtype=float)
        if "omega_max" in raw:
            kwargs["omega_max"] = None if raw["omega_max"] is None else float(raw["omega_max"])
        if "weights" in raw:
            table: dict[tuple[int, int], float] = {}
            for entry in raw["weights"]:
                if len(entry) != 3:
                    raise ConfigError("each weights entry must be [i, j, w]")
                table[(int(entry[0]), int(entry[1]))] = float(entry[2])
            kwargs["weights"] = table
        if "conic" in raw and raw["conic"] is not None:
            c = raw["conic"]
            extra_c = set(c) - {"theta_c", "alpha_gain", "k_t", "sweep_rate"}
            if extra_c:
                raise ConfigError(f"unknown conic keys: {sorted(extra_c)}")
            kwargs["conic"] = ConicDemoParams(**{k: float(v) for k, v in c.items()})
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg


def load_config(path) -> ScenarioConfig:
    """Parse and validate a JSON config file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return ScenarioConfig.from_dict(raw)


def default_flock_config(seed: int = 0) -> ScenarioConfig:
    """The standard 20-body flock scenario with only the seed varying."""
    return ScenarioConfig(seed=seed)


def default_conic_config(dt: float = 1e-4, horizon: float = 6.0) -> ScenarioConfig:
    """Single-body cone-containment demo configuration."""
    return ScenarioConfig(mode="single-conic", n=1, dt=dt, horizon=horizon,
                          omega_c=np.zeros(3), conic=ConicDemoParams())


def _sample_hemisphere_point(rng: np.random.Generator) -> np.ndarray:
    z = rng.uniform(0.0, 1.0)
    az = rng.uniform(0.0, 2.0 * math.pi)
    s = math.sqrt(max(0.0, 1.0 - z * z))
    return np.array([s * math.cos(az), s * math.sin(az), z])


def _attitude_from_radial(u: np.ndarray) -> np.ndarray:
    # Minimal rotation carrying e3 onto the unit vector u. Tilt angles stay
    # below pi/2 on the upper hemisphere, so relative angles stay below pi.
    axis = np.array([-u[1], u[0], 0.0])  # e3 x u
    s = float(np.linalg.norm(axis))
    if s < 1e-12:
        return np.eye(3)
    return exp_so3(axis / s, math.atan2(s, float(u[2])))


def build_scenario(cfg: ScenarioConfig) -> tuple[NetworkState, DirectedGraph]:
    """Seeded initial state plus coordination graph.

    Raises:
        ConfigError: on invalid parameters, or if no collision-free placement
            is found within the retry budget (sphere too crowded).
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    cos_dc = math.cos(cfg.D_c / cfg.rho)
    points: list[np.ndarray] = []
    for i in range(cfg.n):
        for _ in range(_PLACEMENT_TRIES):
            u = _sample_hemisphere_point(rng)
            if all(float(u @ q) <= cos_dc for q in points):
                points.append(u)
                break
        else:
            raise ConfigError(
                f"could not place agent {i} at separation >= D_c after "
                f"{_PLACEMENT_TRIES} tries; sphere too crowded")
    agents = [AgentState.make(i, _attitude_from_radial(u), cfg.rho)
              for i, u in enumerate(points)]
    state = NetworkState(agents=agents, time=0.0, rho=cfg.rho)

    if cfg.n == 1:
        graph = DirectedGraph(n=1, edges=frozenset())
    elif cfg.graph_kind == "cycle":
        graph = cycle_graph(cfg.n)
    elif cfg.graph_kind == "complete":
        graph = complete_graph(cfg.n)
    else:
        graph = random_strongly_connected(cfg.n, cfg.graph_extra_edges, rng)

    for i in range(cfg.n):
        for j in range(i + 1, cfg.n):
            rel = agents[i].attitude.T @ agents[j].attitude
            if float(np.trace(rel)) <= -1.0:
                raise ConfigError(f"initial relative angle of pair ({i}, {j}) not below pi")
    return state, graph


def with_overrides(cfg: ScenarioConfig, seed: int | None = None, dt: float | None = None,
                   horizon: float | None = None) -> ScenarioConfig:
    """Copy of cfg with CLI-style overrides applied and re-validated."""
    out = replace(cfg)
    if seed is not None:
        out.seed = seed
    if dt is not None:
        out.dt = dt
    if horizon is not None:
        out.horizon = horizon
    out.validate()
    return out
