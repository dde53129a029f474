"""Exact solver for tiny projection QPs.

    minimize    ||omega - omega_nom||^2
    subject to  a_m^T omega >= b_m        (m linear rows)
                ||omega||   <= omega_max  (optional norm ball)

The decision variable is always a 3-vector and m stays small (one row per
nearby agent), so exactness beats generality: the primary path is an
active-set iteration whose working-set subproblems are solved in closed
form, and a full enumeration of candidate active sets serves as fallback.
Every accepted solution is verified against the constraints before being
returned. A brute-force grid oracle lives alongside for tests; it shares
no code with the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .safety import ConstraintRow

_FEAS_TOL = 1e-9        # slack accepted on returned solutions
_ADD_TOL = 1e-11        # violation that pulls a row into the working set
_DUAL_TOL = 1e-11       # negative-multiplier threshold for dropping a row
_DEGENERATE_A = 1e-12   # below this norm a row is treated as all-zero
_ACTIVE_TOL = 1e-8      # slack below which a row is reported active
_MAX_ITER = 60


class QpInfeasibleError(RuntimeError):
    """Raised by callers that cannot proceed without a feasible input."""


@dataclass
class QpProblem:
    omega_nom: np.ndarray
    rows: list[ConstraintRow]
    omega_max: float | None = None


@dataclass
class QpSolution:
    """Solver output; duals are exposed so callers can audit optimality.

    When status is "optimal" the KKT conditions hold: primal feasibility to
    1e-9, nonnegative multipliers, complementary slackness, and stationarity
    2 (omega - omega_nom) = sum mu_m a_m - 2 nu omega to 1e-8.
    """

    omega_star: np.ndarray
    active_set: tuple[int, ...]
    status: str  # "optimal" | "infeasible"
    row_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ball_dual: float = 0.0


def _eq_solve(omega_nom: np.ndarray, A_w: np.ndarray, b_w: np.ndarray):
    """Minimize over the affine set A_w omega = b_w.

    Returns (omega, mu) with 2 (omega - omega_nom) = A_w^T mu. Rank-deficient
    working sets fall back to least squares; the minimizer is still unique
    even when the multipliers are not.
    """
    k = A_w.shape[0]
    if k == 0:
        return omega_nom.copy(), np.zeros(0)
    G = A_w @ A_w.T
    r = b_w - A_w @ omega_nom
    if k == 1:
        g = G[0, 0]
        lam = np.zeros(1) if g <= _DEGENERATE_A**2 else r / g
    else:
        det = np.linalg.det(G)
        diag_prod = float(np.prod(np.diag(G)))
        if diag_prod > 0.0 and abs(det) > 1e-12 * diag_prod:
            lam = np.linalg.solve(G, r)
        else:
            lam = np.linalg.lstsq(G, r, rcond=None)[0]
    return omega_nom + A_w.T @ lam, 2.0 * lam


def _ball_solve(omega_nom: np.ndarray, A_w: np.ndarray, b_w: np.ndarray, omega_max: float):
    """Working-set solve with the norm ball active: ||omega|| = omega_max.

    Stationarity gives s * omega = omega_nom + A_w^T lam with s = 1 + nu, and
    lam affine in s, so omega(s) = c / s + d with c in the null space of A_w
    and d in its row space; ||omega(s)|| then pins s. Returns None when no
    stationary point with nu >= 0 exists (ball not actually binding, or the
    affine set misses the ball).
    """
    k = A_w.shape[0]
    if k == 0:
        nn = float(np.linalg.norm(omega_nom))
        if nn < omega_max * (1.0 - 1e-12) or nn == 0.0:
            return None
        s = nn / omega_max
        return omega_nom / s, np.zeros(0), s - 1.0
    G = A_w @ A_w.T
    det = np.linalg.det(G) if k > 1 else G[0, 0]
    diag_prod = float(np.prod(np.diag(G)))
    if not (diag_prod > 0.0 and abs(det) > 1e-12 * diag_prod):
        return None
    lam0 = np.linalg.solve(G, -A_w @ omega_nom) if k > 1 else (-A_w @ omega_nom) / G[0, 0]
    lam1 = np.linalg.solve(G, b_w) if k > 1 else b_w / G[0, 0]
    c = omega_nom + A_w.T @ lam0
    d = A_w.T @ lam1
    c2 = float(c @ c)
    rad2 = omega_max**2 - float(d @ d)
    if c2 <= 1e-24:
        if abs(math.sqrt(float(d @ d)) - omega_max) <= _FEAS_TOL:
            return d, 2.0 * (lam0 + lam1), 0.0
        return None
    if rad2 <= 0.0:
        return None
    s = math.sqrt(c2 / rad2)
    if s < 1.0 - 1e-12:
        return None
    return c / s + d, 2.0 * (lam0 + s * lam1), s - 1.0


def _violations(omega: np.ndarray, A: np.ndarray, b: np.ndarray,
                row_norms: np.ndarray, omega_max: float | None):
    """Most violated constraint at omega, violation scaled by the row norm.

    Returns (index, amount); index -1 is the ball, None if nothing violated.
    """
    worst_idx, worst = None, _ADD_TOL
    if A.shape[0] > 0:
        slack = (A @ omega - b) / row_norms
        j = int(np.argmin(slack))
        if -slack[j] > worst:
            worst_idx, worst = j, -slack[j]
    if omega_max is not None:
        over = float(np.linalg.norm(omega)) - omega_max
        if over > worst:
            worst_idx, worst = -1, over
    return worst_idx, worst


def _iterate_active_set(omega_nom, A, b, row_norms, omega_max):
    """Add-worst / drop-negative active-set loop. None on stall or cycling."""
    work: list[int] = []
    ball = False
    for _ in range(_MAX_ITER):
        if ball:
            sol = _ball_solve(omega_nom, A[work], b[work], omega_max)
            if sol is None:
                ball = False
                continue
            omega, mu_w, nu = sol
        else:
            omega, mu_w = _eq_solve(omega_nom, A[work], b[work])
            nu = 0.0
        if len(mu_w) > 0:
            worst_pos = int(np.argmin(mu_w))
            if mu_w[worst_pos] < -_DUAL_TOL:
                work.pop(worst_pos)
                continue
        j, _ = _violations(omega, A, b, row_norms, omega_max)
        if j is None:
            return omega, work, ball, mu_w, nu
        if j == -1:
            if ball:
                return None  # ball both active and violated: numerical stall
            ball = True
            continue
        if j in work or len(work) >= 3:
            return None
        work.append(j)
    return None


def _feasible(omega, A, b, omega_max, tol=_FEAS_TOL):
    if A.shape[0] > 0 and float(np.min(A @ omega - b)) < -tol:
        return False
    if omega_max is not None and float(np.linalg.norm(omega)) > omega_max + tol:
        return False
    return True


def _enumerate_solve(omega_nom, A, b, omega_max):
    """Exhaustive candidate enumeration; exact but slower than iteration.

    Every KKT point of the problem appears among the working-set solutions
    over subsets of size <= 3 (plus ball-active variants), so the feasible
    candidate with the smallest objective is the global minimizer.
    """
    m = A.shape[0]
    best_obj, best = math.inf, None
    indices = range(m)
    for size in range(0, min(3, m) + 1):
        for comb in combinations(indices, size):
            sel = list(comb)
            omega, mu_w = _eq_solve(omega_nom, A[sel], b[sel])
            if _feasible(omega, A, b, omega_max):
                obj = float(np.sum((omega - omega_nom) ** 2))
                if obj < best_obj - 1e-15:
                    best_obj, best = obj, (omega, sel, False, mu_w, 0.0)
    if omega_max is not None:
        for size in range(0, min(3, m) + 1):
            for comb in combinations(indices, size):
                sel = list(comb)
                sol = _ball_solve(omega_nom, A[sel], b[sel], omega_max)
                if sol is None:
                    continue
                omega, mu_w, nu = sol
                if _feasible(omega, A, b, omega_max):
                    obj = float(np.sum((omega - omega_nom) ** 2))
                    if obj < best_obj - 1e-15:
                        best_obj, best = obj, (omega, sel, True, mu_w, nu)
    return best


def _solve_arrays(omega_nom: np.ndarray, A: np.ndarray, b: np.ndarray,
                  omega_max: float | None) -> np.ndarray | None:
    """Array-level solver core. Returns the minimizer, or None if infeasible.

    A must contain no degenerate (near-zero) rows; callers strip those first.
    """
    if A.shape[0] == 0 or float(np.min(A @ omega_nom - b)) >= 0.0:
        if omega_max is None or float(np.linalg.norm(omega_nom)) <= omega_max:
            return omega_nom.copy()
    row_norms = np.linalg.norm(A, axis=1) if A.shape[0] > 0 else np.zeros(0)
    result = _iterate_active_set(omega_nom, A, b, row_norms, omega_max)
    if result is not None:
        omega = result[0]
        if _feasible(omega, A, b, omega_max):
            return omega
    best = _enumerate_solve(omega_nom, A, b, omega_max)
    if best is None:
        return None
    return best[0]


def _nnls_duals(target: np.ndarray, cols: list[np.ndarray]):
    """Nonnegative least squares by support enumeration (tiny column counts)."""
    K = len(cols)
    if K == 0:
        return np.zeros(0), float(np.linalg.norm(target))
    C = np.column_stack(cols)
    best_x, best_res = np.zeros(K), float(np.linalg.norm(target))
    for size in range(1, K + 1):
        for support in combinations(range(K), size):
            sel = list(support)
            x_s, *_ = np.linalg.lstsq(C[:, sel], target, rcond=None)
            if np.any(x_s < -1e-12):
                continue
            res = float(np.linalg.norm(C[:, sel] @ np.clip(x_s, 0.0, None) - target))
            if res < best_res - 1e-15:
                best_res = res
                best_x = np.zeros(K)
                best_x[sel] = np.clip(x_s, 0.0, None)
    return best_x, best_res


def solve(problem: QpProblem) -> QpSolution:
    """Global minimizer of the projection QP, with KKT data attached.

    Degenerate rows (||a|| ~ 0) with b <= 0 are vacuous and dropped; with
    b > 0 they make the problem infeasible outright. Infeasibility is
    reported in the status, never patched over.
    """
    omega_nom = np.asarray(problem.omega_nom, dtype=float)
    if problem.omega_max is not None and problem.omega_max <= 0.0:
        raise ValueError("omega_max must be positive when present")
    m = len(problem.rows)
    A_full = np.array([np.asarray(r.a, dtype=float) for r in problem.rows]).reshape(m, 3)
    b_full = np.array([float(r.b) for r in problem.rows])
    if not (np.all(np.isfinite(A_full)) and np.all(np.isfinite(b_full))):
        raise ValueError("constraint rows must be finite")

    live = np.linalg.norm(A_full, axis=1) > _DEGENERATE_A if m else np.zeros(0, dtype=bool)
    nan3 = np.full(3, np.nan)
    if m and np.any(~live & (b_full > 0.0)):
        return QpSolution(omega_star=nan3, active_set=(), status="infeasible",
                          row_duals=np.zeros(m))
    idx_map = np.flatnonzero(live)
    omega = _solve_arrays(omega_nom, A_full[live], b_full[live], problem.omega_max)
    if omega is None:
        return QpSolution(omega_star=nan3, active_set=(), status="infeasible",
                          row_duals=np.zeros(m))

    slack = A_full[live] @ omega - b_full[live] if len(idx_map) else np.zeros(0)
    active = tuple(int(idx_map[j]) for j in range(len(idx_map))
                   if slack[j] <= _ACTIVE_TOL)
    ball_active = (problem.omega_max is not None
                   and abs(float(np.linalg.norm(omega)) - problem.omega_max) <= _ACTIVE_TOL)
    cols = [A_full[j] for j in active]
    if ball_active:
        cols.append(-2.0 * omega)
    mu, _ = _nnls_duals(2.0 * (omega - omega_nom), cols)
    row_duals = np.zeros(m)
    for pos, j in enumerate(active):
        row_duals[j] = mu[pos]
    ball_dual = float(mu[-1]) if ball_active else 0.0
    return QpSolution(omega_star=omega, active_set=active, status="optimal",
                      row_duals=row_duals, ball_dual=ball_dual)


def oracle_solve(problem: QpProblem, grid_step: float = 1e-2) -> np.ndarray:
    """Brute-force grid minimizer with local refinement. Tests only.

    Walks a 21^3 grid, re-centering on the best feasible point and shrinking
    the window until its spacing drops below grid_step / 4; rounds with no
    feasible grid point re-center on the least-violating point instead.
    Shares nothing with solve().

    Raises:
        ValueError: if no feasible grid point is ever found.
    """
    if grid_step <= 0.0:
        raise ValueError("grid_step must be positive")
    omega_nom = np.asarray(problem.omega_nom, dtype=float)
    m = len(problem.rows)
    A = np.array([np.asarray(r.a, dtype=float) for r in problem.rows]).reshape(m, 3)
    b = np.array([float(r.b) for r in problem.rows])
    omega_max = problem.omega_max

    r = max(1.0, 2.0 * float(np.linalg.norm(omega_nom)))
    for j in range(m):
        na = float(np.linalg.norm(A[j]))
        if na > 1e-12:
            r = max(r, 2.0 * abs(b[j]) / na)
    if omega_max is not None:
        r = max(r, 2.0 * omega_max)

    K = 21
    center = omega_nom.copy()
    best_pt, best_obj = None, math.inf
    axis = np.linspace(-1.0, 1.0, K)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    unit = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    for _ in range(80):
        step = 2.0 * r / (K - 1)
        pts = center + r * unit
        ok = np.ones(len(pts), dtype=bool)
        if m:
            ok &= np.all(pts @ A.T >= b - 1e-12, axis=1)
        if omega_max is not None:
            ok &= np.einsum("ij,ij->i", pts, pts) <= omega_max**2 + 1e-12
        if np.any(ok):
            objs = np.einsum("ij,ij->i", pts - omega_nom, pts - omega_nom)
            objs[~ok] = math.inf
            j = int(np.argmin(objs))
            if objs[j] < best_obj:
                best_obj, best_pt = float(objs[j]), pts[j].copy()
            center = best_pt.copy()
            if step <= grid_step * 0.25:
                break
            r = 2.5 * step
        else:
            viol = np.zeros(len(pts))
            if m:
                viol += np.sum(np.clip(b - pts @ A.T, 0.0, None), axis=1)
            if omega_max is not None:
                viol += np.clip(np.linalg.norm(pts, axis=1) - omega_max, 0.0, None)
            center = pts[int(np.argmin(viol))].copy()
            r = max(r * 0.8, grid_step)
    if best_pt is None:
        raise ValueError("oracle_solve: no feasible grid point found")
    return best_pt
