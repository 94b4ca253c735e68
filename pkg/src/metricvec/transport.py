"""Entropic-regularized optimal transport between point clouds.

The workhorse is alternating Sinkhorn scaling on the Gibbs kernel
exp(-cost/lambda), switching to log-domain potentials when the scaling
factors threaten overflow. Exact small-instance and 1-D solvers are kept
alongside as independent checks.
"""

from __future__ import annotations

import itertools
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from .embedding import VectorSet

__all__ = [
    "SinkhornConfig",
    "TransportPlan",
    "TransportNumericsError",
    "cost_matrix",
    "sinkhorn",
    "exact_ot_small",
    "graph_distance",
    "graph_distance_full",
    "wasserstein2_1d",
    "save_distance_matrix",
    "load_distance_matrix",
]

_SCALE_LIMIT = 1e30
_MAGIC = b"MVDM"


class TransportNumericsError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SinkhornConfig:
    reg_lambda: float = 1e-2
    max_iters: int = 30
    marginal_tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.reg_lambda <= 0:
            raise ValueError(f"reg_lambda must be > 0, got {self.reg_lambda}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.marginal_tol <= 0:
            raise ValueError(f"marginal_tol must be > 0, got {self.marginal_tol}")


@dataclass
class TransportPlan:
    matrix: np.ndarray
    transport_cost: float
    converged: bool  # whether the scaling loop met marginal_tol within the cap
    iterations: int
    marginal_error: float  # L1 marginal error of the returned (rounded) matrix
    scaling_error: float = 0.0  # L1 marginal error where the scaling stopped


def _check_distribution(w: np.ndarray, name: str, size: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {w.shape}")
    if np.any(w < 0):
        raise ValueError(f"{name} has negative entries")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} must sum to 1 (got {w.sum()!r})")
    return w


def cost_matrix(a: VectorSet | np.ndarray, b: VectorSet | np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between two point clouds."""
    pa = a.points if isinstance(a, VectorSet) else np.asarray(a, dtype=float)
    pb = b.points if isinstance(b, VectorSet) else np.asarray(b, dtype=float)
    if pa.ndim != 2 or pb.ndim != 2 or pa.shape[1] != pb.shape[1]:
        raise ValueError(f"dimension mismatch: {pa.shape} vs {pb.shape}")
    diff = pa[:, None, :] - pb[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _marginal_error(plan: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    return float(
        np.abs(plan.sum(axis=1) - mu).sum() + np.abs(plan.sum(axis=0) - nu).sum()
    )


def _round_to_polytope(plan: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Project an almost-feasible plan onto the transport polytope.

    Rows then columns are scaled down to their targets, and the remaining
    deficit is filled by a rank-one patch; the result has exact marginals
    (to rounding) and moves the cost by at most max|C| times the deficit.
    """
    row = plan.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(row > 0, np.minimum(1.0, mu / row), 0.0)
    p = plan * scale[:, None]
    col = p.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(col > 0, np.minimum(1.0, nu / col), 0.0)
    p = p * scale[None, :]
    err_r = np.maximum(mu - p.sum(axis=1), 0.0)
    err_c = np.maximum(nu - p.sum(axis=0), 0.0)
    total = err_r.sum()
    if total > 0:
        p = p + np.outer(err_r, err_c) / total
    return p


def sinkhorn(
    cost: np.ndarray, mu: np.ndarray, nu: np.ndarray, config: SinkhornConfig
) -> TransportPlan:
    """Alternating scaling on exp(-cost/lambda) with adaptive stabilization.

    Stops after max_iters or when the plan's L1 marginal error drops below
    marginal_tol. Hitting the iteration cap is not an error; the plan is
    returned with converged=False.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError(f"cost must be a matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix has non-finite entries")
    m, n = cost.shape
    mu = _check_distribution(mu, "mu", m)
    nu = _check_distribution(nu, "nu", n)
    lam = config.reg_lambda

    kernel = np.exp(-cost / lam)
    u = np.ones(m)
    v = np.ones(n)
    log_mode = not np.all(kernel.sum(axis=1) > 0) or not np.all(kernel.sum(axis=0) > 0)
    f = np.zeros(m)
    g = np.zeros(n)
    log_mu = np.log(np.maximum(mu, 1e-300))
    log_nu = np.log(np.maximum(nu, 1e-300))

    def log_plan() -> np.ndarray:
        return np.exp((f[:, None] + g[None, :] - cost) / lam)

    def log_update() -> np.ndarray:
        nonlocal f, g
        f = lam * (log_mu - _logsumexp_rows((g[None, :] - cost) / lam))
        g = lam * (log_nu - _logsumexp_rows(((f[:, None] - cost) / lam).T))
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise TransportNumericsError(
                "kernel underflowed in log domain "
                f"(lambda={lam}, cost range [{cost.min()}, {cost.max()}])"
            )
        return log_plan()

    plan = kernel / kernel.sum() if not log_mode else log_plan()
    err = _marginal_error(plan, mu, nu)
    iterations = 0
    for it in range(1, config.max_iters + 1):
        iterations = it
        if log_mode:
            plan = log_update()
        else:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                u_new = mu / (kernel @ v)
                v_new = nu / (kernel.T @ u_new)
            bad = not (
                np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))
            ) or np.any(u_new <= 0) or np.any(v_new <= 0)
            if bad or max(u_new.max(), v_new.max()) > _SCALE_LIMIT:
                # Absorb the last valid scalings into log potentials and
                # redo this iteration there.
                f = lam * np.log(u)
                g = lam * np.log(v)
                log_mode = True
                plan = log_update()
            else:
                u, v = u_new, v_new
                plan = u[:, None] * kernel * v[None, :]
        err = _marginal_error(plan, mu, nu)
        if err < config.marginal_tol:
            break
    plan = _round_to_polytope(plan, mu, nu)
    return TransportPlan(
        matrix=plan,
        transport_cost=float(np.sum(plan * cost)),
        converged=err < config.marginal_tol,
        iterations=iterations,
        marginal_error=_marginal_error(plan, mu, nu),
        scaling_error=err,
    )


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    hi = a.max(axis=1)
    return hi + np.log(np.exp(a - hi[:, None]).sum(axis=1))


_PERM_CACHE: dict[int, np.ndarray] = {}


def exact_ot_small(cost: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    """Exact optimal transport cost for instances up to 8x8.

    Equal-size uniform marginals reduce to an assignment problem solved by
    permutation enumeration (the optimum sits at a permutation vertex of
    the Birkhoff polytope); anything else goes through an exact LP solve.
    """
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    if m > 8 or n > 8:
        raise ValueError(f"exact solver limited to 8x8, got {m}x{n}")
    mu = _check_distribution(mu, "mu", m)
    nu = _check_distribution(nu, "nu", n)

    uniform_m = np.allclose(mu, 1.0 / m, atol=1e-12)
    uniform_n = np.allclose(nu, 1.0 / n, atol=1e-12)
    if m == n and uniform_m and uniform_n:
        if n not in _PERM_CACHE:
            _PERM_CACHE[n] = np.array(list(itertools.permutations(range(n))))
        perms = _PERM_CACHE[n]
        totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
        return float(totals.min() / n)

    # LP: minimize <c, x> s.t. row sums = mu, col sums = nu, x >= 0.
    a_eq = np.zeros((m + n - 1, m * n))
    for i in range(m):
        a_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n - 1):  # last column constraint is redundant
        a_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate([mu, nu[:-1]])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise TransportNumericsError(f"exact LP failed: {res.message}")
    return float(res.fun)


def graph_distance_full(
    a: VectorSet, b: VectorSet, config: SinkhornConfig
) -> tuple[float, TransportPlan]:
    """Wasserstein-2 distance between point clouds with uniform weights.

    The instance is solved in a canonical orientation (the transposed cost
    of the swapped pair is this pair's cost, compared bytewise), so the
    distance is exactly symmetric in its arguments.
    """
    if a.points.shape[0] == 0 or b.points.shape[0] == 0:
        raise ValueError("point clouds must be nonempty")
    cost = cost_matrix(a, b)
    m, n = cost.shape
    transposed = cost.T.copy()
    if (n, m, transposed.tobytes()) < (m, n, cost.tobytes()):
        plan_t = sinkhorn(transposed, np.full(n, 1.0 / n), np.full(m, 1.0 / m), config)
        plan = TransportPlan(
            matrix=plan_t.matrix.T,
            transport_cost=plan_t.transport_cost,
            converged=plan_t.converged,
            iterations=plan_t.iterations,
            marginal_error=plan_t.marginal_error,
            scaling_error=plan_t.scaling_error,
        )
    else:
        plan = sinkhorn(cost, np.full(m, 1.0 / m), np.full(n, 1.0 / n), config)
    return float(np.sqrt(max(plan.transport_cost, 0.0))), plan


def graph_distance(a: VectorSet, b: VectorSet, config: SinkhornConfig) -> float:
    return graph_distance_full(a, b, config)[0]


def wasserstein2_1d(a, b) -> float:
    """Exact 1-D Wasserstein-2 between uniform point sets of any sizes.

    Matches quantile functions on the common refinement of the two uniform
    grids: each value of ``a`` is repeated len(b) times and vice versa, so
    both step functions live on the same len(a)*len(b) grid.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("point sets must be nonempty")
    ar = np.repeat(a, b.size)
    br = np.repeat(b, a.size)
    return float(np.sqrt(np.mean((ar - br) ** 2)))


def save_distance_matrix(path: str | Path, matrix: np.ndarray, params: dict) -> None:
    """Binary matrix (magic, m, n, float64 row-major) plus a JSON sidecar."""
    path = Path(path)
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    m, n = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", m, n))
        fh.write(matrix.tobytes())
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(params, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_distance_matrix(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        m, n = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(8 * m * n), dtype=np.float64).reshape(m, n)
    sidecar = path.with_suffix(path.suffix + ".json")
    params = {}
    if sidecar.is_file():
        with open(sidecar) as fh:
            params = json.load(fh)
    return data.copy(), params
