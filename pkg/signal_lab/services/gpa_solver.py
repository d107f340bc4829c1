"""
Allocation solver for the generalized proportional allocation (GPA) problem

    maximize    sum_l x_l log((P^T nu)_l) + kappa log(w)
    subject to  sum_i nu_i + w = 1,  w >= w_bar,  nu >= 0.

Orthogonal phase sets use the closed form; anything else runs an
exponentiated-gradient (mirror) ascent on the simplex.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.special import xlogy

from signal_lab.core.config import settings
from signal_lab.core.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    GridTooLargeError,
    InfiniteCycleError,
    SolverConvergenceError,
)
from signal_lab.schemas.allocation import Allocation

logger = structlog.get_logger(__name__)

MAX_ORACLE_PHASES = 4
MIN_STEP = 1e-18
MAX_STEP = 1e6


def _as_problem(x: Sequence[float], P) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] != x.size:
        raise DimensionMismatchError(
            f"phase matrix has {P.shape[1]} lane columns but {x.size} queues were given"
        )
    return x, P


def _check_params(kappa: float, w_bar: float) -> None:
    if kappa <= 0:
        raise ConfigurationError(f"kappa must be > 0, got {kappa}")
    if not 0 <= w_bar < 1:
        raise ConfigurationError(f"w_bar must lie in [0, 1), got {w_bar}")


def _allocation(nu: np.ndarray, w_bar: float) -> Allocation:
    nu = np.clip(nu, 0.0, None)
    slack = 1.0 - math.fsum(nu)
    # A binding floor is reported exactly.
    w = w_bar if slack - w_bar <= settings.FEASIBILITY_TOL else slack
    return Allocation(nu=tuple(float(v) for v in nu), w=float(w))


def is_orthogonal(P) -> bool:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    return bool(np.isin(P, (0.0, 1.0)).all() and np.all(P.sum(axis=0) == 1))


def objective(x: Sequence[float], P, kappa: float, allocation: Allocation) -> float:
    """Evaluate the GPA objective, with 0 log 0 = 0 and log 0 = -inf otherwise."""
    x, P = _as_problem(x, P)
    nu = np.asarray(allocation.nu, dtype=float)
    if nu.size != P.shape[0]:
        raise DimensionMismatchError(
            f"allocation has {nu.size} phases but the phase matrix has {P.shape[0]}"
        )
    with np.errstate(divide="ignore"):
        return float(np.sum(xlogy(x, P.T @ nu)) + xlogy(kappa, allocation.w))


def solve_orthogonal(x_phase: Sequence[float], kappa: float, w_bar: float = 0.0) -> Allocation:
    """Closed-form solution for orthogonal phases.

    ``x_phase`` holds the per-phase queue sums. Without an active bound
    nu_i = X_i / (kappa + sum X) and w = kappa / (kappa + sum X); when that
    w falls below ``w_bar`` the bound binds and the remaining 1 - w_bar is
    split in proportion to X.
    """
    _check_params(kappa, w_bar)
    X = np.asarray(x_phase, dtype=float).ravel()
    if np.any(X < 0):
        raise ConfigurationError("queue lengths must be >= 0")
    total = float(X.sum())
    if total <= 0:
        return Allocation(nu=(0.0,) * X.size, w=1.0)

    w = kappa / (kappa + total)
    if w >= w_bar:
        nu = X / (kappa + total)
        return Allocation(nu=tuple(float(v) for v in nu), w=float(w))
    return _allocation((1.0 - w_bar) * X / total, w_bar)


def solve_gpa(
    x: Sequence[float],
    P,
    kappa: float,
    w_bar: float = 0.0,
    max_iter: Optional[int] = None,
) -> Allocation:
    """Maximize the GPA objective for queues ``x`` and phase matrix ``P``."""
    x, P = _as_problem(x, P)
    _check_params(kappa, w_bar)
    if np.any(x < 0):
        raise ConfigurationError("queue lengths must be >= 0")

    if x.sum() <= 0:
        return Allocation(nu=(0.0,) * P.shape[0], w=1.0)
    if is_orthogonal(P):
        return solve_orthogonal(P @ x, kappa, w_bar)
    return _mirror_ascent(x, P, kappa, w_bar, max_iter or settings.SOLVER_MAX_ITER)


def _mirror_ascent(x: np.ndarray, P: np.ndarray, kappa: float, w_bar: float, max_iter: int) -> Allocation:
    loaded = x > 0
    if np.any(P[:, loaded].sum(axis=0) == 0):
        raise ConfigurationError("a loaded lane belongs to no phase")

    # Phases serving only empty lanes get nu = 0 at the optimum.
    active = np.flatnonzero(P[:, loaded].sum(axis=1) > 0)
    A = P[np.ix_(active, np.flatnonzero(loaded))]
    xs = x[loaded]
    k = active.size

    # Scaling by (sum x + kappa) keeps the iterates invariant under joint scaling.
    scale = xs.sum() + kappa
    xs_n, kappa_n = xs / scale, kappa / scale
    mass = 1.0 - w_bar

    def value(z: np.ndarray) -> float:
        return float(xs_n @ np.log(A.T @ z[:k]) + kappa_n * math.log(w_bar + z[k]))

    def gradient(z: np.ndarray) -> np.ndarray:
        g = np.empty(k + 1)
        g[:k] = A @ (xs_n / (A.T @ z[:k]))
        g[k] = kappa_n / (w_bar + z[k])
        return g

    z = np.full(k + 1, mass / (k + 1))
    fz = value(z)
    eta = 1.0
    gap = math.inf
    for iteration in range(max_iter):
        g = gradient(z)
        gap = float(mass * g.max() - z @ g)
        if gap <= settings.SOLVER_GAP_TOL:
            break

        step_eta = eta
        while True:
            candidate = z * np.exp(step_eta * (g - g.max()))
            candidate *= mass / candidate.sum()
            fc = value(candidate) if np.all(A.T @ candidate[:k] > 0) else -math.inf
            if fc > fz and fc >= fz + 1e-4 * float(g @ (candidate - z)):
                break
            step_eta *= 0.5
            if step_eta < MIN_STEP:
                break

        if step_eta < MIN_STEP:
            # No ascent step is representable any more.
            if gap <= settings.SOLVER_STALL_GAP:
                break
            raise SolverConvergenceError(
                "mirror ascent stalled", best=_finish(z, active, P.shape[0], w_bar, mass), gap=gap * scale
            )
        z, fz = candidate, fc
        eta = min(step_eta * 2.0, MAX_STEP)
    else:
        best = _finish(z, active, P.shape[0], w_bar, mass)
        logger.warning("gpa_solver_not_converged", iterations=max_iter, gap=gap * scale)
        raise SolverConvergenceError(
            f"no convergence after {max_iter} iterations", best=best, gap=gap * scale
        )

    logger.debug("gpa_solver_converged", iterations=iteration, gap=gap * scale)
    polished = _polish(z, A, xs_n, kappa_n, w_bar, mass, gradient)
    if polished is not None and value(polished) >= fz - settings.POLISH_VALUE_TOL:
        z = polished
    else:
        logger.debug("gpa_solver_polish_rejected")
    return _finish(z, active, P.shape[0], w_bar, mass)


def _polish(z, A, xs_n, kappa_n, w_bar, mass, gradient) -> Optional[np.ndarray]:
    """Newton steps on the KKT system of the current support.

    Takes a converged ascent iterate to rounding level, so the result no
    longer depends on the path. Returns None when the support cannot be
    settled.
    """
    k = A.shape[0]
    z = z.copy()
    support = z > 0
    # Without a floor the clearance term is a barrier and never leaves.
    droppable = np.ones(k + 1, dtype=bool)
    droppable[k] = w_bar > 0
    for _ in range(settings.POLISH_MAX_ITER):
        idx = np.flatnonzero(support)
        s = A.T @ z[:k]
        if idx.size == 0 or np.any(s <= 0):
            return None
        g = gradient(z)
        H = np.zeros((k + 1, k + 1))
        H[:k, :k] = -(A * (xs_n / s**2)) @ A.T
        H[k, k] = -kappa_n / (w_bar + z[k]) ** 2

        n = idx.size
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = H[np.ix_(idx, idx)]
        K[:n, n] = 1.0
        K[n, :n] = 1.0
        rhs = np.append(-g[idx], mass - z[idx].sum())
        step = np.linalg.lstsq(K, rhs, rcond=None)[0][:n]

        trial = z[idx] + step
        if np.any(trial <= 0):
            small = (trial <= 0) & (z[idx] <= settings.POLISH_DROP_TOL * mass) & droppable[idx]
            if small.any():
                # Components heading out of the simplex leave the support.
                support[idx[small]] = False
                z[idx[small]] = 0.0
                continue
            shrink = z[idx][trial <= 0] / -step[trial <= 0]
            step = step * 0.5 * float(shrink.min())
            trial = z[idx] + step
        z[idx] = trial
        if np.abs(step).max() <= 4 * np.finfo(float).eps * mass:
            break

    g = gradient(z)
    level = float(g[support].max())
    if np.any(g[~support] > level + settings.POLISH_KKT_TOL):
        return None
    return z


def _finish(z: np.ndarray, active: np.ndarray, n_phases: int, w_bar: float, mass: float) -> Allocation:
    k = active.size
    nu_active = z[:k].copy()
    if z[k] <= settings.ACTIVE_PHASE_TOL * mass:
        # Clearance floor binds: the slack goes back to the phases.
        nu_active *= mass / nu_active.sum()
    nu = np.zeros(n_phases)
    nu[active] = nu_active
    return _allocation(nu, w_bar)


def brute_force_oracle(
    x: Sequence[float],
    P,
    kappa: float,
    w_bar: float = 0.0,
    grid_step: float = 1e-3,
    max_points: Optional[int] = None,
) -> Allocation:
    """Best allocation on the grid nu_i in grid_step * Z, sum nu + w = 1, w >= w_bar."""
    x, P = _as_problem(x, P)
    n_p = P.shape[0]
    if n_p > MAX_ORACLE_PHASES:
        raise ConfigurationError(f"oracle enumerates at most {MAX_ORACLE_PHASES} phases, got {n_p}")
    if grid_step <= 0:
        raise ConfigurationError("grid_step must be > 0")

    levels = int(math.floor((1.0 - w_bar) / grid_step + 1e-9))
    points = math.comb(levels + n_p, n_p)
    limit = max_points or settings.ORACLE_MAX_POINTS
    if points > limit:
        raise GridTooLargeError(f"grid has {points} points, limit is {limit}")

    best_value = -math.inf
    best_counts: Optional[np.ndarray] = None
    for head in _heads(n_p - 1, levels):
        remaining = levels - sum(head)
        counts = np.empty((remaining + 1, n_p), dtype=float)
        counts[:, : n_p - 1] = head
        counts[:, n_p - 1] = np.arange(remaining + 1)
        nu = counts * grid_step
        w = 1.0 - nu.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = xlogy(x, nu @ P).sum(axis=1) + xlogy(kappa, w)
        idx = int(np.argmax(values))
        if best_counts is None or values[idx] > best_value:
            best_value = float(values[idx])
            best_counts = counts[idx]

    return _allocation(best_counts * grid_step, w_bar)


def _heads(n: int, levels: int):
    """All nonnegative integer n-tuples with sum <= levels, in lexicographic order."""
    if n == 0:
        yield ()
        return
    for first in range(levels + 1):
        for rest in _heads(n - 1, levels - first):
            yield (first,) + rest


def cycle_length(allocation: Allocation, n_active: int, T_w: float) -> float:
    """Cycle length n_active * T_w / w."""
    if n_active < 1:
        raise ConfigurationError("a cycle needs at least one active phase")
    if allocation.w <= 0:
        raise InfiniteCycleError("clearance fraction w = 0 gives an unbounded cycle")
    return n_active * T_w / allocation.w


def divergent_cycle_recursion(A: float, lam: float, kappa: float, cycles: int) -> List[Tuple[float, float]]:
    """Queue peaks and cycle lengths of the two-lane divergent junction.

    Starting from one loaded lane with queue A, each shorted cycle lasts
    T_n = (A_n + kappa) / kappa seconds (unit clearance, unit saturation)
    and leaves A_{n+1} = lam * T_n on the other lane.
    """
    out = []
    peak = A
    for _ in range(cycles + 1):
        length = (peak + kappa) / kappa
        out.append((peak, length))
        peak = lam * length
    return out


def cycles_diverge(A: float, lam: float, kappa: float) -> bool:
    """Conditions under which the served queue empties while the other grows."""
    empties = A * kappa + lam * (A + kappa) - A <= 0
    grows = A * kappa - lam * (A + kappa) < 0
    return empties and grows


def phase_loads(x: Sequence[float], P) -> np.ndarray:
    """Per-phase queue sums sum_l P_il x_l."""
    x, P = _as_problem(x, P)
    return P @ x

