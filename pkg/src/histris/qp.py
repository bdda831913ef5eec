"""Dense quadratic programs with box or weighted-l1 structure.

Both solvers share the same two-phase strategy:

1. a short projected-gradient warmup with Barzilai-Borwein step lengths,
   which settles the active pattern cheaply and makes warm starts from a
   previous time step nearly free;
2. an exact active-set polish: minimize over the currently free
   coordinates by a direct solve, walk back towards the feasible set one
   blocking constraint at a time, then release the worst mis-signed
   multiplier and repeat.

On return the complementarity conditions hold to machine precision
(free gradients come from a direct solve, pinned coordinates sit exactly
on their bound) and the dual feasibility margin is within ``tol``.
Problems here are small and dense; Hessians are symmetric positive
definite.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalFailure

__all__ = ["KKT_TOL", "solve_box_qp", "solve_l1_qp", "box_qp_kkt_residual", "l1_qp_kkt_residual"]

# Absolute tolerance on the nodal KKT residual.
KKT_TOL = 1e-10


def _as_bound(value, n: int, default: float) -> np.ndarray:
    if value is None:
        return np.full(n, default)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"bound has shape {arr.shape}, expected ({n},)")
    return arr.copy()


def box_qp_kkt_residual(hess, lin, lower, upper, x) -> float:
    """Projected-gradient residual of ``min 0.5 x'Hx - lin'x`` on a box."""
    g = hess @ x - lin
    return float(np.max(np.abs(x - np.clip(x - g, lower, upper)), initial=0.0))


def solve_box_qp(hess, lin, lower=None, upper=None, start=None, tol=KKT_TOL,
                 pg_sweeps=3, max_cycles=None):
    """Minimize ``0.5 x'Hx - lin'x`` subject to ``lower <= x <= upper``.

    Returns ``(x, iterations)``.  Bounds may be scalars, arrays, or None
    (unbounded on that side).  Raises :class:`NumericalFailure` if the
    active-set phase exceeds its cycle cap.
    """
    lin = np.asarray(lin, dtype=float)
    n = lin.shape[0]
    lower = _as_bound(lower, n, -np.inf)
    upper = _as_bound(upper, n, np.inf)
    if np.any(lower > upper):
        raise ValueError("box is empty: lower > upper somewhere")
    # Coordinates with a degenerate box entry are fixed and never released.
    fixed = lower == upper

    x = np.zeros(n) if start is None else np.asarray(start, dtype=float).copy()
    x = np.clip(x, lower, upper)
    iterations = 0

    gersh = float(np.abs(hess).sum(axis=1).max())
    if gersh <= 0.0:
        raise ValueError("hessian is zero")
    step = 1.0 / gersh

    # Phase 1: projected gradient with BB step lengths.
    g = hess @ x - lin
    for _ in range(pg_sweeps):
        x_new = np.clip(x - step * g, lower, upper)
        s = x_new - x
        if not s.any():
            break
        g_new = hess @ x_new - lin
        sy = float(s @ (g_new - g))
        if sy > 0.0:
            step = min(max(float(s @ s) / sy, 0.01 / gersh), 1e6 / gersh)
        x, g = x_new, g_new
        iterations += 1

    at_lo = x <= lower
    at_hi = (x >= upper) & ~at_lo

    if max_cycles is None:
        max_cycles = 10 * n + 100
    worst = np.inf
    for _ in range(max_cycles):
        iterations += 1
        # Exact solve on the free block, pinning blockers one at a time.
        for _inner in range(n + 1):
            x = np.where(at_lo, lower, np.where(at_hi, upper, x))
            free = ~(at_lo | at_hi)
            if not free.any():
                break
            idx = np.flatnonzero(free)
            pinned = np.flatnonzero(~free)
            rhs = lin[idx]
            if pinned.size:
                rhs = rhs - hess[np.ix_(idx, pinned)] @ x[pinned]
            try:
                z = np.linalg.solve(hess[np.ix_(idx, idx)], rhs)
            except np.linalg.LinAlgError as exc:
                raise NumericalFailure("singular free block in box qp") from exc
            below = z < lower[idx]
            above = z > upper[idx]
            if not below.any() and not above.any():
                x[idx] = z
                break
            # Step from x towards z until the first bound blocks.
            d = z - x[idx]
            alpha = 1.0
            block = -1
            block_low = True
            for j in np.flatnonzero(below | above):
                dj = d[j]
                if dj == 0.0:
                    continue
                bound = lower[idx[j]] if dj < 0.0 else upper[idx[j]]
                a = (bound - x[idx[j]]) / dj
                if a < alpha:
                    alpha = max(a, 0.0)
                    block = idx[j]
                    block_low = dj < 0.0
            if block < 0:
                x[idx] = np.clip(z, lower[idx], upper[idx])
                break
            x[idx] = x[idx] + alpha * d
            if block_low:
                at_lo[block] = True
                x[block] = lower[block]
            else:
                at_hi[block] = True
                x[block] = upper[block]

        g = hess @ x - lin
        release_lo = np.where(at_lo, -g, -np.inf)
        release_hi = np.where(at_hi, g, -np.inf)
        score = np.where(fixed, -np.inf, np.maximum(release_lo, release_hi))
        worst = float(score.max(initial=-np.inf))
        if worst <= tol:
            return x, iterations
        k = int(np.argmax(score))
        at_lo[k] = False
        at_hi[k] = False

    raise NumericalFailure("box qp exceeded its cycle cap", residual=worst)


def _soft(u: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.sign(u) * np.maximum(np.abs(u) - a, 0.0)


def l1_qp_kkt_residual(hess, lin, weights, x) -> float:
    """KKT residual of ``min 0.5 x'Hx - lin'x + sum w_i |x_i|``."""
    g = hess @ x - lin
    on = x != 0.0
    res_on = np.abs(g + np.sign(x) * weights)[on]
    res_off = np.maximum(np.abs(g) - weights, 0.0)[~on]
    out = 0.0
    if res_on.size:
        out = max(out, float(res_on.max()))
    if res_off.size:
        out = max(out, float(res_off.max()))
    return out


def solve_l1_qp(hess, lin, weights, start=None, tol=KKT_TOL, ista_sweeps=8,
                max_cycles=None):
    """Minimize ``0.5 x'Hx - lin'x + sum w_i |x_i|`` with ``w_i >= 0``.

    Returns ``(x, iterations)``.  The warmup is iterative shrinkage
    (forward-backward splitting); the polish fixes a sign pattern,
    solves the support block exactly, removes coordinates whose sign
    flips, and admits the worst off-support optimality violation.
    """
    lin = np.asarray(lin, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = lin.shape[0]
    if weights.shape != (n,):
        raise ValueError(f"weights have shape {weights.shape}, expected ({n},)")
    if np.any(weights < 0):
        raise ValueError("l1 weights must be nonnegative")

    x = np.zeros(n) if start is None else np.asarray(start, dtype=float).copy()
    iterations = 0

    gersh = float(np.abs(hess).sum(axis=1).max())
    if gersh <= 0.0:
        raise ValueError("hessian is zero")
    step = 1.0 / gersh

    # Phase 1: ISTA sweeps to settle the support.
    for _ in range(ista_sweeps):
        g = hess @ x - lin
        x_new = _soft(x - step * g, step * weights)
        if np.array_equal(x_new, x):
            break
        x = x_new
        iterations += 1

    sign = np.sign(x)
    unweighted = weights == 0.0

    if max_cycles is None:
        max_cycles = 10 * n + 100
    worst = np.inf
    for _ in range(max_cycles):
        iterations += 1
        for _inner in range(n + 1):
            on = (sign != 0.0) | unweighted
            x[~on] = 0.0
            if not on.any():
                break
            idx = np.flatnonzero(on)
            rhs = lin[idx] - sign[idx] * weights[idx]
            try:
                z = np.linalg.solve(hess[np.ix_(idx, idx)], rhs)
            except np.linalg.LinAlgError as exc:
                raise NumericalFailure("singular support block in l1 qp") from exc
            flips = (z * sign[idx] < 0.0) & ~unweighted[idx]
            if not flips.any():
                x[idx] = z
                break
            # Walk towards z until the first weighted coordinate crosses zero.
            d = z - x[idx]
            alpha = 1.0
            block = -1
            for j in np.flatnonzero(flips):
                dj = d[j]
                if dj == 0.0:
                    continue
                a = -x[idx[j]] / dj
                if 0.0 <= a < alpha:
                    alpha = a
                    block = idx[j]
            if block < 0:
                x[idx] = z
                break
            x[idx] = x[idx] + alpha * d
            sign[block] = 0.0
            x[block] = 0.0

        g = hess @ x - lin
        on = (sign != 0.0) | unweighted
        score = np.where(~on, np.abs(g) - weights, -np.inf)
        worst = float(score.max(initial=-np.inf))
        if worst <= tol:
            return x, iterations
        k = int(np.argmax(score))
        sign[k] = -np.sign(g[k])

    raise NumericalFailure("l1 qp exceeded its cycle cap", residual=worst)
