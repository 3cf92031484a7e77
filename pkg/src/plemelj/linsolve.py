"""Dense and iterative linear solves with condition monitoring."""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = ["IllConditionedError", "gmres_restarted", "solve_system"]

ITERATIVE_NODE_THRESHOLD = 3000


class IllConditionedError(RuntimeError):
    def __init__(self, cond):
        super().__init__(f"condition estimate {cond:.3g} exceeds the allowed limit")
        self.cond = cond


def condition_estimate(matrix: np.ndarray, lu=None) -> float:
    """1-norm condition estimate via LAPACK gecon."""
    if lu is None:
        lu, _ = scipy.linalg.lu_factor(matrix)
    anorm = np.linalg.norm(matrix, 1)
    rcond, info = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
    if info != 0:
        raise RuntimeError(f"zgecon failed with info={info}")
    return float(1.0 / max(rcond, np.finfo(float).tiny))


def gmres_restarted(matvec, b, tol=1e-10, maxiter=500, restart=50, x0=None):
    """Restarted GMRES for Ax = b given only the matvec.

    Returns (x, info) with info = {'iterations', 'residual', 'converged'}.
    """
    b = np.asarray(b, dtype=complex)
    n = b.shape[0]
    x = np.zeros(n, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return x * 0, {"iterations": 0, "residual": 0.0, "converged": True}
    total = 0
    while total < maxiter:
        r = b - matvec(x)
        beta = np.linalg.norm(r)
        if beta <= tol * bnorm:
            return x, {"iterations": total, "residual": float(beta / bnorm), "converged": True}
        m = min(restart, maxiter - total)
        Q = np.zeros((n, m + 1), dtype=complex)
        H = np.zeros((m + 1, m), dtype=complex)
        Q[:, 0] = r / beta
        k_used = m
        for k in range(m):
            w = matvec(Q[:, k])
            for i in range(k + 1):
                H[i, k] = np.vdot(Q[:, i], w)
                w -= H[i, k] * Q[:, i]
            H[k + 1, k] = np.linalg.norm(w)
            if H[k + 1, k] < 1e-14 * beta:
                k_used = k + 1
                break
            Q[:, k + 1] = w / H[k + 1, k]
        k = k_used
        e1 = np.zeros(k + 1, dtype=complex)
        e1[0] = beta
        y, *_ = np.linalg.lstsq(H[: k + 1, :k], e1, rcond=None)
        x = x + Q[:, :k] @ y
        total += k
        res = np.linalg.norm(b - matvec(x))
        if res <= tol * bnorm:
            return x, {"iterations": total, "residual": float(res / bnorm), "converged": True}
    res = np.linalg.norm(b - matvec(x)) / bnorm
    return x, {"iterations": total, "residual": float(res), "converged": False}


def solve_system(matrix: np.ndarray, rhs: np.ndarray, nodes: int = None, cond_limit: float = 1e8):
    """Solve a dense system; iterative fallback above the node threshold.

    Returns (x, cond_estimate).  Raises IllConditionedError when the dense
    path sees a condition estimate beyond cond_limit.
    """
    rhs = np.asarray(rhs, dtype=complex)
    if nodes is not None and nodes > ITERATIVE_NODE_THRESHOLD:
        cols = rhs if rhs.ndim > 1 else rhs[:, None]
        out = np.empty_like(cols)
        for k in range(cols.shape[1]):
            out[:, k], info = gmres_restarted(lambda v: matrix @ v, cols[:, k])
            if not info["converged"]:
                raise RuntimeError(f"iterative solve stalled: {info}")
        return (out if rhs.ndim > 1 else out[:, 0]), float("nan")
    lu, piv = scipy.linalg.lu_factor(matrix)
    cond = condition_estimate(matrix, lu)
    if cond > cond_limit:
        raise IllConditionedError(cond)
    return scipy.linalg.lu_solve((lu, piv), rhs), cond
