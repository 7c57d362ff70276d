"""Small dense convex quadratic programs.

Primal active-set method for

    minimize    0.5 x'Hx + g'x
    subject to  A_eq x = b_eq,  A_ub x <= b_ub

starting from a feasible point.  Intended for the tiny problems that show up
here (projection onto a polytope, least squares over a simplex), where
robustness matters more than speed.
"""

from __future__ import annotations

import numpy as np

TIKHONOV = 1e-12


def _kkt_step(H, grad, A_w):
    """Solve the equality-constrained step problem.

    Returns the step p and the multipliers for the rows of A_w, using the sign
    convention grad + H p + A_w' lam = 0.
    """
    n = H.shape[0]
    m = A_w.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = H
    K[:n, n:] = A_w.T
    K[n:, :n] = A_w
    rhs = np.concatenate([-grad, np.zeros(m)])
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        # degenerate working set or singular Hessian
        K[:n, :n] += TIKHONOV * np.eye(n)
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def active_set_qp(H, g, A_eq=None, b_eq=None, A_ub=None, b_ub=None, x0=None,
                  tol=1e-12, max_iter=500):
    """Minimize a convex quadratic over a polyhedron.

    Args:
        H: (n, n) positive semidefinite matrix.
        g: (n,) linear term.
        A_eq, b_eq: equality constraints (may be None).
        A_ub, b_ub: inequality constraints (may be None).
        x0: feasible starting point (required).
        tol: feasibility / optimality tolerance.
        max_iter: iteration cap; the best iterate so far is returned if hit.

    Returns:
        The minimizer as a 1-D array.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = H.shape[0]
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float)
    if x0 is None:
        raise ValueError("active_set_qp needs a feasible starting point")
    x = np.array(x0, dtype=float)

    # independent subset of the constraints active at x0
    working: list[int] = []
    rows = A_eq.copy()
    slack = b_ub - A_ub @ x
    for k in np.argsort(np.abs(slack)):
        if abs(slack[k]) > 1e-10:
            break
        cand = np.vstack([rows, A_ub[k]])
        if np.linalg.matrix_rank(cand, tol=1e-10) == cand.shape[0]:
            rows = cand
            working.append(int(k))

    n_eq = A_eq.shape[0]
    for _ in range(max_iter):
        A_w = np.vstack([A_eq, A_ub[working]]) if working else A_eq
        grad = H @ x + g
        p, lam = _kkt_step(H, grad, A_w)
        scale = max(1.0, np.abs(x).max())
        if np.abs(p).max() <= tol * scale * 1e3:
            lam_ub = lam[n_eq:]
            if lam_ub.size == 0 or lam_ub.min() >= -tol:
                return x
            working.pop(int(np.argmin(lam_ub)))
            continue
        # ratio test against constraints outside the working set
        alpha, block = 1.0, None
        if A_ub.shape[0]:
            Ap = A_ub @ p
            resid = b_ub - A_ub @ x
            for k in range(A_ub.shape[0]):
                if k in working or Ap[k] <= 1e-14:
                    continue
                step = max(resid[k], 0.0) / Ap[k]
                if step < alpha:
                    alpha, block = step, k
        x = x + alpha * p
        if block is not None:
            working.append(block)
    return x


def simplex_least_squares(V, z, w0=None):
    """Weights w on the simplex minimizing ||V w - z||.

    Args:
        V: (m, k) matrix whose columns are the points to combine.
        z: (m,) target.
        w0: optional feasible start; defaults to the nearest column.

    Returns:
        (w, V @ w)
    """
    V = np.asarray(V, dtype=float)
    z = np.asarray(z, dtype=float)
    k = V.shape[1]
    if k == 1:
        return np.ones(1), V[:, 0].copy()
    if w0 is None:
        w0 = np.zeros(k)
        w0[int(np.argmin(((V - z[:, None]) ** 2).sum(axis=0)))] = 1.0
    H = V.T @ V
    g = -V.T @ z
    w = active_set_qp(H, g, A_eq=np.ones((1, k)), b_eq=np.ones(1),
                      A_ub=-np.eye(k), b_ub=np.zeros(k), x0=w0)
    w = np.clip(w, 0.0, None)
    w /= w.sum()
    return w, V @ w
