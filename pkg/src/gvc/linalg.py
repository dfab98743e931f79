"""Small dense linear-algebra helpers shared by the metric modules."""
import warnings

import numpy as np
import scipy.linalg as sla

from gvc.errors import Singular


def perron_root(M, max_iter=50, tol=1e-12):
    """Power-iteration estimate of the spectral radius of ``|M|``.

    Iterates the shifted operator ``|M| + I`` so that periodic (e.g. bipartite)
    structures still converge; ``rho(M) <= rho(|M|)`` makes this a safe upper
    estimate for matrices with a few negative entries.
    """
    M = np.abs(np.asarray(M, dtype=np.float64))
    n = M.shape[0]
    if n == 0 or not M.any():
        return 0.0
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        total = w.sum()
        if total == 0.0:
            return 0.0
        new = total / v.sum()
        v = (w + v) / (total + v.sum())
        if abs(new - lam) <= tol * max(1.0, new):
            lam = new
            break
        lam = new
    return float(lam)


def inverse_of_identity_minus(M, what="I - A"):
    """``(I - M)^{-1}`` via an LU factorization solved against the identity."""
    n = M.shape[0]
    eye = np.eye(n)
    if n == 0:
        return eye
    with warnings.catch_warnings():
        # an exactly singular pivot is reported below as Singular
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(eye - M, check_finite=True)
    diag = np.abs(np.diag(lu))
    if not np.all(diag > np.finfo(float).eps * max(1.0, diag.max())):
        raise Singular(f"{what} is singular to working precision")
    return sla.lu_solve((lu, piv), eye)
