"""Hot inner loop of the sequential filter.

The recursion is run entirely in Cholesky-factor space: the scale matrix is
carried as its upper triangular factor R (R'R = S) and each observation is
absorbed with a Givens-style rank-one update.  This matters: the volatility
path of the model is a multiplicative random walk, so the condition number of
S grows without bound along a path, and forming S explicitly destroys the
small eigendirections once the condition number passes 1/eps.  Working on the
factor keeps the effective condition at its square root.

The same function body is compiled with numba when available; set
MSVOL_DISABLE_NUMBA=1 to force the pure-numpy twin (used as fallback and as
the benchmark baseline).
"""

import os

import numpy as np


def _filter_core(Y, R0, k, min_sv):
    """One full filter pass over the rows of Y.

    Parameters
    ----------
    Y : (N, p) observations, one row per time step.
    R0 : (p, p) upper triangular factor of the initial scale matrix.
    k : decay constant of the recursion S <- S/k + y y'.
    min_sv : relative singular-value floor below which a step's outputs are
        marked NaN instead of computed (the state is still advanced).

    Returns
    -------
    scales : (N, p, p) post-update scale matrices S_t.
    u : (N, p) standardized errors sqrt(k) * S_{t-1}^{-1/2} y_t
        (symmetric square root).
    q : (N,) quadratic forms y_t' S_{t-1}^{-1} y_t.
    logdet_pre : (N,) log|S_{t-1}| (the pre-update scale).
    R : (p, p) upper triangular factor of the final scale S_N.
    """
    N, p = Y.shape
    R = R0.copy()
    scales = np.empty((N, p, p))
    u = np.empty((N, p))
    q = np.empty(N)
    logdet_pre = np.empty(N)
    sqrt_k = np.sqrt(k)
    inv_sqrt_k = 1.0 / sqrt_k
    x = np.empty(p)
    for t in range(N):
        y = Y[t]
        _, d, vt = np.linalg.svd(R)
        if d[p - 1] > min_sv * d[0]:
            z = vt @ np.ascontiguousarray(y)
            ld = 0.0
            qt = 0.0
            for i in range(p):
                ld += np.log(d[i])
                qt += (z[i] / d[i]) ** 2
            logdet_pre[t] = 2.0 * ld
            q[t] = qt
            u[t] = sqrt_k * (vt.T @ (z / d))
        else:
            logdet_pre[t] = np.nan
            q[t] = np.nan
            u[t] = np.nan
        # S <- S/k + y y', carried out on the factor
        for i in range(p):
            for j in range(i, p):
                R[i, j] *= inv_sqrt_k
            x[i] = y[i]
        for j in range(p):
            rjj = R[j, j]
            r = np.hypot(rjj, x[j])
            c = r / rjj
            s = x[j] / rjj
            R[j, j] = r
            for i in range(j + 1, p):
                R[j, i] = (R[j, i] + s * x[i]) / c
                x[i] = c * x[i] - s * R[j, i]
        scales[t] = R.T @ R
    return scales, u, q, logdet_pre, R


filter_core_numpy = _filter_core
NUMBA_ENABLED = False

if os.environ.get("MSVOL_DISABLE_NUMBA", "0") not in ("1", "true", "yes"):
    try:
        from numba import njit

        filter_core = njit(cache=True)(_filter_core)
        NUMBA_ENABLED = True
    except ImportError:
        filter_core = _filter_core
else:
    filter_core = _filter_core
