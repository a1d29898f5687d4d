"""Sequential conjugate recursion for the volatility scale matrix.

The model keeps an inverted-Wishart posterior for the volatility matrix whose
scale S_t evolves by the one-parameter recursion

    S_t = S_{t-1}/k + y_t y_t',        k = (d(1-p)+p) / (d(2-p)+p-1)

for discount factor d in (2/3, 1).  This choice of k preserves the expected
precision from one step to the next; the widely used k = 1/d does so only in
the univariate case and otherwise induces an upward drift (a shrinkage-type
evolution of the precision).

`step` is the readable single-observation reference; `run_filter` drives the
compiled kernel over a whole series and is what the diagnostics and the CLI
use.  Both carry the state as the upper Cholesky factor of S_t, so no
incremental quantity ever degrades: every factorization is recomputed from
the factor at each step, which also subsumes any periodic refresh policy.
"""

from dataclasses import dataclass, field

import numpy as np

from . import matstat
from ._kernels import filter_core
from .errors import DimensionMismatch, DomainError, NotPositiveDefinite

DELTA_MIN = 2.0 / 3.0


def compute_k(delta, p):
    """Decay constant that keeps E(precision) unchanged across the evolution.

    Equals (n+p-1)/(d*n+p-1) with n = 1/(1-d); reduces to 1/d at p = 1 and
    tends to 1 as d -> 1.
    """
    if not DELTA_MIN < delta < 1.0:
        raise DomainError(f"discount factor must lie in (2/3, 1), got {delta}")
    if p < 1:
        raise DomainError(f"dimension must be >= 1, got {p}")
    return (delta * (1 - p) + p) / (delta * (2 - p) + p - 1)


@dataclass(frozen=True)
class ModelConfig:
    """Model dimension, discount factor and the constants derived from them."""

    p: int
    delta: float
    k: float
    n: float          # posterior degrees-of-freedom parameter, 1/(1-delta)
    m: float          # matrix-beta parameter, delta/(1-delta) + p - 1
    prior_scale: np.ndarray

    @property
    def forecast_df(self):
        """Degrees of freedom of the one-step forecast t-distribution."""
        return self.delta / (1.0 - self.delta)

    @property
    def posterior_mean_coef(self):
        """E(volatility | data) = coef * S_t; requires delta > 1/2."""
        return (1.0 - self.delta) / (2.0 * self.delta - 1.0)

    @property
    def forecast_scale_coef(self):
        """Var(next return | data) = coef * S_t; requires delta > 2/3."""
        return (1.0 - self.delta) / ((3.0 * self.delta - 2.0) * self.k)


def new_config(p, delta, prior_scale):
    """Validate inputs and populate all derived constants."""
    if p < 1:
        raise DomainError(f"dimension must be >= 1, got {p}")
    if not DELTA_MIN < delta < 1.0:
        raise DomainError(f"discount factor must lie in (2/3, 1), got {delta}")
    prior_scale = matstat.validate_spd(prior_scale, "prior_scale")
    if prior_scale.shape[0] != p:
        raise DimensionMismatch(
            f"prior_scale has dimension {prior_scale.shape[0]}, expected {p}"
        )
    n = 1.0 / (1.0 - delta)
    m = delta / (1.0 - delta) + p - 1
    return ModelConfig(p=p, delta=delta, k=compute_k(delta, p), n=n, m=m,
                       prior_scale=prior_scale)


@dataclass(frozen=True)
class FilterState:
    """Time index and current scale matrix, carried as its upper factor."""

    t: int
    scale_chol: np.ndarray   # upper triangular R with R'R = S_t

    @property
    def scale(self):
        """The scale matrix S_t itself."""
        return self.scale_chol.T @ self.scale_chol

    @property
    def precision_chol(self):
        """Upper triangular U with U'U = S_t^{-1} (factor of the precision)."""
        g = np.linalg.inv(self.scale_chol).T      # lower; g'g = S^{-1}
        _, u = np.linalg.qr(g)
        sign = np.sign(np.diag(u))
        sign[sign == 0] = 1.0
        return sign[:, None] * u


@dataclass(frozen=True)
class StepOutput:
    """Per-step forecast quantities, computed from the pre-update scale."""

    forecast_scale: np.ndarray
    u: np.ndarray            # sqrt(k) * S^{-1/2} y, symmetric root
    u_star: np.ndarray       # forecast_scale^{-1/2} y, unit-covariance error
    predictive_logdensity: float
    q: float                 # y' S^{-1} y, cached for the likelihood terms


def initial_state(cfg):
    """State at t = 0, holding the prior scale."""
    return FilterState(t=0, scale_chol=matstat.chol_upper(cfg.prior_scale))


def step(cfg, state, y):
    """Absorb one observation; returns the new state and the step output.

    The output is computed from the pre-update scale (the time-t prior): the
    standardized error uses the symmetric inverse square root, and the
    predictive log-density is the forecast-t density of u plus the Jacobian
    of the standardization map, (p/2) log k - (1/2) log|S|, so that values
    are comparable across discount factors on the observation scale.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (cfg.p,):
        raise DimensionMismatch(f"observation has shape {y.shape}, expected ({cfg.p},)")
    r = state.scale_chol
    _, d, vt = np.linalg.svd(r)
    if d[-1] <= 0.0:
        raise NotPositiveDefinite("filter scale matrix lost positive definiteness")
    z = vt @ y
    q = float(np.sum((z / d) ** 2))
    logdet = 2.0 * float(np.sum(np.log(d)))
    u = np.sqrt(cfg.k) * (vt.T @ (z / d))
    u_star = np.sqrt((3 * cfg.delta - 2) / (1 - cfg.delta)) * u
    logdens = (
        matstat.student_t_logpdf(u, cfg.forecast_df)
        + 0.5 * cfg.p * np.log(cfg.k)
        - 0.5 * logdet
    )
    forecast_scale = cfg.forecast_scale_coef * (r.T @ r)
    r_new = _cholupdate(r / np.sqrt(cfg.k), y.copy())
    new_state = FilterState(t=state.t + 1, scale_chol=r_new)
    out = StepOutput(forecast_scale=forecast_scale, u=u, u_star=u_star,
                     predictive_logdensity=float(logdens), q=q)
    return new_state, out


def _cholupdate(r, x):
    """Upper factor of R'R + xx' from the upper factor R; consumes x."""
    r = np.array(r, dtype=float)
    p = x.shape[0]
    for j in range(p):
        rad = np.hypot(r[j, j], x[j])
        c = rad / r[j, j]
        s = x[j] / r[j, j]
        r[j, j] = rad
        if j + 1 < p:
            r[j, j + 1:] = (r[j, j + 1:] + s * x[j + 1:]) / c
            x[j + 1:] = c * x[j + 1:] - s * r[j, j + 1:]
    return r


def posterior_mean(cfg, state):
    """Posterior mean of the volatility matrix, (1-d)/(2d-1) * S_t."""
    return cfg.posterior_mean_coef * state.scale


def prior_mean_next(cfg, state):
    """Prior mean of the next volatility matrix, (1-d)/(k(3d-2)) * S_t.

    Identical to the one-step forecast variance of the next return.
    """
    return cfg.forecast_scale_coef * state.scale


def expectation_invariance_check(cfg, state, k=None):
    """Traces of the expected precision before and after the evolution.

    Returns ((n+p-1) tr(S^{-1}), (d*n+p-1) * k * tr(S^{-1})).  With the
    model's k the two agree to machine precision; with the naive k = 1/d and
    p > 1 they differ by (p-1)(1/d - 1) tr(S^{-1}).
    """
    if k is None:
        k = cfg.k
    r_inv = np.linalg.inv(state.scale_chol)
    tr = float(np.sum(r_inv * r_inv))      # tr(S^{-1}) = ||R^{-1}||_F^2
    post = (cfg.n + cfg.p - 1) * tr
    prior = (cfg.delta * cfg.n + cfg.p - 1) * k * tr
    return post, prior


@dataclass(frozen=True)
class FilterRun:
    """Arrays produced by a full pass of the filter over a series."""

    cfg: ModelConfig
    scales: np.ndarray       # (N, p, p) post-update scale matrices
    u: np.ndarray            # (N, p)
    q: np.ndarray            # (N,)
    logdet_pre: np.ndarray   # (N,) log|S_{t-1}|
    final_state: FilterState = field(repr=False, default=None)

    @property
    def u_star(self):
        return np.sqrt((3 * self.cfg.delta - 2) / (1 - self.cfg.delta)) * self.u

    @property
    def u_sq(self):
        """u'u per step (invariant to the choice of square root)."""
        return np.sum(self.u * self.u, axis=1)

    @property
    def logdet_post(self):
        """log|S_t| of the post-update scales, in closed form."""
        kq = self.cfg.k * self.q
        return self.logdet_pre - self.cfg.p * np.log(self.cfg.k) + np.log1p(kq)

    @property
    def predictive_logdensity(self):
        """Observation-scale forecast log-density per step."""
        cfg = self.cfg
        from .matstat import student_t_logpdf_from_sq

        base = np.array([
            student_t_logpdf_from_sq(s, cfg.forecast_df, cfg.p) for s in self.u_sq
        ])
        return base + 0.5 * cfg.p * np.log(cfg.k) - 0.5 * self.logdet_pre


def run_filter(cfg, returns, approximate_prior=False):
    """Run the filter over an (N, p) return matrix.

    With `approximate_prior=True` the prior scale is dropped from the
    recursion (the weighted-sum approximation of S_t): the state starts at
    zero, and the outputs of the warm-up steps, before the accumulated scale
    becomes positive definite, are NaN.
    """
    returns = np.asarray(returns, dtype=float)
    if returns.ndim != 2 or returns.shape[1] != cfg.p:
        raise DimensionMismatch(
            f"returns must have shape (N, {cfg.p}), got {returns.shape}"
        )
    N = returns.shape[0]
    if N == 0:
        empty = np.empty((0,))
        return FilterRun(cfg=cfg, scales=np.empty((0, cfg.p, cfg.p)),
                         u=np.empty((0, cfg.p)), q=empty, logdet_pre=empty,
                         final_state=initial_state(cfg))
    start = 0
    if approximate_prior:
        s = np.zeros((cfg.p, cfg.p))
        r0 = None
        for t in range(N):
            s = s / cfg.k + np.outer(returns[t], returns[t])
            try:
                r0 = matstat.chol_upper(s)
            except NotPositiveDefinite:
                continue
            start = t + 1
            break
        if r0 is None:
            raise NotPositiveDefinite("series never accumulates a full-rank scale")
    else:
        r0 = matstat.chol_upper(cfg.prior_scale)

    scales = np.empty((N, cfg.p, cfg.p))
    u = np.full((N, cfg.p), np.nan)
    q = np.full(N, np.nan)
    logdet_pre = np.full(N, np.nan)
    if start > 0:
        # warm-up scales from the truncated recursion; outputs stay NaN
        s = np.zeros((cfg.p, cfg.p))
        for t in range(start):
            s = s / cfg.k + np.outer(returns[t], returns[t])
            scales[t] = s
    if start < N:
        out = filter_core(np.ascontiguousarray(returns[start:]), r0, cfg.k, 0.0)
        scales[start:], u[start:], q[start:], logdet_pre[start:], r_final = out
        if not approximate_prior and not np.all(np.isfinite(q[start:])):
            raise NotPositiveDefinite("filter scale matrix lost positive definiteness")
    else:
        r_final = matstat.chol_upper(scales[-1])
    return FilterRun(cfg=cfg, scales=scales, u=u, q=q, logdet_pre=logdet_pre,
                     final_state=FilterState(t=N, scale_chol=r_final))
