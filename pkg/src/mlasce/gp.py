"""Single-level Gaussian process regression with a fixed Matern smoothness.

The smoothness nu and the nugget are held fixed; the correlation length and
the marginal variance are estimated by maximum likelihood. The variance is
profiled out analytically (its conditional optimum given the correlation
length is available in closed form), leaving a bounded one-dimensional
search over log correlation length started from a fixed log-uniform
lattice. All posterior quantities are computed against a cached Cholesky
factor of the unit-variance correlation matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import FactorizationError
from .kernels import (
    CholeskyFactor,
    KernelSpec,
    as_design,
    chol_factor,
    corr_vector,
    matern_corr,
)

_N_STARTS = 8
_NM_OPTIONS = {"maxfev": 60, "xatol": 1e-3, "fatol": 1e-9}

# Search-box constants: lam in [LAM_LO, LAM_HI] * diameter, sigma2 in
# [SIG_LO, SIG_HI] * sample variance of y.
_LAM_LO, _LAM_HI = 1e-2, 10.0
_SIG_LO, _SIG_HI = 1e-8, 1e4
_SIGMA2_FLOOR = 1e-8


@dataclass(frozen=True)
class GPModel:
    """A fitted GP: design, observations, kernel and cached factorization.

    ``chol`` factorizes the correlation matrix (unit variance, nugget on
    the diagonal); ``alpha`` is K^{-1} y for the sigma2-scaled kernel.
    """

    X: np.ndarray
    y: np.ndarray
    spec: KernelSpec
    chol: CholeskyFactor
    alpha: np.ndarray

    @classmethod
    def from_spec(cls, X, y, spec):
        """Build a model with fixed hyperparameters (no estimation)."""
        X = as_design(X)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} outputs")
        if X.shape[0] < 1:
            raise ValueError("need at least one training point")
        if spec.sigma2 <= 0.0:
            raise ValueError("model construction requires sigma2 > 0")
        R = matern_corr(cdist(X, X), spec.nu, spec.lam)
        R[np.diag_indices_from(R)] += spec.nugget
        fac = chol_factor(R, jitter0=spec.nugget)
        alpha = fac.solve(y) / spec.sigma2
        return cls(X=X, y=y, spec=spec, chol=fac, alpha=alpha)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class PosteriorPoint:
    """Posterior mean and (clamped nonnegative) variance at one input."""

    mean: float
    var: float


def lambda_bounds(diameter):
    """Correlation-length search bounds derived from the domain diameter."""
    D = float(diameter)
    if not (np.isfinite(D) and D > 0.0):
        D = 1.0
    return _LAM_LO * D, _LAM_HI * D


def _diameter(domain, X):
    if domain is not None:
        lo, hi = np.asarray(domain[0], float).ravel(), np.asarray(domain[1], float).ravel()
        return float(np.linalg.norm(hi - lo))
    if X.shape[0] < 2:
        return 0.0
    return float(cdist(X, X).max())


def log_marginal_likelihood(X, y, spec):
    """Zero-mean Gaussian log likelihood of y under cov_matrix(X, spec)."""
    X = as_design(X)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    R = matern_corr(cdist(X, X), spec.nu, spec.lam)
    R[np.diag_indices_from(R)] += spec.nugget
    fac = chol_factor(R, jitter0=spec.nugget)
    z = fac.solve_lower(y)
    quad = float(z @ z) / spec.sigma2
    logdet = n * math.log(spec.sigma2) + fac.logdet
    return -0.5 * (quad + logdet + n * math.log(2.0 * math.pi))


def fit(X, y, nu, nugget=0.0, domain=None):
    """Maximum-likelihood GP fit with fixed nu and nugget.

    ``domain`` (a (lo, hi) pair) sets the correlation-length search box via
    its diameter; when omitted the design's own diameter is used.
    """
    X = as_design(X)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if n != y.shape[0]:
        raise ValueError(f"{n} inputs but {y.shape[0]} outputs")
    if n < 1:
        raise ValueError("need at least one training point")

    lam_lo, lam_hi = lambda_bounds(_diameter(domain, X))
    if n == 1:
        # One point pins only the scale; the likelihood is flat in lam.
        sigma2 = max(float(y[0]) ** 2, _SIGMA2_FLOOR)
        lam = math.sqrt(lam_lo * lam_hi)
        return GPModel.from_spec(X, y, KernelSpec(nu, lam, sigma2, nugget))

    v = float(np.var(y))
    if not (np.isfinite(v) and v > 0.0):
        v = 1.0
    sig_lo, sig_hi = _SIG_LO * v, _SIG_HI * v

    dist = cdist(X, X)
    diag = np.diag_indices(n)
    log_lo, log_hi = math.log(lam_lo), math.log(lam_hi)

    def profiled_nll(loglam):
        # 2x negative profile log likelihood up to the 2*pi constant.
        lam = math.exp(min(max(loglam[0], log_lo), log_hi))
        R = matern_corr(dist, nu, lam)
        R[diag] += nugget
        try:
            fac = chol_factor(R, jitter0=nugget)
        except FactorizationError:
            return np.inf
        z = fac.solve_lower(y)
        q = float(z @ z)
        sigma2 = min(max(q / n, sig_lo), sig_hi)
        return q / sigma2 + n * math.log(sigma2) + fac.logdet

    starts = np.linspace(log_lo, log_hi, _N_STARTS + 2)[1:-1]
    best_val, best_loglam = np.inf, None
    for s in starts:
        res = minimize(
            profiled_nll,
            [s],
            method="Nelder-Mead",
            bounds=[(log_lo, log_hi)],
            options=_NM_OPTIONS,
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_loglam = res.fun, float(res.x[0])
    if best_loglam is None:
        raise FactorizationError("every hyperparameter start failed to factorize")

    lam = math.exp(min(max(best_loglam, log_lo), log_hi))
    R = matern_corr(dist, nu, lam)
    R[diag] += nugget
    fac = chol_factor(R, jitter0=nugget)
    z = fac.solve_lower(y)
    sigma2 = min(max(float(z @ z) / n, sig_lo), sig_hi)
    spec = KernelSpec(nu, lam, sigma2, nugget)
    return GPModel(X=X, y=y, spec=spec, chol=fac, alpha=fac.solve(y) / sigma2)


def _as_queries(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if dim == 1 else x.reshape(1, -1)
    if x.shape[1] != dim:
        raise ValueError(f"query dimension {x.shape[1]} != model dimension {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("query contains non-finite entries")
    return x


def _unit_residual_var(model, Xq):
    """Return (cross-correlation matrix, 1 - r^T R^{-1} r per query, >= 0)."""
    r = corr_vector(Xq, model.X, model.spec)
    w = model.chol.solve_lower(r.T)
    resid = 1.0 - np.einsum("ij,ij->j", w, w)
    return r, np.maximum(resid, 0.0)


def posterior_batch(model, X):
    """Posterior means and variances at many query points."""
    Xq = _as_queries(X, model.dim)
    r, resid = _unit_residual_var(model, Xq)
    mean = model.spec.sigma2 * (r @ model.alpha)
    var = model.spec.sigma2 * resid
    return mean, var


def _single_query(model, x):
    q = _as_queries(x, model.dim)
    if q.shape[0] != 1:
        raise ValueError("expected a single point; use the batch variant")
    return q


def posterior(model, x):
    """Posterior mean/variance at a single query point."""
    mean, var = posterior_batch(model, _single_query(model, x))
    return PosteriorPoint(mean=float(mean[0]), var=float(var[0]))


def power_batch(model, X):
    """Unit-variance predictive variance (power function) at many points."""
    Xq = _as_queries(X, model.dim)
    _, resid = _unit_residual_var(model, Xq)
    return resid


def power_function(model, x):
    """Power function at one point: 1 - r^T R^{-1} r, clamped into [0, 1]."""
    return float(power_batch(model, _single_query(model, x))[0])


def sup_power(model, probes):
    """Maximum of the power function over a finite probe set."""
    vals = power_batch(model, probes)
    if vals.size == 0:
        raise ValueError("probe set is empty")
    return float(vals.max())


def rkhs_norm_sq(model):
    """Squared native-space norm of the posterior mean, y^T K^{-1} y."""
    return max(float(model.y @ model.alpha), 0.0)
