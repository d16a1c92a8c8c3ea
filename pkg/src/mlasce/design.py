"""Sequential experimental design: candidate grids and the MICE loop.

The selection criterion is the ratio of the current model's predictive
variance at a candidate to its predictive variance under a GP conditioned
on the remaining candidates with a stabilized nugget. The denominator for
every candidate at once comes from the diagonal of the inverse candidate
correlation matrix (the conditional variance of one Gaussian coordinate
given the rest), so each step costs a single factorization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import CandidatesExhausted, FactorizationError, SimulatorError
from .gp import GPModel, fit, posterior_batch
from .kernels import as_design, chol_factor, corr_vector, matern_corr

log = logging.getLogger(__name__)

DEFAULT_TAU2 = 1e-8
DEFAULT_TAU2_S = 1.0


def domain_arrays(domain):
    """Normalize a (lo, hi) domain to a pair of (d,) arrays."""
    lo = np.atleast_1d(np.asarray(domain[0], dtype=float))
    hi = np.atleast_1d(np.asarray(domain[1], dtype=float))
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError("domain must be a (lo, hi) pair of equal-length bounds")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("domain bounds must be finite")
    if not np.all(hi > lo):
        raise ValueError("domain is empty: every upper bound must exceed its lower bound")
    return lo, hi


@dataclass(frozen=True)
class CandidateSet:
    """A discretized domain plus the indices still available for selection."""

    grid: np.ndarray
    cand: np.ndarray
    rng_seed: int

    @property
    def points(self):
        return self.grid[self.cand]

    def without(self, grid_index):
        return replace(self, cand=self.cand[self.cand != grid_index])


@dataclass(frozen=True)
class DesignState:
    """Current design, observations, fitted model and the two nuggets."""

    X: np.ndarray
    y: np.ndarray
    model: GPModel
    tau2: float = DEFAULT_TAU2
    tau2_s: float = DEFAULT_TAU2_S


def generate_grid(domain, n_grid, seed, mode="auto"):
    """Discretize the domain into n_grid points.

    mode "grid" gives a uniform tensor grid, "stratified" a Latin-hypercube
    style sample with one point per axis stratum; "auto" picks "grid" for
    d = 1 and "stratified" otherwise. Deterministic given the seed.
    """
    lo, hi = domain_arrays(domain)
    d = lo.size
    if n_grid < 2:
        raise ValueError("need at least two grid points")
    if mode == "auto":
        mode = "grid" if d == 1 else "stratified"
    if mode == "grid":
        if d == 1:
            pts = np.linspace(lo[0], hi[0], n_grid).reshape(-1, 1)
        else:
            m = max(2, int(np.floor(n_grid ** (1.0 / d))))
            axes = [np.linspace(lo[j], hi[j], m) for j in range(d)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.column_stack([ax.ravel() for ax in mesh])
    elif mode == "stratified":
        rng = np.random.default_rng(seed)
        pts = np.empty((n_grid, d))
        for j in range(d):
            perm = rng.permutation(n_grid)
            offs = rng.uniform(size=n_grid)
            pts[:, j] = lo[j] + (perm + offs) / n_grid * (hi[j] - lo[j])
    else:
        raise ValueError(f"unknown grid mode {mode!r}")
    return CandidateSet(grid=pts, cand=np.arange(len(pts)), rng_seed=int(seed))


def _stabilized_nugget(state):
    return max(state.tau2, state.tau2_s)


def _corr_gram(pts, spec, diag_add):
    R = matern_corr(cdist(pts, pts), spec.nu, spec.lam)
    R[np.diag_indices_from(R)] += diag_add
    return R


def mice_criterion(state, x, cand_rest):
    """MICE score of candidate x against the remaining candidates.

    Numerator: the current model's predictive variance at x. Denominator:
    the predictive variance of the observation at x for a GP conditioned
    on cand_rest with nugget max(tau2, tau2_s); with no remaining
    candidates that is the unconditioned sigma2 * (1 + nugget).
    """
    model = state.model
    spec = model.spec
    tau_bar = _stabilized_nugget(state)
    xq = as_design(x)
    _, num = posterior_batch(model, xq)
    num = float(num[0])
    if len(cand_rest) == 0:
        den = spec.sigma2 * (1.0 + tau_bar)
    else:
        rest = as_design(cand_rest)
        fac = chol_factor(_corr_gram(rest, spec, tau_bar), jitter0=tau_bar)
        r = corr_vector(xq, rest, spec)[0]
        w = fac.solve_lower(r)
        den = spec.sigma2 * ((1.0 + tau_bar) - float(w @ w))
    return num / den


def mice_scores(state, points):
    """Criterion values for every candidate point in one factorization.

    The denominator for candidate i is sigma2 / [(R + tau I)^{-1}]_{ii},
    the conditional variance of coordinate i given all other candidates;
    this equals the per-candidate conditioning of mice_criterion exactly.
    """
    model = state.model
    spec = model.spec
    tau_bar = _stabilized_nugget(state)
    pts = as_design(points)
    _, num = posterior_batch(model, pts)
    if len(pts) == 1:
        return num / (spec.sigma2 * (1.0 + tau_bar))
    fac = chol_factor(_corr_gram(pts, spec, tau_bar), jitter0=tau_bar)
    Linv = fac.solve_lower(np.eye(len(pts)))
    inv_diag = np.einsum("ij,ij->j", Linv, Linv)
    den = spec.sigma2 / inv_diag
    return num / den


def _select(state, cands):
    """Criterion argmax over active candidates; returns (point, grid index)."""
    active = cands.cand
    if active.size == 0:
        raise CandidatesExhausted("no candidate points left to select")
    pts = cands.grid[active]
    try:
        scores = mice_scores(state, pts)
    except FactorizationError:
        # Degenerate stabilization nugget; score candidates one by one.
        scores = np.full(active.size, -np.inf)
        for i in range(active.size):
            rest = np.delete(pts, i, axis=0)
            try:
                scores[i] = mice_criterion(state, pts[i], rest)
            except FactorizationError:
                log.warning("skipping candidate %s: degenerate denominator", pts[i])
        if not np.any(np.isfinite(scores)):
            raise FactorizationError(
                "every candidate produced a degenerate denominator"
            ) from None
    # Scores within a 4e-12 relative band of the maximum count as tied;
    # ties break to the lowest candidate index.
    top = float(np.max(scores))
    tied = np.nonzero(scores >= top - 4e-12 * abs(top))[0]
    chosen = int(active[int(tied[0])])
    return cands.grid[chosen].copy(), chosen


def mice_step(state, cands):
    """Pick the criterion argmax among active candidates.

    Returns the chosen point and the candidate set with it removed. Ties
    break to the lowest candidate index.
    """
    x, chosen = _select(state, cands)
    return x, cands.without(chosen)


def _evaluate(simulator, x):
    """Call a simulator on a (d,) input and coerce the output to a float."""
    try:
        val = float(np.asarray(simulator(x)).reshape(()))
    except SimulatorError:
        raise
    except Exception as exc:
        raise SimulatorError(f"simulator failed at x={x!r}: {exc}", x=x) from exc
    if not np.isfinite(val):
        raise SimulatorError(f"simulator returned non-finite value at x={x!r}", x=x)
    return val


def mice_run(
    simulator,
    domain,
    n_target,
    nu,
    seed=0,
    nugget=DEFAULT_TAU2,
    tau2_s=DEFAULT_TAU2_S,
    n_grid=101,
    n_initial=3,
    spec=None,
    resample_grid=False,
    max_candidates=None,
):
    """Run the full select-evaluate-refit loop up to n_target points.

    With ``spec`` given the hyperparameters stay fixed (no refitting);
    otherwise the correlation length and variance are re-estimated after
    every evaluation. ``resample_grid`` redraws the stratified grid each
    iteration instead of keeping it fixed.
    """
    n_initial = min(n_initial, n_target)
    if n_initial < 1:
        raise ValueError("need at least one initial point")
    ss = np.random.SeedSequence(seed)
    grid_seed, init_seed, loop_seed = (int(c.generate_state(1)[0]) for c in ss.spawn(3))
    cands = generate_grid(domain, n_grid, grid_seed)
    rng = np.random.default_rng(init_seed)

    init_idx = np.sort(rng.choice(len(cands.grid), size=n_initial, replace=False))
    X = cands.grid[init_idx].copy()
    y = np.array([_evaluate(simulator, x) for x in X])
    cands = replace(cands, cand=np.setdiff1d(cands.cand, init_idx))

    def refit(X, y):
        if spec is not None:
            return GPModel.from_spec(X, y, spec)
        return fit(X, y, nu, nugget=nugget, domain=domain)

    state = DesignState(X=X, y=y, model=refit(X, y), tau2=nugget, tau2_s=tau2_s)
    loop_rng = np.random.default_rng(loop_seed)
    k = n_initial
    while k < n_target:
        step_cands = cands
        if resample_grid:
            step_cands = generate_grid(
                domain, n_grid, int(loop_rng.integers(2 ** 31)), mode="stratified"
            )
            step_cands = _drop_selected(step_cands, state.X)
        if max_candidates is not None and step_cands.cand.size > max_candidates:
            keep = np.sort(
                loop_rng.choice(step_cands.cand, size=max_candidates, replace=False)
            )
            step_cands = replace(step_cands, cand=keep)
        x, chosen = _select(state, step_cands)
        if not resample_grid:
            cands = cands.without(chosen)
        y_new = _evaluate(simulator, x)
        X = np.vstack([state.X, x])
        y = np.append(state.y, y_new)
        state = replace(state, X=X, y=y, model=refit(X, y))
        k += 1
    return state


def _drop_selected(cands, X):
    keep = [
        i
        for i in cands.cand
        if not np.any(np.all(np.isclose(cands.grid[i], X, atol=1e-13), axis=1))
    ]
    return replace(cands, cand=np.asarray(keep, dtype=int))
