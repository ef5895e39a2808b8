"""Combinatorial learners: order search plus sparse parent selection.

``sortnregress`` sorts nodes by increasing marginal variance and regresses
each node on its predecessors; ``randomregress`` is the same with a random
order and marks the performance attainable without scale information.
Parent selection runs an L1 path by coordinate descent and picks the path
point minimizing BIC.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError
from .graphs import Dag
from .rng import substream
from .scm import Dataset, WeightedDag
from .varsort import empirical_variances

__all__ = [
    "ParentSearchConfig",
    "lasso_bic_parents",
    "sortnregress",
    "randomregress",
    "variance_sort_full",
    "mse_gds",
    "mse_gds_from_cov",
]


@dataclass(frozen=True)
class ParentSearchConfig:
    """Penalty grid and solver tolerances for parent selection.

    The grid is geometric with ``n_lambdas`` points from the smallest
    penalty that zeroes all coefficients down to ``lambda_min_ratio`` times
    that value.
    """

    n_lambdas: int = 100
    lambda_min_ratio: float = 1e-4
    criterion: str = "bic"
    max_iter: int = 100
    tol: float = 1e-6
    adaptive: bool = True

    def __post_init__(self):
        if self.n_lambdas < 1:
            raise ConfigurationError("need at least one penalty value")
        if not 0 < self.lambda_min_ratio < 1:
            raise ConfigurationError("lambda_min_ratio must lie in (0, 1)")
        if self.criterion != "bic":
            raise ConfigurationError(f"unsupported criterion {self.criterion!r}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ConfigurationError("tol must be positive and max_iter >= 1")


DEFAULT_PARENT_SEARCH = ParentSearchConfig()


def _lasso_cd_path(gram, corr, y_sq, n, lambdas, max_iter, tol):
    """Coordinate descent along a penalty path, warm-started.

    Drives ``1/(2n) ||y - x b||^2 + lam ||b||_1`` expressed through the
    (p, p) Gram matrix ``gram = x^T x / n`` and ``corr = x^T y / n``, so a
    coordinate pass costs O(p^2) regardless of n. After each full sweep the
    solver cycles over the current support until stable. Returns the
    (n_lambdas, p) coefficient array and per-point RSS.
    """
    p = gram.shape[0]
    diag = np.diag(gram).copy()
    usable = np.flatnonzero(diag > 0)
    beta = np.zeros(p)
    betas = np.empty((len(lambdas), p))
    rss = np.empty(len(lambdas))

    def sweep(indices, gb, lam):
        max_delta = 0.0
        for j in indices:
            b_old = beta[j]
            rho = corr[j] - gb[j] + diag[j] * b_old
            b_new = np.sign(rho) * max(abs(rho) - lam, 0.0) / diag[j]
            if b_new != b_old:
                gb += gram[:, j] * (b_new - b_old)
                beta[j] = b_new
                max_delta = max(max_delta, abs(b_new - b_old))
        return max_delta

    def threshold():
        return tol * max(1.0, float(np.abs(beta).max()))

    for li, lam in enumerate(lambdas):
        gb = gram @ beta
        sweeps = 0
        while sweeps < max_iter:
            delta = sweep(usable, gb, lam)
            sweeps += 1
            if delta <= threshold():
                break
            while sweeps < max_iter:
                support = np.flatnonzero(beta)
                if support.size == 0:
                    break
                delta = sweep(support, gb, lam)
                sweeps += 1
                if delta <= threshold():
                    break
        betas[li] = beta
        rss[li] = n * max(y_sq - 2.0 * beta @ corr + beta @ (gram @ beta), 0.0)
    return betas, rss


def lasso_bic_parents(
    data: Dataset,
    target: int,
    candidates,
    cfg: ParentSearchConfig = DEFAULT_PARENT_SEARCH,
) -> np.ndarray:
    """L1 regression path of ``target`` on ``candidates``, BIC-selected.

    Returns one coefficient per candidate; zeros mark non-parents. Columns
    are centered, scaled to unit variance, and (by default) further scaled
    by the magnitude of their joint least-squares coefficients, so strong
    signals enter the path before noise-level ones. Each distinct support
    along the path is scored by ``n log(RSS/n) + log(n) * nnz`` with RSS
    from a least-squares refit of that support, and the winning support's
    refit coefficients are returned on the original scale. Ties go to the
    sparser (larger penalty) point. The reweighting and the refit keep
    penalty shrinkage out of the selection, which would otherwise let
    compensating near-zero parents ride along past the BIC.
    """
    candidates = [int(c) for c in candidates]
    if int(target) in candidates:
        raise ConfigurationError("target cannot be its own candidate parent")
    if not candidates:
        return np.zeros(0)
    if not np.all(np.isfinite(data.x)):
        raise DataError("non-finite observations")
    n = data.n
    x = data.x[:, candidates]
    x = x - x.mean(axis=0)
    scale = x.std(axis=0)
    usable = scale > 0
    x = np.where(usable[None, :], x / np.where(usable, scale, 1.0)[None, :], 0.0)
    y = data.x[:, int(target)]
    y = y - y.mean()
    if cfg.adaptive:
        ols, *_ = np.linalg.lstsq(x, y, rcond=None)
        scale = scale / np.where(np.abs(ols) > 0, np.abs(ols), 1.0)
        x = x * np.abs(ols)[None, :]
        usable = usable & (np.abs(ols) > 0)

    gram = x.T @ x / n
    corr = x.T @ y / n
    lam_max = float(np.max(np.abs(corr)))
    if lam_max == 0.0:
        return np.zeros(len(candidates))
    lambdas = np.geomspace(lam_max, lam_max * cfg.lambda_min_ratio, cfg.n_lambdas)
    betas, _ = _lasso_cd_path(gram, corr, float(y @ y) / n, n, lambdas, cfg.max_iter, cfg.tol)

    tiny = np.finfo(float).tiny
    y_sq = float(y @ y)
    best_bic = np.inf
    best = np.zeros(len(candidates))
    seen: set[tuple[int, ...]] = set()
    for beta in betas:
        support = tuple(int(j) for j in np.flatnonzero(beta))
        if support in seen:
            continue
        seen.add(support)
        if support:
            sub = gram[np.ix_(support, support)]
            coef, *_ = np.linalg.lstsq(sub, corr[list(support)], rcond=None)
            rss = n * max(y_sq / n - corr[list(support)] @ coef, 0.0)
        else:
            coef = np.zeros(0)
            rss = y_sq
        bic = n * np.log(max(rss, tiny) / n) + np.log(n) * len(support)
        if bic < best_bic:
            best_bic = bic
            best = np.zeros(len(candidates))
            best[list(support)] = coef
    return np.where(usable, best / np.where(usable, scale, 1.0), 0.0)


def _regress_along_order(data, order, cfg):
    d = data.d
    w = np.zeros((d, d))
    for r in range(1, d):
        target = int(order[r])
        cands = [int(c) for c in order[:r]]
        w[cands, target] = lasso_bic_parents(data, target, cands, cfg)
    return WeightedDag(w)


def sortnregress(data: Dataset, cfg: ParentSearchConfig = DEFAULT_PARENT_SEARCH) -> WeightedDag:
    """Order nodes by increasing sample variance, then select parents.

    The output supports a DAG by construction. Variance ties break by
    column index (stable sort).
    """
    if data.n <= data.d:
        warnings.warn("fewer observations than nodes; parent search may be unreliable")
    order = np.argsort(empirical_variances(data), kind="stable")
    return _regress_along_order(data, order, cfg)


def randomregress(
    data: Dataset,
    cfg: ParentSearchConfig = DEFAULT_PARENT_SEARCH,
    seed: int = 0,
) -> WeightedDag:
    """Like ``sortnregress`` but with a uniformly random node order."""
    order = substream(seed, "learners", "randomregress").permutation(data.d)
    return _regress_along_order(data, order, cfg)


def variance_sort_full(data: Dataset) -> Dag:
    """Complete DAG oriented along ascending sample variance."""
    if data.d < 2:
        raise ConfigurationError("need at least two nodes")
    order = np.argsort(empirical_variances(data), kind="stable")
    adj = np.zeros((data.d, data.d), dtype=bool)
    for a in range(data.d):
        for b in range(a + 1, data.d):
            adj[order[a], order[b]] = True
    return Dag(adj, order=tuple(int(i) for i in order))


# ---------------------------------------------------------------------------
# Greedy DAG search over edge insertions with a mean-squared-error score
# ---------------------------------------------------------------------------


def _residual_variance(gram, target, parents):
    if not parents:
        return float(gram[target, target])
    p = list(parents)
    sub = gram[np.ix_(p, p)]
    cross = gram[p, target]
    coef, *_ = np.linalg.lstsq(sub, cross, rcond=None)
    return float(gram[target, target] - cross @ coef)


def mse_gds_from_cov(
    gram: np.ndarray,
    max_edges: int | None = None,
    tol_rel: float = 1e-3,
) -> WeightedDag:
    """Greedy forward search over edge insertions on a covariance matrix.

    Starting from the empty graph, repeatedly insert the acyclicity-
    preserving edge with the largest reduction of the total residual
    variance (least-squares refit per candidate target). Stops when the
    best reduction falls below ``tol_rel`` times the current total or when
    ``max_edges`` is reached. Ties break on the lowest (source, target).
    """
    gram = np.asarray(gram, dtype=float)
    d = gram.shape[0]
    if max_edges is None:
        max_edges = d * (d - 1) // 2
    if max_edges > d * (d - 1) // 2:
        raise ConfigurationError("max_edges exceeds the maximum DAG edge count")
    parents: list[list[int]] = [[] for _ in range(d)]
    adj = np.zeros((d, d), dtype=bool)
    reach = np.eye(d, dtype=bool)  # reflexive reachability, kept incrementally
    resid = np.array([float(gram[j, j]) for j in range(d)])
    n_edges = 0
    while n_edges < max_edges:
        total = float(resid.sum())
        best = None
        for i in range(d):
            for j in range(d):
                if i == j or adj[i, j] or reach[j, i]:
                    continue
                new_resid = _residual_variance(gram, j, parents[j] + [i])
                gain = resid[j] - new_resid
                if best is None or gain > best[0] + 1e-15:
                    best = (gain, i, j, new_resid)
        if best is None or best[0] < tol_rel * total:
            break
        _, i, j, new_resid = best
        adj[i, j] = True
        parents[j].append(i)
        resid[j] = new_resid
        reach |= np.outer(reach[:, i], reach[j, :])
        n_edges += 1
    w = np.zeros((d, d))
    for j in range(d):
        if parents[j]:
            p = parents[j]
            coef, *_ = np.linalg.lstsq(gram[np.ix_(p, p)], gram[p, j], rcond=None)
            w[p, j] = coef
    return WeightedDag(w)


def mse_gds(data: Dataset, max_edges: int | None = None, tol_rel: float = 1e-3) -> WeightedDag:
    gram = data.x.T @ data.x / data.n
    return mse_gds_from_cov(gram, max_edges=max_edges, tol_rel=tol_rel)
