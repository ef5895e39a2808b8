"""Continuous structure learning: losses, gradients, and solvers.

Two solver families are provided. The constrained one minimizes
``1/2 MSE + lambda1 ||W||_1`` subject to ``h(W) = 0`` via an augmented
Lagrangian with dual ascent (quasi-Newton inner solver). The penalized one
runs adaptive-moment gradient descent on a Gaussian log-likelihood score
(equal- or non-equal-variance variant) plus log-determinant correction,
L1 penalty, and a soft acyclicity penalty ``lambda2 * h(W)``.

``h(W) = tr(exp(W o W)) - d`` is zero exactly on DAG-supported matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt

from .errors import ConfigurationError, IntegrityError, SingularModelError
from .graphs import Dag, reachability_adj
from .metrics import shd, sid
from .scm import Dataset, LinearScm, WeightedDag, population_covariance

__all__ = [
    "OptimizerSettings",
    "FitTrace",
    "FitTraceRow",
    "mse",
    "mse_grad",
    "golem_likelihood",
    "golem_likelihood_grad",
    "logdet_penalty",
    "logdet_penalty_grad",
    "golem_objective",
    "golem_objective_grad",
    "acyclicity_h",
    "acyclicity_h_grad",
    "notears_fit",
    "golem_fit",
    "threshold_and_break_cycles",
    "first_step_residual_variances",
    "landscape_3node",
    "LandscapeRecord",
    "enumerate_3node_dags",
]

GOLEM_VARIANTS = ("ev", "nv")


@dataclass(frozen=True)
class OptimizerSettings:
    """Hyperparameters shared by both solver families.

    ``rho_*``, ``alpha_init``, ``h_tol`` and ``progress_factor`` drive the
    augmented-Lagrangian schedule; ``step_size`` and ``iterations`` drive
    gradient descent; ``omega`` is the edge threshold applied downstream.
    """

    lambda1: float = 0.0
    lambda2: float = 5.0
    rho_init: float = 1.0
    rho_max: float = 1e16
    alpha_init: float = 0.0
    h_tol: float = 1e-8
    progress_factor: float = 0.25
    max_outer: int = 100
    max_inner: int = 1000
    step_size: float = 1e-3
    iterations: int = 10_000
    omega: float = 0.3
    fix_diagonal: bool = True

    def __post_init__(self):
        if min(self.rho_init, self.rho_max, self.h_tol, self.step_size) <= 0:
            raise ConfigurationError("schedule parameters must be positive")
        if self.rho_init >= self.rho_max:
            raise ConfigurationError("rho_init must be below rho_max")
        if not 0 < self.progress_factor < 1:
            raise ConfigurationError("progress_factor must lie in (0, 1)")
        if self.omega < 0 or self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigurationError("penalties and threshold must be non-negative")
        if min(self.max_outer, self.max_inner, self.iterations) < 1:
            raise ConfigurationError("iteration counts must be positive")

    @classmethod
    def constrained_defaults(cls, lambda1: float = 0.0) -> "OptimizerSettings":
        return cls(lambda1=lambda1, fix_diagonal=True)

    @classmethod
    def penalized_defaults(cls, variant: str) -> "OptimizerSettings":
        if variant not in GOLEM_VARIANTS:
            raise ConfigurationError(f"unknown variant {variant!r}")
        lambda1 = 2e-2 if variant == "ev" else 2e-3
        return cls(lambda1=lambda1, lambda2=5.0, step_size=1e-3, iterations=10_000, fix_diagonal=False)


@dataclass(frozen=True)
class FitTraceRow:
    outer_iter: int
    objective: float
    mse: float
    h: float
    rho: float
    alpha: float
    max_delta_w: float


@dataclass
class FitTrace:
    rows: list[FitTraceRow] = field(default_factory=list)
    w: np.ndarray | None = None
    converged: bool = False

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("outer_iter,objective,mse,h,rho,alpha,max_delta_w\n")
            for r in self.rows:
                fh.write(
                    f"{r.outer_iter},{r.objective!r},{r.mse!r},{r.h!r},"
                    f"{r.rho!r},{r.alpha!r},{r.max_delta_w!r}\n"
                )


# ---------------------------------------------------------------------------
# Losses and gradients. Everything reduces to the scaled Gram matrix
# S = X^T X / n, so evaluations cost O(d^3) independent of n.
# ---------------------------------------------------------------------------


def _gram(data: Dataset) -> np.ndarray:
    return data.x.T @ data.x / data.n


def _as_w(w) -> np.ndarray:
    if isinstance(w, WeightedDag):
        return w.w
    return np.asarray(w, dtype=float)


def mse(w, data: Dataset) -> float:
    """``(1/n) ||X - X W||_F^2``."""
    w = _as_w(w)
    resid = data.x - data.x @ w
    return float((resid**2).sum() / data.n)


def mse_grad(w, data: Dataset, fix_diagonal: bool = False) -> np.ndarray:
    """``-(2/n) X^T (X - X W)``; diagonal zeroed when ``fix_diagonal``."""
    w = _as_w(w)
    g = -2.0 / data.n * data.x.T @ (data.x - data.x @ w)
    if fix_diagonal:
        np.fill_diagonal(g, 0.0)
    return g


def _mse_parts_gram(w: np.ndarray, s: np.ndarray):
    """Total and per-node residual variances plus ``S (I - W)``."""
    imw = np.eye(w.shape[0]) - w
    sim = s @ imw
    per_node = np.einsum("ij,ij->j", imw, sim)
    return float(per_node.sum()), per_node, sim


def _likelihood_value_gram(w, s, n, variant):
    total, per_node, _ = _mse_parts_gram(w, s)
    d = w.shape[0]
    if variant == "ev":
        if total <= 0:
            raise SingularModelError("zero total residual variance")
        return d / 2.0 * np.log(n * total)
    if np.any(per_node <= 0):
        raise SingularModelError("zero residual variance in some component")
    return 0.5 * float(np.log(n * per_node).sum())


def _likelihood_grad_gram(w, s, variant):
    total, per_node, sim = _mse_parts_gram(w, s)
    d = w.shape[0]
    if variant == "ev":
        if total <= 0:
            raise SingularModelError("zero total residual variance")
        return -d * sim / total
    if np.any(per_node <= 0):
        raise SingularModelError("zero residual variance in some component")
    return -sim / per_node[None, :]


def golem_likelihood(w, data: Dataset, variant: str) -> float:
    """Gaussian likelihood score, ``(d/2) log(n MSE)`` for the equal-variance
    variant and ``(1/2) sum_j log(n MSE_j)`` for the non-equal one."""
    _check_variant(variant)
    return _likelihood_value_gram(_as_w(w), _gram(data), data.n, variant)


def golem_likelihood_grad(w, data: Dataset, variant: str) -> np.ndarray:
    _check_variant(variant)
    return _likelihood_grad_gram(_as_w(w), _gram(data), variant)


def _check_variant(variant):
    if variant not in GOLEM_VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}; pick one of {GOLEM_VARIANTS}")


def logdet_penalty(w) -> float:
    """``-log(|det(I - W)|)``; vanishes on DAG-supported matrices."""
    w = _as_w(w)
    sign, logabs = np.linalg.slogdet(np.eye(w.shape[0]) - w)
    if sign == 0:
        raise SingularModelError("det(I - W) vanished")
    return -float(logabs)


def logdet_penalty_grad(w) -> np.ndarray:
    w = _as_w(w)
    imw = np.eye(w.shape[0]) - w
    try:
        inv = np.linalg.inv(imw)
    except np.linalg.LinAlgError:
        raise SingularModelError("det(I - W) vanished") from None
    return inv.T


_EXPM_CLAMP = 1e150


def _expm_nonneg(a: np.ndarray, tol: float = 1e-10, max_terms: int = 80) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a truncated series.

    Intended for the entrywise-nonnegative matrices ``W o W`` where the
    series has no cancellation; truncation at absolute tolerance ``tol``.
    Entries are clamped during squaring so that evaluations far outside the
    feasible region stay finite (the solvers only need a huge penalty and a
    correctly signed gradient there, not an exact value).
    """
    d = a.shape[0]
    norm = float(np.linalg.norm(a, 1))
    s = 0 if norm <= 0.5 else int(np.ceil(np.log2(norm / 0.5)))
    b = a / (2.0**s)
    out = np.eye(d)
    term = np.eye(d)
    for k in range(1, max_terms):
        term = term @ b / k
        out += term
        if float(np.abs(term).max()) < tol:
            break
    with np.errstate(over="ignore"):
        for _ in range(s):
            out = np.minimum(out @ out, _EXPM_CLAMP)
    return out


def acyclicity_h(w) -> float:
    """``tr(exp(W o W)) - d``: non-negative, zero iff the support is acyclic."""
    w = _as_w(w)
    e = _expm_nonneg(w * w)
    return float(np.trace(e)) - w.shape[0]


def acyclicity_h_grad(w) -> np.ndarray:
    w = _as_w(w)
    e = _expm_nonneg(w * w)
    return e.T * 2.0 * w


def _h_and_grad(w):
    e = _expm_nonneg(w * w)
    return float(np.trace(e)) - w.shape[0], e.T * 2.0 * w


def golem_objective(w, data: Dataset, variant: str, lambda1: float, lambda2: float) -> float:
    """Likelihood score + logdet correction + L1 + soft acyclicity penalty."""
    w = _as_w(w)
    return (
        golem_likelihood(w, data, variant)
        + logdet_penalty(w)
        + lambda1 * float(np.abs(w).sum())
        + lambda2 * acyclicity_h(w)
    )


def golem_objective_grad(w, data: Dataset, variant: str, lambda1: float, lambda2: float) -> np.ndarray:
    w = _as_w(w)
    return (
        golem_likelihood_grad(w, data, variant)
        + logdet_penalty_grad(w)
        + lambda1 * np.sign(w)
        + lambda2 * acyclicity_h_grad(w)
    )


# ---------------------------------------------------------------------------
# Constrained solver: augmented Lagrangian with dual ascent
# ---------------------------------------------------------------------------


def notears_fit(data: Dataset, settings: OptimizerSettings | None = None) -> tuple[WeightedDag, FitTrace]:
    """Minimize ``1/2 MSE + lambda1 ||W||_1`` subject to ``h(W) = 0``.

    The L1 term is handled by splitting ``W`` into positive and negative
    parts, solved per subproblem by L-BFGS-B with the diagonal clamped at
    zero. The penalty weight ``rho`` escalates tenfold whenever ``h`` fails
    to shrink by ``progress_factor``. Columns are de-meaned first. Returns
    the raw weight matrix (thresholding is a separate step) and a trace.
    """
    settings = settings or OptimizerSettings.constrained_defaults()
    x = data.x - data.x.mean(axis=0)
    n, d = x.shape
    s = x.T @ x / n
    lam = settings.lambda1

    def unpack(vec):
        return (vec[: d * d] - vec[d * d :]).reshape(d, d)

    def objective(vec):
        w = unpack(vec)
        total, _, sim = _mse_parts_gram(w, s)
        h_val, h_grad = _h_and_grad(w)
        val = 0.5 * total + 0.5 * rho * h_val**2 + alpha * h_val + lam * vec.sum()
        smooth_grad = -sim + (rho * h_val + alpha) * h_grad
        grad = np.concatenate([(smooth_grad + lam).ravel(), (-smooth_grad + lam).ravel()])
        return val, grad

    bounds = [
        (0.0, 0.0) if settings.fix_diagonal and i == j else (0.0, None)
        for _ in range(2)
        for i in range(d)
        for j in range(d)
    ]
    vec = np.zeros(2 * d * d)
    rho, alpha, h_val = settings.rho_init, settings.alpha_init, np.inf
    trace = FitTrace()
    for outer in range(settings.max_outer):
        w_prev = unpack(vec)
        sol = None
        while rho < settings.rho_max:
            sol = sopt.minimize(
                objective,
                vec,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": settings.max_inner},
            )
            h_new = acyclicity_h(unpack(sol.x))
            if h_new > settings.progress_factor * h_val:
                rho *= 10.0
            else:
                break
        vec = sol.x
        h_val = h_new
        alpha += rho * h_val
        w_now = unpack(vec)
        total_mse, _, _ = _mse_parts_gram(w_now, s)
        trace.rows.append(
            FitTraceRow(
                outer_iter=outer,
                objective=float(sol.fun),
                mse=total_mse,
                h=h_val,
                rho=rho,
                alpha=alpha,
                max_delta_w=float(np.abs(w_now - w_prev).max()),
            )
        )
        if h_val <= settings.h_tol or rho >= settings.rho_max:
            break
    w_final = unpack(vec)
    trace.w = w_final
    trace.converged = bool(h_val <= settings.h_tol)
    return WeightedDag(w_final), trace


# ---------------------------------------------------------------------------
# Penalized solver: adaptive-moment gradient descent on the full objective
# ---------------------------------------------------------------------------


def golem_fit(
    data: Dataset,
    variant: str,
    settings: OptimizerSettings | None = None,
) -> tuple[WeightedDag, FitTrace]:
    """Gradient descent from the empty graph on the penalized likelihood.

    Runs exactly ``settings.iterations`` adaptive-moment steps; no early
    stopping. Raises ``SingularModelError`` (carrying the partial trace) if
    the likelihood degenerates.
    """
    _check_variant(variant)
    settings = settings or OptimizerSettings.penalized_defaults(variant)
    x = data.x - data.x.mean(axis=0)
    n, d = x.shape
    s = x.T @ x / n
    lam1, lam2 = settings.lambda1, settings.lambda2

    def full_grad(w):
        imw = np.eye(d) - w
        sign, logabs = np.linalg.slogdet(imw)
        if sign == 0 or not np.isfinite(logabs):
            raise SingularModelError("det(I - W) vanished during optimization", trace=trace)
        grad = _likelihood_grad_gram(w, s, variant)
        grad += np.linalg.inv(imw).T
        grad += lam1 * np.sign(w)
        h_val, h_grad = _h_and_grad(w)
        grad += lam2 * h_grad
        return grad, h_val, -float(logabs)

    def full_value(w, h_val, neg_logdet):
        return (
            _likelihood_value_gram(w, s, n, variant)
            + neg_logdet
            + lam1 * float(np.abs(w).sum())
            + lam2 * h_val
        )

    w = np.zeros((d, d))
    m1 = np.zeros_like(w)
    m2 = np.zeros_like(w)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    trace = FitTrace()
    trace_every = max(1, settings.iterations // 200)
    w_at_last_row = w.copy()
    try:
        for t in range(1, settings.iterations + 1):
            grad, h_val, neg_logdet = full_grad(w)
            m1 = beta1 * m1 + (1 - beta1) * grad
            m2 = beta2 * m2 + (1 - beta2) * grad**2
            m1_hat = m1 / (1 - beta1**t)
            m2_hat = m2 / (1 - beta2**t)
            w = w - settings.step_size * m1_hat / (np.sqrt(m2_hat) + eps)
            if settings.fix_diagonal:
                np.fill_diagonal(w, 0.0)
            if t % trace_every == 0 or t == settings.iterations:
                h_now, _ = _h_and_grad(w)
                total_mse, _, _ = _mse_parts_gram(w, s)
                trace.rows.append(
                    FitTraceRow(
                        outer_iter=t,
                        objective=full_value(w, h_now, logdet_penalty(w)),
                        mse=total_mse,
                        h=h_now,
                        rho=float("nan"),
                        alpha=float("nan"),
                        max_delta_w=float(np.abs(w - w_at_last_row).max()),
                    )
                )
                w_at_last_row = w.copy()
    except SingularModelError as err:
        err.trace = trace
        raise
    trace.w = w
    trace.converged = True
    return WeightedDag(w), trace


# ---------------------------------------------------------------------------
# Post-processing and instrumentation
# ---------------------------------------------------------------------------


def threshold_and_break_cycles(w: WeightedDag | np.ndarray, omega: float) -> Dag:
    """Zero entries below ``omega`` in magnitude, then break remaining cycles
    by repeatedly dropping the smallest-magnitude edge that lies on a cycle."""
    if omega < 0:
        raise ConfigurationError("omega must be non-negative")
    mat = _as_w(w).copy()
    mat[np.abs(mat) < omega] = 0.0
    while True:
        support = mat != 0
        reach = reachability_adj(support, reflexive=True)
        on_cycle = [(abs(mat[i, j]), i, j) for i, j in zip(*np.nonzero(support)) if reach[j, i]]
        if not on_cycle:
            break
        _, i, j = min(on_cycle)
        mat[i, j] = 0.0
    return Dag(mat != 0)


def first_step_residual_variances(data: Dataset, a: float) -> np.ndarray:
    """Per-node residual variances after one symmetric gradient step.

    The step moves the weight matrix from zero by ``a * X^T X`` (the
    descent direction of the squared-error loss, scale folded into ``a``);
    the result is ``diag(D - 2 a D^2 + a^2 D^3) / n`` with ``D = X^T X`` on
    de-meaned columns. At ``a = 0`` this is the vector of marginal
    variances.
    """
    if a < 0:
        raise ConfigurationError("step scale must be non-negative")
    x = data.x - data.x.mean(axis=0)
    dmat = x.T @ x
    d2 = dmat @ dmat
    d3 = d2 @ dmat
    r = np.diag(dmat) - 2.0 * a * np.diag(d2) + a**2 * np.diag(d3)
    return r / data.n


# ---------------------------------------------------------------------------
# Exhaustive 3-node score landscape
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LandscapeRecord:
    edges: tuple[tuple[int, int], ...]
    score: float
    shd: int
    sid: int
    is_argmin: bool


def enumerate_3node_dags() -> list[Dag]:
    """All 25 DAGs on three labeled nodes, in a fixed deterministic order."""
    pairs = [(0, 1), (0, 2), (1, 2)]
    out = []
    for states in np.ndindex(3, 3, 3):
        adj = np.zeros((3, 3), dtype=bool)
        for (a, b), state in zip(pairs, states):
            if state == 1:
                adj[a, b] = True
            elif state == 2:
                adj[b, a] = True
        try:
            out.append(Dag(adj))
        except IntegrityError:
            continue  # the two cyclic triangles
    return out


def landscape_3node(
    scm: LinearScm,
    lambda1: float,
    data: Dataset | None = None,
    standardize_input: bool = False,
    tie_tol: float = 1e-9,
) -> list[LandscapeRecord]:
    """Score all 25 candidate structures against a 3-node ground truth.

    Each candidate gets maximum-likelihood non-equal-variance Gaussian
    parameters by least squares on its support (from the sample covariance
    if ``data`` is given, else from the exact model covariance) and is
    scored by ``1/2 sum_j log(MSE_j) + lambda1 ||W||_1``. Exactly one record
    is flagged as the minimizer; score ties are resolved in favor of the
    true structure.
    """
    if scm.d != 3:
        raise ConfigurationError("landscape enumeration is defined for 3 nodes")
    if data is not None:
        x = data.x - data.x.mean(axis=0)
        cov = x.T @ x / data.n
    else:
        cov = population_covariance(scm)
    if standardize_input:
        scale = np.sqrt(np.diag(cov))
        cov = cov / np.outer(scale, scale)

    candidates = enumerate_3node_dags()
    scores = np.empty(len(candidates))
    rows = []
    for idx, cand in enumerate(candidates):
        w = np.zeros((3, 3))
        log_mse = 0.0
        for j in range(3):
            parents = list(cand.parents(j))
            if parents:
                coef = np.linalg.solve(cov[np.ix_(parents, parents)], cov[parents, j])
                w[parents, j] = coef
                resid = float(cov[j, j] - cov[parents, j] @ coef)
            else:
                resid = float(cov[j, j])
            if resid <= 0:
                raise SingularModelError("degenerate residual variance in candidate fit")
            log_mse += np.log(resid)
        scores[idx] = 0.5 * log_mse + lambda1 * float(np.abs(w).sum())
        rows.append((cand, scores[idx]))

    best = float(scores.min())
    tied = np.abs(scores - best) <= tie_tol * max(1.0, abs(best))
    truth_idx = next(i for i, (cand, _) in enumerate(rows) if cand == scm.graph)
    argmin_idx = truth_idx if tied[truth_idx] else int(np.argmin(scores))

    return [
        LandscapeRecord(
            edges=tuple(cand.edges()),
            score=float(score),
            shd=shd(scm.graph, cand),
            sid=sid(scm.graph, cand),
            is_argmin=(idx == argmin_idx),
        )
        for idx, (cand, score) in enumerate(rows)
    ]
