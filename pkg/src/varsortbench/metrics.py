"""Graph-recovery scoring: edit distance and intervention distance.

The intervention distance counts ordered node pairs (i, j) whose effect of
intervening on ``i`` would be falsely inferred when adjusting for the
estimated parents of ``i``. It is computed by a graphical criterion and
cross-checkable against an independent oracle that compares population
regression coefficients with path-coefficient sums on random linear
parameterizations of the true graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, MecSizeError
from .graphs import Cpdag, Dag, d_separated_adj, descendant_matrix, enumerate_mec, reachability_adj
from .rng import substream
from .scm import WeightedDag

__all__ = [
    "MetricRecord",
    "shd",
    "shd_cpdag",
    "sid",
    "sid_oracle_linear",
    "sid_cpdag_bounds",
    "favorable_threshold_shd",
]


@dataclass(frozen=True)
class MetricRecord:
    """One scored comparison between an estimate and the ground truth.

    ``sid`` is bounded by ``sid_normalizer = d (d - 1)``; ``true_edges``
    gives the edge-count context for reading ``shd``.
    """

    shd: int
    sid: int
    sid_normalizer: int
    true_edges: int
    sid_mec_lower: int | None = None
    sid_mec_upper: int | None = None
    shd_cpdag: int | None = None

    def as_dict(self) -> dict:
        return {
            "shd": self.shd,
            "sid": self.sid,
            "sid_normalizer": self.sid_normalizer,
            "true_edges": self.true_edges,
            "sid_mec_lower": self.sid_mec_lower,
            "sid_mec_upper": self.sid_mec_upper,
            "shd_cpdag": self.shd_cpdag,
        }


def _check_same_d(a, b):
    if a.d != b.d:
        raise ConfigurationError(f"graphs have different node counts ({a.d} vs {b.d})")


def shd(g_true: Dag, g_est: Dag) -> int:
    """Edit distance over unordered pairs; a reversed edge costs one."""
    _check_same_d(g_true, g_est)
    t, e = g_true.adj, g_est.adj
    mismatch = 0
    for i in range(g_true.d):
        for j in range(i + 1, g_true.d):
            status_t = (t[i, j], t[j, i])
            status_e = (e[i, j], e[j, i])
            if status_t != status_e:
                mismatch += 1
    return mismatch


def _pair_status(c: Cpdag, i: int, j: int) -> int:
    # 0 absent, 1 undirected, 2 i->j, 3 j->i
    if c.undirected[i, j]:
        return 1
    if c.directed[i, j]:
        return 2
    if c.directed[j, i]:
        return 3
    return 0


def shd_cpdag(c_true: Cpdag, c_est: Cpdag) -> int:
    """Edit distance between class representatives over unordered pairs."""
    _check_same_d(c_true, c_est)
    return sum(
        _pair_status(c_true, i, j) != _pair_status(c_est, i, j)
        for i in range(c_true.d)
        for j in range(i + 1, c_true.d)
    )


# ---------------------------------------------------------------------------
# Intervention distance: graphical criterion
# ---------------------------------------------------------------------------


def _adjustment_valid(adj: np.ndarray, reach_refl: np.ndarray, i: int, j: int, zset) -> bool:
    """Does adjusting for ``zset`` identify the effect of ``i`` on ``j``?

    ``zset`` must not contain ``j``. Checks the generalized adjustment
    criterion: no element of Z may descend from a node (other than ``i``)
    on a directed path from ``i`` to ``j``, and Z must d-separate ``i``
    and ``j`` in the graph with the first edges of those paths removed.
    """
    d = adj.shape[0]
    # Nodes (other than i) lying on a directed path i -> ... -> j.
    on_path = reach_refl[i] & reach_refl[:, j]
    on_path[i] = False
    if on_path.any():
        descendants_of_path = reach_refl[on_path].any(axis=0)
        if any(descendants_of_path[z] for z in zset):
            return False
        pruned = adj.copy()
        for c in np.flatnonzero(adj[i] & on_path):
            pruned[i, c] = False
    else:
        pruned = adj
    return d_separated_adj(pruned, i, j, zset)


def sid(g_true: Dag, g_est: Dag) -> int:
    """Count of ordered pairs with falsely inferred intervention effects.

    The estimate contributes only its parent sets: for each (i, j) the pair
    is a mistake if adjusting for the estimated parents of ``i`` fails in
    the true graph. When ``j`` itself is an estimated parent of ``i``, the
    inferred effect is "none", a mistake exactly when ``j`` descends from
    ``i`` in truth.
    """
    _check_same_d(g_true, g_est)
    d = g_true.d
    adj = g_true.adj
    desc = descendant_matrix(g_true)
    reach_refl = reachability_adj(adj, reflexive=True)
    mistakes = 0
    for i in range(d):
        zset = [int(v) for v in g_est.parents(i)]
        for j in range(d):
            if j == i:
                continue
            if j in zset:
                mistakes += bool(desc[i, j])
            else:
                mistakes += not _adjustment_valid(adj, reach_refl, i, j, zset)
    return int(mistakes)


# ---------------------------------------------------------------------------
# Intervention distance: linear-Gaussian oracle
# ---------------------------------------------------------------------------


def sid_oracle_linear(g_true: Dag, g_est: Dag, trials: int = 5, seed: int = 0) -> int:
    """Independent check of ``sid`` on random linear parameterizations.

    For each trial, weights on the true edges and noise scales are drawn
    from laws bounded away from zero; the true effect of ``i`` on ``j`` is
    the path-coefficient sum, the inferred effect is the coefficient of
    ``x_i`` when regressing ``x_j`` on ``x_i`` and the estimated parents of
    ``i`` under the exact covariance. A pair counts as a mistake if the two
    differ (tolerance 1e-8) in any trial.
    """
    _check_same_d(g_true, g_est)
    if trials < 1:
        raise ConfigurationError("need at least one trial")
    d = g_true.d
    rng = substream(seed, "metrics", "sid_oracle")
    mistaken = np.zeros((d, d), dtype=bool)
    edges = g_true.edges()
    completed = 0
    attempts = 0
    while completed < trials:
        attempts += 1
        if attempts > 100 * trials:
            raise ConfigurationError("could not draw a non-degenerate parameterization")
        w = np.zeros((d, d))
        for i, j in edges:
            magnitude = rng.uniform(0.5, 2.0)
            w[i, j] = magnitude * (1 if rng.random() < 0.5 else -1)
        sigma = rng.uniform(0.5, 2.0, size=d)
        minv = np.linalg.inv(np.eye(d) - w.T)
        cov = minv @ np.diag(sigma**2) @ minv.T
        effects = np.linalg.inv(np.eye(d) - w)  # (i, j) entry: total effect of i on j
        trial_mistakes = []
        try:
            for i in range(d):
                zs = [int(v) for v in g_est.parents(i)]
                regressors = [i] + zs
                gram = cov[np.ix_(regressors, regressors)]
                for j in range(d):
                    if j == i or mistaken[i, j]:
                        continue
                    coef = np.linalg.solve(gram, cov[regressors, j])[0]
                    truth = effects[i, j]
                    if abs(coef - truth) > 1e-8 * max(1.0, abs(truth)):
                        trial_mistakes.append((i, j))
        except np.linalg.LinAlgError:
            continue  # collinear adjustment set for this draw: resample
        for i, j in trial_mistakes:
            mistaken[i, j] = True
        completed += 1
    return int(mistaken.sum())


def sid_cpdag_bounds(g_true: Dag, c_est: Cpdag, cap: int = 10_000) -> tuple[int, int]:
    """(min, max) intervention distance over all members of the estimated
    equivalence class. Raises ``MecSizeError`` beyond ``cap`` members."""
    _check_same_d(g_true, c_est)
    members = enumerate_mec(c_est, cap=cap)
    if not members:
        raise MecSizeError("estimated class has no consistent extension")
    values = [sid(g_true, h) for h in members]
    return min(values), max(values)


def favorable_threshold_shd(w_est: WeightedDag | np.ndarray, g_true: Dag) -> tuple[float, int]:
    """Best-case edit distance over per-instance thresholds.

    Candidates are zero plus every distinct weight magnitude nudged up so
    the corresponding edges drop. Returns the (threshold, shd) pair with
    the smallest distance, preferring smaller thresholds on ties.
    """
    from .contlearn import threshold_and_break_cycles  # deferred: avoids an import cycle

    w = w_est.w if isinstance(w_est, WeightedDag) else np.asarray(w_est, dtype=float)
    magnitudes = np.unique(np.abs(w[w != 0]))
    candidates = [0.0] + [float(np.nextafter(v, np.inf)) for v in magnitudes]
    best = None
    for omega in candidates:
        value = shd(g_true, threshold_and_break_cycles(w, omega))
        if best is None or value < best[1]:
            best = (omega, value)
    return best
