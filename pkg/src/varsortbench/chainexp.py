"""Orientation of causal chains under raw, standardized, and harmonized scales.

A chain model x1 -> x2 -> ... -> xd and its reversal are Markov equivalent,
yet the sequence of absolute pairwise regression coefficients tends to grow
along the causal direction, and on the raw scale so do the marginal
variances. The decision rules here exploit exactly that: compare how
"increasing" the coefficient sequences are in both sweep directions, or
check whether the variance sequence increases. Accuracy studies run either
on exact population covariances or on simulated samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateDataError
from .graphs import dag_from_edges
from .rng import spawn_seed, substream
from .scm import (
    Dataset,
    LinearScm,
    NoiseSpec,
    SigmaLaw,
    WeightLaw,
    WeightedDag,
    default_names,
    population_covariance,
    simulate,
    standardize,
    standardized_noise,
)

__all__ = [
    "ChainInstance",
    "OrientationDecision",
    "ChainStudyResult",
    "make_chain",
    "pairwise_coefficients",
    "increasingness",
    "orient_by_coefficients",
    "orient_by_variance",
    "chain_accuracy_study",
]

REGIMES = ("raw", "standardized", "harmonized")
RULES = ("coefficients", "variance")
MODES = ("population", "finite")

DEFAULT_CHAIN_SIGMAS = SigmaLaw.uniform(0.5, 2.0)


@dataclass(frozen=True, eq=False)
class ChainInstance:
    """One chain model as presented to an orientation rule.

    ``weights`` and ``sigmas`` record the generative draw (before any
    harmonization). ``cov`` or ``data`` hold the observable quantities in
    presented variable order: for ``true_direction == "backward"`` the
    variables appear in reverse generative order.
    """

    d: int
    true_direction: str
    regime: str
    weights: np.ndarray
    sigmas: np.ndarray
    cov: np.ndarray | None = None
    data: Dataset | None = None
    noise_kind: str = "gaussian"

    def __post_init__(self):
        if self.true_direction not in ("forward", "backward"):
            raise ConfigurationError(f"unknown direction {self.true_direction!r}")
        if self.regime not in REGIMES:
            raise ConfigurationError(f"unknown regime {self.regime!r}")
        if (self.cov is None) == (self.data is None):
            raise ConfigurationError("exactly one of cov and data must be present")


@dataclass(frozen=True)
class OrientationDecision:
    direction: str
    tie: bool


@dataclass(frozen=True)
class ChainStudyResult:
    accuracy: float
    tie_fraction: float
    d: int
    regime: str
    rule: str
    mode: str
    reps: int
    n: int | None
    weight_law: str
    sigma_law: str
    noise_kind: str
    seed: int


def _chain_scm(weights: np.ndarray, sigmas: np.ndarray, regime: str, noise_kind: str) -> LinearScm:
    d = len(sigmas)
    w = weights.copy()
    if regime == "harmonized":
        w = w / np.sqrt(w**2 + 1.0)
    mat = np.zeros((d, d))
    for i in range(d - 1):
        mat[i, i + 1] = w[i]
    graph = dag_from_edges(d, [(i, i + 1) for i in range(d - 1)], order=tuple(range(d)))
    return LinearScm(graph, WeightedDag(mat), NoiseSpec(noise_kind, sigmas))


def make_chain(
    d: int,
    weight_law: WeightLaw,
    sigma_law: SigmaLaw = DEFAULT_CHAIN_SIGMAS,
    regime: str = "raw",
    direction: str = "forward",
    seed: int = 0,
    n: int | None = None,
    noise_kind: str = "gaussian",
) -> ChainInstance:
    """Draw a chain model and present it under the requested scale regime.

    Population instances carry the exact covariance; passing ``n`` simulates
    that many observations instead. ``direction="backward"`` relabels the
    presented variables in reverse.
    """
    if d < 3:
        raise ConfigurationError("chain studies need d >= 3")
    weights = weight_law.sample(d - 1, substream(seed, "chainexp", "weights"))
    sigmas = sigma_law.sample(d, substream(seed, "chainexp", "sigmas"))
    scm = _chain_scm(weights, sigmas, regime, noise_kind)
    cov = None
    data = None
    if n is None:
        cov = population_covariance(scm)
        if regime == "standardized":
            scale = np.sqrt(np.diag(cov))
            cov = cov / np.outer(scale, scale)
        if direction == "backward":
            cov = cov[::-1, ::-1].copy()
    else:
        data = simulate(scm, n, spawn_seed(seed, "chainexp", "sim"))
        if regime == "standardized":
            data = standardize(data)
        if direction == "backward":
            data = Dataset(data.x[:, ::-1], default_names(d))
    return ChainInstance(
        d=d,
        true_direction=direction,
        regime=regime,
        weights=weights,
        sigmas=sigmas,
        cov=cov,
        data=data,
        noise_kind=noise_kind,
    )


def _observed_cov(inst: ChainInstance) -> np.ndarray:
    if inst.cov is not None:
        return inst.cov
    x = inst.data.x - inst.data.x.mean(axis=0)
    return x.T @ x / inst.data.n


def pairwise_coefficients(inst: ChainInstance) -> tuple[np.ndarray, np.ndarray]:
    """Absolute simple-regression coefficients of adjacent presented pairs.

    Returns the left-to-right sweep (regressing each variable on its left
    neighbor) and the right-to-left sweep (each on its right neighbor,
    starting from the right end).
    """
    cov = _observed_cov(inst)
    var = np.diag(cov)
    if np.any(var <= 0):
        raise DegenerateDataError("zero variance in a presented variable")
    d = inst.d
    adj = np.array([abs(cov[i, i + 1]) for i in range(d - 1)])
    left_to_right = adj / var[:-1]
    right_to_left = (adj / var[1:])[::-1]
    return left_to_right, right_to_left


def increasingness(seq, tol: float = 0.0) -> int:
    """Concordant minus discordant index pairs: ``sum_{p<q} sign(s_q - s_p)``.

    Differences within relative tolerance ``tol`` count as ties (needed so
    that exactly standardized variance sequences tie instead of picking up
    floating-point jitter).
    """
    seq = np.asarray(seq, dtype=float)
    if seq.size < 2:
        raise ConfigurationError("need a sequence of length >= 2")
    total = 0
    for p in range(len(seq) - 1):
        diff = seq[p + 1 :] - seq[p]
        scale = np.maximum(1.0, np.maximum(np.abs(seq[p + 1 :]), abs(seq[p])))
        signs = np.sign(diff)
        signs[np.abs(diff) <= tol * scale] = 0
        total += int(signs.sum())
    return total


def _coin(seed) -> str:
    return "forward" if substream(seed, "chainexp", "coin").random() < 0.5 else "backward"


def orient_by_coefficients(inst: ChainInstance, seed: int = 0) -> OrientationDecision:
    """Pick the direction whose coefficient sweep is more increasing."""
    lr, rl = pairwise_coefficients(inst)
    inc_lr, inc_rl = increasingness(lr), increasingness(rl)
    if inc_lr > inc_rl:
        return OrientationDecision("forward", tie=False)
    if inc_lr < inc_rl:
        return OrientationDecision("backward", tie=False)
    return OrientationDecision(_coin(seed), tie=True)


VARIANCE_TIE_TOL = 1e-9


def orient_by_variance(inst: ChainInstance, seed: int = 0) -> OrientationDecision:
    """Forward iff the presented variance sequence is net increasing."""
    var = np.diag(_observed_cov(inst))
    inc = increasingness(var, tol=VARIANCE_TIE_TOL)
    if inc > 0:
        return OrientationDecision("forward", tie=False)
    if inc < 0:
        return OrientationDecision("backward", tie=False)
    return OrientationDecision(_coin(seed), tie=True)


# ---------------------------------------------------------------------------
# Vectorized accuracy studies
# ---------------------------------------------------------------------------


def _increasingness_rows(seq: np.ndarray, tol: float = 0.0) -> np.ndarray:
    total = np.zeros(seq.shape[0], dtype=np.int64)
    length = seq.shape[1]
    for p in range(length - 1):
        diff = seq[:, p + 1 :] - seq[:, p : p + 1]
        signs = np.sign(diff)
        if tol:
            scale = np.maximum(1.0, np.maximum(np.abs(seq[:, p + 1 :]), np.abs(seq[:, p : p + 1])))
            signs[np.abs(diff) <= tol * scale] = 0
        total += signs.sum(axis=1).astype(np.int64)
    return total


def _population_adjacent(weights, sigmas, regime):
    """Adjacent variances/covariances for a batch of chains, exact."""
    reps, d = sigmas.shape
    w = weights
    if regime == "harmonized":
        w = w / np.sqrt(w**2 + 1.0)
    var = np.empty((reps, d))
    cov = np.empty((reps, d - 1))
    var[:, 0] = sigmas[:, 0] ** 2
    for i in range(d - 1):
        cov[:, i] = w[:, i] * var[:, i]
        var[:, i + 1] = w[:, i] ** 2 * var[:, i] + sigmas[:, i + 1] ** 2
    if regime == "standardized":
        cov = cov / np.sqrt(var[:, :-1] * var[:, 1:])
        var = np.ones_like(var)
    return var, cov


def _finite_adjacent(weights, sigmas, regime, n, noise_kind, rng, batch=500):
    """Sample adjacent variances/covariances for a batch of chains."""
    reps, d = sigmas.shape
    w = weights
    if regime == "harmonized":
        w = w / np.sqrt(w**2 + 1.0)
    var = np.empty((reps, d))
    cov = np.empty((reps, d - 1))
    for start in range(0, reps, batch):
        stop = min(start + batch, reps)
        b = stop - start
        noise = standardized_noise(noise_kind, (b, n, d), rng) * sigmas[start:stop, None, :]
        x = np.empty((b, n, d))
        x[:, :, 0] = noise[:, :, 0]
        for i in range(d - 1):
            x[:, :, i + 1] = w[start:stop, i, None] * x[:, :, i] + noise[:, :, i + 1]
        if regime == "standardized":
            x = (x - x.mean(axis=1, keepdims=True)) / x.std(axis=1, keepdims=True)
        mean = x.mean(axis=1)
        var[start:stop] = x.var(axis=1)
        for i in range(d - 1):
            cov[start:stop, i] = (x[:, :, i] * x[:, :, i + 1]).mean(axis=1) - mean[:, i] * mean[:, i + 1]
    return var, cov


def chain_accuracy_study(
    d: int,
    weight_law: WeightLaw,
    reps: int,
    regime: str,
    rule: str = "coefficients",
    mode: str = "population",
    n: int | None = None,
    sigma_law: SigmaLaw = DEFAULT_CHAIN_SIGMAS,
    noise_kind: str = "gaussian",
    seed: int = 0,
) -> ChainStudyResult:
    """Orientation accuracy over ``reps`` chains, balanced forward/backward.

    Population mode evaluates the rule on exact covariances; finite mode
    simulates ``n`` observations per instance. Ties fall to a seeded fair
    coin and are reported separately.
    """
    if reps < 1:
        raise ConfigurationError("need reps >= 1")
    if regime not in REGIMES:
        raise ConfigurationError(f"unknown regime {regime!r}")
    if rule not in RULES:
        raise ConfigurationError(f"unknown rule {rule!r}")
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}")
    if mode == "finite" and (n is None or n < 2):
        raise ConfigurationError("finite mode needs a sample size n >= 2")
    if mode == "population":
        n = None

    weights = weight_law.sample((reps, d - 1), substream(seed, "chainexp", "weights"))
    sigmas = sigma_law.sample((reps, d), substream(seed, "chainexp", "sigmas"))
    if mode == "population":
        var, cov = _population_adjacent(weights, sigmas, regime)
    else:
        var, cov = _finite_adjacent(
            weights, sigmas, regime, n, noise_kind, substream(seed, "chainexp", "sim")
        )

    forward = np.arange(reps) % 2 == 0  # balanced presentation
    if rule == "coefficients":
        lr = np.abs(cov) / var[:, :-1]
        rl = (np.abs(cov) / var[:, 1:])[:, ::-1]
        inc_lr, inc_rl = _increasingness_rows(lr), _increasingness_rows(rl)
        # A backward presentation swaps the two sweep directions.
        inc_first = np.where(forward, inc_lr, inc_rl)
        inc_second = np.where(forward, inc_rl, inc_lr)
        decision = np.sign(inc_first - inc_second)  # +1 forward, -1 backward, 0 tie
    else:
        inc_var = _increasingness_rows(var, tol=VARIANCE_TIE_TOL)
        decision = np.sign(np.where(forward, inc_var, -inc_var))

    ties = decision == 0
    coin = substream(seed, "chainexp", "coin").random(reps) < 0.5
    decision = np.where(ties, np.where(coin, 1, -1), decision)
    truth = np.where(forward, 1, -1)
    return ChainStudyResult(
        accuracy=float(np.mean(decision == truth)),
        tie_fraction=float(np.mean(ties)),
        d=d,
        regime=regime,
        rule=rule,
        mode=mode,
        reps=reps,
        n=n,
        weight_law=weight_law.label,
        sigma_law=sigma_law.label,
        noise_kind=noise_kind,
        seed=seed,
    )
