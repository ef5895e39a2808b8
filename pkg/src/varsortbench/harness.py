"""Experiment orchestration: configuration, the benchmark matrix, and I/O.

A benchmark run crosses graph settings, noise settings, and repetitions;
each instance is simulated once and every learner sees the same sample in
both scale regimes. All per-instance seeds derive from
(master seed, setting index, repetition) only, so adding a learner never
changes the generated data. Reruns with the same config and master seed
produce byte-identical ``records.csv``; wall-clock timings therefore live
only in ``records.json``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import contlearn, learners
from .errors import ConfigurationError, MecSizeError, ParseError, UndefinedMetricError
from .graphs import Dag, GraphSpec, dag_to_cpdag, read_edge_list, sample_er_dag, sample_sf_dag
from .metrics import favorable_threshold_shd, shd, shd_cpdag, sid, sid_cpdag_bounds
from .rng import spawn_seed, substream
from .scm import (
    Dataset,
    NoiseSpec,
    SigmaLaw,
    WeightLaw,
    WeightedDag,
    sample_linear_scm,
    simulate,
    standardize,
)
from .varsort import empirical_variances, varsortability

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "LEARNER_NAMES",
    "run_benchmark",
    "write_records",
    "load_dataset_csv",
    "bootstrap",
    "realdata_study",
]

SCHEMA_VERSION = 1

REGIMES = ("raw", "standardized")

# Noise settings: token -> (distribution kind, default sigma law).
NOISE_SETTINGS = {
    "gaussian-ev": ("gaussian", SigmaLaw.fixed(1.0)),
    "gaussian-nv": ("gaussian", SigmaLaw.uniform(0.5, 2.0)),
    "exponential": ("exponential", SigmaLaw.uniform(0.5, 2.0)),
    "gumbel": ("gumbel", SigmaLaw.uniform(0.5, 2.0)),
}

# Learner name -> whether the raw output needs edge thresholding.
LEARNER_NAMES = {
    "sortnregress": False,
    "randomregress": False,
    "varsort-full": False,
    "mse-gds": False,
    "empty": False,
    "notears": True,
    "golem-ev": True,
    "golem-nv": True,
}


def worker_count() -> int:
    value = os.environ.get("VSB_THREADS", "1")
    try:
        count = int(value)
    except ValueError:
        raise ConfigurationError(f"VSB_THREADS must be an integer, got {value!r}") from None
    return max(1, count)


@dataclass(frozen=True)
class LearnerConfig:
    name: str
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in LEARNER_NAMES:
            raise ConfigurationError(
                f"unknown learner {self.name!r}; available: {sorted(LEARNER_NAMES)}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    graphs: tuple[GraphSpec, ...]
    noise: tuple[str, ...]
    learners: tuple[LearnerConfig, ...]
    weight_law: WeightLaw = WeightLaw.symmetric(0.5, 2.0)
    sigma_law: SigmaLaw | None = None
    n: int = 1000
    repetitions: int = 10
    regimes: tuple[str, ...] = REGIMES
    omegas: tuple[float, ...] = (0.3,)
    favorable: bool = False
    mec_metrics: bool = False
    mec_cap: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not self.graphs or not self.noise or not self.learners:
            raise ConfigurationError("need at least one graph, noise setting, and learner")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be at least 1")
        if self.n < 2:
            raise ConfigurationError("need n >= 2 observations")
        for token in self.noise:
            if token not in NOISE_SETTINGS:
                raise ConfigurationError(f"unknown noise setting {token!r}")
        for regime in self.regimes:
            if regime not in REGIMES:
                raise ConfigurationError(f"unknown scale regime {regime!r}")
        if not self.omegas:
            raise ConfigurationError("need at least one threshold")
        if self.mec_metrics and any(spec.d > 10 for spec in self.graphs):
            raise ConfigurationError("equivalence-class metrics are limited to graphs with d <= 10")

    def noise_law(self, token: str) -> NoiseSpec:
        kind, default_law = NOISE_SETTINGS[token]
        law = default_law
        if self.sigma_law is not None and token != "gaussian-ev":
            law = self.sigma_law
        return NoiseSpec(kind, None, law)

    @property
    def settings(self) -> list[tuple[GraphSpec, str]]:
        return [(g, t) for g in self.graphs for t in self.noise]

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "graphs": [{"model": g.model, "d": g.d, "k": g.k} for g in self.graphs],
            "noise": list(self.noise),
            "learners": [{"name": l.name, "settings": dict(l.settings)} for l in self.learners],
            "weights": [list(iv) for iv in self.weight_law.intervals],
            "sigmas": None
            if self.sigma_law is None
            else {"kind": self.sigma_law.kind, "lo": self.sigma_law.lo, "hi": self.sigma_law.hi},
            "n": self.n,
            "repetitions": self.repetitions,
            "regimes": list(self.regimes),
            "omegas": list(self.omegas),
            "favorable": self.favorable,
            "mec_metrics": self.mec_metrics,
            "mec_cap": self.mec_cap,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        sigma_law = None
        if obj.get("sigmas"):
            s = obj["sigmas"]
            sigma_law = SigmaLaw(s["kind"], s["lo"], s["hi"])
        return cls(
            graphs=tuple(GraphSpec(g["model"], int(g["d"]), int(g["k"])) for g in obj["graphs"]),
            noise=tuple(obj["noise"]),
            learners=tuple(
                LearnerConfig(l["name"], dict(l.get("settings", {}))) for l in obj["learners"]
            ),
            weight_law=WeightLaw(tuple(tuple(iv) for iv in obj.get("weights", [[-2, -0.5], [0.5, 2]]))),
            sigma_law=sigma_law,
            n=int(obj.get("n", 1000)),
            repetitions=int(obj.get("repetitions", 10)),
            regimes=tuple(obj.get("regimes", REGIMES)),
            omegas=tuple(float(o) for o in obj.get("omegas", (0.3,))),
            favorable=bool(obj.get("favorable", False)),
            mec_metrics=bool(obj.get("mec_metrics", False)),
            mec_cap=int(obj.get("mec_cap", 10_000)),
            seed=int(obj.get("seed", 0)),
        )

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def metric_keys(self) -> list[str]:
        keys = []
        for omega in self.omegas:
            keys += [f"shd_w{omega:g}", f"sid_w{omega:g}"]
        if self.favorable:
            keys += ["shd_favorable", "omega_favorable"]
        if self.mec_metrics:
            keys += ["shd_cpdag", "sid_mec_lower", "sid_mec_upper"]
        keys += ["sid_normalizer", "true_edges"]
        return keys


@dataclass
class RunRecord:
    """One learner evaluation on one simulated (or bootstrapped) instance."""

    setting: str
    graph_model: str
    d: int
    k: int
    noise: str
    repetition: int
    learner: str
    regime: str
    varsortability: float | None
    data_seed: int
    learner_seed: int
    metrics: dict
    error: str | None
    wall_seconds: float
    config_hash: str

    def row(self, metric_keys: list[str]) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "setting": self.setting,
            "graph_model": self.graph_model,
            "d": self.d,
            "k": self.k,
            "noise": self.noise,
            "repetition": self.repetition,
            "learner": self.learner,
            "regime": self.regime,
            "varsortability": _fmt(self.varsortability),
            "data_seed": self.data_seed,
            "learner_seed": self.learner_seed,
            "error": self.error or "",
            "config_hash": self.config_hash,
        }
        for key in metric_keys:
            out[key] = _fmt(self.metrics.get(key))
        return out


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def run_learner(name: str, data: Dataset, settings: dict, seed: int) -> WeightedDag:
    """Dispatch to a learner by registry name; returns raw weights."""
    if name == "sortnregress":
        cfg = learners.ParentSearchConfig(**settings) if settings else learners.DEFAULT_PARENT_SEARCH
        return learners.sortnregress(data, cfg)
    if name == "randomregress":
        cfg = learners.ParentSearchConfig(**settings) if settings else learners.DEFAULT_PARENT_SEARCH
        return learners.randomregress(data, cfg, seed=seed)
    if name == "varsort-full":
        dag = learners.variance_sort_full(data)
        return WeightedDag(dag.adj.astype(float))
    if name == "mse-gds":
        return learners.mse_gds(data, **settings)
    if name == "empty":
        return WeightedDag(np.zeros((data.d, data.d)))
    if name == "notears":
        base = contlearn.OptimizerSettings.constrained_defaults()
        opt = contlearn.OptimizerSettings(**{**_settings_dict(base), **settings})
        west, _ = contlearn.notears_fit(data, opt)
        return west
    if name in ("golem-ev", "golem-nv"):
        variant = name.split("-")[1]
        base = contlearn.OptimizerSettings.penalized_defaults(variant)
        opt = contlearn.OptimizerSettings(**{**_settings_dict(base), **settings})
        west, _ = contlearn.golem_fit(data, variant, opt)
        return west
    raise ConfigurationError(f"unknown learner {name!r}")


def _settings_dict(opt: contlearn.OptimizerSettings) -> dict:
    return asdict(opt)


def _score_estimate(cfg: ExperimentConfig, g_true: Dag, west: WeightedDag, continuous: bool) -> dict:
    out = {}
    d = g_true.d
    primary_dag = None
    for idx, omega in enumerate(cfg.omegas):
        effective = omega if continuous else 0.0
        est = contlearn.threshold_and_break_cycles(west, effective)
        if idx == 0:
            primary_dag = est
        out[f"shd_w{omega:g}"] = shd(g_true, est)
        out[f"sid_w{omega:g}"] = sid(g_true, est)
    if cfg.favorable:
        omega_fav, shd_fav = favorable_threshold_shd(west, g_true)
        out["shd_favorable"] = shd_fav
        out["omega_favorable"] = omega_fav
    if cfg.mec_metrics:
        c_true = dag_to_cpdag(g_true)
        c_est = dag_to_cpdag(primary_dag)
        out["shd_cpdag"] = shd_cpdag(c_true, c_est)
        try:
            lower, upper = sid_cpdag_bounds(g_true, c_est, cap=cfg.mec_cap)
            out["sid_mec_lower"] = lower
            out["sid_mec_upper"] = upper
        except MecSizeError:
            out["sid_mec_lower"] = None
            out["sid_mec_upper"] = None
    out["sid_normalizer"] = d * (d - 1)
    out["true_edges"] = g_true.n_edges
    return out


def _run_instance(cfg: ExperimentConfig, si: int, rep: int) -> tuple[list[RunRecord], dict]:
    spec, token = cfg.settings[si]
    sampler = sample_er_dag if spec.model == "ER" else sample_sf_dag
    g = sampler(spec, spawn_seed(cfg.seed, "bench", "graph", si, rep))
    m = sample_linear_scm(
        g, cfg.weight_law, cfg.noise_law(token), spawn_seed(cfg.seed, "bench", "scm", si, rep)
    )
    data_seed = spawn_seed(cfg.seed, "bench", "data", si, rep)
    data = simulate(m, cfg.n, data_seed)
    try:
        v = varsortability(g, empirical_variances(data)).v
    except UndefinedMetricError:
        v = None
    datasets = {"raw": data}
    if "standardized" in cfg.regimes:
        datasets["standardized"] = standardize(data)

    chash = cfg.config_hash()
    setting = f"{spec.label}/{token}"
    records = []
    estimates = {}
    for learner in cfg.learners:
        learner_seed = spawn_seed(cfg.seed, "bench", "learner", si, rep, learner.name)
        for regime in cfg.regimes:
            start = time.perf_counter()
            error = None
            metrics: dict = {}
            try:
                west = run_learner(learner.name, datasets[regime], learner.settings, learner_seed)
                metrics = _score_estimate(cfg, g, west, LEARNER_NAMES[learner.name])
                estimates[(si, rep, learner.name, regime)] = west
            except Exception as err:  # record the failure, keep the run going
                error = f"{type(err).__name__}: {err}"
            records.append(
                RunRecord(
                    setting=setting,
                    graph_model=spec.model,
                    d=spec.d,
                    k=spec.k,
                    noise=token,
                    repetition=rep,
                    learner=learner.name,
                    regime=regime,
                    varsortability=v,
                    data_seed=data_seed,
                    learner_seed=learner_seed,
                    metrics=metrics,
                    error=error,
                    wall_seconds=time.perf_counter() - start,
                    config_hash=chash,
                )
            )
    return records, estimates


def run_benchmark(cfg: ExperimentConfig, out_dir=None) -> list[RunRecord]:
    """Run the full matrix; optionally persist records and raw estimates.

    Jobs are independent per (setting, repetition) and may run on a worker
    pool (``VSB_THREADS``); records are gathered in deterministic
    (setting, repetition, learner, regime) order regardless of completion
    order.
    """
    jobs = [(si, rep) for si in range(len(cfg.settings)) for rep in range(cfg.repetitions)]
    workers = worker_count()
    results = {}
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for job, outcome in zip(jobs, pool.map(_run_instance_star, [(cfg, *j) for j in jobs])):
                results[job] = outcome
    else:
        for job in jobs:
            results[job] = _run_instance(cfg, *job)

    records: list[RunRecord] = []
    estimates: dict = {}
    for job in jobs:
        recs, ests = results[job]
        records.extend(recs)
        estimates.update(ests)

    if out_dir is not None:
        write_records(cfg, records, out_dir, estimates=estimates)
    return records


def _run_instance_star(args):
    return _run_instance(*args)


def write_records(cfg: ExperimentConfig, records: list[RunRecord], out_dir, estimates=None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    metric_keys = cfg.metric_keys()
    fieldnames = list(records[0].row(metric_keys).keys()) if records else []
    with open(os.path.join(out_dir, "records.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.row(metric_keys))
    payload = {
        "config": cfg.to_json(),
        "config_hash": cfg.config_hash(),
        "records": [
            {**rec.row(metric_keys), "wall_seconds": rec.wall_seconds} for rec in records
        ],
    }
    with open(os.path.join(out_dir, "records.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg.to_json(), fh, indent=2)
        fh.write("\n")
    if estimates:
        est_dir = os.path.join(out_dir, "estimates")
        os.makedirs(est_dir, exist_ok=True)
        for (si, rep, name, regime), west in estimates.items():
            path = os.path.join(est_dir, f"s{si:03d}_r{rep:03d}_{name}_{regime}.json")
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(weighted_to_json(west), fh)
                fh.write("\n")


def weighted_to_json(west: WeightedDag) -> dict:
    return {
        "d": west.d,
        "edges": [
            [int(i), int(j), float(west.w[i, j])] for i, j in zip(*np.nonzero(west.w))
        ],
    }


def weighted_from_json(obj: dict) -> WeightedDag:
    d = int(obj["d"])
    w = np.zeros((d, d))
    for i, j, value in obj["edges"]:
        w[int(i), int(j)] = float(value)
    return WeightedDag(w)


# ---------------------------------------------------------------------------
# Dataset ingestion and the bootstrap study on observational data
# ---------------------------------------------------------------------------


def load_dataset_csv(path) -> Dataset:
    """Read a dataset CSV: header row of names, one sample per row."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        names = [h.strip() for h in header]
        if not names or any(not n for n in names):
            raise ParseError("missing column name in header", line=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(names):
                raise ParseError(
                    f"expected {len(names)} cells, got {len(row)}", line=lineno
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise ParseError("non-numeric cell", line=lineno) from None
    if not rows:
        raise ParseError("no data rows after the header", line=2)
    return Dataset(np.asarray(rows, dtype=float), tuple(names))


def bootstrap(data: Dataset, seed: int) -> Dataset:
    """Resample ``n`` rows with replacement, deterministically per seed."""
    rows = substream(seed, "harness", "bootstrap").integers(0, data.n, size=data.n)
    return Dataset(data.x[rows], data.names)


def realdata_study(data_path, truth_path, cfg: ExperimentConfig, out_dir=None) -> list[RunRecord]:
    """Bootstrap evaluation against a user-supplied ground-truth edge list.

    Per repetition: draw a bootstrap sample, measure its variance
    sortedness against the truth, run every configured learner on the raw
    and standardized copies, and score an empty-graph baseline row.
    """
    data = load_dataset_csv(data_path)
    try:
        truth = read_edge_list(truth_path, d=data.d)
    except ParseError as err:
        raise ConfigurationError(
            f"ground truth does not match the dataset's {data.d} columns: {err}"
        ) from err
    if truth.n_edges == 0:
        raise ConfigurationError("ground truth has no edges")

    learner_list = list(cfg.learners)
    if all(l.name != "empty" for l in learner_list):
        learner_list.append(LearnerConfig("empty"))
    chash = cfg.config_hash()
    records = []
    estimates = {}
    for rep in range(cfg.repetitions):
        data_seed = spawn_seed(cfg.seed, "realdata", "bootstrap", rep)
        sample = bootstrap(data, data_seed)
        v = varsortability(truth, empirical_variances(sample)).v
        datasets = {"raw": sample}
        if "standardized" in cfg.regimes:
            datasets["standardized"] = standardize(sample)
        for learner in learner_list:
            learner_seed = spawn_seed(cfg.seed, "realdata", "learner", rep, learner.name)
            for regime in cfg.regimes:
                start = time.perf_counter()
                error = None
                metrics: dict = {}
                try:
                    west = run_learner(learner.name, datasets[regime], learner.settings, learner_seed)
                    metrics = _score_estimate(cfg, truth, west, LEARNER_NAMES[learner.name])
                    estimates[(0, rep, learner.name, regime)] = west
                except Exception as err:
                    error = f"{type(err).__name__}: {err}"
                records.append(
                    RunRecord(
                        setting="realdata",
                        graph_model="real",
                        d=data.d,
                        k=0,
                        noise="observational",
                        repetition=rep,
                        learner=learner.name,
                        regime=regime,
                        varsortability=v,
                        data_seed=data_seed,
                        learner_seed=learner_seed,
                        metrics=metrics,
                        error=error,
                        wall_seconds=time.perf_counter() - start,
                        config_hash=chash,
                    )
                )
    if out_dir is not None:
        write_records(cfg, records, out_dir, estimates=estimates)
    return records
