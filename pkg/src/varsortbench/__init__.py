"""Benchmarks and diagnostics for causal structure learning on linear
additive noise models.

The package simulates benchmark data, measures how strongly the marginal
variance order agrees with the causal order, runs scale-sensitive and
scale-invariant learners on raw and standardized copies of the same
samples, and scores the estimates at DAG and equivalence-class level.
"""

from .graphs import Cpdag, Dag, GraphSpec
from .scm import Dataset, LinearScm, NoiseSpec, SigmaLaw, WeightLaw, WeightedDag
from .varsort import VarsortReport, varsortability

__all__ = [
    "Cpdag",
    "Dag",
    "Dataset",
    "GraphSpec",
    "LinearScm",
    "NoiseSpec",
    "SigmaLaw",
    "VarsortReport",
    "WeightLaw",
    "WeightedDag",
    "varsortability",
]

__version__ = "0.1.0"
