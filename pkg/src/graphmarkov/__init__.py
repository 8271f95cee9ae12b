"""Forecasting network-wide state sequences with missing data.

The package models each next network state as a damped sum of graph-localized
linear maps applied to recent history, with unobserved readings routed around
via their observation masks. Two parameterizations are provided: dense
per-hop weights masked to the graph's reachability structure, and a spectral
variant that learns per-frequency gains in the graph Laplacian eigenbasis.
"""

import os as _os

# GRAPHMARKOV_THREADS caps BLAS parallelism. The standard thread-count
# variables are only read when the linear-algebra backend first loads, so
# this translation has to happen before numpy is imported below. Variables
# the user already set explicitly are left alone.
_threads = _os.environ.get("GRAPHMARKOV_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)

from .data import (
    DatasetBundle,
    NormStats,
    Sample,
    SplitSpec,
    StateSeries,
    denormalize,
    ingest_csv,
    inject_missing,
    normalize,
    observed_stats,
    prepare_datasets,
    split,
    window,
    write_speed_csv,
)
from .graph import (
    Graph,
    HopMaskSet,
    SpectralBasis,
    build_graph,
    hop_masks,
    normalized_laplacian,
    read_adjacency_csv,
    spectral_basis,
    write_adjacency_csv,
)
from .simulate import TransitionSpec, random_transition, simulate_gmp

__version__ = "0.1.0"

__all__ = [
    "DatasetBundle",
    "Graph",
    "HopMaskSet",
    "NormStats",
    "Sample",
    "SpectralBasis",
    "SplitSpec",
    "StateSeries",
    "TransitionSpec",
    "build_graph",
    "denormalize",
    "hop_masks",
    "ingest_csv",
    "inject_missing",
    "normalize",
    "normalized_laplacian",
    "observed_stats",
    "prepare_datasets",
    "random_transition",
    "read_adjacency_csv",
    "simulate_gmp",
    "split",
    "spectral_basis",
    "window",
    "write_adjacency_csv",
    "write_speed_csv",
]
