"""Backend selection for the training inner loop.

The compiled kernel (``rulekge._speedups``, built from Cython) is used when
importable; otherwise the pure-Python implementation takes over.  Override
with the ``RULEKGE_BACKEND`` environment variable or an explicit ``backend=``
argument ('compiled' | 'python' | 'auto').

Both backends consume identical integer RNG streams, so they corrupt the
same samples with the same entities; floating-point trajectories agree to
rounding, and runs are bit-reproducible within a fixed backend.
"""

from __future__ import annotations

import os

import numpy as np

from . import _engine_py
from .encoding import NegativePool
from .models import ModelKind, ModelParams, Norm
from .rng import SplitMix64

try:
    from . import _speedups
except ImportError:  # pragma: no cover - build-dependent
    _speedups = None

_MODEL_CODE = {ModelKind.TRANSE: 0, ModelKind.TRANSH: 1, ModelKind.TRANSR: 2}
_NORM_CODE = {Norm.L1: 0, Norm.L2: 1}

_EMPTY_KEYS = np.empty(0, dtype=np.int64)


def compiled_available() -> bool:
    return _speedups is not None


def resolve_backend(name: str | None = None) -> str:
    """'compiled' or 'python' after applying the env override and fallback."""
    choice = name or os.environ.get("RULEKGE_BACKEND", "auto")
    if choice == "auto":
        return "compiled" if compiled_available() else "python"
    if choice == "compiled":
        if not compiled_available():
            raise RuntimeError(
                "compiled backend requested but rulekge._speedups is not built"
            )
        return "compiled"
    if choice == "python":
        return "python"
    raise ValueError(f"unknown backend {choice!r} (use compiled|python|auto)")


_ENTITY_COLS = {0: (2, 4), 1: (2, 4), 2: (2, 4, 6), 3: (2, 4)}
_RELATION_COLS = {0: (3,), 1: (3, 5), 2: (3, 5, 7), 3: (3, 5)}


def _check_samples(params: ModelParams, samples: np.ndarray, pool) -> None:
    """Reject rows the kernels would index out of bounds."""
    if samples.ndim != 2 or samples.shape[1] != 9:
        raise ValueError(f"samples must be (n, 9) int64, got shape {samples.shape}")
    kinds = samples[:, 0]
    if len(kinds) and (kinds.min() < 0 or kinds.max() > 3):
        raise ValueError("sample kind column outside 0..3")
    for kind in np.unique(kinds):
        rows = samples[kinds == kind]
        for col in _ENTITY_COLS[int(kind)]:
            ids = rows[:, col]
            if ids.min() < 0 or ids.max() >= params.n_entities:
                raise ValueError(f"entity id out of range in sample column {col}")
        for col in _RELATION_COLS[int(kind)]:
            ids = rows[:, col]
            if ids.min() < 0 or ids.max() >= params.n_relations:
                raise ValueError(f"relation id out of range in sample column {col}")
        if kind == 1:
            cids = rows[:, 8]
            n_concepts = 0 if params.concept_mats is None else params.concept_mats.shape[0]
            if cids.min() < 0 or cids.max() >= n_concepts:
                raise ValueError(
                    "inference sample references an unallocated concept matrix"
                )


def _flat_tables(params: ModelParams):
    d = params.dim
    normals = params.normals
    if normals is None:
        normals = np.empty((0, d))
    mats = params.rel_matrices
    if mats is None:
        mats = np.empty((0, d, d))
    cmats = params.concept_mats
    if cmats is None:
        cmats = np.empty((0, d, d))
    return normals, mats, cmats


def run_epoch(
    params: ModelParams,
    samples: np.ndarray,
    pool: NegativePool,
    margin: float,
    lr: float,
    norm: Norm,
    rng: SplitMix64,
    backend: str | None = None,
    threads: int = 1,
    batch_size: int = 1,
) -> float:
    """One training pass, dispatched to the selected backend.

    Parameters and the RNG are mutated in place; returns the mean hinge.
    """
    if pool.n_entities < 2:
        raise ValueError("negative sampling requires at least 2 entities")
    _check_samples(params, samples, pool)
    which = resolve_backend(backend)
    if which == "python":
        return _engine_py.run_epoch(
            params, samples, pool, margin, lr, norm, rng,
            threads=threads, batch_size=batch_size,
        )
    if batch_size > 1:
        raise ValueError("batch_size > 1 is only supported by the python backend")
    normals, mats, cmats = _flat_tables(params)
    state = np.array([rng.state], dtype=np.uint64)
    i1, i2, i3 = pool.instance_keys[1], pool.instance_keys[2], pool.instance_keys[3]
    loss = _speedups.run_epoch(
        np.ascontiguousarray(samples, dtype=np.int64),
        params.entity_vecs,
        params.relation_vecs,
        normals,
        mats,
        cmats,
        pool.triple_keys if len(pool.triple_keys) else _EMPTY_KEYS,
        i1 if len(i1) else _EMPTY_KEYS,
        i2 if len(i2) else _EMPTY_KEYS,
        i3 if len(i3) else _EMPTY_KEYS,
        _MODEL_CODE[params.kind],
        _NORM_CODE[norm],
        margin,
        lr,
        state,
        pool.n_entities,
        pool.n_relations,
        threads,
    )
    rng.state = int(state[0])
    return loss
