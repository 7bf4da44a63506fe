"""Pure-Python training backend.

Same contract as the compiled kernel in ``_speedups``: one pass over the
encoded samples, one negative per positive, hinge-gated SGD updates applied
in place.  Consumes the identical integer RNG stream as the compiled
backend; float trajectories agree to rounding because reductions may be
ordered differently.
"""

from __future__ import annotations

import logging

import numpy as np

from . import models
from .encoding import NegativePool, decode_sample, draw_negative_row
from .models import ModelKind, ModelParams, Norm
from .rng import SplitMix64

log = logging.getLogger(__name__)

name = "python"


def run_epoch(
    params: ModelParams,
    samples: np.ndarray,
    pool: NegativePool,
    margin: float,
    lr: float,
    norm: Norm,
    rng: SplitMix64,
    threads: int = 1,
    batch_size: int = 1,
) -> float:
    """One shuffled pass; returns the mean hinge over all samples."""
    if threads > 1:
        log.warning(
            "the python backend is single-threaded; ignoring threads=%d", threads
        )
    n = samples.shape[0]
    if n == 0:
        return 0.0
    order = list(range(n))
    rng.shuffle(order)
    labels = params.concept_labels
    total = 0.0
    batch: list[dict] = []
    for pos_at, idx in enumerate(order):
        row = samples[idx]
        positive = decode_sample(row, labels)
        negative = decode_sample(draw_negative_row(row, pool, rng), labels)
        hinge, grads = models.hinge_and_gradients(params, positive, negative, margin, norm)
        total += hinge
        if grads:
            batch.append(grads)
        if len(batch) and (batch_size <= 1 or len(batch) == batch_size or pos_at == n - 1):
            _apply(params, batch, lr)
            batch = []
    return total / n


def _apply(params: ModelParams, batch: list[dict], lr: float) -> None:
    """Apply averaged gradients of a batch; batch size 1 is plain SGD."""
    scale = lr / len(batch)
    touched_normals = set()
    for grads in batch:
        for (kind, idx), g in grads.items():
            if kind == "e":
                params.entity_vecs[idx] -= scale * g
            elif kind == "r":
                params.relation_vecs[idx] -= scale * g
            elif kind == "w":
                params.normals[idx] -= scale * g
                touched_normals.add(idx)
            elif kind == "m":
                params.rel_matrices[idx] -= scale * g
            else:
                params.concept_mats[idx] -= scale * g
    if params.kind is ModelKind.TRANSH:
        # hyperplane normals stay unit-length after every update
        for idx in touched_normals:
            w = params.normals[idx]
            w /= np.sqrt((w * w).sum())
