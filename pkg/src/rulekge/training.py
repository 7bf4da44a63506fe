"""Joint training over triples and ground rules.

The training set mixes plain triples with ground rules of the three forms;
each sample activates exactly one score family in the margin hinge.  Epochs
are single-negative SGD passes; after every epoch entity and relation
vectors are projected back into the unit ball, hyperplane normals onto the
unit sphere, and concept matrices into the Frobenius ball of radius
sqrt(dim).

Training runs in two phases: first over triples plus inference and
transitivity grounds, then (from the phase-1 parameters, optionally at a
different learning rate) over the full set including antisymmetry grounds.
Without rules both phases reduce to plain translation-model training.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import engine, models
from .encoding import (
    NegativePool,
    build_pool,
    decode_sample,
    draw_negative_row,
    encode_ground_rules,
    encode_triples,
)
from .kg import KnowledgeGraph, Triple
from .mining import GroundRule, Rule, RuleType
from .models import ModelKind, ModelParams, Norm
from .rng import STREAM_INIT, STREAM_TRAIN, SplitMix64, derive_seed


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    dim: int = 50
    margin: float = 2.0
    lr: float = 0.01
    lr2: float | None = None  # phase-2 rate; defaults to lr
    norm: Norm = Norm.L1
    epochs: int = 1000
    epochs2: int = 1000
    batch_size: int = 1
    seed: int = 0
    kind: ModelKind = ModelKind.TRANSE
    sampling: str = "unif"
    threads: int = 1
    backend: str | None = None

    def validate(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.margin <= 0:
            raise ValueError(f"margin must be > 0, got {self.margin}")
        if self.lr <= 0 or (self.lr2 is not None and self.lr2 <= 0):
            raise ValueError("learning rates must be > 0")
        if self.epochs < 0 or self.epochs2 < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.sampling != "unif":
            raise ValueError(f"only 'unif' negative sampling is supported, got {self.sampling!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def phase2_lr(self) -> float:
        return self.lr if self.lr2 is None else self.lr2


@dataclass(frozen=True)
class TrainingSample:
    """One unit of the joint training set: a triple or a ground rule."""

    payload: Triple | GroundRule

    @property
    def kind(self) -> str:
        if isinstance(self.payload, GroundRule):
            return self.payload.rule_type.value
        return "triple"


def make_training_set(
    graph: KnowledgeGraph, ground_rules: Sequence[GroundRule]
) -> list[TrainingSample]:
    """Concatenate the graph's triples with the ground rules, each tagged by
    the score family it activates."""
    samples = [TrainingSample(t) for t in sorted(graph.triples)]
    samples.extend(TrainingSample(g) for g in ground_rules)
    return samples


def sample_negative(
    sample: TrainingSample, pool: NegativePool, rng: SplitMix64,
    concept_labels: Sequence[str] = (),
) -> TrainingSample:
    """Corrupt one side of the sample; see ``encoding.draw_negative_row``."""
    labels = list(concept_labels)
    payload = sample.payload
    if isinstance(payload, GroundRule) and payload.rule_type is RuleType.INFERENCE:
        concept = payload.concept if payload.concept is not None else "?"
        if concept not in labels:
            labels.append(concept)
    rows = _encode_payloads([payload], pool, labels)
    corrupted = draw_negative_row(rows[0], pool, rng)
    return TrainingSample(decode_sample(corrupted, labels))


def hinge_term(
    params: ModelParams,
    positive: TrainingSample,
    negative: TrainingSample,
    margin: float,
    norm: Norm,
) -> float:
    """[margin + s(positive) - s(negative)]_+ under the samples' score family."""
    if positive.kind != negative.kind:
        raise ValueError(
            f"sample kind mismatch: positive is {positive.kind}, negative is {negative.kind}"
        )
    s_pos = models.score_sample(params, positive.payload, norm)
    s_neg = models.score_sample(params, negative.payload, norm)
    return max(0.0, margin + s_pos - s_neg)


def _encode_payloads(
    payloads: Sequence[Triple | GroundRule], pool: NegativePool,
    concept_labels: Sequence[str],
) -> np.ndarray:
    triples = [p for p in payloads if not isinstance(p, GroundRule)]
    grounds = [p for p in payloads if isinstance(p, GroundRule)]
    concept_idx = {lab: i for i, lab in enumerate(concept_labels)}
    rows = [encode_triples(triples)] if triples else []
    if grounds:
        rows.append(encode_ground_rules(grounds, pool.rule_ids, concept_idx))
    if not rows:
        return np.empty((0, 9), dtype=np.int64)
    return np.concatenate(rows)


def project_norms(params: ModelParams) -> ModelParams:
    """Clamp entity/relation vectors into the unit ball, re-normalize
    hyperplane normals, clamp concept matrices to Frobenius norm sqrt(dim).

    A rescaled vector can land an ulp outside its ball, so rows already
    within 1e-14 of the boundary are left alone; that keeps the projection
    bit-idempotent while holding every constraint far inside the 1e-12
    tolerance the trainer guarantees.  Mutates and returns ``params``.
    """
    slack = 1e-14
    for table in (params.entity_vecs, params.relation_vecs):
        norms = np.sqrt((table * table).sum(axis=1))
        over = norms > 1.0 + slack
        if over.any():
            table[over] /= norms[over, None]
    if params.normals is not None:
        norms = np.sqrt((params.normals * params.normals).sum(axis=1))
        off = np.abs(norms - 1.0) > slack
        if off.any():
            params.normals[off] /= norms[off, None]
    if params.concept_mats is not None and params.concept_mats.shape[0]:
        limit = np.sqrt(params.dim)
        fro = np.sqrt((params.concept_mats * params.concept_mats).sum(axis=(1, 2)))
        over = fro > limit + slack
        if over.any():
            params.concept_mats[over] *= (limit / fro[over])[:, None, None]
    return params


def sgd_epoch(
    params: ModelParams,
    samples: np.ndarray,
    config: TrainConfig,
    pool: NegativePool,
    rng: SplitMix64,
    lr: float | None = None,
) -> float:
    """One shuffled pass with per-sample negative draws, then norm projection.

    ``samples`` is the encoded (n, 9) matrix.  Returns the mean hinge;
    raises :class:`TrainingDiverged` when it turns non-finite.
    """
    loss = engine.run_epoch(
        params,
        samples,
        pool,
        config.margin,
        config.lr if lr is None else lr,
        config.norm,
        rng,
        backend=config.backend,
        threads=config.threads,
        batch_size=config.batch_size,
    )
    project_norms(params)
    if not np.isfinite(loss):
        raise TrainingDiverged(
            f"mean epoch loss is {loss}; the learning rate is likely too high"
        )
    return loss


@dataclass
class EpochLog:
    epoch: int
    phase: int
    mean_loss: float
    seconds: float


@dataclass
class TrainResult:
    params: ModelParams
    log: list[EpochLog] = field(default_factory=list)


def encode_training_set(
    samples: Sequence[TrainingSample], pool: NegativePool, params: ModelParams
) -> np.ndarray:
    """Encode samples for the engine, allocating concept matrices up front so
    scoring never mutates parameters mid-epoch."""
    for s in samples:
        payload = s.payload
        if isinstance(payload, GroundRule) and payload.rule_type is RuleType.INFERENCE:
            params.concept_id(payload.concept if payload.concept is not None else "?")
    return _encode_payloads([s.payload for s in samples], pool, params.concept_labels)


def train(
    graph: KnowledgeGraph,
    ground_rules: Sequence[GroundRule],
    rules: Sequence[Rule],
    config: TrainConfig,
    params: ModelParams | None = None,
    epoch_callback: Callable[[EpochLog, ModelParams], None] | None = None,
) -> TrainResult:
    """Two-phase joint training.

    Phase 1 runs ``config.epochs`` epochs over triples plus inference and
    transitivity grounds at ``config.lr``; phase 2 continues for
    ``config.epochs2`` epochs over everything including antisymmetry
    grounds at the phase-2 rate.  With no ground rules this is plain
    translation-model training (phase 2 repeats over the same set).
    """
    config.validate()
    if params is None:
        params = models.init_params(
            graph, config.dim, config.kind, derive_seed(config.seed, STREAM_INIT)
        )
    pool = build_pool(
        sorted(graph.triples), ground_rules, rules, graph.n_entities, graph.n_relations
    )
    phase1 = [
        g for g in ground_rules if g.rule_type is not RuleType.ANTISYMMETRY
    ]
    set1 = encode_training_set(make_training_set(graph, phase1), pool, params)
    set2 = encode_training_set(make_training_set(graph, ground_rules), pool, params)

    rng = SplitMix64(derive_seed(config.seed, STREAM_TRAIN))
    result = TrainResult(params)
    epoch_no = 0
    for phase, (samples, n_epochs, lr) in enumerate(
        [(set1, config.epochs, config.lr), (set2, config.epochs2, config.phase2_lr)],
        start=1,
    ):
        for _ in range(n_epochs):
            epoch_no += 1
            started = time.perf_counter()
            loss = sgd_epoch(params, samples, config, pool, rng, lr=lr)
            entry = EpochLog(epoch_no, phase, loss, time.perf_counter() - started)
            result.log.append(entry)
            if epoch_callback is not None:
                epoch_callback(entry, params)
    return result


def inferred_triples(rules: Sequence[Rule], graph: KnowledgeGraph) -> set[Triple]:
    """Triples generated by the selected rules that the graph lacks; used to
    augment the training set when rules are applied as data rather than
    jointly."""
    from .mining import RuleCandidate, get_new_triples

    out: set[Triple] = set()
    for rule in rules:
        cand = RuleCandidate(rule.rule_type, rule.relations, support=0)
        out |= get_new_triples(cand, graph)
    return out - set(graph.triples)
