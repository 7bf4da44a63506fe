"""Learnable parameters and score functions for translation embeddings.

Three model families share one translation residual h + r - t, differing in
how entities are projected before it is formed: identity (TransE), relation
hyperplane e - (w.e)w (TransH), or a per-relation matrix e.M (TransR).

Besides the plain triple score, three rule scores measure how well a ground
rule is satisfied in embedding space; each combines the residuals of the
rule's constituent triples with elementwise products, and the inference
score additionally passes the head entity through a learned per-concept
matrix.  All scores are dissimilarities: non-negative, lower is better.

Analytic gradients of the margin hinge over any (positive, negative) sample
pair are provided for SGD; they are validated against central finite
differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .kg import KnowledgeGraph, Triple
from .mining import GroundRule, RuleType


class ModelKind(Enum):
    TRANSE = "transe"
    TRANSH = "transh"
    TRANSR = "transr"


class Norm(Enum):
    L1 = "l1"
    L2 = "l2"


@dataclass
class ModelParams:
    """All learnable state of one model.

    Constraints maintained by training (see ``training.project_norms``):
    entity and relation vectors live in the L2 unit ball, TransH normals on
    the unit sphere, concept matrices inside the Frobenius ball of radius
    sqrt(dim).  Concept matrices are allocated lazily (identity) the first
    time a concept label is scored.
    """

    kind: ModelKind
    dim: int
    entity_vecs: np.ndarray  # (n_entities, dim)
    relation_vecs: np.ndarray  # (n_relations, dim)
    normals: np.ndarray | None = None  # (n_relations, dim), TransH only
    rel_matrices: np.ndarray | None = None  # (n_relations, dim, dim), TransR only
    concept_labels: list[str] = field(default_factory=list)
    concept_mats: np.ndarray | None = None  # (n_concepts, dim, dim)
    _concept_ids: dict[str, int] = field(default_factory=dict, repr=False)

    @property
    def n_entities(self) -> int:
        return self.entity_vecs.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_vecs.shape[0]

    @property
    def n_concepts(self) -> int:
        return len(self.concept_labels)

    def concept_id(self, label: str) -> int:
        """Dense id of ``label``, allocating an identity matrix on first use."""
        idx = self._concept_ids.get(label)
        if idx is None:
            idx = len(self.concept_labels)
            self.concept_labels.append(label)
            self._concept_ids[label] = idx
            eye = np.eye(self.dim)[None, :, :]
            if self.concept_mats is None or self.concept_mats.shape[0] == 0:
                self.concept_mats = eye.copy()
            else:
                self.concept_mats = np.concatenate([self.concept_mats, eye])
        return idx

    def copy(self) -> "ModelParams":
        return ModelParams(
            kind=self.kind,
            dim=self.dim,
            entity_vecs=self.entity_vecs.copy(),
            relation_vecs=self.relation_vecs.copy(),
            normals=None if self.normals is None else self.normals.copy(),
            rel_matrices=None if self.rel_matrices is None else self.rel_matrices.copy(),
            concept_labels=list(self.concept_labels),
            concept_mats=None if self.concept_mats is None else self.concept_mats.copy(),
            _concept_ids=dict(self._concept_ids),
        )


def _clamp_to_unit_ball(vectors: np.ndarray) -> None:
    norms = np.sqrt((vectors * vectors).sum(axis=1))
    over = norms > 1.0
    if over.any():
        vectors[over] /= norms[over, None]


def init_params_from_sizes(
    n_entities: int, n_relations: int, dim: int, kind: ModelKind, seed: int
) -> ModelParams:
    """Uniform init in [-6/sqrt(d), 6/sqrt(d)] per coordinate, entity and
    relation vectors clamped into the unit ball, TransH normals normalized
    to unit length, TransR matrices at identity.  Deterministic under seed.
    """
    if dim < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(dim)
    ent = rng.uniform(-bound, bound, size=(n_entities, dim))
    rel = rng.uniform(-bound, bound, size=(n_relations, dim))
    _clamp_to_unit_ball(ent)
    _clamp_to_unit_ball(rel)
    normals = None
    matrices = None
    if kind is ModelKind.TRANSH:
        normals = rng.uniform(-bound, bound, size=(n_relations, dim))
        normals /= np.sqrt((normals * normals).sum(axis=1))[:, None]
    elif kind is ModelKind.TRANSR:
        matrices = np.tile(np.eye(dim), (n_relations, 1, 1))
    return ModelParams(kind, dim, ent, rel, normals, matrices)


def init_params(graph: KnowledgeGraph, dim: int, kind: ModelKind, seed: int) -> ModelParams:
    return init_params_from_sizes(graph.n_entities, graph.n_relations, dim, kind, seed)


# ---------------------------------------------------------------------------
# scoring


def project_entity(params: ModelParams, entity: int, relation: int) -> np.ndarray:
    """Entity vector as seen by ``relation``: identity, hyperplane, or matrix."""
    e = params.entity_vecs[entity]
    if params.kind is ModelKind.TRANSE:
        return e.copy()
    if params.kind is ModelKind.TRANSH:
        w = params.normals[relation]
        return e - (w @ e) * w
    return e @ params.rel_matrices[relation]


def _residual(params: ModelParams, h: int, r: int, t: int) -> np.ndarray:
    return (project_entity(params, h, r) + params.relation_vecs[r]) - project_entity(
        params, t, r
    )


def norm_value(v: np.ndarray, norm: Norm) -> float:
    if norm is Norm.L1:
        return float(np.abs(v).sum())
    return float(np.sqrt((v * v).sum()))


def _norm_grad(v: np.ndarray, norm: Norm) -> np.ndarray:
    """Subgradient of the norm at v; 0 is used at non-differentiable points."""
    if norm is Norm.L1:
        return np.sign(v)
    n = np.sqrt((v * v).sum())
    if n == 0.0:
        return np.zeros_like(v)
    return v / n


def score_triple(params: ModelParams, triple: Triple, norm: Norm) -> float:
    """Dissimilarity of a fact: ||proj(h) + r - proj(t)||."""
    h, r, t = triple
    return norm_value(_residual(params, h, r, t), norm)


def _concept_matrix(params: ModelParams, concept: str | None) -> tuple[int, np.ndarray]:
    label = concept if concept is not None else "?"
    idx = params.concept_id(label)
    return idx, params.concept_mats[idx]


def score_inference_rule(params: ModelParams, ground: GroundRule, norm: Norm) -> float:
    """||(h.C) * body_residual - head_residual|| for (h,r1,t) => (h,r2,t)."""
    (h, r1, t), (_, r2, _) = ground.triples
    _, C = _concept_matrix(params, ground.concept)
    body = _residual(params, h, r1, t)
    head = _residual(params, h, r2, t)
    gate = params.entity_vecs[h] @ C
    return norm_value(gate * body - head, norm)


def score_transitivity_rule(params: ModelParams, ground: GroundRule, norm: Norm) -> float:
    """||first_residual * second_residual - closing_residual|| for a chain."""
    (e1, r1, e2), (_, r2, e3), (_, r3, _) = ground.triples
    first = _residual(params, e1, r1, e2)
    second = _residual(params, e2, r2, e3)
    closing = _residual(params, e1, r3, e3)
    return norm_value(first * second - closing, norm)


def score_antisymmetry_rule(params: ModelParams, ground: GroundRule, norm: Norm) -> float:
    """||d * d|| where d is the gap between the forward residual of (h,r1,t)
    and the backward residual of (t,r2,h); zero exactly when they agree.

    The elementwise square absorbs the sign either way, so this positive
    form is computed directly.
    """
    (h, r1, t), (_, r2, _) = ground.triples
    forward = _residual(params, h, r1, t)
    backward = _residual(params, t, r2, h)
    d = forward - backward
    return norm_value(d * d, norm)


_RULE_SCORERS = {
    RuleType.INFERENCE: score_inference_rule,
    RuleType.TRANSITIVITY: score_transitivity_rule,
    RuleType.ANTISYMMETRY: score_antisymmetry_rule,
}


def score_ground_rule(params: ModelParams, ground: GroundRule, norm: Norm) -> float:
    return _RULE_SCORERS[ground.rule_type](params, ground, norm)


def score_sample(params: ModelParams, sample, norm: Norm) -> float:
    """Score a Triple or a GroundRule with its own score family."""
    if isinstance(sample, GroundRule):
        return score_ground_rule(params, sample, norm)
    return score_triple(params, Triple(*sample), norm)


# ---------------------------------------------------------------------------
# gradients

# Gradient dict keys: ("e", entity), ("r", relation), ("w", relation),
# ("m", relation), ("c", concept_index).


class _Acc:
    __slots__ = ("grads",)

    def __init__(self):
        self.grads: dict[tuple[str, int], np.ndarray] = {}

    def add(self, key: tuple[str, int], value: np.ndarray) -> None:
        slot = self.grads.get(key)
        if slot is None:
            self.grads[key] = value.copy()
        else:
            slot += value


def _backprop_projection(
    params: ModelParams, acc: _Acc, entity: int, relation: int, g: np.ndarray
) -> None:
    """Push a gradient w.r.t. the projected entity back onto raw parameters."""
    if params.kind is ModelKind.TRANSE:
        acc.add(("e", entity), g)
    elif params.kind is ModelKind.TRANSH:
        w = params.normals[relation]
        e = params.entity_vecs[entity]
        acc.add(("e", entity), g - (w @ g) * w)
        acc.add(("w", relation), -(g @ w) * e - (w @ e) * g)
    else:
        M = params.rel_matrices[relation]
        e = params.entity_vecs[entity]
        acc.add(("e", entity), M @ g)
        acc.add(("m", relation), np.outer(e, g))


def _accumulate_triple(params, acc: _Acc, triple: Triple, norm: Norm, sign: float):
    h, r, t = triple
    v = _residual(params, h, r, t)
    g = sign * _norm_grad(v, norm)
    _backprop_projection(params, acc, h, r, g)
    _backprop_projection(params, acc, t, r, -g)
    acc.add(("r", r), g)


def _accumulate_inference(params, acc: _Acc, ground: GroundRule, norm: Norm, sign: float):
    (h, r1, t), (_, r2, _) = ground.triples
    cid, C = _concept_matrix(params, ground.concept)
    hv = params.entity_vecs[h]
    body = _residual(params, h, r1, t)
    head = _residual(params, h, r2, t)
    gate = hv @ C
    g = sign * _norm_grad(gate * body - head, norm)
    g_body = g * gate
    _backprop_projection(params, acc, h, r1, g_body)
    _backprop_projection(params, acc, t, r1, -g_body)
    _backprop_projection(params, acc, h, r2, -g)
    _backprop_projection(params, acc, t, r2, g)
    acc.add(("r", r1), g_body)
    acc.add(("r", r2), -g)
    g_gate = g * body
    acc.add(("e", h), C @ g_gate)
    acc.add(("c", cid), np.outer(hv, g_gate))


def _accumulate_transitivity(params, acc: _Acc, ground: GroundRule, norm: Norm, sign: float):
    (e1, r1, e2), (_, r2, e3), (_, r3, _) = ground.triples
    first = _residual(params, e1, r1, e2)
    second = _residual(params, e2, r2, e3)
    closing = _residual(params, e1, r3, e3)
    g = sign * _norm_grad(first * second - closing, norm)
    g_first = g * second
    g_second = g * first
    _backprop_projection(params, acc, e1, r1, g_first)
    _backprop_projection(params, acc, e2, r1, -g_first)
    _backprop_projection(params, acc, e2, r2, g_second)
    _backprop_projection(params, acc, e3, r2, -g_second)
    _backprop_projection(params, acc, e1, r3, -g)
    _backprop_projection(params, acc, e3, r3, g)
    acc.add(("r", r1), g_first)
    acc.add(("r", r2), g_second)
    acc.add(("r", r3), -g)


def _accumulate_antisymmetry(params, acc: _Acc, ground: GroundRule, norm: Norm, sign: float):
    (h, r1, t), (_, r2, _) = ground.triples
    forward = _residual(params, h, r1, t)
    backward = _residual(params, t, r2, h)
    d = forward - backward
    g = sign * _norm_grad(d * d, norm)
    q = 2.0 * g * d
    _backprop_projection(params, acc, h, r1, q)
    _backprop_projection(params, acc, t, r1, -q)
    _backprop_projection(params, acc, t, r2, -q)
    _backprop_projection(params, acc, h, r2, q)
    acc.add(("r", r1), q)
    acc.add(("r", r2), -q)


def _accumulate_sample(params, acc: _Acc, sample, norm: Norm, sign: float):
    if isinstance(sample, GroundRule):
        if sample.rule_type is RuleType.INFERENCE:
            _accumulate_inference(params, acc, sample, norm, sign)
        elif sample.rule_type is RuleType.TRANSITIVITY:
            _accumulate_transitivity(params, acc, sample, norm, sign)
        else:
            _accumulate_antisymmetry(params, acc, sample, norm, sign)
    else:
        _accumulate_triple(params, acc, Triple(*sample), norm, sign)


def hinge_and_gradients(
    params: ModelParams, positive, negative, margin: float, norm: Norm
) -> tuple[float, dict[tuple[str, int], np.ndarray]]:
    """Hinge value [margin + s(pos) - s(neg)]_+ and its parameter partials.

    An empty dict means the margin is satisfied (flat region of the hinge).
    """
    s_pos = score_sample(params, positive, norm)
    s_neg = score_sample(params, negative, norm)
    hinge = margin + s_pos - s_neg
    if hinge <= 0.0:
        return 0.0, {}
    acc = _Acc()
    _accumulate_sample(params, acc, positive, norm, 1.0)
    _accumulate_sample(params, acc, negative, norm, -1.0)
    return hinge, acc.grads


def gradients(
    params: ModelParams, positive, negative, margin: float, norm: Norm
) -> dict[tuple[str, int], np.ndarray]:
    """Sparse partials of the margin hinge; empty when the margin holds."""
    _, grads = hinge_and_gradients(params, positive, negative, margin, norm)
    return grads
