"""Integer encodings of training samples and membership keys.

Both training backends consume the same structures: samples as rows of a
(n, 9) int64 matrix, and the membership sets used to validate corrupted
samples as sorted int64 key arrays searched by bisection.

Row layout (unused columns hold -1):

  col 0  KIND     0 triple, 1 inference, 2 transitivity, 3 antisymmetry
  col 1  RULE     index of the originating rule (kinds 1-3)
  col 2..7        ids: triple (h, r, t); inference (h, r1, t, r2);
                  transitivity (e1, r1, e2, r2, e3, r3); antisymmetry
                  (h, r1, t, r2) with the rule's canonical relation order
  col 8  CONCEPT  concept matrix index (inference only)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kg import Triple
from .mining import GroundRule, Rule, RuleType
from .rng import SplitMix64

KIND_TRIPLE, KIND_INFERENCE, KIND_TRANSITIVITY, KIND_ANTISYMMETRY = range(4)

_KIND_OF_TYPE = {
    RuleType.INFERENCE: KIND_INFERENCE,
    RuleType.TRANSITIVITY: KIND_TRANSITIVITY,
    RuleType.ANTISYMMETRY: KIND_ANTISYMMETRY,
}

ROW_WIDTH = 9
MAX_REDRAWS = 100  # corruption attempts before giving up and keeping the draw


def triple_key(h: int, r: int, t: int, n_ent: int, n_rel: int) -> int:
    return (h * n_rel + r) * n_ent + t


@dataclass
class NegativePool:
    """Membership state consulted when corrupting a sample.

    A corrupted sample is rejected while any of its altered constituent
    triples exists in the training graph or the corrupted rule instance
    coincides with an original ground rule.
    """

    n_entities: int
    n_relations: int
    triple_keys: np.ndarray  # sorted int64
    instance_keys: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    rules: list[Rule]
    rule_ids: dict[tuple[RuleType, tuple[int, ...]], int]

    def has_triple(self, h: int, r: int, t: int) -> bool:
        key = triple_key(h, r, t, self.n_entities, self.n_relations)
        i = np.searchsorted(self.triple_keys, key)
        return bool(i < len(self.triple_keys) and self.triple_keys[i] == key)

    def has_instance(self, kind: int, key: int) -> bool:
        arr = self.instance_keys[kind]
        i = np.searchsorted(arr, key)
        return bool(i < len(arr) and arr[i] == key)


def _instance_key(kind: int, rule_id: int, row, n_ent: int, symmetric: bool) -> int:
    """Identity of a ground-rule instance within its rule, for duplicate checks."""
    if kind == KIND_TRANSITIVITY:
        e1, e2, e3 = row[2], row[4], row[6]
        return ((rule_id * n_ent + e1) * n_ent + e2) * n_ent + e3
    a, b = row[2], row[4]
    if kind == KIND_ANTISYMMETRY and symmetric and a > b:
        a, b = b, a
    return (rule_id * n_ent + a) * n_ent + b


def _encode_ground(ground: GroundRule, rule_id: int, concept_idx: int) -> list[int]:
    row = [-1] * ROW_WIDTH
    row[0] = _KIND_OF_TYPE[ground.rule_type]
    row[1] = rule_id
    if ground.rule_type is RuleType.TRANSITIVITY:
        (e1, r1, e2), (_, r2, e3), (_, r3, _) = ground.triples
        row[2:8] = [e1, r1, e2, r2, e3, r3]
    else:
        (h, r1, t), (_, r2, _) = ground.triples
        row[2:6] = [h, r1, t, r2]
    row[8] = concept_idx
    return row


def encode_triples(triples: Sequence[Triple]) -> np.ndarray:
    rows = np.full((len(triples), ROW_WIDTH), -1, dtype=np.int64)
    if triples:
        arr = np.asarray(triples, dtype=np.int64)
        rows[:, 0] = KIND_TRIPLE
        rows[:, 2:5] = arr
    return rows


def encode_ground_rules(
    grounds: Sequence[GroundRule],
    rule_ids: dict[tuple[RuleType, tuple[int, ...]], int],
    concept_idx_of: dict[str, int],
) -> np.ndarray:
    rows = np.full((len(grounds), ROW_WIDTH), -1, dtype=np.int64)
    for i, g in enumerate(grounds):
        rels = tuple(t.relation for t in g.triples)
        if g.rule_type is RuleType.ANTISYMMETRY:
            rels = tuple(sorted(rels[:2]))
        rule_id = rule_ids[g.rule_type, rels]
        cidx = -1
        if g.rule_type is RuleType.INFERENCE:
            cidx = concept_idx_of[g.concept if g.concept is not None else "?"]
        row = _encode_ground(g, rule_id, cidx)
        if g.rule_type is RuleType.ANTISYMMETRY and row[3] > row[5]:
            # store in the rule's canonical relation order
            h, r1, t, r2 = row[2:6]
            row[2:6] = [t, r2, h, r1]
        rows[i] = row
    return rows


def build_pool(
    graph_triples: Sequence[Triple],
    grounds: Sequence[GroundRule],
    rules: Sequence[Rule],
    n_entities: int,
    n_relations: int,
) -> NegativePool:
    if n_entities * n_relations * n_entities >= 2**62:
        raise ValueError("vocabulary too large for int64 membership keys")
    tkeys = np.sort(
        np.asarray(
            [triple_key(h, r, t, n_entities, n_relations) for h, r, t in graph_triples],
            dtype=np.int64,
        )
    )
    rule_ids: dict[tuple[RuleType, tuple[int, ...]], int] = {}

    def register(rule_type: RuleType, rels: tuple[int, ...]) -> int:
        if rule_type is RuleType.ANTISYMMETRY:
            rels = tuple(sorted(rels))
        return rule_ids.setdefault((rule_type, rels), len(rule_ids))

    for rule in rules:
        register(rule.rule_type, rule.relations)
    for g in grounds:
        # grounds loaded from a file may arrive without their rule objects
        register(g.rule_type, tuple(t.relation for t in g.triples))
    if (len(rule_ids) + 1) * n_entities**3 >= 2**62:
        raise ValueError("rule set too large for int64 instance keys")
    per_kind: list[list[int]] = [[], [], [], []]
    for g in grounds:
        rels = tuple(t.relation for t in g.triples)
        if g.rule_type is RuleType.ANTISYMMETRY:
            rels = tuple(sorted(rels[:2]))
        rule_id = rule_ids[g.rule_type, rels]
        kind = _KIND_OF_TYPE[g.rule_type]
        row = _encode_ground(g, rule_id, -1)
        symmetric = rels[0] == rels[1] if g.rule_type is RuleType.ANTISYMMETRY else False
        per_kind[kind].append(_instance_key(kind, rule_id, row, n_entities, symmetric))
    inst = tuple(np.sort(np.asarray(keys, dtype=np.int64)) for keys in per_kind)
    return NegativePool(n_entities, n_relations, tkeys, inst, list(rules), rule_ids)


def corrupt_row(row: np.ndarray, side: int, cand: int) -> np.ndarray:
    """Replace the sample's corruptible entity on ``side`` (0 head-side,
    1 tail-side) with ``cand`` at every position it occupies."""
    out = row.copy()
    kind = row[0]
    if kind == KIND_TRIPLE:
        out[2 if side == 0 else 4] = cand
    elif kind == KIND_TRANSITIVITY:
        out[2 if side == 0 else 6] = cand
    else:
        out[2 if side == 0 else 4] = cand
    return out


def _changed_triples(row: np.ndarray, side: int, cand: int) -> list[tuple[int, int, int]]:
    kind = row[0]
    if kind == KIND_TRIPLE:
        h, r, t = row[2], row[3], row[4]
        return [(cand, r, t)] if side == 0 else [(h, r, cand)]
    if kind == KIND_INFERENCE:
        h, r1, t, r2 = row[2], row[3], row[4], row[5]
        if side == 0:
            return [(cand, r1, t), (cand, r2, t)]
        return [(h, r1, cand), (h, r2, cand)]
    if kind == KIND_TRANSITIVITY:
        e1, r1, e2, r2, e3, r3 = row[2:8]
        if side == 0:
            return [(cand, r1, e2), (cand, r3, e3)]
        return [(e2, r2, cand), (e1, r3, cand)]
    h, r1, t, r2 = row[2], row[3], row[4], row[5]
    if side == 0:
        return [(cand, r1, t), (t, r2, cand)]
    return [(h, r1, cand), (cand, r2, h)]


def corruption_is_valid(row: np.ndarray, side: int, cand: int, pool: NegativePool) -> bool:
    for h, r, t in _changed_triples(row, side, cand):
        if pool.has_triple(h, r, t):
            return False
    kind = int(row[0])
    if kind != KIND_TRIPLE:
        corrupted = corrupt_row(row, side, cand)
        symmetric = kind == KIND_ANTISYMMETRY and corrupted[3] == corrupted[5]
        key = _instance_key(kind, int(row[1]), corrupted, pool.n_entities, symmetric)
        if pool.has_instance(kind, key):
            return False
    return True


def draw_negative_row(row: np.ndarray, pool: NegativePool, rng: SplitMix64) -> np.ndarray:
    """Corrupt one side of the sample with a uniformly drawn entity,
    redrawing (same side) while the corruption still exists among the
    originals; after MAX_REDRAWS the last draw is kept regardless."""
    if pool.n_entities < 2:
        raise ValueError("negative sampling requires at least 2 entities")
    side = rng.coin()
    cand = 0
    for _ in range(MAX_REDRAWS + 1):
        cand = rng.below(pool.n_entities)
        if corruption_is_valid(row, side, cand, pool):
            break
    return corrupt_row(row, side, cand)


def decode_sample(row: np.ndarray, concept_labels: Sequence[str] = ()):
    """Row back to a Triple or GroundRule (for the Python backend and tests)."""
    kind = int(row[0])
    if kind == KIND_TRIPLE:
        return Triple(int(row[2]), int(row[3]), int(row[4]))
    if kind == KIND_TRANSITIVITY:
        e1, r1, e2, r2, e3, r3 = (int(x) for x in row[2:8])
        return GroundRule(
            RuleType.TRANSITIVITY,
            (Triple(e1, r1, e2), Triple(e2, r2, e3), Triple(e1, r3, e3)),
        )
    h, r1, t, r2 = (int(x) for x in row[2:6])
    if kind == KIND_INFERENCE:
        concept = concept_labels[int(row[8])] if row[8] >= 0 else None
        return GroundRule(
            RuleType.INFERENCE, (Triple(h, r1, t), Triple(h, r2, t)), concept
        )
    return GroundRule(RuleType.ANTISYMMETRY, (Triple(h, r1, t), Triple(t, r2, h)))
