"""Link prediction and triple classification.

Link prediction ranks every entity as a replacement for one side of a test
triple by ascending dissimilarity.  The raw setting keeps all corruptions;
the filtered setting first removes corruptions that are themselves known
facts (anywhere in train/valid/test), since ranking a true fact above the
queried one is not an error.  Aggregates are mean rank, mean reciprocal
rank, and Hits@n for n in {1, 3, 5, 10}, averaged over both sides of every
test triple.

Triple classification scores labeled triples against relation-specific
thresholds fitted on a validation set: below the threshold means positive.
Negatives are generated at a 1:10 positive-to-negative ratio by corrupting
each side with entities observed in that position for the relation.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .kg import DatasetSplits, Triple
from .models import ModelKind, ModelParams, Norm, score_triple
from .rng import SplitMix64

log = logging.getLogger(__name__)

HITS_LEVELS = (1, 3, 5, 10)

HEAD, TAIL = "head", "tail"
RAW, FILTERED = "raw", "filtered"


@dataclass(frozen=True)
class RankResult:
    """Ranks of the true entity on both sides of one test triple.

    Ranks are integers >= 1 under the optimistic and pessimistic tie
    policies; the mean policy may produce half-integral values.
    """

    triple: Triple
    rank_head: int
    rank_tail: int
    setting: str


@dataclass(frozen=True)
class LPMetrics:
    mr: float
    mrr: float
    hits: dict[int, float]
    setting: str


@dataclass
class ThresholdTable:
    per_relation: dict[int, float]
    default: float

    def threshold(self, relation: int) -> float:
        return self.per_relation.get(relation, self.default)


@dataclass(frozen=True)
class LabeledTriple:
    triple: Triple
    positive: bool


@dataclass(frozen=True)
class TCMetrics:
    accuracy: float
    n_correct: int
    n_total: int


# ---------------------------------------------------------------------------
# candidate scoring


def _projected_entities(params: ModelParams, relation: int) -> np.ndarray:
    ent = params.entity_vecs
    if params.kind is ModelKind.TRANSE:
        return ent
    if params.kind is ModelKind.TRANSH:
        w = params.normals[relation]
        return ent - (ent @ w)[:, None] * w
    return ent @ params.rel_matrices[relation]


def _row_norms(vectors: np.ndarray, norm: Norm) -> np.ndarray:
    if norm is Norm.L1:
        return np.abs(vectors).sum(axis=1)
    return np.sqrt((vectors * vectors).sum(axis=1))


def corruption_scores(
    params: ModelParams,
    triple: Triple,
    side: str,
    norm: Norm,
    projected: np.ndarray | None = None,
) -> np.ndarray:
    """Scores of the triple with ``side`` replaced by every entity in turn."""
    h, r, t = triple
    if projected is None:
        projected = _projected_entities(params, r)
    rv = params.relation_vecs[r]
    if side == HEAD:
        residuals = (projected + rv) - projected[t]
    else:
        residuals = (projected[h] + rv) - projected
    return _row_norms(residuals, norm)


class _KnownIndex:
    """(entity, relation) -> known counterparts across all three splits."""

    def __init__(self, all_triples: Iterable[Triple]):
        self.tails: dict[tuple[int, int], set[int]] = defaultdict(set)
        self.heads: dict[tuple[int, int], set[int]] = defaultdict(set)
        for h, r, t in all_triples:
            self.tails[h, r].add(t)
            self.heads[t, r].add(h)

    def known(self, triple: Triple, side: str) -> set[int]:
        h, r, t = triple
        if side == HEAD:
            return self.heads.get((t, r), set())
        return self.tails.get((h, r), set())


def _rank_from_scores(
    scores: np.ndarray,
    original: int,
    excluded: Iterable[int],
    tie: str,
) -> float:
    """1 + number of kept candidates beating the original's score.

    ``tie``: 'optimistic' counts strictly smaller scores, 'pessimistic'
    additionally counts ties, 'mean' averages the two.
    """
    target = scores[original]
    mask = np.ones(len(scores), dtype=bool)
    mask[original] = False
    for e in excluded:
        mask[e] = False
    kept = scores[mask]
    smaller = int((kept < target).sum())
    if tie == "optimistic":
        return 1 + smaller
    ties = int((kept == target).sum())
    if tie == "pessimistic":
        return 1 + smaller + ties
    if tie == "mean":
        return 1 + smaller + ties / 2
    raise ValueError(f"unknown tie policy {tie!r}")


def rank_entity(
    params: ModelParams,
    triple: Triple,
    side: str,
    splits: DatasetSplits,
    setting: str,
    norm: Norm,
    tie: str = "optimistic",
) -> float:
    """Rank of the true entity among all corruptions of ``side``."""
    scores = corruption_scores(params, triple, side, norm)
    original = triple.head if side == HEAD else triple.tail
    excluded: Iterable[int] = ()
    if setting == FILTERED:
        index = _KnownIndex(splits.all_triples)
        excluded = index.known(triple, side) - {original}
    elif setting != RAW:
        raise ValueError(f"unknown setting {setting!r}")
    return _rank_from_scores(scores, original, excluded, tie)


def _aggregate(ranks: Sequence[tuple[float, float]], setting: str) -> LPMetrics:
    n = len(ranks)
    flat = [r for pair in ranks for r in pair]
    mr = sum(flat) / (2 * n)
    mrr = sum(1.0 / r for r in flat) / (2 * n)
    hits = {
        level: sum(1 for r in flat if r <= level) / (2 * n) for level in HITS_LEVELS
    }
    return LPMetrics(mr, mrr, hits, setting)


def link_prediction(
    params: ModelParams,
    test_triples: Sequence[Triple],
    splits: DatasetSplits,
    setting: str,
    norm: Norm,
    tie: str = "optimistic",
) -> LPMetrics:
    """Aggregate head and tail ranks of every test triple in one setting."""
    results = evaluate_rankings(
        params, test_triples, splits, (setting,), norm, tie=tie
    )
    return results.metrics[setting]


@dataclass
class RankingReport:
    metrics: dict[str, LPMetrics]
    results: dict[str, list[RankResult]] = field(default_factory=dict)


def evaluate_rankings(
    params: ModelParams,
    test_triples: Sequence[Triple],
    splits: DatasetSplits,
    settings: Sequence[str],
    norm: Norm,
    tie: str = "optimistic",
    keep_results: bool = False,
) -> RankingReport:
    """Rank every test triple on both sides, reusing one candidate-score pass
    for all requested settings.  Triples are grouped by relation so the
    per-relation entity projection is computed once."""
    if not test_triples:
        raise ValueError("link prediction needs a non-empty test set")
    for s in settings:
        if s not in (RAW, FILTERED):
            raise ValueError(f"unknown setting {s!r}")
    index = _KnownIndex(splits.all_triples) if FILTERED in settings else None
    by_relation: dict[int, list[int]] = defaultdict(list)
    for i, triple in enumerate(test_triples):
        by_relation[triple.relation].append(i)
    ranks: dict[str, list] = {s: [None] * len(test_triples) for s in settings}
    for relation in sorted(by_relation):
        projected = np.ascontiguousarray(_projected_entities(params, relation))
        for i in by_relation[relation]:
            triple = test_triples[i]
            pair: dict[str, list[float]] = {s: [] for s in settings}
            for side in (HEAD, TAIL):
                scores = corruption_scores(params, triple, side, norm, projected)
                original = triple.head if side == HEAD else triple.tail
                for s in settings:
                    excluded: Iterable[int] = ()
                    if s == FILTERED:
                        excluded = index.known(triple, side) - {original}
                    pair[s].append(_rank_from_scores(scores, original, excluded, tie))
            for s in settings:
                ranks[s][i] = tuple(pair[s])
    report = RankingReport(
        {s: _aggregate(ranks[s], s) for s in settings}
    )
    if keep_results:
        for s in settings:
            report.results[s] = [
                RankResult(t, rh, rt, s)
                for t, (rh, rt) in zip(test_triples, ranks[s])
            ]
    return report


# ---------------------------------------------------------------------------
# triple classification


def generate_tc_negatives(
    positives: Sequence[Triple],
    splits: DatasetSplits,
    rng: SplitMix64,
    negatives_per_positive: int = 10,
) -> list[LabeledTriple]:
    """Label each positive and attach corrupted negatives, half per side.

    Replacement entities are drawn from those observed in the corrupted
    position for the triple's relation (anywhere in the dataset), the
    hardest negatives available; the pool constraint is dropped (with a
    log line) when it cannot supply enough distinct corruptions.  No
    negative ever exists in train, valid, or test.
    """
    head_seen: dict[int, set[int]] = defaultdict(set)
    tail_seen: dict[int, set[int]] = defaultdict(set)
    for h, r, t in splits.all_triples:
        head_seen[r].add(h)
        tail_seen[r].add(t)
    head_pool = {r: sorted(s) for r, s in head_seen.items()}
    tail_pool = {r: sorted(s) for r, s in tail_seen.items()}
    known = splits.all_triples
    n_entities = splits.train.n_entities
    n_head = negatives_per_positive // 2
    n_tail = negatives_per_positive - n_head
    if negatives_per_positive % 2 and rng.coin():
        n_head, n_tail = n_tail, n_head
    fallbacks = 0

    out: list[LabeledTriple] = []
    for triple in positives:
        h, r, t = triple
        out.append(LabeledTriple(triple, True))
        for side, want in ((HEAD, n_head), (TAIL, n_tail)):
            pool = head_pool.get(r, []) if side == HEAD else tail_pool.get(r, [])
            chosen: set[int] = set()
            made = 0
            attempts = 0
            constrained = len(pool) > 0
            while made < want:
                attempts += 1
                if constrained and attempts > 50 * want:
                    # pool cannot supply enough distinct valid corruptions
                    constrained = False
                    fallbacks += 1
                if constrained:
                    cand = pool[rng.below(len(pool))]
                else:
                    cand = rng.below(n_entities)
                if cand in chosen:
                    continue
                corrupted = (
                    Triple(cand, r, t) if side == HEAD else Triple(h, r, cand)
                )
                if corrupted in known:
                    continue
                chosen.add(cand)
                made += 1
                out.append(LabeledTriple(corrupted, False))
    if fallbacks:
        log.warning(
            "triple-classification negatives: %d position pools exhausted, "
            "fell back to unconstrained draws",
            fallbacks,
        )
    return out


def _best_threshold(scores: np.ndarray, labels: np.ndarray) -> tuple[float, int]:
    """Threshold maximizing correct (score < sigma) == positive decisions.

    Candidates are the midpoints of consecutive distinct sorted scores plus
    one sentinel on each side (all-negative / all-positive); ties prefer
    the smaller threshold.  Returns (threshold, n_correct).
    """
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    pos = labels[order].astype(np.int64)
    n = len(s)
    n_pos = int(pos.sum())
    # positives strictly below each cut: prefix sums over sorted order
    prefix_pos = np.concatenate([[0], np.cumsum(pos)])
    distinct_ends = np.nonzero(np.diff(s))[0] + 1  # cut after these many items
    cuts = [(s[0] - 1.0, 0)]
    for k in distinct_ends:
        cuts.append(((s[k - 1] + s[k]) / 2.0, int(k)))
    cuts.append((s[-1] + 1.0, n))
    best_sigma, best_correct = None, -1
    for sigma, k in cuts:
        correct = int(prefix_pos[k]) + ((n - k) - (n_pos - int(prefix_pos[k])))
        if correct > best_correct:
            best_sigma, best_correct = sigma, correct
    return float(best_sigma), best_correct


def fit_thresholds(
    params: ModelParams, labeled: Sequence[LabeledTriple], norm: Norm
) -> ThresholdTable:
    """Per-relation thresholds maximizing validation accuracy; relations
    absent from the validation set fall back to the single threshold that
    maximizes pooled accuracy."""
    grouped: dict[int, list[tuple[float, bool]]] = defaultdict(list)
    for item in labeled:
        grouped[item.triple.relation].append(
            (score_triple(params, item.triple, norm), item.positive)
        )
    table: dict[int, float] = {}
    all_scores: list[float] = []
    all_labels: list[bool] = []
    for relation in sorted(grouped):
        pairs = grouped[relation]
        scores = np.array([p[0] for p in pairs])
        labels = np.array([p[1] for p in pairs])
        table[relation], _ = _best_threshold(scores, labels)
        all_scores.extend(scores.tolist())
        all_labels.extend(labels.tolist())
    default, _ = _best_threshold(np.array(all_scores), np.array(all_labels))
    return ThresholdTable(table, default)


def triple_classification(
    params: ModelParams,
    thresholds: ThresholdTable,
    labeled: Sequence[LabeledTriple],
    norm: Norm,
) -> TCMetrics:
    """Accuracy of (score < relation threshold) against the labels."""
    correct = 0
    for item in labeled:
        predicted = (
            score_triple(params, item.triple, norm)
            < thresholds.threshold(item.triple.relation)
        )
        correct += predicted == item.positive
    return TCMetrics(correct / len(labeled), correct, len(labeled))
