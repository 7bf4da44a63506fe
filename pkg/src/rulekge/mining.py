"""Mining schema-level rules from a triple store and grounding them.

Three rule forms are supported:

  inference      r1(h, t)            =>  r2(h, t)      (directed)
  transitivity   r1(e1, e2) + r2(e2, e3)  =>  r3(e1, e3)
  antisymmetry   r1(h, t)           <=>  r2(t, h)      (undirected; r1 = r2
                                                        covers symmetric relations)

The pipeline is: enumerate rule samples (triple combinations matching a
form), aggregate them into relation-level candidates, orient inference
candidates by the concept hierarchy read off relation labels, score every
candidate by the fraction of its generated triples already present in the
graph, keep candidates above a per-form threshold, and finally instantiate
the survivors over the concrete triples (grounding).
"""

from __future__ import annotations

from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

from .kg import KnowledgeGraph, Triple, Vocabulary


class RuleType(Enum):
    INFERENCE = "inference"
    TRANSITIVITY = "transitivity"
    ANTISYMMETRY = "antisymmetry"


#: relations per rule form
_ARITY = {RuleType.INFERENCE: 2, RuleType.TRANSITIVITY: 3, RuleType.ANTISYMMETRY: 2}


@dataclass
class RuleCandidate:
    """A relation tuple observed in rule samples, before/after scoring.

    Inference tuples are ordered (body, head) with distinct relations;
    antisymmetry tuples are stored in canonical (min, max) order and may
    repeat a relation (a purely symmetric relation); transitivity tuples
    are ordered (body1, body2, head).
    """

    rule_type: RuleType
    relations: tuple[int, ...]
    support: int
    confidence: float | None = None
    concept: str | None = None

    def __post_init__(self):
        if len(self.relations) != _ARITY[self.rule_type]:
            raise ValueError(
                f"{self.rule_type.value} candidate needs "
                f"{_ARITY[self.rule_type]} relations, got {self.relations}"
            )
        if self.rule_type is RuleType.INFERENCE and self.relations[0] == self.relations[1]:
            raise ValueError("inference candidate requires two distinct relations")
        if self.rule_type is RuleType.ANTISYMMETRY and self.relations[0] > self.relations[1]:
            raise ValueError("antisymmetry candidate must be in canonical (min, max) order")


@dataclass(frozen=True)
class Rule:
    """A selected rule: relation tuple, confidence, and (inference only) the
    head concept of the consequent relation."""

    rule_type: RuleType
    relations: tuple[int, ...]
    confidence: float
    concept: str | None = None


@dataclass(frozen=True)
class GroundRule:
    """A rule instantiated over concrete entities.

    The constructor checks the structural invariant of each form:

      inference      triples share head and tail, relations differ
      transitivity   tail(1) = head(2), head(1) = head(3), tail(2) = tail(3)
      antisymmetry   second triple is the reversal (t, r2, h) of the first
    """

    rule_type: RuleType
    triples: tuple[Triple, ...]
    concept: str | None = None

    def __post_init__(self):
        ts = self.triples
        if self.rule_type is RuleType.INFERENCE:
            ok = (
                len(ts) == 2
                and ts[0].head == ts[1].head
                and ts[0].tail == ts[1].tail
                and ts[0].relation != ts[1].relation
            )
        elif self.rule_type is RuleType.TRANSITIVITY:
            ok = (
                len(ts) == 3
                and ts[0].tail == ts[1].head
                and ts[0].head == ts[2].head
                and ts[1].tail == ts[2].tail
            )
        else:
            ok = (
                len(ts) == 2
                and ts[1].head == ts[0].tail
                and ts[1].tail == ts[0].head
            )
        if not ok:
            raise ValueError(f"malformed {self.rule_type.value} ground rule: {ts}")


class ConceptHierarchy:
    """Concept labels and ancestor evidence read off relation-label paths.

    A label like ``/location/country/capital`` (or the dotted form
    ``location.country.capital``) names a property (the final segment) under
    a concept path (the preceding segments).  Every consecutive concept pair
    of a path contributes ancestor evidence: ``location`` is an ancestor of
    ``country``.  The head concept of a relation is the last concept of its
    path, the type of the head entity.  Labels without at least two segments
    carry no concept path and map to the distinguished unknown concept.
    """

    UNKNOWN = "?"

    def __init__(self, relation_labels: Sequence[str]):
        self._paths: list[tuple[str, ...]] = [
            _label_segments(lab)[:-1] for lab in relation_labels
        ]
        self.head_concept: list[str] = [
            path[-1] if path else self.UNKNOWN for path in self._paths
        ]
        children: dict[str, set[str]] = defaultdict(set)
        for path in self._paths:
            for a, b in zip(path, path[1:]):
                children[a].add(b)
        self._children = dict(children)

    def concept_path(self, relation: int) -> tuple[str, ...]:
        return self._paths[relation]

    def is_ancestor_or_equal(self, ancestor: str, descendant: str) -> bool:
        """Reachability in the concept digraph; the unknown concept never matches."""
        if ancestor == self.UNKNOWN or descendant == self.UNKNOWN:
            return False
        if ancestor == descendant:
            return True
        seen = {ancestor}
        queue = deque([ancestor])
        while queue:
            node = queue.popleft()
            for child in self._children.get(node, ()):
                if child == descendant:
                    return True
                if child not in seen:
                    seen.add(child)
                    queue.append(child)
        return False

    def orientation_supported(self, body: int, head: int) -> bool:
        """Concept evidence that ``body`` implies ``head``: at the first
        concept-path position where the two relations differ, the head
        relation's concept must be an ancestor of (or equal to) the body's.
        Identical paths support both directions; flat labels support none.
        """
        bp, hp = self._paths[body], self._paths[head]
        if not bp or not hp:
            return False
        for b, h in zip(bp, hp):
            if b != h:
                return self.is_ancestor_or_equal(h, b)
        # one path is a prefix of the other: the shorter one is the more
        # general; equal paths support either orientation
        return len(hp) <= len(bp)


def _label_segments(label: str) -> tuple[str, ...]:
    if "/" in label:
        parts = [p for p in label.split("/") if p]
    elif "." in label:
        parts = [p for p in label.split(".") if p]
    else:
        return ()
    return tuple(parts) if len(parts) >= 2 else ()


# ---------------------------------------------------------------------------
# sample extraction


def _relations_by_pair(graph: KnowledgeGraph) -> dict[tuple[int, int], list[int]]:
    by_pair: dict[tuple[int, int], list[int]] = defaultdict(list)
    for h, r, t in graph.triples:
        by_pair[h, t].append(r)
    return {pair: sorted(rels) for pair, rels in by_pair.items()}


def _in_edges(graph: KnowledgeGraph) -> dict[int, list[tuple[int, int]]]:
    incoming: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for h, r, t in graph.triples:
        incoming[t].append((r, h))
    return {e: sorted(edges) for e, edges in incoming.items()}


def _iter_chains(graph: KnowledgeGraph):
    """Yield (e1, r1, e2, r2, e3) for every two-hop path; self-loop hops are
    excluded (a loop edge is not evidence of transitivity)."""
    incoming = _in_edges(graph)
    for e2 in sorted(graph.by_head):
        in_here = incoming.get(e2)
        if not in_here:
            continue
        out_here = sorted(graph.by_head[e2])
        for r1, e1 in in_here:
            if e1 == e2:
                continue
            for r2, e3 in out_here:
                if e3 == e2:
                    continue
                yield e1, r1, e2, r2, e3


def extract_samples(graph: KnowledgeGraph, rule_type: RuleType) -> list[GroundRule]:
    """Enumerate every triple combination instantiating ``rule_type``.

    Inference: all ordered pairs of distinct triples sharing (head, tail).
    Transitivity: all two-hop chains whose closing triple exists.
    Antisymmetry: all unordered pairs {(h,r1,t), (t,r2,h)} with h != t,
    each emitted once.
    """
    samples: list[GroundRule] = []
    if rule_type is RuleType.INFERENCE:
        for (h, t), rels in sorted(_relations_by_pair(graph).items()):
            for r1 in rels:
                for r2 in rels:
                    if r1 != r2:
                        samples.append(
                            GroundRule(rule_type, (Triple(h, r1, t), Triple(h, r2, t)))
                        )
    elif rule_type is RuleType.TRANSITIVITY:
        by_pair = _relations_by_pair(graph)
        for e1, r1, e2, r2, e3 in _iter_chains(graph):
            for r3 in by_pair.get((e1, e3), ()):
                samples.append(
                    GroundRule(
                        rule_type,
                        (Triple(e1, r1, e2), Triple(e2, r2, e3), Triple(e1, r3, e3)),
                    )
                )
    elif rule_type is RuleType.ANTISYMMETRY:
        by_pair = _relations_by_pair(graph)
        for first in sorted(graph.triples):
            h, r1, t = first
            if h == t:
                continue
            for r2 in by_pair.get((t, h), ()):
                second = Triple(t, r2, h)
                if first < second:
                    samples.append(GroundRule(rule_type, (first, second)))
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(rule_type)
    return samples


# ---------------------------------------------------------------------------
# candidates and scoring


def _candidate_key(sample: GroundRule) -> tuple[int, ...]:
    rels = tuple(t.relation for t in sample.triples)
    if sample.rule_type is RuleType.ANTISYMMETRY:
        return tuple(sorted(rels))
    return rels


def aggregate_candidates(samples: Sequence[GroundRule]) -> list[RuleCandidate]:
    """Count samples per relation tuple; sort by support descending, ties by
    relation ids."""
    if not samples:
        return []
    rule_type = samples[0].rule_type
    counts: Counter = Counter(_candidate_key(s) for s in samples)
    cands = [
        RuleCandidate(rule_type, rels, support) for rels, support in counts.items()
    ]
    cands.sort(key=lambda c: (-c.support, c.relations))
    return cands


def orient_inference(
    candidate: RuleCandidate, hierarchy: ConceptHierarchy
) -> RuleCandidate | None:
    """Keep the orientation body => head only when the head relation's
    concept path supports it (see ``ConceptHierarchy.orientation_supported``).
    Returns None otherwise; the surviving candidate is annotated with the
    head relation's head concept.
    """
    if candidate.rule_type is not RuleType.INFERENCE:
        raise ValueError("orient_inference expects an inference candidate")
    r1, r2 = candidate.relations
    if not hierarchy.orientation_supported(r1, r2):
        return None
    return replace(candidate, concept=hierarchy.head_concept[r2])


def get_new_triples(candidate: RuleCandidate, graph: KnowledgeGraph) -> set[Triple]:
    """All triples the candidate generates when applied over the graph."""
    rels = candidate.relations
    by_relation = graph.by_relation
    if candidate.rule_type is RuleType.INFERENCE:
        r1, r2 = rels
        return {Triple(h, r2, t) for h, t in by_relation.get(r1, ())}
    if candidate.rule_type is RuleType.TRANSITIVITY:
        r1, r2, r3 = rels
        out = set()
        by_head_rel = graph.by_head_rel
        for e1, e2 in by_relation.get(r1, ()):
            for e3 in by_head_rel.get((e2, r2), ()):
                out.add(Triple(e1, r3, e3))
        return out
    r1, r2 = rels
    out = {Triple(t, r2, h) for h, t in by_relation.get(r1, ())}
    out |= {Triple(t, r1, h) for h, t in by_relation.get(r2, ())}
    return out


def score_candidates(
    candidates: Sequence[RuleCandidate], graph: KnowledgeGraph
) -> list[RuleCandidate]:
    """Set each candidate's confidence to |generated and present| / |generated|.

    Candidates generating nothing get confidence 0.  Transitivity candidates
    sharing a body pair (r1, r2) reuse one chain-pair enumeration.
    """
    scored: list[RuleCandidate] = []
    transitive = [c for c in candidates if c.rule_type is RuleType.TRANSITIVITY]
    body_pairs: dict[tuple[int, int], set[tuple[int, int]]] = {}
    if transitive:
        by_head_rel = graph.by_head_rel
        for cand in transitive:
            r1, r2, _ = cand.relations
            if (r1, r2) in body_pairs:
                continue
            pairs = set()
            for e1, e2 in graph.by_relation.get(r1, ()):
                for e3 in by_head_rel.get((e2, r2), ()):
                    pairs.add((e1, e3))
            body_pairs[r1, r2] = pairs
    for cand in candidates:
        if cand.rule_type is RuleType.TRANSITIVITY:
            r1, r2, r3 = cand.relations
            pairs = body_pairs[r1, r2]
            hits = sum(1 for e1, e3 in pairs if Triple(e1, r3, e3) in graph.triples)
            conf = hits / len(pairs) if pairs else 0.0
        else:
            generated = get_new_triples(cand, graph)
            if not generated:
                conf = 0.0
            else:
                hits = sum(1 for t in generated if t in graph.triples)
                conf = hits / len(generated)
        scored.append(replace(cand, confidence=conf))
    return scored


def select_rules(
    candidates: Sequence[RuleCandidate], thresholds: Mapping[RuleType, float]
) -> list[Rule]:
    """Keep candidates whose confidence meets their form's threshold
    (inclusive); output sorted by (form, confidence desc, relation ids)."""
    order = {t: i for i, t in enumerate(RuleType)}
    kept = [
        Rule(c.rule_type, c.relations, c.confidence, c.concept)
        for c in candidates
        if c.confidence is not None and c.confidence >= thresholds[c.rule_type]
    ]
    kept.sort(key=lambda r: (order[r.rule_type], -r.confidence, r.relations))
    return kept


# ---------------------------------------------------------------------------
# grounding


def ground(rules: Sequence[Rule], graph: KnowledgeGraph) -> list[GroundRule]:
    """Instantiate every selected rule over the graph's triples.

    Inference: one ground rule per body triple, carrying the rule's concept.
    Transitivity: one per two-hop chain (self-loop hops excluded, matching
    sample extraction).  Antisymmetry: one per triple of either relation,
    deduplicated as unordered instances; self-loops carry no antisymmetry
    evidence and are skipped.
    """
    grounds: list[GroundRule] = []
    by_pair_chains: dict[tuple[int, int], list[tuple[int, int, int]]] = {}

    def chains_for(r1: int, r2: int) -> list[tuple[int, int, int]]:
        key = (r1, r2)
        if key not in by_pair_chains:
            found = []
            by_head_rel = graph.by_head_rel
            for e1, e2 in sorted(graph.by_relation.get(r1, ())):
                if e1 == e2:
                    continue
                for e3 in sorted(by_head_rel.get((e2, r2), ())):
                    if e3 == e2:
                        continue
                    found.append((e1, e2, e3))
            by_pair_chains[key] = found
        return by_pair_chains[key]

    for rule in rules:
        if rule.rule_type is RuleType.INFERENCE:
            r1, r2 = rule.relations
            for h, t in sorted(graph.by_relation.get(r1, ())):
                grounds.append(
                    GroundRule(
                        rule.rule_type,
                        (Triple(h, r1, t), Triple(h, r2, t)),
                        concept=rule.concept,
                    )
                )
        elif rule.rule_type is RuleType.TRANSITIVITY:
            r1, r2, r3 = rule.relations
            for e1, e2, e3 in chains_for(r1, r2):
                grounds.append(
                    GroundRule(
                        rule.rule_type,
                        (Triple(e1, r1, e2), Triple(e2, r2, e3), Triple(e1, r3, e3)),
                    )
                )
        else:
            r1, r2 = rule.relations
            seen: set[tuple[int, int]] = set()
            instances = []
            for h, t in graph.by_relation.get(r1, ()):
                if h != t:
                    instances.append((h, t))
            for h2, t2 in graph.by_relation.get(r2, ()):
                if h2 != t2:
                    # a triple of r2 instantiates the instance whose r1 side is
                    # the reversal
                    instances.append((t2, h2))
            for h, t in sorted(instances):
                key = (min(h, t), max(h, t)) if r1 == r2 else (h, t)
                if key in seen:
                    continue
                seen.add(key)
                grounds.append(
                    GroundRule(
                        rule.rule_type, (Triple(h, r1, t), Triple(t, r2, h))
                    )
                )
    return grounds


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class MiningResult:
    rules: list[Rule]
    candidates: dict[RuleType, list[RuleCandidate]] = field(default_factory=dict)

    def count(self, rule_type: RuleType) -> int:
        return sum(1 for r in self.rules if r.rule_type is rule_type)


def mine_rules(
    graph: KnowledgeGraph,
    thresholds: Mapping[RuleType, float],
    hierarchy: ConceptHierarchy | None = None,
    min_transitivity_support: int = 2,
) -> MiningResult:
    """Run the full mining pipeline and return the selected rules.

    ``min_transitivity_support`` drops transitivity candidates observed in
    fewer samples before the (comparatively expensive) scoring pass; the
    confidence threshold dominates selection regardless.
    """
    if hierarchy is None:
        hierarchy = ConceptHierarchy(graph.relations.labels)
    per_type: dict[RuleType, list[RuleCandidate]] = {}

    inferred = aggregate_candidates(extract_samples(graph, RuleType.INFERENCE))
    oriented = []
    for cand in inferred:
        kept = orient_inference(cand, hierarchy)
        if kept is not None:
            oriented.append(kept)
    per_type[RuleType.INFERENCE] = score_candidates(oriented, graph)

    transitive = aggregate_candidates(extract_samples(graph, RuleType.TRANSITIVITY))
    transitive = [c for c in transitive if c.support >= min_transitivity_support]
    per_type[RuleType.TRANSITIVITY] = score_candidates(transitive, graph)

    anti = aggregate_candidates(extract_samples(graph, RuleType.ANTISYMMETRY))
    per_type[RuleType.ANTISYMMETRY] = score_candidates(anti, graph)

    all_scored = (
        per_type[RuleType.INFERENCE]
        + per_type[RuleType.TRANSITIVITY]
        + per_type[RuleType.ANTISYMMETRY]
    )
    return MiningResult(select_rules(all_scored, thresholds), per_type)


# ---------------------------------------------------------------------------
# rule and ground-rule files


def write_rules(path: str, rules: Sequence[Rule], relations: Vocabulary) -> None:
    """One rule per line: type, confidence, then relation labels (tab-separated)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rule in rules:
            labels = [relations[r] for r in rule.relations]
            fh.write(
                "\t".join([rule.rule_type.value, repr(rule.confidence), *labels]) + "\n"
            )


def read_rules(path: str, relations: Vocabulary) -> list[Rule]:
    rules: list[Rule] = []
    hierarchy: ConceptHierarchy | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            try:
                rule_type = RuleType(fields[0])
            except ValueError:
                raise ParseFailure(path, lineno, f"unknown rule type {fields[0]!r}")
            expected = 2 + _ARITY[rule_type]
            if len(fields) != expected:
                raise ParseFailure(path, lineno, f"expected {expected} fields")
            try:
                rel_ids = tuple(relations.id_of(lab) for lab in fields[2:])
            except KeyError as exc:
                raise ParseFailure(path, lineno, f"unknown relation {exc.args[0]!r}")
            concept = None
            if rule_type is RuleType.INFERENCE:
                if hierarchy is None:
                    hierarchy = ConceptHierarchy(relations.labels)
                concept = hierarchy.head_concept[rel_ids[1]]
            rules.append(Rule(rule_type, rel_ids, float(fields[1]), concept))
    return rules


def write_ground_rules(
    path: str,
    grounds: Sequence[GroundRule],
    entities: Vocabulary,
    relations: Vocabulary,
) -> None:
    """One ground rule per line: type, then each triple as 'h r t' labels,
    then (inference only) the concept label."""

    def fmt(triple: Triple) -> str:
        return f"{entities[triple.head]} {relations[triple.relation]} {entities[triple.tail]}"

    with open(path, "w", encoding="utf-8") as fh:
        for g in grounds:
            fields = [g.rule_type.value, *(fmt(t) for t in g.triples)]
            if g.rule_type is RuleType.INFERENCE:
                fields.append(g.concept if g.concept is not None else ConceptHierarchy.UNKNOWN)
            fh.write("\t".join(fields) + "\n")


def read_ground_rules(
    path: str, entities: Vocabulary, relations: Vocabulary
) -> list[GroundRule]:
    def parse_triple(field: str, lineno: int) -> Triple:
        parts = field.split(" ")
        if len(parts) != 3:
            raise ParseFailure(path, lineno, f"bad triple field {field!r}")
        try:
            return Triple(
                entities.id_of(parts[0]),
                relations.id_of(parts[1]),
                entities.id_of(parts[2]),
            )
        except KeyError as exc:
            raise ParseFailure(path, lineno, f"unknown label {exc.args[0]!r}")

    grounds: list[GroundRule] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            try:
                rule_type = RuleType(fields[0])
            except ValueError:
                raise ParseFailure(path, lineno, f"unknown rule type {fields[0]!r}")
            n_triples = 3 if rule_type is RuleType.TRANSITIVITY else 2
            concept = None
            if rule_type is RuleType.INFERENCE:
                if len(fields) != 1 + n_triples + 1:
                    raise ParseFailure(path, lineno, "expected 2 triples and a concept")
                concept = fields[-1]
            elif len(fields) != 1 + n_triples:
                raise ParseFailure(path, lineno, f"expected {n_triples} triples")
            triples = tuple(
                parse_triple(f, lineno) for f in fields[1 : 1 + n_triples]
            )
            grounds.append(GroundRule(rule_type, triples, concept))
    return grounds


class ParseFailure(ValueError):
    def __init__(self, path: str, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
