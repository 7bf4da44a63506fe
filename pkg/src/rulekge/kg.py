"""Triple datasets: parsing, interning, indexing, and subsetting.

A dataset is a set of (head entity, relation, tail entity) facts.  Labels
are opaque strings interned into dense integer ids; all derived indices are
rebuilt from the triple set and are never authoritative on their own.
Graphs are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence


class Triple(NamedTuple):
    """A fact: ids index the entity vocabulary (head/tail) and relation vocabulary."""

    head: int
    relation: int
    tail: int


class ParseError(ValueError):
    """Malformed triple file; carries the offending 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class Vocabulary:
    """Ordered label-to-dense-id interning table."""

    __slots__ = ("labels", "_ids")

    def __init__(self, labels: Iterable[str] = ()):
        self.labels: list[str] = list(labels)
        self._ids: dict[str, int] = {lab: i for i, lab in enumerate(self.labels)}

    def intern(self, label: str) -> int:
        """Return the id of ``label``, assigning the next free id on first sight."""
        idx = self._ids.get(label)
        if idx is None:
            idx = len(self.labels)
            self.labels.append(label)
            self._ids[label] = idx
        return idx

    def id_of(self, label: str) -> int:
        return self._ids[label]

    def __getitem__(self, idx: int) -> str:
        return self.labels[idx]

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __len__(self) -> int:
        return len(self.labels)


def _column_permutation(column_order: str) -> tuple[int, int, int]:
    if sorted(column_order) != ["h", "r", "t"]:
        raise ValueError(
            f"column order must be a permutation of 'hrt', got {column_order!r}"
        )
    pos = {c: i for i, c in enumerate(column_order)}
    return pos["h"], pos["r"], pos["t"]


def parse_triple_file(
    lines: Iterable[str],
    entities: Vocabulary,
    relations: Vocabulary,
    column_order: str = "hrt",
) -> list[Triple]:
    """Parse tab-separated triples, interning labels first-come-first-served.

    ``column_order`` names the file's column layout ('hrt', 'htr', ...);
    public dataset distributions disagree on it, so it is explicit here.
    Returns triples in file order, duplicates included (deduplication is
    the graph constructor's job).  Blank lines are skipped; a line with a
    field count other than 3 raises :class:`ParseError`.
    """
    hi, ri, ti = _column_permutation(column_order)
    out: list[Triple] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(
                f"expected 3 tab-separated fields, got {len(fields)}", lineno
            )
        out.append(
            Triple(
                entities.intern(fields[hi]),
                relations.intern(fields[ri]),
                entities.intern(fields[ti]),
            )
        )
    return out


class KnowledgeGraph:
    """Immutable, duplicate-free triple store with derived lookup indices.

    Indices:
      by_head_rel  (h, r) -> {t}
      by_tail_rel  (t, r) -> {h}
      by_head      h -> {(r, t)}
      by_relation  r -> {(h, t)}
    """

    __slots__ = (
        "entities",
        "relations",
        "triples",
        "by_head_rel",
        "by_tail_rel",
        "by_head",
        "by_relation",
    )

    def __init__(
        self,
        triples: Iterable[Triple],
        entities: Vocabulary,
        relations: Vocabulary,
    ):
        self.entities = entities
        self.relations = relations
        self.triples: frozenset[Triple] = frozenset(Triple(*t) for t in triples)
        n_ent, n_rel = len(entities), len(relations)
        for h, r, t in self.triples:
            if not (0 <= h < n_ent and 0 <= t < n_ent and 0 <= r < n_rel):
                raise ValueError(f"triple {(h, r, t)} references ids outside vocabulary")
        by_head_rel: dict = defaultdict(set)
        by_tail_rel: dict = defaultdict(set)
        by_head: dict = defaultdict(set)
        by_relation: dict = defaultdict(set)
        for h, r, t in self.triples:
            by_head_rel[h, r].add(t)
            by_tail_rel[t, r].add(h)
            by_head[h].add((r, t))
            by_relation[r].add((h, t))
        self.by_head_rel = dict(by_head_rel)
        self.by_tail_rel = dict(by_tail_rel)
        self.by_head = dict(by_head)
        self.by_relation = dict(by_relation)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, triple) -> bool:
        return Triple(*triple) in self.triples


def build_graph(
    triples: Iterable[Triple], entities: Vocabulary, relations: Vocabulary
) -> KnowledgeGraph:
    """Collapse duplicates and build all indices over ``triples``."""
    return KnowledgeGraph(triples, entities, relations)


def contains(graph: KnowledgeGraph, triple: Triple) -> bool:
    return triple in graph


@dataclass(frozen=True)
class DatasetSplits:
    """Train/valid/test partition over a shared vocabulary.

    ``all_triples`` is the union of the three splits and exists solely for
    the filtered evaluation setting.  Valid/test entities unseen in train
    keep their ids (they simply receive untrained embeddings).
    """

    train: KnowledgeGraph
    valid: list[Triple]
    test: list[Triple]
    all_triples: frozenset[Triple]

    @property
    def entities(self) -> Vocabulary:
        return self.train.entities

    @property
    def relations(self) -> Vocabulary:
        return self.train.relations


def make_splits(
    train_triples: Sequence[Triple],
    valid_triples: Sequence[Triple],
    test_triples: Sequence[Triple],
    entities: Vocabulary,
    relations: Vocabulary,
) -> DatasetSplits:
    graph = build_graph(train_triples, entities, relations)
    all_triples = frozenset(train_triples) | frozenset(valid_triples) | frozenset(test_triples)
    return DatasetSplits(graph, list(valid_triples), list(test_triples), all_triples)


def load_splits(
    train_path: str,
    valid_path: str,
    test_path: str,
    column_order: str = "hrt",
) -> DatasetSplits:
    """Load the three split files with shared interning (train first)."""
    entities, relations = Vocabulary(), Vocabulary()
    parts = []
    for path in (train_path, valid_path, test_path):
        with open(path, encoding="utf-8") as fh:
            parts.append(parse_triple_file(fh, entities, relations, column_order))
    return make_splits(parts[0], parts[1], parts[2], entities, relations)


def filter_subset(splits: DatasetSplits, relation_prefixes: Sequence[str]) -> DatasetSplits:
    """Keep only triples whose relation label starts with any given prefix.

    Vocabularies are re-interned densely so the result carries no
    unreferenced labels; split membership is preserved.  An empty result
    is legal.
    """
    if not relation_prefixes:
        raise ValueError("relation_prefixes must be non-empty")
    old_ent = splits.entities
    old_rel = splits.relations
    keep = [
        any(label.startswith(p) for p in relation_prefixes) for label in old_rel.labels
    ]
    entities, relations = Vocabulary(), Vocabulary()

    def remap(triples: Iterable[Triple]) -> list[Triple]:
        out = []
        for h, r, t in triples:
            if keep[r]:
                out.append(
                    Triple(
                        entities.intern(old_ent[h]),
                        relations.intern(old_rel[r]),
                        entities.intern(old_ent[t]),
                    )
                )
        return out

    train = remap(sorted(splits.train.triples))
    valid = remap(splits.valid)
    test = remap(splits.test)
    return make_splits(train, valid, test, entities, relations)
