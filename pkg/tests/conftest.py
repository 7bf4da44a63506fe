import os
from pathlib import Path

import pytest

from rulekge.kg import Triple, Vocabulary, build_graph, make_splits


def graph_from(triples, n_entities=None, rel_labels=None):
    """KnowledgeGraph over auto-named vocabularies."""
    triples = [Triple(*t) for t in triples]
    if n_entities is None:
        n_entities = 1 + max((max(t.head, t.tail) for t in triples), default=-1)
    n_rel = 1 + max((t.relation for t in triples), default=-1)
    if rel_labels is None:
        rel_labels = [f"r{i}" for i in range(n_rel)]
    entities = Vocabulary([f"e{i}" for i in range(n_entities)])
    relations = Vocabulary(rel_labels)
    return build_graph(triples, entities, relations)


def splits_from(train, valid=(), test=(), n_entities=None, rel_labels=None):
    graph = graph_from(list(train) + list(valid) + list(test), n_entities, rel_labels)
    return make_splits(
        [Triple(*t) for t in train],
        [Triple(*t) for t in valid],
        [Triple(*t) for t in test],
        graph.entities,
        graph.relations,
    )


def random_triples(rng, n_entities, n_relations, n_triples):
    """Duplicate-free random triple list (self-loops allowed)."""
    seen = set()
    out = []
    for _ in range(n_triples):
        h = int(rng.integers(n_entities))
        r = int(rng.integers(n_relations))
        t = int(rng.integers(n_entities))
        if (h, r, t) not in seen:
            seen.add((h, r, t))
            out.append(Triple(h, r, t))
    return out


def hierarchical_labels(rng, n_relations):
    """Relation labels mixing hierarchical paths (shared concept pool, so
    orientation evidence exists) with flat names."""
    domains = ["alpha", "beta"]
    types = ["alpha", "kind", "sort", "beta"]
    labels = []
    for i in range(n_relations):
        if rng.random() < 0.3:
            labels.append(f"flat{i}")
        else:
            d = domains[int(rng.integers(len(domains)))]
            ty = types[int(rng.integers(len(types)))]
            labels.append(f"/{d}/{ty}/p{i}")
    return labels


def wn18_dir():
    """Directory with the WN18 split files, if provided to this environment."""
    env = os.environ.get("RULEKGE_WN18")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).parent / "data" / "WN18")
    for base in candidates:
        if base.is_dir():
            names = {p.name for p in base.iterdir()}
            for trio in (
                ("train.txt", "valid.txt", "test.txt"),
                (
                    "wordnet-mlj12-train.txt",
                    "wordnet-mlj12-valid.txt",
                    "wordnet-mlj12-test.txt",
                ),
            ):
                if set(trio) <= names:
                    return base, trio
    return None


requires_wn18 = pytest.mark.skipif(
    wn18_dir() is None,
    reason="WN18 dataset not available (set RULEKGE_WN18 to a directory with "
    "train/valid/test files); it cannot be downloaded in this environment",
)
