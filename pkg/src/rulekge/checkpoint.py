"""Text persistence of model parameters.

Layout: a header line ``kind dim n_entities n_relations n_concepts``
followed by one labeled row per parameter, tab-separated::

    e<TAB>label<TAB>v1 v2 ... vd          entity vector
    r<TAB>label<TAB>v1 v2 ... vd          relation vector
    w<TAB>label<TAB>v1 v2 ... vd          hyperplane normal (TransH)
    m<TAB>label<TAB>m11 m12 ...           relation matrix, row-major (TransR)
    c<TAB>label<TAB>c11 c12 ...           concept matrix, row-major

Floats are written with round-trip precision, so save/load is lossless.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .models import ModelKind, ModelParams


class CheckpointError(ValueError):
    pass


def _fmt(values: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in values.ravel())


def save_params(
    path: str,
    params: ModelParams,
    entity_labels: Sequence[str],
    relation_labels: Sequence[str],
) -> None:
    if len(entity_labels) != params.n_entities or len(relation_labels) != params.n_relations:
        raise CheckpointError("label lists do not match parameter table sizes")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{params.kind.value} {params.dim} {params.n_entities} "
            f"{params.n_relations} {params.n_concepts}\n"
        )
        for label, vec in zip(entity_labels, params.entity_vecs):
            fh.write(f"e\t{label}\t{_fmt(vec)}\n")
        for label, vec in zip(relation_labels, params.relation_vecs):
            fh.write(f"r\t{label}\t{_fmt(vec)}\n")
        if params.kind is ModelKind.TRANSH:
            for label, vec in zip(relation_labels, params.normals):
                fh.write(f"w\t{label}\t{_fmt(vec)}\n")
        if params.kind is ModelKind.TRANSR:
            for label, mat in zip(relation_labels, params.rel_matrices):
                fh.write(f"m\t{label}\t{_fmt(mat)}\n")
        if params.concept_mats is not None:
            for label, mat in zip(params.concept_labels, params.concept_mats):
                fh.write(f"c\t{label}\t{_fmt(mat)}\n")


def load_params(path: str) -> tuple[ModelParams, list[str], list[str]]:
    """Returns (params, entity labels, relation labels) in stored order."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise CheckpointError(f"{path}: malformed header")
        kind = ModelKind(header[0])
        dim, n_ent, n_rel, n_con = (int(x) for x in header[1:])
        rows: dict[str, list[tuple[str, np.ndarray]]] = {
            "e": [], "r": [], "w": [], "m": [], "c": []
        }
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line:
                continue
            try:
                tag, label, payload = line.split("\t")
            except ValueError:
                raise CheckpointError(f"{path}:{lineno}: expected 3 tab-separated fields")
            if tag not in rows:
                raise CheckpointError(f"{path}:{lineno}: unknown row tag {tag!r}")
            rows[tag].append((label, np.array([float(x) for x in payload.split(" ")])))
    expected = {
        "e": n_ent,
        "r": n_rel,
        "w": n_rel if kind is ModelKind.TRANSH else 0,
        "m": n_rel if kind is ModelKind.TRANSR else 0,
        "c": n_con,
    }
    for tag, want in expected.items():
        if len(rows[tag]) != want:
            raise CheckpointError(
                f"{path}: expected {want} '{tag}' rows, found {len(rows[tag])}"
            )

    def stack(tag: str, shape: tuple[int, ...]) -> np.ndarray | None:
        if not rows[tag]:
            return None
        return np.stack([vec.reshape(shape) for _, vec in rows[tag]])

    params = ModelParams(
        kind=kind,
        dim=dim,
        entity_vecs=stack("e", (dim,)),
        relation_vecs=stack("r", (dim,)),
        normals=stack("w", (dim,)),
        rel_matrices=stack("m", (dim, dim)),
        concept_labels=[label for label, _ in rows["c"]],
        concept_mats=stack("c", (dim, dim)),
        _concept_ids={label: i for i, (label, _) in enumerate(rows["c"])},
    )
    entity_labels = [label for label, _ in rows["e"]]
    relation_labels = [label for label, _ in rows["r"]]
    return params, entity_labels, relation_labels
