"""Analytic gradients against central finite differences.

For every (model kind, score family) combination the hinge term
margin + s(positive) - s(negative) is differentiated analytically and
compared with (f(x + eps) - f(x - eps)) / (2 eps) on every coordinate of
every touched parameter.  Configurations are redrawn when an intermediate
lands near a non-differentiable point (an L1 kink or a vanishing L2 norm),
where finite differences are meaningless.
"""

import numpy as np
import pytest

from rulekge.kg import Triple
from rulekge.mining import GroundRule, RuleType
from rulekge.models import (
    ModelKind,
    ModelParams,
    Norm,
    hinge_and_gradients,
    init_params_from_sizes,
    project_entity,
    score_sample,
)

EPS = 1e-5
KINK_TOL = 1e-3
N_ENT, N_REL, DIM = 6, 4, 8

FAMILIES = ("triple", "inference", "transitivity", "antisymmetry")


def random_params(rng, kind):
    params = init_params_from_sizes(N_ENT, N_REL, DIM, kind, int(rng.integers(2**31)))
    if kind is ModelKind.TRANSR:
        params.rel_matrices = params.rel_matrices + 0.2 * rng.standard_normal(
            params.rel_matrices.shape
        )
    params.concept_id("c")
    params.concept_mats = params.concept_mats + 0.2 * rng.standard_normal(
        params.concept_mats.shape
    )
    return params


def make_pair(rng, family):
    """A (positive, negative) pair of one family, negative = corrupted head."""
    e = rng.choice(N_ENT, size=4, replace=False)
    r = rng.choice(N_REL, size=3, replace=False)
    if family == "triple":
        pos = Triple(e[0], r[0], e[1])
        neg = Triple(e[2], r[0], e[1])
    elif family == "inference":
        pos = GroundRule(
            RuleType.INFERENCE, (Triple(e[0], r[0], e[1]), Triple(e[0], r[1], e[1])), "c"
        )
        neg = GroundRule(
            RuleType.INFERENCE, (Triple(e[2], r[0], e[1]), Triple(e[2], r[1], e[1])), "c"
        )
    elif family == "transitivity":
        pos = GroundRule(
            RuleType.TRANSITIVITY,
            (Triple(e[0], r[0], e[1]), Triple(e[1], r[1], e[2]), Triple(e[0], r[2], e[2])),
        )
        neg = GroundRule(
            RuleType.TRANSITIVITY,
            (Triple(e[3], r[0], e[1]), Triple(e[1], r[1], e[2]), Triple(e[3], r[2], e[2])),
        )
    else:
        pos = GroundRule(
            RuleType.ANTISYMMETRY, (Triple(e[0], r[0], e[1]), Triple(e[1], r[1], e[0]))
        )
        neg = GroundRule(
            RuleType.ANTISYMMETRY, (Triple(e[2], r[0], e[1]), Triple(e[1], r[1], e[2]))
        )
    return pos, neg


def _residual(params, h, r, t):
    return project_entity(params, h, r) + params.relation_vecs[r] - project_entity(
        params, t, r
    )


def _normed_vector(params, sample):
    """The vector whose norm is the sample's score (kink check target)."""
    if isinstance(sample, Triple):
        return _residual(params, *sample)
    ts = sample.triples
    if sample.rule_type is RuleType.INFERENCE:
        gate = params.entity_vecs[ts[0].head] @ params.concept_mats[0]
        return gate * _residual(params, *ts[0]) - _residual(params, *ts[1])
    if sample.rule_type is RuleType.TRANSITIVITY:
        return _residual(params, *ts[0]) * _residual(params, *ts[1]) - _residual(
            params, *ts[2]
        )
    gap = _residual(params, *ts[0]) - _residual(params, *ts[1])
    return gap * gap


def away_from_kinks(params, pos, neg, norm):
    for sample in (pos, neg):
        v = _normed_vector(params, sample)
        if norm is Norm.L1 and np.abs(v).min() < KINK_TOL:
            return False
        if norm is Norm.L2 and np.sqrt((v * v).sum()) < KINK_TOL:
            return False
        if isinstance(sample, GroundRule) and sample.rule_type is RuleType.ANTISYMMETRY:
            gap = _residual(params, *sample.triples[0]) - _residual(
                params, *sample.triples[1]
            )
            if np.abs(gap).min() < KINK_TOL:
                return False
    return True


def touched_parameters(params, pos, neg):
    keys = set()
    for sample in (pos, neg):
        triples = [sample] if isinstance(sample, Triple) else list(sample.triples)
        for h, r, t in triples:
            keys.add(("e", h))
            keys.add(("e", t))
            keys.add(("r", r))
            if params.kind is ModelKind.TRANSH:
                keys.add(("w", r))
            if params.kind is ModelKind.TRANSR:
                keys.add(("m", r))
        if isinstance(sample, GroundRule) and sample.rule_type is RuleType.INFERENCE:
            keys.add(("c", 0))
    return sorted(keys)


def table_of(params, key_kind):
    return {
        "e": params.entity_vecs,
        "r": params.relation_vecs,
        "w": params.normals,
        "m": params.rel_matrices,
        "c": params.concept_mats,
    }[key_kind]


def finite_difference(params, pos, neg, margin, norm, key):
    kind, idx = key
    table = table_of(params, kind)
    grad = np.zeros_like(table[idx])
    flat = table[idx].reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + EPS
        up = margin + score_sample(params, pos, norm) - score_sample(params, neg, norm)
        flat[i] = original - EPS
        down = margin + score_sample(params, pos, norm) - score_sample(params, neg, norm)
        flat[i] = original
        gflat[i] = (up - down) / (2 * EPS)
    return grad


@pytest.mark.parametrize("kind", list(ModelKind))
@pytest.mark.parametrize("family", FAMILIES)
def test_gradients_match_finite_differences(kind, family, n_configs=100):
    rng = np.random.default_rng(hash((kind.value, family)) % 2**32)
    checked = 0
    attempts = 0
    while checked < n_configs:
        attempts += 1
        assert attempts < 20 * n_configs, "too many kink rejections"
        params = random_params(rng, kind)
        norm = Norm.L1 if rng.random() < 0.5 else Norm.L2
        pos, neg = make_pair(rng, family)
        if not away_from_kinks(params, pos, neg, norm):
            continue
        s_pos = score_sample(params, pos, norm)
        s_neg = score_sample(params, neg, norm)
        margin = max(0.5, s_neg - s_pos + 0.5)  # hinge active, away from its kink
        hinge, analytic = hinge_and_gradients(params, pos, neg, margin, norm)
        assert hinge > 0
        for key in touched_parameters(params, pos, neg):
            fd = finite_difference(params, pos, neg, margin, norm, key)
            got = analytic.get(key)
            if got is None:
                got = np.zeros_like(fd)
            np.testing.assert_allclose(
                got, fd, rtol=1e-4, atol=1e-7,
                err_msg=f"{kind.value}/{family}/{norm.value} param {key}",
            )
        checked += 1


def test_margin_satisfied_means_no_gradient():
    rng = np.random.default_rng(0)
    params = random_params(rng, ModelKind.TRANSE)
    pos, neg = make_pair(rng, "triple")
    s_pos = score_sample(params, pos, Norm.L1)
    s_neg = score_sample(params, neg, Norm.L1)
    margin = min(0.01, max(0.001, (s_neg - s_pos) / 2))
    if margin + s_pos - s_neg > 0:
        pos, neg = neg, pos  # ensure satisfied side
    hinge, grads = hinge_and_gradients(params, pos, neg, margin, Norm.L1)
    if hinge == 0:
        assert grads == {}


def test_transe_l2_head_gradient_is_normalized_residual():
    params = ModelParams(
        kind=ModelKind.TRANSE,
        dim=3,
        entity_vecs=np.array([[0.3, -0.2, 0.5], [0.0, 0.1, -0.4], [0.9, 0.0, 0.0]]),
        relation_vecs=np.array([[0.2, 0.2, 0.2]]),
    )
    pos = Triple(0, 0, 1)
    neg = Triple(2, 0, 1)
    _, grads = hinge_and_gradients(params, pos, neg, margin=10.0, norm=Norm.L2)
    v = params.entity_vecs[0] + params.relation_vecs[0] - params.entity_vecs[1]
    np.testing.assert_allclose(grads[("e", 0)], v / np.linalg.norm(v), rtol=1e-12)
