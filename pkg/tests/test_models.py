import numpy as np
import pytest

from rulekge.kg import Triple
from rulekge.mining import GroundRule, RuleType
from rulekge.models import (
    ModelKind,
    ModelParams,
    Norm,
    init_params,
    init_params_from_sizes,
    project_entity,
    score_antisymmetry_rule,
    score_ground_rule,
    score_inference_rule,
    score_transitivity_rule,
    score_triple,
)

from conftest import graph_from


def make_params(kind, ent, rel, normals=None, mats=None):
    ent = np.asarray(ent, dtype=float)
    rel = np.asarray(rel, dtype=float)
    d = ent.shape[1]
    return ModelParams(
        kind=kind,
        dim=d,
        entity_vecs=ent,
        relation_vecs=rel,
        normals=None if normals is None else np.asarray(normals, dtype=float),
        rel_matrices=None if mats is None else np.asarray(mats, dtype=float),
    )


def random_params(rng, kind, n_ent=6, n_rel=4, d=4):
    params = init_params_from_sizes(n_ent, n_rel, d, kind, int(rng.integers(2**31)))
    # non-identity matrices so TransR is exercised properly
    if kind is ModelKind.TRANSR:
        params.rel_matrices = params.rel_matrices + 0.3 * rng.standard_normal(
            params.rel_matrices.shape
        )
    return params


class TestInit:
    def test_deterministic_under_seed(self):
        g = graph_from([(0, 0, 1), (1, 1, 2)])
        a = init_params(g, 8, ModelKind.TRANSH, seed=42)
        b = init_params(g, 8, ModelKind.TRANSH, seed=42)
        assert np.array_equal(a.entity_vecs, b.entity_vecs)
        assert np.array_equal(a.relation_vecs, b.relation_vecs)
        assert np.array_equal(a.normals, b.normals)

    def test_transe_has_no_extra_tables(self):
        g = graph_from([(0, 0, 1)])
        p = init_params(g, 4, ModelKind.TRANSE, seed=1)
        assert p.normals is None and p.rel_matrices is None

    def test_invariants_hold_after_init(self):
        g = graph_from([(0, 0, 1), (1, 1, 2), (2, 2, 0)])
        for kind in ModelKind:
            p = init_params(g, 5, kind, seed=9)
            assert (np.linalg.norm(p.entity_vecs, axis=1) <= 1 + 1e-12).all()
            assert (np.linalg.norm(p.relation_vecs, axis=1) <= 1 + 1e-12).all()
            if kind is ModelKind.TRANSH:
                assert np.allclose(np.linalg.norm(p.normals, axis=1), 1.0)
            if kind is ModelKind.TRANSR:
                assert np.allclose(p.rel_matrices, np.eye(5))

    def test_zero_dim_rejected(self):
        g = graph_from([(0, 0, 1)])
        with pytest.raises(ValueError):
            init_params(g, 0, ModelKind.TRANSE, seed=0)


class TestProjection:
    def test_orthogonal_entity_unchanged(self):
        p = make_params(
            ModelKind.TRANSH, [[0.0, 0.5]], [[0.0, 0.0]], normals=[[1.0, 0.0]]
        )
        assert np.allclose(project_entity(p, 0, 0), [0.0, 0.5])

    def test_parallel_entity_projects_to_zero(self):
        p = make_params(
            ModelKind.TRANSH, [[1.0, 0.0]], [[0.0, 0.0]], normals=[[1.0, 0.0]]
        )
        assert np.allclose(project_entity(p, 0, 0), [0.0, 0.0])

    def test_identity_matrix_is_noop(self):
        p = make_params(
            ModelKind.TRANSR, [[0.3, 0.4]], [[0.0, 0.0]], mats=[np.eye(2)]
        )
        assert np.allclose(project_entity(p, 0, 0), [0.3, 0.4])


class TestTripleScore:
    def test_exact_translation_scores_zero(self):
        p = make_params(ModelKind.TRANSE, [[0.5, 0.0], [0.5, 0.5]], [[0.0, 0.5]])
        for norm in Norm:
            assert score_triple(p, Triple(0, 0, 1), norm) == pytest.approx(0.0)

    def test_hand_evaluated_values(self):
        p = make_params(ModelKind.TRANSE, [[1.0, 0.0], [0.0, 1.0]], [[0.0, 0.0]])
        assert score_triple(p, Triple(0, 0, 1), Norm.L1) == pytest.approx(2.0)
        assert score_triple(p, Triple(0, 0, 1), Norm.L2) == pytest.approx(np.sqrt(2))

    def test_transr_identity_matches_transe(self):
        rng = np.random.default_rng(3)
        ent = rng.normal(size=(4, 3))
        rel = rng.normal(size=(2, 3))
        pe = make_params(ModelKind.TRANSE, ent, rel)
        pr = make_params(ModelKind.TRANSR, ent, rel, mats=np.tile(np.eye(3), (2, 1, 1)))
        for norm in Norm:
            assert score_triple(pr, Triple(0, 1, 2), norm) == pytest.approx(
                score_triple(pe, Triple(0, 1, 2), norm)
            )


def inference_ground(h, r1, t, r2, concept="c"):
    return GroundRule(RuleType.INFERENCE, (Triple(h, r1, t), Triple(h, r2, t)), concept)


def transitivity_ground(e1, r1, e2, r2, e3, r3):
    return GroundRule(
        RuleType.TRANSITIVITY,
        (Triple(e1, r1, e2), Triple(e2, r2, e3), Triple(e1, r3, e3)),
    )


def antisymmetry_ground(h, r1, t, r2):
    return GroundRule(RuleType.ANTISYMMETRY, (Triple(h, r1, t), Triple(t, r2, h)))


class TestInferenceScore:
    def test_hand_evaluated(self):
        # h=[1,0], t=[0,0], r1=[0,1], r2=[1,1], identity concept matrix:
        # body [1,1], gated [1,0]; head [2,1]; difference L1 = 2
        p = make_params(
            ModelKind.TRANSE, [[1.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 1.0]]
        )
        assert score_inference_rule(p, inference_ground(0, 0, 1, 1), Norm.L1) == pytest.approx(2.0)

    def test_zero_residuals_score_zero(self):
        p = make_params(ModelKind.TRANSE, [[0.4, 0.2], [0.4, 0.2]], [[0.0, 0.0], [0.0, 0.0]])
        assert score_inference_rule(p, inference_ground(0, 0, 1, 1), Norm.L1) == pytest.approx(0.0)

    def test_transr_identity_matches_transe(self):
        rng = np.random.default_rng(5)
        ent = rng.normal(size=(3, 4))
        rel = rng.normal(size=(3, 4))
        pe = make_params(ModelKind.TRANSE, ent, rel)
        pr = make_params(ModelKind.TRANSR, ent, rel, mats=np.tile(np.eye(4), (3, 1, 1)))
        g = inference_ground(0, 0, 2, 1)
        for norm in Norm:
            assert score_inference_rule(pr, g, norm) == pytest.approx(
                score_inference_rule(pe, g, norm)
            )

    def test_concept_matrix_autoallocated(self):
        p = make_params(ModelKind.TRANSE, [[1.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 1.0]])
        assert p.n_concepts == 0
        score_inference_rule(p, inference_ground(0, 0, 1, 1, concept="fresh"), Norm.L1)
        assert p.concept_labels == ["fresh"]
        assert np.allclose(p.concept_mats[0], np.eye(2))


class TestTransitivityScore:
    def test_perfect_chain(self):
        # d=1: e1=0.5, e2=0, e3=0, r1=0.5, r2=1, r3=0.5 -> body 1*1, head 1
        p = make_params(
            ModelKind.TRANSE, [[0.5], [0.0], [0.0]], [[0.5], [1.0], [0.5]]
        )
        g = transitivity_ground(0, 0, 1, 1, 2, 2)
        assert score_transitivity_rule(p, g, Norm.L1) == pytest.approx(0.0)

    def test_hand_evaluated_residuals(self):
        # d=1 residuals 2, 3 and closing 5 -> |2*3 - 5| = 1
        p = make_params(
            ModelKind.TRANSE, [[2.0], [0.0], [-1.0]], [[0.0], [2.0], [2.0]]
        )
        g = transitivity_ground(0, 0, 1, 1, 2, 2)
        assert score_transitivity_rule(p, g, Norm.L1) == pytest.approx(1.0)


class TestAntisymmetryScore:
    def test_symmetric_case_scores_zero(self):
        rng = np.random.default_rng(1)
        p = make_params(ModelKind.TRANSE, rng.normal(size=(2, 3)), rng.normal(size=(1, 3)))
        g = GroundRule(RuleType.ANTISYMMETRY, (Triple(0, 0, 0), Triple(0, 0, 0)))
        assert score_antisymmetry_rule(p, g, Norm.L1) == pytest.approx(0.0)

    def test_hand_evaluated(self):
        # forward [1,0], backward [0,0] -> gap [1,0], squared L1 = 1
        p = make_params(
            ModelKind.TRANSE, [[0.5, 0.0], [0.0, 0.0]], [[0.5, 0.0], [0.5, 0.0]]
        )
        g = antisymmetry_ground(0, 0, 1, 1)
        assert score_antisymmetry_rule(p, g, Norm.L1) == pytest.approx(1.0)

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(2)
        ent = rng.normal(size=(2, 3))
        g = antisymmetry_ground(0, 0, 1, 1)
        base_rel = rng.normal(size=(2, 3))
        p1 = make_params(ModelKind.TRANSE, ent * 0, base_rel)
        s1 = score_antisymmetry_rule(p1, g, Norm.L1)
        p3 = make_params(ModelKind.TRANSE, ent * 0, base_rel * 3)
        s3 = score_antisymmetry_rule(p3, g, Norm.L1)
        assert s3 == pytest.approx(9 * s1)

    def test_swap_invariance(self):
        rng = np.random.default_rng(4)
        for kind in ModelKind:
            p = random_params(rng, kind)
            a = GroundRule(RuleType.ANTISYMMETRY, (Triple(0, 0, 1), Triple(1, 1, 0)))
            b = GroundRule(RuleType.ANTISYMMETRY, (Triple(1, 1, 0), Triple(0, 0, 1)))
            for norm in Norm:
                assert score_ground_rule(p, a, norm) == pytest.approx(
                    score_ground_rule(p, b, norm), abs=1e-12
                )


class TestScoreProperties:
    def test_non_negativity_everywhere(self):
        rng = np.random.default_rng(8)
        grounds = [
            inference_ground(0, 0, 1, 1),
            transitivity_ground(0, 0, 1, 1, 2, 2),
            antisymmetry_ground(0, 0, 1, 1),
        ]
        for kind in ModelKind:
            for _ in range(25):
                p = random_params(rng, kind)
                p.concept_mats = None
                p.concept_labels = []
                p._concept_ids = {}
                for norm in Norm:
                    assert score_triple(p, Triple(0, 2, 1), norm) >= 0
                    for g in grounds:
                        assert score_ground_rule(p, g, norm) >= 0

    def test_equal_triple_scores_do_not_pin_rule_scores(self):
        # two entity pairs whose translation residuals are permutations of
        # each other: identical triple scores, different inference scores
        ent = [[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [-1.0, 1.0]]
        rel = [[0.0, 1.0], [0.0, 0.0]]
        p = make_params(ModelKind.TRANSE, ent, rel)
        t1, t2 = Triple(0, 0, 1), Triple(2, 0, 3)
        for norm in Norm:
            assert score_triple(p, t1, norm) == pytest.approx(score_triple(p, t2, norm))
        s1 = score_inference_rule(p, inference_ground(0, 0, 1, 1), Norm.L1)
        s2 = score_inference_rule(p, inference_ground(2, 0, 3, 1), Norm.L1)
        assert s1 == pytest.approx(0.0)
        assert s2 == pytest.approx(2.0)
        assert abs(s1 - s2) > 1.0

    def test_rule_scores_recomposable_from_triple_residuals(self):
        # with identity concept matrices and identity projections, every rule
        # score is an algebraic composition of the triple residuals
        rng = np.random.default_rng(6)

        def residual(p, h, r, t):
            return (
                project_entity(p, h, r) + p.relation_vecs[r] - project_entity(p, t, r)
            )

        for kind in (ModelKind.TRANSE, ModelKind.TRANSR):
            ent = rng.normal(size=(4, 3))
            rel = rng.normal(size=(3, 3))
            mats = np.tile(np.eye(3), (3, 1, 1)) if kind is ModelKind.TRANSR else None
            p = make_params(kind, ent, rel, mats=mats)
            for norm in Norm:
                def nval(v):
                    return np.abs(v).sum() if norm is Norm.L1 else np.sqrt((v * v).sum())

                gi = inference_ground(0, 0, 1, 1)
                expect = nval(
                    p.entity_vecs[0] * residual(p, 0, 0, 1) - residual(p, 0, 1, 1)
                )
                assert score_inference_rule(p, gi, norm) == pytest.approx(expect)

                gt = transitivity_ground(0, 0, 1, 1, 2, 2)
                expect = nval(
                    residual(p, 0, 0, 1) * residual(p, 1, 1, 2) - residual(p, 0, 2, 2)
                )
                assert score_transitivity_rule(p, gt, norm) == pytest.approx(expect)

                ga = antisymmetry_ground(0, 0, 1, 1)
                gap = residual(p, 0, 0, 1) - residual(p, 1, 1, 0)
                assert score_antisymmetry_rule(p, ga, norm) == pytest.approx(
                    nval(gap * gap)
                )
