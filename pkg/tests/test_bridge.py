import numpy as np
import pytest

from kgfa.bridge import (BLOCKS, Dims, JointParams, affine_map, assemble_loadings, fa_params,
                         joint_objective, pack, unpack)
from kgfa.errors import ConfigurationError
from kgfa.fa import fa_marginal_nll
from kgfa.kg import KnowledgeGraph, kg_objective

from conftest import central_diff, random_kg, rel_err


def random_joint(rng, dims: Dims, scale=0.7):
    return JointParams(*(rng.normal(scale=scale, size=s) for s in dims.shapes().values()))


def small_problem(rng, E=6, m=5, n_tied=3, n=12, d_x=2, d_e=2):
    kg = random_kg(rng, n_entities=E, n_tuples=8, n_attr=n_tied)
    dims = Dims.for_problem(kg, m, d_x, d_e)
    Y = rng.normal(size=(n, m))
    neg = rng.integers(0, [E, kg.n_relations, E], size=(16, 3))
    return kg, dims, Y, neg


def test_affine_map_examples(rng):
    np.testing.assert_array_equal(affine_map(np.zeros((2, 3)), [1, 2], rng.normal(size=3)), [1, 2])
    e = rng.normal(size=4)
    np.testing.assert_array_equal(affine_map(np.eye(4), np.zeros(4), e), e)
    A, b, e = rng.normal(size=(3, 5)), rng.normal(size=3), rng.normal(size=5)
    loop = [sum(A[i, k] * e[k] for k in range(5)) + b[i] for i in range(3)]
    np.testing.assert_allclose(affine_map(A, b, e), loop, rtol=1e-14)
    with pytest.raises(ValueError):
        affine_map(A, b, rng.normal(size=4))


def test_assemble_untied_is_free_loadings(rng):
    kg = KnowledgeGraph(["a", "b"], ["r"], [(0, 0, 1)])
    joint = random_joint(rng, Dims.for_problem(kg, 4, 3, 2))
    np.testing.assert_array_equal(assemble_loadings(joint, kg), joint.free_loadings)


def test_assemble_all_tied_constant_rows(rng):
    kg = KnowledgeGraph(["a", "b", "c"], ["r"], [(0, 0, 1), (1, 0, 2)], {0: 0, 1: 1, 2: 2})
    joint = random_joint(rng, Dims.for_problem(kg, 3, 2, 2))
    joint.A[:] = 0
    np.testing.assert_array_equal(assemble_loadings(joint, kg), np.tile(joint.b, (3, 1)))


def test_assemble_rows_match_affine_oracle(rng):
    kg = KnowledgeGraph([f"e{i}" for i in range(6)], ["r"], [(0, 0, 1)], {0: 4, 2: 1, 3: 5})
    joint = random_joint(rng, Dims.for_problem(kg, 5, 3, 2))
    W = assemble_loadings(joint, kg)
    for col, ent in kg.attribute_entity.items():
        np.testing.assert_allclose(W[col], joint.A @ joint.embeddings[ent] + joint.b, rtol=1e-14)
    np.testing.assert_array_equal(W[[1, 4]], joint.free_loadings)
    np.testing.assert_array_equal(assemble_loadings(joint, kg), W)  # idempotent


def test_assemble_shape_errors(rng):
    kg = KnowledgeGraph(["a", "b"], ["r"], [(0, 0, 1)], {7: 0})
    joint = random_joint(rng, Dims(2, 1, 2, 2, 3, 1))
    with pytest.raises(ConfigurationError):
        assemble_loadings(joint, kg)


def test_pack_roundtrip_and_length(rng):
    kg, dims, _, _ = small_problem(rng)
    joint = random_joint(rng, dims)
    v = pack(joint)
    E, R, de, dx, m, mt = 6, 2, 2, 2, 5, 3
    assert v.size == E * de + R * de + dx * de + dx + 2 * m + (m - mt) * dx == dims.size
    back = unpack(v, dims)
    for name in BLOCKS:
        np.testing.assert_array_equal(getattr(back, name), getattr(joint, name))
    assert back.dims == dims
    with pytest.raises(ValueError):
        unpack(v[:-1], dims)


def test_pack_coordinates_map_to_single_entries():
    dims = Dims(2, 1, 2, 1, 2, 1)
    base = unpack(np.zeros(dims.size), dims)
    for i in range(dims.size):
        v = np.zeros(dims.size)
        v[i] = 1.0
        changed = [(name, np.flatnonzero(getattr(unpack(v, dims), name) != getattr(base, name)))
                   for name in BLOCKS]
        changed = [c for c in changed if c[1].size]
        assert len(changed) == 1 and changed[0][1].size == 1


def test_objective_without_tuples_is_fa_likelihood(rng):
    kg, dims, Y, _ = small_problem(rng)
    joint = random_joint(rng, dims)
    val, _ = joint_objective(joint, Y, [], [], kg)
    assert val == -fa_marginal_nll(Y, fa_params(joint, kg))


def test_objective_is_sum_of_terms(rng):
    kg, dims, Y, neg = small_problem(rng)
    joint = random_joint(rng, dims)
    val, _ = joint_objective(joint, Y, kg.triples, neg, kg)
    kv = kg_objective(joint.embeddings, joint.relations, kg.triples, neg)[0]
    assert val == pytest.approx(-fa_marginal_nll(Y, fa_params(joint, kg)) + kv, rel=1e-14)


def test_no_tied_rows_gives_zero_affine_gradient(rng):
    kg = random_kg(rng, n_entities=5, n_attr=0, n_tuples=6)
    dims = Dims.for_problem(kg, 4, 2, 2)
    joint = random_joint(rng, dims)
    _, g = joint_objective(joint, rng.normal(size=(9, 4)), [], [], kg)
    assert not g.A.any() and not g.b.any() and not g.embeddings.any()


def test_gradient_routing(rng):
    kg, dims, Y, neg = small_problem(rng)
    joint = random_joint(rng, dims)
    _, g_fa = joint_objective(joint, Y, [], [], kg)
    _, g_all = joint_objective(joint, Y, kg.triples, neg, kg)
    tied = list(kg.attribute_entity.values())
    other = [e for e in range(kg.n_entities) if e not in tied]
    # non-attribute entities feel only the KG; free rows feel only the data
    assert not g_fa.embeddings[other].any()
    np.testing.assert_array_equal(g_fa.free_loadings, g_all.free_loadings)
    np.testing.assert_array_equal(g_fa.A, g_all.A)


@pytest.mark.parametrize("seed", range(50))
def test_joint_gradient_finite_difference(seed):
    rng = np.random.default_rng(seed)
    kg, dims, Y, neg = small_problem(rng)
    x = pack(random_joint(rng, dims))
    fd = central_diff(lambda v: joint_objective(unpack(v, dims), Y, kg.triples, neg, kg)[0], x)
    _, g = joint_objective(unpack(x, dims), Y, kg.triples, neg, kg)
    assert rel_err(pack(g), fd) < 1e-5


def test_unequal_latent_and_embedding_dims(rng):
    kg, dims, Y, neg = small_problem(rng, d_x=3, d_e=2)
    x = pack(random_joint(rng, dims))
    fd = central_diff(lambda v: joint_objective(unpack(v, dims), Y, kg.triples, neg, kg)[0], x)
    assert rel_err(pack(joint_objective(unpack(x, dims), Y, kg.triples, neg, kg)[1]), fd) < 1e-5


def test_objective_invariant_to_relabeling_other_entities(rng):
    kg, dims, Y, neg = small_problem(rng, E=7)
    joint = random_joint(rng, dims)
    val, _ = joint_objective(joint, Y, kg.triples, neg, kg)
    # permute the non-attribute entities 3..6
    perm = np.arange(7)
    perm[3:] = rng.permutation(np.arange(3, 7))  # old index -> new index
    emb = np.empty_like(joint.embeddings)
    emb[perm] = joint.embeddings
    relabel = lambda T: np.column_stack([perm[T[:, 0]], T[:, 1], perm[T[:, 2]]])
    kg2 = KnowledgeGraph(kg.entities, kg.relations, relabel(kg.triples), kg.attribute_entity)
    j2 = joint.copy()
    j2.embeddings = emb
    val2, _ = joint_objective(j2, Y, kg2.triples, relabel(neg), kg2)
    assert val2 == pytest.approx(val, rel=1e-13)
