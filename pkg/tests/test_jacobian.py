"""Exact Jacobian evaluation and rank computations."""

import random
from fractions import Fraction as F

import pytest

from bnasym.jacobian import (
    build_jacobian,
    evaluate_jacobian,
    float_jacobian,
    float_svd_rank,
    rank_at_point,
    regular_rank,
    sample_interior_point,
    theta_values,
)
from bnasym.algebra import poly_eval
from bnasym.network import (
    build_joint_map,
    naive_bayes_network,
    parse_network,
)

NB22 = naive_bayes_network(2, [2, 2])
NB222 = naive_bayes_network(2, [2, 2, 2])


def _interior(jmap, seed):
    return sample_interior_point(jmap.space, random.Random(seed))


# ---------------------------------------------------------------------------
# evaluation


def test_evaluate_matches_symbolic_partials():
    jmap = build_joint_map(NB22)
    sym = build_jacobian(jmap)
    point = _interior(jmap, 3)
    env = dict(zip(jmap.space.var_names, point))
    mat = evaluate_jacobian(jmap, point)
    for i, row in enumerate(sym.entries):
        for j, partial in enumerate(row):
            assert mat.rows[i][j] == poly_eval(partial, env)


def test_evaluate_accepts_mapping_point():
    jmap = build_joint_map(NB22)
    point = _interior(jmap, 7)
    as_map = dict(zip(jmap.space.var_names, point))
    assert evaluate_jacobian(jmap, point).rows == evaluate_jacobian(jmap, as_map).rows


def test_evaluate_rejects_missing_and_short_points():
    jmap = build_joint_map(NB22)
    with pytest.raises(ValueError):
        evaluate_jacobian(jmap, {"nope": F(1, 2)})
    with pytest.raises(ValueError):
        evaluate_jacobian(jmap, [F(1, 2)])


def test_theta_values_row_sums():
    jmap = build_joint_map(NB222)
    point = _interior(jmap, 1)
    vals = theta_values(jmap, point)
    assert sum(vals) == 1
    assert all(v > 0 for v in vals)


def test_jacobian_rows_sum_to_zero():
    # sum_x theta_x = 1, so every column of the stacked Jacobian sums to 0
    jmap = build_joint_map(NB22)
    mat = evaluate_jacobian(jmap, _interior(jmap, 9))
    cols = len(mat.rows[0])
    for j in range(cols):
        assert sum(row[j] for row in mat.rows) == 0


# ---------------------------------------------------------------------------
# rank


def test_rank_binary_two_features_drops():
    # ds = 5 but the observed joint only has 3 dimensions of freedom
    jmap = build_joint_map(NB22)
    assert regular_rank(jmap, seed=0) == 3


def test_rank_binary_three_features_full():
    jmap = build_joint_map(NB222)
    assert regular_rank(jmap, seed=0) == 7


def test_rank_at_degenerate_point_drops():
    # equal mixture components collapse the map to a product distribution
    jmap = build_joint_map(NB222)
    half = F(1, 2)
    point = [half] * 7
    assert rank_at_point(jmap, point) < 7


def test_rank_at_point_accepts_symbolic():
    jmap = build_joint_map(NB22)
    sym = build_jacobian(jmap)
    point = _interior(jmap, 5)
    assert rank_at_point(sym, point) == rank_at_point(jmap, point)


def test_regular_rank_seed_stable():
    jmap = build_joint_map(NB222)
    assert regular_rank(jmap, seed=4) == regular_rank(jmap, seed=4)


def test_interior_sample_is_interior():
    jmap = build_joint_map(NB222)
    rng = random.Random(0)
    for _ in range(25):
        point = sample_interior_point(jmap.space, rng)
        for block in jmap.space.blocks:
            free = point[block.start : block.start + block.states - 1]
            assert all(0 < v < 1 for v in free)
            assert sum(free) < 1


def test_float_rank_agrees_on_generic_points():
    jmap = build_joint_map(NB222)
    for seed in range(5):
        point = _interior(jmap, seed)
        exact = rank_at_point(jmap, point)
        assert float_svd_rank(float_jacobian(jmap, point)) == exact
