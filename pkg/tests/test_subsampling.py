"""Complementary-pair plans: invariants, determinism, restriction."""

import numpy as np
import pytest

from cssel.data import DataSet
from cssel.subsampling import (
    SubsamplePlan,
    draw_complementary_pairs,
    draw_half_samples,
    restrict,
)


def test_pairs_are_disjoint_half_samples():
    for n in (10, 11, 200):
        plan = draw_complementary_pairs(n, B=13, seed=3)
        assert plan.n == n and plan.B == 13
        m = n // 2
        for first, second in plan.pairs:
            assert len(first) == m and len(second) == m
            assert not set(first) & set(second)
            assert set(first) | set(second) <= set(range(n))
            assert list(first) == sorted(first)
            assert list(second) == sorted(second)


def test_even_n_pairs_cover_all_rows():
    plan = draw_complementary_pairs(12, B=5, seed=0)
    for first, second in plan.pairs:
        assert sorted(first + second) == list(range(12))


def test_odd_n_leaves_one_row_out_per_pair():
    plan = draw_complementary_pairs(11, B=20, seed=1)
    left_out = [set(range(11)) - set(a) - set(b) for a, b in plan.pairs]
    assert all(len(s) == 1 for s in left_out)
    # the left-out row varies across pairs
    assert len(set(frozenset(s) for s in left_out)) > 1


def test_same_seed_same_plan_different_seed_differs():
    a = draw_complementary_pairs(30, B=8, seed=5)
    b = draw_complementary_pairs(30, B=8, seed=5)
    c = draw_complementary_pairs(30, B=8, seed=6)
    assert a.pairs == b.pairs
    assert a.pairs != c.pairs


def test_pair_index_keys_the_stream():
    """Prefix stability: growing B keeps the existing pairs unchanged."""
    small = draw_complementary_pairs(40, B=3, seed=9)
    big = draw_complementary_pairs(40, B=10, seed=9)
    assert big.pairs[:3] == small.pairs


def test_plan_validation_rejects_malformed_pairs():
    with pytest.raises(ValueError):
        SubsamplePlan(n=6, B=1, pairs=(((0, 1, 2), (2, 3, 4)),))  # overlap
    with pytest.raises(ValueError):
        SubsamplePlan(n=6, B=1, pairs=(((0, 1), (2, 3)),))  # wrong size
    with pytest.raises(ValueError):
        SubsamplePlan(n=6, B=1, pairs=(((0, 1, 9), (2, 3, 4)),))  # out of range


def test_plan_json_round_trip_fields():
    plan = draw_complementary_pairs(8, B=2, seed=4)
    doc = plan.to_json_dict()
    assert doc["n"] == 8 and doc["B"] == 2
    rebuilt = SubsamplePlan(
        n=doc["n"],
        B=doc["B"],
        pairs=tuple((tuple(a), tuple(b)) for a, b in doc["pairs"]),
    )
    assert rebuilt.pairs == plan.pairs


def test_draw_half_samples_matches_pair_first_halves():
    halves = draw_half_samples(20, B=6, seed=2)
    plan = draw_complementary_pairs(20, B=6, seed=2)
    assert halves == [pair[0] for pair in plan.pairs]


def test_too_small_n_rejected():
    with pytest.raises(ValueError):
        draw_complementary_pairs(3, B=1, seed=0)
    with pytest.raises(ValueError):
        draw_complementary_pairs(10, B=0, seed=0)


def test_restrict_selects_rows_and_keeps_metadata():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((10, 3))
    y = rng.standard_normal(10)
    data = DataSet(X=X, y=y, feature_names=("a", "b", "c"), center=True)
    sub = restrict(data, (7, 2, 5))
    assert sub.n == 3
    assert np.array_equal(sub.X, X[[2, 5, 7]])  # ascending order
    assert np.array_equal(sub.y, y[[2, 5, 7]])
    assert sub.feature_names == ("a", "b", "c")
    assert sub.center is True
