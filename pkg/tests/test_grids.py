import numpy as np
import pytest

from framelab.utils.grids import (
    clip_intervals,
    doubling_grids,
    exp_sums,
    merge_intervals,
    midpoint_grid,
    overlap_fractions,
    total_length,
)


def test_midpoint_grid():
    nodes, h = midpoint_grid(0.0, 1.0, 4)
    assert h == 0.25
    assert np.allclose(nodes, [0.125, 0.375, 0.625, 0.875])


def test_merge_intervals_any_order():
    merged = merge_intervals([[2, 3], [0, 1], [0.5, 1.5], [-3, -2]])
    assert np.array_equal(merged, [[-3, -2], [0, 1.5], [2, 3]])


def test_merge_closes_small_gaps():
    assert np.array_equal(merge_intervals([[0, 1], [1.05, 2]], tol=0.1), [[0, 2]])
    assert len(merge_intervals([[0, 1], [1.05, 2]])) == 2


def test_merge_nested_intervals():
    assert np.array_equal(merge_intervals([[0, 10], [1, 2], [3, 4]]), [[0, 10]])
    assert merge_intervals([]).shape == (0, 2)


def test_clip_and_length():
    iv = clip_intervals([[0, 1], [2, 3]], 0.5, 2.5)
    assert np.array_equal(iv, [[0.5, 1], [2, 2.5]])
    assert total_length(iv) == 1.0
    assert clip_intervals([[0, 1]], 2, 3).shape == (0, 2)


def test_overlap_fractions():
    assert np.allclose(overlap_fractions(np.array([0.0, 1.0, 2.0, 3.0]), 0.5, 2.0), [0.5, 1.0, 0.0])


def test_exp_sums_chunking_matches_direct():
    rng = np.random.default_rng(3)
    nodes = rng.uniform(0, 1, 50)
    weights = rng.uniform(0, 1, 50)
    freqs = np.linspace(-20, 20, 37)
    direct = np.exp(-2j * np.pi * np.outer(freqs, nodes)) @ weights
    assert np.allclose(exp_sums(nodes, weights, freqs, chunk_elements=64), direct)
    assert exp_sums(nodes, weights, 0.0)[0] == pytest.approx(weights.sum())


def test_doubling_grids():
    assert doubling_grids(64, 3) == [64, 128, 256]
    assert doubling_grids(64, 0) == [64]
