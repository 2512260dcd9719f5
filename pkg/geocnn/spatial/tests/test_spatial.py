from __future__ import annotations

import math

import numpy as np
import pytest

from geocnn.rng import Xoshiro256

from ..index import build_index
from ..neighborhood import (
    NeighborhoodSet,
    ball_query,
    knn_query,
    knn_table,
    radius_neighborhoods,
)


def random_positions(seed: int, n: int, scale: float = 1.0) -> np.ndarray:
    return (Xoshiro256(seed).random(3 * n).reshape(n, 3) * 2.0 - 1.0) * scale


def brute_ball(pos: np.ndarray, i: int, r: float) -> list[int]:
    dist = np.linalg.norm(pos - pos[i], axis=1)
    ok = np.flatnonzero((dist <= r) & (dist > 0))
    return [int(j) for j in ok[np.lexsort((ok, dist[ok]))]]


def brute_knn(pos: np.ndarray, i: int, k: int) -> list[int]:
    n = len(pos)
    dist = np.linalg.norm(pos - pos[i], axis=1)
    idx = np.arange(n)
    order = idx[np.lexsort((idx, dist))]
    if n > k:
        return [int(j) for j in order[order != i][:k]]
    return [int(order[m % n]) for m in range(k)]


def test_build_index_single_point():
    index = build_index([[0.3, -0.2, 5.0]], 0.5)
    assert len(index.grid) == 1
    np.testing.assert_array_equal(next(iter(index.grid.values())), [0])


def test_build_index_one_cell():
    pos = random_positions(0, 50, scale=0.05)
    index = build_index(pos, 1.0)
    assert len(index.grid) == 1
    np.testing.assert_array_equal(next(iter(index.grid.values())), np.arange(50))


def test_build_index_partition():
    index = build_index(random_positions(1, 500), 0.2)
    members = np.concatenate(list(index.grid.values()))
    assert len(members) == 500
    assert set(members.tolist()) == set(range(500))
    for cell, idx in index.grid.items():
        np.testing.assert_array_equal(np.sort(idx), idx)
        assert np.all(index.cell_coords(index.positions[idx]) == cell)


@pytest.mark.parametrize(
    ('positions', 'cell_size', 'match'),
    [
        ([[0, 0, np.nan]], 1.0, 'non-finite position at row 0'),
        ([[0, 0, 0]], 0.0, 'cell size must be positive'),
        (np.zeros((0, 3)), 1.0, 'n x 3 matrix'),
        ([[0, 0]], 1.0, 'n x 3 matrix'),
    ],
)
def test_build_index_errors(positions, cell_size, match):
    with pytest.raises(ValueError, match=match):
        build_index(positions, cell_size)


def test_ball_query_examples():
    index = build_index([[0, 0, 0], [0.1, 0, 0], [2, 0, 0]], 0.5)
    nb = ball_query(index, 0, 0.5)
    assert nb.indices.tolist() == [1]
    np.testing.assert_allclose(nb.edges, [[0.1, 0, 0]])
    np.testing.assert_allclose(nb.distances, [0.1])
    assert ball_query(index, 0, 0.05).indices.tolist() == []
    with pytest.raises(ValueError, match='out of range'):
        ball_query(index, 3, 0.5)
    with pytest.raises(ValueError, match='radius must be positive'):
        ball_query(index, 0, 0.0)


def test_ball_query_boundary_and_duplicates():
    index = build_index([[0, 0, 0], [0.5, 0, 0], [0, 0, 0], [0, 0.25, 0]], 0.5)
    # boundary included, coincident point excluded
    assert ball_query(index, 0, 0.5).indices.tolist() == [3, 1]


def test_ball_query_cap():
    pos = [[0, 0, 0], [0.3, 0, 0], [0, 0.1, 0], [0, 0, -0.1], [0.2, 0, 0]]
    index = build_index(pos, 0.5)
    # equal distances, lower index first
    assert ball_query(index, 0, 0.5, cap=3).indices.tolist() == [2, 3, 4]
    assert ball_query(index, 0, 0.5).indices.tolist() == [2, 3, 4, 1]


def test_knn_examples():
    index = build_index([[0, 0, 0], [1, 0, 0], [1.5, 0, 0]], 0.5)
    assert knn_query(index, 1, 1).tolist() == [2]
    assert sorted(knn_query(index, 1, 2).tolist()) == [0, 2]
    # fewer points than k: center first, then repeated cyclically
    assert knn_query(index, 1, 5).tolist() == [1, 2, 0, 1, 2]
    assert knn_table(index, 5)[1].tolist() == [1, 2, 0, 1, 2]
    # the whole sorted list repeats, not just the nearest point
    assert knn_query(index, 0, 7).tolist() == [0, 1, 2, 0, 1, 2, 0]
    with pytest.raises(ValueError, match='k must be positive'):
        knn_query(index, 0, 0)


def test_oracle_equivalence():
    rng = Xoshiro256(7)
    for trial in range(100):
        n = 1 + rng.below(500) if trial % 10 == 0 else 1 + rng.below(150)
        r = 0.1 + 0.5 * rng.uniform()
        k = 1 + rng.below(20)
        pos = random_positions(1000 + trial, n)
        index = build_index(pos, r)
        nbrs = radius_neighborhoods(index, r, cap=None)
        knn = knn_table(index, k)
        assert nbrs.n_points == n
        for i in range(n):
            expected = brute_ball(pos, i, r)
            assert nbrs[i].indices.tolist() == expected
            assert knn[i].tolist() == brute_knn(pos, i, k)
        for i in range(0, n, max(1, n // 5)):
            assert ball_query(index, i, r).indices.tolist() == brute_ball(pos, i, r)
            assert knn_query(index, i, k).tolist() == brute_knn(pos, i, k)


def test_neighborhood_invariants():
    pos = random_positions(3, 300)
    index = build_index(pos, 0.3)
    nbrs = radius_neighborhoods(index, 0.3, cap=None)
    assert np.all(nbrs.distances <= 0.3)
    assert np.all(nbrs.distances > 0)
    np.testing.assert_allclose(
        np.linalg.norm(nbrs.edges, axis=1), nbrs.distances, atol=1e-12
    )
    np.testing.assert_array_equal(
        nbrs.edges, pos[nbrs.indices] - pos[nbrs.centers]
    )
    pairs = set(zip(nbrs.centers.tolist(), nbrs.indices.tolist()))
    # symmetry of uncapped neighborhoods
    assert all((j, i) in pairs for i, j in pairs)


def test_monotonicity():
    pos = random_positions(4, 300)
    index = build_index(pos, 0.2)
    small = radius_neighborhoods(index, 0.1, cap=None)
    large = radius_neighborhoods(index, 0.2, cap=None)
    for i in range(300):
        assert set(small[i].indices.tolist()) <= set(large[i].indices.tolist())


def test_radius_neighborhoods_cap_and_cell_size():
    pos = random_positions(5, 400)
    r = 0.5
    # cell size need not match the radius
    index = build_index(pos, 0.17)
    nbrs = radius_neighborhoods(index, r, cap=16)
    assert nbrs.counts.max() == 16
    for i in range(0, 400, 37):
        assert nbrs[i].indices.tolist() == brute_ball(pos, i, r)[:16]


def test_empty_neighborhoods_logged(caplog):
    index = build_index([[0, 0, 0], [1, 0, 0]], 0.1)
    nbrs = radius_neighborhoods(index, 0.1)
    assert nbrs.n_edges == 0
    assert nbrs.counts.tolist() == [0, 0]
    assert 'No point has a neighbor' in caplog.text


def test_concat():
    pos_a = random_positions(6, 30)
    pos_b = random_positions(7, 20)
    a = radius_neighborhoods(build_index(pos_a, 0.6), 0.6)
    b = radius_neighborhoods(build_index(pos_b, 0.6), 0.6)
    both = NeighborhoodSet.concat([a, b])
    direct = radius_neighborhoods(
        build_index(np.vstack([pos_a, pos_b + 100.0]), 0.6), 0.6
    )
    assert both.n_points == 50
    np.testing.assert_array_equal(both.offsets, direct.offsets)
    np.testing.assert_array_equal(both.indices, direct.indices)
    np.testing.assert_array_equal(both.distances[: a.n_edges], a.distances)
    np.testing.assert_array_equal(both[35].indices, b[5].indices + 30)
    with pytest.raises(ValueError, match='different radii'):
        NeighborhoodSet.concat([a, radius_neighborhoods(build_index(pos_b, 1), 1)])
    with pytest.raises(ValueError, match='at least one'):
        NeighborhoodSet.concat([])


def test_rotate_edges():
    pos = random_positions(8, 100)
    nbrs = radius_neighborhoods(build_index(pos, 0.4), 0.4)
    rotated = nbrs.rotate_edges(math.pi / 2)
    assert rotated.indices is nbrs.indices
    np.testing.assert_allclose(rotated.edges[:, 0], -nbrs.edges[:, 1], atol=1e-15)
    np.testing.assert_allclose(rotated.edges[:, 1], nbrs.edges[:, 0], atol=1e-15)
    np.testing.assert_array_equal(rotated.edges[:, 2], nbrs.edges[:, 2])
    np.testing.assert_allclose(
        np.linalg.norm(rotated.edges, axis=1), rotated.distances, atol=1e-12
    )
