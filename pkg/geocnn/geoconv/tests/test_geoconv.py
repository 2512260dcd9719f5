from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from geocnn.pointcloud import rotation_matrix_z
from geocnn.rng import Xoshiro256
from geocnn.spatial import (
    NeighborhoodSet,
    build_index,
    radius_neighborhoods,
)
from geocnn.tensor import (
    finite_difference_gradient,
    gradient_error,
)

from .. import (
    BASES,
    EdgeGeometry,
    GeoConvParams,
    MultiViewConfig,
    aggregation_operators,
    baseline_edge_forward,
    bottleneck_forward,
    decomposition_coefficients,
    distance_weight,
    edge_geometry,
    geoconv_backward,
    geoconv_forward,
    geoconv_forward_multiview,
    multiview_operators,
    quadrant_bases,
    uniform_views,
    with_running,
)


def neighborhoods(pos: np.ndarray, r: float) -> NeighborhoodSet:
    return radius_neighborhoods(build_index(pos, r), r)


def random_params(
    c_in: int,
    c_reduc: int,
    c_out: int,
    seed: int,
    *,
    n_bases: int = 6,
    n_views: int = 0,
) -> GeoConvParams:
    rng = Xoshiro256(seed)
    p = GeoConvParams.initialize(
        c_in,
        c_reduc,
        c_out,
        rng,
        n_bases=n_bases,
        n_views=n_views,
        dtype=np.float64,
    )
    return replace(
        p,
        b_c=0.1 * rng.normal(c_out),
        b_exp=0.1 * rng.normal(c_out),
        gamma=1.0 + 0.2 * rng.normal(c_reduc),
        beta=0.1 * rng.normal(c_reduc),
        running_mean=0.1 * rng.normal(c_reduc),
        running_var=0.5 + rng.random(c_reduc),
        view_weights=0.5 + rng.random(n_views) if n_views else None,
    )


def random_cloud(seed: int, n: int, c: int) -> tuple[np.ndarray, np.ndarray]:
    rng = Xoshiro256(seed)
    return rng.random(3 * n).reshape(n, 3), rng.normal(n * c).reshape(n, c)


def literal_geoconv(
    x: np.ndarray,
    pos: np.ndarray,
    r: float,
    p: GeoConvParams,
) -> np.ndarray:
    # eval-mode GeoConv, one edge at a time
    y = x @ p.W_c + p.b_c
    for i in range(len(x)):
        num = np.zeros(p.c_reduc)
        total = 0.0
        for j in range(len(x)):
            e = pos[j] - pos[i]
            norm2 = float(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
            d = math.sqrt(norm2)
            if d == 0 or d > r:
                continue
            w = (r - d) ** 2
            for k in range(3):
                b = 2 * k if e[k] >= 0 else 2 * k + 1
                num += w * (e[k] * e[k] / norm2) * (x[j] @ p.W_b(b))
            total += w
        if total == 0:
            continue
        z = num / total
        z = p.gamma * (z - p.running_mean) / np.sqrt(p.running_var + 1e-5) + p.beta
        y[i] += np.maximum(z, 0.0) @ p.W_exp + p.b_exp
    return y


def assert_gradients(forward, x, params, grad_y, tol=1e-5):
    def objective():
        return float((forward(x, params)[0] * grad_y).sum())

    _, cache = forward(x, params)
    grad_x, grads = geoconv_backward(cache, grad_y)
    assert gradient_error(grad_x, finite_difference_gradient(objective, x)) < tol
    for name, analytic in grads.items():
        numeric = finite_difference_gradient(objective, getattr(params, name))
        assert gradient_error(analytic, numeric) < tol, name


def test_quadrant_bases():
    assert quadrant_bases([0.2, -0.1, 0.3]).tolist() == [0, 3, 4]
    assert quadrant_bases([0.0, 0.0, 1.0]).tolist() == [0, 2, 4]
    assert quadrant_bases([-1.0, -1.0, -1.0]).tolist() == [1, 3, 5]
    with pytest.raises(ValueError, match='nonzero 3-vector'):
        quadrant_bases([0.0, 0.0, 0.0])


def test_decomposition_coefficients():
    np.testing.assert_allclose(
        decomposition_coefficients([3.0, 4.0, 0.0], [0, 2, 4]),
        [0.36, 0.64, 0.0],
    )
    e = np.array([-1.0, 2.0, -2.0])
    coef = decomposition_coefficients(e, quadrant_bases(e))
    np.testing.assert_allclose(coef, [1 / 9, 4 / 9, 4 / 9])
    # the basis reconstruction with signed cosines gives back the direction
    cos = np.sqrt(coef)
    np.testing.assert_allclose(cos @ BASES[quadrant_bases(e)], e / 3.0)


def test_distance_weight():
    assert distance_weight(0.6, 1.0) == pytest.approx(0.16)
    assert distance_weight(1.0, 1.0) == 0.0
    w = distance_weight(np.linspace(0.0, 0.5, 11), 0.5)
    assert np.all(np.diff(w) < 0)
    with pytest.raises(ValueError, match='within'):
        distance_weight(1.5, 1.0)


def test_partition_of_unity():
    edges = np.random.default_rng(5).standard_normal((10**6, 3))
    # exact zero components pick the positive basis with a zero coefficient
    edges[::7, 1] = 0.0
    edges[::11, 2] = 0.0
    dist = np.linalg.norm(edges, axis=1)
    nbrs = NeighborhoodSet(
        offsets=np.array([0, len(edges)]),
        indices=np.zeros(len(edges), dtype=np.int64),
        edges=edges,
        distances=dist,
        radius=float(dist.max()),
    )
    geo = edge_geometry(nbrs)
    assert np.all(geo.coefficients >= 0)
    assert np.all(geo.coefficients <= 1)
    np.testing.assert_allclose(geo.coefficients.sum(axis=1), 1.0, rtol=0, atol=1e-6)
    signs = (BASES @ np.ones(3))[geo.quadrants]
    assert np.all(signs * edges >= 0)
    assert np.all(geo.quadrants[::7, 1] == 2)  # noqa: PLR2004


def test_zero_edge_rejected():
    nbrs = NeighborhoodSet(
        offsets=np.array([0, 1]),
        indices=np.zeros(1, dtype=np.int64),
        edges=np.zeros((1, 3)),
        distances=np.zeros(1),
        radius=1.0,
    )
    with pytest.raises(ValueError, match='zero-length edge'):
        edge_geometry(nbrs)


def test_single_neighbor_on_positive_x():
    pos = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]])
    x = np.array([[5.0], [2.0]])
    params = GeoConvParams(
        W_c=np.zeros((1, 1)),
        b_c=np.zeros(1),
        # only +x matters for p, the others are arbitrary
        W_dir=np.array([[1.0, 7.0, -3.0, 4.0, 0.5, 9.0]]),
        W_exp=np.ones((1, 1)),
        b_exp=np.zeros(1),
        gamma=np.ones(1),
        beta=np.zeros(1),
        running_mean=np.zeros(1),
        running_var=np.ones(1),
    )
    nbrs = neighborhoods(pos, 0.5)
    y, _ = geoconv_forward(x, nbrs, params, train=False, normalize=False)
    assert y[0, 0] == pytest.approx(2.0)
    # q sees p along -x
    assert y[1, 0] == pytest.approx(35.0)


def test_two_point_example():
    pos = np.array([[0.0, 0.0, 0.0], [0.3, 0.4, 0.0]])
    x = np.ones((2, 1))
    params = GeoConvParams(
        W_c=np.ones((1, 1)),
        b_c=np.zeros(1),
        W_dir=np.ones((1, 6)),
        W_exp=np.ones((1, 1)),
        b_exp=np.zeros(1),
        gamma=np.ones(1),
        beta=np.zeros(1),
        running_mean=np.zeros(1),
        running_var=np.ones(1),
    )
    nbrs = neighborhoods(pos, 1.0)
    y, _ = geoconv_forward(x, nbrs, params, train=False, normalize=False)
    np.testing.assert_allclose(y, [[2.0], [2.0]])
    # +x and +y weigh in for point 0, -x and -y for point 1
    params = replace(params, W_dir=np.array([[2.0, 0.0, 3.0, 0.0, 1.0, 1.0]]))
    y, _ = geoconv_forward(x, nbrs, params, train=False, normalize=False)
    np.testing.assert_allclose(y, [[1.0 + 0.36 * 2 + 0.64 * 3], [1.0]])


@pytest.mark.parametrize('seed', range(50))
def test_matches_literal_evaluation(seed):
    rng = Xoshiro256(1000 + seed)
    n = 1 + rng.below(10)
    r = 0.2 + 0.6 * rng.uniform()
    pos, x = random_cloud(seed, n, 3)
    params = random_params(3, 2, 4, seed)
    y, _ = geoconv_forward(x, neighborhoods(pos, r), params, train=False)
    np.testing.assert_allclose(
        y, literal_geoconv(x, pos, r, params), rtol=1e-5, atol=1e-5
    )


def test_empty_neighborhoods_center_only():
    pos = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    x = Xoshiro256(3).normal(6).reshape(3, 2)
    params = random_params(2, 3, 4, 3)
    y, cache = geoconv_forward(x, neighborhoods(pos, 0.1), params, train=True)
    np.testing.assert_array_equal(y, x @ params.W_c + params.b_c)
    _, grads = geoconv_backward(cache, np.ones_like(y))
    assert not grads['W_dir'].any()
    assert not grads['W_exp'].any()
    # batch norm did not see any rows
    np.testing.assert_array_equal(cache.running[0], params.running_mean)


def test_neighbors_on_radius_only():
    pos = np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]])
    x = np.ones((2, 2))
    params = random_params(2, 3, 4, 4)
    nbrs = neighborhoods(pos, 0.5)
    assert nbrs.n_edges == 2  # noqa: PLR2004
    op = aggregation_operators(nbrs)
    assert not op.valid.any()
    y, _ = geoconv_forward(x, nbrs, params, train=False)
    np.testing.assert_array_equal(y, x @ params.W_c + params.b_c)


def test_float32_matches_float64():
    pos, x = random_cloud(7, 10, 4)
    params = random_params(4, 3, 5, 7)
    nbrs = neighborhoods(pos, 0.6)
    y64, _ = geoconv_forward(x, nbrs, params, train=False)
    y32, _ = geoconv_forward(
        x.astype(np.float32), nbrs, params.astype(np.float32), train=False
    )
    assert y32.dtype == np.float32
    np.testing.assert_allclose(y32, y64, rtol=1e-4, atol=1e-4)


@pytest.mark.parametrize('train', [False, True])
def test_geoconv_gradcheck(train):
    pos, x = random_cloud(11, 8, 3)
    nbrs = neighborhoods(pos, 0.7)
    params = random_params(3, 2, 4, 11)
    grad_y = Xoshiro256(12).normal(8 * 4).reshape(8, 4)

    def forward(x, params):
        return geoconv_forward(x, nbrs, params, train=train)

    assert_gradients(forward, x, params, grad_y)


def test_zero_upstream_gradient():
    pos, x = random_cloud(13, 8, 3)
    nbrs = neighborhoods(pos, 0.7)
    params = random_params(3, 2, 4, 13)
    _, cache = geoconv_forward(x, nbrs, params, train=True)
    grad_x, grads = geoconv_backward(cache, np.zeros((8, 4)))
    assert not grad_x.any()
    for g in grads.values():
        assert not g.any()


def test_unselected_bases_get_no_gradient():
    pos = np.array([[0.0, 0.0, 0.0], [0.0, 0.2, 0.3]])
    x = np.array([[1.0, 0.5], [0.3, 2.0]])
    params = random_params(2, 3, 4, 17)
    params = replace(params, W_dir=np.abs(params.W_dir))
    _, cache = geoconv_forward(
        x, neighborhoods(pos, 1.0), params, train=False, normalize=False
    )
    _, grads = geoconv_backward(cache, np.ones((2, 4)))
    g = grads['W_dir'].reshape(2, 6, 3)
    # -x is never selected, +x only with a zero coefficient
    assert not g[:, 1].any()
    assert not g[:, 0].any()
    assert g[:, 2:].any()


def test_scale_covariant_distance_weights():
    pos, x = random_cloud(19, 9, 3)
    nbrs = neighborhoods(pos, 0.6)
    geo = edge_geometry(nbrs)
    scaled = EdgeGeometry(geo.quadrants, geo.coefficients, 7.0 * geo.weights)
    a = aggregation_operators(nbrs)
    b = aggregation_operators(nbrs, geometry=scaled)
    np.testing.assert_array_equal(a.valid, b.valid)
    np.testing.assert_allclose(b.matrix.toarray(), a.matrix.toarray(), rtol=1e-12)
    params = random_params(3, 2, 4, 19)
    ya, _ = bottleneck_forward(x, [a], params, train=False)
    yb, _ = bottleneck_forward(x, [b], params, train=False)
    np.testing.assert_allclose(ya, yb, rtol=1e-12, atol=1e-12)


def test_operator_rows_are_distributions():
    pos, _ = random_cloud(23, 30, 1)
    op = aggregation_operators(neighborhoods(pos, 0.4))
    sums = np.asarray(op.matrix.sum(axis=1)).ravel()
    np.testing.assert_allclose(sums[op.valid], 1.0, atol=1e-12)
    assert not sums[~op.valid].any()
    assert op.block(2).shape == (30, 30)


def test_view_config():
    views = uniform_views(4)
    assert len(views) == 4  # noqa: PLR2004
    np.testing.assert_allclose(views.angles, [0, np.pi / 2, np.pi, 3 * np.pi / 2])
    with pytest.raises(ValueError, match='at least one view'):
        MultiViewConfig(())
    with pytest.raises(ValueError, match='outside'):
        MultiViewConfig((2 * np.pi,))
    with pytest.raises(ValueError, match='must be positive'):
        uniform_views(0)


def test_single_identity_view_is_single_view():
    pos, x = random_cloud(29, 12, 3)
    nbrs = neighborhoods(pos, 0.5)
    params = random_params(3, 2, 4, 29, n_views=1)
    params = replace(params, view_weights=np.ones(1))
    y_mv, _ = geoconv_forward_multiview(
        x, nbrs, params, MultiViewConfig((0.0,)), train=False
    )
    y, _ = geoconv_forward(
        x, nbrs, replace(params, view_weights=None), train=False
    )
    np.testing.assert_array_equal(y_mv, y)


@pytest.mark.parametrize('k', range(16))
def test_view_equals_rotated_cloud(k):
    angle = 2 * np.pi * k / 16
    pos, x = random_cloud(31, 12, 3)
    params = random_params(3, 2, 4, 31, n_views=1)
    params = replace(params, view_weights=np.ones(1))
    y_view, _ = geoconv_forward_multiview(
        x, neighborhoods(pos, 0.5), params, MultiViewConfig((angle,)), train=False
    )
    rotated = pos @ rotation_matrix_z(angle).T
    y_rot, _ = geoconv_forward(
        x,
        neighborhoods(rotated, 0.5),
        replace(params, view_weights=None),
        train=False,
    )
    np.testing.assert_allclose(y_view, y_rot, rtol=1e-9, atol=1e-9)


def test_antipodal_views_split_the_edge():
    pos = np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]])
    nbrs = neighborhoods(pos, 1.0)
    ops = multiview_operators(nbrs, MultiViewConfig((0.0, np.pi)))
    combined = 0.5 * ops[0].matrix + 0.5 * ops[1].matrix
    n = 2
    # point 0 sees its neighbor along +x, the flipped view along -x
    assert combined[0, 0 * n + 1] == pytest.approx(0.5)
    assert combined[0, 1 * n + 1] == pytest.approx(0.5)
    assert combined[1, 1 * n + 0] == pytest.approx(0.5)
    assert combined[1, 0 * n + 0] == pytest.approx(0.5)


@pytest.mark.parametrize('train', [False, True])
def test_multiview_gradcheck(train):
    pos, x = random_cloud(37, 8, 3)
    nbrs = neighborhoods(pos, 0.7)
    views = uniform_views(3)
    params = random_params(3, 2, 4, 37, n_views=3)
    grad_y = Xoshiro256(38).normal(8 * 4).reshape(8, 4)

    def forward(x, params):
        return geoconv_forward_multiview(x, nbrs, params, views, train=train)

    assert_gradients(forward, x, params, grad_y)
    _, cache = forward(x, params)
    _, grads = geoconv_backward(cache, grad_y)
    assert grads['view_weights'].shape == (3,)


def test_multiview_weight_errors():
    pos, x = random_cloud(41, 6, 3)
    nbrs = neighborhoods(pos, 0.7)
    views = uniform_views(2)
    with pytest.raises(ValueError, match='require view weights'):
        geoconv_forward_multiview(
            x, nbrs, random_params(3, 2, 4, 41), views, train=False
        )
    with pytest.raises(ValueError, match='3 view weights for 2 views'):
        geoconv_forward_multiview(
            x, nbrs, random_params(3, 2, 4, 41, n_views=3), views, train=False
        )


def test_baseline_single_neighbor():
    pos = np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [5.0, 5.0, 5.0]])
    x = Xoshiro256(43).normal(6).reshape(3, 2)
    params = random_params(2, 3, 4, 43, n_bases=1)
    y, _ = baseline_edge_forward(
        x, neighborhoods(pos, 1.0), params, train=False, normalize=False
    )
    expected = x[0] @ params.W_c + params.b_c
    expected += np.maximum(x[1] @ params.W_dir, 0) @ params.W_exp + params.b_exp
    np.testing.assert_allclose(y[0], expected)
    np.testing.assert_allclose(y[2], x[2] @ params.W_c + params.b_c)


def test_baseline_ignores_distances():
    pos = np.array([[0.0, 0.0, 0.0], [0.2, 0.0, 0.0], [0.0, -0.9, 0.0]])
    op = aggregation_operators(neighborhoods(pos, 1.0), baseline=True)
    assert op.n_bases == 1
    np.testing.assert_allclose(op.matrix.toarray()[0], [0.0, 0.5, 0.5])


def test_baseline_gradcheck():
    pos, x = random_cloud(47, 8, 3)
    nbrs = neighborhoods(pos, 0.7)
    params = random_params(3, 2, 4, 47, n_bases=1)
    grad_y = Xoshiro256(48).normal(8 * 4).reshape(8, 4)

    def forward(x, params):
        return baseline_edge_forward(x, nbrs, params, train=True)

    assert_gradients(forward, x, params, grad_y)


def test_layer_argument_errors():
    pos, x = random_cloud(53, 6, 3)
    nbrs = neighborhoods(pos, 0.7)
    with pytest.raises(ValueError, match='single reduction matrix'):
        baseline_edge_forward(x, nbrs, random_params(3, 2, 4, 53), train=False)
    with pytest.raises(ValueError, match='do not match'):
        geoconv_forward(x[:5], nbrs, random_params(3, 2, 4, 53), train=False)
    with pytest.raises(ValueError, match='input channels'):
        geoconv_forward(x, nbrs, random_params(2, 2, 4, 53), train=False)
    with pytest.raises(ValueError, match='bases'):
        geoconv_forward(
            x, nbrs, random_params(3, 2, 4, 53, n_bases=1), train=False
        )


def test_params():
    params = GeoConvParams.initialize(4, 2, 3, Xoshiro256(0))
    assert (params.c_in, params.c_reduc, params.c_out) == (4, 2, 3)
    assert params.n_bases == 6  # noqa: PLR2004
    assert params.W_dir.dtype == np.float32
    assert params.reduction_parameter_count == 4 * 6 * 2 + 2 * 3
    np.testing.assert_array_equal(params.W_b(1), params.W_dir[:, 2:4])
    assert set(params.trainable()) == {
        'W_c', 'b_c', 'W_dir', 'W_exp', 'b_exp', 'gamma', 'beta'
    }
    again = GeoConvParams.from_dict(params.as_dict())
    np.testing.assert_array_equal(again.W_dir, params.W_dir)
    assert again.view_weights is None
    mv = GeoConvParams.initialize(4, 2, 3, Xoshiro256(0), n_views=4)
    np.testing.assert_array_equal(mv.view_weights, [0.25] * 4)
    with pytest.raises(ValueError, match='W_dir has shape'):
        replace(params, W_dir=np.zeros((4, 6)))
    with pytest.raises(ValueError, match='gamma has shape'):
        replace(params, gamma=np.ones(3))


def test_with_running_statistics():
    pos, x = random_cloud(59, 10, 3)
    params = random_params(3, 2, 4, 59)
    _, cache = geoconv_forward(x, neighborhoods(pos, 0.7), params, train=True)
    updated = with_running(params, cache)
    assert not np.array_equal(updated.running_mean, params.running_mean)
    _, cache = geoconv_forward(x, neighborhoods(pos, 0.7), params, train=False)
    assert with_running(params, cache).running_var is params.running_var
