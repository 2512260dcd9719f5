from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from geocnn.pointcloud import (
    PointCloud,
    synth_shape,
)
from geocnn.rng import Xoshiro256
from geocnn.tensor import (
    AdamState,
    CheckpointError,
    finite_difference_gradient,
    gradient_error,
    load_tensors,
    save_tensors,
    softmax_cross_entropy,
)

from .. import (
    PRESETS,
    ConfigError,
    GeoCnnConfig,
    backward_batch,
    backward_features,
    batch_geometry,
    build_model,
    cloud_geometries,
    forward_batch,
    forward_cloud,
    forward_features,
    load_checkpoint,
    parameter_shapes,
    preset,
    reduction_parameter_count,
    save_checkpoint,
    stack_geometry,
)


def ball_cloud(seed: int, n: int, label: int = 0) -> PointCloud:
    rng = Xoshiro256(seed)
    v = rng.normal(3 * n).reshape(n, 3)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    v *= rng.random(n)[:, None] ** (1 / 3)
    return PointCloud(v, label=label)


def test_reduction_parameter_counts():
    assert reduction_parameter_count(preset('modelnet40')) == (32768, 131072, 393216)
    assert sum(reduction_parameter_count(preset('modelnet40'))) == 557056
    assert sum(reduction_parameter_count(preset('baseline'))) == 167936
    # the enlarged baseline lands close to the GeoConv size
    assert sum(reduction_parameter_count(preset('baseline-large'))) == 610304


def test_built_model_matches_closed_form():
    for name in ('desk', 'micro'):
        config = preset(name)
        model = build_model(config)
        assert model.reduction_parameter_count() == reduction_parameter_count(config)
        assert {k: v.shape for k, v in model.params.items()} == parameter_shapes(
            config
        )
    baseline = build_model(preset('micro', baseline=True))
    assert baseline.geoconv(1).n_bases == 1


def test_config_invariants():
    config = preset('modelnet40')
    assert config.concat_width == 896
    assert config.geoconv_in_widths == (64, 256, 896)
    assert config.branch1_in_width == 6
    assert config.views is None
    assert len(preset('modelnet40', n_views=30).views) == 30
    with pytest.raises(ConfigError, match='strictly increasing') as e:
        GeoCnnConfig(radii=(0.3, 0.3, 0.6))
    assert e.value.field == 'radii'
    with pytest.raises(ConfigError, match='3 or 6 channels'):
        GeoCnnConfig(in_channels=4)
    with pytest.raises(ConfigError, match='one entry per GeoConv layer'):
        GeoCnnConfig(reduc_widths=(64, 64))
    with pytest.raises(ConfigError, match='needs GeoConv layers'):
        GeoCnnConfig(baseline=True, n_views=4)
    with pytest.raises(ConfigError, match='at least 2 classes'):
        GeoCnnConfig(num_classes=1)
    with pytest.raises(ConfigError, match='unknown preset'):
        preset('huge')


def test_config_error_rendering():
    e = ConfigError('must be positive, got 0', field='knn_k')
    assert str(e) == 'Invalid model configuration (knn_k): must be positive, got 0'
    assert repr(e) == "ConfigError('must be positive, got 0', field='knn_k')"
    e.msg = 'from settings.cfg'
    assert str(e).endswith(': from settings.cfg')
    assert str(ConfigError()) == 'Invalid model configuration'


@pytest.mark.parametrize('name', sorted(PRESETS))
def test_config_text_round_trip(name):
    config = replace(PRESETS[name], seed=7)
    text = config.to_text()
    assert text.startswith('model.version=1\n')
    assert GeoCnnConfig.from_text(text) == config
    # foreign keys are ignored
    assert GeoCnnConfig.from_text('train.epoch=3\n' + text) == config


def test_config_from_strings():
    config = GeoCnnConfig.from_mapping(
        {'radii': '0.1, 0.2,0.4', 'baseline': 'yes', 'n_points': '64'},
        base=preset('desk'),
    )
    assert config.radii == (0.1, 0.2, 0.4)
    assert config.baseline is True
    assert config.n_points == 64
    assert config.stem_width == preset('desk').stem_width
    with pytest.raises(ConfigError, match='not a boolean'):
        GeoCnnConfig.from_mapping({'baseline': 'maybe'})
    with pytest.raises(ConfigError, match='cannot parse'):
        GeoCnnConfig.from_mapping({'n_points': 'many'})
    with pytest.raises(ConfigError, match='unknown configuration key'):
        GeoCnnConfig.from_mapping({'depth': '3'})


def test_config_text_errors():
    with pytest.raises(ConfigError, match='no model configuration'):
        GeoCnnConfig.from_text('train.epoch=3\n')
    with pytest.raises(ConfigError, match='unsupported configuration version'):
        GeoCnnConfig.from_text('model.version=2\n')
    with pytest.raises(ConfigError, match='malformed'):
        GeoCnnConfig.from_text('model.version=1\nmodel.seed\n')


def test_build_is_deterministic():
    a = build_model(preset('micro'))
    b = build_model(preset('micro'))
    for name, value in a.params.items():
        np.testing.assert_array_equal(value, b.params[name])
    c = build_model(preset('micro', seed=1))
    assert not np.array_equal(a.params['stem.W'], c.params['stem.W'])
    assert a.dtype == np.float32


def test_model_parameter_access():
    model = build_model(preset('micro'))
    assert set(model.layer('stem')) == {
        'W',
        'b',
        'gamma',
        'beta',
        'running_mean',
        'running_var',
    }
    assert set(model.layer('classifier')) == {'W', 'b'}
    assert not any(k.endswith('running_var') for k in model.trainable())
    assert model.geoconv(3).c_in == model.config.concat_width
    updated = model.replace_params({'stem.b': np.ones(8, dtype=np.float32)})
    np.testing.assert_array_equal(updated.params['stem.b'], 1.0)
    assert not model.params['stem.b'].any()
    with pytest.raises(ValueError, match='unknown parameters'):
        model.replace_params({'stem.c': np.ones(8)})
    with pytest.raises(ValueError, match='has shape'):
        model.replace_params({'stem.b': np.ones(9)})


def test_input_validation():
    model = build_model(preset('micro'))
    with pytest.raises(ValueError, match='empty batch'):
        forward_batch(model, [], train=False)
    with pytest.raises(ValueError, match='cloud 0 has 13 points'):
        forward_cloud(model, ball_cloud(0, 13))
    with pytest.raises(ValueError, match='at least 2 clouds'):
        forward_cloud(model, ball_cloud(0, 12), train=True)
    with pytest.raises(ValueError, match='2 labels for 3 clouds'):
        backward_batch(model, [ball_cloud(i, 12) for i in range(3)], [0, 1])
    geometry = batch_geometry(model.config, [ball_cloud(0, 12)])
    with pytest.raises(ValueError, match='do not match'):
        forward_features(model, np.zeros((12, 6)), geometry, train=False)


def test_permutation_invariance():
    model = build_model(preset('desk'))
    cloud = synth_shape('cylinder', 256, 0.02, seed=3).with_channels(3)
    logits, _ = forward_cloud(model, cloud)
    assert logits.shape == (1, 4)
    rng = Xoshiro256(4)
    for _ in range(20):
        permuted = PointCloud(cloud.data[rng.permutation(cloud.n)])
        np.testing.assert_allclose(
            forward_cloud(model, permuted)[0], logits, rtol=1e-4, atol=1e-4
        )


def test_stacked_cloud_geometry_matches_batch():
    config = preset('micro')
    clouds = [ball_cloud(i, 12) for i in range(4)]
    cached = cloud_geometries(config, clouds, workers=2)
    subset = [2, 0, 3]
    stacked = stack_geometry(config, [cached[i] for i in subset])
    fresh = batch_geometry(config, [clouds[i] for i in subset])
    assert stacked.n_clouds == 3
    np.testing.assert_array_equal(stacked.knn, fresh.knn)
    np.testing.assert_array_equal(stacked.offsets, fresh.offsets)
    for ours, theirs in zip(stacked.operators, fresh.operators):
        for a, b in zip(ours, theirs):
            np.testing.assert_array_equal(a.valid, b.valid)
            np.testing.assert_array_equal(a.matrix.toarray(), b.matrix.toarray())


def test_group_order_invariance():
    model = build_model(preset('micro'))
    clouds = [ball_cloud(i, 12) for i in range(2)]
    geometry = batch_geometry(model.config, clouds)
    x = np.concatenate([c.data for c in clouds])
    logits, _ = forward_features(model, x, geometry, train=False)
    order = [3, 1, 0, 2]
    shuffled = geometry._replace(
        knn=geometry.knn[:, order], offsets=geometry.offsets[:, order]
    )
    np.testing.assert_allclose(
        forward_features(model, x, shuffled, train=False)[0],
        logits,
        rtol=1e-6,
        atol=1e-6,
    )


def test_zero_features_give_finite_logits():
    model = build_model(preset('micro'))
    clouds = [ball_cloud(i, 12) for i in range(2)]
    geometry = batch_geometry(model.config, clouds)
    x = np.zeros((24, 3), dtype=np.float32)
    logits, _ = forward_features(model, x, geometry, train=False)
    assert np.all(np.isfinite(logits))


def test_eval_batch_equals_single_clouds():
    model = build_model(preset('micro'))
    clouds = [ball_cloud(i, 12) for i in range(3)]
    batch, _ = forward_batch(model, clouds, train=False, workers=2)
    for i, cloud in enumerate(clouds):
        np.testing.assert_allclose(
            batch[i : i + 1], forward_cloud(model, cloud)[0], rtol=1e-5, atol=1e-6
        )


def test_backward_batch():
    model = build_model(preset('micro'))
    clouds = [ball_cloud(i, 12, label=i % 3) for i in range(4)]
    labels = [c.label for c in clouds]
    result = backward_batch(model, clouds, labels)
    assert result.logits.shape == (4, 3)
    assert result.loss == pytest.approx(
        softmax_cross_entropy(result.logits, labels)[0]
    )
    assert 0 <= result.correct <= 4
    assert list(result.grads) == list(model.trainable())
    for name, grad in result.grads.items():
        assert grad.shape == model.params[name].shape
        assert grad.dtype == np.float32
    assert set(result.running) == set(model.params).difference(model.trainable())
    # train mode moved the running statistics
    assert not np.array_equal(
        result.running['stem.running_mean'], model.params['stem.running_mean']
    )
    again = backward_batch(model, clouds, labels, workers=1)
    assert again.loss == result.loss
    for name, grad in result.grads.items():
        np.testing.assert_array_equal(grad, again.grads[name])


def test_full_model_gradcheck():
    model = build_model(preset('micro')).astype(np.float64)
    clouds = [ball_cloud(10 + i, 12) for i in range(3)]
    labels = np.array([0, 1, 2])
    geometry = batch_geometry(model.config, clouds, dtype=np.float64)
    x = np.concatenate([c.data for c in clouds]).astype(np.float64)

    def objective():
        logits, _ = forward_features(model, x, geometry, train=True)
        return softmax_cross_entropy(logits, labels)[0]

    logits, cache = forward_features(model, x, geometry, train=True)
    grad_logits = softmax_cross_entropy(logits, labels)[1]
    grad_x, grads = backward_features(model, cache, grad_logits)
    assert gradient_error(grad_x, finite_difference_gradient(objective, x)) < 1e-4
    for name, analytic in grads.items():
        numeric = finite_difference_gradient(objective, model.params[name])
        assert gradient_error(analytic, numeric) < 1e-4, name


def test_checkpoint_round_trip(tmp_path):
    model = build_model(preset('micro'))
    clouds = [ball_cloud(i, 12, label=i % 3) for i in range(3)]
    result = backward_batch(model, clouds, [0, 1, 2])
    model = model.replace_params(result.running)
    state = AdamState.zeros_like(model.trainable())
    state = AdamState(m=result.grads, v=state.v, t=3)
    path = tmp_path / 'model.gck'
    save_checkpoint(path, model, state, info={'train.epoch': 5})

    loaded = load_checkpoint(path)
    assert loaded.model.config == model.config
    assert loaded.info == {'train.epoch': '5'}
    for name, value in model.params.items():
        np.testing.assert_array_equal(loaded.model.params[name], value)
        assert loaded.model.params[name].shape == value.shape
    assert loaded.optimizer.t == 3
    for name, grad in result.grads.items():
        np.testing.assert_array_equal(loaded.optimizer.m[name], grad)
    np.testing.assert_array_equal(
        forward_batch(loaded.model, clouds, train=False)[0],
        forward_batch(model, clouds, train=False)[0],
    )
    # without optimizer state
    save_checkpoint(path, model)
    assert load_checkpoint(path).optimizer is None


def test_checkpoint_errors(tmp_path):
    model = build_model(preset('micro'))
    path = tmp_path / 'model.gck'
    meta = model.config.to_text()

    tensors = dict(model.params)
    del tensors['stem.W']
    save_tensors(path, tensors, meta)
    with pytest.raises(CheckpointError, match="missing tensor 'stem.W'"):
        load_checkpoint(path)

    save_tensors(path, {**model.params, 'extra': np.zeros(2)}, meta)
    with pytest.raises(CheckpointError, match='unexpected tensors'):
        load_checkpoint(path)

    save_tensors(path, {**model.params, 'stem.b': np.zeros(9)}, meta)
    with pytest.raises(CheckpointError, match="'stem.b' has shape"):
        load_checkpoint(path)

    save_tensors(path, dict(model.params), 'model.version=9\n')
    with pytest.raises(CheckpointError, match='unsupported configuration version'):
        load_checkpoint(path)

    with pytest.raises(ValueError, match='cannot store metadata'):
        save_checkpoint(path, model, info={'a=b': 1})
    tensors, _ = load_tensors(path)
    assert 'stem.W' in tensors
