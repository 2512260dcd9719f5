from __future__ import annotations

import csv

import pytest

from geocnn.model import preset
from geocnn.pointcloud import (
    ShapeKind,
    synth_shape,
)

from .. import (
    SWEEP_COLUMNS,
    TrainConfig,
    preprocess,
    radius_sweep,
    split_dataset,
    write_sweep_csv,
)


def clouds(per_class: int) -> list:
    raw = [
        synth_shape(kind, 48, 0.02, seed=10 * kind.value + i)
        for kind in ShapeKind
        for i in range(per_class)
    ]
    return preprocess(raw, 24, 3, seed=0)


def test_split_dataset():
    data = clouds(3)
    train_set, val_set = split_dataset(data, 0.25, seed=5)
    assert len(val_set) == 3
    assert len(train_set) == 9
    assert {id(c) for c in train_set}.isdisjoint(id(c) for c in val_set)
    again = split_dataset(data, 0.25, seed=5)
    assert [id(c) for c in again[1]] == [id(c) for c in val_set]
    with pytest.raises(ValueError, match='validation fraction'):
        split_dataset(data, 1.0, seed=0)
    with pytest.raises(ValueError, match='cannot split 2 clouds'):
        split_dataset(data[:2], 0.5, seed=0)


def test_radius_sweep(tmp_path):
    config = preset(
        'desk', n_points=24, knn_k=4, stem_width=8, geoconv_widths=(16, 16, 16)
    )
    grid = [(0.3, 0.6, 1.0), (0.5, 0.8, 1.2)]
    results = radius_sweep(
        clouds(2), config, TrainConfig(epochs=1, batch_size=3), grid, val_fraction=0.25
    )
    assert [r.radii for r in results] == grid
    for r in results:
        assert 0.0 <= r.validation.acc_overall <= 1.0
        assert r.train.epoch == 1

    path = tmp_path / 'sweep.csv'
    write_sweep_csv(results, path)
    with path.open(encoding='utf-8') as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert [float(v) for v in rows[2][:3]] == [0.5, 0.8, 1.2]
    with pytest.raises(ValueError, match='empty radius grid'):
        radius_sweep(clouds(1), config, TrainConfig(), [])
