"""Implementations of the ``geocnn`` subcommands

Every command takes the parsed arguments and the resolved settings, and
returns nothing; errors propagate to :func:`~geocnn.cli.main`.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from geocnn.model import (
    build_model,
    load_checkpoint,
    save_checkpoint,
)
from geocnn.pointcloud import (
    convert_text,
    generate_dataset,
    load_cloud,
    load_dataset,
    load_manifest,
)
from geocnn.pointcloud.io import GPC1_MAGIC
from geocnn.rng import derive_seed
from geocnn.tensor import GCK1_MAGIC
from geocnn.train import (
    GradcheckScope,
    evaluate,
    gradcheck_suite,
    preprocess,
    radius_sweep,
    train,
    write_confusion_csv,
    write_sweep_csv,
)

from .bench import (
    run_bench,
    write_bench_csv,
)

if TYPE_CHECKING:
    import argparse

    from geocnn.model import (
        GeoCnnConfig,
        Model,
    )
    from geocnn.pointcloud import PointCloud
    from geocnn.train import MetricsReport

    from .config import RunConfig

__all__ = [
    'cmd_bench',
    'cmd_convert',
    'cmd_eval',
    'cmd_gen_data',
    'cmd_gradcheck',
    'cmd_inspect',
    'cmd_sweep',
    'cmd_train',
    'load_split',
]

lgr = logging.getLogger('geocnn.cli')

CHECKPOINT_NAME = 'model.gck'


def _out(text: str = '') -> None:
    print(text)  # noqa: T201


def load_split(
    path: str | Path,
    config: GeoCnnConfig,
    split: str,
) -> list[PointCloud]:
    """Load and preprocess the clouds of a manifest for a model configuration

    Sampling is seeded from the model seed and the split name, so training
    and later evaluation of a checkpoint see identical clouds.
    """
    manifest = load_manifest(path)
    if manifest.num_classes > config.num_classes:
        msg = (
            f'{path}: {manifest.num_classes} classes, but the model has '
            f'{config.num_classes}'
        )
        raise ValueError(msg)
    clouds = load_dataset(manifest)
    lgr.info('Loaded %i clouds from %s', len(clouds), path)
    return preprocess(
        clouds,
        config.n_points,
        config.in_channels,
        derive_seed(config.seed, split),
    )


def _write_report(report: MetricsReport, out: Path, stem: str) -> None:
    report.write_csv(out / f'{stem}.csv')
    report.write_json(out / f'{stem}.json')
    if report.confusion is not None:
        write_confusion_csv(report.confusion, out / f'{stem}-confusion.csv')


def _print_metrics(what: str, report: MetricsReport) -> None:
    m = report.final
    _out(
        f'{what}: loss={m.loss:.6g} acc_overall={m.acc_overall:.4f} '
        f'acc_class={m.acc_class:.4f}'
    )


def cmd_gen_data(args: argparse.Namespace, run: RunConfig) -> None:
    run.report()
    classes = [c for c in args.classes.split(',') if c.strip()]
    manifest = generate_dataset(
        args.out, classes, args.per_class, args.points, args.jitter, run.seed
    )
    _out(f'{len(manifest)} clouds written to {args.out}')


def cmd_convert(args: argparse.Namespace, run: RunConfig) -> None:
    run.report()
    cloud = convert_text(args.src, args.dst, args.label)
    _out(f'{args.dst}: {cloud.n} points, {cloud.channels} channels')


def cmd_train(args: argparse.Namespace, run: RunConfig) -> None:
    run.report(model=True, training=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_set = load_split(args.train, run.model, 'train')
    test_set = load_split(args.test, run.model, 'test') if args.test else None
    model, report = train(build_model(run.model), train_set, run.train)
    _write_report(report, out, 'train')
    _print_metrics('train', report)
    save_checkpoint(
        out / CHECKPOINT_NAME,
        model,
        info={'train.epochs': run.train.epochs, 'train.seed': run.seed},
    )
    if test_set is not None:
        test_report = evaluate(
            model, test_set, batch_size=run.train.batch_size, workers=run.workers
        )
        _write_report(test_report, out, 'test')
        _print_metrics('test', test_report)


def cmd_eval(args: argparse.Namespace, run: RunConfig) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    model = checkpoint.model
    run.report()
    for line in model.config.to_text().splitlines():
        print(line, file=sys.stderr)  # noqa: T201
    test_set = load_split(args.test, model.config, 'test')
    report = evaluate(
        model, test_set, batch_size=run.train.batch_size, workers=run.workers
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_report(report, out, 'test')
    _print_metrics('test', report)


def cmd_gradcheck(args: argparse.Namespace, run: RunConfig) -> None:
    run.report()
    scopes = (
        list(GradcheckScope) if args.scope == 'all' else [GradcheckScope(args.scope)]
    )
    reports = [gradcheck_suite(s, run.seed, args.tolerance) for s in scopes]
    for report in reports:
        _out(f'# {report.scope.value} (tolerance {report.tolerance:g})')
        _out(report.to_table())
    for report in reports:
        report.raise_for_failure()


def cmd_bench(args: argparse.Namespace, run: RunConfig) -> None:
    run.report()
    ops = args.op or ['ball-query', 'geoconv-fwd', 'geoconv-bwd']
    results = [
        run_bench(
            op,
            args.n,
            args.radius,
            args.repeat,
            channels=args.channels,
            seed=run.seed,
        )
        for op in ops
    ]
    if args.out:
        with Path(args.out).open('w', encoding='utf-8', newline='') as f:
            write_bench_csv(results, f)
    else:
        write_bench_csv(results, sys.stdout)


def _inspect_model(model: Model, info: dict[str, str]) -> None:
    _out(model.config.to_text().rstrip('\n'))
    for key, value in sorted(info.items()):
        _out(f'{key}={value}')
    _out()
    width = max(len(name) for name in model.params)
    for name, value in model.params.items():
        shape = 'x'.join(str(s) for s in value.shape)
        _out(f'{name:<{width}}  {shape:>12}  {value.size:>10}')
    counts = model.reduction_parameter_count()
    _out()
    _out(f'trainable parameters: {model.parameter_count}')
    _out(
        'reduction parameters: '
        + ' + '.join(str(c) for c in counts)
        + f' = {sum(counts)}'
    )


def _inspect_cloud(path: Path) -> None:
    cloud = load_cloud(path)
    pos = cloud.positions.astype(np.float64)
    _out(f'points: {cloud.n}')
    _out(f'channels: {cloud.channels}')
    _out(f'label: {"none" if cloud.label is None else cloud.label}')
    _out(f'min: {" ".join(f"{v:.6g}" for v in pos.min(axis=0))}')
    _out(f'max: {" ".join(f"{v:.6g}" for v in pos.max(axis=0))}')
    _out(f'max radius: {np.linalg.norm(pos, axis=1).max():.6g}')


def cmd_inspect(args: argparse.Namespace, run: RunConfig) -> None:
    run.report()
    path = Path(args.path)
    with path.open('rb') as f:
        magic = f.read(4)
    if magic == GCK1_MAGIC:
        checkpoint = load_checkpoint(path)
        _inspect_model(checkpoint.model, checkpoint.info)
    elif magic == GPC1_MAGIC:
        _inspect_cloud(path)
    else:
        msg = f'{path}: not a GPC1 cloud or GCK1 checkpoint (magic {magic!r})'
        raise ValueError(msg)


def _parse_grid(specs: list[str]) -> list[tuple[float, ...]]:
    grid = []
    for spec in specs:
        for triple in spec.split(';'):
            if not triple.strip():
                continue
            try:
                radii = tuple(float(v) for v in triple.split(','))
            except ValueError:
                msg = f'cannot parse radius triple {triple!r}'
                raise ValueError(msg) from None
            if len(radii) != 3:  # noqa: PLR2004
                msg = f'radius triple {triple!r} needs 3 values'
                raise ValueError(msg)
            grid.append(radii)
    return grid


def cmd_sweep(args: argparse.Namespace, run: RunConfig) -> None:
    run.report(model=True, training=True)
    grid = _parse_grid(args.radii)
    clouds = load_split(args.train, run.model, 'train')
    results = radius_sweep(
        clouds, run.model, run.train, grid, val_fraction=args.val_fraction
    )
    if args.out:
        write_sweep_csv(results, args.out)
    for r in results:
        _out(
            f'radii={",".join(repr(v) for v in r.radii)} '
            f'val_acc_overall={r.validation.acc_overall:.4f} '
            f'val_acc_class={r.validation.acc_class:.4f}'
        )
    best = max(results, key=lambda r: r.validation.acc_overall)
    _out(f'best radii: {",".join(repr(v) for v in best.radii)}')
