"""Argument parsing and dispatch of the ``geocnn`` executable"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    NoReturn,
)

from geocnn.train import (
    GradcheckFailure,
    GradcheckScope,
)

from .bench import BenchOp
from .commands import (
    cmd_bench,
    cmd_convert,
    cmd_eval,
    cmd_gen_data,
    cmd_gradcheck,
    cmd_inspect,
    cmd_sweep,
    cmd_train,
)
from .config import (
    build_settings,
    cli_overrides,
    resolve,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

__all__ = ['EXIT_CHECK_FAILED', 'EXIT_ERROR', 'build_parser', 'main']

lgr = logging.getLogger('geocnn.cli')

EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2

# settings that can be given as dedicated flags
_SETTING_FLAGS = (
    'seed',
    'workers',
    'log_level',
    'preset',
    'epochs',
    'batch_size',
    'lr',
    'checkpoint_every',
    'augment_rotation',
    'baseline',
    'n_views',
)


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as ``ValueError``, exit code 1"""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        msg = f'{self.prog}: {message}'
        raise ValueError(msg)


def _common_options() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument(
        '--config',
        metavar='FILE',
        help='UTF-8 key=value file with settings '
        '(below flags, above GEOCONV_* environment variables)',
    )
    common.add_argument('--seed', type=int, help='seed of all random streams')
    common.add_argument(
        '--workers',
        type=int,
        help='maximum number of worker threads (default: available cores)',
    )
    common.add_argument(
        '--log-level',
        choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'),
        type=str.upper,
    )
    common.add_argument(
        '--set',
        action='append',
        metavar='KEY=VALUE',
        help='any training or model setting, e.g. radii=0.2,0.4,0.8',
    )
    return common


def _training_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--preset', help='model preset (default: desk)')
    parser.add_argument('--epochs', type=int)
    parser.add_argument('--batch-size', type=int)
    parser.add_argument('--lr', type=float, help='initial learning rate')
    parser.add_argument(
        '--augment-rotation',
        action='store_const',
        const=True,
        help='rotate training clouds about z by random angles every epoch',
    )
    parser.add_argument(
        '--baseline',
        action='store_const',
        const=True,
        help='replace GeoConv by unweighted neighbor averaging',
    )
    parser.add_argument(
        '--multiview',
        dest='n_views',
        type=int,
        metavar='N',
        help='aggregate edge features over N uniform virtual views',
    )


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(
        prog='geocnn',
        description='GeoConv point-cloud classification with hand-derived gradients',
    )
    sub = parser.add_subparsers(dest='command', metavar='COMMAND', required=True)

    p = sub.add_parser(
        'gen-data', parents=[common], help='write a synthetic shape dataset'
    )
    p.add_argument('--out', required=True, help='output directory')
    p.add_argument(
        '--classes',
        default='sphere,cube,cylinder,cone',
        help='comma-separated shape kinds (default: %(default)s)',
    )
    p.add_argument('--per-class', type=int, default=50)
    p.add_argument('--points', type=int, default=1024)
    p.add_argument('--jitter', type=float, default=0.02)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser(
        'convert', parents=[common], help='convert a text point file to GPC1'
    )
    p.add_argument('src', help='text file with XYZ or XYZ+normal rows')
    p.add_argument('dst', help='GPC1 output file')
    p.add_argument('--label', type=int, help='class id stored with the cloud')
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser('train', parents=[common], help='train a model')
    p.add_argument('--train', required=True, help='training manifest')
    p.add_argument('--test', help='test manifest, evaluated after training')
    p.add_argument('--out', required=True, help='output directory')
    p.add_argument(
        '--checkpoint-every',
        type=int,
        metavar='EPOCHS',
        help='write a checkpoint every EPOCHS epochs',
    )
    _training_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', parents=[common], help='evaluate a checkpoint')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--test', required=True, help='test manifest')
    p.add_argument('--out', help='directory for metrics files')
    p.add_argument('--batch-size', type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        'gradcheck',
        parents=[common],
        help='check analytic gradients against finite differences',
    )
    p.add_argument(
        '--scope',
        choices=[*(s.value for s in GradcheckScope), 'all'],
        default='all',
    )
    p.add_argument(
        '--tolerance',
        type=float,
        help='maximum relative error (default: per scope)',
    )
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser('bench', parents=[common], help='time the kernels')
    p.add_argument(
        '--op',
        action='append',
        choices=[o.value for o in BenchOp],
        help='kernel to time, repeatable (default: all)',
    )
    p.add_argument('--n', type=int, default=1000, help='number of points')
    p.add_argument('--radius', type=float, default=0.2)
    p.add_argument('--repeat', type=int, default=5)
    p.add_argument('--channels', type=int, default=16)
    p.add_argument('--out', help='CSV output file (default: stdout)')
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser(
        'inspect', parents=[common], help='describe a checkpoint or a cloud file'
    )
    p.add_argument('path')
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser(
        'sweep', parents=[common], help='grid sweep over GeoConv radii'
    )
    p.add_argument('--train', required=True, help='training manifest')
    p.add_argument(
        '--radii',
        action='append',
        required=True,
        metavar='R1,R2,R3[;...]',
        help='radius triples, repeatable or separated by semicolons',
    )
    p.add_argument('--val-fraction', type=float, default=0.2)
    p.add_argument('--out', help='CSV output file')
    _training_options(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    logging.getLogger('geocnn').setLevel(level)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the ``geocnn`` command line and return its exit code

    0 on success, 1 on invalid arguments, configuration, data, or I/O
    errors, and 2 if a gradient check fails.
    """
    try:
        args = build_parser().parse_args(argv)
        settings = build_settings(
            cli_overrides(args, _SETTING_FLAGS),
            args.config,
        )
        checkpoint_dir = (
            Path(args.out, 'checkpoints') if args.command == 'train' else None
        )
        run = resolve(settings, checkpoint_dir=checkpoint_dir)
        _configure_logging(run.log_level)
        lgr.debug('Running %s with %s', args.command, vars(args))
        args.func(args, run)
    except GradcheckFailure as e:
        lgr.error('%s', e)
        return EXIT_CHECK_FAILED
    except (ValueError, OSError) as e:
        print(f'geocnn: error: {e}', file=sys.stderr)  # noqa: T201
        return EXIT_ERROR
    return 0
