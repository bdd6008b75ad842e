# Copyright (c) 2026 The nvbench Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Command line entry point. Every subcommand is deterministic given its
seed and inputs and exits 0 on success, 1 on usage or config errors, 2 on
data errors and 3 when a check fails.
"""

from __future__ import absolute_import, print_function

import argparse
import logging
import os
import sys
import time

from . import analysis, gradcheck
from .config import Config
from .constants import (
    DEFAULT_CONTRAST_SAMPLES,
    DEFAULT_CONTRAST_WINDOW,
    EXIT_CHECK_FAILED,
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    MODEL_KINDS,
)
from .dataset import SliceDataset, prepare, read_prepared
from .errors import (
    CheckpointError,
    ConfigError,
    DataFormatError,
    FeatureMapError,
    ManifestError,
    NvbenchError,
)
from .manifest import MANIFEST_FILE, RunManifest, read_manifest
from .metrics import MetricsFactory
from .network import Network, build
from .reporter import CompositeReporter, CsvReporter, LoggingReporter
from .trainer import evaluate, generalization_sweep, train

logger = logging.getLogger('nvbench')

LOG_FORMAT = '%(asctime)s %(levelname)s %(message)s'
RUN_LOG_FILE = 'run_log.csv'
CHECKPOINT_FILE = 'checkpoint.nvck'
ANALYSES = ('contrast', 'params', 'ops', 'hist', 'featmaps')


class UsageError(NvbenchError):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """Reports bad arguments as UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError('%s: %s' % (self.prog, message))


def _ms_to_us(value):
    try:
        dt_us = int(round(float(value) * 1000))
    except ValueError:
        raise argparse.ArgumentTypeError('%r is not a duration in ms' % value)
    if dt_us < 1:
        raise argparse.ArgumentTypeError('durations must be positive')
    return dt_us


def _int_list(value):
    try:
        return [int(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('%r is not a comma separated list of integers' % value)


def _open_output(path):
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    return open(path, 'w', newline='')


def load_dataset(root, split, dt_us=None, T=None, count=None, seed=0):
    dataset = SliceDataset.from_directory(root, split)
    if len(dataset) == 0:
        raise DataFormatError('%s: no %s samples' % (root, split))
    if (dt_us or T) and (dt_us, T) != (dataset.dt_us, dataset.T):
        dataset = dataset.retime(dt_us or dataset.dt_us, T or dataset.T)
    if count:
        dataset = dataset.subset(count, seed=seed)
    return dataset


def load_network(path):
    if not os.path.exists(path):
        raise CheckpointError('%s: no such checkpoint' % path)
    return Network.load(path)


def _metrics_factory(config):
    if not config.metrics:
        return MetricsFactory()
    try:
        from .metrics.prometheus import PrometheusMetricsFactory
    except ImportError:
        logger.warning('prometheus_client is not installed, metrics are disabled')
        return MetricsFactory()
    return PrometheusMetricsFactory(namespace='nvbench')


def cmd_prepare(args):
    result = prepare(args.raw_dir, args.out_dir, args.dt, args.T, workers=args.workers,
                     strict=not args.lenient)
    for split, count in result.counts.items():
        print('%s %s: %d' % (result.dataset, split, count))
    if result.failures:
        print('%d recordings skipped' % result.failures)
    return EXIT_OK


def cmd_train(args):
    started = time.time()
    config = Config.from_file(args.config)
    if args.epochs:
        config = config.with_overrides('train', max_epoch=args.epochs)
    if args.seed is not None:
        config = config.with_overrides('train', seed=args.seed)
    train_config = config.train_config()
    net_config = config.network_config()
    if not train_config.train_path:
        raise ConfigError('data.train_path is required for training')

    dataset = load_dataset(train_config.train_path, 'train', train_config.dt_us,
                           train_config.T, train_config.max_train_samples, train_config.seed)
    test_dataset = None
    if train_config.test_path:
        test_dataset = load_dataset(train_config.test_path, 'test', train_config.dt_us,
                                    train_config.T, train_config.max_test_samples,
                                    train_config.seed)
    net = build(net_config, seed=train_config.seed)

    run_dir = args.out or config.output_dir
    manifest = RunManifest.create(
        config.config, train_config.seed,
        dataset_checksum=read_prepared(train_config.train_path).get('sha256'),
        timings={'setup_seconds': round(time.time() - started, 3)})
    manifest.write(run_dir)

    reporters = [CsvReporter(os.path.join(run_dir, RUN_LOG_FILE))]
    if config.logging:
        reporters.insert(0, LoggingReporter())
    reporter = CompositeReporter(*reporters)
    reporter.set_run(manifest.to_dict())
    try:
        run_log = train(net, dataset, train_config, test_dataset=test_dataset,
                        reporter=reporter, metrics_factory=_metrics_factory(config))
    finally:
        reporter.close()
    net.save(os.path.join(run_dir, CHECKPOINT_FILE))
    summary = run_log.summary()
    print(' '.join('%s=%s' % (k, v) for k, v in summary.items()))
    print('run directory: %s' % run_dir)
    return EXIT_OK


def _training_seed(checkpoint, seed=None):
    """The root seed of the run that wrote checkpoint, from its manifest when present."""
    if seed is not None:
        return seed
    run_dir = os.path.dirname(os.path.abspath(checkpoint))
    if not os.path.exists(os.path.join(run_dir, MANIFEST_FILE)):
        logger.debug('no manifest next to %s, sampling with seed 0', checkpoint)
        return 0
    return read_manifest(run_dir).seed


def cmd_eval(args):
    net = load_network(args.checkpoint)
    seed = _training_seed(args.checkpoint, args.seed)
    dataset = load_dataset(args.data, args.split, count=args.samples, seed=seed)
    train_dt = net.config.dt_train_us
    if args.sweep:
        horizon = net.config.T * train_dt
        for dt_us, result in generalization_sweep(net, dataset, args.sweep, horizon,
                                                  args.batch_size).items():
            print(_format_eval(result, train_dt, net.config.T))
        return EXIT_OK
    dt_us = args.dt or train_dt
    T = args.T or net.config.T
    result = evaluate(net, dataset, T_eval=T, dt_eval=dt_us, batch_size=args.batch_size)
    print(_format_eval(result, train_dt, net.config.T))
    return EXIT_OK


def _format_eval(result, train_dt, train_T):
    line = 'accuracy=%.4f loss=%.6f samples=%d T=%d dt_ms=%g T*dt_ms=%g' % (
        result.accuracy, result.loss, result.count, result.T, result.dt_us / 1000.0,
        result.T * result.dt_us / 1000.0)
    if result.T * result.dt_us != train_T * train_dt:
        line += ' (trained with T*dt_ms=%g)' % (train_T * train_dt / 1000.0)
    return line


def cmd_analyze(args):
    return ANALYZE_COMMANDS[args.what](args)


def analyze_contrast(args):
    dataset = load_dataset(args.data, args.split)
    if args.index is not None:
        if not 0 <= args.index < len(dataset):
            raise ConfigError('sample %d outside 0..%d' % (args.index, len(dataset) - 1))
        matrix = analysis.contrast_matrix(dataset[args.index], args.k)
        with _open_output(args.out) as f:
            analysis.write_matrix_csv(matrix.matrix, f)
        print('mean=%.6f variance=%.6f size=%d' % (matrix.mean, matrix.variance,
                                                    matrix.matrix.shape[0]))
        return EXIT_OK
    stats = analysis.dataset_contrast(dataset, args.k, args.samples, args.seed)
    with _open_output(args.out) as f:
        f.write('mean,variance,samples,k,seed\n')
        f.write('%r,%r,%d,%d,%d\n' % (stats.mean, stats.variance, stats.samples, stats.k,
                                      stats.seed))
    print('mean=%.6f variance=%.6f samples=%d' % (stats.mean, stats.variance, stats.samples))
    return EXIT_OK


def analyze_params(args):
    counts = analysis.count_params(load_network(args.checkpoint))
    with _open_output(args.out) as f:
        analysis.write_params_csv(counts, f)
    print('total=%d' % counts.total)
    return EXIT_OK


def analyze_ops(args):
    net = load_network(args.checkpoint)
    rates = None
    if args.data:
        dataset = load_dataset(args.data, args.split, T=net.config.T)
        batch, _ = dataset.batch(range(min(len(dataset), args.batch_size)), dtype=net.dtype)
        rates = analysis.measure_rates(net, batch)
    counts = [analysis.estimate_ops(net, direction, alpha=args.alpha, T=args.T or net.config.T,
                                    rates=rates, convention=args.convention)
              for direction in ('forward', 'backward')]
    with _open_output(args.out) as f:
        analysis.write_ops_csv(counts, f)
    for count in counts:
        print('%s adds=%d muls=%d macs=%d' % (count.direction, count.adds, count.muls,
                                              count.macs))
    return EXIT_OK


def analyze_hist(args):
    histogram = analysis.weight_histogram(load_network(args.checkpoint), args.which, args.bins)
    with _open_output(args.out) as f:
        analysis.write_histogram_csv(histogram, f)
    print('entries=%d' % histogram.total)
    return EXIT_OK


def analyze_featmaps(args):
    net = load_network(args.checkpoint)
    dataset = load_dataset(args.data, args.split, T=net.config.T)
    layer = int(args.layer) if args.layer.isdigit() else args.layer
    timesteps = args.timesteps if args.timesteps else range(net.config.T)
    paths = analysis.export_feature_maps(net, dataset[args.index], layer, timesteps, args.out)
    print('%d feature maps written to %s' % (len(paths), args.out))
    return EXIT_OK


ANALYZE_COMMANDS = {
    'contrast': analyze_contrast,
    'params': analyze_params,
    'ops': analyze_ops,
    'hist': analyze_hist,
    'featmaps': analyze_featmaps,
}


def cmd_gradcheck(args):
    kinds = MODEL_KINDS if args.model_kind == 'all' else (args.model_kind,)
    failed = False
    for kind in kinds:
        report = gradcheck.run_gradcheck(kind, seed=args.seed, seeds=args.seeds)
        print('%s %s max_error=%.3e tolerance=%.0e %s' % (
            kind, report.method, report.max_error, report.tolerance,
            'PASS' if report.passed else 'FAIL'))
        failed = failed or not report.passed
    if args.mutate:
        caught = gradcheck.run_mutation_check(seed=args.seed)
        print('mutation %s' % ('caught' if caught else 'NOT caught'))
        failed = failed or not caught
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def build_parser():
    parser = _ArgumentParser(prog='nvbench', description=(
        'Train and analyze spiking and recurrent networks on neuromorphic vision data.'))
    parser.add_argument('-v', '--verbose', action='store_true', help='log at DEBUG level')
    commands = parser.add_subparsers(dest='command', parser_class=_ArgumentParser)
    commands.required = True

    p = commands.add_parser('prepare', help='parse, collapse and cache raw recordings')
    p.add_argument('raw_dir')
    p.add_argument('out_dir')
    p.add_argument('--dt', type=_ms_to_us, required=True, help='temporal resolution in ms')
    p.add_argument('--T', type=int, required=True, help='slices kept per sample')
    p.add_argument('--workers', type=int, default=4)
    p.add_argument('--lenient', action='store_true',
                   help='skip unreadable recordings instead of failing')
    p.set_defaults(func=cmd_prepare)

    p = commands.add_parser('train', help='train a network from a YAML config')
    p.add_argument('config')
    p.add_argument('--epochs', type=int, help='override train.max_epoch')
    p.add_argument('--seed', type=int, help='override train.seed')
    p.add_argument('--out', help='run directory (default: train.output_dir)')
    p.set_defaults(func=cmd_train)

    p = commands.add_parser('eval', help='accuracy of a checkpoint at a chosen resolution')
    p.add_argument('checkpoint')
    p.add_argument('data')
    p.add_argument('--split', default='test')
    p.add_argument('--dt', type=_ms_to_us,
                   help='temporal resolution in ms (default: the training resolution)')
    p.add_argument('--T', type=int)
    p.add_argument('--sweep', type=lambda v: [_ms_to_us(x) for x in v.split(',')],
                   help='comma separated resolutions in ms, T*dt fixed at training value')
    p.add_argument('--samples', type=int)
    p.add_argument('--seed', type=int,
                   help='sampling seed for --samples (default: the run manifest seed)')
    p.add_argument('--batch-size', type=int, default=50)
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser('analyze', help='write analysis CSV artifacts')
    p.add_argument('what', choices=ANALYSES)
    p.add_argument('inputs', nargs='+', help='checkpoint and/or prepared data directory')
    p.add_argument('--out', required=True)
    p.add_argument('--split', default='test')
    p.add_argument('--k', type=int, default=DEFAULT_CONTRAST_WINDOW)
    p.add_argument('--index', type=int)
    p.add_argument('--samples', type=int, default=DEFAULT_CONTRAST_SAMPLES)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--alpha', type=float, default=1.0)
    p.add_argument('--convention', choices=analysis.CONVENTIONS, default=analysis.CONVENTION_TABLE,
                   help='LSTM backward accounting for ops')
    p.add_argument('--T', type=int)
    p.add_argument('--batch-size', type=int, default=50)
    p.add_argument('--which', choices=('recurrent', 'feedforward'), default='recurrent')
    p.add_argument('--bins', type=int, default=50)
    p.add_argument('--layer', default='0')
    p.add_argument('--timesteps', type=_int_list)
    p.set_defaults(func=cmd_analyze)

    p = commands.add_parser('gradcheck', help='run the gradient oracles on tiny networks')
    p.add_argument('model_kind', choices=MODEL_KINDS + ('all',))
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--seeds', type=int, default=gradcheck.DEFAULT_SEEDS)
    p.add_argument('--mutate', action='store_true',
                   help='also check that a sign-flipped LIF backward is rejected')
    p.set_defaults(func=cmd_gradcheck)
    return parser


# positional inputs each analysis expects
ANALYZE_INPUTS = {
    'contrast': ('data',),
    'params': ('checkpoint',),
    'ops': ('checkpoint', 'data'),
    'hist': ('checkpoint',),
    'featmaps': ('checkpoint', 'data'),
}


def parse_args(argv):
    args = build_parser().parse_args(argv)
    if args.command == 'analyze':
        names = ANALYZE_INPUTS[args.what]
        required = 1 if args.what == 'ops' else len(names)
        if not required <= len(args.inputs) <= len(names):
            raise UsageError('analyze %s expects %s' % (args.what, ' '.join(names)))
        for name in names:
            setattr(args, name, None)
        for name, value in zip(names, args.inputs):
            setattr(args, name, value)
        if args.what == 'featmaps' and args.index is None:
            args.index = 0
    return args


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format=LOG_FORMAT)
    try:
        return args.func(args)
    except (UsageError, ConfigError, ManifestError, FeatureMapError) as e:
        logger.error('%s', e)
        return EXIT_USAGE
    except (NvbenchError, IOError, OSError) as e:
        logger.error('%s', e)
        return EXIT_DATA


if __name__ == '__main__':
    sys.exit(main())
