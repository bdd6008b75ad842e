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

from __future__ import absolute_import, division

import collections
import logging
import time
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np
import opentracing

from .constants import (
    DATASET_PRESETS,
    DEFAULT_ADAM_BETA1,
    DEFAULT_ADAM_BETA2,
    DEFAULT_ADAM_EPSILON,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCH,
)
from .errors import ConfigError, ShapeMismatchError
from .losses import compute_loss, predict
from .metrics import MetricsFactory
from .optimizer import Adam
from .reporter import EpochRecord, LoggingReporter
from .utils import make_rng

logger = logging.getLogger('nvbench')

DEFAULT_BATCH_SIZE = 50
DEFAULT_TIMESTEPS = 15
DEFAULT_DT_US = 3000
# stream id for epoch shuffling under the root seed
SHUFFLE_STREAM = 1


@dataclass
class TrainConfig:
    max_epoch: int = DEFAULT_MAX_EPOCH
    batch_size: int = DEFAULT_BATCH_SIZE
    T: int = DEFAULT_TIMESTEPS
    dt_us: int = DEFAULT_DT_US
    lr: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_ADAM_BETA1
    beta2: float = DEFAULT_ADAM_BETA2
    epsilon: float = DEFAULT_ADAM_EPSILON
    seed: int = 0
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    max_train_samples: Optional[int] = None
    max_test_samples: Optional[int] = None

    def __post_init__(self):
        for name in ('max_epoch', 'batch_size', 'T', 'dt_us'):
            if int(getattr(self, name)) < 1:
                raise ConfigError('%s must be a positive integer' % name)
        for name in ('lr', 'epsilon'):
            if not getattr(self, name) > 0:
                raise ConfigError('%s must be positive' % name)
        for name in ('beta1', 'beta2'):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError('%s must lie in [0, 1)' % name)
        for name in ('max_train_samples', 'max_test_samples'):
            value = getattr(self, name)
            if value is not None and int(value) < 1:
                raise ConfigError('%s must be a positive integer' % name)

    @classmethod
    def preset(cls, name, **overrides):
        """Batch size and T of a named structure preset, e.g. 'gesture_cnn'."""
        try:
            preset = DATASET_PRESETS[name]
        except KeyError:
            raise ConfigError('unknown preset %r' % name)
        values = {'batch_size': preset['batch_size'], 'T': preset['T']}
        values.update(overrides)
        return cls(**values)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = set(f.name for f in fields(cls))
        unknown = set(data) - known
        if unknown:
            raise ConfigError('unknown train config keys: %s' % ','.join(sorted(unknown)))
        return cls(**data)


EvalResult = collections.namedtuple('EvalResult', ['accuracy', 'loss', 'count', 'T', 'dt_us'])


class RunLog(object):
    """Per-epoch records of one training run."""

    def __init__(self):
        self.records = []

    def append(self, record):
        self.records.append(record)

    def split(self, name):
        return [r for r in self.records if r.split == name]

    def losses(self, split='train'):
        return [r.loss for r in self.split(split)]

    @property
    def final_accuracy(self):
        test = self.split('test') or self.split('train')
        return test[-1].accuracy if test else None

    @property
    def best_accuracy(self):
        test = self.split('test') or self.split('train')
        return max(r.accuracy for r in test) if test else None

    @property
    def best_epoch(self):
        test = self.split('test') or self.split('train')
        if not test:
            return None
        return max(test, key=lambda r: (r.accuracy, -r.epoch)).epoch

    def summary(self):
        return {
            'best_accuracy': self.best_accuracy,
            'best_epoch': self.best_epoch,
            'final_accuracy': self.final_accuracy,
            'epochs': len(self.split('train')),
        }


class TrainerMetrics(object):
    """Training loop specific metrics."""

    def __init__(self, metrics_factory):
        self.batches = metrics_factory.create_counter(name='nvbench:batches')
        self.samples = metrics_factory.create_counter(name='nvbench:samples_seen')
        self.train_loss = \
            metrics_factory.create_gauge(name='nvbench:epoch_loss', tags={'split': 'train'})
        self.test_loss = \
            metrics_factory.create_gauge(name='nvbench:epoch_loss', tags={'split': 'test'})
        self.train_accuracy = \
            metrics_factory.create_gauge(name='nvbench:epoch_accuracy', tags={'split': 'train'})
        self.test_accuracy = \
            metrics_factory.create_gauge(name='nvbench:epoch_accuracy', tags={'split': 'test'})
        self.epoch_time = metrics_factory.create_timer(name='nvbench:epoch_time')


def _check_geometry(net, dataset):
    if len(dataset) == 0:
        raise ShapeMismatchError('empty dataset')
    if tuple(dataset.input_shape) != tuple(net.config.input_shape):
        raise ShapeMismatchError('dataset input %s does not match network input %s'
                                 % (tuple(dataset.input_shape), net.config.input_shape))
    labels = dataset.labels
    if labels.min() < 0 or labels.max() >= net.config.num_classes:
        raise ShapeMismatchError('dataset labels outside 0..%d' % (net.config.num_classes - 1))


def _batches(count, batch_size, order=None):
    order = np.arange(count) if order is None else order
    for start in range(0, count, batch_size):
        yield order[start:start + batch_size]


def train_epoch(net, dataset, optimizer, batch_size, order, metrics=None):
    """One pass over dataset in the given order. Returns (mean loss, accuracy)."""
    total_loss = 0.0
    correct = 0
    for indices in _batches(len(dataset), batch_size, order):
        data, labels = dataset.batch(indices, dtype=net.dtype)
        outputs, tape = net.forward(data, train_mode=True)
        result = compute_loss(net.config.loss_kind, outputs, labels)
        grads = net.backward(tape, result.grads)
        optimizer.step(net.parameters(), grads)
        total_loss += result.loss * len(indices)
        correct += int((predict(outputs, net.config.loss_kind) == labels).sum())
        if metrics is not None:
            metrics.batches(1)
            metrics.samples(len(indices))
    return total_loss / len(dataset), correct / len(dataset)


def evaluate(net, dataset, T_eval=None, dt_eval=None, batch_size=DEFAULT_BATCH_SIZE):
    """
    Accuracy and mean loss of net on dataset. With T_eval / dt_eval the
    dataset is served at that resolution; an adaptive-leakage network
    rescales its leak to dt_eval for the duration of the call.
    """
    T_eval = T_eval or dataset.T
    dt_eval = dt_eval or dataset.dt_us
    if (T_eval, dt_eval) != (dataset.T, dataset.dt_us):
        dataset = dataset.retime(dt_eval, T_eval)
    _check_geometry(net, dataset)
    saved = [layer.params.leak for layer in net.cell_layers if hasattr(layer.params, 'leak')]
    net.retime(dt_eval)
    try:
        total_loss = 0.0
        correct = 0
        for indices in _batches(len(dataset), batch_size):
            data, labels = dataset.batch(indices, dtype=net.dtype)
            outputs, _ = net.forward(data, train_mode=False)
            total_loss += compute_loss(net.config.loss_kind, outputs, labels).loss * len(indices)
            correct += int((predict(outputs, net.config.loss_kind) == labels).sum())
    finally:
        leaky = [layer for layer in net.cell_layers if hasattr(layer.params, 'leak')]
        for layer, leak in zip(leaky, saved):
            layer.params.leak = leak
    n = len(dataset)
    return EvalResult(correct / n, total_loss / n, n, T_eval, dt_eval)


def train(net, dataset, config, test_dataset=None, reporter=None, metrics_factory=None,
          tracer=None):
    """
    Adam training with per-epoch shuffling seeded from (seed, epoch).
    Each epoch reports a train record and, with a test set, a test record.

    :return: RunLog
    """
    _check_geometry(net, dataset)
    if test_dataset is not None:
        _check_geometry(net, test_dataset)
    reporter = reporter or LoggingReporter()
    metrics = TrainerMetrics(metrics_factory or MetricsFactory())
    tracer = tracer or opentracing.global_tracer()
    optimizer = Adam(lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                     epsilon=config.epsilon)
    run_log = RunLog()
    tags = {'model': net.config.model_kind, 'structure': net.config.structure,
            'loss': net.config.loss_kind, 'samples': len(dataset)}

    with tracer.start_active_span('train', tags=tags) as run_scope:
        for epoch in range(1, config.max_epoch + 1):
            with tracer.start_active_span('epoch', tags={'epoch': epoch}) as scope:
                started = time.time()
                order = make_rng(config.seed, SHUFFLE_STREAM, epoch).permutation(len(dataset))
                loss, accuracy = train_epoch(net, dataset, optimizer, config.batch_size, order,
                                             metrics)
                elapsed = time.time() - started
                record = EpochRecord(epoch, 'train', loss, accuracy, elapsed)
                run_log.append(record)
                reporter.report_epoch(record)
                metrics.train_loss(loss)
                metrics.train_accuracy(accuracy)
                metrics.epoch_time(elapsed)
                scope.span.set_tag('loss', loss)
                scope.span.set_tag('accuracy', accuracy)

            if test_dataset is not None:
                with tracer.start_active_span('evaluate', tags={'epoch': epoch,
                                                                'split': 'test'}) as scope:
                    started = time.time()
                    result = evaluate(net, test_dataset, batch_size=config.batch_size)
                    record = EpochRecord(epoch, 'test', result.loss, result.accuracy,
                                         time.time() - started)
                    run_log.append(record)
                    reporter.report_epoch(record)
                    metrics.test_loss(result.loss)
                    metrics.test_accuracy(result.accuracy)
                    scope.span.set_tag('loss', result.loss)
                    scope.span.set_tag('accuracy', result.accuracy)

        summary = run_log.summary()
        for key, value in summary.items():
            run_scope.span.set_tag(key, value)
    logger.info('training finished: best accuracy %s at epoch %s, final %s',
                summary['best_accuracy'], summary['best_epoch'], summary['final_accuracy'])
    return run_log


def generalization_sweep(net, dataset, dts_us, horizon_us=None, batch_size=DEFAULT_BATCH_SIZE):
    """
    Evaluate at several temporal resolutions with T * dt held at
    horizon_us (the dataset's own T * dt by default).

    :return: OrderedDict dt_us -> EvalResult
    """
    horizon_us = horizon_us or dataset.T * dataset.dt_us
    results = collections.OrderedDict()
    for dt_us in dts_us:
        if horizon_us % dt_us:
            raise ConfigError('%d us does not divide the %d us horizon' % (dt_us, horizon_us))
        results[dt_us] = evaluate(net, dataset, T_eval=horizon_us // dt_us, dt_eval=dt_us,
                                  batch_size=batch_size)
        logger.info('dt=%.1fms T=%d: accuracy %.4f', dt_us / 1000.0, horizon_us // dt_us,
                    results[dt_us].accuracy)
    return results
