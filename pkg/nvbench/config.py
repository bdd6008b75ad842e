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

from __future__ import absolute_import

import logging

import yaml

from .constants import (
    DATASET_PRESETS,
    DATASETS,
    DEFAULT_ADAM_BETA1,
    DEFAULT_ADAM_BETA2,
    DEFAULT_ADAM_EPSILON,
    DEFAULT_FIRING_THRESHOLD,
    DEFAULT_GRADIENT_WIDTH,
    DEFAULT_LEAKAGE_FACTOR,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCH,
    MODEL_SNN,
    NUM_POLARITIES,
    STRUCTURES,
)
from .errors import ConfigError
from .network import NetworkConfig
from .trainer import TrainConfig
from .utils import get_boolean

logger = logging.getLogger('nvbench')

ALLOWED_KEYS = {
    'data': ('dataset', 'train_path', 'test_path', 'dt_ms', 'T',
             'max_train_samples', 'max_test_samples'),
    'model': ('kind', 'structure', 'loss', 'precision'),
    'train': ('max_epoch', 'batch_size', 'lr', 'beta1', 'beta2', 'epsilon', 'seed',
              'output_dir', 'metrics', 'logging'),
    'cell': ('u_th', 'leak', 'a', 'leakage', 'reset', 'cross_recurrence',
             'adaptive_leakage'),
}


class Config(object):
    """
    Wraps a YAML experiment file with the sections data, model, train and
    cell. Every value is exposed as a property with its default; unknown
    sections or keys are rejected.

    Example:

    .. code-block:: yaml

        data:
            dataset: nmnist
            train_path: cache/nmnist_3ms
            dt_ms: 3
            T: 15
        model:
            kind: snn
            structure: nmnist_mlp
        train:
            max_epoch: 100
            batch_size: 50
            lr: 1.0e-4
        cell:
            leakage: true
            reset: true

    """

    presets = tuple(sorted(STRUCTURES))

    def __init__(self, config, validate=True):
        config = config or {}
        if not isinstance(config, dict):
            raise ConfigError('config must be a mapping of sections')
        if validate:
            self._validate_config(config)
        self.config = config

    @classmethod
    def from_yaml(cls, text):
        try:
            return cls(yaml.safe_load(text))
        except yaml.YAMLError as e:
            raise ConfigError('unreadable config: %s' % e)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as f:
                text = f.read()
        except (IOError, OSError) as e:
            raise ConfigError('cannot read config %s: %s' % (path, e))
        return cls.from_yaml(text)

    @classmethod
    def from_preset(cls, name, model_kind=MODEL_SNN, **sections):
        """Hyper-parameters of a named structure, e.g. 'gesture_cnn'."""
        if name not in DATASET_PRESETS:
            raise ConfigError('unknown preset %r, expected one of %s'
                              % (name, ','.join(cls.presets)))
        preset = DATASET_PRESETS[name]
        config = {
            'data': {'dataset': preset['dataset'], 'T': preset['T']},
            'model': {'kind': model_kind, 'structure': name},
            'train': {'batch_size': preset['batch_size']},
            'cell': {'a': preset['a']},
        }
        for section, values in sections.items():
            config.setdefault(section, {}).update(values)
        return cls(config)

    def _validate_config(self, config):
        unexpected_sections = [k for k in config if k not in ALLOWED_KEYS]
        if unexpected_sections:
            raise ConfigError('Unexpected sections found in config:{}'.
                              format(','.join(sorted(map(str, unexpected_sections)))))
        for section, values in config.items():
            if values is None:
                continue
            if not isinstance(values, dict):
                raise ConfigError('section %s must be a mapping' % section)
            unexpected_keys = [k for k in values if k not in ALLOWED_KEYS[section]]
            if unexpected_keys:
                raise ConfigError('Unexpected keys found in config section {}:{}'.
                                  format(section, ','.join(sorted(map(str, unexpected_keys)))))

    def _get(self, section, key, default=None):
        return (self.config.get(section) or {}).get(key, default)

    def to_yaml(self):
        return yaml.safe_dump(self.config, sort_keys=True)

    # data

    @property
    def dataset(self):
        name = self._get('data', 'dataset', 'nmnist')
        if name not in DATASETS:
            raise ConfigError('unknown dataset %r' % name)
        return name

    @property
    def train_path(self):
        return self._get('data', 'train_path')

    @property
    def test_path(self):
        return self._get('data', 'test_path')

    @property
    def dt_us(self):
        dt_ms = self._get('data', 'dt_ms', 3)
        dt_us = int(round(float(dt_ms) * 1000))
        if dt_us < 1:
            raise ConfigError('dt_ms must be positive')
        return dt_us

    @property
    def T(self):
        default = 15 if self.dataset == 'nmnist' else 60
        return int(self._get('data', 'T', default))

    @property
    def max_train_samples(self):
        value = self._get('data', 'max_train_samples')
        return None if value is None else int(value)

    @property
    def max_test_samples(self):
        value = self._get('data', 'max_test_samples')
        return None if value is None else int(value)

    @property
    def input_shape(self):
        descriptor = DATASETS[self.dataset]
        return (NUM_POLARITIES, descriptor['height'], descriptor['width'])

    # model

    @property
    def model_kind(self):
        return self._get('model', 'kind', MODEL_SNN)

    @property
    def structure(self):
        default = 'nmnist_mlp' if self.dataset == 'nmnist' else 'gesture_mlp'
        return self._get('model', 'structure', default)

    @property
    def loss_kind(self):
        return self._get('model', 'loss')

    @property
    def precision(self):
        return self._get('model', 'precision', 'float32')

    # train

    @property
    def max_epoch(self):
        return int(self._get('train', 'max_epoch', DEFAULT_MAX_EPOCH))

    @property
    def batch_size(self):
        default = 50 if self.dataset == 'nmnist' else 36
        return int(self._get('train', 'batch_size', default))

    @property
    def lr(self):
        return float(self._get('train', 'lr', DEFAULT_LEARNING_RATE))

    @property
    def beta1(self):
        return float(self._get('train', 'beta1', DEFAULT_ADAM_BETA1))

    @property
    def beta2(self):
        return float(self._get('train', 'beta2', DEFAULT_ADAM_BETA2))

    @property
    def epsilon(self):
        return float(self._get('train', 'epsilon', DEFAULT_ADAM_EPSILON))

    @property
    def seed(self):
        return int(self._get('train', 'seed', 0))

    @property
    def output_dir(self):
        return self._get('train', 'output_dir', 'runs')

    @property
    def metrics(self):
        return get_boolean(self._get('train', 'metrics', False), False)

    @property
    def logging(self):
        return get_boolean(self._get('train', 'logging', True), True)

    # cell

    @property
    def u_th(self):
        return float(self._get('cell', 'u_th', DEFAULT_FIRING_THRESHOLD))

    @property
    def leak(self):
        return float(self._get('cell', 'leak', DEFAULT_LEAKAGE_FACTOR))

    @property
    def a(self):
        return float(self._get('cell', 'a', DEFAULT_GRADIENT_WIDTH))

    @property
    def leakage_enabled(self):
        return get_boolean(self._get('cell', 'leakage', True), True)

    @property
    def reset_enabled(self):
        return get_boolean(self._get('cell', 'reset', True), True)

    @property
    def cross_recurrence(self):
        return get_boolean(self._get('cell', 'cross_recurrence', False), False)

    @property
    def adaptive_leakage(self):
        return get_boolean(self._get('cell', 'adaptive_leakage', False), False)

    def network_config(self):
        return NetworkConfig(
            model_kind=self.model_kind,
            structure=self.structure,
            input_shape=self.input_shape,
            loss_kind=self.loss_kind,
            T=self.T,
            u_th=self.u_th,
            leak=self.leak,
            a=self.a,
            leakage_enabled=self.leakage_enabled,
            reset_enabled=self.reset_enabled,
            cross_recurrence=self.cross_recurrence,
            adaptive_leakage=self.adaptive_leakage,
            dt_train_us=self.dt_us,
            precision=self.precision,
        )

    def train_config(self):
        return TrainConfig(
            max_epoch=self.max_epoch,
            batch_size=self.batch_size,
            T=self.T,
            dt_us=self.dt_us,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            seed=self.seed,
            train_path=self.train_path,
            test_path=self.test_path,
            max_train_samples=self.max_train_samples,
            max_test_samples=self.max_test_samples,
        )

    def with_overrides(self, section, **values):
        """A copy with the given keys of one section replaced."""
        config = {k: dict(v or {}) for k, v in self.config.items()}
        config.setdefault(section, {}).update(values)
        return Config(config)
