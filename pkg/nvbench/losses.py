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
The four training objectives. Every loss takes the per-timestep network
outputs [T, B, K] and integer labels [B], averages over the batch and
returns the gradient with respect to each timestep's output, so a single
backward driver serves all of them.
"""

from __future__ import absolute_import, division

import collections

import numpy as np

from .constants import (
    LOSS_LAST_STEP,
    LOSS_PER_STEP,
    LOSS_RATE_INSPIRED,
    LOSS_SNN_RATE_MSE,
)
from .errors import ConfigError, ShapeMismatchError

LossResult = collections.namedtuple('LossResult', ['loss', 'grads'])


def one_hot(labels, num_classes, dtype=np.float64):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ShapeMismatchError('labels outside 0..%d' % (num_classes - 1))
    Y = np.zeros((labels.shape[0], num_classes), dtype=dtype)
    Y[np.arange(labels.shape[0]), labels] = 1
    return Y


def _check(outputs, Y):
    outputs = np.asarray(outputs)
    if outputs.ndim != 3 or outputs.shape[1:] != Y.shape:
        raise ShapeMismatchError('outputs %s do not match targets %s' % (outputs.shape, Y.shape))
    return outputs, Y.astype(outputs.dtype, copy=False)


def _rate_mse(outputs, Y):
    outputs, Y = _check(outputs, Y)
    T, B = outputs.shape[:2]
    err = Y - outputs.mean(axis=0)
    loss = float((err * err).sum() / B)
    grad = (-2.0 / (T * B)) * err
    return LossResult(loss, np.broadcast_to(grad, outputs.shape).copy())


def loss_snn_rate_mse(outputs, Y):
    """L = ||Y - mean_t o^t||^2; every timestep receives -(2/T)(Y - o_bar)."""
    return _rate_mse(outputs, Y)


def loss_rate_inspired(outputs, Y):
    """L = ||Y - mean_t r^t||^2 over the linear readouts."""
    return _rate_mse(outputs, Y)


def loss_last_step(outputs, Y):
    """L = ||Y - r^T||^2; earlier timesteps get exactly zero gradient."""
    outputs, Y = _check(outputs, Y)
    B = outputs.shape[1]
    err = Y - outputs[-1]
    grads = np.zeros_like(outputs)
    grads[-1] = (-2.0 / B) * err
    return LossResult(float((err * err).sum() / B), grads)


def loss_per_step(outputs, Y):
    """L = (1/T) sum_t ||Y - r^t||^2 with the label held constant across t."""
    outputs, Y = _check(outputs, Y)
    T, B = outputs.shape[:2]
    err = Y[np.newaxis] - outputs
    return LossResult(float((err * err).sum() / (T * B)), (-2.0 / (T * B)) * err)


LOSSES = {
    LOSS_SNN_RATE_MSE: loss_snn_rate_mse,
    LOSS_LAST_STEP: loss_last_step,
    LOSS_PER_STEP: loss_per_step,
    LOSS_RATE_INSPIRED: loss_rate_inspired,
}


def compute_loss(loss_kind, outputs, labels):
    try:
        fn = LOSSES[loss_kind]
    except KeyError:
        raise ConfigError('unknown loss %r' % loss_kind)
    outputs = np.asarray(outputs)
    return fn(outputs, one_hot(labels, outputs.shape[-1], dtype=outputs.dtype))


def predict(outputs, loss_kind):
    """
    Class decision per sample: the final readout for last_step, the mean
    output over time otherwise (for spikes, the neuron that fires most).
    np.argmax resolves ties to the lowest class index.
    """
    outputs = np.asarray(outputs)
    score = outputs[-1] if loss_kind == LOSS_LAST_STEP else outputs.mean(axis=0)
    return np.argmax(score, axis=-1)
