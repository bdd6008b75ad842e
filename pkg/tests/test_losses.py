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

import numpy as np
import pytest

from nvbench import losses
from nvbench.errors import ConfigError, ShapeMismatchError

ALL_LOSSES = sorted(losses.LOSSES)


def one_hot_outputs(T, labels, K):
    Y = losses.one_hot(labels, K)
    return np.broadcast_to(Y, (T,) + Y.shape).copy(), Y


@pytest.mark.parametrize('kind', ALL_LOSSES)
def test_exact_targets_give_zero_loss(kind):
    outputs, _ = one_hot_outputs(4, [0, 2, 1], 3)
    result = losses.compute_loss(kind, outputs, [0, 2, 1])
    assert result.loss == 0.0
    assert not result.grads.any()


def test_silent_snn_costs_one_per_sample():
    result = losses.loss_snn_rate_mse(np.zeros((6, 4, 10)), losses.one_hot([1, 2, 3, 4], 10))
    assert result.loss == pytest.approx(1.0)


def test_last_step_ignores_earlier_steps():
    rng = np.random.default_rng(0)
    outputs = rng.normal(size=(5, 3, 4))
    Y = losses.one_hot([0, 1, 3], 4)
    outputs[-1] = Y
    result = losses.loss_last_step(outputs, Y)
    assert result.loss == 0.0
    assert not result.grads.any()
    outputs[-1] = 0.0
    grads = losses.loss_last_step(outputs, Y).grads
    assert not grads[:-1].any()
    assert grads[-1].any()


def test_rate_inspired_constant_readout():
    outputs, Y = one_hot_outputs(7, [2, 0], 3)
    assert losses.loss_rate_inspired(outputs, Y).loss == 0.0
    # the mean may hit Y while single steps miss it
    wobble = outputs.copy()
    wobble[0] += 0.5
    wobble[1] -= 0.5
    assert losses.loss_rate_inspired(wobble, Y).loss == pytest.approx(0.0, abs=1e-15)
    assert losses.loss_per_step(wobble, Y).loss > 0


def test_single_step_equivalences():
    rng = np.random.default_rng(1)
    outputs = rng.normal(size=(1, 3, 4))
    Y = losses.one_hot([0, 3, 2], 4)
    last = losses.loss_last_step(outputs, Y)
    for fn in (losses.loss_per_step, losses.loss_rate_inspired):
        other = fn(outputs, Y)
        assert other.loss == pytest.approx(last.loss)
        np.testing.assert_allclose(other.grads, last.grads)


def test_per_step_bounds_rate_inspired():
    rng = np.random.default_rng(2)
    for _ in range(20):
        outputs = rng.normal(size=(6, 4, 5))
        Y = losses.one_hot(rng.integers(0, 5, 4), 5)
        assert losses.loss_per_step(outputs, Y).loss >= losses.loss_rate_inspired(outputs, Y).loss


@pytest.mark.parametrize('kind', ALL_LOSSES)
def test_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(3)
    outputs = rng.normal(size=(4, 3, 5))
    labels = [4, 0, 2]
    grads = losses.compute_loss(kind, outputs, labels).grads
    h = 1e-6
    numeric = np.zeros_like(outputs)
    for idx in np.ndindex(outputs.shape):
        orig = outputs[idx]
        outputs[idx] = orig + h
        plus = losses.compute_loss(kind, outputs, labels).loss
        outputs[idx] = orig - h
        minus = losses.compute_loss(kind, outputs, labels).loss
        outputs[idx] = orig
        numeric[idx] = (plus - minus) / (2 * h)
    assert np.abs(numeric - grads).max() <= 1e-8


def test_predict_tie_breaks_low():
    outputs = np.zeros((3, 2, 4))
    outputs[:, 1, 2] = outputs[:, 1, 3] = 1.0
    np.testing.assert_array_equal(losses.predict(outputs, 'rate_inspired'), [0, 2])


def test_predict_uses_last_step_only_for_last_step_loss():
    outputs = np.zeros((3, 1, 2))
    outputs[:2, 0, 0] = 1.0
    outputs[2, 0, 1] = 0.5
    assert losses.predict(outputs, 'last_step')[0] == 1
    assert losses.predict(outputs, 'per_step')[0] == 0


def test_errors():
    with pytest.raises(ConfigError):
        losses.compute_loss('hinge', np.zeros((1, 1, 2)), [0])
    with pytest.raises(ShapeMismatchError):
        losses.one_hot([3], 3)
    with pytest.raises(ShapeMismatchError):
        losses.loss_per_step(np.zeros((2, 3)), losses.one_hot([0, 1], 3))
