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

from nvbench import cells, gradcheck, tensor
from nvbench.analysis import estimate_ops, measure_rates
from nvbench.errors import ConfigError
from nvbench.network import NetworkConfig, build


@pytest.mark.parametrize('model_kind', ['rnn', 'lstm'])
def test_recurrent_gradients_match_finite_differences(model_kind):
    report = gradcheck.run_gradcheck(model_kind, seed=0, seeds=20)
    assert report.method == 'finite-difference'
    assert report.passed, report.per_tensor
    assert report.max_error <= 1e-5


@pytest.mark.parametrize('loss_kind', ['last_step', 'per_step'])
def test_other_losses_match_finite_differences(loss_kind):
    report = gradcheck.run_gradcheck('rnn', seed=3, seeds=2, loss_kind=loss_kind)
    assert report.passed, report.per_tensor


def test_spiking_gradients_match_graph_oracle():
    report = gradcheck.run_gradcheck('snn', seed=0, seeds=20)
    assert report.method == 'graph'
    assert report.tolerance == 1e-10
    assert report.passed, report.per_tensor


@pytest.mark.parametrize('options', [
    {'leakage_enabled': False},
    {'reset_enabled': False},
    {'leak': 0.0, 'reset_enabled': False},
])
def test_spiking_ablations_match_graph_oracle(options):
    assert gradcheck.run_gradcheck('snn', seed=5, seeds=3, **options).passed


def test_graph_oracle_catches_flipped_membrane_term():
    assert gradcheck.run_mutation_check(seed=0, seeds=3)
    # the patch is undone afterwards
    assert gradcheck.run_gradcheck('snn', seed=0, seeds=2).passed
    assert cells.lif_temporal_grad.__name__ == 'lif_temporal_grad'


def test_graph_oracle_rejects_other_networks():
    net = gradcheck.tiny_network('rnn', 0)
    data, labels = gradcheck.tiny_batch(net, 0)
    with pytest.raises(ConfigError):
        gradcheck.snn_graph_grads(net, data, labels)
    with pytest.raises(ConfigError):
        gradcheck.run_gradcheck('gru')


def test_relative_error():
    assert gradcheck.relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert gradcheck.relative_error(np.ones(2), -np.ones(2)) == 1.0
    assert gradcheck.relative_error(np.ones(2), np.ones(2)) == 0.0


def _as_table(op_count):
    return {(layer.name, layer.path): (layer.adds, layer.muls, layer.macs)
            for layer in op_count.layers}


def _counted(model_kind, direction, seed, rng):
    config = NetworkConfig(model_kind=model_kind, structure='Input-7FC-5FC-4',
                           input_shape=(2, 3, 3), T=4, precision='float64')
    net = build(config, seed=seed)
    batch = (rng.random((2, 4, 2, 3, 3)) < 0.4).astype(np.float64)
    rates = measure_rates(net, batch) if model_kind == 'snn' else None
    return net, rates, gradcheck.count_ops(net, batch, direction, labels=np.array([1, 3]))


@pytest.mark.parametrize('model_kind', ['snn', 'rnn', 'lstm'])
@pytest.mark.parametrize('direction', ['forward', 'backward'])
def test_estimate_matches_counter(model_kind, direction):
    rng = np.random.default_rng(len(model_kind) * 10 + len(direction))
    for seed in range(3):
        net, rates, counted = _counted(model_kind, direction, seed, rng)
        estimated = estimate_ops(net, direction, T=4, batch_size=2, rates=rates,
                                 convention='kernels')
        assert _as_table(counted) == _as_table(estimated)
        table = estimate_ops(net, direction, T=4, batch_size=2, rates=rates)
        if model_kind != 'lstm' or direction != 'backward':
            assert _as_table(table) == _as_table(estimated)


def test_lstm_backward_table_against_counter():
    net, _, counted = _counted('lstm', 'backward', 0, np.random.default_rng(4))
    table = _as_table(estimate_ops(net, 'backward', T=4, batch_size=2))
    kernels = _as_table(counted)
    assert set(table) == set(kernels)
    # the hidden layer L1 (7 neurons) feeds L2 (5 neurons) and itself
    spatial, temporal = table[('L1', 'spatial')], table[('L1', 'temporal')]
    assert spatial == (0, 8 * 7 * 5 * 8, 7 * 5 * 8)
    assert temporal == (0, 0, 7 * 7 * 3 * 2)
    # the fused-gate kernels run every gate block once
    assert kernels[('L1', 'spatial')] == (0, 0, 4 * 7 * 5 * 8)
    assert kernels[('L1', 'temporal')] == (0, 0, 4 * 7 * 7 * 3 * 2)
    # readout paths are plain products under both conventions
    assert table[('L2', 'spatial')] == kernels[('L2', 'spatial')] == (0, 0, 5 * 4 * 8)


def test_counter_sees_event_sparsity():
    net = build(NetworkConfig(model_kind='snn', structure='Input-4FC-3', input_shape=(2, 2, 2),
                              T=3, precision='float64'))
    batch = np.zeros((2, 3, 2, 2, 2))
    batch[0, 1, 0, 0, 0] = 1.0
    batch[1, 2, 1, 1, 1] = 1.0
    counted = _as_table(gradcheck.count_ops(net, batch, 'forward'))
    assert counted[('input', 'spatial')] == (2 * 4, 0, 0)


def test_counter_restores_kernels():
    net = gradcheck.tiny_network('rnn', 0)
    data, labels = gradcheck.tiny_batch(net, 0)
    gradcheck.count_ops(net, data, 'backward', labels=labels)
    assert tensor.linear.__name__ == 'linear'
    assert tensor.linear_backward.__name__ == 'linear_backward'


def test_counter_rejects_conv_and_cross_recurrence():
    conv = build(NetworkConfig(model_kind='snn', structure='Input-2C3-3', input_shape=(2, 4, 4),
                               T=2))
    batch = np.zeros((1, 2, 2, 4, 4))
    with pytest.raises(ConfigError):
        gradcheck.count_ops(conv, batch, 'forward')
    cross = build(NetworkConfig(model_kind='snn', structure='Input-4FC-3', input_shape=(2, 4, 4),
                                T=2, cross_recurrence=True))
    with pytest.raises(ConfigError):
        gradcheck.count_ops(cross, batch, 'forward')
    with pytest.raises(ConfigError):
        gradcheck.count_ops(cross, batch, 'upward')
