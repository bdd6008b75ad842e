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

import io
import math
import os
import unittest

import numpy as np
import pytest

from nvbench import analysis, synthetic
from nvbench.codecs import load_tensor
from nvbench.dataset import EventDataset
from nvbench.errors import ConfigError, FeatureMapError
from nvbench.events import SliceSequence, collapse
from nvbench.network import NetworkConfig, build


def small_net(model_kind, structure='Input-6FC-5FC-3', **kwargs):
    config = NetworkConfig(model_kind=model_kind, structure=structure, input_shape=(2, 4, 4),
                           T=4, precision='float64', **kwargs)
    return build(config, seed=1)


class TestContrast(unittest.TestCase):

    def test_diagonal_is_near_zero(self):
        rng = np.random.default_rng(0)
        seq = SliceSequence(rng.integers(0, 2, (10, 2, 6, 6)), 1000)
        result = analysis.contrast_matrix(seq, k=4)
        assert result.matrix.shape == (6, 6)
        assert np.abs(np.diag(result.matrix)).max() <= 1e-12
        assert (result.matrix >= 0).all()
        assert result.mean == pytest.approx(result.matrix.mean())
        assert result.variance == pytest.approx(result.matrix.var())

    def test_complement_windows(self):
        rng = np.random.default_rng(1)
        first = rng.integers(0, 2, (1, 2, 5, 5))
        seq = SliceSequence(np.concatenate([first, 1 - first]), 1000)
        result = analysis.contrast_matrix(seq, k=0)
        assert abs(result.matrix[0, 1] + math.log(1e-16)) <= 1e-6
        assert abs(result.matrix[1, 0] + math.log(1e-16)) <= 1e-6

    def test_window_must_fit(self):
        seq = SliceSequence(np.zeros((4, 2, 2, 2), dtype=np.uint8), 1000)
        with self.assertRaises(ConfigError):
            analysis.contrast_matrix(seq, k=4)
        assert analysis.contrast_matrix(seq, k=3).matrix.shape == (1, 1)

    def test_clamped_log(self):
        values = analysis.clamped_log(np.array([0.0, 0.5, 1.0]))
        assert values[0] == pytest.approx(math.log(1e-16))
        assert values[1] == pytest.approx(math.log(0.5))
        assert values[2] < 0

    def test_faster_motion_raises_contrast(self):
        means = [analysis.contrast_matrix(collapse(synthetic.bar_stream(speed), 5000, 12)).mean
                 for speed in (0.0, 0.2, 2.0)]
        assert means[0] <= 1e-12
        assert means[0] < means[1] < means[2]

    def test_captured_data_has_more_contrast_than_converted(self):
        gesture = EventDataset([synthetic.gesture_like_stream(label, seed=s)
                                for label in range(11) for s in range(5)], 10000, 12)
        nmnist = EventDataset([synthetic.nmnist_like_stream(label, seed=s)
                               for label in range(10) for s in range(5)], 3000, 15)
        gesture_stats = analysis.dataset_contrast(gesture, samples=50, seed=0)
        nmnist_stats = analysis.dataset_contrast(nmnist, samples=50, seed=0)
        assert gesture_stats.samples == nmnist_stats.samples == 50
        assert gesture_stats.mean > nmnist_stats.mean

    def test_dataset_contrast_is_seeded(self):
        dataset = EventDataset([synthetic.nmnist_like_stream(label, seed=2) for label in range(10)],
                               3000, 15)
        a = analysis.dataset_contrast(dataset, samples=4, seed=3)
        b = analysis.dataset_contrast(dataset, samples=4, seed=3)
        assert a == b
        with self.assertRaises(ConfigError):
            analysis.dataset_contrast(EventDataset([], 3000, 15))


class TestCounting(unittest.TestCase):

    def test_count_params(self):
        counts = analysis.count_params(small_net('rnn'))
        assert counts.per_tensor['L1.W1'] == 6 * 32
        assert counts.per_tensor['L2.W2'] == 25
        assert counts.total == (6 * 32 + 36 + 6) + (5 * 6 + 25 + 5) + (3 * 5 + 3)
        assert analysis.count_params({}).total == 0

    def test_table_ops(self):
        assert analysis.table_ops('snn', 512, 512, 'forward') == (262144, 0, 0)
        assert analysis.table_ops('snn', 512, 512, 'forward', alpha=0.0) == (0, 0, 0)
        rnn = analysis.table_ops('rnn', 512, 256, 'forward')
        lstm = analysis.table_ops('lstm', 512, 256, 'forward')
        assert lstm[2] == 4 * rnn[2]
        assert analysis.table_ops('snn', 3, 4, 'backward') == (0, 0, 12)
        assert analysis.table_ops('lstm', 3, 4, 'backward') == (0, 96, 21)

    def test_lstm_backward_layer_totals_follow_table(self):
        # L1 holds 6 neurons feeding the 5 of L2 and its own 6 at the next step
        ops = analysis.estimate_ops(small_net('lstm'), 'backward', T=2, batch_size=1)
        per_path = {(layer.name, layer.path): layer for layer in ops.layers}
        spatial, temporal = per_path[('L1', 'spatial')], per_path[('L1', 'temporal')]
        M, N = 6, 5
        assert (spatial.adds + temporal.adds, spatial.muls + temporal.muls) == (0, 8 * M * N * 2)
        # the recurrent path runs once for T=2, the spatial path twice
        assert spatial.macs == M * N * 2
        assert temporal.macs == M * M
        adds, muls, macs = analysis.table_ops('lstm', M, N, 'backward')
        assert (adds, muls, spatial.macs // 2 + temporal.macs) == (0, 8 * M * N, macs)

    def test_kernel_convention_charges_every_gate_block(self):
        net = small_net('lstm')
        ops = analysis.estimate_ops(net, 'backward', T=2, batch_size=1, convention='kernels')
        per_path = {(layer.name, layer.path): layer.macs for layer in ops.layers}
        assert per_path[('L1', 'spatial')] == 4 * 6 * 5 * 2
        assert per_path[('L1', 'temporal')] == 4 * 36
        assert ops.muls == 0
        forward = analysis.estimate_ops(net, 'forward', T=2, convention='kernels')
        assert forward.totals() == analysis.estimate_ops(net, 'forward', T=2).totals()
        with self.assertRaises(ConfigError):
            analysis.estimate_ops(net, 'backward', convention='asymptotic')

    def test_snn_forward_scales_with_rate(self):
        net = small_net('snn')
        full = analysis.estimate_ops(net, 'forward', alpha=1.0, T=4, batch_size=2)
        idle = analysis.estimate_ops(net, 'forward', alpha=0.0, T=4, batch_size=2)
        assert full.adds == (32 * 6 + 6 * 5 + 5 * 3) * 8
        assert full.macs == 0
        assert idle.totals() == (0, 0, 0)

    def test_measured_rates_feed_estimate(self):
        net = small_net('snn')
        batch = (np.random.default_rng(2).random((2, 4, 2, 4, 4)) < 0.5).astype(float)
        rates = analysis.measure_rates(net, batch)
        assert list(rates) == ['L1', 'L2', 'L3']
        assert all(0.0 <= r <= 1.0 for r in rates.values())
        ops = analysis.estimate_ops(net, 'forward', T=4, batch_size=2, rates=rates)
        assert ops.layers[0].alpha == rates['L1']
        assert ops.layers[0].adds == int(round(rates['L1'] * 32 * 6 * 8))

    def test_recurrent_paths_run_t_minus_one_times(self):
        ops = analysis.estimate_ops(small_net('rnn'), 'forward', T=4, batch_size=1)
        temporal = [layer for layer in ops.layers if layer.path == 'temporal']
        assert [(layer.name, layer.macs) for layer in temporal] == [('L1', 36 * 3),
                                                                   ('L2', 25 * 3)]

    def test_direction(self):
        with self.assertRaises(ConfigError):
            analysis.estimate_ops(small_net('rnn'), 'sideways')

    def test_ops_csv(self):
        sink = io.StringIO()
        net = small_net('lstm')
        analysis.write_ops_csv([analysis.estimate_ops(net, d) for d in ('forward', 'backward')],
                               sink)
        lines = sink.getvalue().splitlines()
        assert lines[0].startswith('direction,name,path,M,N,adds,muls,macs')
        assert any(line.startswith('backward,L1,spatial') for line in lines)


class TestHistogram(unittest.TestCase):

    def test_snn_self_recurrence_sits_at_minus_leak(self):
        net = small_net('snn', leak=0.3)
        hist = analysis.weight_histogram(net, 'recurrent', bins=20)
        assert hist.total == 6 + 5 + 3
        assert hist.counts.sum() == hist.total
        (nonzero,) = np.nonzero(hist.counts)
        assert len(nonzero) == 1
        lo, hi = hist.edges[nonzero[0]], hist.edges[nonzero[0] + 1]
        assert lo - 1e-9 <= -0.3 <= hi + 1e-9

    def test_rnn_recurrent_weights_follow_init(self):
        hist = analysis.weight_histogram(small_net('rnn'), 'recurrent', bins=1)
        assert hist.total == 36 + 25
        assert hist.counts.tolist() == [61]
        assert hist.edges[0] >= -math.sqrt(1 / 5.0)
        assert hist.edges[-1] <= math.sqrt(1 / 5.0)

    def test_feedforward_and_csv(self):
        hist = analysis.weight_histogram(small_net('lstm'), 'feedforward', bins=4)
        assert hist.total == 4 * (6 * 32 + 5 * 6)
        sink = io.StringIO()
        analysis.write_histogram_csv(hist, sink)
        assert len(sink.getvalue().splitlines()) == 5
        with self.assertRaises(ConfigError):
            analysis.weight_histogram(small_net('lstm'), 'lateral')


def test_export_feature_maps(tmp_path):
    net = small_net('snn', structure='Input-4C3-AP2-5FC-3')
    sample = SliceSequence(np.zeros((4, 2, 4, 4), dtype=np.uint8), 1000)
    out_dir = str(tmp_path / 'maps')
    paths = analysis.export_feature_maps(net, sample, 'L1', [0, 3], out_dir)
    assert [os.path.basename(p) for p in paths] == ['L1_t000.nvsf', 'L1_t003.nvsf']
    maps = load_tensor(paths[1])
    assert maps.shape == (4, 4, 4)
    assert not maps.any()
    with open(os.path.join(out_dir, 'manifest.csv')) as f:
        assert f.readline().strip() == 'timestep,file,channels,height,width,mean'


def test_export_feature_maps_errors(tmp_path):
    net = small_net('snn', structure='Input-4C3-AP2-5FC-3')
    sample = SliceSequence(np.zeros((4, 2, 4, 4), dtype=np.uint8), 1000)
    with pytest.raises(FeatureMapError):
        analysis.export_feature_maps(net, sample, 'L3', [0], str(tmp_path))
    with pytest.raises(FeatureMapError):
        analysis.export_feature_maps(net, sample, 'L9', [0], str(tmp_path))
    with pytest.raises(FeatureMapError):
        analysis.export_feature_maps(net, sample, 'L1', [4], str(tmp_path))


def test_matrix_and_params_csv(tmp_path):
    path = str(tmp_path / 'params.csv')
    analysis.write_params_csv(analysis.count_params(small_net('snn')), path)
    with open(path) as f:
        rows = f.read().splitlines()
    assert rows[0] == 'tensor,count'
    assert rows[-1] == 'total,%d' % (32 * 6 + 6 * 5 + 5 * 3)
    sink = io.StringIO()
    analysis.write_matrix_csv(np.eye(2), sink)
    assert sink.getvalue() == '1.0,0.0\n0.0,1.0\n'
