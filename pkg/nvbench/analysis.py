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
import csv
import logging
import os

import numpy as np

from .codecs import save_tensor
from .constants import (
    CONTRAST_EPSILON,
    DEFAULT_CONTRAST_SAMPLES,
    DEFAULT_CONTRAST_WINDOW,
    MODEL_LSTM,
    MODEL_SNN,
)
from .errors import ConfigError, FeatureMapError
from .events import SliceSequence
from .network import CellLayer, LifLayer, LstmLayer, ReadoutLayer
from .utils import make_rng

logger = logging.getLogger('nvbench')

ContrastMatrix = collections.namedtuple('ContrastMatrix',
                                        ['matrix', 'k', 'epsilon', 'mean', 'variance'])
DatasetContrast = collections.namedtuple('DatasetContrast',
                                         ['mean', 'variance', 'samples', 'k', 'seed'])
ParamCount = collections.namedtuple('ParamCount', ['per_tensor', 'total'])
LayerOps = collections.namedtuple(
    'LayerOps', ['name', 'path', 'M', 'N', 'adds', 'muls', 'macs', 'alpha', 'extension'])
Histogram = collections.namedtuple('Histogram', ['counts', 'edges', 'total'])

# stream id for contrast sampling under the root seed
CONTRAST_STREAM = 2


def clamped_log(v, epsilon=CONTRAST_EPSILON):
    """log(v) with v held inside [epsilon, 1 - epsilon]."""
    v = np.asarray(v, dtype=np.float64)
    return np.minimum(np.log(np.maximum(v, epsilon)), np.log1p(-epsilon))


def contrast_matrix(seq, k=DEFAULT_CONTRAST_WINDOW, epsilon=CONTRAST_EPSILON):
    """
    Cross-entropy between every pair of slice windows S[t..t+k] of one
    sequence. Entry (tx, ty) compares window tx as the target with window
    ty as the prediction, averaged over the (k + 1) * 2 * H * W elements of
    a window. The matrix is (T - k) x (T - k).
    """
    data = seq.data if isinstance(seq, SliceSequence) else np.asarray(seq)
    T = data.shape[0]
    if k < 0 or k >= T:
        raise ConfigError('window k=%d needs 0 <= k < T=%d' % (k, T))
    frame = data.reshape(T, -1).astype(np.float64)
    count = T - k
    windows = np.stack([frame[t:t + k + 1].reshape(-1) for t in range(count)])
    n = windows.shape[1]
    log_p = clamped_log(windows, epsilon)
    log_q = clamped_log(1.0 - windows, epsilon)
    ce = -(windows @ log_p.T + (1.0 - windows) @ log_q.T) / n
    ce = np.maximum(ce, 0.0)
    return ContrastMatrix(ce, k, epsilon, float(ce.mean()), float(ce.var()))


def dataset_contrast(dataset, k=DEFAULT_CONTRAST_WINDOW, samples=DEFAULT_CONTRAST_SAMPLES,
                     seed=0):
    """Mean of the per-recording matrix mean and variance over a seeded sample."""
    if len(dataset) == 0:
        raise ConfigError('empty dataset')
    count = min(samples, len(dataset))
    picks = make_rng(seed, CONTRAST_STREAM).choice(len(dataset), size=count, replace=False)
    means = []
    variances = []
    for index in sorted(picks):
        m = contrast_matrix(dataset[int(index)], k)
        means.append(m.mean)
        variances.append(m.variance)
    return DatasetContrast(float(np.mean(means)), float(np.mean(variances)), count, k, seed)


def count_params(net):
    """Exact per-tensor and total parameter counts (net or name -> array mapping)."""
    tensors = net.parameters() if hasattr(net, 'parameters') else net
    per_tensor = collections.OrderedDict(
        (name, int(np.prod(t.shape, dtype=np.int64))) for name, t in tensors.items())
    return ParamCount(per_tensor, sum(per_tensor.values()))


class OpCount(object):
    """Arithmetic of one direction of a forward or backward pass, per producer path."""

    def __init__(self, direction, layers):
        self.direction = direction
        self.layers = list(layers)

    @property
    def adds(self):
        return sum(layer.adds for layer in self.layers)

    @property
    def muls(self):
        return sum(layer.muls for layer in self.layers)

    @property
    def macs(self):
        return sum(layer.macs for layer in self.layers)

    def totals(self, include_extension=True):
        picked = [layer for layer in self.layers if include_extension or not layer.extension]
        return (sum(layer.adds for layer in picked), sum(layer.muls for layer in picked),
                sum(layer.macs for layer in picked))

    def __repr__(self):
        return 'OpCount(%s, adds=%d, muls=%d, macs=%d)' % (
            self.direction, self.adds, self.muls, self.macs)


def weighted_layers(net):
    """Indices of the layers holding weights, in forward order."""
    return [i for i, layer in enumerate(net.layers)
            if isinstance(layer, (CellLayer, ReadoutLayer))]


def measure_rates(net, batch):
    """
    Fraction of nonzero elements in the tensor entering each weighted layer,
    over all timesteps and samples of one forward pass.
    """
    _, tape = net.forward(batch, train_mode=True)
    rates = collections.OrderedDict()
    for i in weighted_layers(net):
        x = np.stack([tape.get(i, t).x for t in range(tape.T)])
        rates[net.layers[i].name] = float(np.count_nonzero(x)) / x.size
    return rates


def _gates(layer):
    return 4 if isinstance(layer, LstmLayer) else 1


# accounting conventions for the LSTM backward pass
CONVENTION_TABLE = 'table'
CONVENTION_KERNELS = 'kernels'
CONVENTIONS = (CONVENTION_TABLE, CONVENTION_KERNELS)


def estimate_ops(net, direction, alpha=1.0, T=1, batch_size=1, rates=None,
                 convention=CONVENTION_TABLE):
    """
    Closed-form operation counts for `T` timesteps of `batch_size` samples.

    A weighted layer's incoming tensor of M elements feeding its N neurons
    is charged to the producer: event-driven ADDs for spikes (alpha * M * N),
    dense MACs otherwise, four blocks for an LSTM consumer. Recurrent paths
    (M x M) run T - 1 times per sample. Backward charges the gradient a
    producer receives. Convolutional paths are counted as
    Cout * Cin * 9 * H * W MACs and marked as an extension.

    The two conventions differ only for the LSTM backward pass. Under
    'table' a producer below an LSTM consumer is charged 8MN MULs for the
    diag-scaled gate blocks plus MN MACs, and the recurrent path M^2 MACs,
    so one layer totals 8MN MULs + (MN + M^2) MACs. Under 'kernels' the
    counts are those of the fused-gate products the backward step runs:
    4MN MACs spatially and 4M^2 MACs temporally.

    :param alpha: spike rate used for every SNN path without a `rates` entry
    :param rates: layer name -> measured incoming spike rate (see measure_rates)
    :param convention: 'table' or 'kernels'
    """
    if direction not in ('forward', 'backward'):
        raise ConfigError('direction must be forward or backward')
    if convention not in CONVENTIONS:
        raise ConfigError('convention must be one of %s' % ', '.join(CONVENTIONS))
    lstm_table = direction == 'backward' and convention == CONVENTION_TABLE
    rates = rates or {}
    spatial = T * batch_size
    temporal = max(T - 1, 0) * batch_size
    kind = net.config.model_kind
    entries = []
    indices = weighted_layers(net)
    for pos, i in enumerate(indices):
        consumer = net.layers[i]
        in_shape = net.shapes[i]
        M = int(np.prod(in_shape))
        producer = net.layers[indices[pos - 1]] if pos else None
        name = producer.name if producer is not None else 'input'
        conv = isinstance(consumer, CellLayer) and consumer.conv
        gates = _gates(consumer)
        a = rates.get(consumer.name, alpha)

        if conv:
            C_in, H, W = in_shape
            macs = gates * consumer.size * C_in * 9 * H * W
            if direction == 'forward' or producer is not None:
                entries.append(LayerOps(name, 'spatial', M, consumer.size * H * W, 0, 0,
                                        macs * spatial, a, True))
        else:
            N = consumer.size
            if direction == 'forward':
                if kind == MODEL_SNN:
                    entries.append(LayerOps(name, 'spatial', M, N,
                                            int(round(a * M * N * spatial)), 0, 0, a, False))
                else:
                    entries.append(LayerOps(name, 'spatial', M, N, 0, 0,
                                            gates * M * N * spatial, None, False))
            elif producer is not None:
                if lstm_table and isinstance(consumer, LstmLayer):
                    entries.append(LayerOps(name, 'spatial', M, N, 0, 8 * M * N * spatial,
                                            M * N * spatial, None, False))
                else:
                    entries.append(LayerOps(name, 'spatial', M, N, 0, 0,
                                            gates * M * N * spatial, None, False))

        if isinstance(consumer, CellLayer) and kind != MODEL_SNN:
            R = consumer.size
            if consumer.conv:
                _, H, W = net.shapes[i + 1]
                entries.append(LayerOps(consumer.name, 'temporal', R * H * W, R * H * W, 0, 0,
                                        gates * R * R * 9 * H * W * temporal, None, True))
                continue
            blocks = 1 if lstm_table else gates
            entries.append(LayerOps(consumer.name, 'temporal', R, R, 0, 0,
                                    blocks * R * R * temporal, None, False))
        elif isinstance(consumer, LifLayer) and consumer.params.W_rec is not None:
            R = int(np.prod(net.shapes[i + 1]))
            if direction == 'forward':
                ops = LayerOps(consumer.name, 'temporal', R, R, int(round(a * R * R * temporal)),
                               0, 0, a, True)
            else:
                ops = LayerOps(consumer.name, 'temporal', R, R, 0, 0, R * R * temporal, None, True)
            entries.append(ops)
    return OpCount(direction, entries)


def table_ops(model_kind, M, N, direction, alpha=1.0):
    """
    Per-timestep costs of one fully connected layer of M neurons feeding N
    neurons of the same kind, as (adds, muls, macs). Only matrix operations
    count; the LSTM backward MULs form the diag-scaled gate blocks.
    """
    if model_kind == MODEL_SNN:
        return (alpha * M * N, 0, 0) if direction == 'forward' else (0, 0, M * N)
    if model_kind == MODEL_LSTM:
        if direction == 'forward':
            return (0, 0, 4 * (M * N + M * M))
        return (0, 8 * M * N, M * N + M * M)
    return (0, 0, M * N + M * M)


def weight_histogram(net, which='recurrent', bins=50):
    """
    Distribution of recurrent or feedforward weights. The self-recurrent
    weight of a LIF neuron is the fixed -leak (one entry per neuron); for
    RNN and LSTM layers the recurrent weights are the W2 entries.
    """
    if which not in ('recurrent', 'feedforward'):
        raise ConfigError('which must be recurrent or feedforward')
    values = []
    for layer in net.cell_layers:
        tensors = layer.parameters()
        if which == 'feedforward':
            values.extend(t.ravel() for k, t in tensors.items() if k == 'W' or k.startswith('W1'))
        elif isinstance(layer, LifLayer):
            values.append(np.full(layer.size, -layer.params.effective_leak))
            if layer.params.W_rec is not None:
                values.append(layer.params.W_rec.ravel())
        else:
            values.extend(t.ravel() for k, t in tensors.items() if k.startswith('W2'))
    values = np.concatenate(values).astype(np.float64) if values else np.zeros(0)
    counts, edges = np.histogram(values, bins=bins)
    return Histogram(counts, edges, int(values.size))


def _find_layer(net, layer):
    if isinstance(layer, int):
        if not 0 <= layer < len(net.layers):
            raise FeatureMapError('no layer %d' % layer)
        return layer
    for i, candidate in enumerate(net.layers):
        if candidate.name == layer:
            return i
    raise FeatureMapError('no layer named %r' % layer)


def export_feature_maps(net, sample, layer, timesteps, out_dir):
    """
    Write the activation maps of a convolutional cell layer at the given
    timesteps as NVSF tensors [C, H, W], one file per timestep, plus
    manifest.csv (timestep, file, channels, height, width, mean).

    :return: list of written tensor paths
    """
    index = _find_layer(net, layer)
    target = net.layers[index]
    if not isinstance(target, CellLayer) or not target.conv:
        raise FeatureMapError('%s is not a convolutional layer' % target.name)
    data = sample.data[np.newaxis] if isinstance(sample, SliceSequence) else np.asarray(sample)
    if data.ndim == 4:
        data = data[np.newaxis]
    _, tape = net.forward(data, train_mode=True)
    timesteps = list(timesteps)
    for t in timesteps:
        if not 0 <= t < tape.T:
            raise FeatureMapError('timestep %d outside 0..%d' % (t, tape.T - 1))

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    with open(os.path.join(out_dir, 'manifest.csv'), 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['timestep', 'file', 'channels', 'height', 'width', 'mean'])
        for t in timesteps:
            maps = np.asarray(target.output(tape.get(index, t))[0], dtype=np.float32)
            name = '%s_t%03d.nvsf' % (target.name, t)
            path = os.path.join(out_dir, name)
            save_tensor(maps, path)
            writer.writerow([t, name] + list(maps.shape) + [repr(float(maps.mean()))])
            paths.append(path)
    logger.debug('wrote %d feature maps of %s to %s', len(paths), target.name, out_dir)
    return paths


def write_matrix_csv(matrix, sink):
    _write_rows(sink, [[repr(float(v)) for v in row] for row in np.asarray(matrix)])


def write_histogram_csv(histogram, sink):
    rows = [['bin_start', 'bin_end', 'count']]
    for lo, hi, c in zip(histogram.edges[:-1], histogram.edges[1:], histogram.counts):
        rows.append([repr(float(lo)), repr(float(hi)), int(c)])
    _write_rows(sink, rows)


def write_params_csv(param_count, sink):
    rows = [['tensor', 'count']]
    rows.extend([name, n] for name, n in param_count.per_tensor.items())
    rows.append(['total', param_count.total])
    _write_rows(sink, rows)


def write_ops_csv(op_counts, sink):
    rows = [['direction'] + list(LayerOps._fields)]
    for op_count in op_counts:
        for entry in op_count.layers:
            rows.append([op_count.direction] + ['' if v is None else v for v in entry])
    _write_rows(sink, rows)


def _write_rows(sink, rows):
    if hasattr(sink, 'write'):
        csv.writer(sink, lineterminator='\n').writerows(rows)
        return
    with open(sink, 'w', newline='') as f:
        csv.writer(f, lineterminator='\n').writerows(rows)
