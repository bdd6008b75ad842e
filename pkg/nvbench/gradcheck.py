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
Independent checks of the hand-derived gradients and of the operation
accounting:

- central finite differences of the loss for RNN and LSTM networks;
- for spiking networks, reverse accumulation over an explicitly built
  graph of the unrolled membrane dynamics, with the surrogate derivative
  installed at every firing node;
- an arithmetic counter that instruments the dense kernels during a real
  forward or backward pass and tallies event-driven ADDs and MACs.
"""

from __future__ import absolute_import, division

import collections
import contextlib
import logging

import numpy as np

from . import cells, tensor
from .analysis import LayerOps, OpCount, weighted_layers
from .constants import MODEL_KINDS, MODEL_SNN
from .errors import ConfigError
from .losses import compute_loss
from .network import CellLayer, LifLayer, LstmLayer, NetworkConfig, ReadoutLayer, build
from .utils import make_rng

logger = logging.getLogger('nvbench')

FD_STEP = 1e-5
FD_TOLERANCE = 1e-5
ORACLE_TOLERANCE = 1e-10
DEFAULT_SEEDS = 20

TINY_STRUCTURE = 'Input-8FC-8FC-3'
TINY_INPUT = (2, 4, 4)
TINY_T = 4
TINY_BATCH = 3

GradcheckReport = collections.namedtuple(
    'GradcheckReport', ['model_kind', 'method', 'max_error', 'tolerance', 'passed', 'per_tensor'])


def tiny_network(model_kind, seed, T=TINY_T, **options):
    config = NetworkConfig(model_kind=model_kind, structure=TINY_STRUCTURE,
                           input_shape=TINY_INPUT, T=T, precision='float64', **options)
    return build(config, seed=seed)


def tiny_batch(net, seed, batch_size=TINY_BATCH, density=0.5):
    rng = make_rng(seed, 7)
    shape = (batch_size, net.config.T) + net.config.input_shape
    data = (rng.random(shape) < density).astype(np.float64)
    labels = rng.integers(0, net.config.num_classes, size=batch_size)
    return data, labels


def analytic_grads(net, data, labels):
    outputs, tape = net.forward(data, train_mode=True)
    result = compute_loss(net.config.loss_kind, outputs, labels)
    return net.backward(tape, result.grads)


def _loss(net, data, labels):
    outputs, _ = net.forward(data, train_mode=False)
    return compute_loss(net.config.loss_kind, outputs, labels).loss


def numerical_grads(net, data, labels, step=FD_STEP):
    """Central differences of the loss for every parameter entry."""
    grads = collections.OrderedDict()
    for name, param in net.parameters().items():
        grad = np.zeros_like(param)
        flat = param.reshape(-1)
        out = grad.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            plus = _loss(net, data, labels)
            flat[i] = saved - step
            minus = _loss(net, data, labels)
            flat[i] = saved
            out[i] = (plus - minus) / (2.0 * step)
        grads[name] = grad
    return grads


def relative_error(a, b):
    """||a - b|| / (||a|| + ||b||), 0 when both vanish."""
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


# -- reverse accumulation oracle ----------------------------------------------

class Var(object):
    """A node of the unrolled graph: a value plus local backward rules to its parents."""

    __slots__ = ['value', 'parents', 'grad']
    # numpy operands defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.grad = None

    def __add__(self, other):
        other = _lift(other)
        return Var(self.value + other.value, ((self, _identity), (other, _identity)))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) + (-self)

    def __neg__(self):
        return Var(-self.value, ((self, lambda g: -g),))

    def __mul__(self, other):
        other = _lift(other)
        a, b = self.value, other.value
        return Var(a * b, ((self, lambda g: g * b), (other, lambda g: g * a)))

    __rmul__ = __mul__


def _identity(g):
    return g


def _lift(value):
    return value if isinstance(value, Var) else Var(value)


def dense(x, W):
    """x [B, in] times W^T for W [out, in]."""
    return Var(x.value @ W.value.T,
               ((x, lambda g: g @ W.value), (W, lambda g: g.T @ x.value)))


def fire(u, u_th, a):
    """Heaviside at u_th; its backward rule is the rectangular surrogate."""
    fprime = cells.surrogate_grad(u.value, u_th, a)
    return Var((u.value >= u_th).astype(np.float64), ((u, lambda g: g * fprime),))


def mean_over(values):
    total = values[0]
    for v in values[1:]:
        total = total + v
    return total * (1.0 / len(values))


def sum_all(v):
    return Var(v.value.sum(), ((v, lambda g: np.broadcast_to(g, v.value.shape)),))


def backprop(root):
    """Reverse accumulation from a scalar root over the recorded parents."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.grad is None:
            continue
        for parent, rule in node.parents:
            contribution = rule(node.grad)
            parent.grad = contribution if parent.grad is None else parent.grad + contribution


def snn_graph_grads(net, data, labels):
    """
    Gradients of the spike-rate loss by reverse accumulation over the
    unrolled LIF graph of a dense spiking network.
    """
    if net.config.model_kind != MODEL_SNN:
        raise ConfigError('the graph oracle covers spiking networks')
    layers = net.layers
    if not all(isinstance(layer, LifLayer) and not layer.conv for layer in layers):
        raise ConfigError('the graph oracle covers fully connected spiking stacks')
    B, T = data.shape[:2]
    weights = [Var(layer.params.W) for layer in layers]
    recurrent = [Var(layer.params.W_rec) if layer.params.W_rec is not None else None
                 for layer in layers]
    u = [Var(np.zeros((B, layer.size))) for layer in layers]
    o = [Var(np.zeros((B, layer.size))) for layer in layers]
    outputs = []
    for t in range(T):
        x = Var(data[:, t].reshape(B, -1))
        for n, layer in enumerate(layers):
            p = layer.params
            carried = u[n] * (1.0 - o[n]) if p.reset_enabled else u[n]
            u_next = p.effective_leak * carried + dense(x, weights[n])
            if recurrent[n] is not None:
                u_next = u_next + dense(o[n], recurrent[n])
            u[n] = u_next
            o[n] = fire(u[n], p.u_th, p.a)
            x = o[n]
        outputs.append(x)

    Y = np.zeros((B, net.config.num_classes))
    Y[np.arange(B), labels] = 1.0
    err = Y - mean_over(outputs)
    loss = sum_all(err * err) * (1.0 / B)
    backprop(loss)

    grads = collections.OrderedDict()
    for layer, W, W_rec in zip(layers, weights, recurrent):
        grads['%s.W' % layer.name] = W.grad if W.grad is not None else np.zeros_like(W.value)
        if W_rec is not None:
            grads['%s.W_rec' % layer.name] = \
                W_rec.grad if W_rec.grad is not None else np.zeros_like(W_rec.value)
    return grads


# -- drivers ------------------------------------------------------------------

def check_network(net, data, labels):
    """Compare analytic BPTT against the oracle for the network's kind."""
    analytic = analytic_grads(net, data, labels)
    if net.config.model_kind == MODEL_SNN:
        reference = snn_graph_grads(net, data, labels)
        errors = collections.OrderedDict(
            (name, float(np.max(np.abs(analytic[name] - reference[name]), initial=0.0)))
            for name in analytic)
        return errors, 'graph', ORACLE_TOLERANCE
    reference = numerical_grads(net, data, labels)
    errors = collections.OrderedDict(
        (name, relative_error(analytic[name], reference[name])) for name in analytic)
    return errors, 'finite-difference', FD_TOLERANCE


def run_gradcheck(model_kind, seed=0, seeds=DEFAULT_SEEDS, **options):
    """
    Check analytic gradients of tiny networks over `seeds` consecutive
    seeds starting at `seed`. Errors are max absolute differences against
    the graph oracle for spiking networks, per-tensor relative errors
    against finite differences otherwise.
    """
    if model_kind not in MODEL_KINDS:
        raise ConfigError('unknown model kind %r' % model_kind)
    worst = collections.OrderedDict()
    method = tolerance = None
    for s in range(seed, seed + seeds):
        net = tiny_network(model_kind, s, **options)
        data, labels = tiny_batch(net, s)
        errors, method, tolerance = check_network(net, data, labels)
        for name, err in errors.items():
            worst[name] = max(worst.get(name, 0.0), err)
    max_error = max(worst.values()) if worst else 0.0
    report = GradcheckReport(model_kind, method, max_error, tolerance,
                             max_error <= tolerance, worst)
    logger.info('%s gradcheck (%s, %d seeds): max error %.3e, %s', model_kind, method, seeds,
                max_error, 'ok' if report.passed else 'FAILED')
    return report


@contextlib.contextmanager
def flipped_membrane_term():
    """Temporarily negate the membrane-path terms of the LIF backward step."""
    original = cells.lif_temporal_grad

    def flipped(params, entry, du_next):
        do, du = original(params, entry, du_next)
        return -do, -du

    cells.lif_temporal_grad = flipped
    try:
        yield
    finally:
        cells.lif_temporal_grad = original


def run_mutation_check(seed=0, seeds=3):
    """True when the oracle rejects a LIF backward with a sign-flipped membrane term."""
    with flipped_membrane_term():
        report = run_gradcheck(MODEL_SNN, seed=seed, seeds=seeds)
    return not report.passed


# -- arithmetic counter -------------------------------------------------------

def _input_weights(layer):
    if isinstance(layer, LstmLayer):
        return [layer.params.gates[g]['W1'] for g in cells.LSTM_GATES]
    if isinstance(layer, LifLayer):
        return [layer.params.W]
    if isinstance(layer, ReadoutLayer):
        return [layer.W]
    return [layer.params.W1]


def _recurrent_weights(layer):
    if isinstance(layer, LstmLayer):
        return [layer.params.gates[g]['W2'] for g in cells.LSTM_GATES]
    if isinstance(layer, CellLayer) and not isinstance(layer, LifLayer):
        return [layer.params.W2]
    return []


class KernelCounter(object):
    """
    Tallies the dense products the network's own kernels execute, keyed
    like estimate_ops: each weight tensor belongs to one producer path.

    Spike inputs are counted as event-driven ADDs (one per output row per
    nonzero input), everything else as MACs. Backward counts only the
    product that propagates the gradient to the kernel's input; weight
    gradients are not path costs. Products against the zero initial
    state and gradients sent below the first layer are not counted.
    """

    def __init__(self, net, direction):
        self.direction = direction
        self.event_driven = net.config.model_kind == MODEL_SNN
        self.paths = {}
        self.tallies = collections.OrderedDict()
        indices = weighted_layers(net)
        for pos, i in enumerate(indices):
            consumer = net.layers[i]
            name = net.layers[indices[pos - 1]].name if pos else 'input'
            for W in _input_weights(consumer):
                self._register(W, (name, 'spatial'), skip=direction == 'backward' and not pos)
            for W in _recurrent_weights(consumer):
                self._register(W, (consumer.name, 'temporal'))

    def _register(self, W, key, skip=False):
        self.paths[id(W)] = (key, skip)
        if not skip:
            self.tallies.setdefault(key, [W.shape[1], W.shape[0], 0, 0])

    def _path(self, X, W, direction):
        if direction != self.direction:
            return None
        key, skip = self.paths.get(id(W), (None, True))
        if skip or (key[1] == 'temporal' and not np.any(X)):
            return None
        return self.tallies[key]

    def on_linear(self, X, W):
        tally = self._path(X, W, 'forward')
        if tally is None:
            return
        if self.event_driven:
            tally[2] += int(np.count_nonzero(X)) * W.shape[0]
        else:
            tally[3] += X.shape[0] * W.size

    def on_linear_backward(self, dY, X, W):
        tally = self._path(X, W, 'backward')
        if tally is not None:
            tally[3] += dY.shape[0] * W.size

    @contextlib.contextmanager
    def installed(self):
        """Route tensor.linear and tensor.linear_backward through the counter."""
        linear, linear_backward = tensor.linear, tensor.linear_backward

        def counted_linear(X, W):
            self.on_linear(X, W)
            return linear(X, W)

        def counted_linear_backward(dY, X, W):
            self.on_linear_backward(dY, X, W)
            return linear_backward(dY, X, W)

        tensor.linear, tensor.linear_backward = counted_linear, counted_linear_backward
        try:
            yield self
        finally:
            tensor.linear, tensor.linear_backward = linear, linear_backward

    def op_count(self):
        return OpCount(self.direction, [
            LayerOps(name, path, M, N, adds, 0, macs, None, False)
            for (name, path), (M, N, adds, macs) in self.tallies.items()])


def count_ops(net, batch, direction, labels=None):
    """
    Run one real forward (and, for 'backward', backward) pass with the
    dense kernels instrumented and return the counted arithmetic, grouped
    like estimate_ops with the 'kernels' convention. Fully connected
    networks only.
    """
    if direction not in ('forward', 'backward'):
        raise ConfigError('direction must be forward or backward')
    for layer in net.cell_layers:
        if layer.conv or getattr(layer.params, 'W_rec', None) is not None:
            raise ConfigError('the op counter covers fully connected networks without '
                              'cross-recurrence')
    counter = KernelCounter(net, direction)
    with counter.installed():
        outputs, tape = net.forward(batch, train_mode=True)
        if direction == 'backward':
            if labels is None:
                labels = np.zeros(outputs.shape[1], dtype=np.int64)
            net.backward(tape, compute_loss(net.config.loss_kind, outputs, labels).grads)
    logger.debug('counted %s kernels over %d timesteps of %d samples', direction, tape.T,
                 tape.batch_size)
    return counter.op_count()
