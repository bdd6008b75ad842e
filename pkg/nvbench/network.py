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
import math
import re
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Tuple

import numpy as np
import yaml

from . import cells, losses, tensor
from .codecs import load_checkpoint, save_checkpoint
from .constants import (
    DEFAULT_FIRING_THRESHOLD,
    DEFAULT_GRADIENT_WIDTH,
    DEFAULT_LEAKAGE_FACTOR,
    LOSS_KINDS,
    LOSS_RATE_INSPIRED,
    LOSS_SNN_RATE_MSE,
    MODEL_KINDS,
    MODEL_LSTM,
    MODEL_RNN,
    MODEL_SNN,
    NUM_POLARITIES,
    READOUT_LINEAR,
    READOUT_SPIKE_RATE,
    STRUCTURES,
    adaptive_tau,
)
from .errors import CheckpointError, ConfigError, ShapeMismatchError, TapeError
from .events import SliceSequence, stack

logger = logging.getLogger('nvbench')

LayerSpec = collections.namedtuple('LayerSpec', ['kind', 'size'])

_TOKEN_PATTERNS = (
    (re.compile(r'^MP(\d+)$'), 'maxpool'),
    (re.compile(r'^AP(\d+)$'), 'avgpool'),
    (re.compile(r'^(\d+)C3$'), 'conv'),
    (re.compile(r'^(\d+)FC$'), 'fc'),
    (re.compile(r'^(\d+)$'), 'output'),
)


def parse_structure(text):
    """
    Parse the Input-...-classes notation, e.g.
    'Input-MP4-64C3-128C3-AP2-128C3-AP2-256FC-11': MPk / APk are k x k
    max / average pooling, nC3 a 3x3 convolution with n maps, nFC a fully
    connected layer of n neurons, the final number the class count.
    """
    text = STRUCTURES.get(text, text)
    tokens = [t.strip() for t in text.split('-')]
    if len(tokens) < 2 or tokens[0] != 'Input':
        raise ConfigError('structure must start with Input and end with a class count: %r' % text)
    specs = []
    for token in tokens[1:]:
        for pattern, kind in _TOKEN_PATTERNS:
            m = pattern.match(token)
            if m:
                specs.append(LayerSpec(kind, int(m.group(1))))
                break
        else:
            raise ConfigError('unknown layer %r in %r' % (token, text))
    if specs[-1].kind != 'output' or any(s.kind == 'output' for s in specs[:-1]):
        raise ConfigError('structure must end with exactly one class count: %r' % text)
    seen_fc = False
    for spec in specs:
        if spec.size < 1:
            raise ConfigError('layer sizes must be positive: %r' % text)
        if spec.kind == 'fc':
            seen_fc = True
        elif spec.kind in ('conv', 'maxpool', 'avgpool') and seen_fc:
            raise ConfigError('%s after a fully connected layer in %r' % (spec.kind, text))
    return specs


@dataclass
class NetworkConfig:
    model_kind: str = MODEL_SNN
    structure: str = 'nmnist_mlp'
    input_shape: Tuple[int, int, int] = (NUM_POLARITIES, 34, 34)
    readout: Optional[str] = None
    loss_kind: Optional[str] = None
    T: int = 15
    u_th: float = DEFAULT_FIRING_THRESHOLD
    leak: float = DEFAULT_LEAKAGE_FACTOR
    a: float = DEFAULT_GRADIENT_WIDTH
    leakage_enabled: bool = True
    reset_enabled: bool = True
    cross_recurrence: bool = False
    adaptive_leakage: bool = False
    dt_train_us: int = 3000
    precision: str = 'float32'
    layers: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError('unknown model kind %r' % self.model_kind)
        if self.model_kind == MODEL_SNN:
            self.readout = self.readout or READOUT_SPIKE_RATE
            self.loss_kind = self.loss_kind or LOSS_SNN_RATE_MSE
            if self.readout != READOUT_SPIKE_RATE or self.loss_kind != LOSS_SNN_RATE_MSE:
                raise ConfigError('snn models use the spike_rate readout and snn_rate_mse loss')
        else:
            self.readout = self.readout or READOUT_LINEAR
            self.loss_kind = self.loss_kind or LOSS_RATE_INSPIRED
            if self.readout != READOUT_LINEAR:
                raise ConfigError('%s models use the linear readout' % self.model_kind)
            if self.loss_kind not in LOSS_KINDS or self.loss_kind == LOSS_SNN_RATE_MSE:
                raise ConfigError('loss %r is not available for %s models'
                                  % (self.loss_kind, self.model_kind))
            if self.cross_recurrence or self.adaptive_leakage:
                raise ConfigError('cross_recurrence and adaptive_leakage are spiking variants')
        if self.adaptive_leakage and not (0 < self.leak < 1 and self.leakage_enabled):
            raise ConfigError('adaptive leakage needs leakage enabled with 0 < leak < 1')
        if self.precision not in ('float32', 'float64'):
            raise ConfigError('precision must be float32 or float64')
        if int(self.T) < 1:
            raise ConfigError('T must be a positive integer')
        if not 0.0 <= self.leak < 1.0:
            raise ConfigError('leak must lie in [0, 1)')
        if not self.a > 0:
            raise ConfigError('gradient width a must be positive')
        if int(self.dt_train_us) < 1:
            raise ConfigError('dt_train_us must be a positive integer')
        self.input_shape = tuple(int(d) for d in self.input_shape)
        if len(self.input_shape) != 3 or self.input_shape[0] != NUM_POLARITIES:
            raise ConfigError('input shape must be (2, H, W)')
        self.layers = parse_structure(self.structure)

    @property
    def dtype(self):
        return np.dtype(self.precision)

    @property
    def num_classes(self):
        return self.layers[-1].size

    def to_dict(self):
        data = asdict(self)
        data.pop('layers')
        data['input_shape'] = list(self.input_shape)
        return data

    @classmethod
    def from_dict(cls, data):
        known = set(f.name for f in fields(cls)) - {'layers'}
        unknown = set(data) - known
        if unknown:
            raise ConfigError('unknown network config keys: %s' % ','.join(sorted(unknown)))
        return cls(**data)

    def leak_at(self, dt_us):
        """Leakage factor at dt_us; only the adaptive variant depends on it."""
        if not self.adaptive_leakage:
            return self.leak
        return math.exp(-float(dt_us) / adaptive_tau(self.dt_train_us, self.leak))


class BpttTape(object):
    """Per-layer, per-timestep forward caches consumed by the backward pass."""

    def __init__(self, num_layers, T, batch_size):
        self.T = T
        self.batch_size = batch_size
        self.entries = [[None] * T for _ in range(num_layers)]

    def record(self, layer, t, entry):
        self.entries[layer][t] = entry

    def get(self, layer, t):
        try:
            entry = self.entries[layer][t]
        except IndexError:
            entry = None
        if entry is None:
            raise TapeError('no tape entry for layer %d at t=%d' % (layer, t))
        return entry

    @property
    def complete(self):
        return all(e is not None for row in self.entries for e in row)


class Layer(object):
    name = 'layer'
    stateful = False

    def parameters(self):
        return collections.OrderedDict()

    def output_shape(self, input_shape):
        return input_shape


class PoolLayer(Layer):

    def __init__(self, name, kind, k):
        self.name = name
        self.kind = kind
        self.k = k

    def output_shape(self, input_shape):
        C, H, W = _spatial(input_shape, self.name)
        if H % self.k or W % self.k:
            raise ShapeMismatchError('%s: %dx%d maps are not divisible by %d'
                                     % (self.name, H, W, self.k))
        return (C, H // self.k, W // self.k)

    def step(self, state, x):
        if self.kind == 'maxpool':
            y, argmax = tensor.maxpool(x, self.k)
            return None, y, argmax
        return None, tensor.avgpool(x, self.k), True

    def backward(self, entry, grad_above, carry, grad_loss, grads):
        grad = _sum_terms(grad_above, grad_loss)
        if self.kind == 'maxpool':
            return tensor.maxpool_backward(grad, entry, self.k), None
        return tensor.avgpool_backward(grad, self.k), None


class CellLayer(Layer):
    """A recurrent layer: dense when size counts neurons, convolutional for nC3."""
    stateful = True

    def __init__(self, name, conv, size):
        self.name = name
        self.conv = conv
        self.size = size
        self.params = None

    def output_shape(self, input_shape):
        if self.conv:
            _, H, W = _spatial(input_shape, self.name)
            return (self.size, H, W)
        return (self.size,)

    def state_shape(self, batch_size, input_shape):
        return (batch_size,) + self.output_shape(input_shape)

    def parameters(self):
        return self.params.tensors()

    def output(self, entry):
        return entry.h


class LifLayer(CellLayer):
    kind = MODEL_SNN

    def init(self, rng, input_shape, config):
        shape = _weight_shape(self.conv, self.size, input_shape)
        W_rec = None
        if config.cross_recurrence:
            W_rec = cells.init_uniform(rng, _weight_shape(self.conv, self.size,
                                                          self.output_shape(input_shape)),
                                       config.dtype)
        self.params = cells.LifParams(
            W=cells.init_uniform(rng, shape, config.dtype), u_th=config.u_th,
            leak=config.leak, a=config.a, leakage_enabled=config.leakage_enabled,
            reset_enabled=config.reset_enabled, W_rec=W_rec)

    def initial_state(self, shape, dtype):
        return cells.lif_initial_state(shape, dtype)

    def step(self, state, x):
        state, entry = cells.lif_step(self.params, state, x)
        return state, entry.o, entry

    def backward(self, entry, grad_above, carry, grad_loss, grads):
        g = cells.lif_backward(self.params, entry, grad_above, du_next=carry,
                               grad_loss=grad_loss, grads=grads)
        return g.dx, g.du

    def output(self, entry):
        return entry.o


class RnnLayer(CellLayer):
    kind = MODEL_RNN

    def init(self, rng, input_shape, config):
        W1 = cells.init_uniform(rng, _weight_shape(self.conv, self.size, input_shape), config.dtype)
        W2 = cells.init_uniform(rng, _weight_shape(self.conv, self.size,
                                                   self.output_shape(input_shape)), config.dtype)
        b = cells.init_bias(rng, self.size, int(np.prod(W1.shape[1:])), config.dtype)
        self.params = cells.RnnParams(W1=W1, W2=W2, b=b)

    def initial_state(self, shape, dtype):
        return cells.rnn_initial_state(shape, dtype)

    def step(self, state, x):
        state, entry = cells.rnn_step(self.params, state, x)
        return state, entry.h, entry

    def backward(self, entry, grad_above, carry, grad_loss, grads):
        g = cells.rnn_backward(self.params, entry, grad_above, dh_next=carry,
                               grad_loss=grad_loss, grads=grads)
        return g.dx, g.dh_prev


class LstmLayer(CellLayer):
    kind = MODEL_LSTM

    def init(self, rng, input_shape, config):
        gates = collections.OrderedDict()
        for gate in cells.LSTM_GATES:
            W1 = cells.init_uniform(rng, _weight_shape(self.conv, self.size, input_shape),
                                    config.dtype)
            W2 = cells.init_uniform(rng, _weight_shape(self.conv, self.size,
                                                       self.output_shape(input_shape)),
                                    config.dtype)
            b = cells.init_bias(rng, self.size, int(np.prod(W1.shape[1:])), config.dtype)
            gates[gate] = {'W1': W1, 'W2': W2, 'b': b}
        self.params = cells.LstmParams(gates=gates)

    def initial_state(self, shape, dtype):
        return cells.lstm_initial_state(shape, dtype)

    def step(self, state, x):
        state, entry = cells.lstm_step(self.params, state, x)
        return state, entry.h, entry

    def backward(self, entry, grad_above, carry, grad_loss, grads):
        dh_next, dc_next = carry if carry is not None else (None, None)
        g = cells.lstm_backward(self.params, entry, grad_above, dh_next=dh_next,
                                dc_next=dc_next, grad_loss=grad_loss, grads=grads)
        return g.dx, (g.dh_prev, g.dc_prev)


class ReadoutLayer(Layer):
    """r^t = W^y h^t + b^y, applied at every timestep."""
    name = 'readout'

    def __init__(self, num_classes):
        self.size = num_classes
        self.W = None
        self.b = None

    def init(self, rng, input_shape, config):
        fan_in = int(np.prod(input_shape))
        self.W = cells.init_uniform(rng, (self.size, fan_in), config.dtype)
        self.b = cells.init_bias(rng, self.size, fan_in, config.dtype)

    def output_shape(self, input_shape):
        return (self.size,)

    def parameters(self):
        return collections.OrderedDict(W=self.W, b=self.b)

    def step(self, state, x):
        return None, cells.add_bias(cells.project(x, self.W), self.b), x

    def backward(self, entry, grad_above, carry, grad_loss, grads):
        grad = _sum_terms(grad_above, grad_loss)
        dx, dW = cells.project_backward(grad, entry, self.W)
        cells._accumulate(grads, 'W', dW)
        cells._accumulate(grads, 'b', cells.bias_backward(grad))
        return dx, None


_CELL_LAYERS = {MODEL_SNN: LifLayer, MODEL_RNN: RnnLayer, MODEL_LSTM: LstmLayer}


def _spatial(shape, name):
    if len(shape) != 3:
        raise ShapeMismatchError('%s needs [C, H, W] maps, got %s' % (name, shape))
    return shape


def _weight_shape(conv, size, input_shape):
    if conv:
        C, _, _ = _spatial(input_shape, 'conv layer')
        return (size, C, tensor.KERNEL_SIZE, tensor.KERNEL_SIZE)
    return (size, int(np.prod(input_shape)))


def _sum_terms(*terms):
    terms = [t for t in terms if t is not None]
    if not terms:
        raise TapeError('no gradient reaches this layer')
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


class Network(object):
    """
    An instantiated layer stack. Layers run in order at every timestep;
    recurrent layers carry state between timesteps, pooling layers do not.
    """

    def __init__(self, config, layers, shapes):
        self.config = config
        self.layers = layers
        self.shapes = shapes

    @property
    def dtype(self):
        return self.config.dtype

    @property
    def cell_layers(self):
        return [layer for layer in self.layers if isinstance(layer, CellLayer)]

    @property
    def readout(self):
        last = self.layers[-1]
        return last if isinstance(last, ReadoutLayer) else None

    def parameters(self):
        """Named references to every parameter tensor: 'L<i>.<tensor>', 'readout.W', 'readout.b'."""
        named = collections.OrderedDict()
        for layer in self.layers:
            for key, value in layer.parameters().items():
                named['%s.%s' % (layer.name, key)] = value
        return named

    def shape_trace(self):
        return list(self.shapes)

    def retime(self, dt_us):
        """Set the leakage factor for slices of dt_us (adaptive-leakage variant only)."""
        leak = self.config.leak_at(dt_us)
        for layer in self.cell_layers:
            if isinstance(layer, LifLayer):
                layer.params.leak = leak
        return leak

    def _as_batch(self, batch):
        if isinstance(batch, np.ndarray):
            data = batch
        else:
            batch = list(batch)
            if batch and isinstance(batch[0], SliceSequence):
                data, _ = stack(batch, dtype=self.dtype)
            else:
                data = np.asarray(batch)
        if data.ndim != 5 or tuple(data.shape[2:]) != self.config.input_shape:
            raise ShapeMismatchError('batch of shape %s does not match input %s'
                                     % (data.shape, self.config.input_shape))
        return data.astype(self.dtype, copy=False)

    def forward(self, batch, train_mode=True):
        """
        Run all timesteps. Returns (outputs [T, B, K], tape); the tape is
        None unless train_mode.
        """
        data = self._as_batch(batch)
        B, T = data.shape[:2]
        tape = BpttTape(len(self.layers), T, B) if train_mode else None
        states = [layer.initial_state((B,) + self.shapes[i + 1], self.dtype)
                  if layer.stateful else None
                  for i, layer in enumerate(self.layers)]
        outputs = []
        for t in range(T):
            x = data[:, t]
            for i, layer in enumerate(self.layers):
                states[i], x, entry = layer.step(states[i], x)
                if tape is not None:
                    tape.record(i, t, entry)
            outputs.append(x)
        return np.stack(outputs), tape

    def backward(self, tape, loss_grads):
        """
        Reverse pass over t = T..1 and layers N..1. loss_grads[t] is the
        gradient of the loss with respect to the network output at t.
        """
        if tape is None:
            raise TapeError('backward needs the tape of a train_mode forward')
        if len(loss_grads) != tape.T:
            raise ShapeMismatchError('%d loss gradients for %d timesteps'
                                     % (len(loss_grads), tape.T))
        layer_grads = [collections.OrderedDict() for _ in self.layers]
        carries = [None] * len(self.layers)
        for t in reversed(range(tape.T)):
            grad_above = None
            grad_loss = loss_grads[t]
            for i in reversed(range(len(self.layers))):
                layer = self.layers[i]
                entry = tape.get(i, t)
                grad_above, carries[i] = layer.backward(
                    entry, grad_above, carries[i], grad_loss, layer_grads[i])
                grad_loss = None

        grads = collections.OrderedDict()
        for i, layer in enumerate(self.layers):
            for key, value in layer.parameters().items():
                name = '%s.%s' % (layer.name, key)
                grads[name] = layer_grads[i].get(key, np.zeros_like(value))
        return grads

    def predict(self, outputs, loss_kind=None):
        return losses.predict(outputs, loss_kind or self.config.loss_kind)

    def config_text(self):
        return yaml.safe_dump(self.config.to_dict(), sort_keys=True)

    def save(self, sink):
        save_checkpoint(self.config_text(), self.parameters(), sink)

    def load_parameters(self, tensors):
        own = self.parameters()
        if list(own) != list(tensors):
            raise CheckpointError('checkpoint tensors %s do not match network %s'
                                  % (list(tensors), list(own)))
        for name, value in tensors.items():
            if own[name].shape != value.shape:
                raise CheckpointError('%s has shape %s, checkpoint holds %s'
                                      % (name, own[name].shape, value.shape))
            own[name][...] = value

    @classmethod
    def load(cls, source):
        config_text, tensors = load_checkpoint(source)
        try:
            config = NetworkConfig.from_dict(yaml.safe_load(config_text))
        except (yaml.YAMLError, TypeError) as e:
            raise CheckpointError('unreadable config echo: %s' % e)
        net = build(config, seed=0)
        net.load_parameters(tensors)
        return net


def build(config, seed=0):
    """Instantiate the layer stack named by config.structure."""
    rng = np.random.default_rng(seed)
    shapes = [config.input_shape]
    layers = []
    cell_cls = _CELL_LAYERS[config.model_kind]
    for i, spec in enumerate(config.layers):
        name = 'L%d' % (i + 1)
        if spec.kind in ('maxpool', 'avgpool'):
            layer = PoolLayer(name, spec.kind, spec.size)
        elif spec.kind == 'output':
            if config.model_kind == MODEL_SNN:
                layer = cell_cls(name, False, spec.size)
            else:
                layer = ReadoutLayer(spec.size)
        else:
            layer = cell_cls(name, spec.kind == 'conv', spec.size)
        out_shape = layer.output_shape(shapes[-1])
        if hasattr(layer, 'init'):
            layer.init(rng, shapes[-1], config)
        layers.append(layer)
        shapes.append(out_shape)
    logger.debug('built %s %s: %s', config.model_kind, config.structure,
                 ' -> '.join('x'.join(str(d) for d in s) for s in shapes))
    return Network(config, layers, shapes)


def forward(net, batch, train_mode=True):
    return net.forward(batch, train_mode=train_mode)


def backward(net, tape, loss_grads):
    return net.backward(tape, loss_grads)
