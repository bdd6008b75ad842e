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
Recurrent cells: leaky integrate-and-fire (LIF), vanilla RNN and LSTM.

Every cell is a pure per-timestep forward step that returns its new state
and a tape entry, plus a closed-form backward step that consumes the tape
entry. Weights are either dense matrices [out, in] applied to [B, in]
rows, or 3x3 kernels [Cout, Cin, 3, 3] applied to [B, C, H, W] maps; the
same step functions serve both.
"""

from __future__ import absolute_import, division

import collections
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor
from .constants import (
    DEFAULT_FIRING_THRESHOLD,
    DEFAULT_GRADIENT_WIDTH,
    DEFAULT_LEAKAGE_FACTOR,
)
from .errors import ShapeMismatchError, TapeError

LSTM_GATES = ('f', 'i', 'o', 'g')


def project(x, w):
    """Dense W @ x per row, or 3x3 same-padding convolution for 4-d weights."""
    if w.ndim == 2:
        return tensor.linear(x.reshape(x.shape[0], -1), w)
    return tensor.conv2d(x, w)


def project_backward(dy, x, w):
    if w.ndim == 2:
        dx, dw = tensor.linear_backward(dy, x.reshape(x.shape[0], -1), w)
        return dx.reshape(x.shape), dw
    return tensor.conv2d_backward(dy, x, w)


def add_bias(z, b):
    return z + (b[:, np.newaxis, np.newaxis] if z.ndim == 4 else b)


def bias_backward(dz):
    return dz.sum(axis=(0, 2, 3)) if dz.ndim == 4 else dz.sum(axis=0)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def init_uniform(rng, shape, dtype=np.float64):
    """Uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)]; fan_in spans all but the first axis."""
    fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else int(shape[0])
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_bias(rng, width, fan_in, dtype=np.float64):
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=(width,)).astype(dtype)


def _accumulate(grads, name, value):
    if grads is None:
        return
    if name in grads:
        grads[name] += value
    else:
        grads[name] = np.array(value, copy=True)


def _zeros_like_state(shape, dtype):
    return np.zeros(shape, dtype=dtype)


# -- LIF ---------------------------------------------------------------------

@dataclass
class LifParams:
    W: np.ndarray
    u_th: float = DEFAULT_FIRING_THRESHOLD
    leak: float = DEFAULT_LEAKAGE_FACTOR
    a: float = DEFAULT_GRADIENT_WIDTH
    leakage_enabled: bool = True
    reset_enabled: bool = True
    W_rec: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 <= self.leak < 1.0:
            raise ValueError('leak must lie in [0, 1), got %r' % self.leak)
        if self.a <= 0:
            raise ValueError('surrogate width a must be positive, got %r' % self.a)

    @property
    def effective_leak(self):
        return self.leak if self.leakage_enabled else 1.0

    def tensors(self):
        named = collections.OrderedDict(W=self.W)
        if self.W_rec is not None:
            named['W_rec'] = self.W_rec
        return named


@dataclass
class LifState:
    u: np.ndarray
    o: np.ndarray


LifTapeEntry = collections.namedtuple('LifTapeEntry', ['x', 'u', 'o', 'o_prev'])
LifGrad = collections.namedtuple('LifGrad', ['du', 'do', 'dx'])


def lif_initial_state(shape, dtype=np.float64):
    return LifState(u=_zeros_like_state(shape, dtype), o=_zeros_like_state(shape, dtype))


def lif_step(params, state, x):
    """
    u^t = leak * u^{t-1} * (1 - o^{t-1}) + W x^t  (+ W_rec o^{t-1})
    o^t = 1 where u^t >= u_th

    Without reset the (1 - o^{t-1}) mask is dropped; without leakage the
    leak factor is 1.
    """
    drive = project(x, params.W)
    if drive.shape != state.u.shape:
        raise ShapeMismatchError('drive %s does not match state %s' % (drive.shape, state.u.shape))
    carried = state.u * (1.0 - state.o) if params.reset_enabled else state.u
    u = params.effective_leak * carried + drive
    if params.W_rec is not None:
        u = u + project(state.o, params.W_rec)
    o = (u >= params.u_th).astype(u.dtype)
    return LifState(u=u, o=o), LifTapeEntry(x=x, u=u, o=o, o_prev=state.o)


def surrogate_grad(u, u_th, a):
    """Rectangular stand-in for the firing derivative: 1/a inside |u - u_th| <= a/2."""
    if a <= 0:
        raise ValueError('surrogate width a must be positive, got %r' % a)
    u = np.asarray(u)
    dtype = u.dtype if u.dtype.kind == 'f' else np.dtype(np.float64)
    return (np.abs(u - u_th) <= a / 2.0).astype(dtype) / dtype.type(a)


def lif_temporal_grad(params, entry, du_next):
    """
    Contributions of delta u^{t+1} to (delta o^t, delta u^t) through the
    membrane path: -leak * du_next * u^t and leak * du_next * (1 - o^t).
    """
    leak = params.effective_leak
    if params.reset_enabled:
        return -leak * du_next * entry.u, leak * du_next * (1.0 - entry.o)
    return np.zeros_like(du_next), leak * du_next


def lif_backward(params, entry, grad_above, du_next=None, grad_loss=None, grads=None):
    """
    One reverse step through a LIF layer at timestep t.

    :param grad_above: gradient reaching o^t from the layer above, i.e.
        (W^{n+1})^T delta u^{t,n+1} as returned in that layer's `dx`
    :param du_next: delta u^{t+1,n}, or None at the last timestep
    :param grad_loss: loss gradient injected at o^t (output layer only)
    :param grads: dict accumulating 'W' and 'W_rec'
    :return: LifGrad(du, do, dx) with dx = W^T du for the layer below
    """
    if entry is None:
        raise TapeError('missing LIF tape entry')
    do = np.array(grad_above, copy=True) if grad_above is not None \
        else np.zeros_like(entry.u)
    if grad_loss is not None:
        do = do + grad_loss
    du_temporal = None
    if du_next is not None:
        do_temporal, du_temporal = lif_temporal_grad(params, entry, du_next)
        do = do + do_temporal
        if params.W_rec is not None:
            do = do + project_backward(du_next, entry.o, params.W_rec)[0]
    du = do * surrogate_grad(entry.u, params.u_th, params.a)
    if du_temporal is not None:
        du = du + du_temporal
    dx, dW = project_backward(du, entry.x, params.W)
    _accumulate(grads, 'W', dW)
    if params.W_rec is not None:
        _accumulate(grads, 'W_rec', project_backward(du, entry.o_prev, params.W_rec)[1])
    return LifGrad(du=du, do=do, dx=dx)


def lif_temporal_jacobian(params, entry):
    """
    d u^{t+1} / d u^t for one sample of a dense LIF layer, with the
    surrogate derivative standing in at the firing node. Diagonal unless
    cross-neuron recurrence is enabled.
    """
    u = entry.u.reshape(-1)
    o = entry.o.reshape(-1)
    fprime = surrogate_grad(u, params.u_th, params.a)
    leak = params.effective_leak
    if params.reset_enabled:
        jac = np.diag(leak * (1.0 - o) - leak * u * fprime)
    else:
        jac = np.diag(np.full_like(u, leak))
    if params.W_rec is not None:
        jac = jac + params.W_rec * fprime[np.newaxis, :]
    return jac


# -- vanilla RNN -------------------------------------------------------------

@dataclass
class RnnParams:
    W1: np.ndarray
    W2: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.W2.shape[0] != self.W2.shape[1]:
            raise ShapeMismatchError('recurrent weights must be square, got %s' % (self.W2.shape,))

    def tensors(self):
        return collections.OrderedDict(W1=self.W1, W2=self.W2, b=self.b)


@dataclass
class RnnState:
    h: np.ndarray


RnnTapeEntry = collections.namedtuple('RnnTapeEntry', ['x', 'h_prev', 'z', 'h'])
RnnGrad = collections.namedtuple('RnnGrad', ['dh', 'dz', 'dx', 'dh_prev'])


def rnn_initial_state(shape, dtype=np.float64):
    return RnnState(h=_zeros_like_state(shape, dtype))


def rnn_step(params, state, x):
    """h^t = tanh(W1 x^t + W2 h^{t-1} + b)"""
    z = add_bias(project(x, params.W1) + project(state.h, params.W2), params.b)
    h = np.tanh(z)
    return RnnState(h=h), RnnTapeEntry(x=x, h_prev=state.h, z=z, h=h)


def rnn_backward(params, entry, grad_above, dh_next=None, grad_loss=None, grads=None):
    """
    One reverse step through a vanilla RNN layer.

    :param grad_above: (W1^{n+1})^T (delta h^{t,n+1} * theta') from the layer above
    :param dh_next: (W2^n)^T (delta h^{t+1,n} * theta'), the `dh_prev` of step t+1
    :return: RnnGrad with dx for the layer below and dh_prev for step t-1
    """
    if entry is None:
        raise TapeError('missing RNN tape entry')
    dh = np.zeros_like(entry.h)
    for term in (grad_above, dh_next, grad_loss):
        if term is not None:
            dh = dh + term
    dz = dh * (1.0 - entry.h * entry.h)
    dx, dW1 = project_backward(dz, entry.x, params.W1)
    dh_prev, dW2 = project_backward(dz, entry.h_prev, params.W2)
    _accumulate(grads, 'W1', dW1)
    _accumulate(grads, 'W2', dW2)
    _accumulate(grads, 'b', bias_backward(dz))
    return RnnGrad(dh=dh, dz=dz, dx=dx, dh_prev=dh_prev)


def rnn_temporal_jacobian(params, entry):
    """d h^t / d h^{t-1} for one sample of a dense RNN layer: diag(theta') W2."""
    return (1.0 - entry.h.reshape(-1) ** 2)[:, np.newaxis] * params.W2


# -- LSTM --------------------------------------------------------------------

@dataclass
class LstmParams:
    """Per-gate input weights W*1, recurrent weights W*2 and bias b* for f, i, o, g."""
    gates: dict = field(default_factory=dict)

    def __post_init__(self):
        if set(self.gates) != set(LSTM_GATES):
            raise ShapeMismatchError('LSTM needs gates %s' % ','.join(LSTM_GATES))
        shapes = set((g['W1'].shape, g['W2'].shape, g['b'].shape) for g in self.gates.values())
        if len(shapes) != 1:
            raise ShapeMismatchError('LSTM gate blocks differ in shape: %s' % sorted(shapes))

    def tensors(self):
        named = collections.OrderedDict()
        for gate in LSTM_GATES:
            for part in ('W1', 'W2', 'b'):
                named['%s_%s' % (part, gate)] = self.gates[gate][part]
        return named


@dataclass
class LstmState:
    c: np.ndarray
    h: np.ndarray


LstmTapeEntry = collections.namedtuple(
    'LstmTapeEntry', ['x', 'h_prev', 'c_prev', 'f', 'i', 'o', 'g', 'c', 'tanh_c', 'h'])
LstmGrad = collections.namedtuple('LstmGrad', ['dh', 'dc', 'dx', 'dh_prev', 'dc_prev', 'dz'])


def lstm_initial_state(shape, dtype=np.float64):
    return LstmState(c=_zeros_like_state(shape, dtype), h=_zeros_like_state(shape, dtype))


def lstm_step(params, state, x):
    """
    f, i, o = sigmoid(W*1 x^t + W*2 h^{t-1} + b*),  g = tanh(...)
    c^t = c^{t-1} * f + g * i,  h^t = tanh(c^t) * o
    """
    act = {}
    for gate in LSTM_GATES:
        p = params.gates[gate]
        z = add_bias(project(x, p['W1']) + project(state.h, p['W2']), p['b'])
        act[gate] = np.tanh(z) if gate == 'g' else sigmoid(z)
    c = state.c * act['f'] + act['g'] * act['i']
    tanh_c = np.tanh(c)
    h = tanh_c * act['o']
    entry = LstmTapeEntry(x=x, h_prev=state.h, c_prev=state.c, c=c, tanh_c=tanh_c, h=h, **act)
    return LstmState(c=c, h=h), entry


def lstm_backward(params, entry, grad_above, dh_next=None, dc_next=None,
                  grad_loss=None, grads=None):
    """
    One reverse step through an LSTM layer: the spatial path from the layer
    above, the temporal path through h^{t+1} (dh_next, already projected
    through the recurrent weights) and the cell path dc_next = delta
    c^{t+1} * f^{t+1}.

    :return: LstmGrad with dx for the layer below, dh_prev and dc_prev for
        step t-1
    """
    if entry is None:
        raise TapeError('missing LSTM tape entry')
    dh = np.zeros_like(entry.h)
    for term in (grad_above, dh_next, grad_loss):
        if term is not None:
            dh = dh + term
    dc = dh * entry.o * (1.0 - entry.tanh_c * entry.tanh_c)
    if dc_next is not None:
        dc = dc + dc_next
    dz = {
        'f': dc * entry.c_prev * entry.f * (1.0 - entry.f),
        'i': dc * entry.g * entry.i * (1.0 - entry.i),
        'o': dh * entry.tanh_c * entry.o * (1.0 - entry.o),
        'g': dc * entry.i * (1.0 - entry.g * entry.g),
    }
    dx = np.zeros(entry.x.shape, dtype=dh.dtype)
    dh_prev = np.zeros_like(entry.h_prev)
    for gate in LSTM_GATES:
        p = params.gates[gate]
        gdx, dW1 = project_backward(dz[gate], entry.x, p['W1'])
        gdh, dW2 = project_backward(dz[gate], entry.h_prev, p['W2'])
        dx = dx + gdx
        dh_prev = dh_prev + gdh
        _accumulate(grads, 'W1_%s' % gate, dW1)
        _accumulate(grads, 'W2_%s' % gate, dW2)
        _accumulate(grads, 'b_%s' % gate, bias_backward(dz[gate]))
    return LstmGrad(dh=dh, dc=dc, dx=dx, dh_prev=dh_prev, dc_prev=dc * entry.f, dz=dz)


def lstm_temporal_jacobian(params, entry):
    """d h^t / d h^{t-1} for one sample of a dense LSTM layer."""
    c_prev = entry.c_prev.reshape(-1)
    f, i, o, g = (getattr(entry, k).reshape(-1) for k in LSTM_GATES)
    tanh_c = entry.tanh_c.reshape(-1)
    dh_dc = o * (1.0 - tanh_c ** 2)
    rows = {
        'f': dh_dc * c_prev * f * (1.0 - f),
        'i': dh_dc * g * i * (1.0 - i),
        'o': tanh_c * o * (1.0 - o),
        'g': dh_dc * i * (1.0 - g ** 2),
    }
    return sum(rows[k][:, np.newaxis] * params.gates[k]['W2'] for k in LSTM_GATES)
