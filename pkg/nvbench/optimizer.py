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

import numpy as np

from .constants import (
    DEFAULT_ADAM_BETA1,
    DEFAULT_ADAM_BETA2,
    DEFAULT_ADAM_EPSILON,
    DEFAULT_LEARNING_RATE,
)
from .errors import ShapeMismatchError

AdamMoments = collections.namedtuple('AdamMoments', ['m', 'v'])


def adam_step(params, grads, moments, step_index, lr=DEFAULT_LEARNING_RATE,
              beta1=DEFAULT_ADAM_BETA1, beta2=DEFAULT_ADAM_BETA2, epsilon=DEFAULT_ADAM_EPSILON):
    """
    One bias-corrected Adam update, in place.

    :param params: name -> ndarray, updated in place
    :param grads: name -> gradient of matching shape
    :param moments: name -> AdamMoments, created on first use
    :param step_index: 1-based update count
    """
    if step_index < 1:
        raise ValueError('step_index is 1-based')
    bc1 = 1.0 - beta1 ** step_index
    bc2 = 1.0 - beta2 ** step_index
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatchError('%s: gradient %s for parameter %s' % (name, g.shape, p.shape))
        if name not in moments:
            moments[name] = AdamMoments(np.zeros_like(p), np.zeros_like(p))
        m, v = moments[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= (lr / bc1) * m / (np.sqrt(v / bc2) + epsilon)
    return params, moments


class Adam(object):
    """Keeps the moments and step count between adam_step calls."""

    def __init__(self, lr=DEFAULT_LEARNING_RATE, beta1=DEFAULT_ADAM_BETA1,
                 beta2=DEFAULT_ADAM_BETA2, epsilon=DEFAULT_ADAM_EPSILON):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.moments = collections.OrderedDict()
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        adam_step(params, grads, self.moments, self.t, lr=self.lr, beta1=self.beta1,
                  beta2=self.beta2, epsilon=self.epsilon)
