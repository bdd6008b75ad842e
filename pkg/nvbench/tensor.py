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
Dense numeric kernels with closed-form backward passes.

Spatial kernels take [C, H, W] or batched [B, C, H, W] arrays. Training
runs in float32 and the oracles in float64; kernels keep the dtype of
their inputs.
"""

from __future__ import absolute_import, division

import numpy as np

from .errors import ShapeMismatchError

TRAIN_DTYPE = np.float32
ORACLE_DTYPE = np.float64

KERNEL_SIZE = 3
PADDING = 1

_debug = False


def set_debug(enabled):
    """Trap NaN/Inf in every kernel output."""
    global _debug
    _debug = bool(enabled)


def check_finite(name, array):
    if _debug and not np.all(np.isfinite(array)):
        raise FloatingPointError('non-finite values in %s' % name)
    return array


def matmul(A, B):
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ShapeMismatchError('matmul %s x %s' % (A.shape, B.shape))
    return check_finite('matmul', A @ B)


def matmul_backward(dC, A, B):
    """Gradients of C = A @ B: dA = dC @ B^T, dB = A^T @ dC."""
    return dC @ B.T, A.T @ dC


def linear(X, W):
    """Row-batched W @ x for every row x of X ([B, in] -> [B, out])."""
    if X.shape[-1] != W.shape[1]:
        raise ShapeMismatchError('input width %d, weights %s' % (X.shape[-1], W.shape))
    return check_finite('linear', X @ W.T)


def linear_backward(dY, X, W):
    dW, dXt = matmul_backward(dY.T, W, X.T)
    return dXt.T, dW


def _batched(X):
    X = np.asarray(X)
    if X.ndim == 3:
        return X[np.newaxis], True
    if X.ndim != 4:
        raise ShapeMismatchError('expected [C, H, W] or [B, C, H, W], got %s' % (X.shape,))
    return X, False


def conv2d(X, K):
    """
    3x3 cross-correlation, stride 1, zero padding 1: spatial size is kept.
    X: [Cin, H, W] or [B, Cin, H, W]; K: [Cout, Cin, 3, 3].
    """
    Xb, single = _batched(X)
    if K.ndim != 4 or K.shape[2:] != (KERNEL_SIZE, KERNEL_SIZE):
        raise ShapeMismatchError('kernel must be [Cout, Cin, 3, 3], got %s' % (K.shape,))
    if Xb.shape[1] != K.shape[1]:
        raise ShapeMismatchError('input has %d channels, kernel expects %d'
                                 % (Xb.shape[1], K.shape[1]))
    B, _, H, W = Xb.shape
    padded = np.pad(Xb, ((0, 0), (0, 0), (PADDING, PADDING), (PADDING, PADDING)))
    out = np.zeros((B, K.shape[0], H, W), dtype=np.result_type(Xb, K))
    for dy in range(KERNEL_SIZE):
        for dx in range(KERNEL_SIZE):
            out += np.einsum('bchw,oc->bohw', padded[:, :, dy:dy + H, dx:dx + W],
                             K[:, :, dy, dx], optimize=True)
    check_finite('conv2d', out)
    return out[0] if single else out


def conv2d_backward(dY, X, K):
    """Returns (dX, dK) for Y = conv2d(X, K)."""
    Xb, single = _batched(X)
    dYb, _ = _batched(dY)
    B, _, H, W = Xb.shape
    padded = np.pad(Xb, ((0, 0), (0, 0), (PADDING, PADDING), (PADDING, PADDING)))
    dpadded = np.zeros_like(padded, dtype=np.result_type(dYb, K))
    dK = np.zeros_like(K, dtype=np.result_type(dYb, Xb))
    for dy in range(KERNEL_SIZE):
        for dx in range(KERNEL_SIZE):
            dpadded[:, :, dy:dy + H, dx:dx + W] += np.einsum(
                'bohw,oc->bchw', dYb, K[:, :, dy, dx], optimize=True)
            dK[:, :, dy, dx] = np.einsum(
                'bohw,bchw->oc', dYb, padded[:, :, dy:dy + H, dx:dx + W], optimize=True)
    dX = dpadded[:, :, PADDING:PADDING + H, PADDING:PADDING + W]
    return (dX[0] if single else dX), dK


def _windows(Xb, k):
    B, C, H, W = Xb.shape
    if k < 1 or H % k or W % k:
        raise ShapeMismatchError('%dx%d maps are not divisible by pool size %d' % (H, W, k))
    windows = Xb.reshape(B, C, H // k, k, W // k, k).transpose(0, 1, 2, 4, 3, 5)
    return windows.reshape(B, C, H // k, W // k, k * k)


def maxpool(X, k):
    """
    Non-overlapping k x k max pooling. Returns (Y, argmax) where argmax
    indexes each window in row-major order; ties go to the first index.
    """
    Xb, single = _batched(X)
    windows = _windows(Xb, k)
    argmax = windows.argmax(axis=-1)
    Y = np.take_along_axis(windows, argmax[..., np.newaxis], axis=-1)[..., 0]
    if single:
        return Y[0], argmax[0]
    return Y, argmax


def maxpool_backward(dY, argmax, k):
    """Routes each output gradient to the recorded argmax of its window."""
    dYb, single = _batched(dY)
    argmaxb = argmax[np.newaxis] if single else argmax
    B, C, h, w = dYb.shape
    windows = np.zeros((B, C, h, w, k * k), dtype=dYb.dtype)
    np.put_along_axis(windows, argmaxb[..., np.newaxis], dYb[..., np.newaxis], axis=-1)
    dX = windows.reshape(B, C, h, w, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, h * k, w * k)
    return dX[0] if single else dX


def avgpool(X, k):
    Xb, single = _batched(X)
    Y = _windows(Xb, k).mean(axis=-1)
    return Y[0] if single else Y


def avgpool_backward(dY, k):
    """Spreads each output gradient evenly, divided by k^2, over its window."""
    dYb, single = _batched(dY)
    dX = np.repeat(np.repeat(dYb, k, axis=2), k, axis=3) / (k * k)
    return dX[0] if single else dX
