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

from __future__ import absolute_import, unicode_literals, print_function

import math

from . import __version__


NVBENCH_VERSION = 'nvbench-%s' % __version__

# Original temporal resolution of the event sensors, microseconds
DT0_US = 1

# Sensor geometry of the N-MNIST recordings
NMNIST_WIDTH = 34
NMNIST_HEIGHT = 34

# Sensor geometry of the DVS Gesture recordings
GESTURE_WIDTH = 128
GESTURE_HEIGHT = 128

# Polarity channels: 0 = Off, 1 = On
POLARITY_OFF = 0
POLARITY_ON = 1
NUM_POLARITIES = 2

# Marker written in place of a missing label in the slice cache
NO_LABEL = 0xFFFFFFFF

# Slice cache container
NVSL_MAGIC = b'NVSL'
NVSL_VERSION = 1

# Float tensor container used for feature-map export
NVSF_MAGIC = b'NVSF'
NVSF_VERSION = 1

# Network checkpoint container
NVCK_MAGIC = b'NVCK'
NVCK_VERSION = 1

# AEDAT container header line accepted by the gesture parser
AEDAT_VERSION_LINE = b'#!AER-DAT3.1'

# AEDAT event type of polarity events
AEDAT_POLARITY_EVENT = 1

# Dataset descriptors: geometry, class count, split sizes and the
# temporal resolutions (ms) the workbench sweeps over.
DATASETS = {
    'nmnist': {
        'width': NMNIST_WIDTH,
        'height': NMNIST_HEIGHT,
        'classes': 10,
        'splits': {'train': 60000, 'test': 10000},
        'dt_ms': (1, 2, 3, 5, 10, 20),
        'kind': 'converted',
    },
    'gesture': {
        'width': GESTURE_WIDTH,
        'height': GESTURE_HEIGHT,
        'classes': 11,
        'splits': {'train': 1176, 'test': 288},
        'dt_ms': (1, 5, 10, 15, 20, 25),
        'kind': 'captured',
    },
}

# Network structures, written in the Input-...-classes notation
STRUCTURES = {
    'nmnist_mlp': 'Input-512FC-10',
    'gesture_mlp': 'Input-MP4-512FC-11',
    'gesture_cnn': 'Input-MP4-64C3-128C3-AP2-128C3-AP2-256FC-11',
}

# Shared training hyper-parameters
DEFAULT_MAX_EPOCH = 100
DEFAULT_LEARNING_RATE = 1e-4
DEFAULT_ADAM_BETA1 = 0.9
DEFAULT_ADAM_BETA2 = 0.999
DEFAULT_ADAM_EPSILON = 1e-8

# Spiking-only hyper-parameters
DEFAULT_FIRING_THRESHOLD = 0.3
DEFAULT_LEAKAGE_FACTOR = 0.3
DEFAULT_GRADIENT_WIDTH = 0.25

# Per-preset overrides of batch size, timesteps and gradient width
DATASET_PRESETS = {
    'nmnist_mlp': {'dataset': 'nmnist', 'batch_size': 50, 'T': 15, 'a': 0.25},
    'gesture_mlp': {'dataset': 'gesture', 'batch_size': 36, 'T': 60, 'a': 0.25},
    'gesture_cnn': {'dataset': 'gesture', 'batch_size': 36, 'T': 60, 'a': 0.5},
}

# Model kinds
MODEL_SNN = 'snn'
MODEL_RNN = 'rnn'
MODEL_LSTM = 'lstm'
MODEL_KINDS = (MODEL_SNN, MODEL_RNN, MODEL_LSTM)

# Readouts
READOUT_SPIKE_RATE = 'spike_rate'
READOUT_LINEAR = 'linear_readout'

# Loss functions
LOSS_SNN_RATE_MSE = 'snn_rate_mse'
LOSS_LAST_STEP = 'last_step'
LOSS_PER_STEP = 'per_step'
LOSS_RATE_INSPIRED = 'rate_inspired'
LOSS_KINDS = (LOSS_SNN_RATE_MSE, LOSS_LAST_STEP, LOSS_PER_STEP, LOSS_RATE_INSPIRED)

# Clamp of the cross-entropy logarithm used for temporal contrast
CONTRAST_EPSILON = 1e-16

# Window length used for temporal contrast matrices
DEFAULT_CONTRAST_WINDOW = 4

# Number of recordings sampled for dataset-level contrast statistics
DEFAULT_CONTRAST_SAMPLES = 100

# Leakage factor the adaptive-leakage variant is calibrated against
ADAPTIVE_LEAK_REFERENCE = 0.3


def adaptive_tau(dt_train_us, reference_leak=ADAPTIVE_LEAK_REFERENCE):
    """Membrane time constant that yields reference_leak at dt_train_us."""
    return -float(dt_train_us) / math.log(reference_leak)


# Exit codes of the command line entry point
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECK_FAILED = 3
