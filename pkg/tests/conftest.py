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

import os

import numpy as np
import pytest

from nvbench import synthetic
from nvbench.dataset import prepare


def pytest_collection_modifyitems(config, items):
    if os.environ.get('NVBENCH_DATA'):
        return
    skip = pytest.mark.skip(reason='set NVBENCH_DATA to run scaled-down training checks')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope='function')
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='function')
def nmnist_raw(tmp_path):
    root = str(tmp_path / 'nmnist_raw')
    synthetic.write_nmnist_tree(root, per_class=2, classes=10, seed=3)
    return root


@pytest.fixture(scope='function')
def gesture_raw(tmp_path):
    root = str(tmp_path / 'gesture_raw')
    synthetic.write_gesture_tree(root, seed=5)
    return root


@pytest.fixture(scope='function')
def nmnist_cache(nmnist_raw, tmp_path):
    out = str(tmp_path / 'nmnist_cache')
    prepare(nmnist_raw, out, dt_us=3000, T=15, workers=2)
    return out
