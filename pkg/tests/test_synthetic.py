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

import os

import numpy as np
import pytest

from nvbench import synthetic
from nvbench.constants import GESTURE_WIDTH, NMNIST_HEIGHT, NMNIST_WIDTH


def test_nmnist_like_stream_is_seeded():
    a = synthetic.nmnist_like_stream(3, seed=1)
    b = synthetic.nmnist_like_stream(3, seed=1)
    c = synthetic.nmnist_like_stream(3, seed=2)
    np.testing.assert_array_equal(a.t_us, b.t_us)
    np.testing.assert_array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)
    assert a.label == 3


def test_nmnist_like_stream_bounds():
    stream = synthetic.nmnist_like_stream(7, events_per_saccade=50)
    assert len(stream) == 150
    assert np.all(np.diff(stream.t_us) >= 0)
    assert stream.x.max() < NMNIST_WIDTH and stream.y.max() < NMNIST_HEIGHT
    assert stream.t_us.max() < 3 * synthetic.SACCADE_US


def test_bar_stream_only_on_events():
    stream = synthetic.bar_stream(1.0, duration_us=10000, step_us=1000)
    assert np.all(stream.polarity == 1)
    assert len(np.unique(stream.t_us)) == 10
    assert stream.x.max() < GESTURE_WIDTH


@pytest.mark.parametrize('direction', [0, 1, 2, 3])
def test_bar_stream_directions(direction):
    stream = synthetic.bar_stream(2.0, duration_us=4000, step_us=2000, direction=direction)
    first = stream.t_us == 0
    later = stream.t_us == 2000
    moving = stream.x if direction < 2 else stream.y
    shift = moving[later].min() - moving[first].min()
    assert shift == (4 if direction % 2 == 0 else -4)


def test_write_nmnist_tree(tmp_path):
    paths = synthetic.write_nmnist_tree(str(tmp_path), per_class=1, classes=3)
    assert len(paths) == 6
    assert os.path.exists(os.path.join(str(tmp_path), 'Test', '2', '00001.bin'))


def test_write_gesture_tree(tmp_path):
    root = synthetic.write_gesture_tree(str(tmp_path), classes=2)
    names = sorted(os.listdir(root))
    assert 'user01_fluorescent.aedat' in names
    assert 'user02_fluorescent_labels.csv' in names
    with open(os.path.join(root, 'user01_fluorescent_labels.csv')) as f:
        rows = f.read().splitlines()
    assert rows == ['class,startTime_usec,endTime_usec', '1,20000,170000', '2,190000,340000']


def test_toy_slices():
    dataset = synthetic.toy_slices(count=6, classes=3, shape=(2, 6, 4), T=5)
    assert len(dataset) == 6
    assert [dataset[i].label for i in range(6)] == [0, 1, 2, 0, 1, 2]
    item = dataset[1]
    assert item.data.shape == (5, 2, 6, 4)
    assert item.data[:, :, 2:4].mean() > item.data[:, :, :2].mean()
