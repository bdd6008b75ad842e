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
Synthetic recordings shaped like the real datasets. N-MNIST-like files
jitter a class-specific glyph through three saccades; gesture-like
recordings sweep a bar whose direction depends on the class. The files are
written in the raw layouts `prepare` reads, so the whole pipeline can run
without the real data.
"""

from __future__ import absolute_import, division

import os

import numpy as np

from .codecs import AedatCodec, NmnistCodec
from .constants import GESTURE_HEIGHT, GESTURE_WIDTH, NMNIST_HEIGHT, NMNIST_WIDTH
from .dataset import CHECKSUM_FILE, GESTURE_SPLIT_FILES, SliceDataset
from .events import EventStream, SliceSequence
from .utils import make_rng, sha256_file

SACCADE_US = 100000
GLYPH_SIZE = 12


def _glyph(label, size=GLYPH_SIZE):
    """A fixed pseudo-random binary glyph per class."""
    rng = np.random.default_rng(1000 + int(label))
    return rng.random((size, size)) < 0.35


def nmnist_like_stream(label, seed=0, events_per_saccade=300):
    """Three saccades over a class glyph, ~300 ms in total."""
    rng = make_rng(seed, 11, label)
    ys, xs = np.nonzero(_glyph(label))
    offsets = ((4, 4), (10, 10), (16, 4))
    columns = [[], [], [], []]
    for k, (dx, dy) in enumerate(offsets):
        pick = rng.integers(0, len(xs), size=events_per_saccade)
        columns[0].append(np.clip(xs[pick] + dx + rng.integers(-1, 2, size=pick.size),
                                  0, NMNIST_WIDTH - 1))
        columns[1].append(np.clip(ys[pick] + dy + rng.integers(-1, 2, size=pick.size),
                                  0, NMNIST_HEIGHT - 1))
        columns[2].append(rng.integers(0, 2, size=pick.size))
        columns[3].append(k * SACCADE_US + rng.integers(0, SACCADE_US, size=pick.size))
    x, y, p, t = (np.concatenate(c) for c in columns)
    order = np.argsort(t, kind='stable')
    return EventStream(x[order], y[order], p[order], t[order], NMNIST_WIDTH, NMNIST_HEIGHT,
                       label)


def bar_stream(speed_px_per_ms, duration_us=60000, width=GESTURE_WIDTH, height=GESTURE_HEIGHT,
               bar_width=4, step_us=500, direction=0, label=None):
    """
    A vertical (direction 0/1) or horizontal (2/3) bar moving at the given
    speed; every bar pixel fires an On event each step_us, so a static bar
    (speed 0) repeats the same slice.
    """
    times = np.arange(0, duration_us, step_us)
    span = width if direction < 2 else height
    start = span // 4
    xs, ys, ts = [], [], []
    for t in times:
        shift = int(speed_px_per_ms * t / 1000.0)
        pos = (start + shift) % (span - bar_width) if direction % 2 == 0 else \
            (span - bar_width - start - shift) % (span - bar_width)
        lines = np.arange(pos, pos + bar_width)
        other = np.arange(span // 4, 3 * span // 4)
        a, b = np.meshgrid(lines, other, indexing='ij')
        if direction < 2:
            xs.append(a.ravel())
            ys.append(b.ravel())
        else:
            ys.append(a.ravel())
            xs.append(b.ravel())
        ts.append(np.full(a.size, t))
    x, y, t = (np.concatenate(c) for c in (xs, ys, ts))
    return EventStream(x, y, np.ones_like(x), t, width, height, label)


def gesture_like_stream(label, seed=0, duration_us=120000):
    """A bar sweeping in one of four directions at a class-dependent speed, with noise."""
    rng = make_rng(seed, 13, label)
    stream = bar_stream(1.0 + (label // 4), duration_us=duration_us, direction=label % 4,
                        step_us=5000)
    noise = 200
    x = np.concatenate([stream.x, rng.integers(0, GESTURE_WIDTH, size=noise)])
    y = np.concatenate([stream.y, rng.integers(0, GESTURE_HEIGHT, size=noise)])
    p = np.concatenate([rng.integers(0, 2, size=len(stream)), rng.integers(0, 2, size=noise)])
    t = np.concatenate([stream.t_us, rng.integers(0, duration_us, size=noise)])
    order = np.argsort(t, kind='stable')
    return EventStream(x[order], y[order], p[order], t[order], GESTURE_WIDTH, GESTURE_HEIGHT,
                       label)


def write_nmnist_tree(root, per_class=2, classes=10, seed=0):
    """Train/<digit>/<id>.bin and Test/<digit>/<id>.bin, per_class files each."""
    codec = NmnistCodec()
    paths = []
    for split, folder in enumerate(('Train', 'Test')):
        for label in range(classes):
            directory = os.path.join(root, folder, str(label))
            os.makedirs(directory, exist_ok=True)
            for k in range(per_class):
                stream = nmnist_like_stream(label, seed=seed * 1000 + split * 100 + k)
                path = os.path.join(directory, '%05d.bin' % (k + 1))
                with open(path, 'wb') as f:
                    f.write(codec.encode(stream))
                paths.append(path)
    return paths


def write_gesture_tree(root, users=(('user01', 'train'), ('user02', 'test')), classes=11,
                       seed=0, trial_us=150000, gap_us=20000):
    """
    One AEDAT 3.1 recording per user with every class performed once, its
    _labels.csv, and the trial lists naming the split of each recording.
    """
    os.makedirs(root, exist_ok=True)
    codec = AedatCodec()
    lists = {split: [] for split in GESTURE_SPLIT_FILES}
    for u, (user, split) in enumerate(users):
        parts = []
        rows = ['class,startTime_usec,endTime_usec']
        for label in range(classes):
            start = gap_us + label * (trial_us + gap_us)
            trial = gesture_like_stream(label, seed=seed * 100 + u, duration_us=trial_us)
            parts.append((trial, start))
            rows.append('%d,%d,%d' % (label + 1, start, start + trial_us))
        x = np.concatenate([s.x for s, _ in parts])
        y = np.concatenate([s.y for s, _ in parts])
        p = np.concatenate([s.polarity for s, _ in parts])
        t = np.concatenate([s.t_us + start for s, start in parts])
        stream = EventStream(x, y, p, t, GESTURE_WIDTH, GESTURE_HEIGHT)
        name = '%s_fluorescent.aedat' % user
        with open(os.path.join(root, name), 'wb') as f:
            f.write(codec.encode(stream))
        with open(os.path.join(root, name[:-len('.aedat')] + '_labels.csv'), 'w') as f:
            f.write('\n'.join(rows) + '\n')
        lists[split].append(name)
    for split, filename in GESTURE_SPLIT_FILES.items():
        with open(os.path.join(root, filename), 'w') as f:
            f.write(''.join(name + '\n' for name in lists[split]))
    return root


def write_checksums(root):
    """SHA256SUMS over every regular file under root."""
    lines = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            if name == CHECKSUM_FILE:
                continue
            path = os.path.join(dirpath, name)
            lines.append('%s  %s\n' % (sha256_file(path), os.path.relpath(path, root)))
    with open(os.path.join(root, CHECKSUM_FILE), 'w') as f:
        f.writelines(lines)


def toy_slices(count=8, classes=2, shape=(2, 4, 4), T=4, seed=0, density=0.8, dt_us=1000):
    """
    A separable spike dataset: class c fires in its own band of rows, with
    a little background noise.
    """
    rng = make_rng(seed, 17)
    C, H, W = shape
    band = max(H // classes, 1)
    items = []
    for n in range(count):
        label = n % classes
        data = (rng.random((T,) + tuple(shape)) < 0.05).astype(np.uint8)
        rows = slice(label * band, (label + 1) * band)
        data[:, :, rows, :] = (rng.random((T, C, band, W)) < density)
        items.append(SliceSequence(data, dt_us, label))
    return SliceDataset(items)
