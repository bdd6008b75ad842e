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
Datasets as the training loop sees them: indexable collections of
SliceSequence that all share one shape and temporal resolution.

`EventDataset` keeps parsed event streams and collapses them on demand, so
the same recordings can be served at any (dt, T). `SliceDataset` serves
slices that are already collapsed, either in memory or from an NVSL cache
written by `prepare`.
"""

from __future__ import absolute_import, division

import collections
import glob
import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import yaml

from .codecs import load_slices, parse_gesture, parse_nmnist, save_slices
from .constants import DATASETS, DT0_US, NUM_POLARITIES
from .errors import (
    ChecksumError,
    ConfigError,
    DataFormatError,
    MalformedFileError,
    NvbenchError,
    ShapeMismatchError,
)
from .events import SliceSequence, collapse, or_group, stack
from .metrics import MetricsFactory
from .utils import ErrorReporter, make_rng, read_checksums, sha256_file, sha256_tree

logger = logging.getLogger('nvbench')

SPLITS = ('train', 'test')
CHECKSUM_FILE = 'SHA256SUMS'
PREPARED_FILE = 'prepared.yaml'
GESTURE_SPLIT_FILES = {'train': 'trials_to_train.txt', 'test': 'trials_to_test.txt'}

RawRecording = collections.namedtuple('RawRecording', ['split', 'path', 'label', 'labels_path'])


def fit_length(seq, T):
    """Truncate to the first T slices or zero-pad trailing slices up to T."""
    if seq.T == T:
        return seq
    if seq.T > T:
        return SliceSequence(seq.data[:T], seq.dt_us, seq.label)
    pad = np.zeros((T - seq.T,) + seq.data.shape[1:], dtype=np.uint8)
    return SliceSequence(np.concatenate([seq.data, pad]), seq.dt_us, seq.label)


class _Dataset(object):

    dt_us = None
    T = None

    def __len__(self):
        raise NotImplementedError()

    def __getitem__(self, index):
        raise NotImplementedError()

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def labels(self):
        raise NotImplementedError()

    @property
    def input_shape(self):
        raise NotImplementedError()

    def batch(self, indices, dtype=np.float64):
        """[B, T, 2, H, W] array and integer labels for the given indices."""
        return stack([self[int(i)] for i in indices], dtype=dtype)

    def subset(self, count, seed=0):
        """A seeded sample of `count` items (all of them if count >= len)."""
        if count is None or count >= len(self):
            return self
        order = make_rng(seed, 0x5ab5e7).permutation(len(self))[:count]
        return self._select(np.sort(order))

    def _select(self, indices):
        raise NotImplementedError()


class SliceDataset(_Dataset):
    """
    Collapsed slices. Items are SliceSequence objects or paths to NVSL
    files, which are read when indexed.
    """

    def __init__(self, items, dt_us=None, T=None, input_shape=None, labels=None):
        self._items = list(items)
        if self._items and (dt_us is None or T is None or input_shape is None):
            first = self._load(0)
            dt_us = first.dt_us if dt_us is None else dt_us
            T = first.T if T is None else T
            input_shape = first.shape[1:] if input_shape is None else input_shape
        self.dt_us = dt_us
        self.T = T
        self._input_shape = tuple(input_shape) if input_shape is not None else None
        self._labels = None if labels is None else np.asarray(labels, dtype=np.int64)

    @classmethod
    def from_directory(cls, root, split):
        """Load the NVSL cache of one split written by `prepare`."""
        meta_path = os.path.join(root, PREPARED_FILE)
        if not os.path.exists(meta_path):
            raise DataFormatError('%s: not a prepared dataset (no %s)' % (root, PREPARED_FILE))
        with open(meta_path) as f:
            meta = yaml.safe_load(f)
        paths = sorted(glob.glob(os.path.join(root, split, '*', '*.nvsl')))
        labels = [int(os.path.basename(os.path.dirname(p))) for p in paths]
        return cls(paths, dt_us=meta['dt_us'], T=meta['T'],
                   input_shape=(NUM_POLARITIES, meta['height'], meta['width']), labels=labels)

    def _load(self, index):
        item = self._items[index]
        if isinstance(item, SliceSequence):
            return item
        try:
            return load_slices(item)
        except DataFormatError as e:
            raise type(e)('%s: %s' % (item, e))

    def __len__(self):
        return len(self._items)

    def __getitem__(self, index):
        seq = self._load(index)
        if seq.dt_us != self.dt_us or seq.shape[1:] != self._input_shape:
            raise ShapeMismatchError('item %d is %s at %d us, dataset is %s at %d us'
                                     % (index, seq.shape, seq.dt_us, self._input_shape, self.dt_us))
        return fit_length(seq, self.T)

    @property
    def labels(self):
        if self._labels is None:
            self._labels = np.array([self._load(i).label for i in range(len(self))],
                                    dtype=np.int64)
        return self._labels

    @property
    def input_shape(self):
        return self._input_shape

    def _select(self, indices):
        labels = None if self._labels is None else self._labels[indices]
        return SliceDataset([self._items[i] for i in indices], self.dt_us, self.T,
                            self._input_shape, labels)

    def retime(self, dt_us, T):
        """
        Serve the slices at dt_us by OR-grouping; only whole multiples of
        the cached resolution are reachable from collapsed data.
        """
        if self.T * self.dt_us < T * dt_us:
            logger.warning('cache holds %d us per sample, %d us requested; trailing slices are '
                           'zero-padded', self.T * self.dt_us, T * dt_us)
        if dt_us == self.dt_us:
            return SliceDataset(self._items, self.dt_us, T, self._input_shape, self._labels)
        if dt_us % self.dt_us:
            raise ConfigError('cannot retime %d us slices to %d us; prepare the dataset '
                              'again or use an event dataset' % (self.dt_us, dt_us))
        beta = dt_us // self.dt_us
        items = []
        for i in range(len(self)):
            seq = fit_length(self._load(i), self.T)
            whole = max(beta, seq.T - seq.T % beta)
            items.append(fit_length(or_group(fit_length(seq, whole), beta), T))
        return SliceDataset(items, dt_us, T, self._input_shape, self._labels)


class EventDataset(_Dataset):
    """Event streams collapsed at (dt_us, T) whenever an item is read."""

    def __init__(self, streams, dt_us, T):
        self.streams = list(streams)
        if dt_us % DT0_US or dt_us < DT0_US:
            raise ConfigError('dt_us must be a positive multiple of %d' % DT0_US)
        self.dt_us = int(dt_us)
        self.T = int(T)

    def __len__(self):
        return len(self.streams)

    def __getitem__(self, index):
        return collapse(self.streams[index], self.dt_us // DT0_US, self.T)

    @property
    def labels(self):
        return np.array([-1 if s.label is None else s.label for s in self.streams],
                        dtype=np.int64)

    @property
    def input_shape(self):
        if not self.streams:
            return None
        return (NUM_POLARITIES, self.streams[0].sensor_height, self.streams[0].sensor_width)

    def _select(self, indices):
        return EventDataset([self.streams[i] for i in indices], self.dt_us, self.T)

    def retime(self, dt_us, T):
        return EventDataset(self.streams, dt_us, T)

    @classmethod
    def from_raw(cls, raw_dir, split, dt_us, T, workers=4):
        recordings = [r for r in discover(raw_dir) if r.split == split]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parsed = list(pool.map(read_recording, recordings))
        return cls([s for streams in parsed for s in streams], dt_us, T)


def detect_dataset(raw_dir):
    if glob.glob(os.path.join(raw_dir, '*.aedat')):
        return 'gesture'
    if any(os.path.isdir(os.path.join(raw_dir, d)) for d in ('Train', 'Test')):
        return 'nmnist'
    raise DataFormatError('%s: neither an N-MNIST nor a DVS Gesture directory' % raw_dir)


def discover(raw_dir):
    """
    List the raw recordings of a dataset directory. N-MNIST is laid out as
    Train|Test/<digit>/<id>.bin; DVS Gesture as *.aedat files with
    *_labels.csv companions, split by trials_to_train.txt / trials_to_test.txt.
    """
    if not os.path.isdir(raw_dir):
        raise DataFormatError('%s: no such directory' % raw_dir)
    kind = detect_dataset(raw_dir)
    recordings = []
    if kind == 'nmnist':
        for split, folder in (('train', 'Train'), ('test', 'Test')):
            for path in sorted(glob.glob(os.path.join(raw_dir, folder, '*', '*.bin'))):
                digit = os.path.basename(os.path.dirname(path))
                try:
                    label = int(digit)
                except ValueError:
                    raise DataFormatError('%s: class folder %r is not a digit' % (path, digit))
                recordings.append(RawRecording(split, path, label, None))
        return recordings

    assigned = {}
    for split, name in GESTURE_SPLIT_FILES.items():
        list_path = os.path.join(raw_dir, name)
        if os.path.exists(list_path):
            with open(list_path) as f:
                for line in f:
                    if line.strip():
                        assigned[line.strip()] = split
    for path in sorted(glob.glob(os.path.join(raw_dir, '*.aedat'))):
        name = os.path.basename(path)
        labels_path = path[:-len('.aedat')] + '_labels.csv'
        if not os.path.exists(labels_path):
            raise DataFormatError('%s: missing label file %s' % (path, labels_path))
        if assigned:
            split = assigned.get(name)
        else:
            split = 'train'
        if split is None:
            logger.debug('%s is in neither trial list, skipped', name)
            continue
        recordings.append(RawRecording(split, path, None, labels_path))
    return recordings


def read_recording(recording):
    """Parse one raw recording into its labeled event streams."""
    try:
        with open(recording.path, 'rb') as f:
            data = f.read()
        if recording.labels_path is None:
            return [parse_nmnist(data, label=recording.label)]
        with open(recording.labels_path, 'rb') as f:
            labels_csv = f.read()
        return parse_gesture(data, labels_csv)
    except NvbenchError as e:
        raise type(e)('%s: %s' % (recording.path, e))
    except (IOError, OSError) as e:
        raise MalformedFileError('%s: %s' % (recording.path, e))


def verify_checksums(raw_dir):
    """Check the files listed in SHA256SUMS, if present. Returns the number checked."""
    manifest = os.path.join(raw_dir, CHECKSUM_FILE)
    if not os.path.exists(manifest):
        return 0
    expected = read_checksums(manifest)
    for name, digest in sorted(expected.items()):
        path = os.path.join(raw_dir, name)
        if not os.path.exists(path):
            raise ChecksumError('%s: listed in %s but missing' % (path, CHECKSUM_FILE))
        if sha256_file(path) != digest:
            raise ChecksumError('%s: sha256 does not match %s' % (path, CHECKSUM_FILE))
    return len(expected)


class PrepareMetrics(object):
    """Prepare specific metrics."""

    def __init__(self, metrics_factory):
        self.recordings_ok = \
            metrics_factory.create_counter(name='nvbench:recordings', tags={'result': 'ok'})
        self.recordings_failed = \
            metrics_factory.create_counter(name='nvbench:recordings', tags={'result': 'err'})
        self.samples_written = metrics_factory.create_counter(name='nvbench:samples')


PrepareResult = collections.namedtuple('PrepareResult',
                                       ['dataset', 'counts', 'failures', 'checksum'])


def prepare(raw_dir, out_dir, dt_us, T, workers=4, strict=True, metrics_factory=None,
            error_reporter=None):
    """
    Parse, collapse and cache every recording of raw_dir as
    out_dir/<split>/<label>/<name>.nvsl. Output names depend only on the
    raw file names, so rerunning overwrites the same files.

    :param strict: raise on the first unreadable recording; otherwise count
        it, log it through the error reporter and continue
    :return: PrepareResult with per-split sample counts
    """
    metrics = PrepareMetrics(metrics_factory or MetricsFactory())
    error_reporter = error_reporter or ErrorReporter(
        counter=metrics.recordings_failed, logger=logger)
    kind = detect_dataset(raw_dir)
    checked = verify_checksums(raw_dir)
    if checked:
        logger.info('%d raw files match %s', checked, CHECKSUM_FILE)
    recordings = discover(raw_dir)
    descriptor = DATASETS[kind]
    alpha_dt = dt_us // DT0_US
    if alpha_dt < 1 or dt_us % DT0_US:
        raise ConfigError('dt_us must be a positive multiple of %d' % DT0_US)
    os.makedirs(out_dir, exist_ok=True)

    def _process(recording):
        try:
            streams = read_recording(recording)
        except NvbenchError as e:
            if strict:
                raise
            error_reporter.error('skipping %s', e)
            return recording.split, 0
        stem = os.path.splitext(os.path.basename(recording.path))[0]
        for i, stream in enumerate(streams):
            seq = collapse(stream, alpha_dt, T)
            name = stem if len(streams) == 1 and recording.labels_path is None \
                else '%s_%03d' % (stem, i)
            folder = os.path.join(out_dir, recording.split, '%02d' % seq.label)
            os.makedirs(folder, exist_ok=True)
            save_slices(seq, os.path.join(folder, name + '.nvsl'))
        metrics.recordings_ok(1)
        metrics.samples_written(len(streams))
        return recording.split, len(streams)

    counts = collections.OrderedDict((split, 0) for split in SPLITS)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for split, written in pool.map(_process, recordings):
            counts[split] = counts.get(split, 0) + written
    if error_reporter.errors:
        logger.warning('%d recordings under %s could not be read', error_reporter.errors, raw_dir)
    checksum = sha256_tree(out_dir, suffix='.nvsl')
    meta = {
        'dataset': kind,
        'dt_us': int(dt_us),
        'T': int(T),
        'width': descriptor['width'],
        'height': descriptor['height'],
        'classes': descriptor['classes'],
        'counts': dict(counts),
        'sha256': checksum,
    }
    with open(os.path.join(out_dir, PREPARED_FILE), 'w') as f:
        yaml.safe_dump(meta, f, sort_keys=True)
    for split, n in counts.items():
        logger.info('%s %s: %d samples (full dataset: %d)', kind, split, n,
                    descriptor['splits'].get(split, 0))
    return PrepareResult(kind, counts, error_reporter.errors, checksum)


def read_prepared(root):
    with open(os.path.join(root, PREPARED_FILE)) as f:
        return yaml.safe_load(f)
