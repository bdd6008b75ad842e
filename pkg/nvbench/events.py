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

from .constants import DT0_US, NUM_POLARITIES
from .errors import GeometryError, MalformedFileError, ShapeMismatchError

Event = collections.namedtuple('Event', ['x', 'y', 'polarity', 't_us'])


class EventStream(object):
    """
    A parsed DVS recording: polarity events with microsecond timestamps and
    the sensor geometry they were captured on.

    Events are held column-wise in numpy arrays; iterating the stream or
    indexing it yields `Event` tuples.
    """

    __slots__ = ['x', 'y', 'polarity', 't_us', 'sensor_width', 'sensor_height', 'label']

    def __init__(self, x, y, polarity, t_us, sensor_width, sensor_height, label=None):
        self.x = np.asarray(x, dtype=np.int64).reshape(-1)
        self.y = np.asarray(y, dtype=np.int64).reshape(-1)
        self.polarity = np.asarray(polarity, dtype=np.int64).reshape(-1)
        self.t_us = np.asarray(t_us, dtype=np.int64).reshape(-1)
        self.sensor_width = int(sensor_width)
        self.sensor_height = int(sensor_height)
        self.label = None if label is None else int(label)

        n = len(self.t_us)
        if not (len(self.x) == len(self.y) == len(self.polarity) == n):
            raise ShapeMismatchError('event columns differ in length')
        if n:
            if self.x.min() < 0 or self.x.max() >= self.sensor_width or \
                    self.y.min() < 0 or self.y.max() >= self.sensor_height:
                raise GeometryError(
                    'event outside %dx%d sensor' % (self.sensor_width, self.sensor_height))
            if not np.isin(self.polarity, (0, 1)).all():
                raise MalformedFileError('polarity must be 0 or 1')
            if self.t_us.min() < 0:
                raise MalformedFileError('negative timestamp')
            if (np.diff(self.t_us) < 0).any():
                raise MalformedFileError('timestamps must be non-decreasing')

    @classmethod
    def from_events(cls, events, sensor_width, sensor_height, label=None):
        events = list(events)
        columns = list(zip(*events)) if events else [(), (), (), ()]
        return cls(*columns, sensor_width=sensor_width,
                   sensor_height=sensor_height, label=label)

    @classmethod
    def empty(cls, sensor_width, sensor_height, label=None):
        return cls((), (), (), (), sensor_width, sensor_height, label)

    def __len__(self):
        return len(self.t_us)

    def __getitem__(self, index):
        return Event(int(self.x[index]), int(self.y[index]),
                     int(self.polarity[index]), int(self.t_us[index]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def events(self):
        return list(self)

    @property
    def duration_us(self):
        return int(self.t_us[-1]) + 1 if len(self) else 0

    def window(self, start_us, end_us, label=None):
        """Events in [start_us, end_us) rebased so that start_us becomes 0."""
        lo = np.searchsorted(self.t_us, start_us, side='left')
        hi = np.searchsorted(self.t_us, end_us, side='left')
        return EventStream(self.x[lo:hi], self.y[lo:hi], self.polarity[lo:hi],
                           self.t_us[lo:hi] - start_us,
                           self.sensor_width, self.sensor_height, label)

    def __repr__(self):
        return 'EventStream(events=%d, sensor=%dx%d, label=%s)' % (
            len(self), self.sensor_width, self.sensor_height, self.label)


class SliceSequence(object):
    """
    Dense binary slices [T, 2, H, W] obtained by temporal collapse; the
    network input. dt_us is the duration of event history per slice.
    """

    __slots__ = ['data', 'dt_us', 'label']

    def __init__(self, data, dt_us, label=None):
        data = np.asarray(data)
        if data.ndim != 4 or data.shape[1] != NUM_POLARITIES or data.shape[0] < 1:
            raise ShapeMismatchError('slices must be [T>=1, 2, H, W], got %s' % (data.shape,))
        if not np.isin(data, (0, 1)).all():
            raise ShapeMismatchError('slices must be binary')
        self.data = data.astype(np.uint8, copy=False)
        self.dt_us = int(dt_us)
        self.label = None if label is None else int(label)

    @property
    def T(self):
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape

    @property
    def alpha_dt(self):
        return self.dt_us // DT0_US

    def __eq__(self, other):
        return (
            isinstance(other, SliceSequence) and
            self.dt_us == other.dt_us and self.label == other.label and
            self.data.shape == other.data.shape and
            np.array_equal(self.data, other.data)
        )

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return 'SliceSequence(shape=%s, dt_us=%d, label=%s)' % (
            self.data.shape, self.dt_us, self.label)


def collapse(stream, alpha_dt, T):
    """
    Retime a stream to slices of alpha_dt * dt0 microseconds.

    An element of slice t is 1 iff at least one event with
    floor(t_us / alpha_dt) == t hit that pixel and polarity. Only the first
    T slices are kept; events past T * alpha_dt are dropped and missing
    trailing slices stay zero.
    """
    alpha_dt = int(alpha_dt)
    T = int(T)
    if alpha_dt < 1:
        raise ValueError('alpha_dt must be a positive integer')
    if T < 1:
        raise ValueError('T must be a positive integer')

    data = np.zeros((T, NUM_POLARITIES, stream.sensor_height, stream.sensor_width),
                    dtype=np.uint8)
    if len(stream):
        index = stream.t_us // alpha_dt
        keep = index < T
        data[index[keep], stream.polarity[keep], stream.y[keep], stream.x[keep]] = 1
    return SliceSequence(data, dt_us=alpha_dt * DT0_US, label=stream.label)


def spike_rate(seq):
    """Fraction of set elements in a slice sequence."""
    data = seq.data if isinstance(seq, SliceSequence) else np.asarray(seq)
    if data.size == 0:
        return 0.0
    return float(data.mean())


def or_group(seq, beta):
    """
    OR together every beta consecutive slices. A trailing partial group is
    dropped, so the result covers the common time range only.
    """
    beta = int(beta)
    if beta < 1:
        raise ValueError('beta must be a positive integer')
    T = seq.T // beta
    if T < 1:
        raise ShapeMismatchError('sequence shorter than one group of %d slices' % beta)
    grouped = seq.data[:T * beta].reshape((T, beta) + seq.data.shape[1:]).max(axis=1)
    return SliceSequence(grouped, dt_us=seq.dt_us * beta, label=seq.label)


def stack(sequences, dtype=np.float64):
    """Batch slice sequences into a [B, T, 2, H, W] array plus labels."""
    sequences = list(sequences)
    if not sequences:
        raise ShapeMismatchError('empty batch')
    shape = sequences[0].shape
    for seq in sequences:
        if seq.shape != shape:
            raise ShapeMismatchError('batch mixes shapes %s and %s' % (shape, seq.shape))
    data = np.stack([seq.data for seq in sequences]).astype(dtype)
    labels = np.array([-1 if seq.label is None else seq.label for seq in sequences])
    return data, labels
