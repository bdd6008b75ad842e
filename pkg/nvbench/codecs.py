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

import collections
import csv
import io
import logging
import struct

import numpy as np

from .constants import (
    AEDAT_POLARITY_EVENT,
    AEDAT_VERSION_LINE,
    GESTURE_HEIGHT,
    GESTURE_WIDTH,
    NMNIST_HEIGHT,
    NMNIST_WIDTH,
    NO_LABEL,
    NUM_POLARITIES,
    NVCK_MAGIC,
    NVCK_VERSION,
    NVSF_MAGIC,
    NVSF_VERSION,
    NVSL_MAGIC,
    NVSL_VERSION,
)
from .errors import (
    BadMagicError,
    GeometryError,
    LabelFileError,
    MalformedFileError,
    TruncationError,
    UnsupportedFormatError,
    VersionMismatchError,
)
from .events import EventStream, SliceSequence

logger = logging.getLogger('nvbench')

NMNIST_RECORD_SIZE = 5

AEDAT_END_HEADER = b'#!END-HEADER'
AEDAT_PACKET_HEADER = struct.Struct('<hhiiiiii')
AEDAT_POLARITY_SIZE = 8

NVSL_HEADER = struct.Struct('<4s7I')
NVSF_HEADER = struct.Struct('<4sII')
NVCK_HEADER = struct.Struct('<4sII')

LABEL_COLUMNS = ('class', 'startTime_usec', 'endTime_usec')


class Codec(object):
    def encode(self, obj):
        raise NotImplementedError()

    def decode(self, data):
        raise NotImplementedError()


class NmnistCodec(Codec):
    """
    N-MNIST recordings: 5-byte records, byte0 = x, byte1 = y, bit 7 of
    byte2 = polarity, the remaining 23 bits (byte2 bits 6..0, byte3, byte4)
    a big-endian timestamp in microseconds. The sensor is 34 x 34.
    """

    def decode(self, data, label=None):
        data = bytes(data)
        if len(data) % NMNIST_RECORD_SIZE:
            raise MalformedFileError(
                'N-MNIST length %d is not a multiple of %d' % (len(data), NMNIST_RECORD_SIZE))
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, NMNIST_RECORD_SIZE)
        records = records.astype(np.int64)
        x = records[:, 0]
        y = records[:, 1]
        if len(records) and (x.max() >= NMNIST_WIDTH or y.max() >= NMNIST_HEIGHT):
            raise GeometryError('N-MNIST event outside %dx%d sensor'
                                % (NMNIST_WIDTH, NMNIST_HEIGHT))
        polarity = records[:, 2] >> 7
        t_us = ((records[:, 2] & 0x7F) << 16) | (records[:, 3] << 8) | records[:, 4]
        x, y, polarity, t_us = _time_ordered(x, y, polarity, t_us)
        return EventStream(x, y, polarity, t_us, NMNIST_WIDTH, NMNIST_HEIGHT, label)

    def encode(self, stream):
        if len(stream) and stream.t_us.max() >= 1 << 23:
            raise MalformedFileError('N-MNIST timestamps are limited to 23 bits')
        records = np.zeros((len(stream), NMNIST_RECORD_SIZE), dtype=np.uint8)
        records[:, 0] = stream.x
        records[:, 1] = stream.y
        records[:, 2] = (stream.polarity << 7) | ((stream.t_us >> 16) & 0x7F)
        records[:, 3] = (stream.t_us >> 8) & 0xFF
        records[:, 4] = stream.t_us & 0xFF
        return records.tobytes()


class AedatCodec(Codec):
    """
    AEDAT 3.1 containers as written by the DVS128 recordings: an ASCII
    header ended by `#!END-HEADER`, then packets of a 28-byte header
    followed by eventCapacity * eventSize bytes. Only polarity events
    (type 1) are read; other packet types are skipped.
    """

    def __init__(self, sensor_width=GESTURE_WIDTH, sensor_height=GESTURE_HEIGHT):
        self.sensor_width = sensor_width
        self.sensor_height = sensor_height

    def decode(self, data, label=None):
        data = bytes(data)
        offset = self._skip_header(data)
        xs, ys, ps, ts = [], [], [], []
        while offset < len(data):
            if offset + AEDAT_PACKET_HEADER.size > len(data):
                raise TruncationError('AEDAT packet header cut at byte %d' % offset)
            (event_type, _source, event_size, _ts_offset, ts_overflow,
             capacity, _number, _valid) = AEDAT_PACKET_HEADER.unpack_from(data, offset)
            offset += AEDAT_PACKET_HEADER.size
            if event_size <= 0 or capacity < 0:
                raise MalformedFileError('AEDAT packet with size %d, capacity %d'
                                         % (event_size, capacity))
            end = offset + event_size * capacity
            if end > len(data):
                raise TruncationError('AEDAT packet payload cut at byte %d' % len(data))
            if event_type == AEDAT_POLARITY_EVENT:
                if event_size != AEDAT_POLARITY_SIZE:
                    raise UnsupportedFormatError(
                        'polarity events of %d bytes' % event_size)
                words = np.frombuffer(data, dtype='<u4', count=2 * capacity, offset=offset)
                word = words[0::2].astype(np.int64)
                stamp = words[1::2].astype(np.int64) & 0x7FFFFFFF
                valid = (word & 1).astype(bool)
                xs.append((word[valid] >> 17) & 0x7FFF)
                ys.append((word[valid] >> 2) & 0x7FFF)
                ps.append((word[valid] >> 1) & 1)
                ts.append(stamp[valid] | (int(ts_overflow) << 31))
            offset = end

        if xs:
            x, y, polarity, t_us = (np.concatenate(c) for c in (xs, ys, ps, ts))
        else:
            x = y = polarity = t_us = np.zeros(0, dtype=np.int64)
        if len(x) and (x.max() >= self.sensor_width or y.max() >= self.sensor_height):
            raise GeometryError('AEDAT event outside %dx%d sensor'
                                % (self.sensor_width, self.sensor_height))
        x, y, polarity, t_us = _time_ordered(x, y, polarity, t_us)
        return EventStream(x, y, polarity, t_us, self.sensor_width, self.sensor_height, label)

    def encode(self, stream):
        header = AEDAT_VERSION_LINE + b'\r\n#Format: RAW\r\n' + AEDAT_END_HEADER + b'\r\n'
        overflow = stream.t_us >> 31
        chunks = [header]
        for value in np.unique(overflow):
            pick = overflow == value
            n = int(pick.sum())
            word = (stream.x[pick] << 17) | (stream.y[pick] << 2) | \
                (stream.polarity[pick] << 1) | 1
            payload = np.empty(2 * n, dtype='<u4')
            payload[0::2] = word
            payload[1::2] = stream.t_us[pick] & 0x7FFFFFFF
            chunks.append(AEDAT_PACKET_HEADER.pack(
                AEDAT_POLARITY_EVENT, 0, AEDAT_POLARITY_SIZE, 4, int(value), n, n, n))
            chunks.append(payload.tobytes())
        return b''.join(chunks)

    def _skip_header(self, data):
        if not data.startswith(b'#!AER-DAT'):
            raise UnsupportedFormatError('not an AEDAT container')
        first_line = data.split(b'\n', 1)[0].rstrip(b'\r')
        if first_line != AEDAT_VERSION_LINE:
            raise UnsupportedFormatError(
                'unsupported container version %r' % first_line.decode('ascii', 'replace'))
        offset = 0
        while offset < len(data) and data[offset:offset + 1] == b'#':
            newline = data.find(b'\n', offset)
            if newline < 0:
                raise TruncationError('AEDAT header is not terminated')
            line = data[offset:newline].rstrip(b'\r')
            offset = newline + 1
            if line == AEDAT_END_HEADER:
                return offset
        raise TruncationError('AEDAT header has no end marker')


def _time_ordered(x, y, polarity, t_us):
    if len(t_us) and (np.diff(t_us) < 0).any():
        logger.debug('reordering %d events by timestamp', len(t_us))
        order = np.argsort(t_us, kind='stable')
        return x[order], y[order], polarity[order], t_us[order]
    return x, y, polarity, t_us


TrialWindow = collections.namedtuple('TrialWindow', ['label', 'start_us', 'end_us'])


def parse_labels(labels_csv, num_classes=11):
    """
    Read gesture trial windows from a CSV with the columns class,
    startTime_usec, endTime_usec. Classes are 1-based in the file and
    returned 0-based.
    """
    if isinstance(labels_csv, bytes):
        try:
            labels_csv = labels_csv.decode('utf-8')
        except UnicodeDecodeError:
            raise LabelFileError('label file is not UTF-8')
    try:
        rows = [row for row in csv.reader(io.StringIO(labels_csv)) if any(c.strip() for c in row)]
    except csv.Error as e:
        raise LabelFileError('unreadable label file: %s' % e)
    if not rows:
        return []
    header = tuple(c.strip() for c in rows[0])
    if header != LABEL_COLUMNS:
        raise LabelFileError('unexpected label header %s' % ','.join(header))
    windows = []
    for row in rows[1:]:
        try:
            cls, start_us, end_us = (int(c) for c in row)
        except ValueError:
            raise LabelFileError('malformed label row %s' % ','.join(row))
        if not 1 <= cls <= num_classes:
            raise LabelFileError('class %d outside 1..%d' % (cls, num_classes))
        if end_us < start_us:
            raise LabelFileError('window [%d, %d) is reversed' % (start_us, end_us))
        windows.append(TrialWindow(cls - 1, start_us, end_us))
    ordered = sorted(windows, key=lambda w: w.start_us)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start_us < prev.end_us:
            raise LabelFileError('windows [%d, %d) and [%d, %d) overlap'
                                 % (prev.start_us, prev.end_us, cur.start_us, cur.end_us))
    return windows


def parse_nmnist(data, label=None):
    return NmnistCodec().decode(data, label=label)


def parse_gesture(data, labels_csv):
    """One EventStream per labeled trial window of a gesture recording."""
    windows = parse_labels(labels_csv)
    if not windows:
        return []
    stream = AedatCodec().decode(data)
    return [stream.window(w.start_us, w.end_us, label=w.label) for w in windows]


class SliceCodec(Codec):
    """
    NVSL slice cache: magic, u32 little-endian version, T, C, H, W, dt_us
    and label (0xFFFFFFFF if absent), then one byte per element in
    t, c, y, x order.
    """

    def encode(self, seq):
        T, C, H, W = seq.data.shape
        label = NO_LABEL if seq.label is None else seq.label
        header = NVSL_HEADER.pack(NVSL_MAGIC, NVSL_VERSION, T, C, H, W, seq.dt_us, label)
        return header + np.ascontiguousarray(seq.data, dtype=np.uint8).tobytes()

    def decode(self, data):
        data = bytes(data)
        _check_magic(data, NVSL_MAGIC)
        if len(data) < NVSL_HEADER.size:
            raise TruncationError('NVSL header is %d bytes, got %d' % (NVSL_HEADER.size, len(data)))
        _, version, T, C, H, W, dt_us, label = NVSL_HEADER.unpack_from(data)
        if version != NVSL_VERSION:
            raise VersionMismatchError('NVSL version %d, expected %d' % (version, NVSL_VERSION))
        if C != NUM_POLARITIES or T < 1:
            raise MalformedFileError('NVSL shape [%d, %d, %d, %d]' % (T, C, H, W))
        size = T * C * H * W
        payload = data[NVSL_HEADER.size:]
        if len(payload) < size:
            raise TruncationError('NVSL payload is %d bytes, header claims %d'
                                  % (len(payload), size))
        if len(payload) > size:
            raise MalformedFileError('NVSL has %d trailing bytes' % (len(payload) - size))
        slices = np.frombuffer(payload, dtype=np.uint8).reshape(T, C, H, W)
        if slices.max(initial=0) > 1:
            raise MalformedFileError('NVSL payload is not binary')
        return SliceSequence(slices.copy(), dt_us, None if label == NO_LABEL else label)


class FloatTensorCodec(Codec):
    """NVSF: magic, u32 version, u32 ndim, u32 dims, float32 little-endian payload."""

    def encode(self, tensor):
        tensor = np.ascontiguousarray(tensor, dtype='<f4')
        header = NVSF_HEADER.pack(NVSF_MAGIC, NVSF_VERSION, tensor.ndim)
        dims = struct.pack('<%dI' % tensor.ndim, *tensor.shape)
        return header + dims + tensor.tobytes()

    def decode(self, data):
        data = bytes(data)
        _check_magic(data, NVSF_MAGIC)
        if len(data) < NVSF_HEADER.size:
            raise TruncationError('NVSF header cut')
        _, version, ndim = NVSF_HEADER.unpack_from(data)
        if version != NVSF_VERSION:
            raise VersionMismatchError('NVSF version %d, expected %d' % (version, NVSF_VERSION))
        offset = NVSF_HEADER.size
        if len(data) < offset + 4 * ndim:
            raise TruncationError('NVSF dims cut')
        shape = struct.unpack_from('<%dI' % ndim, data, offset)
        offset += 4 * ndim
        size = _element_count(shape) * 4
        if len(data) - offset < size:
            raise TruncationError('NVSF payload cut')
        return np.frombuffer(data, dtype='<f4', count=size // 4, offset=offset).reshape(shape)


CHECKPOINT_DTYPES = {b'f': '<f4', b'd': '<f8'}


class CheckpointCodec(Codec):
    """
    NVCK network checkpoint: magic, u32 version, u32 length + UTF-8 config
    echo, u32 tensor count, then per tensor u32 length + name, u32 ndim,
    u32 dims, one dtype byte (f = float32, d = float64) and the payload.
    All integers little-endian.
    """

    def encode(self, checkpoint):
        config_text, tensors = checkpoint
        config_bytes = config_text.encode('utf-8')
        out = bytearray(NVCK_HEADER.pack(NVCK_MAGIC, NVCK_VERSION, len(config_bytes)))
        out += config_bytes
        out += struct.pack('<I', len(tensors))
        for name, tensor in tensors.items():
            tensor = np.asarray(tensor)
            code = b'f' if tensor.dtype == np.float32 else b'd'
            tensor = np.ascontiguousarray(tensor, dtype=CHECKPOINT_DTYPES[code])
            name_bytes = name.encode('utf-8')
            out += struct.pack('<I', len(name_bytes)) + name_bytes
            out += struct.pack('<I%dI' % tensor.ndim, tensor.ndim, *tensor.shape)
            out += code
            out += tensor.tobytes()
        return bytes(out)

    def decode(self, data):
        data = bytes(data)
        _check_magic(data, NVCK_MAGIC)
        reader = _Reader(data, 'NVCK')
        _, version, config_len = reader.unpack(NVCK_HEADER)
        if version != NVCK_VERSION:
            raise VersionMismatchError('NVCK version %d, expected %d' % (version, NVCK_VERSION))
        config_text = _utf8(reader.take(config_len), 'config echo')
        (count,) = reader.unpack_format('<I')
        tensors = collections.OrderedDict()
        for _ in range(count):
            (name_len,) = reader.unpack_format('<I')
            name = _utf8(reader.take(name_len), 'tensor name')
            (ndim,) = reader.unpack_format('<I')
            shape = struct.unpack('<%dI' % ndim, reader.take(4 * ndim))
            code = reader.take(1)
            if code not in CHECKPOINT_DTYPES:
                raise MalformedFileError('unknown tensor dtype %r for %s' % (code, name))
            dtype = np.dtype(CHECKPOINT_DTYPES[code])
            count_items = _element_count(shape)
            payload = reader.take(count_items * dtype.itemsize)
            tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(shape) \
                .astype(dtype.newbyteorder('='))
        if reader.offset != len(data):
            raise MalformedFileError('NVCK has %d trailing bytes' % (len(data) - reader.offset))
        return config_text, tensors


class _Reader(object):

    def __init__(self, data, what):
        self.data = data
        self.what = what
        self.offset = 0

    def take(self, size):
        if self.offset + size > len(self.data):
            raise TruncationError('%s cut at byte %d' % (self.what, len(self.data)))
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return fmt.unpack(self.take(fmt.size))

    def unpack_format(self, fmt):
        return self.unpack(struct.Struct(fmt))


def _element_count(shape):
    count = 1
    for dim in shape:
        count *= int(dim)
    return count


def _utf8(raw, what):
    try:
        return raw.decode('utf-8')
    except UnicodeDecodeError:
        raise MalformedFileError('%s is not UTF-8' % what)


def _check_magic(data, magic):
    if data[:len(magic)] != magic:
        raise BadMagicError('expected magic %r, got %r' % (magic, data[:len(magic)]))


def _write(sink, payload):
    if hasattr(sink, 'write'):
        sink.write(payload)
    else:
        with open(sink, 'wb') as f:
            f.write(payload)


def _read(source):
    if hasattr(source, 'read'):
        return source.read()
    with open(source, 'rb') as f:
        return f.read()


def save_slices(seq, sink):
    _write(sink, SliceCodec().encode(seq))


def load_slices(source):
    return SliceCodec().decode(_read(source))


def save_tensor(tensor, sink):
    _write(sink, FloatTensorCodec().encode(tensor))


def load_tensor(source):
    return FloatTensorCodec().decode(_read(source))


def save_checkpoint(config_text, tensors, sink):
    _write(sink, CheckpointCodec().encode((config_text, tensors)))


def load_checkpoint(source):
    return CheckpointCodec().decode(_read(source))
