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
import threading

default_logger = logging.getLogger('nvbench')

RUN_LOG_COLUMNS = ('epoch', 'split', 'loss', 'accuracy', 'wall_seconds')

EpochRecord = collections.namedtuple('EpochRecord', RUN_LOG_COLUMNS)


class NullReporter(object):
    """Ignores all records."""
    def report_epoch(self, record):
        pass

    def set_run(self, metadata):
        pass

    def close(self):
        pass


class InMemoryReporter(NullReporter):
    """Stores records in memory and returns them via get_records()."""
    def __init__(self):
        super(InMemoryReporter, self).__init__()
        self.records = []
        self.metadata = None
        self.lock = threading.Lock()

    def set_run(self, metadata):
        self.metadata = metadata

    def report_epoch(self, record):
        with self.lock:
            self.records.append(record)

    def get_records(self, split=None):
        with self.lock:
            return [r for r in self.records if split is None or r.split == split]


class LoggingReporter(NullReporter):
    """Logs one line per epoch and split."""
    def __init__(self, logger=None):
        self.logger = logger if logger else default_logger

    def report_epoch(self, record):
        self.logger.info('epoch %d %-5s loss=%.6f accuracy=%.4f (%.1fs)', record.epoch,
                         record.split, record.loss, record.accuracy, record.wall_seconds)


class CsvReporter(NullReporter):
    """
    Appends records to a CSV run log with columns
    epoch,split,loss,accuracy,wall_seconds. The header is written only when
    the sink is empty, so a resumed run keeps appending to one file.
    """
    def __init__(self, sink):
        if isinstance(sink, io.IOBase) or hasattr(sink, 'write'):
            self._file = sink
            self._owned = False
        else:
            self._file = open(sink, 'a', newline='')
            self._owned = True
        self._writer = csv.writer(self._file, lineterminator='\n')
        self.lock = threading.Lock()
        if self._is_empty():
            self._writer.writerow(RUN_LOG_COLUMNS)
            self._file.flush()

    def _is_empty(self):
        try:
            return self._file.tell() == 0
        except (OSError, ValueError):
            return True

    def report_epoch(self, record):
        with self.lock:
            self._writer.writerow([record.epoch, record.split, repr(float(record.loss)),
                                   repr(float(record.accuracy)),
                                   '%.3f' % record.wall_seconds])
            self._file.flush()

    def close(self):
        if self._owned and not self._file.closed:
            self._file.close()


class CompositeReporter(NullReporter):
    """Delegates reporting to one or more underlying reporters."""
    def __init__(self, *reporters):
        self.reporters = reporters

    def set_run(self, metadata):
        for reporter in self.reporters:
            reporter.set_run(metadata)

    def report_epoch(self, record):
        for reporter in self.reporters:
            reporter.report_epoch(record)

    def close(self):
        for reporter in self.reporters:
            reporter.close()


def read_run_log(source):
    """Parse a CSV run log back into EpochRecords."""
    if hasattr(source, 'read'):
        rows = list(csv.DictReader(source))
    else:
        with open(source, newline='') as f:
            rows = list(csv.DictReader(f))
    return [EpochRecord(int(r['epoch']), r['split'], float(r['loss']), float(r['accuracy']),
                        float(r['wall_seconds'])) for r in rows]
