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
from __future__ import division


class MetricsFactory(object):
    """Hands out noop metric callables; subclasses bind them to a backend."""

    def _noop(self, *args):
        pass

    def create_counter(self, name, tags=None):
        """
        :param name: metric name, e.g. 'nvbench:batches'
        :param tags: optional dict of label values
        :return: callable increment(value)
        """
        return self._noop

    def create_timer(self, name, tags=None):
        """
        :return: callable record(seconds) taking a wall-clock duration
        """
        return self._noop

    def create_gauge(self, name, tags=None):
        """
        :return: callable update(value)
        """
        return self._noop


def flat_key(name, tags=None):
    """'nvbench:recordings' with {'result': 'ok'} -> 'nvbench:recordings.result_ok'"""
    parts = [name] + ['%s_%s' % (k, tags[k]) for k in sorted(tags or {})]
    return '.'.join(parts)


class CallbackMetricsFactory(MetricsFactory):
    """Routes every metric to a Metrics object under a flat key."""

    def __init__(self, metrics):
        self._metrics = metrics

    def _bind(self, emit, name, tags, scale=None):
        key = flat_key(name, tags)
        if scale is None:
            return lambda value: emit(key, value)
        return lambda value: emit(key, value * scale)

    def create_counter(self, name, tags=None):
        return self._bind(self._metrics.count, name, tags)

    def create_timer(self, name, tags=None):
        # callbacks take milliseconds
        return self._bind(self._metrics.timing, name, tags, scale=1000.0)

    def create_gauge(self, name, tags=None):
        return self._bind(self._metrics.gauge, name, tags)


class Metrics(object):
    """
    Plain callbacks for counters, gauges and timings, e.g. a statsd client's
    bound methods: each is called as fn(key, value), timings in ms.
    Missing or non-callable callbacks are ignored.
    """

    def __init__(self, count=None, gauge=None, timing=None):
        self._callbacks = {name: fn for name, fn in
                           (('count', count), ('gauge', gauge), ('timing', timing))
                           if callable(fn)}

    def _emit(self, kind, key, value):
        fn = self._callbacks.get(kind)
        if fn is not None:
            fn(key, value)

    def count(self, key, value):
        self._emit('count', key, value)

    def timing(self, key, value):
        self._emit('timing', key, value)

    def gauge(self, key, value):
        self._emit('gauge', key, value)
