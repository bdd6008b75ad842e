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

from prometheus_client import Counter, Gauge, Histogram

from nvbench.metrics import MetricsFactory


class PrometheusMetricsFactory(MetricsFactory):
    """
    Metrics backed by prometheus_client. Metric names arrive as
    'nvbench:epoch_loss'; the namespace prefix is added by the client.
    With run_label every metric also carries a run=<label> label.
    """
    def __init__(self, namespace='', run_label=None, registry=None):
        self._cache = {}
        self._namespace = namespace
        self._run_label = run_label
        self._registry = registry

    def _get_metric(self, metric_type, name, tags):
        tags = dict(tags or {})
        if self._run_label:
            tags['run'] = self._run_label
        name = name.replace(':', '_')
        label_names = tuple(sorted(tags))
        cache_key = (metric_type.__name__, name, label_names)

        metric = self._cache.get(cache_key)
        if metric is None:
            extra = {} if self._registry is None else {'registry': self._registry}
            metric = metric_type(name=name, documentation=name, labelnames=label_names,
                                 namespace=self._namespace, **extra)
            self._cache[cache_key] = metric
        return metric.labels(**tags) if tags else metric

    def create_counter(self, name, tags=None):
        return self._get_metric(Counter, name, tags).inc

    def create_gauge(self, name, tags=None):
        return self._get_metric(Gauge, name, tags).set

    def create_timer(self, name, tags=None):
        # seconds, the prometheus base unit
        return self._get_metric(Histogram, name, tags).observe
