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

import pytest

prometheus_client = pytest.importorskip('prometheus_client')

from nvbench.metrics.prometheus import PrometheusMetricsFactory  # noqa: E402


def sample(registry, name, labels=None):
    value = registry.get_sample_value(name + '_total', labels or {})
    if value is None:
        value = registry.get_sample_value(name, labels or {})
    return value


@pytest.fixture
def registry():
    return prometheus_client.CollectorRegistry()


def test_prometheus_metrics_counter(registry):
    metrics = PrometheusMetricsFactory(namespace='test', registry=registry)
    counter1 = metrics.create_counter(name='nvbench:recordings', tags={'result': 'ok'})
    counter1(1)
    counter2 = metrics.create_counter(name='nvbench:recordings', tags={'result': 'ok'})
    counter2(1)
    assert sample(registry, 'test_nvbench_recordings', {'result': 'ok'}) == 2


def test_prometheus_metrics_counter_without_tags(registry):
    metrics = PrometheusMetricsFactory(registry=registry)
    metrics.create_counter(name='nvbench:batches')(3)
    assert sample(registry, 'nvbench_batches') == 3


def test_prometheus_metrics_gauge(registry):
    metrics = PrometheusMetricsFactory(namespace='test', registry=registry)
    gauge = metrics.create_gauge(name='nvbench:epoch_loss', tags={'split': 'train'})
    gauge(0.5)
    gauge(0.25)
    assert registry.get_sample_value('test_nvbench_epoch_loss', {'split': 'train'}) == 0.25


def test_prometheus_metrics_timer(registry):
    metrics = PrometheusMetricsFactory(registry=registry)
    metrics.create_timer(name='nvbench:epoch_time')(1.5)
    assert registry.get_sample_value('nvbench_epoch_time_count') == 1
    assert registry.get_sample_value('nvbench_epoch_time_sum') == 1.5


def test_prometheus_metrics_with_run_label(registry):
    metrics = PrometheusMetricsFactory(run_label='run-1', registry=registry)
    metrics.create_gauge(name='nvbench:epoch_accuracy')(0.9)
    metrics.create_counter(name='nvbench:samples_seen', tags={'x': 'y'})(5)
    assert registry.get_sample_value('nvbench_epoch_accuracy', {'run': 'run-1'}) == 0.9
    assert sample(registry, 'nvbench_samples_seen', {'run': 'run-1', 'x': 'y'}) == 5
