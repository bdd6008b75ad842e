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
import yaml

from nvbench.constants import NVBENCH_VERSION
from nvbench.errors import ManifestError
from nvbench.manifest import MANIFEST_FILE, RunManifest, read_manifest


@pytest.fixture
def manifest():
    return RunManifest.create({'data': {'dataset': 'nmnist', 'dt_ms': 3}}, seed=11,
                              dataset_checksum='ab' * 32,
                              timings={'prepare_seconds': 1.5})


def test_create(manifest):
    assert manifest.seed == 11
    assert manifest.code_version == NVBENCH_VERSION
    assert manifest.timings['prepare_seconds'] == 1.5
    assert manifest.timings['started_at'].endswith('Z')


def test_write_and_read(manifest, tmp_path):
    run_dir = str(tmp_path / 'run-1')
    path = manifest.write(run_dir)
    assert path.endswith(MANIFEST_FILE)
    assert read_manifest(run_dir) == manifest


def test_never_overwritten(manifest, tmp_path):
    run_dir = str(tmp_path)
    manifest.write(run_dir)
    other = RunManifest.create({}, seed=12)
    with pytest.raises(ManifestError, match='already exists'):
        other.write(run_dir)
    assert read_manifest(run_dir).seed == 11


def test_read_missing(tmp_path):
    with pytest.raises(ManifestError):
        read_manifest(str(tmp_path))


def test_read_wrong_fields(tmp_path):
    (tmp_path / MANIFEST_FILE).write_text(yaml.safe_dump({'config': {}, 'seed': 1}))
    with pytest.raises(ManifestError, match='expected fields'):
        read_manifest(str(tmp_path))


def test_read_not_yaml(tmp_path):
    (tmp_path / MANIFEST_FILE).write_text('config: [unclosed')
    with pytest.raises(ManifestError):
        read_manifest(str(tmp_path))
