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
import datetime
import os

import yaml

from .constants import NVBENCH_VERSION
from .errors import ManifestError

MANIFEST_FILE = 'manifest.yaml'

MANIFEST_FIELDS = ('config', 'seed', 'dataset_checksum', 'code_version', 'timings')


class RunManifest(collections.namedtuple('RunManifest', MANIFEST_FIELDS)):
    """
    Everything needed to reproduce a run: the config echo, the root seed
    every random stream derives from, the checksum of the prepared data,
    the package version and setup timings. Written once before training
    starts and never rewritten.
    """

    __slots__ = ()

    @classmethod
    def create(cls, config, seed, dataset_checksum=None, timings=None):
        timings = dict(timings or {})
        timings.setdefault('started_at', datetime.datetime.utcnow().isoformat() + 'Z')
        return cls(dict(config), int(seed), dataset_checksum, NVBENCH_VERSION, timings)

    def to_dict(self):
        return dict(self._asdict())

    def write(self, run_dir):
        """Create run_dir/manifest.yaml; an existing manifest is never replaced."""
        os.makedirs(run_dir, exist_ok=True)
        path = os.path.join(run_dir, MANIFEST_FILE)
        try:
            with open(path, 'x') as f:
                yaml.safe_dump(self.to_dict(), f, sort_keys=True)
        except FileExistsError:
            raise ManifestError('%s already exists; runs do not share a directory' % path)
        return path


def read_manifest(run_dir):
    path = os.path.join(run_dir, MANIFEST_FILE)
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except (IOError, OSError, yaml.YAMLError) as e:
        raise ManifestError('%s: %s' % (path, e))
    if not isinstance(data, dict) or set(data) != set(MANIFEST_FIELDS):
        raise ManifestError('%s: expected fields %s' % (path, ','.join(MANIFEST_FIELDS)))
    return RunManifest(**data)
