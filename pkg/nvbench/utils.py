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

import hashlib
import os
import time

import numpy as np


class ErrorReporter(object):
    """
    Counts every error and, given a logger, logs the first one and then at
    most one every log_interval_minutes. A recording that fails to parse
    during prepare goes through here so a bad directory cannot flood the log.
    """

    def __init__(self, counter=None, logger=None, log_interval_minutes=15):
        self.counter = counter
        self.logger = logger
        self.log_interval_minutes = log_interval_minutes
        self._last_error_reported_at = None
        self.errors = 0

    def error(self, *args):
        self.errors += 1
        if self.counter is not None:
            self.counter(1)
        if self.logger is None:
            return
        now = time.time()
        last = self._last_error_reported_at
        if last is not None and now < last + self.log_interval_minutes * 60:
            return
        self.logger.error(*args)
        self._last_error_reported_at = now


def get_boolean(string, default):
    string = str(string).lower()
    if string in ['false', '0', 'none', 'no', 'off']:
        return False
    elif string in ['true', '1', 'yes', 'on']:
        return True
    else:
        return default


def make_rng(seed, *streams):
    """
    Derive an independent generator from the root seed. Every random
    choice in a run (initialization, shuffling, sampling) takes its own
    stream so that adding one does not shift the others.
    """
    return np.random.default_rng([int(seed)] + [int(s) for s in streams])


def sha256_file(path, chunk_size=1 << 20):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_tree(root, suffix=None):
    """Digest over relative paths and contents of every file under root."""
    digest = hashlib.sha256()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            if suffix and not name.endswith(suffix):
                continue
            path = os.path.join(dirpath, name)
            digest.update(os.path.relpath(path, root).encode('utf-8'))
            digest.update(sha256_file(path).encode('ascii'))
    return digest.hexdigest()


def read_checksums(path):
    """Parse a `sha256sum`-style manifest into {relative path: digest}."""
    checksums = {}
    with open(path, 'r') as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            digest, name = line.split(None, 1)
            checksums[name.lstrip('*')] = digest.lower()
    return checksums
