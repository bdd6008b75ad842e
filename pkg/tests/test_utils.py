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

import hashlib
import unittest

import mock
import numpy as np

from nvbench import utils


class UtilsTests(unittest.TestCase):

    def check_boolean(self, string, default, correct):
        assert utils.get_boolean(string, default) == correct

    def test_get_false_boolean(self):
        self.check_boolean('false', 'asdf', False)
        self.check_boolean(False, 'asdf', False)
        self.check_boolean('off', 'asdf', False)

    def test_get_0_boolean(self):
        self.check_boolean('0', 'asdf', False)

    def test_get_true_boolean(self):
        self.check_boolean('true', 'qwer', True)
        self.check_boolean(True, 'qwer', True)

    def test_get_1_boolean(self):
        self.check_boolean('1', 'qwer', True)

    def test_get_unknown_boolean(self):
        self.check_boolean('zxcv', 'qwer', 'qwer')

    def test_get_None_boolean(self):
        self.check_boolean(None, 'qwer', False)

    def test_error_reporter_counts_errors(self):
        counter = mock.MagicMock()
        er = utils.ErrorReporter(counter)
        er.error('bad recording %s', 'a.bin')
        er.error('bad recording %s', 'b.bin')
        assert counter.call_count == 2
        assert er.errors == 2

    def test_error_reporter_logs_first_error_then_waits(self):
        mock_logger = mock.MagicMock()
        er = utils.ErrorReporter(None, logger=mock_logger, log_interval_minutes=1000)
        er.error('foo', 1)
        er.error('foo', 2)
        assert mock_logger.error.call_count == 1
        assert mock_logger.error.call_args == (('foo', 1),)
        assert er.errors == 2

    def test_error_reporter_sends_log_messages_if_after_deadline(self):
        mock_logger = mock.MagicMock()
        # 0 log interval means we're always after the deadline, so always log
        er = utils.ErrorReporter(None, logger=mock_logger, log_interval_minutes=0)
        er.error('foo', 1)
        er.error('foo', 1, 'error args')
        assert mock_logger.error.call_count == 2
        assert mock_logger.error.call_args == (('foo', 1, 'error args',),)


def test_make_rng_streams_are_independent():
    a = utils.make_rng(7, 1).random(4)
    b = utils.make_rng(7, 1).random(4)
    c = utils.make_rng(7, 2).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sha256_tree_tracks_names_and_contents(tmp_path):
    root = tmp_path / 'tree'
    (root / 'sub').mkdir(parents=True)
    (root / 'sub' / 'a.nvsl').write_bytes(b'abc')
    (root / 'notes.txt').write_bytes(b'ignored')
    before = utils.sha256_tree(str(root), suffix='.nvsl')
    (root / 'notes.txt').write_bytes(b'changed')
    assert utils.sha256_tree(str(root), suffix='.nvsl') == before
    (root / 'sub' / 'a.nvsl').write_bytes(b'abd')
    assert utils.sha256_tree(str(root), suffix='.nvsl') != before
    assert utils.sha256_file(str(root / 'notes.txt')) == hashlib.sha256(b'changed').hexdigest()


def test_read_checksums(tmp_path):
    path = tmp_path / 'SHA256SUMS'
    path.write_text('# digests\nABCDEF  Train/0/00001.bin\n012345 *Test/1/00002.bin\n\n')
    assert utils.read_checksums(str(path)) == {
        'Train/0/00001.bin': 'abcdef',
        'Test/1/00002.bin': '012345',
    }
