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

import os

import mock
import pytest
import yaml

from nvbench import cli
from nvbench.constants import EXIT_CHECK_FAILED, EXIT_DATA, EXIT_OK, EXIT_USAGE
from nvbench.manifest import read_manifest


@pytest.fixture
def run_config(nmnist_cache, tmp_path):
    path = str(tmp_path / 'exp.yaml')
    with open(path, 'w') as f:
        yaml.safe_dump({
            'data': {'dataset': 'nmnist', 'train_path': nmnist_cache,
                     'test_path': nmnist_cache, 'dt_ms': 3, 'T': 15},
            'model': {'kind': 'snn', 'structure': 'Input-MP2-4C3-10'},
            'train': {'max_epoch': 1, 'batch_size': 10, 'seed': 4},
        }, f)
    return path


@pytest.fixture
def trained(run_config, tmp_path):
    run_dir = str(tmp_path / 'run')
    assert cli.main(['train', run_config, '--out', run_dir]) == EXIT_OK
    return run_dir


@pytest.mark.parametrize('argv', [
    [],
    ['frobnicate'],
    ['prepare', 'raw'],
    ['prepare', 'raw', 'out', '--dt', 'fast', '--T', '3'],
    ['prepare', 'raw', 'out', '--dt', '0', '--T', '3'],
    ['gradcheck', 'gru'],
    ['analyze', 'params', 'a.nvck', 'extra', '--out', 'x.csv'],
    ['analyze', 'contrast', '--out', 'x.csv'],
])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == EXIT_USAGE
    assert 'nvbench' in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert cli.main(['train', str(tmp_path / 'none.yaml')]) == EXIT_USAGE


def test_train_needs_train_path(tmp_path):
    path = tmp_path / 'exp.yaml'
    path.write_text('model:\n  kind: snn\n')
    assert cli.main(['train', str(path), '--out', str(tmp_path / 'run')]) == EXIT_USAGE


def test_missing_checkpoint(nmnist_cache, tmp_path):
    argv = ['eval', str(tmp_path / 'none.nvck'), nmnist_cache]
    assert cli.main(argv) == EXIT_DATA


def test_prepare_missing_raw_dir(tmp_path):
    argv = ['prepare', str(tmp_path / 'none'), str(tmp_path / 'out'), '--dt', '3', '--T', '5']
    assert cli.main(argv) == EXIT_DATA


def test_prepare(nmnist_raw, tmp_path, capsys):
    out = str(tmp_path / 'cache')
    argv = ['prepare', nmnist_raw, out, '--dt', '3', '--T', '15', '--workers', '2']
    assert cli.main(argv) == EXIT_OK
    stdout = capsys.readouterr().out
    assert 'nmnist train: 20' in stdout
    assert 'nmnist test: 20' in stdout
    assert os.path.exists(os.path.join(out, 'prepared.yaml'))


def test_train_writes_run_directory(trained, run_config):
    manifest = read_manifest(trained)
    assert manifest.seed == 4
    assert manifest.dataset_checksum
    assert manifest.config['model']['structure'] == 'Input-MP2-4C3-10'
    assert os.path.exists(os.path.join(trained, cli.CHECKPOINT_FILE))
    with open(os.path.join(trained, cli.RUN_LOG_FILE)) as f:
        assert len(f.read().splitlines()) >= 2
    # a run directory is never reused
    assert cli.main(['train', run_config, '--out', trained]) == EXIT_USAGE


def test_train_logging_switch(run_config, tmp_path):
    with open(run_config) as f:
        config = yaml.safe_load(f)
    config['train']['logging'] = False
    quiet = str(tmp_path / 'quiet.yaml')
    with open(quiet, 'w') as f:
        yaml.safe_dump(config, f)
    with mock.patch('nvbench.cli.LoggingReporter') as reporter_cls:
        assert cli.main(['train', quiet, '--out', str(tmp_path / 'quiet_run')]) == EXIT_OK
        assert not reporter_cls.called
        assert cli.main(['train', run_config, '--out', str(tmp_path / 'loud_run')]) == EXIT_OK
        assert reporter_cls.call_count == 1
    with open(os.path.join(str(tmp_path / 'quiet_run'), cli.RUN_LOG_FILE)) as f:
        assert len(f.read().splitlines()) >= 2


def test_eval(trained, nmnist_cache, capsys):
    checkpoint = os.path.join(trained, cli.CHECKPOINT_FILE)
    assert cli.main(['eval', checkpoint, nmnist_cache, '--samples', '10']) == EXIT_OK
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith('accuracy=')
    assert 'samples=10 T=15 dt_ms=3 T*dt_ms=45' in line
    assert 'trained with' not in line


def test_eval_defaults_to_training_resolution(trained, nmnist_raw, tmp_path, capsys):
    fine_cache = str(tmp_path / 'cache_1ms')
    assert cli.main(['prepare', nmnist_raw, fine_cache, '--dt', '1', '--T', '45']) == EXIT_OK
    checkpoint = os.path.join(trained, cli.CHECKPOINT_FILE)
    assert cli.main(['eval', checkpoint, fine_cache, '--samples', '10']) == EXIT_OK
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert 'samples=10 T=15 dt_ms=3 T*dt_ms=45' in line
    assert 'trained with' not in line


def test_eval_samples_with_run_seed(trained, nmnist_cache, tmp_path):
    checkpoint = os.path.join(trained, cli.CHECKPOINT_FILE)
    with mock.patch('nvbench.cli.load_dataset', wraps=cli.load_dataset) as load:
        assert cli.main(['eval', checkpoint, nmnist_cache, '--samples', '5']) == EXIT_OK
        assert load.call_args[1]['seed'] == 4
        argv = ['eval', checkpoint, nmnist_cache, '--samples', '5', '--seed', '9']
        assert cli.main(argv) == EXIT_OK
        assert load.call_args[1]['seed'] == 9
        # a checkpoint moved away from its run directory has no manifest
        moved = str(tmp_path / 'moved.nvck')
        with open(checkpoint, 'rb') as src, open(moved, 'wb') as dst:
            dst.write(src.read())
        assert cli.main(['eval', moved, nmnist_cache, '--samples', '5']) == EXIT_OK
        assert load.call_args[1]['seed'] == 0


def test_eval_sweep(trained, nmnist_cache, capsys):
    checkpoint = os.path.join(trained, cli.CHECKPOINT_FILE)
    assert cli.main(['eval', checkpoint, nmnist_cache, '--sweep', '3,15']) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert 'T=15 dt_ms=3 ' in lines[-2]
    assert 'T=3 dt_ms=15 ' in lines[-1]
    # finer than the cached slices
    assert cli.main(['eval', checkpoint, nmnist_cache, '--sweep', '1']) == EXIT_USAGE


def test_eval_other_horizon(trained, nmnist_cache, capsys):
    checkpoint = os.path.join(trained, cli.CHECKPOINT_FILE)
    argv = ['eval', checkpoint, nmnist_cache, '--dt', '6', '--T', '5']
    assert cli.main(argv) == EXIT_OK
    assert '(trained with T*dt_ms=45)' in capsys.readouterr().out


def test_analyze(trained, nmnist_cache, tmp_path, capsys):
    checkpoint = os.path.join(trained, cli.CHECKPOINT_FILE)
    out = tmp_path / 'analysis'

    argv = ['analyze', 'contrast', nmnist_cache, '--out', str(out / 'contrast.csv'),
            '--samples', '5']
    assert cli.main(argv) == EXIT_OK
    assert (out / 'contrast.csv').read_text().startswith('mean,variance,samples,k,seed\n')

    argv = ['analyze', 'contrast', nmnist_cache, '--out', str(out / 'matrix.csv'),
            '--index', '0', '--k', '2']
    assert cli.main(argv) == EXIT_OK
    assert len((out / 'matrix.csv').read_text().splitlines()) == 13

    assert cli.main(['analyze', 'params', checkpoint, '--out', str(out / 'p.csv')]) == EXIT_OK
    assert cli.main(['analyze', 'ops', checkpoint, '--out', str(out / 'ops.csv')]) == EXIT_OK
    argv = ['analyze', 'ops', checkpoint, nmnist_cache, '--out', str(out / 'ops_rates.csv'),
            '--batch-size', '4']
    assert cli.main(argv) == EXIT_OK
    argv = ['analyze', 'ops', checkpoint, '--out', str(out / 'ops_kernels.csv'),
            '--convention', 'kernels']
    assert cli.main(argv) == EXIT_OK
    assert cli.main(['analyze', 'hist', checkpoint, '--out', str(out / 'h.csv')]) == EXIT_OK

    maps = str(out / 'maps')
    argv = ['analyze', 'featmaps', checkpoint, nmnist_cache, '--out', maps,
            '--layer', 'L2', '--timesteps', '0,3']
    assert cli.main(argv) == EXIT_OK
    assert sorted(os.listdir(maps)) == ['L2_t000.nvsf', 'L2_t003.nvsf', 'manifest.csv']

    stdout = capsys.readouterr().out
    assert 'total=' in stdout
    assert 'forward adds=' in stdout
    assert 'backward adds=' in stdout


def test_analyze_errors(trained, nmnist_cache, tmp_path):
    checkpoint = os.path.join(trained, cli.CHECKPOINT_FILE)
    argv = ['analyze', 'featmaps', checkpoint, nmnist_cache, '--out', str(tmp_path / 'm'),
            '--layer', 'L1']
    assert cli.main(argv) == EXIT_USAGE
    argv = ['analyze', 'contrast', nmnist_cache, '--out', str(tmp_path / 'c.csv'),
            '--index', '99']
    assert cli.main(argv) == EXIT_USAGE


def test_gradcheck(capsys):
    assert cli.main(['gradcheck', 'rnn', '--seeds', '2']) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith('PASS')


def test_gradcheck_mutation(capsys):
    assert cli.main(['gradcheck', 'snn', '--seeds', '1', '--mutate']) == EXIT_OK
    assert 'mutation caught' in capsys.readouterr().out


def test_gradcheck_failure(capsys):
    report = mock.Mock(method='finite_difference', max_error=0.5, tolerance=1e-5, passed=False)
    with mock.patch('nvbench.gradcheck.run_gradcheck', return_value=report):
        assert cli.main(['gradcheck', 'lstm']) == EXIT_CHECK_FAILED
    assert 'FAIL' in capsys.readouterr().out
