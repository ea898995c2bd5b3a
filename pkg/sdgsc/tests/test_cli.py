import contextlib
import io
import os
import unittest

import numpy as np

from sdgsc.cli import main
from sdgsc.config import PipelineConfig
from sdgsc.consts import (
    EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_DIVERGENCE,
)
from sdgsc.encoder import FrameSequence
from sdgsc.frameio import write_fsq, read_fsq
from sdgsc.metrics import read_csv
from sdgsc.tests.base import TestBase, TINY


class TestCommandLine(TestBase):
    def run_main(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()

    def write_config(self, **overrides):
        values = dict(TINY)
        for key, value in overrides.items():
            values[key.replace('__', '.')] = value
        path = os.path.join(self.tempdir(), 'run.cfg')
        with open(path, 'w') as f:
            f.write(PipelineConfig(values).dumps())
        return path

    def test_metrics(self):
        d = self.tempdir()
        a = FrameSequence(np.zeros((2, 4, 4, 3), np.uint8))
        b = FrameSequence(np.full((2, 4, 4, 3), 10, np.uint8))
        write_fsq(os.path.join(d, 'a.fsq'), a)
        write_fsq(os.path.join(d, 'b.fsq'), b)
        code, out, _ = self.run_main('metrics', os.path.join(d, 'a.fsq'),
                                     os.path.join(d, 'b.fsq'))
        self.assertEqual(code, EXIT_OK)
        self.assertIn('mse=100.0', out)

    def test_missing_file(self):
        code, _, err = self.run_main('metrics', '/nonexistent/a.fsq',
                                     '/nonexistent/b.fsq')
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn('error', err)

    def test_bad_config(self):
        path = os.path.join(self.tempdir(), 'bad.cfg')
        with open(path, 'w') as f:
            f.write('seed = 1\nno.such.key = 2\n')
        code, _, err = self.run_main('gen-data', '--config', path, '--out',
                                     self.tempdir())
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn('line 2', err)

    def test_gen_data(self):
        d = os.path.join(self.tempdir(), 'clips')
        code, out, _ = self.run_main('gen-data', '--config',
                                     self.write_config(), '--out', d)
        self.assertEqual(code, EXIT_OK)
        files = sorted(os.listdir(d))
        self.assertEqual(len(files), TINY['data.clips'])
        seq = read_fsq(os.path.join(d, files[0]))
        self.assertEqual(seq.shape, (5, 8, 8, 3))

    def test_divergence(self):
        path = self.write_config(train__ae_lr=1e6)
        code, _, err = self.run_main('train', '--config', path, '--bundle',
                                     self.tempdir(), '--stage', '1')
        self.assertEqual(code, EXIT_DIVERGENCE)
        self.assertIn('autoencoder', err)

    def test_train_and_experiment(self):
        cfg = self.write_config()
        bundle = os.path.join(self.tempdir(), 'bundle')
        code, out, _ = self.run_main('train', '--config', cfg, '--bundle',
                                     bundle)
        self.assertEqual(code, EXIT_OK)
        self.assertIn('stage 4', out)
        code, out, _ = self.run_main('inspect-checkpoint',
                                     os.path.join(bundle, 'eps_z.sdgc'))
        self.assertEqual(code, EXIT_OK)
        self.assertIn('header.branch: eps_z', out)
        code, out, _ = self.run_main('denoise', '--config', cfg, '--bundle',
                                     bundle, '--denoiser', 'psd', '--snr',
                                     '10')
        self.assertEqual(code, EXIT_OK)
        self.assertIn('h_hat=', out)
        csv_path = os.path.join(self.tempdir(), 'sweep.csv')
        code, out, _ = self.run_main('experiment', '--config', cfg,
                                     '--bundle', bundle, '--denoiser', 'sd',
                                     '--snr-min', '0', '--snr-max', '10',
                                     '--snr-step', '10', '--trials', '2',
                                     '--out', csv_path)
        self.assertEqual(code, EXIT_OK)
        rows = read_csv(csv_path)
        self.assertEqual(len(rows), 4)
        self.assertEqual(set(r['snr_db'] for r in rows), {'0.0', '10.0'})
        # without --config the bundle runs under the settings it was trained with
        code, _, err = self.run_main('experiment', '--bundle', bundle,
                                     '--denoiser', 'none', '--snr-min', '10',
                                     '--snr-max', '10', '--trials', '1',
                                     '--out', csv_path)
        self.assertEqual(code, EXIT_OK, err)
        rows = read_csv(csv_path)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]['h_hat'], '')
        code, out, err = self.run_main('denoise', '--bundle', bundle,
                                       '--denoiser', 'mmse-only', '--snr',
                                       '10')
        self.assertEqual(code, EXIT_OK, err)


if __name__ == '__main__':
    unittest.main()
