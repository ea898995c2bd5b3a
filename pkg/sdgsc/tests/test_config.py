import os
import unittest

from sdgsc import ConfigError
from sdgsc.channel import ChannelModel
from sdgsc.config import PipelineConfig, SCHEMA, loads, load
from sdgsc.tests.base import TestBase

SAMPLE = """
# small run
seed = 7
data.frames = 6
data.motion = linear, jump-at-frame-4
channel.kind = nakagami
channel.m = 2.5
guidance.noise_aware = no
compute.t_sd = auto   # measured at run time
"""


class TestConfig(TestBase):
    def test_defaults(self):
        cfg = PipelineConfig()
        self.assertEqual(len(cfg), len(SCHEMA))
        self.assertEqual(cfg['seed'], 1234)
        self.assertEqual(cfg.snr_sweep(), [0.0, 5.0, 10.0, 15.0, 20.0])
        self.assertEqual(cfg.schedule().T, 200)
        self.assertEqual(cfg.frame_shape(), (32, 32, 3))
        self.assertRaises(KeyError, cfg.__getitem__, 'nope')

    def test_loads(self):
        cfg = loads(SAMPLE, environ={})
        self.assertEqual(cfg['seed'], 7)
        self.assertEqual(cfg['data.frames'], 6)
        self.assertEqual(cfg['data.motion'], ('linear', 'jump-at-frame-4'))
        self.assertEqual(cfg.channel_model(), ChannelModel('nakagami', 2.5, 1.0))
        self.assertFalse(cfg.guidance().noise_aware)
        self.assertTrue(cfg.has_auto_times())
        self.assertRaises(ConfigError, cfg.compute_times)
        ct = cfg.compute_times({'t_sd': 0.25})
        self.assertEqual(ct.t_sd, 0.25)
        self.assertEqual(ct.t_fe, 0.2)

    def test_seed_from_environment(self):
        self.assertEqual(loads(SAMPLE, environ={'SDGC_SEED': '99'})['seed'], 99)

    def test_errors_carry_line(self):
        for text, line in (('seed = 1\nbogus.key = 3\n', 2),
                           ('seed = 1\nseed = 2\n', 2),
                           ('data.frames = many\n', 1),
                           ('\n\njust words\n', 3)):
            with self.assertRaises(ConfigError) as cm:
                loads(text, environ={})
            self.assertEqual(cm.exception.lineno, line)
            self.assertIn('line %d' % (line, ), str(cm.exception))

    def test_validation(self):
        bad = [
            {'data.frames': 1},
            {'data.height': 30},
            {'keyframe.k': 65},
            {'channel.kind': 'nakagami', 'channel.m': 0.4},
            {'schedule.beta_1': 0.5, 'schedule.beta_T': 0.1},
            {'interp.window': 4},
            {'link.bandwidth_hz': 0.0},
            {'experiment.snr_step': 0.0},
        ]
        for values in bad:
            self.assertRaises(ConfigError, PipelineConfig, values)
        with self.assertRaises(ConfigError) as cm:
            PipelineConfig({'data.frames': 500})
        self.assertIn('desk scope', str(cm.exception))
        self.assertRaises(ConfigError, PipelineConfig, {'nope': 1})

    def test_dumps_round_trip(self):
        cfg = loads(SAMPLE, environ={}).replace(link__snr_db=3.5)
        again = loads(cfg.dumps(), environ={})
        self.assertEqual(again, cfg)
        self.assertEqual(again['link.snr_db'], 3.5)

    def test_views(self):
        cfg = PipelineConfig({'link.snr_db': 20.0})
        self.assertEqual(cfg.link().snr_db, 20.0)
        self.assertEqual(cfg.link(5.0).snr_db, 5.0)
        sgd = cfg.sgd('eps')
        self.assertEqual((sgd.lr, sgd.max_steps), (0.05, 4000))
        self.assertEqual(cfg.updated({'seed': 3})['seed'], 3)

    def test_load_file(self):
        path = os.path.join(self.tempdir(), 'run.cfg')
        with open(path, 'w') as f:
            f.write(SAMPLE)
        self.assertEqual(load(path, environ={})['seed'], 7)
        self.assertRaises(ConfigError, load, path + '.missing')


if __name__ == '__main__':
    unittest.main()
