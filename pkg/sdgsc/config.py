##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""Pipeline configuration.

Line oriented ``key = value`` text with dotted keys; ``#`` starts a
comment.  Unknown or duplicated keys are errors.  SDGC_SEED in the
environment overrides ``seed``.
"""
import os
from collections.abc import Mapping

from sdgsc import ConfigError
from sdgsc.consts import (
    ACTIVATIONS, CHANNEL_KINDS, GAIN_POLICIES, PRIORITY_KINDS,
    NAKAGAMI_MIN_M, MAX_FRAMES, MAX_FRAME_EXTENT, MAX_LATENT_DIM, SPRITE_KINDS,
)
from sdgsc.channel import ChannelModel, LinkBudget, ComputeTimeModel
from sdgsc.diffusion import NoiseSchedule, GuidanceWeights, RegParams
from sdgsc.ndnet import SgdConfig

MOTION_KINDS = ('static', 'linear', 'jump')


def _int(s):
    return int(s)


def _float(s):
    return float(s)


def _bool(s):
    v = s.strip().lower()
    if v in ('1', 'true', 'yes', 'on'):
        return True
    if v in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError('not a boolean: %r' % (s, ))


def _seconds(s):
    "seconds or 'auto'"
    if s.strip() == 'auto':
        return 'auto'
    return float(s)


def _words(s):
    return tuple(w.strip() for w in s.split(',') if w.strip())


def _choice(*allowed):
    def parse(s):
        s = s.strip()
        if s not in allowed:
            raise ValueError('expected one of %s' % (', '.join(allowed), ))
        return s
    return parse


def _motion(s):
    kinds = _words(s)
    if not kinds:
        raise ValueError('no motion kinds')
    for k in kinds:
        if k not in MOTION_KINDS and not k.startswith('jump-at-frame-'):
            raise ValueError('unknown motion kind %r' % (k, ))
        if k.startswith('jump-at-frame-'):
            int(k[len('jump-at-frame-'):])
    return kinds


def _sprites(s):
    kinds = _words(s)
    if not kinds:
        raise ValueError('no sprite kinds')
    for k in kinds:
        if k not in SPRITE_KINDS:
            raise ValueError('unknown sprite kind %r' % (k, ))
    return kinds


# key: (parser, default)
SCHEMA = {
    'seed': (_int, 1234),
    'data.frames': (_int, 8),
    'data.height': (_int, 32),
    'data.width': (_int, 32),
    'data.clips': (_int, 64),
    'data.shapes': (_int, 2),
    'data.sprites': (_sprites, SPRITE_KINDS),
    'data.motion': (_motion, ('linear', 'jump', 'static')),
    'data.speed': (_float, 2.0),
    'model.latent_dim': (_int, 64),
    'model.encoder_hidden': (_int, 256),
    'model.decoder_hidden': (_int, 256),
    'model.activation': (_choice(*ACTIVATIONS), 'tanh'),
    'model.kl_weight': (_float, 1e-3),
    'keyframe.k': (_int, 8),
    'keyframe.t_max': (_float, 1.0),
    'keyframe.priority': (_choice(*PRIORITY_KINDS), 'sparse'),
    'channel.kind': (_choice(*CHANNEL_KINDS), 'rayleigh'),
    'channel.m': (_float, 1.0),
    'channel.omega': (_float, 1.0),
    'channel.gain_policy': (_choice(*GAIN_POLICIES), 'block'),
    'link.bandwidth_hz': (_float, 5e6),
    'link.power': (_float, 1.0),
    'link.snr_db': (_float, 10.0),
    'compute.t_fe': (_seconds, 0.2),
    'compute.t_ks': (_seconds, 0.01),
    'compute.t_sd': (_seconds, 0.5),
    'compute.t_sr': (_seconds, 0.05),
    'compute.t_fi': (_seconds, 0.2),
    'schedule.steps': (_int, 200),
    'schedule.beta_1': (_float, 1e-4),
    'schedule.beta_T': (_float, 0.02),
    'guidance.theta': (_float, 1.0),
    'guidance.vartheta': (_float, 1.0),
    'guidance.noise_aware': (_bool, True),
    'denoise.samples': (_int, 16),
    'reg.step': (_float, 0.002),
    'reg.phi': (_float, 0.01),
    'eps.hidden': (_int, 128),
    'eps.layers': (_int, 2),
    'pilot.length': (_int, 4),
    'interp.feature_width': (_int, 16),
    'interp.window': (_int, 9),
    'interp.sharpness': (_float, 1000.0),
    'interp.refine_hidden': (_int, 32),
    'train.lr': (_float, 0.001),
    'train.batch_size': (_int, 16),
    'train.ae_lr': (_float, 0.005),
    'train.ae_steps': (_int, 4000),
    'train.eps_lr': (_float, 0.05),
    'train.eps_steps': (_int, 4000),
    'train.interp_lr': (_float, 0.01),
    'train.interp_steps': (_int, 300),
    'train.finetune_steps': (_int, 100),
    'experiment.trials': (_int, 50),
    'experiment.snr_min': (_float, 0.0),
    'experiment.snr_max': (_float, 20.0),
    'experiment.snr_step': (_float, 5.0),
    'experiment.workers': (_int, 1),
}


def _format(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ','.join(value)
    return str(value)


def _validate(v):
    "cross-key constraints; raises ConfigError"
    def need(cond, message):
        if not cond:
            raise ConfigError(message)

    if v['data.frames'] > MAX_FRAMES or \
            max(v['data.height'], v['data.width']) > MAX_FRAME_EXTENT or \
            v['model.latent_dim'] > MAX_LATENT_DIM:
        raise ConfigError('frames %d of %dx%d with d=%d is out of desk scope' % (
            v['data.frames'], v['data.height'], v['data.width'],
            v['model.latent_dim']))
    need(v['data.frames'] >= 2, 'data.frames must be >= 2')
    need(v['data.height'] >= 4 and v['data.height'] % 4 == 0,
         'data.height must be a positive multiple of 4')
    need(v['data.width'] >= 4 and v['data.width'] % 4 == 0,
         'data.width must be a positive multiple of 4')
    need(v['data.clips'] >= 1, 'data.clips must be positive')
    need(v['data.shapes'] >= 0, 'data.shapes must be >= 0')
    need(v['data.speed'] >= 0, 'data.speed must be >= 0')
    for key in ('model.latent_dim', 'model.encoder_hidden',
                'model.decoder_hidden', 'eps.hidden', 'eps.layers',
                'pilot.length', 'interp.feature_width',
                'interp.refine_hidden', 'train.batch_size',
                'denoise.samples'):
        need(v[key] >= 1, '%s must be positive' % (key, ))
    need(v['model.kl_weight'] >= 0, 'model.kl_weight must be >= 0')
    need(1 <= v['keyframe.k'] <= v['model.latent_dim'],
         'keyframe.k must lie in 1..model.latent_dim')
    need(v['keyframe.t_max'] > 0, 'keyframe.t_max must be positive')
    need(v['channel.omega'] > 0, 'channel.omega must be positive')
    need(v['channel.kind'] != 'nakagami' or v['channel.m'] >= NAKAGAMI_MIN_M,
         'channel.m must be >= %g for nakagami' % (NAKAGAMI_MIN_M, ))
    need(v['link.bandwidth_hz'] > 0, 'link.bandwidth_hz must be positive')
    need(v['link.power'] > 0, 'link.power must be positive')
    for key in ('compute.t_fe', 'compute.t_ks', 'compute.t_sd',
                'compute.t_sr', 'compute.t_fi'):
        need(v[key] == 'auto' or v[key] >= 0, '%s must be >= 0' % (key, ))
    need(v['schedule.steps'] >= 1, 'schedule.steps must be positive')
    need(0 < v['schedule.beta_1'] <= v['schedule.beta_T'] < 1,
         'need 0 < schedule.beta_1 <= schedule.beta_T < 1')
    need(v['guidance.theta'] >= 0 and v['guidance.vartheta'] >= 0,
         'guidance weights must be >= 0')
    need(v['reg.step'] >= 0 and v['reg.phi'] >= 0,
         'reg.step and reg.phi must be >= 0')
    need(v['interp.window'] >= 1 and v['interp.window'] % 2 == 1,
         'interp.window must be odd')
    need(v['interp.sharpness'] > 0, 'interp.sharpness must be positive')
    for key in ('train.lr', 'train.ae_lr', 'train.eps_lr', 'train.interp_lr'):
        need(v[key] > 0, '%s must be positive' % (key, ))
    for key in ('train.ae_steps', 'train.eps_steps', 'train.interp_steps',
                'train.finetune_steps', 'experiment.trials'):
        need(v[key] >= 0, '%s must be >= 0' % (key, ))
    need(v['experiment.snr_step'] > 0, 'experiment.snr_step must be positive')
    need(v['experiment.snr_max'] >= v['experiment.snr_min'],
         'experiment.snr_max must be >= experiment.snr_min')
    need(v['experiment.workers'] >= 1, 'experiment.workers must be positive')


class PipelineConfig(Mapping):
    """Read-only mapping of dotted keys to parsed values."""
    __slots__ = ('_values', )

    def __init__(self, values=None):
        merged = dict((k, d) for k, (p, d) in SCHEMA.items())
        for key, value in (values or {}).items():
            if key not in SCHEMA:
                raise ConfigError('unknown key %r' % (key, ))
            if isinstance(value, str):
                value = _parse_value(key, value)
            merged[key] = value
        _validate(merged)
        self._values = merged

    def __getitem__(self, key):
        try:
            return self._values[key]
        except KeyError:
            raise KeyError('PipelineConfig has no key %r' % (key, ))

    def __iter__(self):
        return iter(sorted(self._values))

    def __len__(self):
        return len(self._values)

    def __eq__(self, other):
        return isinstance(other, PipelineConfig) and \
            self._values == other._values

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return 'PipelineConfig(seed=%d)' % (self._values['seed'], )

    def replace(self, **overrides):
        "copy with overrides; dotted keys are spelled with '__'"
        values = dict(self._values)
        for key, value in overrides.items():
            values[key.replace('__', '.')] = value
        return PipelineConfig(values)

    def updated(self, values):
        merged = dict(self._values)
        merged.update(values)
        return PipelineConfig(merged)

    def dumps(self):
        return ''.join('%s = %s\n' % (k, _format(self._values[k])) for k in self)

    # typed views used across the pipeline

    def channel_model(self):
        return ChannelModel(self['channel.kind'], self['channel.m'],
                            self['channel.omega'])

    def link(self, snr_db=None):
        return LinkBudget(self['link.bandwidth_hz'], self['link.power'],
                          self['link.snr_db'] if snr_db is None else snr_db)

    def compute_times(self, measured=None):
        names = ('t_fe', 't_ks', 't_sd', 't_sr', 't_fi')
        values = []
        for name in names:
            v = self['compute.' + name]
            if v == 'auto':
                if measured is None or name not in measured:
                    raise ConfigError('compute.%s is auto and was not measured'
                                      % (name, ))
                v = measured[name]
            values.append(v)
        return ComputeTimeModel(*values)

    def has_auto_times(self):
        return any(self[k] == 'auto' for k in self if k.startswith('compute.'))

    def schedule(self):
        return NoiseSchedule(self['schedule.steps'], self['schedule.beta_1'],
                             self['schedule.beta_T'])

    def guidance(self):
        return GuidanceWeights(self['guidance.theta'], self['guidance.vartheta'],
                               self['guidance.noise_aware'])

    def reg(self):
        return RegParams(self['reg.step'], self['reg.phi'])

    def sgd(self, stage):
        lr_key = {'ae': 'train.ae_lr', 'eps': 'train.eps_lr',
                  'interp': 'train.interp_lr', 'finetune': 'train.lr'}[stage]
        steps_key = {'ae': 'train.ae_steps', 'eps': 'train.eps_steps',
                     'interp': 'train.interp_steps',
                     'finetune': 'train.finetune_steps'}[stage]
        return SgdConfig(self[lr_key], self[steps_key], self['train.batch_size'])

    def frame_shape(self):
        return (self['data.height'], self['data.width'], 3)

    def snr_sweep(self):
        lo, hi, step = (self['experiment.snr_min'], self['experiment.snr_max'],
                        self['experiment.snr_step'])
        n = int(round((hi - lo) / step)) + 1
        return [lo + i * step for i in range(n) if lo + i * step <= hi + 1e-9]


def _parse_value(key, text, lineno=None):
    parser = SCHEMA[key][0]
    try:
        return parser(text)
    except (ValueError, TypeError) as e:
        raise ConfigError('bad value %r for %s: %s' % (text, key, e), lineno)


def loads(text, environ=None):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError('expected "key = value", got %r' % (line, ), lineno)
        if key not in SCHEMA:
            raise ConfigError('unknown key %r' % (key, ), lineno)
        if key in values:
            raise ConfigError('duplicate key %r' % (key, ), lineno)
        values[key] = _parse_value(key, value, lineno)
    environ = os.environ if environ is None else environ
    if environ.get('SDGC_SEED'):
        values['seed'] = _parse_value('seed', environ['SDGC_SEED'])
    return PipelineConfig(values)


def load(path, environ=None):
    try:
        with open(path) as f:
            text = f.read()
    except (IOError, OSError) as e:
        raise ConfigError('cannot read %s: %s' % (path, e))
    return loads(text, environ)
