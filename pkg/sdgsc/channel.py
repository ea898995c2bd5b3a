##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""Scalar fading channel, link rate and latency accounting.

The received SI is z' = h*z + n with a nonnegative amplitude gain h and
white Gaussian n of power sigma2.  The link rate uses the power ratio
p*h**2/sigma2.
"""
from collections import namedtuple

import numpy as np

from sdgsc import ParameterError, ShapeError
from sdgsc.consts import (
    CHANNEL_KINDS, GAIN_POLICIES, NAKAGAMI_MIN_M, SI_ELEMENT_BITS,
)
from sdgsc.utils import as_array

ChannelModel = namedtuple('ChannelModel', 'kind m omega')
ChannelModel.__new__.__defaults__ = (1.0, 1.0)

ChannelRealization = namedtuple('ChannelRealization', 'h sigma2')

LinkBudget = namedtuple('LinkBudget', 'bandwidth_hz power snr_db')
LinkBudget.__new__.__defaults__ = (5e6, 1.0, 10.0)

ComputeTimeModel = namedtuple('ComputeTimeModel', 't_fe t_ks t_sd t_sr t_fi')
ComputeTimeModel.__new__.__defaults__ = (0.0, 0.0, 0.0, 0.0, 0.0)


def check_channel_model(model):
    if model.kind not in CHANNEL_KINDS:
        raise ParameterError('unknown channel kind %r' % (model.kind, ))
    if not model.omega > 0:
        raise ParameterError('mean-square gain must be positive: %r' % (
            model.omega, ))
    if model.kind == 'nakagami' and not model.m >= NAKAGAMI_MIN_M:
        raise ParameterError('nakagami m must be >= %g: %r' % (
            NAKAGAMI_MIN_M, model.m))


def check_link(link):
    if not link.bandwidth_hz > 0:
        raise ParameterError('bandwidth must be positive: %r' % (
            link.bandwidth_hz, ))
    if not link.power > 0:
        raise ParameterError('power must be positive: %r' % (link.power, ))


def sample_gains(model, rng, size):
    check_channel_model(model)
    if model.kind == 'awgn':
        return 1.0 if size is None else np.ones(size)
    if model.kind == 'rayleigh':
        return rng.rayleigh(scale=np.sqrt(model.omega / 2.0), size=size)
    # h**2 ~ Gamma(m, omega/m)
    return np.sqrt(rng.gamma(model.m, model.omega / model.m, size=size))


def sample_gain(model, rng):
    return float(sample_gains(model, rng, None))


def noise_power(link, omega=1.0):
    check_link(link)
    return link.power * omega / 10.0 ** (link.snr_db / 10.0)


def draw_realization(model, link, rng):
    return ChannelRealization(sample_gain(model, rng),
                              noise_power(link, model.omega))


def gains_for(model, n, policy, rng):
    "one gain per keyframe under the block or per_keyframe policy"
    if policy not in GAIN_POLICIES:
        raise ParameterError('unknown gain policy %r' % (policy, ))
    if policy == 'block':
        return [sample_gain(model, rng)] * n
    return [float(g) for g in sample_gains(model, rng, n)]


def transmit(z, real, rng):
    if not real.sigma2 > 0:
        raise ParameterError('noise power must be positive: %r' % (
            real.sigma2, ))
    if real.h < 0:
        raise ParameterError('gain must be nonnegative: %r' % (real.h, ))
    z = as_array(z)
    return real.h * z + rng.normal(0.0, np.sqrt(real.sigma2), size=z.shape)


def rate(link, h, sigma2):
    if not sigma2 > 0:
        raise ParameterError('noise power must be positive: %r' % (sigma2, ))
    check_link(link)
    return float(link.bandwidth_hz * np.log2(1.0 + link.power * h * h / sigma2))


def comm_time(payload_dims, r):
    if not r > 0:
        raise ParameterError('rate must be positive: %r' % (r, ))
    return SI_ELEMENT_BITS * sum(int(d) for d in payload_dims) / float(r)


def exec_time(ct, t_com):
    for name, v in zip(ct._fields + ('t_com', ), tuple(ct) + (t_com, )):
        if v < 0:
            raise ParameterError('%s must be >= 0: %r' % (name, v))
    return ct.t_fe + ct.t_ks + t_com + ct.t_sd + ct.t_sr + ct.t_fi


def mmse_equalize(z, h_hat, sigma2, p=1.0):
    if not sigma2 > 0:
        raise ParameterError('noise power must be positive: %r' % (sigma2, ))
    return h_hat * as_array(z) / (h_hat * h_hat + sigma2 / p)


def make_pilot(length, rng):
    "unit-power +-1 pilot"
    if int(length) < 1:
        raise ParameterError('pilot length must be positive: %r' % (length, ))
    return rng.choice(np.array([-1.0, 1.0]), size=int(length))


def mmse_estimate_gain(pilot, received_pilot, sigma2):
    pilot, received_pilot = as_array(pilot), as_array(received_pilot)
    if pilot.shape != received_pilot.shape:
        raise ShapeError('pilot mismatch', pilot.shape, received_pilot.shape)
    energy = float(np.dot(pilot, pilot))
    if energy == 0.0:
        raise ParameterError('pilot is identically zero')
    return float(np.dot(pilot, received_pilot)) / (energy + sigma2)
