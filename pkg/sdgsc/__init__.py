##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################

from sdgsc.consts import *

__version__ = '0.1.0'


class Error(Exception):
    def __init__(self, message):
        self._message = message
        self.args = [message]

    def __str__(self):
        return self._message


class ParameterError(Error):
    pass


class ShapeError(ParameterError):
    def __init__(self, message, *shapes):
        if shapes:
            message = '%s: %s' % (
                message, ' vs '.join(str(tuple(s)) for s in shapes))
        ParameterError.__init__(self, message)
        self.shapes = shapes


class ConfigError(Error):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = 'line %d: %s' % (lineno, message)
        Error.__init__(self, message)
        self.lineno = lineno


class InfeasibleError(Error):
    def __init__(self, message, min_t_exe):
        Error.__init__(self, '%s (minimal T_exe %.6g s)' % (message, min_t_exe))
        self.min_t_exe = min_t_exe


class DivergenceError(Error):
    def __init__(self, message, stage=None, step=None, branch=None,
                 param_index=None):
        where = []
        if stage is not None:
            where.append('stage=%s' % (stage, ))
        if branch is not None:
            where.append('branch=%s' % (branch, ))
        if step is not None:
            where.append('step=%d' % (step, ))
        if param_index is not None:
            where.append('param=%d' % (param_index, ))
        if where:
            message = '%s [%s]' % (message, ' '.join(where))
        Error.__init__(self, message)
        self.stage = stage
        self.step = step
        self.branch = branch
        self.param_index = param_index


class FormatError(Error):
    pass


from sdgsc.ndnet import MlpModel, SgdConfig, forward, grad, backward, sgd_step
from sdgsc.channel import (
    ChannelModel, ChannelRealization, LinkBudget, ComputeTimeModel,
    sample_gain, transmit, rate, comm_time, exec_time, noise_power,
    mmse_equalize, mmse_estimate_gain,
)
from sdgsc.encoder import (
    FrameSequence, VariationalLatent, SparseDiff, KeyframePlan,
    extract_features, cosine_diff, sparsify, densify, select_keyframes,
    payload_dims,
)
from sdgsc.diffusion import (
    NoiseSchedule, GuidanceWeights, RegParams, EpsModel, GaussianMixtureEps,
    forward_sample, train_eps, tweedie_z0, likelihood_grad_z, reverse_sample,
    sd_denoise, psd_denoise, msd_denoise, denoise_subsequent,
)
from sdgsc.decoder import (
    DecoderNet, Interpolator, reconstruct_keyframes, interframe_attention,
    motion_vector, scale_motion, warp_fuse, refine, interpolate_video,
)
from sdgsc.metrics import MetricReport, mse, psnr, latent_frechet
from sdgsc.config import PipelineConfig
