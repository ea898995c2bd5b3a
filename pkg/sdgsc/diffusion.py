##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""Latent diffusion: schedule, noise estimators and the semantic denoisers.

Time steps run 1..T; alpha_bar(0) is 1.  A noise estimator is any object
with predict(z_t, t, sch) returning eps_hat shaped like z_t: the trainable
EpsModel or the closed-form GaussianMixtureEps.
"""
from collections import namedtuple

import numpy as np
from scipy.special import logsumexp, softmax

from sdgsc import ParameterError, ShapeError, DivergenceError, FormatError
from sdgsc.consts import GAIN_FLOOR
from sdgsc.channel import mmse_equalize, mmse_estimate_gain, sample_gains
from sdgsc.checkpoint import save_model, load_model
from sdgsc.ndnet import MlpModel, forward, backward, loss_mse, train_loop
from sdgsc.utils import DEBUG_OUTPUT, as_array, split_rng


class NoiseSchedule(object):
    "linear beta schedule"
    def __init__(self, T=200, beta_1=1e-4, beta_T=0.02):
        T = int(T)
        if T < 1:
            raise ParameterError('schedule needs T >= 1, got %d' % (T, ))
        if not 0.0 < beta_1 <= beta_T < 1.0:
            raise ParameterError('need 0 < beta_1 <= beta_T < 1: %r, %r' % (
                beta_1, beta_T))
        self.T = T
        self.beta_1 = float(beta_1)
        self.beta_T = float(beta_T)
        self.betas = np.linspace(self.beta_1, self.beta_T, T)
        self.alphas = 1.0 - self.betas
        self.alpha_bars = np.concatenate([[1.0], np.cumprod(self.alphas)])
        post = np.empty(T)
        post[1:] = self.betas[1:] * (1.0 - self.alpha_bars[1:-1]) / \
            (1.0 - self.alpha_bars[2:])
        # the t = 1 posterior variance is 0; clip to the t = 2 value
        post[0] = post[1] if T > 1 else self.beta_1
        self.posterior_variances = post

    def __repr__(self):
        return 'NoiseSchedule(T=%d, beta_1=%r, beta_T=%r)' % (
            self.T, self.beta_1, self.beta_T)

    def __eq__(self, other):
        return isinstance(other, NoiseSchedule) and \
            (self.T, self.beta_1, self.beta_T) == \
            (other.T, other.beta_1, other.beta_T)

    def __ne__(self, other):
        return not self.__eq__(other)

    def check_t(self, t):
        if not 1 <= t <= self.T:
            raise ParameterError('time step %r outside 1..%d' % (t, self.T))

    def beta(self, t):
        return self.betas[t - 1]

    def alpha(self, t):
        return self.alphas[t - 1]

    def alpha_bar(self, t):
        return self.alpha_bars[t]

    def posterior_variance(self, t):
        return self.posterior_variances[t - 1]

    def header(self):
        return {'T': self.T, 'beta_1': repr(self.beta_1),
                'beta_T': repr(self.beta_T)}


class GuidanceWeights(namedtuple('GuidanceWeights', 'theta vartheta noise_aware')):
    """Guidance strengths for the latent (theta) and gain (vartheta) chains.

    Each is a constant or a length-T array indexed by t-1.  With
    noise_aware the likelihood is taken at the Tweedie estimate and the
    constant multiplies a per-step weight matched to the channel noise.
    """
    __slots__ = ()

    def __new__(cls, theta=1.0, vartheta=1.0, noise_aware=True):
        for v in (theta, vartheta):
            if np.any(as_array(v) < 0):
                raise ParameterError('guidance weights must be >= 0')
        return super(GuidanceWeights, cls).__new__(cls, theta, vartheta,
                                                   bool(noise_aware))

    @staticmethod
    def _at(v, t):
        v = np.asarray(v, dtype=np.float64)
        return float(v) if v.ndim == 0 else float(v[t - 1])

    def theta_at(self, t):
        return self._at(self.theta, t)

    def vartheta_at(self, t):
        return self._at(self.vartheta, t)


class RegParams(namedtuple('RegParams', 'step phi')):
    __slots__ = ()

    def __new__(cls, step=0.002, phi=0.01):
        if step < 0 or phi < 0:
            raise ParameterError('regularization needs step >= 0, phi >= 0')
        return super(RegParams, cls).__new__(cls, float(step), float(phi))


def forward_sample(z0, t, eps, sch):
    sch.check_t(t)
    z0, eps = as_array(z0), as_array(eps)
    if z0.shape != eps.shape:
        raise ShapeError('z0/eps', z0.shape, eps.shape)
    ab = sch.alpha_bar(t)
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps


def tweedie_z0(z_t, t, eps_hat, sch):
    sch.check_t(t)
    ab = sch.alpha_bar(t)
    return (as_array(z_t) - np.sqrt(1.0 - ab) * as_array(eps_hat)) / np.sqrt(ab)


def likelihood_weight(t, sch):
    "-(1-abar_t)/(beta_t (1-abar_{t-1})), with the t = 1 value clipped"
    sch.check_t(t)
    return -1.0 / sch.posterior_variance(t)


def likelihood_grad_z(z_t, z_rx, h, t, sch):
    z_t, z_rx = as_array(z_t), as_array(z_rx)
    if z_t.shape != z_rx.shape:
        raise ShapeError('z_t/received', z_t.shape, z_rx.shape)
    return likelihood_weight(t, sch) * (-2.0 * h * (z_rx - h * z_t))


def likelihood_grad_h(z_t, z_rx, h, t, sch):
    "gradient in h; a (K, d) batch of chains gives a (K, 1) column"
    z_t, z_rx = as_array(z_t), as_array(z_rx)
    if z_t.shape != z_rx.shape:
        raise ShapeError('z_t/received', z_t.shape, z_rx.shape)
    r = z_rx - h * z_t
    if z_t.ndim == 1:
        return likelihood_weight(t, sch) * (-2.0 * float(np.dot(z_t, r)))
    return likelihood_weight(t, sch) * (
        -2.0 * np.sum(z_t * r, axis=-1, keepdims=True))


def tweedie_moments(t, sch, data_var):
    """Slope d z0_hat / d z_t and variance of z0 given z_t for a zero-mean
    Gaussian prior with second moment data_var."""
    ab = sch.alpha_bar(t)
    denom = ab * data_var + 1.0 - ab
    return np.sqrt(ab) * data_var / denom, data_var * (1.0 - ab) / denom


def guidance_scale(zeta, t, sch, noise_var, curvature, jac=1.0):
    """Multiplier w for a likelihood gradient taken at the Tweedie estimate.

    w * grad equals zeta * jac times the score of N(h z0_hat, noise_var),
    pulled back through z0_hat.  noise_var is floored at
    beta_t * zeta * jac**2 * curvature so a single step moves z0_hat at
    most onto the observation.  Works elementwise on arrays of chains.
    """
    bound = sch.beta(t) * zeta * jac * jac * np.asarray(curvature)
    denom = np.maximum(np.asarray(noise_var, dtype=np.float64), bound)
    safe = np.where(denom > 0.0, denom, 1.0)
    return np.where(denom > 0.0,
                    zeta * sch.posterior_variance(t) * jac / (2.0 * safe),
                    0.0)


class EpsModel(object):
    """MLP noise estimator over [c_in(t)*z_t, t/T].

    c_in(t) = 1/sqrt(abar_t*data_var + 1 - abar_t) keeps the input at unit
    scale for data of variance data_var; data_var = 1 feeds raw z_t.
    """
    def __init__(self, model, data_var=1.0, branch='eps_z'):
        if data_var < 0:
            raise ParameterError('data_var must be >= 0: %r' % (data_var, ))
        self.model = model
        self.data_var = float(data_var)
        self.branch = branch

    @classmethod
    def create(cls, dim, hidden=128, layers=2, seed=0, data_var=1.0,
               branch='eps_z', activation='tanh'):
        widths = [dim + 1] + [hidden] * layers + [dim]
        return cls(MlpModel(widths, activation, 'identity', seed),
                   data_var, branch)

    @property
    def dim(self):
        return self.model.output_width

    def copy(self):
        return EpsModel(self.model.copy(), self.data_var, self.branch)

    def c_in(self, t, sch):
        ab = sch.alpha_bars[np.asarray(t)]
        return 1.0 / np.sqrt(ab * self.data_var + 1.0 - ab)

    def inputs(self, z_t, t, sch):
        z_t = as_array(z_t)
        if z_t.shape[-1] != self.dim:
            raise ShapeError('eps input width', z_t.shape, (self.dim, ))
        t = np.asarray(t)
        scale = self.c_in(t, sch)
        tfeat = t / float(sch.T)
        if z_t.ndim == 1:
            return np.concatenate([scale * z_t, [tfeat]])
        scale = np.broadcast_to(scale, z_t.shape[:1])[:, None]
        tfeat = np.broadcast_to(tfeat, z_t.shape[:1])[:, None]
        return np.concatenate([scale * z_t, tfeat], axis=1)

    def predict(self, z_t, t, sch):
        return forward(self.model, self.inputs(z_t, t, sch))


class GaussianMixtureEps(object):
    """Exact noise prediction for a prior that is a mixture of isotropic
    Gaussians N(means[k], std**2 I) with the given weights.

    eps_hat = -sqrt(1 - abar_t) * grad log p_t(z_t).
    """
    def __init__(self, means, std=0.0, weights=None):
        means = as_array(means)
        if means.ndim == 1:
            means = means[:, None]
        if std < 0:
            raise ParameterError('mixture std must be >= 0: %r' % (std, ))
        if weights is None:
            weights = np.full(means.shape[0], 1.0 / means.shape[0])
        weights = as_array(weights)
        if weights.shape != means.shape[:1] or np.any(weights < 0):
            raise ParameterError('bad mixture weights')
        self.means = means
        self.std = float(std)
        self.log_weights = np.log(weights / weights.sum())

    @classmethod
    def from_samples(cls, samples, bandwidth=None):
        "kernel density prior over samples (Silverman bandwidth by default)"
        samples = as_array(samples)
        if samples.ndim == 1:
            samples = samples[:, None]
        n = samples.shape[0]
        if bandwidth is None:
            bandwidth = 1.06 * float(np.mean(np.std(samples, axis=0))) * \
                n ** (-0.2)
        return cls(samples, bandwidth)

    @property
    def dim(self):
        return self.means.shape[1]

    def sample(self, rng, n):
        comp = rng.choice(self.means.shape[0], size=n,
                          p=np.exp(self.log_weights))
        return self.means[comp] + self.std * rng.standard_normal(
            (n, self.dim))

    def variance(self):
        "per-dimension marginal variance of the prior, averaged"
        w = np.exp(self.log_weights)
        mean = w @ self.means
        return float(np.mean(w @ (self.means - mean) ** 2)) + self.std ** 2

    @property
    def data_var(self):
        "per-dimension second moment, averaged (EpsModel.data_var)"
        w = np.exp(self.log_weights)
        return float(np.mean(w @ self.means ** 2)) + self.std ** 2

    def score(self, z_t, t, sch):
        z = as_array(z_t)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        ab = sch.alpha_bar(t)
        var = ab * self.std ** 2 + 1.0 - ab
        centers = np.sqrt(ab) * self.means                       # K x d
        diff = centers[None, :, :] - z[:, None, :]               # n x K x d
        logits = self.log_weights[None, :] - 0.5 * np.sum(diff * diff, axis=2) / var
        resp = softmax(logits, axis=1)
        s = np.einsum('nk,nkd->nd', resp, diff) / var
        return s[0] if single else s

    def log_density(self, z_t, t, sch):
        z = np.atleast_2d(as_array(z_t))
        ab = sch.alpha_bar(t)
        var = ab * self.std ** 2 + 1.0 - ab
        diff = np.sqrt(ab) * self.means[None, :, :] - z[:, None, :]
        logits = self.log_weights[None, :] - 0.5 * np.sum(diff * diff, axis=2) / var
        return logsumexp(logits, axis=1) - 0.5 * self.dim * np.log(2 * np.pi * var)

    def predict(self, z_t, t, sch):
        return -np.sqrt(1.0 - sch.alpha_bar(t)) * self.score(z_t, t, sch)


def eps_batch_loss(eps, z0, t, noise, sch):
    "loss, parameter gradients and predictions for one training batch"
    ab = sch.alpha_bars[t][:, None]
    z_t = np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * noise
    x = eps.inputs(z_t, t, sch)
    pred = forward(eps.model, x)
    loss, upstream = loss_mse(pred, noise)
    grads, _ = backward(eps.model, x, upstream)
    return loss, grads


def eps_loss(eps, sampler, sch, rng, n=512):
    "held-out denoising loss"
    z0 = as_array(sampler(rng, n))
    t = rng.integers(1, sch.T + 1, size=n)
    noise = rng.standard_normal(z0.shape)
    ab = sch.alpha_bars[t][:, None]
    z_t = np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * noise
    return loss_mse(eps.predict(z_t, t, sch), noise)[0]


def train_eps(eps, sampler, sch, cfg, rng, stage='eps'):
    """Score matching on sampler(rng, n) -> (n, dim) draws.

    Returns a trained copy; the input estimator is not modified.
    """
    if isinstance(eps, MlpModel):
        eps = EpsModel(eps)
    if eps.model.input_width != eps.dim + 1:
        raise ShapeError('eps model input width', (eps.model.input_width, ),
                         (eps.dim + 1, ))
    eps = eps.copy()

    def step(i):
        z0 = as_array(sampler(rng, cfg.batch_size))
        if z0.ndim == 1:
            z0 = z0[:, None]
        t = rng.integers(1, sch.T + 1, size=cfg.batch_size)
        noise = rng.standard_normal(z0.shape)
        loss, grads = eps_batch_loss(eps, z0, t, noise, sch)
        return loss, [grads]

    train_loop([eps.model], step, cfg, '%s:%s' % (stage, eps.branch))
    return eps


def _reverse_step(x, score, t, sch, rng):
    x = (x + sch.beta(t) * score) / np.sqrt(sch.alpha(t))
    if t > 1:
        x = x + np.sqrt(sch.beta(t)) * rng.standard_normal(x.shape)
    return x


def _prior_score(eps, x, t, sch):
    return -eps.predict(x, t, sch) / np.sqrt(1.0 - sch.alpha_bar(t))


def _check_state(x, t, branch):
    if not np.all(np.isfinite(x)):
        raise DivergenceError('non-finite reverse state', stage='denoise',
                              step=t, branch=branch)


def _chain_start(shape, sch, rng, centre=0.0):
    x = rng.standard_normal(shape)
    if centre:
        x = x + np.sqrt(sch.alpha_bar(sch.T)) * centre
    return x


def reverse_sample(eps, sch, shape, rng, centre=0.0):
    """Unconditional reverse chain from N(0, I), shifted by
    sqrt(abar_T) * centre for data that is not centred on zero."""
    x = _chain_start(shape, sch, rng, centre)
    for t in range(sch.T, 0, -1):
        x = _reverse_step(x, _prior_score(eps, x, t, sch), t, sch, rng)
        _check_state(x, t, 'eps_z')
    return x


def _chains(z_rx, samples):
    "the observation broadcast over `samples` parallel chains"
    if int(samples) != samples or samples < 1:
        raise ParameterError('need samples >= 1, got %r' % (samples, ))
    if samples == 1:
        return z_rx
    return np.broadcast_to(z_rx, (int(samples), ) + z_rx.shape)


def _chain_mean(x, samples):
    return x if samples == 1 else x.mean(axis=0)


def _latent_guidance(eps, z, eps_hat, z_rx, h, t, sch, theta, sigma2,
                     noise_aware):
    if not noise_aware:
        return theta * likelihood_grad_z(z, z_rx, h, t, sch)
    jac, r2 = tweedie_moments(t, sch, eps.data_var)
    w = guidance_scale(theta, t, sch, sigma2 + h * h * r2, h * h, jac)
    z0 = tweedie_z0(z, t, eps_hat, sch)
    return w * likelihood_grad_z(z0, z_rx, h, t, sch)


def _gain_guidance(eps_h, h, eps_h_hat, z0, z_var, z_rx, t, sch, vartheta,
                   sigma2):
    jac, r2 = tweedie_moments(t, sch, eps_h.data_var)
    r2_z = tweedie_moments(t, sch, z_var)[1]
    h0 = tweedie_z0(h, t, eps_h_hat, sch)
    energy = np.sum(z0 * z0, axis=-1, keepdims=z0.ndim > 1)
    noise_var = sigma2 + h0 * h0 * r2_z + energy / z0.shape[-1] * r2
    w = guidance_scale(vartheta, t, sch, noise_var, energy, jac)
    return w * likelihood_grad_h(z0, z_rx, h0, t, sch)


def sd_denoise(z_rx, h, eps, sch, zeta, rng, sigma2=0.0, samples=1):
    """Latent reverse chain guided by the channel observation with gain h.

    With samples > 1 that many chains run side by side and their mean is
    returned.
    """
    z_rx = _chains(as_array(z_rx), samples)
    z = rng.standard_normal(z_rx.shape)
    for t in range(sch.T, 0, -1):
        eps_hat = eps.predict(z, t, sch)
        s = -eps_hat / np.sqrt(1.0 - sch.alpha_bar(t))
        theta = zeta.theta_at(t)
        if theta != 0.0:
            s = _latent_guidance(eps, z, eps_hat, z_rx, h, t, sch, theta,
                                 sigma2, zeta.noise_aware) + s
        z = _reverse_step(z, s, t, sch, rng)
        _check_state(z, t, 'eps_z')
    DEBUG_OUTPUT('sd_denoise', 'T', sch.T, 'h', h, 'samples', samples)
    return _chain_mean(z, samples)


def _l1_gain_step(h, z, z_rx, reg):
    "subgradient step on ||z' - h z||_2 + phi |h| per chain, clamped to h >= 0"
    r = z_rx - h * z
    nr = np.sqrt(np.sum(r * r, axis=-1, keepdims=True))
    fit = np.sum(z * r, axis=-1, keepdims=True)
    d_fit = np.where(nr > 0.0, -fit / np.where(nr > 0.0, nr, 1.0), 0.0)
    return np.maximum(0.0, h - reg.step * (d_fit + reg.phi * np.sign(h)))


def psd_denoise(z_rx, eps_z, eps_h, sch, zeta, reg, rng, sigma2=0.0,
                samples=1):
    """Parallel reverse chains for the latent and the channel gain.

    The gain chain starts around the rms gain of its prior.  In
    noise-aware mode both likelihood terms are taken at the Tweedie
    estimates of the two chains, and the gain the latent chain sees is
    floored at GAIN_FLOOR times that rms; otherwise they are taken at
    the chain states.  Returns (z_tilde, h_hat), both averaged over the
    chains, with h_hat at or above the floor.
    """
    z_rx = _chains(as_array(z_rx), samples)
    rng_z, rng_h = split_rng(rng, 2)
    h_rms = np.sqrt(eps_h.data_var)
    floor = GAIN_FLOOR * h_rms
    z = rng_z.standard_normal(z_rx.shape)
    h = _chain_start(z_rx.shape[:-1] + (1, ), sch, rng_h, h_rms)
    aware = zeta.noise_aware
    for t in range(sch.T, 0, -1):
        root = np.sqrt(1.0 - sch.alpha_bar(t))
        eps_z_hat = eps_z.predict(z, t, sch)
        eps_h_hat = eps_h.predict(h, t, sch)
        z0 = tweedie_z0(z, t, eps_z_hat, sch)
        if aware:
            gain = np.maximum(tweedie_z0(h, t, eps_h_hat, sch), floor)
        else:
            gain = np.maximum(h, 0.0)

        s_z = -eps_z_hat / root
        theta = zeta.theta_at(t)
        if theta != 0.0:
            s_z = _latent_guidance(eps_z, z, eps_z_hat, z_rx, gain, t, sch,
                                   theta, sigma2, aware) + s_z

        s_h = -eps_h_hat / root
        vartheta = zeta.vartheta_at(t)
        if vartheta != 0.0:
            if aware:
                g = _gain_guidance(eps_h, h, eps_h_hat, z0, eps_z.data_var,
                                   z_rx, t, sch, vartheta, sigma2)
            else:
                g = vartheta * likelihood_grad_h(z, z_rx, h, t, sch)
            s_h = g + s_h

        z = _reverse_step(z, s_z, t, sch, rng_z)
        _check_state(z, t, 'eps_z')
        h = _reverse_step(h, s_h, t, sch, rng_h)
        _check_state(h, t, 'eps_h')
        if reg.step > 0.0:
            h = _l1_gain_step(h, z0 if aware else z, z_rx, reg)
    h_hat = max(float(np.mean(h)), floor)
    DEBUG_OUTPUT('psd_denoise', 'T', sch.T, 'h_hat', h_hat)
    return _chain_mean(z, samples), h_hat


def msd_denoise(z_rx, pilot, received_pilot, sigma2, eps, sch, zeta, rng,
                return_gain=False, samples=1):
    "SD fed with a pilot-based MMSE gain estimate"
    h_hat = mmse_estimate_gain(pilot, received_pilot, sigma2)
    z = sd_denoise(z_rx, h_hat, eps, sch, zeta, rng, sigma2, samples)
    if return_gain:
        return z, h_hat
    return z


def denoise_subsequent(received, h_hat, sigma2, p=1.0):
    "reuse the first keyframe's gain with MMSE equalization"
    return [mmse_equalize(z, h_hat, sigma2, p) for z in received]


def gain_sampler(channel_model):

    def sampler(rng, n):
        return sample_gains(channel_model, rng, (n, 1))
    return sampler


def save_eps(path, eps, sch):
    header = {'branch': eps.branch, 'data_var': repr(eps.data_var)}
    header.update(sch.header())
    save_model(path, eps.model, header)


def load_eps(path, sch=None):
    model, header = load_model(path)
    for key in ('branch', 'data_var', 'T', 'beta_1', 'beta_T'):
        if key not in header:
            raise FormatError('%s: not a noise estimator checkpoint (no %s)'
                              % (path, key))
    stored = NoiseSchedule(int(header['T']), float(header['beta_1']),
                           float(header['beta_T']))
    if sch is not None and sch != stored:
        raise FormatError('%s: schedule %r does not match %r' % (
            path, stored, sch))
    return EpsModel(model, float(header['data_var']), header['branch']), stored
