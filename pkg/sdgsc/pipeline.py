##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""Staged training and SNR-sweep experiments.

Training stages:
  1  variational autoencoder (encoder + keyframe decoder)
  2  noise estimators for the latent prior and the gain prior
  3  interpolation mask and refinement on 3-frame windows
  4  joint fine-tune of decoder and interpolation, keep-best

Every stage draws from its own generator derived from (seed, stage), so
a resumed run reproduces an uninterrupted one.
"""
import os
import time
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from sdgsc import ParameterError, InfeasibleError, FormatError
from sdgsc.consts import DENOISER_KINDS
from sdgsc.channel import (
    ChannelRealization, gains_for, noise_power, transmit, make_pilot,
    mmse_equalize,
)
from sdgsc.checkpoint import save_model, load_model
from sdgsc.config import loads as config_loads
from sdgsc.dataset import gen_synthetic
from sdgsc.decoder import (
    DecoderNet, Interpolator, reconstruct_keyframes, interpolate_frames,
    train_interpolator, decoder_loss_and_grads,
)
from sdgsc.diffusion import (
    EpsModel, train_eps, gain_sampler, sd_denoise, psd_denoise, msd_denoise,
    denoise_subsequent, save_eps, load_eps,
)
from sdgsc.encoder import FrameSequence, extract_features, select_keyframes
from sdgsc.metrics import mse, psnr, latent_frechet, write_csv
from sdgsc.ndnet import MlpModel, forward, backward, train_loop
from sdgsc.utils import DEBUG_OUTPUT, stage_rng, trial_seed, split_rng

STAGES = (1, 2, 3, 4)
TEST_SET_KEY = 99


class ModelBundle(object):
    def __init__(self, config, encoder=None, decoder=None, eps_z=None,
                 eps_h=None, interp=None):
        self.config = config
        self.encoder = encoder
        self.decoder = decoder
        self.eps_z = eps_z
        self.eps_h = eps_h
        self.interp = interp

    @property
    def schedule(self):
        return self.config.schedule()

    def copy(self):
        return ModelBundle(
            self.config,
            self.encoder and self.encoder.copy(),
            self.decoder and self.decoder.copy(),
            self.eps_z and self.eps_z.copy(),
            self.eps_h and self.eps_h.copy(),
            self.interp and self.interp.copy())

    def stages_present(self):
        have = []
        if self.encoder is not None and self.decoder is not None:
            have.append(1)
        if self.eps_z is not None and self.eps_h is not None:
            have.append(2)
        if self.interp is not None:
            have.append(3)
        return have


def save_bundle(directory, bundle):
    if not os.path.isdir(directory):
        os.makedirs(directory)
    with open(os.path.join(directory, 'config.txt'), 'w') as f:
        f.write(bundle.config.dumps())
    sch = bundle.schedule
    if bundle.encoder is not None:
        save_model(os.path.join(directory, 'encoder.sdgc'), bundle.encoder)
    if bundle.decoder is not None:
        h, w, c = bundle.decoder.frame_shape
        save_model(os.path.join(directory, 'decoder.sdgc'),
                   bundle.decoder.model, {'frame': '%dx%dx%d' % (h, w, c)})
    if bundle.eps_z is not None:
        save_eps(os.path.join(directory, 'eps_z.sdgc'), bundle.eps_z, sch)
    if bundle.eps_h is not None:
        save_eps(os.path.join(directory, 'eps_h.sdgc'), bundle.eps_h, sch)
    if bundle.interp is not None:
        for name, model in bundle.interp.parts().items():
            save_model(os.path.join(directory, 'interp_%s.sdgc' % (name, )),
                       model, {'window': bundle.interp.window,
                               'sharpness': repr(bundle.interp.sharpness)})
    DEBUG_OUTPUT('save_bundle', directory, bundle.stages_present())


def load_bundle(directory, config=None):
    def path(name):
        return os.path.join(directory, name)

    if config is None:
        try:
            with open(path('config.txt')) as f:
                config = config_loads(f.read(), environ={})
        except (IOError, OSError):
            raise FormatError('%s: bundle has no config.txt' % (directory, ))
    bundle = ModelBundle(config)
    sch = config.schedule()
    if os.path.exists(path('encoder.sdgc')):
        bundle.encoder = load_model(path('encoder.sdgc'))[0]
    if os.path.exists(path('decoder.sdgc')):
        model, header = load_model(path('decoder.sdgc'))
        try:
            shape = tuple(int(n) for n in header['frame'].split('x'))
        except (KeyError, ValueError):
            raise FormatError('%s: decoder header lacks frame shape' % (
                directory, ))
        bundle.decoder = DecoderNet(model, shape)
    if os.path.exists(path('eps_z.sdgc')):
        bundle.eps_z = load_eps(path('eps_z.sdgc'), sch)[0]
    if os.path.exists(path('eps_h.sdgc')):
        bundle.eps_h = load_eps(path('eps_h.sdgc'), sch)[0]
    if os.path.exists(path('interp_mask.sdgc')):
        parts, header = {}, {}
        for name in Interpolator.PARTS:
            parts[name], header = load_model(path('interp_%s.sdgc' % (name, )))
        bundle.interp = Interpolator(parts, int(header['window']),
                                     float(header['sharpness']))
    _freeze_completed(bundle)
    return bundle


def _freeze_completed(bundle):
    if bundle.encoder is not None:
        bundle.encoder.freeze()
    for eps in (bundle.eps_z, bundle.eps_h):
        if eps is not None:
            eps.model.freeze()


def training_frames(clips):
    "every frame of every clip as rows of unit-scale pixels"
    return np.concatenate([c.to_unit().reshape(len(c), -1) for c in clips])


def autoencoder_objective(enc, dec, x, kl_weight, noise=None):
    """Per-sample summed squared error plus kl_weight * KL, batch mean.

    Returns (loss, encoder grads, decoder grads).  noise=None decodes the
    means.
    """
    n = x.shape[0]
    out = forward(enc, x)
    d = out.shape[1] // 2
    mu, log_sigma = out[:, :d], np.clip(out[:, d:], -10.0, 5.0)
    sigma = np.exp(log_sigma)
    z = mu if noise is None else mu + sigma * noise
    x_hat = forward(dec.model, z)
    diff = x_hat - x
    rec = float(np.sum(diff * diff)) / n
    kl = float(np.sum(-0.5 * (1.0 + 2.0 * log_sigma - mu * mu - sigma * sigma))) / n
    loss = rec + kl_weight * kl
    g_dec, d_z = backward(dec.model, z, 2.0 * diff / n)
    d_mu = d_z + kl_weight * mu / n
    d_ls = kl_weight * (sigma * sigma - 1.0) / n
    if noise is not None:
        d_ls = d_ls + d_z * sigma * noise
    g_enc, _ = backward(enc, x, np.concatenate([d_mu, d_ls], axis=1))
    return loss, g_enc, g_dec


def create_autoencoder(cfg, seed):
    frame_shape = cfg.frame_shape()
    d = cfg['model.latent_dim']
    enc = MlpModel([int(np.prod(frame_shape)), cfg['model.encoder_hidden'], 2 * d],
                   cfg['model.activation'], 'identity', trial_seed(seed, 1, 0))
    dec = DecoderNet.create(d, frame_shape, cfg['model.decoder_hidden'],
                            trial_seed(seed, 1, 1), cfg['model.activation'])
    return enc, dec


def normalize_latent_power(enc, dec, x, power=1.0):
    """Fold a per-dimension centring and one global scale of the latent
    means into the encoder output layer and the decoder input layer.

    Afterwards the latent means of x have zero mean and mean square
    `power`, and every decoded frame is unchanged.  Returns the scale.
    """
    d = dec.model.input_width
    mu = forward(enc, x)[:, :d]
    centre = mu.mean(axis=0)
    spread = float(np.mean((mu - centre) ** 2))
    if spread <= 0.0:
        return 1.0
    s = np.sqrt(spread / power)
    params = enc.parameters()
    w, b = params[-2].copy(), params[-1].copy()
    w[:, :d] /= s
    b[:d] = (b[:d] - centre) / s
    b[d:] -= np.log(s)
    enc.set_parameters(params[:-2] + [w, b])
    params = dec.model.parameters()
    w0, b0 = params[0], params[1]
    dec.model.set_parameters([s * w0, b0 + centre @ w0] + params[2:])
    DEBUG_OUTPUT('normalize_latent_power', 'scale', s)
    return s


def train_autoencoder(dataset, cfg, rng=None):
    """Stage 1.  Returns (encoder, decoder, (initial_loss, final_loss)),
    losses measured on the whole training set at the latent means.
    The latents are then rescaled to the link power.
    """
    if rng is None:
        rng = stage_rng(cfg['seed'], 1)
    x = training_frames(dataset)
    enc, dec = create_autoencoder(cfg, cfg['seed'])
    lam = cfg['model.kl_weight']
    sgd = cfg.sgd('ae')
    initial = autoencoder_objective(enc, dec, x, lam)[0]

    def step(i):
        batch = x[rng.integers(0, x.shape[0], size=sgd.batch_size)]
        noise = rng.standard_normal((batch.shape[0], dec.model.input_width))
        loss, g_enc, g_dec = autoencoder_objective(enc, dec, batch, lam, noise)
        return loss, [g_enc, g_dec]

    train_loop([enc, dec.model], step, sgd, 'autoencoder')
    final = autoencoder_objective(enc, dec, x, lam)[0]
    DEBUG_OUTPUT('train_autoencoder', 'initial', initial, 'final', final)
    normalize_latent_power(enc, dec, x, cfg['link.power'])
    return enc, dec, (initial, final)


def dataset_latents(enc, clips):
    return np.concatenate([extract_features(c, enc).mu for c in clips])


def train_denoisers(enc, clips, cfg, rng=None):
    "Stage 2: eps_z on encoder means, eps_h on gains of the channel model."
    if rng is None:
        rng = stage_rng(cfg['seed'], 2)
    latents = dataset_latents(enc, clips)
    d = latents.shape[1]
    sch = cfg.schedule()
    sgd = cfg.sgd('eps')

    def latent_sampler(r, n):
        return latents[r.integers(0, latents.shape[0], size=n)]

    eps_z = EpsModel.create(d, cfg['eps.hidden'], cfg['eps.layers'],
                            trial_seed(cfg['seed'], 2, 0),
                            float(np.mean(latents * latents)), 'eps_z')
    eps_h = EpsModel.create(1, cfg['eps.hidden'], cfg['eps.layers'],
                            trial_seed(cfg['seed'], 2, 1),
                            cfg['channel.omega'], 'eps_h')
    rng_z, rng_h = split_rng(rng, 2)
    eps_z = train_eps(eps_z, latent_sampler, sch, sgd, rng_z, stage='denoisers')
    eps_h = train_eps(eps_h, gain_sampler(cfg.channel_model()), sch, sgd,
                      rng_h, stage='denoisers')
    return eps_z, eps_h


def fixed_keyframes(F):
    "every other frame plus the last one"
    return sorted(set(range(0, F, 2)) | set([F - 1]))


def end_to_end_mse(bundle, clips):
    """Mean pixel MSE of noiseless encode, decode and interpolate with
    fixed keyframes; the fine-tune objective."""
    total = 0.0
    for clip in clips:
        idx = fixed_keyframes(len(clip))
        mu = extract_features(clip, bundle.encoder).mu
        keys = bundle.decoder.decode(mu[idx])
        video = interpolate_frames(keys, idx, len(clip), bundle.interp)
        total += mse(video, clip.to_float())
    return total / len(clips)


def finetune(bundle, clips, cfg, rng=None):
    """Stage 4: joint decoder and interpolation update, encoder and
    denoisers frozen.  Keeps the stage 3 models if the training-set
    end-to-end MSE does not improve.  Returns (bundle, before, after)."""
    if rng is None:
        rng = stage_rng(cfg['seed'], 4)
    before = end_to_end_mse(bundle, clips)
    tuned = bundle.copy()
    _freeze_completed(tuned)
    dec, interp = tuned.decoder, tuned.interp
    latents = [extract_features(c, tuned.encoder).mu for c in clips]

    def step(i):
        c = int(rng.integers(0, len(clips)))
        x = clips[c].to_float()
        idx = fixed_keyframes(len(x))
        loss, g_dec = decoder_loss_and_grads(dec, latents[c][idx], x[idx])
        keys = dec.decode(latents[c][idx])
        pos = int(rng.integers(0, len(idx) - 1))
        a, b = idx[pos], idx[pos + 1]
        g_mask = interp.mask.zeros_like_params()
        g_ref = interp.refine_net.zeros_like_params()
        if b - a > 1:
            delta = int(rng.integers(1, b - a))
            geom = interp.gap_geometry(keys[pos], keys[pos + 1])
            inp = interp.synthesis_inputs(keys[pos], keys[pos + 1], geom,
                                          delta, b - a)
            l2, g_mask, g_ref = interp.loss_and_grads(inp, x[a + delta])
            loss += l2
        return loss, [g_dec, g_mask, g_ref]

    train_loop([dec.model, interp.mask, interp.refine_net], step,
               cfg.sgd('finetune'), 'finetune')
    after = end_to_end_mse(tuned, clips)
    DEBUG_OUTPUT('finetune', 'before', before, 'after', after)
    if after > before:
        return bundle, before, before
    return tuned, before, after


def training_clips(cfg):
    return gen_synthetic(cfg, stage_rng(cfg['seed'], 0))


def held_out_clips(cfg, count=None):
    n = min(cfg['data.clips'], 16) if count is None else count
    return gen_synthetic(cfg.updated({'data.clips': n}),
                         stage_rng(cfg['seed'], TEST_SET_KEY))


def run_training_pipeline(cfg, stages=STAGES, bundle_dir=None, resume=False,
                          clips=None):
    """Run the requested training stages.

    With resume, models of stages that are not run come from bundle_dir.
    Returns (bundle, report) where report maps stage -> (before, after).
    """
    stages = sorted(set(int(s) for s in stages))
    for s in stages:
        if s not in STAGES:
            raise ParameterError('unknown training stage %r' % (s, ))
    if clips is None:
        clips = training_clips(cfg)
    if resume and bundle_dir and os.path.isdir(bundle_dir):
        bundle = load_bundle(bundle_dir, cfg)
    else:
        bundle = ModelBundle(cfg)
    report = {}
    for s in stages:
        have = bundle.stages_present()
        for need in range(1, min(s, 4)):
            if need not in have:
                raise ParameterError('stage %d needs stage %d models' % (s, need))
        DEBUG_OUTPUT('training stage', s)
        if s == 1:
            enc, dec, losses = train_autoencoder(clips, cfg, stage_rng(cfg['seed'], 1))
            bundle.encoder, bundle.decoder = enc.freeze(), dec
            report[1] = losses
        elif s == 2:
            bundle.eps_z, bundle.eps_h = train_denoisers(
                bundle.encoder, clips, cfg, stage_rng(cfg['seed'], 2))
            _freeze_completed(bundle)
        elif s == 3:
            interp = Interpolator.create(
                3, cfg['interp.feature_width'], cfg['interp.refine_hidden'],
                cfg['interp.window'], cfg['interp.sharpness'],
                trial_seed(cfg['seed'], 3))
            rng = stage_rng(cfg['seed'], 3)
            bundle.interp, before, after = train_interpolator(
                interp, clips, cfg.sgd('interp'), rng)
            report[3] = (before, after)
        else:
            bundle, before, after = finetune(bundle, clips, cfg,
                                             stage_rng(cfg['seed'], 4))
            report[4] = (before, after)
        if bundle_dir:
            save_bundle(bundle_dir, bundle)
    return bundle, report


ExperimentResult = namedtuple('ExperimentResult', 'config rows')


def measure_compute_times(cfg, bundle, clip):
    "wall-clock seconds of each processing step on one clip"
    rng = np.random.default_rng(0)
    times = {}
    t0 = time.perf_counter()
    lat = extract_features(clip, bundle.encoder)
    times['t_fe'] = time.perf_counter() - t0
    link = cfg.link()
    sigma2 = noise_power(link, cfg['channel.omega'])
    t0 = time.perf_counter()
    plan = select_keyframes(lat, float('inf'), link, 1.0, sigma2,
                            cfg.compute_times(dict.fromkeys(
                                ('t_fe', 't_ks', 't_sd', 't_sr', 't_fi'), 0.0)),
                            cfg['keyframe.k'], cfg['keyframe.priority'])
    times['t_ks'] = time.perf_counter() - t0
    t0 = time.perf_counter()
    z = sd_denoise(plan.base_latent, 1.0, bundle.eps_z, bundle.schedule,
                   cfg.guidance(), rng, sigma2, cfg['denoise.samples'])
    times['t_sd'] = time.perf_counter() - t0
    t0 = time.perf_counter()
    keys = reconstruct_keyframes(plan._replace(base_latent=z), bundle.decoder)
    times['t_sr'] = time.perf_counter() - t0
    t0 = time.perf_counter()
    interpolate_frames(keys, plan.indices, len(clip), bundle.interp)
    times['t_fi'] = time.perf_counter() - t0
    return times


def resolve_compute_times(cfg, bundle, clip):
    "config snapshot with every 'auto' compute time replaced by a measurement"
    if not cfg.has_auto_times():
        return cfg
    measured = measure_compute_times(cfg, bundle, clip)
    values = {}
    for name, v in measured.items():
        if cfg['compute.' + name] == 'auto':
            values['compute.' + name] = v
    return cfg.updated(values)


def transmit_plan(plan, reals, rng):
    """Send the base latent and every sparse value vector, keyframe i
    under reals[i].  Indices are side information and arrive intact."""
    if len(reals) != len(plan.indices):
        raise ParameterError('need %d channel realizations, got %d' % (
            len(plan.indices), len(reals)))
    rx_base = transmit(plan.base_latent, reals[0], rng)
    rx_diffs = [transmit(sd.values, r, rng) for sd, r in zip(plan.diffs, reals[1:])]
    return rx_base, rx_diffs


def denoise_payload(kind, plan, received_base, received_diffs, real, cfg,
                    bundle, rng):
    """Denoised payload and the gain it used (None for 'none')."""
    sigma2 = real.sigma2
    p = cfg['link.power']
    if kind == 'none':
        return received_base, list(received_diffs), None
    if kind == 'mmse-only':
        base = mmse_equalize(received_base, real.h, sigma2, p)
        return base, denoise_subsequent(received_diffs, real.h, sigma2, p), real.h
    sch, zeta, k = bundle.schedule, cfg.guidance(), cfg['denoise.samples']
    if kind == 'sd':
        h_hat = real.h
        base = sd_denoise(received_base, h_hat, bundle.eps_z, sch, zeta, rng,
                          sigma2, k)
    elif kind == 'msd':
        pilot = make_pilot(cfg['pilot.length'], rng)
        rx_pilot = transmit(pilot, real, rng)
        base, h_hat = msd_denoise(received_base, pilot, rx_pilot, sigma2,
                                  bundle.eps_z, sch, zeta, rng, return_gain=True,
                                  samples=k)
    else:
        base, h_hat = psd_denoise(received_base, bundle.eps_z, bundle.eps_h,
                                  sch, zeta, cfg.reg(), rng, sigma2, k)
    return base, denoise_subsequent(received_diffs, h_hat, sigma2, p), h_hat


def run_trial(cfg, bundle, clips, denoiser, snr_index, snr_db, trial, t_max):
    seed = trial_seed(cfg['seed'], snr_index, trial)
    rng = np.random.default_rng(seed)
    row = {'snr_db': float(snr_db), 'denoiser': denoiser, 't_max_s': float(t_max),
           'seed': seed, 'trial': trial}
    clip = clips[int(rng.integers(0, len(clips)))]
    link = cfg.link(snr_db)
    model = cfg.channel_model()
    sigma2 = noise_power(link, model.omega)
    lat = extract_features(clip, bundle.encoder)
    gains = gains_for(model, len(clip), cfg['channel.gain_policy'], rng)
    row['gain'] = float(gains[0])
    try:
        plan = select_keyframes(lat, t_max, link, gains[0], sigma2,
                                cfg.compute_times(), cfg['keyframe.k'],
                                cfg['keyframe.priority'])
    except InfeasibleError as e:
        row.update(status='infeasible', t_exe_s=e.min_t_exe)
        return row
    reals = [ChannelRealization(g, sigma2) for g in gains[:len(plan.indices)]]
    rx_base, rx_diffs = transmit_plan(plan, reals, rng)
    base, values, h_hat = denoise_payload(denoiser, plan, rx_base, rx_diffs,
                                          reals[0], cfg, bundle, rng)
    row['h_hat'] = None if h_hat is None else float(h_hat)
    received = plan._replace(
        base_latent=base,
        diffs=tuple(sd._replace(values=v) for sd, v in zip(plan.diffs, values)))
    keys = reconstruct_keyframes(received, bundle.decoder)
    video = FrameSequence.from_float(
        interpolate_frames(keys, plan.indices, len(clip), bundle.interp))
    m = mse(video, clip)
    row.update(
        status='ok', mse=m, psnr_db=psnr(m),
        latent_frechet=latent_frechet(lat.mu,
                                      extract_features(video, bundle.encoder).mu),
        keyframes=len(plan.indices), t_exe_s=plan.t_exe, t_com_s=plan.t_com)
    DEBUG_OUTPUT('trial', snr_db, denoiser, trial, 'mse', m, 'h_hat', h_hat)
    return row


def run_experiment(cfg, bundle, denoiser, snrs=None, trials=None, t_max=None,
                   clips=None, workers=None):
    """Sweep SNR x trials for one denoiser kind.

    Rows come back sorted by (snr, trial); infeasible budgets produce
    rows with status 'infeasible'.
    """
    if denoiser not in DENOISER_KINDS:
        raise ParameterError('unknown denoiser %r' % (denoiser, ))
    snrs = cfg.snr_sweep() if snrs is None else list(snrs)
    trials = cfg['experiment.trials'] if trials is None else int(trials)
    t_max = cfg['keyframe.t_max'] if t_max is None else float(t_max)
    workers = cfg['experiment.workers'] if workers is None else int(workers)
    if trials < 0:
        raise ParameterError('trials must be >= 0: %d' % (trials, ))
    if trials == 0:
        return ExperimentResult(cfg, [])
    if clips is None:
        clips = held_out_clips(cfg)
    cfg = resolve_compute_times(cfg, bundle, clips[0])
    tasks = [(i, snr, t) for i, snr in enumerate(snrs) for t in range(trials)]

    def run(task):
        return task[0], task[2], run_trial(cfg, bundle, clips, denoiser,
                                           task[0], task[1], task[2], t_max)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[1]))
    return ExperimentResult(cfg, [r[2] for r in results])


def write_result(result, path):
    write_csv(result.rows, path)
