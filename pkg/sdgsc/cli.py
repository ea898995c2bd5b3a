##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
import argparse
import os
import sys

import numpy as np

from sdgsc import (
    Error, ConfigError, InfeasibleError, DivergenceError,
)
from sdgsc.consts import (
    DENOISER_KINDS, EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_INFEASIBLE,
    EXIT_DIVERGENCE,
)
from sdgsc import config as sdgsc_config
from sdgsc import utils
from sdgsc.channel import ChannelRealization, noise_power, sample_gain, transmit
from sdgsc.checkpoint import inspect_checkpoint
from sdgsc.dataset import gen_synthetic
from sdgsc.encoder import extract_features, select_keyframes
from sdgsc.frameio import read_fsq, write_fsq
from sdgsc.metrics import report
from sdgsc.pipeline import (
    STAGES, load_bundle, run_training_pipeline, run_experiment, write_result,
    denoise_payload, held_out_clips, resolve_compute_times,
)
from sdgsc.utils import stage_rng


def _config(args):
    if args.config:
        return sdgsc_config.load(args.config)
    return sdgsc_config.loads('')


def _bundle(args):
    "(config, bundle); without --config the bundle's own config.txt"
    if args.config:
        cfg = sdgsc_config.load(args.config)
        return cfg, load_bundle(args.bundle, cfg)
    bundle = load_bundle(args.bundle)
    return bundle.config, bundle


def cmd_gen_data(args):
    cfg = _config(args)
    if not os.path.isdir(args.out):
        os.makedirs(args.out)
    clips = gen_synthetic(cfg, stage_rng(cfg['seed'], 0))
    for i, clip in enumerate(clips):
        write_fsq(os.path.join(args.out, 'clip_%04d.fsq' % (i, )), clip)
    print('%d clips written to %s' % (len(clips), args.out))


def cmd_train(args):
    cfg = _config(args)
    stages = STAGES if args.stage == 'all' else (int(args.stage), )
    resume = args.resume or args.stage != 'all'
    bundle, rep = run_training_pipeline(cfg, stages, args.bundle, resume)
    for stage in sorted(rep):
        print('stage %d: loss %.6g -> %.6g' % ((stage, ) + tuple(rep[stage])))


def cmd_denoise(args):
    cfg, bundle = _bundle(args)
    rng = np.random.default_rng(cfg['seed'] if args.seed is None else args.seed)
    clip = held_out_clips(cfg, 1)[0]
    cfg = resolve_compute_times(cfg, bundle, clip)
    link = cfg.link(args.snr)
    model = cfg.channel_model()
    real = ChannelRealization(sample_gain(model, rng),
                              noise_power(link, model.omega))
    lat = extract_features(clip, bundle.encoder)
    plan = select_keyframes(lat, float('inf'), link, real.h, real.sigma2,
                            cfg.compute_times(), cfg['keyframe.k'],
                            cfg['keyframe.priority'])
    rx = transmit(plan.base_latent, real, rng)
    z, _, h_hat = denoise_payload(args.denoiser, plan, rx, [], real, cfg,
                                  bundle, rng)
    err = float(np.mean((z - plan.base_latent) ** 2))
    print('h=%.6g h_hat=%s latent_mse=%.6g' % (
        real.h, 'n/a' if h_hat is None else '%.6g' % h_hat, err))


def cmd_experiment(args):
    cfg, bundle = _bundle(args)
    overrides = {}
    for key, value in (('experiment.snr_min', args.snr_min),
                       ('experiment.snr_max', args.snr_max),
                       ('experiment.snr_step', args.snr_step),
                       ('experiment.trials', args.trials),
                       ('keyframe.t_max', args.t_max)):
        if value is not None:
            overrides[key] = value
    cfg = cfg.updated(overrides)
    result = run_experiment(cfg, bundle, args.denoiser)
    write_result(result, args.out)
    print('%d rows written to %s' % (len(result.rows), args.out))


def cmd_metrics(args):
    rep = report(read_fsq(args.a), read_fsq(args.b))
    print('mse=%r psnr_db=%r' % (rep.mse, rep.psnr_db))


def cmd_inspect(args):
    info = inspect_checkpoint(args.path)
    for key in ('version', 'widths', 'activation', 'output_activation',
                'seed', 'n_params'):
        print('%s: %s' % (key, info[key]))
    for key in sorted(info['header']):
        print('header.%s: %s' % (key, info['header'][key]))


def build_parser():
    parser = argparse.ArgumentParser(
        prog='sdgsc', description='semantic video communication laboratory')
    parser.add_argument('-v', '--verbose', action='store_true')
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    p = sub.add_parser('gen-data', help='write synthetic .fsq clips')
    p.add_argument('--config')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser('train', help='run training stages')
    p.add_argument('--config')
    p.add_argument('--bundle', required=True)
    p.add_argument('--stage', default='all',
                   choices=['all'] + [str(s) for s in STAGES])
    p.add_argument('--resume', action='store_true')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('denoise', help='denoise one received payload')
    p.add_argument('--config')
    p.add_argument('--bundle', required=True)
    p.add_argument('--denoiser', choices=DENOISER_KINDS, default='sd')
    p.add_argument('--snr', type=float)
    p.add_argument('--seed', type=int)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser('experiment', help='SNR sweep to CSV')
    p.add_argument('--config')
    p.add_argument('--bundle', required=True)
    p.add_argument('--denoiser', choices=DENOISER_KINDS, required=True)
    p.add_argument('--snr-min', type=float)
    p.add_argument('--snr-max', type=float)
    p.add_argument('--snr-step', type=float)
    p.add_argument('--trials', type=int)
    p.add_argument('--t-max', type=float)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser('metrics', help='score two .fsq files')
    p.add_argument('a')
    p.add_argument('b')
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser('inspect-checkpoint', help='describe a checkpoint')
    p.add_argument('path')
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    utils.set_debug(args.verbose)
    try:
        args.func(args)
    except ConfigError as e:
        sys.stderr.write('config error: %s\n' % (e, ))
        return EXIT_CONFIG
    except InfeasibleError as e:
        sys.stderr.write('infeasible: %s\n' % (e, ))
        return EXIT_INFEASIBLE
    except DivergenceError as e:
        sys.stderr.write('diverged: %s\n' % (e, ))
        return EXIT_DIVERGENCE
    except (Error, IOError, OSError) as e:
        sys.stderr.write('error: %s\n' % (e, ))
        return EXIT_ERROR
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
