#!/usr/bin/env python
##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
import os, sys
sys.path.append('./../')
import numpy as np
from sdgsc import config
from sdgsc.consts import DENOISER_KINDS
from sdgsc.pipeline import load_bundle, run_experiment, write_result

def print_usage():
    print(sys.argv[0] +
        ' denoisers <cfg> <bundle> <outdir>|budget <cfg> <bundle> <denoiser> <t_max>...')

def mean_psnr(rows):
    ok = [r['psnr_db'] for r in rows if r['status'] == 'ok']
    return np.mean(np.minimum(ok, 100.0)) if ok else float('nan')

if len(sys.argv) < 4:
    print_usage()
    sys.exit(0)

cfg = config.load(sys.argv[2])
bundle = load_bundle(sys.argv[3], cfg)
if sys.argv[1] == 'denoisers' and len(sys.argv) == 5:
    for kind in DENOISER_KINDS:
        result = run_experiment(cfg, bundle, kind)
        write_result(result, os.path.join(sys.argv[4], kind + '.csv'))
        for snr in cfg.snr_sweep():
            rows = [r for r in result.rows if r['snr_db'] == snr]
            print('%-10s %6.1f dB  psnr %7.3f' % (kind, snr, mean_psnr(rows)))
elif sys.argv[1] == 'budget' and len(sys.argv) > 5:
    for t_max in sys.argv[5:]:
        result = run_experiment(cfg, bundle, sys.argv[4], t_max=float(t_max))
        keyframes = [r['keyframes'] for r in result.rows if r['status'] == 'ok']
        print('t_max %8s s  keyframes %5.2f  psnr %7.3f' % (
            t_max, np.mean(keyframes) if keyframes else 0.0,
            mean_psnr(result.rows)))
else:
    print_usage()
