##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
import csv
from collections import namedtuple

import numpy as np

from sdgsc import ParameterError, ShapeError
from sdgsc.consts import PIXEL_MAX
from sdgsc.utils import as_array

MetricReport = namedtuple('MetricReport', 'mse psnr_db per_frame')

CSV_COLUMNS = (
    'snr_db', 'denoiser', 't_max_s', 'mse', 'psnr_db', 'latent_frechet',
    'seed', 'trial', 'status', 'keyframes', 't_exe_s', 't_com_s', 'gain',
    'h_hat',
)


def _pixels(x):
    return as_array(getattr(x, 'pixels', x))


def mse(a, b):
    a, b = _pixels(a), _pixels(b)
    if a.shape != b.shape:
        raise ShapeError('sequence extents differ', a.shape, b.shape)
    d = a - b
    return float(np.mean(d * d))


def psnr(m):
    "PSNR in dB for MAX = 255; +inf when m == 0"
    if m < 0:
        raise ParameterError('mse must be >= 0: %r' % (m, ))
    if m == 0:
        return float('inf')
    return float(10.0 * np.log10(PIXEL_MAX * PIXEL_MAX / m))


def report(a, b):
    a, b = _pixels(a), _pixels(b)
    m = mse(a, b)
    per_frame = tuple(mse(fa, fb) for fa, fb in zip(a, b))
    return MetricReport(m, psnr(m), per_frame)


def latent_frechet(a, b):
    """Frechet distance of diagonal Gaussian fits to two latent clouds.

    A desk-scale stand-in for perceptual distribution distances.
    """
    a, b = np.atleast_2d(as_array(a)), np.atleast_2d(as_array(b))
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ParameterError('latent_frechet needs >= 2 samples per set')
    if a.shape[1] != b.shape[1]:
        raise ShapeError('latent widths', a.shape, b.shape)
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    var_a, var_b = a.var(axis=0, ddof=1), b.var(axis=0, ddof=1)
    d = mu_a - mu_b
    return float(np.dot(d, d) + np.sum(var_a + var_b - 2.0 * np.sqrt(var_a * var_b)))


def format_value(v):
    if v is None:
        return ''
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, f):
    "rows are dicts keyed by CSV_COLUMNS; f is a path or a text file"
    if isinstance(f, str):
        with open(f, 'w', newline='') as out:
            return write_csv(rows, out)
    writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS, lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow(dict((k, format_value(row.get(k))) for k in CSV_COLUMNS))


def read_csv(f):
    if isinstance(f, str):
        with open(f, newline='') as inp:
            return read_csv(inp)
    return list(csv.DictReader(f))
