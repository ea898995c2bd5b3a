##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""Semantic encoder: variational features, sparse residuals and the
latency budgeted greedy keyframe selection.

Frame indices are 0-based; a plan always holds frames 0 and F-1.
"""
import heapq
from collections import namedtuple

import numpy as np

from sdgsc import ParameterError, ShapeError, InfeasibleError
from sdgsc.consts import FRAME_CHANNELS, PIXEL_MAX, PRIORITY_KINDS
from sdgsc.channel import rate, comm_time, exec_time
from sdgsc.ndnet import forward
from sdgsc.utils import DEBUG_OUTPUT, as_array


class FrameSequence(object):
    "F x H x W x C block of uint8 pixels"
    def __init__(self, pixels):
        pixels = np.asarray(pixels)
        if pixels.dtype != np.uint8:
            raise ParameterError('pixels must be uint8, got %s' % (
                pixels.dtype, ))
        if pixels.ndim != 4 or pixels.shape[3] != FRAME_CHANNELS:
            raise ShapeError('frame sequence must be FxHxWx3', pixels.shape)
        if pixels.shape[0] < 2:
            raise ParameterError('a frame sequence needs F >= 2, got %d' % (
                pixels.shape[0], ))
        self.pixels = pixels

    @classmethod
    def from_float(cls, pixels):
        "round half to even onto 0..255"
        return cls(np.rint(np.clip(as_array(pixels), 0.0, PIXEL_MAX)).astype(
            np.uint8))

    @classmethod
    def from_unit(cls, values):
        return cls.from_float(as_array(values) * PIXEL_MAX)

    def to_unit(self):
        return self.pixels.astype(np.float64) / PIXEL_MAX

    def to_float(self):
        return self.pixels.astype(np.float64)

    @property
    def shape(self):
        return self.pixels.shape

    F = property(lambda self: self.pixels.shape[0])
    H = property(lambda self: self.pixels.shape[1])
    W = property(lambda self: self.pixels.shape[2])
    C = property(lambda self: self.pixels.shape[3])

    def __len__(self):
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, FrameSequence) and \
            np.array_equal(self.pixels, other.pixels)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return 'FrameSequence(%dx%dx%dx%d)' % self.pixels.shape


class VariationalLatent(namedtuple('VariationalLatent', 'mu log_sigma')):
    __slots__ = ()

    @property
    def d(self):
        return self.mu.shape[1]

    @property
    def F(self):
        return self.mu.shape[0]


SparseDiff = namedtuple('SparseDiff', 'base indices values k size')

KeyframePlan = namedtuple(
    'KeyframePlan',
    'indices order base_latent diffs k d t_exe t_com rate')


def extract_features(x, enc):
    "per-frame (mu, log_sigma) from an encoder with output width 2d"
    flat = x.to_unit().reshape(x.F, -1)
    if flat.shape[1] != enc.input_width:
        raise ShapeError('encoder input width', flat.shape, (enc.input_width, ))
    if enc.output_width % 2:
        raise ParameterError('encoder output width must be even: %d' % (
            enc.output_width, ))
    out = forward(enc, flat)
    d = enc.output_width // 2
    return VariationalLatent(out[:, :d], out[:, d:])


def cosine_diff(a, b, index=None):
    a, b = as_array(a), as_array(b)
    if a.shape != b.shape:
        raise ShapeError('feature vectors', a.shape, b.shape)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        which = '' if index is None else ' (frame %s)' % (index, )
        raise ParameterError('zero-norm feature vector%s' % (which, ))
    m = 1.0 - float(np.dot(a, b)) / (na * nb)
    return min(max(m, 0.0), 2.0)


def sparsify(residual, k, base=None):
    residual = as_array(residual)
    d = residual.shape[0]
    k = int(k)
    if k < 1:
        raise ParameterError('sparsity k must be positive: %d' % (k, ))
    if k > d:
        raise ParameterError('sparsity k=%d exceeds dimension %d' % (k, d))
    # stable sort keeps the lower index first among equal magnitudes
    order = np.argsort(-np.abs(residual), kind='stable')
    indices = np.sort(order[:k])
    return SparseDiff(base, indices, residual[indices].copy(), k, d)


def densify(sd, d=None):
    out = np.zeros(sd.size if d is None else d)
    out[sd.indices] = sd.values
    return out


def pair_score(a, b, k, priority='sparse'):
    "selection priority s_ij between two frame features"
    if priority == 'cosine':
        return cosine_diff(a, b)
    return float(np.linalg.norm(sparsify(as_array(a) - as_array(b), k).values))


def score_matrix(features, k, priority='sparse'):
    if priority not in PRIORITY_KINDS:
        raise ParameterError('unknown priority %r' % (priority, ))
    n = features.shape[0]
    s = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s[i, j] = s[j, i] = pair_score(features[i], features[j], k,
                                           priority)
    return s


def payload_dims_for(n_keyframes, d, k):
    return [d] + [2 * k] * (n_keyframes - 1)


def payload_dims(plan):
    return payload_dims_for(len(plan.indices), plan.d, plan.k)


def plan_time(n_keyframes, d, k, r, ct):
    "(T_exe, t_com) of a plan with n keyframes at rate r"
    t_com = comm_time(payload_dims_for(n_keyframes, d, k), r)
    return exec_time(ct, t_com), t_com


def encode_plan_payload(mu, indices, k):
    """Base latent plus closed-loop sparse residuals.

    Each residual is taken against the reconstruction of the previous
    keyframe, so sparsification error does not accumulate.
    """
    base = mu[indices[0]].copy()
    recon = base
    diffs = []
    for prev, i in zip(indices[:-1], indices[1:]):
        sd = sparsify(mu[i] - recon, k, base=prev)
        recon = recon + densify(sd)
        diffs.append(sd)
    return base, diffs


def select_keyframes(lat, t_max, link, h, sigma2, ct, k, priority='sparse'):
    mu = as_array(lat.mu)
    F, d = mu.shape
    if F < 2:
        raise ParameterError('keyframe selection needs F >= 2, got %d' % (F, ))
    k = int(k)
    if k < 1 or k > d:
        raise ParameterError('sparsity k=%d outside 1..%d' % (k, d))
    r = rate(link, h, sigma2)
    if r <= 0.0:
        raise InfeasibleError('zero link rate', float('inf'))
    t_exe, t_com = plan_time(2, d, k, r, ct)
    if t_exe > t_max:
        raise InfeasibleError('latency budget %g s cannot carry frames 0 and %d'
                              % (t_max, F - 1), t_exe)

    s = score_matrix(mu, k, priority)
    selected = [0, F - 1]
    remaining = set(range(1, F - 1))
    cur = np.zeros(F)
    version = [0] * F
    heap = []
    for i in sorted(remaining):
        for j in selected:
            cur[i] += s[i, j]
        heapq.heappush(heap, (-cur[i], i, 0))

    while heap:
        neg, i, ver = heapq.heappop(heap)
        if i not in remaining or ver != version[i]:
            continue
        t_next, t_com_next = plan_time(len(selected) + 1, d, k, r, ct)
        if t_next > t_max:
            # every further keyframe costs the same 2k elements
            break
        selected.append(i)
        remaining.discard(i)
        t_exe, t_com = t_next, t_com_next
        for j in remaining:
            cur[j] += s[j, i]
            version[j] += 1
            heapq.heappush(heap, (-cur[j], j, version[j]))

    indices = tuple(sorted(selected))
    base, diffs = encode_plan_payload(mu, indices, k)
    DEBUG_OUTPUT('select_keyframes', indices, 't_exe', t_exe)
    return KeyframePlan(indices, tuple(selected), base, tuple(diffs), k, d,
                        t_exe, t_com, r)
