##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""Semantic decoder: keyframe reconstruction and frame interpolation.

Frames are float (H, W, C) arrays on the 0..255 scale until the final
quantization in interpolate_video.  Motion and flow vectors are
(d_row, d_col) pairs.
"""
from collections import namedtuple

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.special import softmax

from sdgsc import ParameterError, ShapeError
from sdgsc.consts import PIXEL_MAX
from sdgsc.encoder import FrameSequence, densify
from sdgsc.ndnet import (
    MlpModel, forward, backward, loss_mse, sgd_step, add_grads, scale_grads,
    train_loop,
)
from sdgsc.utils import DEBUG_OUTPUT, as_array, trial_seed

AppearanceFeatures = namedtuple('AppearanceFeatures', 'levels fused')

N_SCALES = 3


class DecoderNet(object):
    "latent d -> H*W*C with a sigmoid output, denormalized to 0..255"
    def __init__(self, model, frame_shape):
        frame_shape = tuple(int(n) for n in frame_shape)
        if model.output_width != int(np.prod(frame_shape)):
            raise ShapeError('decoder output width', (model.output_width, ),
                             frame_shape)
        if model.output_activation != 'sigmoid':
            raise ParameterError('decoder output must be sigmoid')
        self.model = model
        self.frame_shape = frame_shape

    @classmethod
    def create(cls, d, frame_shape, hidden=256, seed=0, activation='tanh'):
        widths = [d, hidden, int(np.prod(frame_shape))]
        return cls(MlpModel(widths, activation, 'sigmoid', seed), frame_shape)

    def copy(self):
        return DecoderNet(self.model.copy(), self.frame_shape)

    def decode_unit(self, latents):
        latents = np.atleast_2d(as_array(latents))
        out = forward(self.model, latents)
        return out.reshape((latents.shape[0], ) + self.frame_shape)

    def decode(self, latents):
        return PIXEL_MAX * self.decode_unit(latents)


def decoder_loss_and_grads(dec, latents, frames):
    "unit-scale pixel MSE of decoded latents against float frames"
    latents = np.atleast_2d(as_array(latents))
    pred = dec.decode_unit(latents).reshape(latents.shape[0], -1)
    target = as_array(frames).reshape(latents.shape[0], -1) / PIXEL_MAX
    loss, up = loss_mse(pred, target)
    grads, _ = backward(dec.model, latents, up)
    return loss, grads


def train_decoder_step(dec, latents, frames, cfg):
    "one SGD step of the keyframe decoder in place; returns the loss"
    loss, grads = decoder_loss_and_grads(dec, latents, frames)
    sgd_step(dec.model, grads, cfg, inplace=True)
    return loss


def keyframe_latents(payload):
    "x'_i = x'_prev + dense(diff_i), starting from the base latent"
    base = getattr(payload, 'base_latent', None)
    if base is None:
        raise ParameterError('payload carries no base latent')
    latents = [as_array(base)]
    for sd in payload.diffs:
        latents.append(latents[-1] + densify(sd, latents[0].shape[0]))
    return np.stack(latents)


def reconstruct_keyframes(payload, dec):
    return dec.decode(keyframe_latents(payload))


def _neighbourhood(x, dilation):
    "3x3 dilated neighbourhoods with edge replication: (H, W, 9*C)"
    h, w = x.shape[:2]
    pad = np.pad(x, ((dilation, dilation), (dilation, dilation), (0, 0)),
                 mode='edge')
    parts = []
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            r0 = dilation + dy * dilation
            c0 = dilation + dx * dilation
            parts.append(pad[r0:r0 + h, c0:c0 + w])
    return np.concatenate(parts, axis=2)


def window_offsets(window):
    r = window // 2
    dy, dx = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1),
                         indexing='ij')
    return np.stack([dy.ravel(), dx.ravel()], axis=1).astype(np.float64)


def _window_index(h, w, window):
    off = window_offsets(window).astype(int)
    rows = np.clip(np.arange(h)[:, None] + off[None, :, 0], 0, h - 1)
    cols = np.clip(np.arange(w)[:, None] + off[None, :, 1], 0, w - 1)
    return rows[:, None, :], cols[None, :, :]


def check_window(window, shape):
    if window < 1 or window % 2 == 0:
        raise ParameterError('attention window must be odd: %r' % (window, ))
    if window > min(shape[0], shape[1]):
        raise ParameterError('window %d larger than the %dx%d feature grid' % (
            window, shape[0], shape[1]))


def interframe_attention(a_i, a_j, window, projections):
    """Windowed attention of a_i onto a_j.

    projections is (M_Q, M_K, M_V).  Returns (A_tilde, S) with S of shape
    (H, W, window**2), rows over window_offsets(window).
    """
    a_i, a_j = as_array(a_i), as_array(a_j)
    if a_i.shape != a_j.shape:
        raise ShapeError('appearance maps', a_i.shape, a_j.shape)
    check_window(window, a_i.shape)
    m_q, m_k, m_v = [as_array(m) for m in projections]
    q = a_i @ m_q
    k = a_j @ m_k
    v = a_j @ m_v
    if v.shape != a_i.shape:
        raise ShapeError('value projection', v.shape, a_i.shape)
    rows, cols = _window_index(a_i.shape[0], a_i.shape[1], window)
    k_nb = k[rows, cols]
    v_nb = v[rows, cols]
    logits = np.einsum('hwc,hwnc->hwn', q, k_nb) / np.sqrt(q.shape[-1])
    s = softmax(logits, axis=2)
    return a_i + np.einsum('hwn,hwnc->hwc', s, v_nb), s


def coordinate_map(h, w):
    rows, cols = np.mgrid[0:h, 0:w]
    return np.stack([rows, cols], axis=2).astype(np.float64)


def motion_vector(s, coords=None):
    """M = S . B^w - B with B^w the window coordinates clamped to the grid,
    the same neighbours interframe_attention reads."""
    s = as_array(s)
    h, w, n = s.shape
    window = int(round(np.sqrt(n)))
    if window * window != n:
        raise ShapeError('attention rows are not a square window', s.shape)
    if coords is None:
        coords = coordinate_map(h, w)
    coords = as_array(coords)
    if coords.shape != (h, w, 2):
        raise ShapeError('coordinate map', coords.shape, (h, w, 2))
    bw = coords[:, :, None, :] + window_offsets(window)[None, None, :, :]
    bw = np.clip(bw, 0.0, [h - 1.0, w - 1.0])
    return np.einsum('hwn,hwnc->hwc', s, bw) - coords


def scale_motion(m, delta, gap):
    if not 0 < delta < gap:
        raise ParameterError('need 0 < delta < gap, got delta=%r gap=%r' % (
            delta, gap))
    return as_array(m) * (float(delta) / float(gap))


def backward_warp(x, flow):
    "bilinear sample of x at p + flow(p), clamped at the border"
    x, flow = as_array(x), as_array(flow)
    h, w = x.shape[:2]
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    coords = [rows + flow[:, :, 0], cols + flow[:, :, 1]]
    return np.stack([
        map_coordinates(x[:, :, c], coords, order=1, mode='nearest')
        for c in range(x.shape[2])], axis=2)


def _mask3(mask):
    mask = as_array(mask)
    return mask[:, :, None] if mask.ndim == 2 else mask


def warp_fuse(x_i, x_j, flows, mask):
    "O * BW(x_i, F_to_i) + (1 - O) * BW(x_j, F_to_j)"
    flow_i, flow_j = flows
    o = _mask3(mask)
    return o * backward_warp(x_i, flow_i) + (1.0 - o) * backward_warp(x_j, flow_j)


def refine_inputs(frame, low, appearance):
    return np.concatenate(
        [as_array(frame) / PIXEL_MAX - 0.5, as_array(low), as_array(appearance)],
        axis=2)


def refine(frame, low, appearance, net):
    "frame plus a learned residual, clamped to 0..255"
    residual = PIXEL_MAX * forward(net, refine_inputs(frame, low, appearance))
    return np.clip(as_array(frame) + residual, 0.0, PIXEL_MAX)


GapGeometry = namedtuple('GapGeometry', 'motion a_ij a_ji')

SynthesisInputs = namedtuple('SynthesisInputs',
                             'warp_i warp_j mask_in low app')


class Interpolator(object):
    """Models of the interpolation path.

    scales[k] maps a dilated 3x3 neighbourhood to 2**k * width features,
    fuse maps the stacked responses to the appearance map, projections
    are bias-free (M_Q, M_K, M_V), mask gives the occlusion mask and
    refine_net the residual correction.
    """
    PARTS = ('scale0', 'scale1', 'scale2', 'fuse', 'proj_q', 'proj_k',
             'proj_v', 'mask', 'refine')

    def __init__(self, parts, window=9, sharpness=1000.0):
        self.scales = [parts['scale%d' % k] for k in range(N_SCALES)]
        self.fuse = parts['fuse']
        self.proj = [parts['proj_q'], parts['proj_k'], parts['proj_v']]
        self.mask = parts['mask']
        self.refine_net = parts['refine']
        self.window = int(window)
        self.sharpness = float(sharpness)

    @classmethod
    def create(cls, channels=3, width=16, refine_hidden=32, window=9,
               sharpness=1000.0, seed=0):
        parts = {}
        for k in range(N_SCALES):
            parts['scale%d' % k] = MlpModel(
                [9 * channels, 2 ** k * width], 'tanh', 'tanh',
                trial_seed(seed, k))
            # biases on so flat regions still carry a direction
            b = np.random.default_rng(trial_seed(seed, k, 1)).uniform(
                -0.5, 0.5, 2 ** k * width)
            parts['scale%d' % k].biases[0] = b
        stacked = sum(2 ** k for k in range(N_SCALES)) * width
        parts['fuse'] = MlpModel([stacked, width], 'identity', 'identity',
                                 trial_seed(seed, N_SCALES))
        parts['fuse'].biases[0] = np.random.default_rng(
            trial_seed(seed, N_SCALES, 1)).uniform(-0.1, 0.1, width)
        qk = np.sqrt(sharpness * np.sqrt(width))
        for name, scale in (('proj_q', qk), ('proj_k', qk), ('proj_v', 1.0)):
            m = MlpModel([width, width], 'identity', 'identity', 0)
            m.set_parameters([scale * np.eye(width), np.zeros(width)])
            parts[name] = m
        mask = MlpModel([2 * width + 1, 1], 'identity', 'sigmoid', 0)
        mask.set_parameters([np.zeros((2 * width + 1, 1)), np.zeros(1)])
        parts['mask'] = mask
        ref = MlpModel([channels + 2 * width, refine_hidden, refine_hidden,
                        channels], 'tanh', 'identity',
                       trial_seed(seed, N_SCALES + 1))
        params = ref.parameters()
        params[-2] = np.zeros_like(params[-2])
        params[-1] = np.zeros_like(params[-1])
        ref.set_parameters(params)
        parts['refine'] = ref
        return cls(parts, window, sharpness)

    def parts(self):
        models = list(self.scales) + [self.fuse] + list(self.proj) + \
            [self.mask, self.refine_net]
        return dict(zip(self.PARTS, models))

    def copy(self):
        return Interpolator(dict((k, m.copy()) for k, m in self.parts().items()),
                            self.window, self.sharpness)

    @property
    def width(self):
        return self.fuse.output_width

    def projections(self):
        return tuple(m.weights[0] for m in self.proj)

    def appearance(self, frame):
        x = as_array(frame) / PIXEL_MAX - 0.5
        responses = [forward(layer, _neighbourhood(x, 2 ** k))
                     for k, layer in enumerate(self.scales)]
        levels = [r[::2 ** k, ::2 ** k] for k, r in enumerate(responses)]
        a = forward(self.fuse, np.concatenate(responses, axis=2))
        a = a / np.maximum(np.linalg.norm(a, axis=2, keepdims=True), 1e-12)
        return AppearanceFeatures(levels, a)

    def effective_window(self, shape):
        limit = min(shape[0], shape[1])
        if limit % 2 == 0:
            limit -= 1
        return min(self.window, limit)

    def gap_geometry(self, x_i, x_j):
        "symmetric motion between two keyframes and the attended features"
        a_i = self.appearance(x_i).fused
        a_j = self.appearance(x_j).fused
        window = self.effective_window(a_i.shape)
        proj = self.projections()
        a_ij, s_ij = interframe_attention(a_i, a_j, window, proj)
        a_ji, s_ji = interframe_attention(a_j, a_i, window, proj)
        m = 0.5 * (motion_vector(s_ij) - motion_vector(s_ji))
        return GapGeometry(m, a_ij, a_ji)

    def synthesis_inputs(self, x_i, x_j, geom, delta, gap):
        flow_i = -scale_motion(geom.motion, delta, gap)
        flow_j = scale_motion(geom.motion, gap - delta, gap)
        warp_i = backward_warp(x_i, flow_i)
        warp_j = backward_warp(x_j, flow_j)
        h, w = warp_i.shape[:2]
        tfeat = np.full((h, w, 1), float(delta) / gap)
        mask_in = np.concatenate([geom.a_ij, geom.a_ji, tfeat], axis=2)
        low = self.appearance(0.5 * (warp_i + warp_j)).levels[0]
        app = 0.5 * (geom.a_ij + geom.a_ji)
        return SynthesisInputs(warp_i, warp_j, mask_in, low, app)

    def synthesize_from(self, inp):
        o = forward(self.mask, inp.mask_in)
        fused = o * inp.warp_i + (1.0 - o) * inp.warp_j
        return refine(fused, inp.low, inp.app, self.refine_net)

    def synthesize(self, x_i, x_j, delta, gap, geom=None):
        if geom is None:
            geom = self.gap_geometry(x_i, x_j)
        return self.synthesize_from(
            self.synthesis_inputs(x_i, x_j, geom, delta, gap))

    def loss_and_grads(self, inp, target):
        """Unit-scale pixel MSE of the synthesized frame and its gradients
        for the mask and refine models."""
        o = forward(self.mask, inp.mask_in)
        fused = o * inp.warp_i + (1.0 - o) * inp.warp_j
        r_in = refine_inputs(fused, inp.low, inp.app)
        out = fused + PIXEL_MAX * forward(self.refine_net, r_in)
        inside = (out >= 0.0) & (out <= PIXEL_MAX)
        out = np.clip(out, 0.0, PIXEL_MAX)
        diff = (out - as_array(target)) / PIXEL_MAX
        loss = float(np.mean(diff * diff))
        up = np.where(inside, 2.0 * diff / diff.size / PIXEL_MAX, 0.0)
        g_ref, g_in = backward(self.refine_net, r_in, PIXEL_MAX * up)
        c = fused.shape[2]
        d_fused = up + g_in[:, :, :c] / PIXEL_MAX
        d_o = np.sum(d_fused * (inp.warp_i - inp.warp_j), axis=2, keepdims=True)
        g_mask, _ = backward(self.mask, inp.mask_in, d_o)
        return loss, g_mask, g_ref


def interpolate_frames(keyframes, indices, F, interp):
    "float (F, H, W, C) video with keyframes placed verbatim"
    keyframes = as_array(keyframes)
    indices = [int(i) for i in indices]
    if len(indices) < 2:
        raise ParameterError('interpolation needs at least two keyframes')
    if len(keyframes) != len(indices):
        raise ShapeError('keyframes/indices', (len(keyframes), ),
                         (len(indices), ))
    if any(b <= a for a, b in zip(indices[:-1], indices[1:])):
        raise ParameterError('keyframe indices must increase: %r' % (indices, ))
    if indices[0] != 0 or indices[-1] != F - 1:
        raise ParameterError('keyframes must cover frames 0 and %d: %r' % (
            F - 1, indices))
    out = np.empty((F, ) + keyframes.shape[1:])
    for pos, i in enumerate(indices):
        out[i] = keyframes[pos]
    for pos in range(len(indices) - 1):
        a, b = indices[pos], indices[pos + 1]
        gap = b - a
        if gap < 2:
            continue
        geom = interp.gap_geometry(keyframes[pos], keyframes[pos + 1])
        for delta in range(1, gap):
            out[a + delta] = interp.synthesize(
                keyframes[pos], keyframes[pos + 1], delta, gap, geom)
    DEBUG_OUTPUT('interpolate', indices, 'F', F)
    return out


def interpolate_video(keyframes, indices, F, interp):
    return FrameSequence.from_float(
        interpolate_frames(keyframes, indices, F, interp))


def triplet_samples(clips, rng, limit=None):
    "(x_i, x_{i+1}, x_{i+2}) float triplets, optionally subsampled"
    triplets = []
    for clip in clips:
        x = clip.to_float()
        for i in range(len(x) - 2):
            triplets.append((x[i], x[i + 1], x[i + 2]))
    if limit is not None and len(triplets) > limit:
        keep = np.sort(rng.choice(len(triplets), size=limit, replace=False))
        triplets = [triplets[i] for i in keep]
    return triplets


def interpolation_loss(interp, samples):
    return float(np.mean([interp.loss_and_grads(inp, target)[0]
                          for inp, target in samples]))


def train_interpolator(interp, clips, cfg, rng, limit=128):
    """Fit the mask and refine models on middle frames of 3-frame windows.

    The appearance extractor and projections stay fixed.  The returned
    copy never has a higher training loss than the input.
    Returns (interpolator, loss_before, loss_after).
    """
    samples = []
    for x0, x1, x2 in triplet_samples(clips, rng, limit):
        geom = interp.gap_geometry(x0, x2)
        samples.append((interp.synthesis_inputs(x0, x2, geom, 1, 2), x1))
    if not samples:
        raise ParameterError('no 3-frame windows to train on')
    before = interpolation_loss(interp, samples)
    trained = interp.copy()

    def step(i):
        batch = rng.integers(0, len(samples), size=min(cfg.batch_size,
                                                       len(samples)))
        loss = 0.0
        g_mask = trained.mask.zeros_like_params()
        g_ref = trained.refine_net.zeros_like_params()
        for b in batch:
            l, gm, gr = trained.loss_and_grads(*samples[b])
            loss += l
            g_mask = add_grads(g_mask, gm)
            g_ref = add_grads(g_ref, gr)
        c = 1.0 / len(batch)
        return loss * c, [scale_grads(g_mask, c), scale_grads(g_ref, c)]

    train_loop([trained.mask, trained.refine_net], step, cfg, 'interp')
    after = interpolation_loss(trained, samples)
    DEBUG_OUTPUT('train_interpolator', 'before', before, 'after', after)
    if after > before:
        return interp.copy(), before, before
    return trained, before, after
