import unittest

import numpy as np

from sdgsc import ParameterError, ShapeError
from sdgsc.dataset import square_clip
from sdgsc.decoder import (
    DecoderNet, keyframe_latents, reconstruct_keyframes, interframe_attention,
    window_offsets, coordinate_map, motion_vector, scale_motion,
    backward_warp, warp_fuse, refine, Interpolator, interpolate_frames,
    interpolate_video, train_interpolator, triplet_samples, interpolation_loss,
    decoder_loss_and_grads, train_decoder_step,
)
from sdgsc.encoder import KeyframePlan, SparseDiff, encode_plan_payload
from sdgsc.ndnet import MlpModel, SgdConfig
from sdgsc.tests.base import TestBase


def brute_attention(a_i, a_j, window, projections):
    m_q, m_k, m_v = projections
    h, w, c = a_i.shape
    r = window // 2
    out = np.empty_like(a_i)
    s = np.empty((h, w, window * window))
    for y in range(h):
        for x in range(w):
            q = a_i[y, x] @ m_q
            logits, values = [], []
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    logits.append(q @ (a_j[yy, xx] @ m_k) / np.sqrt(c))
                    values.append(a_j[yy, xx] @ m_v)
            e = np.exp(np.array(logits) - max(logits))
            s[y, x] = e / e.sum()
            out[y, x] = a_i[y, x] + s[y, x] @ np.array(values)
    return out, s


def brute_motion(s):
    h, w, n = s.shape
    window = int(round(np.sqrt(n)))
    r = window // 2
    m = np.zeros((h, w, 2))
    for y in range(h):
        for x in range(w):
            k = 0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    m[y, x] += s[y, x, k] * np.array([yy - y, xx - x])
                    k += 1
    return m


def centroid(frame, level):
    weight = np.abs(frame - level).sum(axis=2)
    rows, cols = np.mgrid[0:frame.shape[0], 0:frame.shape[1]]
    total = weight.sum()
    return (weight * rows).sum() / total, (weight * cols).sum() / total


class TestKeyframes(TestBase):
    def test_decoder_range(self):
        dec = DecoderNet.create(6, (4, 4, 3), hidden=16, seed=1)
        out = dec.decode(10.0 * self.rng.standard_normal((5, 6)))
        self.assertEqual(out.shape, (5, 4, 4, 3))
        self.assertTrue(np.all((out >= 0.0) & (out <= 255.0)))
        self.assertRaises(ParameterError, DecoderNet,
                          MlpModel([6, 48], 'tanh', 'identity'), (4, 4, 3))
        self.assertRaises(ShapeError, DecoderNet,
                          MlpModel([6, 47], 'tanh', 'sigmoid'), (4, 4, 3))

    def plan(self, base, diffs):
        return KeyframePlan(tuple(range(len(diffs) + 1)), None, base,
                            tuple(diffs), 2, 0 if base is None else len(base), 0.0, 0.0, 1.0)

    def test_zero_residual(self):
        base = self.rng.standard_normal(6)
        zero = SparseDiff(0, np.array([1, 4]), np.zeros(2), 2, 6)
        lat = keyframe_latents(self.plan(base, [zero, zero]))
        self.assertBitEqual(lat[1], base)
        self.assertBitEqual(lat[2], base)

    def test_accumulates(self):
        mu = self.rng.standard_normal((3, 6))
        base, diffs = encode_plan_payload(mu, (0, 1, 2), 6)
        self.assertAllClose(keyframe_latents(self.plan(base, diffs)), mu,
                            atol=1e-12)
        dec = DecoderNet.create(6, (2, 2, 3), hidden=8)
        self.assertEqual(reconstruct_keyframes(self.plan(base, diffs),
                                               dec).shape, (3, 2, 2, 3))

    def test_missing_base(self):
        self.assertRaises(ParameterError, keyframe_latents,
                          self.plan(None, []))

    def test_decoder_step(self):
        dec = DecoderNet.create(4, (2, 2, 3), hidden=8, seed=2)
        z = self.rng.standard_normal((5, 4))
        frames = self.rng.uniform(0.0, 255.0, (5, 2, 2, 3))
        before = dec.model.copy()
        loss = train_decoder_step(dec, z, frames, SgdConfig(0.0))
        self.assertEqual(loss, decoder_loss_and_grads(dec, z, frames)[0])
        self.assertTrue(dec.model.same_parameters(before))
        cfg = SgdConfig(1.0)
        for i in range(300):
            train_decoder_step(dec, z, frames, cfg)
        self.assertLess(decoder_loss_and_grads(dec, z, frames)[0], loss)


class TestAttention(TestBase):
    def projections(self, c):
        return tuple(self.rng.standard_normal((c, c)) for _ in range(3))

    def test_rows_sum_to_one(self):
        a_i = self.rng.standard_normal((6, 5, 4))
        a_j = self.rng.standard_normal((6, 5, 4))
        _, s = interframe_attention(a_i, a_j, 3, self.projections(4))
        self.assertEqual(s.shape, (6, 5, 9))
        self.assertAllClose(s.sum(axis=2), np.ones((6, 5)), atol=1e-12)

    def test_constant_keys_uniform(self):
        a_i = self.rng.standard_normal((5, 5, 3))
        a_j = np.ones((5, 5, 3))
        _, s = interframe_attention(a_i, a_j, 5, self.projections(3))
        self.assertAllClose(s, np.full((5, 5, 25), 1.0 / 25), atol=1e-15)

    def test_against_loops(self):
        a_i = self.rng.standard_normal((4, 4, 3))
        a_j = self.rng.standard_normal((4, 4, 3))
        proj = self.projections(3)
        out, s = interframe_attention(a_i, a_j, 3, proj)
        ref_out, ref_s = brute_attention(a_i, a_j, 3, proj)
        self.assertAllClose(s, ref_s)
        self.assertAllClose(out, ref_out)

    def test_window_checks(self):
        a = self.rng.standard_normal((4, 4, 2))
        proj = self.projections(2)
        self.assertRaises(ParameterError, interframe_attention, a, a, 5, proj)
        self.assertRaises(ParameterError, interframe_attention, a, a, 2, proj)
        self.assertRaises(ShapeError, interframe_attention, a,
                          np.zeros((4, 3, 2)), 3, proj)


class TestMotion(TestBase):
    def test_uniform_is_still(self):
        s = np.full((5, 6, 9), 1.0 / 9)
        m = motion_vector(s)
        self.assertAllClose(m[1:-1, 1:-1], np.zeros((3, 4, 2)), atol=1e-12)
        # clamped neighbours pull border motion inwards
        self.assertAllClose(m[0, 0], [1.0 / 3, 1.0 / 3], atol=1e-12)
        self.assertAllClose(m[4, 5], [-1.0 / 3, -1.0 / 3], atol=1e-12)

    def test_point_mass(self):
        s = np.zeros((3, 3, 9))
        offsets = window_offsets(3)
        k = int(np.flatnonzero((offsets == [1.0, 0.0]).all(axis=1))[0])
        s[:, :, k] = 1.0
        m = motion_vector(s)
        self.assertBitEqual(m[:2], np.tile([1.0, 0.0], (2, 3, 1)))
        self.assertBitEqual(m[2], np.zeros((3, 2)))

    def test_against_loops(self):
        logits = self.rng.standard_normal((4, 5, 25))
        s = np.exp(logits) / np.exp(logits).sum(axis=2, keepdims=True)
        self.assertAllClose(motion_vector(s), brute_motion(s), atol=1e-12)
        self.assertEqual(coordinate_map(4, 5)[3, 2].tolist(), [3.0, 2.0])

    def test_bad_rows(self):
        self.assertRaises(ShapeError, motion_vector, np.ones((2, 2, 8)))

    def test_scale(self):
        m = self.rng.standard_normal((3, 3, 2))
        self.assertBitEqual(scale_motion(m, 1, 2), 0.5 * m)
        self.assertBitEqual(scale_motion(m, 1, 4), 0.25 * m)
        self.assertAllClose(scale_motion(3.0 * m, 1, 3),
                            3.0 * scale_motion(m, 1, 3), atol=1e-12)
        for delta, gap in ((0, 2), (2, 2), (3, 2)):
            self.assertRaises(ParameterError, scale_motion, m, delta, gap)


class TestWarp(TestBase):
    def frames(self):
        return (255.0 * self.rng.random((5, 6, 3)),
                255.0 * self.rng.random((5, 6, 3)))

    def test_zero_flow(self):
        x_i, x_j = self.frames()
        zero = np.zeros((5, 6, 2))
        self.assertAllClose(warp_fuse(x_i, x_j, (zero, zero), np.ones((5, 6))),
                            x_i, atol=1e-9)
        self.assertAllClose(warp_fuse(x_i, x_j, (zero, zero), np.zeros((5, 6))),
                            x_j, atol=1e-9)

    def test_equal_inputs(self):
        x, _ = self.frames()
        zero = np.zeros((5, 6, 2))
        mask = self.rng.random((5, 6))
        self.assertAllClose(warp_fuse(x, x, (zero, zero), mask), x, atol=1e-9)

    def test_integer_shift(self):
        x, _ = self.frames()
        flow = np.zeros((5, 6, 2))
        flow[:, :, 1] = 1.0
        out = backward_warp(x, flow)
        self.assertAllClose(out[:, :-1], x[:, 1:], atol=1e-9)
        self.assertAllClose(out[:, -1], x[:, -1], atol=1e-9)

    def test_refine(self):
        interp = Interpolator.create(width=4, refine_hidden=8, window=3)
        frame = 255.0 * self.rng.random((4, 4, 3))
        low = self.rng.standard_normal((4, 4, 4))
        app = self.rng.standard_normal((4, 4, 4))
        self.assertBitEqual(refine(frame, low, app, interp.refine_net), frame)
        net = interp.refine_net.copy()
        net.biases[-1] = np.array([10.0, -10.0, 0.0])
        out = refine(frame, low, app, net)
        self.assertTrue(np.all((out >= 0.0) & (out <= 255.0)))
        self.assertTrue(np.all(out[:, :, 0] == 255.0))


class TestInterpolation(TestBase):
    def test_static_scene(self):
        frame = 255.0 * self.rng.random((12, 12, 3))
        interp = Interpolator.create(width=8, window=5, seed=3)
        out = interpolate_frames(np.stack([frame, frame]), [0, 4], 5, interp)
        for f in range(5):
            self.assertAllClose(out[f], frame, atol=1e-5)

    def test_all_keyframes(self):
        keys = 255.0 * self.rng.random((4, 6, 6, 3))
        out = interpolate_frames(keys, [0, 1, 2, 3], 4,
                                 Interpolator.create(width=4, window=3))
        self.assertBitEqual(out, keys)

    def test_bad_plans(self):
        interp = Interpolator.create(width=4, window=3)
        keys = np.zeros((2, 6, 6, 3))
        self.assertRaises(ParameterError, interpolate_frames, keys[:1], [0], 1,
                          interp)
        self.assertRaises(ParameterError, interpolate_frames, keys, [0, 3], 5,
                          interp)
        self.assertRaises(ParameterError, interpolate_frames, keys, [2, 1], 3,
                          interp)
        self.assertRaises(ShapeError, interpolate_frames, keys, [0, 2, 4], 5,
                          interp)

    def test_translating_square(self):
        # the square path is symmetric about the image centre
        clip = square_clip(5, 32, 32, 6, (13, 9), (0, 2))
        x = clip.to_float()
        interp = Interpolator.create(width=16, window=21, seed=0)
        out = interpolate_frames(x[[0, 4]], [0, 4], 5, interp)
        row, col = centroid(out[2], 20.0)
        true_row, true_col = centroid(x[2], 20.0)
        self.assertAlmostEqual(true_col, 15.5)
        self.assertLess(abs(row - true_row), 1.0)
        self.assertLess(abs(col - true_col), 1.0)
        video = interpolate_video(x[[0, 4]], [0, 4], 5, interp)
        self.assertEqual(video.F, 5)
        self.assertEqual(video.pixels[0].tolist(), clip.pixels[0].tolist())

    def test_training_never_regresses(self):
        clips = [square_clip(4, 12, 12, 3, (4, 2), (0, 1 + i))
                 for i in range(2)]
        interp = Interpolator.create(width=4, refine_hidden=8, window=5,
                                     seed=1)
        trained, before, after = train_interpolator(
            interp, clips, SgdConfig(lr=0.01, max_steps=5, batch_size=2),
            self.rng)
        self.assertLessEqual(after, before)
        for k in ('scale0', 'scale1', 'scale2', 'fuse', 'proj_q'):
            self.assertTrue(trained.parts()[k].same_parameters(
                interp.parts()[k]))
        self.assertRaises(ParameterError, train_interpolator, interp,
                          [square_clip(2, 12, 12, 3, (4, 2), (0, 1))],
                          SgdConfig(), self.rng)

    def test_refine_ablation(self):
        def clips(rows):
            return [square_clip(4, 12, 12, 3, (r, 2), (0, 1)) for r in rows]

        def samples(interp, rows):
            out = []
            for x0, x1, x2 in triplet_samples(clips(rows), self.rng):
                geom = interp.gap_geometry(x0, x2)
                out.append((interp.synthesis_inputs(x0, x2, geom, 1, 2), x1))
            return out
        interp = Interpolator.create(width=4, refine_hidden=8, window=5,
                                     seed=2)
        trained, before, after = train_interpolator(
            interp, clips((2, 4, 6, 8)),
            SgdConfig(lr=0.01, max_steps=200, batch_size=4), self.rng)
        self.assertLess(after, before)
        ablated = trained.copy()
        params = ablated.refine_net.parameters()
        ablated.refine_net.set_parameters(
            params[:-2] + [np.zeros_like(p) for p in params[-2:]])
        held_out = samples(trained, (3, 5, 7))
        self.assertLess(interpolation_loss(trained, held_out),
                        interpolation_loss(ablated, held_out))


if __name__ == '__main__':
    unittest.main()
