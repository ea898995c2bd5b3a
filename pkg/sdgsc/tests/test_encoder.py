import itertools
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sdgsc import ParameterError, ShapeError, InfeasibleError
from sdgsc.channel import LinkBudget, ComputeTimeModel, comm_time, exec_time
from sdgsc.encoder import (
    FrameSequence, VariationalLatent, extract_features, cosine_diff,
    sparsify, densify, score_matrix, payload_dims, plan_time,
    encode_plan_payload, select_keyframes,
)
from sdgsc.ndnet import MlpModel
from sdgsc.tests.base import TestBase

# h^2/sigma2 = 3 gives R = 2B exactly; B=16 makes one SI element cost one
# second.
LINK = LinkBudget(16.0, 1.0)
H, SIGMA2 = 3.0, 3.0
NO_COMPUTE = ComputeTimeModel()

vectors = arrays(np.float64, 6, elements=st.floats(-10, 10, width=64))


def reference_greedy(mu, t_max, k, priority):
    F, d = mu.shape
    s = score_matrix(mu, k, priority)
    r = 2.0 * LINK.bandwidth_hz
    selected = [0, F - 1]
    candidates = list(range(1, F - 1))
    while candidates:
        totals = {}
        for i in candidates:
            total = 0.0
            for j in selected:
                total += s[i, j]
            totals[i] = total
        best = max(candidates, key=lambda i: (totals[i], -i))
        if plan_time(len(selected) + 1, d, k, r, NO_COMPUTE)[0] > t_max:
            break
        selected.append(best)
        candidates.remove(best)
    return tuple(sorted(selected))


class TestFrames(TestBase):
    def test_frame_sequence(self):
        self.assertRaises(ParameterError, FrameSequence,
                          np.zeros((1, 4, 4, 3), np.uint8))
        self.assertRaises(ParameterError, FrameSequence,
                          np.zeros((2, 4, 4, 3)))
        self.assertRaises(ShapeError, FrameSequence,
                          np.zeros((2, 4, 4, 1), np.uint8))
        x = FrameSequence.from_float(np.full((2, 2, 2, 3), 300.0))
        self.assertEqual(x.pixels.max(), 255)
        x = FrameSequence.from_float(np.full((2, 2, 2, 3), 2.5))
        self.assertEqual(x.pixels.max(), 2)

    def test_identical_frames_identical_features(self):
        frame = self.rng.integers(0, 256, (4, 4, 3), dtype=np.uint8)
        x = FrameSequence(np.stack([frame] * 3))
        lat = extract_features(x, MlpModel([48, 16, 8], seed=2))
        self.assertEqual(lat.mu.shape, (3, 4))
        self.assertEqual(lat.d, 4)
        self.assertAllClose(lat.mu[0], lat.mu[2], atol=1e-12)
        self.assertAllClose(lat.log_sigma[0], lat.log_sigma[1], atol=1e-12)

    def test_zero_weight_encoder(self):
        enc = MlpModel([48, 6], 'identity', 'identity')
        bias = np.arange(6.0)
        enc.set_parameters([np.zeros((48, 6)), bias])
        x = FrameSequence(self.rng.integers(0, 256, (2, 4, 4, 3),
                                            dtype=np.uint8))
        lat = extract_features(x, enc)
        self.assertBitEqual(lat.mu, np.tile(bias[:3], (2, 1)))
        self.assertBitEqual(lat.log_sigma, np.tile(bias[3:], (2, 1)))

    def test_encoder_width(self):
        x = FrameSequence(np.zeros((2, 4, 4, 3), np.uint8))
        self.assertRaises(ShapeError, extract_features, x, MlpModel([12, 4]))
        self.assertRaises(ParameterError, extract_features, x,
                          MlpModel([48, 5]))


class TestCosine(TestBase):
    def test_examples(self):
        a = np.array([1.0, 2.0, 3.0])
        self.assertAlmostEqual(cosine_diff(a, a), 0.0, places=12)
        self.assertAlmostEqual(cosine_diff([1.0, 0.0], [0.0, 1.0]), 1.0)
        self.assertAlmostEqual(cosine_diff(a, -a), 2.0, places=12)

    def test_zero_vector(self):
        with self.assertRaises(ParameterError) as cm:
            cosine_diff(np.zeros(3), np.ones(3), index=5)
        self.assertIn('frame 5', str(cm.exception))

    @given(vectors, vectors, st.floats(0.1, 100.0))
    @settings(max_examples=100, deadline=None)
    def test_symmetric_and_scale_invariant(self, a, b, c):
        if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
            return
        m = cosine_diff(a, b)
        self.assertTrue(0.0 <= m <= 2.0)
        self.assertAlmostEqual(m, cosine_diff(b, a), places=12)
        self.assertAlmostEqual(m, cosine_diff(c * a, b), places=9)


class TestSparsify(TestBase):
    def test_example(self):
        sd = sparsify(np.array([5.0, 0.1, -7.0, 0.0]), 2)
        self.assertEqual(list(sd.indices), [0, 2])
        self.assertEqual(list(sd.values), [5.0, -7.0])

    def test_full_is_lossless(self):
        r = self.rng.standard_normal(7)
        self.assertBitEqual(densify(sparsify(r, 7)), r)

    def test_bounds(self):
        self.assertRaises(ParameterError, sparsify, np.ones(3), 0)
        self.assertRaises(ParameterError, sparsify, np.ones(3), 4)

    def test_ties_prefer_lower_index(self):
        sd = sparsify(np.array([1.0, -1.0, 1.0]), 1)
        self.assertEqual(list(sd.indices), [0])
        sd = sparsify(np.array([0.5, -2.0, 2.0, 2.0]), 2)
        self.assertEqual(list(sd.indices), [1, 2])

    def test_best_k_approximation(self):
        for _ in range(20):
            r = self.rng.standard_normal(10)
            for k in (1, 3, 5):
                err = np.linalg.norm(r - densify(sparsify(r, k)))
                best = min(
                    np.linalg.norm(np.delete(r, list(keep)))
                    for keep in itertools.combinations(range(10), k))
                self.assertAlmostEqual(err, best, places=12)


class TestSelection(TestBase):
    def latents(self, mu):
        mu = np.asarray(mu, dtype=np.float64)
        return VariationalLatent(mu, np.zeros_like(mu))

    def select(self, mu, t_max, k=2, priority='sparse'):
        return select_keyframes(self.latents(mu), t_max, LINK, H, SIGMA2,
                                NO_COMPUTE, k, priority)

    def test_two_frames(self):
        plan = self.select(self.rng.standard_normal((2, 4)), 100.0)
        self.assertEqual(plan.indices, (0, 1))

    def test_endpoints_only(self):
        # d + 2k = 8 seconds for two keyframes, 12 for three
        mu = self.rng.standard_normal((6, 4))
        self.assertEqual(self.select(mu, 11.9).indices, (0, 5))
        self.assertEqual(self.select(mu, 8.0).indices, (0, 5))

    def test_outlier_frame_first(self):
        mu = np.tile([1.0, 1.0, 1.0, 1.0], (6, 1))
        mu += 0.01 * self.rng.standard_normal(mu.shape)
        mu[3] = [9.0, -9.0, 9.0, -9.0]
        plan = self.select(mu, 12.0)
        self.assertEqual(plan.indices, (0, 3, 5))
        self.assertEqual(plan.order, (0, 5, 3))

    def test_infeasible(self):
        with self.assertRaises(InfeasibleError) as cm:
            self.select(self.rng.standard_normal((4, 4)), 7.5)
        self.assertAlmostEqual(cm.exception.min_t_exe, 8.0)
        with self.assertRaises(InfeasibleError) as cm:
            select_keyframes(self.latents(np.ones((3, 4))), 100.0, LINK, 0.0,
                             SIGMA2, NO_COMPUTE, 2)
        self.assertEqual(cm.exception.min_t_exe, float('inf'))

    def test_bad_k(self):
        self.assertRaises(ParameterError, self.select, np.ones((3, 4)), 100.0,
                          k=5)

    def test_payload(self):
        plan = self.select(self.rng.standard_normal((5, 6)), 1000.0, k=2)
        self.assertEqual(plan.indices, (0, 1, 2, 3, 4))
        self.assertEqual(payload_dims(plan), [6, 4, 4, 4, 4])
        self.assertEqual(len(plan.diffs), 4)
        self.assertEqual(plan.t_exe, exec_time(
            NO_COMPUTE, comm_time(payload_dims(plan), plan.rate)))

    def test_matches_reference(self):
        for n in range(1000):
            F = int(self.rng.integers(2, 9))
            d = int(self.rng.integers(4, 9))
            k = int(self.rng.integers(1, d + 1))
            priority = ('sparse', 'cosine')[n % 2]
            mu = self.rng.standard_normal((F, d))
            # budgets between the endpoint cost and the full plan
            extra = int(self.rng.integers(0, F))
            t_max = d + 2 * k * (1 + extra) + 0.5
            plan = self.select(mu, t_max, k, priority)
            self.assertEqual(plan.indices,
                             reference_greedy(mu, t_max, k, priority),
                             'instance %d' % (n, ))
            self.assertLessEqual(plan.t_exe, t_max)
            self.assertEqual(plan.indices[0], 0)
            self.assertEqual(plan.indices[-1], F - 1)

    def test_budget_monotone(self):
        for _ in range(50):
            mu = self.rng.standard_normal((8, 5))
            plans = [self.select(mu, 5 + 4 * n + 0.5).indices
                     for n in range(1, 8)]
            for smaller, larger in zip(plans, plans[1:]):
                self.assertLessEqual(len(smaller), len(larger))
                self.assertTrue(set(smaller) <= set(larger))

    def test_closed_loop_residuals(self):
        mu = self.rng.standard_normal((4, 6))
        base, diffs = encode_plan_payload(mu, (0, 1, 2, 3), 6)
        recon = base
        for sd, i in zip(diffs, (1, 2, 3)):
            recon = recon + densify(sd)
            self.assertAllClose(recon, mu[i], atol=1e-12)
        base, diffs = encode_plan_payload(mu, (0, 3), 2)
        self.assertEqual(diffs[0].base, 0)
        self.assertEqual(diffs[0].k, 2)


if __name__ == '__main__':
    unittest.main()
