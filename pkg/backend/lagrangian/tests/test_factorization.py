import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose
from scipy import linalg

from lagrangian.algebra import CH2, CP2, dagger
from lagrangian.exceptions import FactorizationError
from lagrangian.factorization import (
    birkhoff, birkhoff_samples, block_toeplitz, iwasawa_samples, loop_iwasawa,
    normalize_constant_term, pointwise_iwasawa_sl3, qr_positive, resolution_levels,
)
from lagrangian.loops import LoopSpec, TwistedGroupLoop, constant_loop, identity_loop
from lagrangian.sampling import (
    birkhoff_fixture, iwasawa_fixture, off_big_cell_loop, random_plus_loop, random_unitary_loop,
)

SPEC = LoopSpec(N=64, K=15)
SCALE = 0.05
entries = st.floats(min_value=-1, max_value=1, allow_nan=False)


class QRPositiveTests(SimpleTestCase):
    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (3, 3), elements=entries), arrays(np.float64, (3, 3), elements=entries))
    def test_unique_gauge(self, re, im):
        A = 3 * np.eye(3) + re + 1j * im
        Q, R = qr_positive(A)
        assert_allclose(Q @ R, A, atol=1e-12)
        assert_allclose(dagger(Q) @ Q, np.eye(3), atol=1e-12)
        assert_allclose(np.tril(R, -1), 0, atol=1e-14)
        diagonal = np.diagonal(R)
        assert_allclose(diagonal.imag, 0, atol=1e-14)
        self.assertTrue(np.all(diagonal.real > 0))

    def test_pointwise_split_needs_determinant_one(self):
        with self.assertRaises(FactorizationError):
            pointwise_iwasawa_sl3(2 * np.eye(3))
        u, b = pointwise_iwasawa_sl3(np.eye(3))
        assert_allclose(u, np.eye(3), atol=1e-15)


class ToeplitzTests(SimpleTestCase):
    def test_blocks_follow_mode_differences(self):
        N = 8
        spectrum = np.zeros((N, 1, 1), dtype=complex)
        spectrum[1] = 2.0
        spectrum[N - 1] = 3.0
        T = block_toeplitz(spectrum, [0, 1, 2], [0, 1, 2])
        assert_allclose(T, [[0, 3, 0], [2, 0, 3], [0, 2, 0]])


class IwasawaTests(SimpleTestCase):
    def test_recovers_synthesized_factors(self):
        rng = np.random.default_rng(0)
        unitary, plus, phi = iwasawa_fixture(rng, CP2, SPEC.N, 6, SCALE)
        result = loop_iwasawa(phi, SPEC)
        self.assertTrue(result.converged)
        self.assertLess(result.unitary_factor.distance(unitary), 1e-8)
        self.assertLess(result.positive_factor.distance(plus), 1e-8)
        self.assertLess(result.unitary_factor.twisting_residual(), 1e-8)
        report = result.report(SPEC.tol_unitary)
        self.assertTrue(report.passed, [c.line() for c in report.failures])
        self.assertIn('iwasawa_resolution_gap', report)

    def test_unitary_loop_is_its_own_factor(self):
        F = random_unitary_loop(np.random.default_rng(1), CP2, SPEC.N, scale=SCALE)
        result = loop_iwasawa(F, SPEC)
        self.assertLess(result.unitary_factor.distance(F), 1e-10)
        self.assertLess(result.positive_factor.distance(identity_loop(CP2, SPEC.N)), 1e-10)

    def test_raw_samples(self):
        plus = random_plus_loop(np.random.default_rng(2), CP2, SPEC.N, scale=SCALE, batch=(2, 2))
        result = iwasawa_samples(plus.samples, CP2, SPEC)
        self.assertEqual(result.unitary_factor.batch_shape, (2, 2))
        self.assertLess(result.unitary_factor.distance(identity_loop(CP2, SPEC.N, (2, 2))), 1e-9)

    def test_non_compact_case_is_refused(self):
        with self.assertRaises(FactorizationError):
            loop_iwasawa(identity_loop(CH2, SPEC.N), SPEC)

    def test_singular_loop_lists_nodes(self):
        samples = np.broadcast_to(np.eye(3, dtype=complex), (2, SPEC.N, 3, 3)).copy()
        samples[1] = 0
        with self.assertRaises(FactorizationError) as caught:
            loop_iwasawa(TwistedGroupLoop(samples, CP2), SPEC)
        self.assertEqual(caught.exception.nodes, [(1,)])

    def test_normalized_constant_term(self):
        rng = np.random.default_rng(3)
        _, _, phi = iwasawa_fixture(rng, CP2, SPEC.N, 1, SCALE)
        M = np.eye(3) + 0.3 * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
        samples = phi.samples[0]
        F, B = normalize_constant_term(samples @ np.linalg.inv(M), np.broadcast_to(M, samples.shape))
        B0 = np.mean(B, axis=-3)
        assert_allclose(np.tril(B0, -1), 0, atol=1e-12)
        self.assertTrue(np.all(np.diagonal(B0).real > 0))
        assert_allclose(F @ B, samples, atol=1e-12)


class BirkhoffTests(SimpleTestCase):
    def test_recovers_synthesized_factors(self):
        minus, plus, phi = birkhoff_fixture(np.random.default_rng(4), CP2, SPEC.N, 6, SCALE)
        split = birkhoff(phi, SPEC)
        self.assertTrue(split.all_big_cell)
        self.assertEqual(split.misses, [])
        self.assertLess(split.minus_factor.distance(minus), 1e-8)
        self.assertLess(split.plus_factor.distance(plus), 1e-8)
        self.assertTrue(split.report(SPEC.tol_unitary).passed)

    def test_minus_factor_is_one_at_infinity(self):
        _, _, phi = birkhoff_fixture(np.random.default_rng(5), CP2, SPEC.N, 1, SCALE)
        split = birkhoff(phi, SPEC)
        assert_allclose(np.mean(split.minus_factor.samples, axis=-3)[0], np.eye(3), atol=1e-8)

    def test_off_big_cell_is_data(self):
        split = birkhoff(off_big_cell_loop(SPEC.N), SPEC)
        self.assertFalse(split.all_big_cell)
        self.assertTrue(np.all(np.isnan(split.plus_factor.samples)))

    def test_mixed_batch_reports_misses(self):
        good = constant_loop(CP2, np.eye(3), SPEC.N).samples
        samples = np.stack([good, off_big_cell_loop(SPEC.N).samples])
        split = birkhoff_samples(samples, CP2, SPEC)
        self.assertEqual(split.misses, [(1,)])
        assert_allclose(split.plus_factor.samples[0], good, atol=1e-12)


def k0_element(rng):
    """Random constant in SU(2) + 1, the subgroup fixing e3."""
    x = rng.normal(size=3)
    block = 1j * np.array([[x[2], x[0] - 1j * x[1]], [x[0] + 1j * x[1], -x[2]]])
    k = np.eye(3, dtype=complex)
    k[:2, :2] = linalg.expm(block)
    return k


class ResolutionTests(SimpleTestCase):
    def test_levels_double_the_cap_and_resample(self):
        self.assertEqual(resolution_levels(15, 64), [(15, 64), (30, 128), (60, 256), (120, 512)])
        self.assertEqual(resolution_levels(3, 64, doublings=1), [(3, 64), (6, 64)])

    def test_iwasawa_across_scales_and_seeds(self):
        for scale in (0.05, 0.3, 0.6):
            for seed in range(3):
                with self.subTest(scale=scale, seed=seed):
                    unitary, plus, phi = iwasawa_fixture(np.random.default_rng(seed), CP2, SPEC.N, 3, scale)
                    result = loop_iwasawa(phi, SPEC)
                    self.assertTrue(result.converged)
                    self.assertFalse(result.under_resolved)
                    self.assertLess(result.unitary_factor.distance(unitary), 1e-8)
                    self.assertLess(result.positive_factor.distance(plus), 1e-8)
                    report = result.report(SPEC.tol_unitary)
                    self.assertTrue(report.passed, [c.line() for c in report.failures])

    def test_single_cap_is_worse_on_large_loops(self):
        unitary, _, phi = iwasawa_fixture(np.random.default_rng(7), CP2, SPEC.N, 3, 0.6)
        adaptive = loop_iwasawa(phi, SPEC)
        single = loop_iwasawa(phi, SPEC, strict=False, check_resolution=False)
        self.assertEqual(single.max_fourier_cap, SPEC.K)
        self.assertGreater(adaptive.max_fourier_cap, SPEC.K)
        self.assertLess(adaptive.unitary_factor.distance(unitary), single.unitary_factor.distance(unitary))

    def test_constant_gauge_moves_into_the_unitary_factor(self):
        rng = np.random.default_rng(8)
        unitary, plus, _ = iwasawa_fixture(rng, CP2, SPEC.N, 2, 0.3)
        k = k0_element(rng)
        phi = TwistedGroupLoop(unitary.samples @ k @ plus.samples, CP2)
        result = loop_iwasawa(phi, SPEC)
        self.assertLess(result.unitary_factor.distance(TwistedGroupLoop(unitary.samples @ k, CP2)), 1e-8)
        self.assertLess(result.positive_factor.distance(plus), 1e-8)

    def test_unsettled_iwasawa_is_flagged(self):
        tight = LoopSpec(N=64, K=15, tol_unitary=1e-18)
        _, _, phi = iwasawa_fixture(np.random.default_rng(9), CP2, tight.N, 2, SCALE)
        result = loop_iwasawa(phi, tight, strict=False)
        self.assertTrue(result.under_resolved)
        self.assertFalse(result.converged)
        self.assertEqual(result.max_fourier_cap, 120)
        with self.assertRaises(FactorizationError) as caught:
            loop_iwasawa(phi, tight)
        self.assertEqual(caught.exception.nodes, [(0,), (1,)])

    def test_birkhoff_across_scales(self):
        for scale in (0.05, 0.3, 0.6):
            with self.subTest(scale=scale):
                minus, plus, phi = birkhoff_fixture(np.random.default_rng(10), CP2, SPEC.N, 3, scale)
                split = birkhoff(phi, SPEC)
                self.assertEqual(split.misses, [])
                self.assertEqual(split.unresolved, [])
                self.assertLess(split.minus_factor.distance(minus), 1e-8)
                self.assertLess(split.plus_factor.distance(plus), 1e-8)
                report = split.report(SPEC.tol_unitary)
                self.assertIn('birkhoff_unresolved', report)
                self.assertTrue(report.passed, [c.line() for c in report.failures])

    def test_unsettled_birkhoff_fails_the_report(self):
        tight = LoopSpec(N=64, K=15, tol_unitary=1e-18)
        _, _, phi = birkhoff_fixture(np.random.default_rng(11), CP2, tight.N, 2, SCALE)
        split = birkhoff(phi, tight)
        self.assertTrue(split.under_resolved)
        self.assertEqual(split.unresolved, [(0,), (1,)])
        report = split.report(tight.tol_unitary)
        self.assertIn('birkhoff_unresolved', [c.name for c in report.failures])
