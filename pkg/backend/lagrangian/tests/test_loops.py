import numpy as np
from django.conf import settings as django_settings
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from lagrangian.algebra import CP2, CP1xCP1, S5
from lagrangian.exceptions import LoopError
from lagrangian.loops import (
    LoopSpec, TwistedAlgebraLoop, TwistedGroupLoop, constant_loop, eval_loop, exp_loop,
    fourier_coeffs, hs_norm, identity_loop, lambda_grid, loop_inverse, loop_multiply,
    quarter_rotation_residual, resample,
)
from lagrangian.sampling import random_real_loop, random_twisted

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


class LoopSpecTests(SimpleTestCase):
    def test_defaults_are_consistent(self):
        spec = LoopSpec()
        self.assertEqual(spec.N % 4, 0)
        self.assertGreaterEqual(spec.N, 4 * (spec.K + 1))

    def test_rejects_sample_count_not_divisible_by_four(self):
        with self.assertRaises(LoopError):
            LoopSpec(N=30, K=3)

    def test_rejects_under_resolved_cap(self):
        with self.assertRaises(LoopError):
            LoopSpec(N=32, K=8)

    def test_rejects_non_positive_tolerance(self):
        with self.assertRaises(LoopError):
            LoopSpec(N=32, K=3, tol_unitary=0)

    def test_overrides_win_over_settings(self):
        spec = LoopSpec.from_settings(django_settings.HSLAG, N=32, K=None)
        self.assertEqual(spec.N, 32)
        self.assertEqual(spec.K, django_settings.HSLAG['FOURIER_CAP'])

    @override_settings(HSLAG={**django_settings.HSLAG, 'LAMBDA_SAMPLES': 48, 'FOURIER_CAP': 5})
    def test_reads_settings(self):
        spec = LoopSpec.from_settings(django_settings.HSLAG)
        self.assertEqual((spec.N, spec.K), (48, 5))

    def test_doubled_keeps_resolution(self):
        spec = LoopSpec(N=32, K=7).doubled()
        self.assertEqual(spec.K, 14)
        self.assertGreaterEqual(spec.N, 60)


class AlgebraLoopTests(SimpleTestCase):
    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_random_real_loops_are_twisted_and_real(self, seed):
        xi = random_real_loop(np.random.default_rng(seed), CP2)
        self.assertLess(xi.twisting_residual(), 1e-12)
        self.assertLess(xi.reality_residual(), 1e-12)
        xi.validate()

    def test_synthesis_matches_evaluation(self):
        xi = random_real_loop(np.random.default_rng(5), CP2)
        samples = xi.synthesize(16)
        for j, lam in enumerate(lambda_grid(16)):
            assert_allclose(samples[j], xi.evaluate(lam), atol=1e-12)

    def test_fourier_coefficients_recover_the_table(self):
        xi = random_real_loop(np.random.default_rng(6), CP2)
        table = fourier_coeffs(exp_loop(xi, 32), -2, 2)
        self.assertEqual(list(table.modes), [-2, -1, 0, 1, 2])
        assert_allclose(table[0], np.mean(exp_loop(xi, 32).samples, axis=0), atol=1e-12)

    def test_sampled_twisting_test(self):
        xi = random_real_loop(np.random.default_rng(7), CP2)
        self.assertLess(quarter_rotation_residual(xi.synthesize(16), CP2), 1e-12)

    def test_resampling_is_exact_on_band_limited_loops(self):
        xi = random_real_loop(np.random.default_rng(17), CP2)
        fine = resample(xi.synthesize(16), 64)
        assert_allclose(fine, xi.synthesize(64), atol=1e-12)
        assert_allclose(fine[::4], xi.synthesize(16), atol=1e-12)

    def test_resampling_keeps_the_nyquist_mode_twisted(self):
        xi = random_real_loop(np.random.default_rng(18), CP2, k_max=8)
        coarse = xi.synthesize(32)[::2]
        fine = resample(coarse, 48)
        self.assertLess(quarter_rotation_residual(fine, CP2), 1e-12)
        with self.assertRaises(LoopError):
            resample(coarse, 40)

    def test_untwisted_coefficient_is_rejected(self):
        coeffs = np.stack([np.diag([1j, -1j, 0]), np.zeros((3, 3))])
        with self.assertRaises(LoopError):
            TwistedAlgebraLoop(coeffs, 1, CP2).validate()

    def test_tilde_is_an_involution(self):
        xi = TwistedAlgebraLoop(
            np.stack([random_twisted(np.random.default_rng(8), CP2, k) for k in (-2, -1, 0)]), -2, CP2
        )
        twice = xi.tilde().tilde()
        self.assertEqual(twice.k_min, xi.k_min)
        assert_allclose(twice.coeffs, xi.coeffs, atol=1e-15)

    def test_evaluation_off_the_circle_needs_consent(self):
        xi = random_real_loop(np.random.default_rng(9), CP2)
        with self.assertRaises(LoopError):
            xi.evaluate(0.5)
        xi.evaluate(0.5, allow_off_circle=True)

    def test_aliasing_is_refused(self):
        loop = identity_loop(CP2, 8)
        with self.assertRaises(LoopError):
            fourier_coeffs(loop, -5, 5)

    def test_real_loops_evaluate_into_the_real_form(self):
        xi = random_real_loop(np.random.default_rng(10), CP2)
        self.assertEqual(eval_loop(xi, 1j).tag, 'su3')
        self.assertEqual(eval_loop(xi, 0.5, allow_off_circle=True).tag, 'sl3C')

    def test_sobolev_norm(self):
        xi = TwistedAlgebraLoop(np.stack([np.zeros((3, 3)), 2 * CP2.basis(1)[0]]), 0, CP2)
        self.assertAlmostEqual(hs_norm(xi, 1.0), 2.0)
        with self.assertLogs('lagrangian.loops', 'WARNING'):
            hs_norm(xi, 0.5)
        with self.assertRaises(LoopError):
            hs_norm(xi, -1)


class GroupLoopTests(SimpleTestCase):
    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_exponentials_of_real_loops_are_unitary_and_twisted(self, seed):
        g = exp_loop(random_real_loop(np.random.default_rng(seed), CP2), 16)
        self.assertLess(g.unitarity_residual(), 1e-10)
        self.assertLess(g.twisting_residual(), 1e-10)
        g.validate()

    def test_inverse(self):
        g = exp_loop(random_real_loop(np.random.default_rng(11), CP2), 16)
        product = loop_multiply(g, loop_inverse(g))
        self.assertLess(product.distance(identity_loop(CP2, 16)), 1e-12)

    def test_case_mismatch(self):
        with self.assertRaises(LoopError):
            loop_multiply(identity_loop(CP2, 8), identity_loop(S5, 8))

    def test_shape_checks(self):
        with self.assertRaises(LoopError):
            TwistedGroupLoop(np.zeros((6, 3, 3)), CP2)
        with self.assertRaises(LoopError):
            TwistedGroupLoop(np.zeros((8, 3, 3)), CP1xCP1)

    def test_singular_loop_is_rejected(self):
        with self.assertRaises(LoopError):
            constant_loop(CP2, np.zeros((3, 3)), 8).validate()

    def test_batched_identity(self):
        loop = identity_loop(CP2, 8, batch_shape=(2, 3))
        self.assertEqual(loop.batch_shape, (2, 3))
        self.assertEqual(loop.node((1, 2)).samples.shape, (8, 3, 3))
