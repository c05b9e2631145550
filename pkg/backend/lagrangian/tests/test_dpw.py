import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose
from scipy import linalg

from lagrangian import surfaces
from lagrangian.algebra import CP2, EPSILON, S5, Y_CP2
from lagrangian.dpw import (
    HoloPotential, extract_maurer_cartan, integrate_potential, lift_to_potential, mc_from_samples,
    meromorphic_extract, refinement_ratio, run_forward, validate_potential,
)
from lagrangian.exceptions import IntegrationError
from lagrangian.grids import Grid
from lagrangian.loops import LoopSpec, identity_loop
from lagrangian.sampling import random_potential

SPEC = LoopSpec(N=64, K=15)
GRID = Grid(9, 9, -0.25, -0.25, 0.25, 0.25)
PARAMS = surfaces.VacuumParams.minimal(np.exp(0.25j * np.pi) / 2)


class PotentialTests(SimpleTestCase):
    def test_coefficient_shape_is_checked(self):
        with self.assertRaises(ValueError):
            HoloPotential(np.zeros((3, 3, 3)), CP2)

    def test_vacuum_potential_is_valid(self):
        report = validate_potential(surfaces.vacuum_potential(PARAMS))
        self.assertTrue(report.passed, [c.line() for c in report.failures])
        self.assertEqual(report.warnings, [])
        self.assertEqual(report.notes['modes'], '-2..0')

    def test_table_evaluates_constant_coefficients(self):
        table = surfaces.vacuum_potential(PARAMS).table(GRID.z)
        self.assertEqual(table.batch_shape, GRID.shape)
        assert_allclose(table[-1][3, 5], PARAMS.e_rho * EPSILON, atol=1e-15)

    def test_zero_potential_warns(self):
        mu = HoloPotential.zero(CP2)
        self.assertTrue(mu.is_zero())
        report = validate_potential(mu)
        self.assertTrue(report.passed)
        self.assertIn('identically zero', report.warnings[0])

    def test_missing_lambda_minus_one_term_warns(self):
        block = surfaces.vacuum_coefficients(PARAMS)[0]
        report = validate_potential(HoloPotential.constant(CP2, {0: block}))
        self.assertIn('not immersed', report.warnings[0])

    def test_untwisted_coefficient_fails(self):
        report = validate_potential(HoloPotential.constant(CP2, {-1: Y_CP2}))
        self.assertIn('potential_twisting', [c.name for c in report.failures])

    def test_modes_below_minus_two_fail(self):
        coeffs = np.zeros((4, 1, 3, 3), dtype=complex)
        coeffs[0, 0] = EPSILON
        report = validate_potential(HoloPotential(coeffs, CP2, -3))
        self.assertIn('potential_support_lower', [c.name for c in report.failures])


class IntegrationTests(SimpleTestCase):
    def test_constant_potential_integrates_to_the_exponential(self):
        N = 16
        H = integrate_potential(surfaces.vacuum_potential(PARAMS), identity_loop(CP2, N), GRID)
        M = surfaces.vacuum_loop(PARAMS).synthesize(N)
        expected = linalg.expm(GRID.z[..., None, None, None] * M)
        assert_allclose(H.samples, expected, atol=1e-8)
        self.assertLess(H.diagnostics['path_residual'], 1e-9)

    def test_case_mismatch(self):
        with self.assertRaises(ValueError):
            integrate_potential(surfaces.vacuum_potential(PARAMS), identity_loop(S5, 16), GRID)

    def test_substep_limit(self):
        with self.assertRaises(IntegrationError) as caught:
            integrate_potential(
                surfaces.vacuum_potential(PARAMS), identity_loop(CP2, 16), GRID, tol=1e-30, max_substeps=4,
            )
        self.assertIsNotNone(caught.exception.edge)


class ForwardTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.result = run_forward(surfaces.vacuum_potential(PARAMS), GRID, SPEC)

    def test_report_passes(self):
        report = self.result.report
        self.assertTrue(report.passed, [c.line() for c in report.failures])
        self.assertIn('iwasawa_resolution_gap', report)
        self.assertEqual(report.notes['fourier_cap'], '15')

    def test_frame_is_normalized_at_the_basepoint(self):
        self.assertLess(self.result.frame.basepoint_defect(), 1e-10)

    def test_projection_matches_the_closed_form(self):
        closed = surfaces.vacuum_frame(PARAMS, GRID, SPEC.N)
        assert_allclose(self.result.frame.samples[..., :, 2], closed.samples[..., :, 2], atol=1e-7)

    def test_holomorphic_lift_reproduces_the_frame(self):
        lift = lift_to_potential(self.result.frame, SPEC, degree=4)
        self.assertEqual(lift.report['lift_birkhoff_misses'].value, 0)
        p0, q0 = GRID.basepoint
        assert_allclose(lift.B.samples[p0, q0], np.broadcast_to(np.eye(3), (SPEC.N, 3, 3)), atol=1e-10)
        assert_allclose(lift.H.samples @ lift.B.samples, self.result.frame.samples, atol=1e-7)
        self.assertLess(validate_potential(lift.potential)['potential_twisting'].value, 1e-10)
        self.assertIn('Birkhoff', lift.report.notes['lift_method'])
        self.assertEqual(lift.report['lift_birkhoff_unresolved'].value, 0)


RANDOM_GRID = Grid(13, 13, -0.5, -0.5, 0.5, 0.5)


class RandomForwardTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        rng = np.random.default_rng(21)
        cls.potentials = [random_potential(rng, CP2, scale=0.3, domain=RANDOM_GRID.domain) for _ in range(3)]
        cls.results = [run_forward(mu, RANDOM_GRID, SPEC) for mu in cls.potentials]

    def test_reports_pass(self):
        for i, result in enumerate(self.results):
            with self.subTest(potential=i):
                report = result.report
                self.assertTrue(report.passed, [c.line() for c in report.failures])
                self.assertGreaterEqual(int(report.notes['fourier_cap_used']), SPEC.K)
                self.assertLess(report['iwasawa_resolution_gap'].value, SPEC.tol_unitary)

    def test_frames_solve_the_structure_equations(self):
        for result in self.results:
            alpha = result.alpha
            self.assertLess(alpha.twisting_residual(), SPEC.tol_unitary)
            self.assertLess(alpha.support_residual(), RANDOM_GRID.fd_tolerance())
            self.assertLess(alpha.partial_primitivity_residual(), RANDOM_GRID.fd_tolerance())

    def test_flatness_is_second_order(self):
        mu = self.potentials[0]

        def measure(grid):
            _, values = run_forward(mu, grid, SPEC).alpha.flatness_field()
            return np.max(values, axis=-1)

        coarse, fine, ratio = refinement_ratio(measure, RANDOM_GRID)
        self.assertGreater(coarse, SPEC.tol_flat)
        self.assertTrue(3.0 < ratio < 5.0, ratio)

    def test_meromorphic_extraction_off_the_vacuum(self):
        result = meromorphic_extract(self.results[0].frame, SPEC)
        self.assertEqual(result.misses, [])
        report = result.report
        for name in ('meromorphic_minus_at_infinity', 'meromorphic_fit', 'meromorphic_unresolved'):
            self.assertTrue(report[name].passed, report[name].line())
        self.assertLess(result.support_mass, SPEC.tol_flat)
        p0, q0 = RANDOM_GRID.basepoint
        assert_allclose(result.minus.samples[p0, q0], np.broadcast_to(np.eye(3), (SPEC.N, 3, 3)), atol=1e-8)


class MaurerCartanTests(SimpleTestCase):
    def test_finite_differences_of_the_vacuum_frame(self):
        frame = surfaces.vacuum_frame(PARAMS, GRID, 16)
        alpha = extract_maurer_cartan(frame)
        exact = surfaces.vacuum_form(PARAMS, GRID)
        self.assertLess(np.max(np.abs(alpha.a_z.coeffs - exact.a_z.coeffs)), GRID.fd_tolerance())
        self.assertLess(alpha.twisting_residual(), 1e-10)
        self.assertLess(max(alpha.flatness_residual().values()), GRID.fd_tolerance())

    def test_sampled_closed_form(self):
        M = surfaces.vacuum_loop(PARAMS)
        shape = GRID.shape + (16, 3, 3)
        form = mc_from_samples(
            GRID, CP2, np.broadcast_to(M.synthesize(16), shape), np.broadcast_to(M.tilde().synthesize(16), shape),
        )
        self.assertTrue(form.exact)
        self.assertLess(form.out_of_band, 1e-12)
        self.assertLess(form.reality_residual(), 1e-12)
        self.assertLess(form.support_residual(), 1e-12)
        assert_allclose(form.a_z.coeffs, surfaces.vacuum_form(PARAMS, GRID).a_z.coeffs, atol=1e-12)

    def test_exact_form_report(self):
        report = surfaces.vacuum_form(PARAMS, GRID).report(1e-10, GRID.fd_tolerance())
        self.assertTrue(report.passed, [c.line() for c in report.failures])
        self.assertEqual(report.notes['mc_source'], 'closed form')


class MeromorphicTests(SimpleTestCase):
    def test_vacuum_frame_lies_in_the_big_cell(self):
        frame = surfaces.vacuum_frame(PARAMS, GRID, SPEC.N)
        result = meromorphic_extract(frame, SPEC)
        self.assertEqual(result.misses, [])
        self.assertTrue(result.report['meromorphic_minus_at_infinity'].passed)
        self.assertEqual(result.potential.k_min, -2)
        self.assertEqual(result.potential.batch_shape, GRID.shape)
        p0, q0 = GRID.basepoint
        assert_allclose(result.minus.samples[p0, q0], np.broadcast_to(np.eye(3), (SPEC.N, 3, 3)), atol=1e-10)


class RefinementTests(SimpleTestCase):
    def test_second_order_field_has_ratio_four(self):
        coarse, fine, ratio = refinement_ratio(lambda g: np.full(g.shape, g.h ** 2), GRID)
        self.assertAlmostEqual(ratio, 4.0, places=10)
        self.assertLess(fine, coarse)

    def test_lambda_index(self):
        frame = surfaces.vacuum_frame(PARAMS, GRID, 16)
        self.assertEqual(frame.lambda_index(1j), 4)
        with self.assertRaises(ValueError):
            frame.lambda_index(np.exp(0.1j))
