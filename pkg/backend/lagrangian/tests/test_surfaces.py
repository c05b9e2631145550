import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from lagrangian import surfaces
from lagrangian.algebra import CP2, Y_CP2, dagger
from lagrangian.geometry import project_cp2
from lagrangian.grids import Grid

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
chart = st.floats(min_value=-0.6, max_value=0.6, allow_nan=False)


class VacuumParamsTests(SimpleTestCase):
    def test_rejects_non_positive_imaginary_product(self):
        with self.assertRaises(ValueError):
            surfaces.VacuumParams(1.0, 1.0)
        with self.assertRaises(ValueError):
            surfaces.VacuumParams(1.0, -1j)

    def test_minimal_member(self):
        params = surfaces.VacuumParams.minimal(0.3 + 0.4j)
        self.assertTrue(params.is_minimal)
        self.assertEqual(params.a, 0)
        self.assertAlmostEqual(params.e_rho, np.sqrt(8) * 0.5)

    def test_clifford_parameters(self):
        self.assertEqual(surfaces.CLIFFORD_PARAMS.b, 0.5j)
        self.assertEqual(surfaces.CLIFFORD_PARAMS.c, -0.5)
        self.assertAlmostEqual(surfaces.CLIFFORD_PARAMS.e_rho, np.sqrt(2))

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_random_members_commute_with_their_tilde(self, seed):
        params = surfaces.VacuumParams.random(np.random.default_rng(seed))
        self.assertGreater(params.imag_product, 0)
        scale = max(1.0, abs(params.b) ** 2 + abs(params.c) ** 2)
        self.assertLess(float(np.max(surfaces.vacuum_commutator(params, 16))), 1e-12 * scale)
        self.assertLess(surfaces.vacuum_loop(params).twisting_residual(), 1e-12 * scale)

    def test_scaling(self):
        params = surfaces.VacuumParams(0.5, 0.2 + 0.5j)
        self.assertAlmostEqual(params.scaled(3).e_rho, 3 * params.e_rho)
        self.assertFalse(params.is_minimal)

    def test_turning_b_moves_the_conformal_factor(self):
        params = surfaces.VacuumParams(0.5, 0.2 + 0.5j)
        turned = params.with_argument(np.pi / 2)
        self.assertAlmostEqual(abs(turned.b), 0.5)
        self.assertEqual(turned.c, params.c)
        self.assertAlmostEqual(np.angle(np.conj(turned.b) * turned.c), np.pi / 2)
        self.assertAlmostEqual(turned.e_rho, np.sqrt(8 * 0.5 * abs(params.c)))
        self.assertGreater(turned.e_rho - params.e_rho, 1e-3)

    def test_leading_coefficient(self):
        params = surfaces.VacuumParams(0.5, 0.2 + 0.5j)
        coefficients = surfaces.vacuum_coefficients(params)
        assert_allclose(coefficients[-2], -3 * params.a * Y_CP2, atol=1e-15)
        self.assertEqual(surfaces.vacuum_potential(params).modes.tolist(), [-2, -1, 0])


class ClosedFormFrameTests(SimpleTestCase):
    grid = Grid(9, 9, -0.5, -0.5, 0.5, 0.5)

    @settings(max_examples=30, deadline=None)
    @given(chart, chart)
    def test_rp2_frames_are_rotations(self, x, y):
        F = surfaces.rp2_frame(complex(x, y)).entries
        assert_allclose(F.T @ F, np.eye(3), atol=1e-12)
        self.assertAlmostEqual(np.linalg.det(F).real, 1.0)

    def test_clifford_frames_are_unitary(self):
        F = surfaces.clifford_frame_field(self.grid.z)
        assert_allclose(dagger(F) @ F, np.broadcast_to(np.eye(3), F.shape), atol=1e-12)

    def test_clifford_point_is_the_projected_frame(self):
        F = surfaces.clifford_frame_field(self.grid.z)
        assert_allclose(F[..., :, 2], surfaces.clifford_point(self.grid.z), atol=1e-15)

    def test_clifford_periods_fix_the_surface(self):
        z = self.grid.z
        base = project_cp2(surfaces.clifford_frame_field(z))
        for period in surfaces.CLIFFORD_PERIODS:
            moved = project_cp2(surfaces.clifford_frame_field(z + period))
            assert_allclose(moved, base, atol=1e-12)

    def test_clifford_frame_is_a_rotated_vacuum_frame(self):
        frame = surfaces.clifford_extended_frame(self.grid, 4)
        assert_allclose(frame.at_lambda(0), surfaces.clifford_frame_field(self.grid.z), atol=1e-12)

    def test_rp2_extended_frame_at_one(self):
        frame = surfaces.rp2_extended_frame(self.grid, 8)
        assert_allclose(frame.at_lambda(0), surfaces.rp2_frame_field(self.grid.z), atol=1e-15)
        self.assertLess(frame.as_loop().twisting_residual(), 1e-10)

    def test_vacuum_frame_is_unitary_and_twisted(self):
        params = surfaces.VacuumParams(0.5, 0.2 + 0.5j)
        loop = surfaces.vacuum_frame(params, self.grid, 16).as_loop()
        self.assertLess(loop.unitarity_residual(), 1e-10)
        self.assertLess(loop.twisting_residual(), 1e-10)


class ExactFormTests(SimpleTestCase):
    grid = Grid(9, 9, -0.5, -0.5, 0.5, 0.5)

    def test_rp2_form_has_no_lagrangian_angle(self):
        form = surfaces.rp2_form(self.grid)
        assert_allclose(CP2.y_coefficient(form.a_z[-2]), 0, atol=1e-15)
        self.assertLess(form.reality_residual(), 1e-12)

    def test_minimal_vacuum_form_has_no_alpha2(self):
        form = surfaces.vacuum_form(surfaces.VacuumParams.minimal(0.5), self.grid)
        assert_allclose(form.a_z[-2], 0, atol=1e-15)

    def test_example_lookup(self):
        frame, form = surfaces.example_surface('vacuum', self.grid, 8)
        self.assertEqual(frame.diagnostics['source'], 'vacuum closed form')
        self.assertTrue(form.exact)
        with self.assertRaises(ValueError):
            surfaces.example_surface('torus', self.grid, 8)
