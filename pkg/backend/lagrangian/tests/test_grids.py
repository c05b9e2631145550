import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from lagrangian.grids import FD_CONSTANT, Grid


class GridTests(SimpleTestCase):
    def test_nodes(self):
        grid = Grid(5, 3, -1, 0, 1, 1)
        self.assertEqual(grid.z.shape, (5, 3))
        self.assertEqual(grid.z[4, 2], 1 + 1j)
        self.assertEqual((grid.hx, grid.hy, grid.h), (0.5, 0.5, 0.5))

    def test_rejects_small_or_empty_grids(self):
        with self.assertRaises(ValueError):
            Grid(2, 5, 0, 0, 1, 1)
        with self.assertRaises(ValueError):
            Grid(5, 5, 1, 0, 1, 1)

    def test_basepoint_is_clamped_into_the_domain(self):
        self.assertEqual(Grid(5, 5, -1, -1, 1, 1).basepoint, (2, 2))
        self.assertEqual(Grid(5, 5, 1, 1, 2, 2).basepoint, (0, 0))

    def test_refine_keeps_the_nodes(self):
        grid = Grid(5, 5, -1, -1, 1, 1)
        fine = grid.refine()
        self.assertEqual(fine.shape, (9, 9))
        assert_allclose(fine.z[::2, ::2], grid.z)
        self.assertAlmostEqual(grid.fd_tolerance() / fine.fd_tolerance(), 4.0)
        self.assertAlmostEqual(grid.fd_tolerance(), FD_CONSTANT * 0.25)

    def test_gradient_is_exact_on_quadratics(self):
        grid = Grid(7, 9, -1, -1, 1, 2)
        z = grid.z
        dx, dy = grid.gradient(z.real ** 2 + 3 * z.imag ** 2)
        assert_allclose(dx, 2 * z.real, atol=1e-12)
        assert_allclose(dy, 6 * z.imag, atol=1e-12)

    def test_boundary_mask(self):
        mask = Grid(4, 4, 0, 0, 1, 1).boundary
        self.assertEqual(int(mask.sum()), 12)
        self.assertFalse(mask[1, 2])

    def test_from_domain(self):
        grid = Grid.from_domain(3, 4, ('0', '0', '1', '2'))
        self.assertEqual(grid.domain, (0.0, 0.0, 1.0, 2.0))
        self.assertEqual(np.asarray(grid.ys).tolist()[-1], 2.0)
