import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from lagrangian.algebra import CP2
from lagrangian.dpw import LoopField
from lagrangian.grids import Grid
from lagrangian.persistence import write_archive

FIXTURES = Path(__file__).resolve().parent.parent / 'fixtures'
SMALL = {'nx': 9, 'ny': 9}


class HslagCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def run_hslag(self, *args, **options):
        stdout, stderr = StringIO(), StringIO()
        call_command('hslag', *args, stdout=stdout, stderr=stderr, **options)
        return stdout.getvalue(), stderr.getvalue()

    def test_verify_algebra(self):
        report = self.root / 'algebra.txt'
        out, _ = self.run_hslag('verify', 'algebra', report=str(report), out=str(self.root / 'algebra'))
        self.assertIn('verify algebra CP2: pass', out)
        text = report.read_text()
        self.assertIn('result = pass', text)
        self.assertIn('note = suite, algebra', text)

    def test_verify_birkhoff(self):
        out, _ = self.run_hslag('verify', 'birkhoff', out=str(self.root / 'birkhoff'), seed=3)
        self.assertIn('verify birkhoff: pass', out)

    def test_malformed_potential_exits_with_two(self):
        path = self.root / 'bad.pot'
        path.write_text("[case]\nname = CP2\n[coefficient]\nk = -4\n")
        with self.assertRaises(CommandError) as caught:
            self.run_hslag('build', potential=str(path), out=str(self.root / 'bad'))
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn('bad.pot:4:', str(caught.exception))

    def test_invalid_arguments_exit_with_two(self):
        with self.assertRaises(CommandError) as caught:
            self.run_hslag('verify')
        self.assertEqual(caught.exception.returncode, 2)

    def test_failed_suite_exits_with_one(self):
        grid = Grid(3, 3, -0.5, -0.5, 0.5, 0.5)
        samples = np.broadcast_to(2 * np.eye(3, dtype=complex), (3, 3, 4, 3, 3)).copy()
        archive = write_archive(self.root / 'scaled.frame.txt', LoopField(grid, samples, CP2), 1)
        with self.assertRaises(CommandError) as caught:
            self.run_hslag('verify', 'archive', archive=str(archive), out=str(self.root / 'scaled'))
        self.assertEqual(caught.exception.returncode, 1)
        self.assertIn('archive_unitarity', str(caught.exception))

    def test_example_rp2(self):
        out_path = self.root / 'rp2'
        out, _ = self.run_hslag('example', 'rp2', out=str(out_path), lambda_samples=16, fourier_cap=3, **SMALL)
        self.assertIn('example rp2: pass', out)
        self.assertEqual(len(out_path.with_suffix('.samples.txt').read_text().splitlines()), 1 + 81)
        mesh = out_path.with_suffix('.obj').read_text().splitlines()
        self.assertEqual(sum(line.startswith('v ') for line in mesh), 81)
        self.assertEqual(sum(line.startswith('f ') for line in mesh), 2 * 8 * 8)

    def test_example_clifford_writes_the_cone(self):
        out_path = self.root / 'clifford'
        self.run_hslag('example', 'clifford', out=str(out_path), lambda_samples=16, fourier_cap=3, **SMALL)
        rows = out_path.with_suffix('.cone.txt').read_text().splitlines()
        self.assertEqual(len(rows), 1 + 10 * 81)
        for name in ('re', 'im', 'mixed'):
            self.assertTrue(out_path.with_suffix(f'.cone-{name}.obj').exists())
        self.assertIn('result = pass', out_path.with_suffix('.report.txt').read_text())

    def test_cone_from_example(self):
        out_path = self.root / 'cone'
        self.run_hslag('cone', example='clifford', out=str(out_path), lambda_samples=16, fourier_cap=3, nx=17, ny=17)
        report = out_path.with_suffix('.report.txt').read_text()
        self.assertIn('check = legendrian_determinant', report)
        self.assertIn('check = transport_agreement', report)

    def test_zero_potential_gives_a_degenerate_surface(self):
        out_path = self.root / 'zero'
        _, err = self.run_hslag('build', potential=str(FIXTURES / 'zero.pot'), out=str(out_path), **SMALL)
        self.assertEqual(out_path.with_suffix('.obj').read_text(), '# hslag mesh\n# degenerate surface\n')
        self.assertEqual(len(out_path.with_suffix('.samples.txt').read_text().splitlines()), 1)
        self.assertIn('identically zero', err)

    @override_settings(HSLAG={**settings.HSLAG, 'TOL_TWIST': 1e-12})
    def test_failed_build_exits_with_one(self):
        # a defect of 2e-11 off g0 passes the reader but not a 1e-12 twisting tolerance
        path = self.root / 'tilted.pot'
        path.write_text((FIXTURES / 'vacuum.pot').read_text() + "\n[coefficient]\nk = 0\nentry = 2, 2, 0, 1e-11, 0\n")
        out_path = self.root / 'tilted'
        with self.assertRaises(CommandError) as caught:
            self.run_hslag('build', potential=str(path), out=str(out_path), domain='-0.25,-0.25,0.25,0.25', **SMALL)
        self.assertEqual(caught.exception.returncode, 1)
        self.assertIn('potential_twisting', str(caught.exception))
        self.assertIn('result = fail', out_path.with_suffix('.report.txt').read_text())

    def test_build_then_verify_the_archive(self):
        out_path = self.root / 'vacuum'
        self.run_hslag(
            'build', potential=str(FIXTURES / 'vacuum.pot'), out=str(out_path),
            domain='-0.25,-0.25,0.25,0.25', **SMALL,
        )
        self.assertTrue(out_path.with_suffix('.obj').exists())
        report = out_path.with_suffix('.report.txt').read_text()
        self.assertIn('check = frame_unitarity', report)
        self.assertIn('note = flatness_fine', report)
        out, _ = self.run_hslag(
            'verify', 'archive', archive=str(out_path.with_suffix('.frame.txt')), out=str(self.root / 'check'),
        )
        self.assertIn('pass', out)
