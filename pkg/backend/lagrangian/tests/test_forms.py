from pathlib import Path

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from lagrangian.forms import DEFAULT_DOMAIN, RunConfigForm
from lagrangian.surfaces import EXAMPLE_DOMAINS

HSLAG = {
    **settings.HSLAG,
    'LAMBDA_SAMPLES': 64,
    'FOURIER_CAP': 15,
    'GRID_NX': 33,
    'GRID_NY': 33,
    'OUTPUT_DIR': Path('/tmp/hslag-output'),
}


@override_settings(HSLAG=HSLAG)
class RunConfigFormTests(SimpleTestCase):
    def form(self, file_defaults=None, **data):
        return RunConfigForm(data, file_defaults=file_defaults)

    def test_settings_fill_the_gaps(self):
        form = self.form(command='example', example='rp2')
        self.assertTrue(form.is_valid(), form.errors)
        config = form.config()
        self.assertEqual((config.spec.N, config.spec.K), (64, 15))
        self.assertEqual(config.grid.shape, (33, 33))
        self.assertEqual(config.grid.domain, EXAMPLE_DOMAINS['rp2'])
        self.assertEqual(config.out, Path('/tmp/hslag-output/rp2'))
        self.assertEqual(config.report, Path('/tmp/hslag-output/rp2.report.txt'))
        self.assertEqual((config.lam0, config.seed), (1, 0))

    def test_flags_beat_the_file_and_the_file_beats_settings(self):
        defaults = {'nx': 17, 'ny': 17, 'lambda_samples': 32, 'fourier_cap': 7, 'domain': [0, 0, 1, 1]}
        form = self.form(defaults, command='build', potential='mu.pot', nx=9)
        self.assertTrue(form.is_valid(), form.errors)
        config = form.config()
        self.assertEqual(config.grid.shape, (9, 17))
        self.assertEqual(config.grid.domain, (0.0, 0.0, 1.0, 1.0))
        self.assertEqual((config.spec.N, config.spec.K), (32, 7))
        self.assertEqual(config.potential_path, Path('mu.pot'))
        self.assertEqual(config.out, Path('/tmp/hslag-output/mu'))

    def test_build_falls_back_to_the_default_domain(self):
        form = self.form(command='build', potential='mu.pot')
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.config().grid.domain, DEFAULT_DOMAIN)

    def test_required_names(self):
        self.assertIn('potential', self.form(command='build').errors)
        self.assertIn('suite', self.form(command='verify').errors)
        self.assertIn('example', self.form(command='example').errors)
        self.assertIn('potential', self.form(command='cone').errors)
        self.assertIn('archive', self.form(command='verify', suite='archive').errors)

    def test_unknown_choices(self):
        self.assertIn('suite', self.form(command='verify', suite='torus').errors)
        self.assertIn('command', self.form(command='plot').errors)

    def test_lambda0_on_the_circle_and_sampled(self):
        self.assertIn('lambda0', self.form(command='example', example='rp2', lambda0='2,0').errors)
        off_grid = f'{float(np.cos(0.1))!r},{float(np.sin(0.1))!r}'
        self.assertIn('lambda0', self.form(command='example', example='rp2', lambda0=off_grid).errors)
        form = self.form(command='example', example='rp2', lambda0='0,1')
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.config().lam0, 1j)

    def test_under_resolved_cap(self):
        form = self.form(command='example', example='rp2', fourier_cap=20)
        self.assertFalse(form.is_valid())
        self.assertIn('cannot resolve', ' '.join(form.non_field_errors()))

    def test_domain_needs_four_numbers(self):
        self.assertIn('domain', self.form(command='example', example='rp2', domain='0,0,1').errors)
        self.assertIn('domain', self.form(command='example', example='rp2', domain='0,0,a,1').errors)
        self.assertFalse(self.form(command='example', example='rp2', domain='1,0,0,1').is_valid())

    def test_vacuum_parameters(self):
        form = self.form(command='example', example='vacuum', b='0,0.5')
        self.assertTrue(form.is_valid(), form.errors)
        params = form.config().params
        self.assertTrue(params.is_minimal)
        self.assertEqual(params.c, -0.5)
        self.assertIn('c', self.form(command='example', example='vacuum', b='1,0', c='1,0').errors)
        self.assertIn('b', self.form(command='example', example='vacuum', c='1,0').errors)

    def test_explicit_paths(self):
        form = self.form(command='verify', suite='algebra', out='/tmp/a/run', case='S5', seed=7)
        self.assertTrue(form.is_valid(), form.errors)
        config = form.config()
        self.assertEqual(config.report, Path('/tmp/a/run.report.txt'))
        self.assertEqual((config.case, config.seed, config.suite), ('S5', 7, 'algebra'))
