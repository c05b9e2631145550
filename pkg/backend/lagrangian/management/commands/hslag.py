# backend/lagrangian/management/commands/hslag.py
import logging
import time

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from lagrangian import surfaces
from lagrangian.cones import PROJECTIONS, cone_mesh, flat_section_transport, legendrian_frame
from lagrangian.dpw import refinement_ratio, run_forward
from lagrangian.exceptions import (
    FactorizationError, GeometryError, IntegrationError, PotentialFormatError,
)
from lagrangian.forms import COMMAND_CHOICES, RunConfigForm
from lagrangian.geometry import DEFAULT_PROJECTION, lagrangian_angle, project_cp2, surface_from_frame
from lagrangian.persistence import (
    read_potential_file, write_archive, write_cone_table, write_mesh, write_report, write_samples,
)
from lagrangian.reports import Report
from lagrangian.suites import run_suite

logger = logging.getLogger(__name__)

CONE_RADII = tuple(np.linspace(0.1, 1.0, 10))
REFINEMENT_RANGE = (3.0, 5.0)


def _flatness_map(alpha):
    _, values = alpha.flatness_field()
    return np.max(values, axis=-1)


def surface_checks(surface, spec):
    """Geometric residuals of a surface as report checks."""
    report = Report('surface')
    fd = surface.grid.fd_tolerance()
    for name, value in surface.residuals.items():
        report.add(f'surface_{name}', value, spec.tol_unitary if name == 'frame_unitarity' else fd)
    branch = int(np.sum(surface.branch_points))
    report.note('surface_lambda0', f'{surface.lam0.real:.17g},{surface.lam0.imag:.17g}')
    report.note('surface_branch_points', branch)
    if branch:
        report.warn(f'{branch} branch point(s) where the conformal factor vanishes')
    return report


class Command(BaseCommand):
    help = "Build, verify and export Hamiltonian stationary Lagrangian surfaces in CP^2."

    def add_arguments(self, parser):
        parser.add_argument('command', choices=[key for key, _ in COMMAND_CHOICES])
        parser.add_argument('name', nargs='?', help="suite for verify, example for example")
        parser.add_argument('--potential', help="potential file")
        parser.add_argument('--archive', help="frame archive for 'verify archive'")
        parser.add_argument('--example', help="closed-form source for cone")
        parser.add_argument('--case', help="case for 'verify algebra'")
        parser.add_argument('--nx', type=int)
        parser.add_argument('--ny', type=int)
        parser.add_argument('--domain', help="x0,y0,x1,y1")
        parser.add_argument('--lambda-samples', type=int, dest='lambda_samples')
        parser.add_argument('--fourier-cap', type=int, dest='fourier_cap')
        parser.add_argument('--lambda0', help="re,im on the unit circle")
        parser.add_argument('--b', help="vacuum parameter b as re,im")
        parser.add_argument('--c', help="vacuum parameter c as re,im")
        parser.add_argument('--out', help="output path without extension")
        parser.add_argument('--report', help="report path")
        parser.add_argument('--seed', type=int)

    def handle(self, *args, **options):
        command = options['command']
        potential_file = None
        file_defaults = {}
        if options.get('potential'):
            try:
                potential_file = read_potential_file(options['potential'])
            except PotentialFormatError as exc:
                raise CommandError(str(exc), returncode=2)
            file_defaults = {**potential_file.grid, **potential_file.loop}

        data = {key: options.get(key) for key in (
            'potential', 'archive', 'example', 'case', 'nx', 'ny', 'domain', 'lambda_samples',
            'fourier_cap', 'lambda0', 'b', 'c', 'out', 'report', 'seed',
        )}
        data['command'] = command
        if command == 'verify':
            data['suite'] = options.get('name')
        elif command == 'example':
            data['example'] = options.get('name') or options.get('example')

        form = RunConfigForm(data, file_defaults=file_defaults)
        if not form.is_valid():
            errors = '; '.join(
                f"{field}: {' '.join(messages)}" for field, messages in form.errors.items()
            )
            raise CommandError(f"invalid arguments: {errors}", returncode=2)
        config = form.config()

        started = time.perf_counter()
        handler = getattr(self, f'cmd_{command}')
        handler(config, potential_file)
        logger.info('hslag %s finished in %.2fs', command, time.perf_counter() - started)

    def _finish(self, report, config):
        write_report(config.report, report)
        for warning in report.warnings:
            self.stderr.write(self.style.WARNING(warning))
        status = 'pass' if report.passed else 'fail'
        self.stdout.write(f"{report.title}: {status} ({len(report.checks)} checks) -> {config.report}")

    def _write_surface(self, surface, report, config):
        if surface is None:
            write_mesh(config.out.with_suffix('.obj'), np.empty((0, 0, 3)), 'degenerate surface')
            write_samples(config.out.with_suffix('.samples.txt'), None)
            return
        rows = '; '.join(', '.join(f'{v:g}' for v in row) for row in DEFAULT_PROJECTION)
        report.note('mesh_projection', rows)
        try:
            vertices = surface.mesh_vertices()
        except GeometryError as exc:
            report.warn(f'mesh skipped: {exc}')
        else:
            write_mesh(config.out.with_suffix('.obj'), vertices, f'lambda0 = {surface.lam0}')
        write_samples(config.out.with_suffix('.samples.txt'), surface)

    def _forward(self, potential, config):
        try:
            return run_forward(potential, config.grid, config.spec)
        except FactorizationError as exc:
            raise CommandError(f"factorization failed: {exc}", returncode=3)
        except IntegrationError as exc:
            raise CommandError(f"integration failed: {exc}", returncode=3)

    def cmd_build(self, config, potential_file):
        potential = potential_file.potential
        result = self._forward(potential, config)
        report = Report(f'build {config.potential_path.name}')
        report.extend(result.report)

        surface = None
        if potential.is_zero():
            logger.warning('zero potential; writing a degenerate surface')
        else:
            fields = {config.grid.nx: _flatness_map(result.alpha)}

            def measure(grid):
                if grid.nx not in fields:
                    fine = run_forward(potential, grid, config.spec)
                    fields[grid.nx] = _flatness_map(fine.alpha)
                return fields[grid.nx]

            try:
                coarse, fine, ratio = refinement_ratio(measure, config.grid)
            except (FactorizationError, IntegrationError) as exc:
                report.warn(f'refinement study skipped: {exc}')
            else:
                report.note('flatness_fine', f'{fine:.3e}')
                if coarse > config.spec.tol_flat:
                    report.add_range('flatness_refinement_ratio', ratio, *REFINEMENT_RANGE)
                else:
                    # constant-coefficient frames are flat to rounding on every grid
                    report.note('flatness_refinement_ratio', f'none: flatness {coarse:.1e} below {config.spec.tol_flat:.0e}')

            try:
                surface = surface_from_frame(result.frame, result.alpha, config.lam0)
            except GeometryError as exc:
                report.warn(f'no surface at lambda0 = {config.lam0}: {exc}')
            else:
                report.extend(surface_checks(surface, config.spec))

        self._write_surface(surface, report, config)
        write_archive(config.out.with_suffix('.frame.txt'), result.frame, config.spec.K)
        self._finish(report, config)
        if not report.passed:
            names = ', '.join(check.name for check in report.failures)
            raise CommandError(f"build {config.potential_path.name} failed: {names}", returncode=1)

    def cmd_verify(self, config, potential_file):
        report = run_suite(config.suite, config)
        self._finish(report, config)
        if not report.passed:
            names = ', '.join(check.name for check in report.failures)
            raise CommandError(f"suite {config.suite} failed: {names}", returncode=1)

    def cmd_example(self, config, potential_file):
        frame, form = surfaces.example_surface(config.example, config.grid, config.spec.N, config.params)
        report = Report(f'example {config.example}')
        report.extend(form.report(config.spec.tol_unitary, config.grid.fd_tolerance()))
        report.add('frame_unitarity', frame.as_loop().unitarity_residual(), config.spec.tol_unitary)
        if config.params is not None:
            report.note('vacuum_b', config.params.b)
            report.note('vacuum_c', config.params.c)
        try:
            surface = surface_from_frame(frame, form, config.lam0)
        except GeometryError as exc:
            raise CommandError(str(exc), returncode=3)
        report.extend(surface_checks(surface, config.spec))
        self._write_surface(surface, report, config)
        if config.example == 'clifford':
            link = surfaces.clifford_point(config.grid.z)
            derivatives = surfaces.clifford_point_derivatives(config.grid.z)
            self._write_cone(link, derivatives, report, config)
        self._finish(report, config)

    def _write_cone(self, link, derivatives, report, config):
        mesh = cone_mesh(link, CONE_RADII, config.grid, derivatives)
        fd = config.grid.fd_tolerance()
        report.add('cone_lagrangian', mesh.lagrangian, 1e-10 if derivatives is not None else fd)
        report.add('cone_horizontality', mesh.horizontality, 1e-10 if derivatives is not None else fd)
        for warning in mesh.warnings:
            report.warn(warning)
        write_cone_table(config.out.with_suffix('.cone.txt'), mesh.table())
        for name in PROJECTIONS:
            write_mesh(config.out.with_suffix(f'.cone-{name}.obj'), mesh.projection(name), f'cone projection {name}')
        return mesh

    def cmd_cone(self, config, potential_file):
        if potential_file is not None:
            result = self._forward(potential_file.potential, config)
            frame, alpha = result.frame, result.alpha
            report = Report(f'cone {config.potential_path.name}')
            report.extend(result.report)
        else:
            frame, alpha = surfaces.example_surface(config.example, config.grid, config.spec.N, config.params)
            report = Report(f'cone {config.example}')
        grid = config.grid
        frozen = frame.at_lambda(frame.lambda_index(config.lam0))
        try:
            angle = lagrangian_angle(alpha, config.lam0)
            lift = legendrian_frame(frozen, angle, grid)
        except GeometryError as exc:
            raise CommandError(f"no Legendrian lift: {exc}", returncode=3)
        report.add('legendrian_determinant', lift.det_defect, 1e-10)
        report.add('legendrian_z_component', lift.z_component, grid.fd_tolerance())
        report.add('legendrian_horizontality', lift.horizontality, grid.fd_tolerance())

        p0, q0 = grid.basepoint
        try:
            transport = flat_section_transport(project_cp2(frozen), lift.link[p0, q0], grid)
        except GeometryError as exc:
            report.warn(f'transport cross-check skipped: {exc}')
        else:
            # a finite-difference alpha leaves O(h^2) in beta; the transport itself is O(h^4)
            order = 4 if alpha.exact else 2
            report.add('transport_agreement', float(np.max(np.abs(transport.link - lift.link))),
                       grid.fd_tolerance(order=order))
            report.note('max_plaquette_holonomy', f'{transport.max_holonomy:.3e}')
        self._write_cone(lift.link, None, report, config)
        self._finish(report, config)
