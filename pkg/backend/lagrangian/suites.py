"""
Verification suites run by ``hslag verify``.

Each suite builds its fixtures from the closed forms or from seeded random
loops, records named checks in a Report and never raises on a failed
check. Finite-difference quantities are held to C h**2 on the suite grid.
"""
import logging
import time

import numpy as np

from . import surfaces
from .algebra import CH2, CP2, frobenius, get_case, structure_audit
from .cones import cone_mesh, flat_section_transport, fundamental_lift, legendrian_frame
from .dpw import ExtendedFrame, extract_maurer_cartan, lift_to_potential, refinement_ratio, run_forward
from .exceptions import FactorizationError, HslagError
from .factorization import birkhoff, loop_iwasawa
from .geometry import conformal_factor, lagrangian_angle, project_cp2, surface_from_frame
from .grids import Grid
from .loops import identity_loop
from .persistence import read_archive
from .reports import Report
from .sampling import birkhoff_fixture, iwasawa_fixture, off_big_cell_loop, random_potential

logger = logging.getLogger(__name__)

SUITE_CHOICES = (
    ('algebra', 'Structure audit of the case data'),
    ('clifford', 'Clifford torus against its closed form'),
    ('rp2', 'Real projective plane against its closed form'),
    ('vacuum', 'Vacuum family of constant potentials'),
    ('roundtrip', 'Potential to frame to potential'),
    ('cones', 'Legendrian lifts and cones'),
    ('iwasawa', 'Loop Iwasawa on synthesized loops'),
    ('birkhoff', 'Birkhoff on synthesized loops'),
    ('family', 'Associated family of a vacuum solution'),
    ('archive', 'Residual checks on a stored frame archive'),
)

EXACT_TOL = 1e-12
CLOSED_FORM_TOL = 1e-8
RANDOM_SAMPLES = 100
VACUUM_SAMPLES = 20
FACTORIZATION_SAMPLES = 50
FAMILY_MEMBERS = 8
ROUNDTRIP_TOL = 1e-6
FORWARD_SAMPLES = 10
ROUNDTRIP_SAMPLES = 5
# from near-identity loops to loops whose factors need K = 60 at N = 64
FIXTURE_SCALES = (0.05, 0.3, 0.6)
ROUNDTRIP_DOMAIN = (-0.5, -0.5, 0.5, 0.5)
# fourth-order transport: errors shrink 16-fold under refinement
TRANSPORT_GRID = Grid(65, 65, *surfaces.EXAMPLE_DOMAINS['clifford'])
TRANSPORT_RATIO = (12.0, 20.0)


def fixture_grid(config, name):
    return Grid.from_domain(config.grid.nx, config.grid.ny, surfaces.EXAMPLE_DOMAINS[name])


def _rng(config):
    return np.random.default_rng(config.seed)


def phase_distance(p, q):
    """max over nodes of 1 - |<p, q>| for unit vectors."""
    return float(np.max(1 - np.abs(np.sum(p * np.conj(q), axis=-1))))


def frozen_mc_error(frames, form):
    """Per node error of the finite-difference Maurer-Cartan form of the lambda = 1 frames."""
    def measure(grid):
        F = frames(grid)
        Fx, Fy = grid.gradient(F)
        Finv = np.linalg.inv(F)
        a_z, a_zbar = form(grid).at_lambda(1.0)
        return np.maximum(
            frobenius(Finv @ (Fx - 1j * Fy) / 2 - a_z),
            frobenius(Finv @ (Fx + 1j * Fy) / 2 - a_zbar),
        )
    return measure


def _refinement(report, prefix, measure, grid):
    coarse, _, ratio = refinement_ratio(measure, grid)
    report.add(f'{prefix}_mc_error', coarse, grid.fd_tolerance())
    report.add_range(f'{prefix}_refinement_ratio', ratio, 3.5, 4.5)


def _interior(values):
    return values[1:-1, 1:-1]


def algebra_suite(config):
    case = get_case(config.case)
    report = Report(f'verify algebra {case.name}')
    report.extend(structure_audit(case))
    rng = _rng(config)
    defect = 0.0
    for _ in range(RANDOM_SAMPLES):
        X = case.random_element(rng).entries
        defect = max(defect, float(frobenius(sum(case.project(X, k) for k in range(4)) - X)))
    report.add('resolution_random', defect, EXACT_TOL)
    return report


def clifford_suite(config):
    grid = fixture_grid(config, 'clifford')
    report = Report('verify clifford')
    frame, exact = surfaces.example_surface('clifford', grid, config.spec.N)
    vacuum = surfaces.vacuum_frame(surfaces.CLIFFORD_PARAMS, grid, config.spec.N)
    report.add('clifford_frame_unitarity', frame.as_loop().unitarity_residual(), 1e-10)
    report.add('clifford_frame_twisting', vacuum.as_loop().twisting_residual(), 1e-10)

    alpha = extract_maurer_cartan(frame)
    extracted = float(np.max(frobenius(_interior(alpha.a_z.coeffs - exact.a_z.coeffs))))
    report.add('clifford_mc_extracted', extracted, grid.fd_tolerance())
    report.add('clifford_flatness', max(alpha.flatness_residual().values()), grid.fd_tolerance())
    frames = lambda g: surfaces.clifford_extended_frame(g, 4).at_lambda(0)
    _refinement(report, 'clifford', frozen_mc_error(frames, surfaces.clifford_form), grid)

    surface = surface_from_frame(frame, exact)
    report.add('clifford_conformal_factor', float(np.max(np.abs(np.exp(surface.rho) - np.sqrt(2)))), CLOSED_FORM_TOL)
    report.add('clifford_beta', float(np.max(np.abs(surface.beta))), CLOSED_FORM_TOL)
    report.add('clifford_alpha2', float(np.max(frobenius(exact.a_z[-2]))), 1e-10)
    report.add('clifford_points', phase_distance(surface.points, surfaces.clifford_point(grid.z)), 1e-10)
    report.add('clifford_stationarity', surface.residuals['stationarity'], 1e-10)
    base = project_cp2(surfaces.clifford_frame_field(grid.z))
    periodicity = max(
        phase_distance(project_cp2(surfaces.clifford_frame_field(grid.z + period)), base)
        for period in surfaces.CLIFFORD_PERIODS
    )
    report.add('clifford_periodicity', periodicity, 1e-12)
    return report


def rp2_suite(config):
    grid = fixture_grid(config, 'rp2')
    report = Report('verify rp2')
    frame, exact = surfaces.example_surface('rp2', grid, config.spec.N)
    F1 = frame.at_lambda(0)
    report.add('rp2_orthogonality', float(np.max(frobenius(np.swapaxes(F1, -1, -2) @ F1 - np.eye(3)))), EXACT_TOL)
    report.add('rp2_determinant', float(np.max(np.abs(np.linalg.det(F1) - 1))), EXACT_TOL)
    report.add('rp2_frame_twisting', frame.as_loop().twisting_residual(), 1e-10)

    alpha = extract_maurer_cartan(frame)
    extracted = float(np.max(frobenius(_interior(alpha.a_z.coeffs - exact.a_z.coeffs))))
    report.add('rp2_mc_extracted', extracted, grid.fd_tolerance())
    report.add('rp2_alpha2', float(np.max(np.abs(_interior(CP2.y_coefficient(alpha.a_z[-2]))))), grid.fd_tolerance())
    _refinement(report, 'rp2', frozen_mc_error(lambda g: surfaces.rp2_frame_field(g.z), surfaces.rp2_form), grid)

    expected = 2 / (1 + np.abs(grid.z) ** 2)
    surface = surface_from_frame(frame, alpha)
    report.add('rp2_conformal_factor', float(np.max(np.abs(np.exp(surface.rho) - expected))), grid.fd_tolerance())
    report.add('rp2_beta', float(np.max(np.abs(surface.beta))), grid.fd_tolerance())
    exact_rho = conformal_factor(exact)
    report.add('rp2_conformal_factor_exact', float(np.max(np.abs(np.exp(exact_rho) - expected))), EXACT_TOL)
    return report


def vacuum_suite(config):
    rng = _rng(config)
    grid = fixture_grid(config, 'vacuum')
    N = config.spec.N
    report = Report('verify vacuum')

    samples = [surfaces.VacuumParams.random(rng) for _ in range(VACUUM_SAMPLES)]
    report.add('vacuum_commutator', max(float(np.max(surfaces.vacuum_commutator(p, N))) for p in samples), EXACT_TOL)
    report.add('vacuum_loop_twisting', max(surfaces.vacuum_loop(p).twisting_residual() for p in samples), EXACT_TOL)
    report.add('vacuum_scaling', max(abs(p.scaled(2.5).e_rho - 2.5 * p.e_rho) for p in samples), EXACT_TOL)

    minimal = surfaces.VacuumParams.minimal(samples[0].b)
    form = surfaces.vacuum_form(minimal, grid)
    report.add('vacuum_minimal_alpha2', float(np.max(frobenius(form.a_z[-2]))), CLOSED_FORM_TOL)
    rho = conformal_factor(form)
    report.add('vacuum_minimal_conformal_factor',
               float(np.max(np.abs(np.exp(rho) - 2 * np.sqrt(2) * abs(minimal.b)))), CLOSED_FORM_TOL)

    params = samples[0]
    frame = surfaces.vacuum_frame(params, grid, N)
    loop = frame.as_loop()
    report.add('vacuum_frame_unitarity', loop.unitarity_residual(), 1e-10)
    report.add('vacuum_frame_twisting', loop.twisting_residual(), 1e-10)
    alpha = extract_maurer_cartan(frame)
    report.add('vacuum_flatness', max(alpha.flatness_residual().values()), grid.fd_tolerance())
    exact = surfaces.vacuum_form(params, grid)
    angle = lagrangian_angle(exact)
    p0, q0 = grid.basepoint
    z = grid.z - grid.z[p0, q0]
    linear = -12 * params.a.real * z.real + 12 * params.a.imag * z.imag
    scale = max(1.0, float(np.max(np.abs(linear))))
    report.add('vacuum_beta_linear', float(np.max(np.abs(angle.beta - linear))), CLOSED_FORM_TOL * scale)

    # rho and beta are gauge invariant; turning b alone must move one of them
    phase = np.angle(np.conj(params.b) * params.c)
    target = np.pi / 4 if abs(phase - np.pi / 2) < 0.1 else np.pi / 2
    turned = surfaces.vacuum_form(params.with_argument(target), grid)
    invariants_gap = max(
        float(np.max(np.abs(conformal_factor(turned) - conformal_factor(exact)))),
        float(np.max(np.abs(lagrangian_angle(turned).beta - angle.beta))),
    )
    report.add_range('vacuum_argument_of_b', invariants_gap, ROUNDTRIP_TOL, np.inf)

    clifford = surfaces.vacuum_frame(surfaces.CLIFFORD_PARAMS, grid, N)
    rotated = surfaces.clifford_frame_field(0) @ clifford.at_lambda(0)
    reference = surfaces.clifford_point(grid.z)
    report.add('vacuum_clifford_member', phase_distance(project_cp2(rotated), reference), ROUNDTRIP_TOL)
    return report


def merge_worst(target, reports, prefix):
    """One check per name holding the worst value over a batch of same-shaped reports."""
    for check in reports[0].checks:
        values = [r[check.name].value for r in reports if check.name in r]
        target.add(prefix + check.name, float(np.max(values)), check.tol, check.low)
    for key, value in reports[0].notes.items():
        target.note(prefix + key, value)
    for report in reports:
        target.warnings.extend(report.warnings)
    return target


def frame_gauge_gap(first, second):
    """
    Distances between two frames of one surface that differ by a
    lambda-independent right factor in SU(2) + 1: their third columns, and the
    lambda spread of first^* second.
    """
    a, b = first.samples, second.samples
    third = float(np.max(np.abs(a[..., :, 2] - b[..., :, 2])))
    gauge = np.conj(np.swapaxes(a, -1, -2)) @ b
    spread = float(np.max(frobenius(gauge - np.mean(gauge, axis=2, keepdims=True))))
    return third, spread


def roundtrip_suite(config):
    rng = _rng(config)
    grid = Grid.from_domain(config.grid.nx, config.grid.ny, ROUNDTRIP_DOMAIN)
    spec = config.spec
    report = Report('verify roundtrip')
    forward, lifts, second_runs = [], [], []
    third, spread, points, stationarity = [], [], [], []
    for i in range(FORWARD_SAMPLES):
        mu = random_potential(rng, CP2, degree=1, scale=0.3, domain=grid.domain)
        first = run_forward(mu, grid, spec)
        forward.append(first.report)
        if i >= ROUNDTRIP_SAMPLES:
            continue
        lift = lift_to_potential(first.frame, spec, degree=max(config.degree, 10))
        lifts.append(lift.report)
        second = run_forward(lift.potential, grid, spec)
        second_runs.append(second.report)

        column, gauge = frame_gauge_gap(first.frame, second.frame)
        third.append(column)
        spread.append(gauge)
        surface_a = surface_from_frame(first.frame, first.alpha, config.lam0)
        surface_b = surface_from_frame(second.frame, second.alpha, config.lam0)
        points.append(float(np.max(np.abs(surface_a.points - surface_b.points))))
        stationarity.append(surface_a.residuals['stationarity'])

    merge_worst(report, forward, 'first_')
    merge_worst(report, lifts, '')
    merge_worst(report, second_runs, 'second_')
    report.add('roundtrip_third_column', max(third), ROUNDTRIP_TOL)
    report.add('roundtrip_gauge_spread', max(spread), ROUNDTRIP_TOL)
    report.add('roundtrip_points', max(points), ROUNDTRIP_TOL)
    report.add('roundtrip_stationarity', max(stationarity), grid.fd_tolerance())
    report.note('forward_samples', FORWARD_SAMPLES)
    report.note('roundtrip_samples', ROUNDTRIP_SAMPLES)
    return report


def transport_refinement(grid):
    """
    Transport error against the closed-form Clifford link on grid and on
    grid.refine(), and the error of their Richardson combination.
    """
    fine_grid = grid.refine()
    exact = surfaces.clifford_point(grid.z)
    fine_exact = surfaces.clifford_point(fine_grid.z)
    coarse = flat_section_transport(exact, exact[grid.basepoint], grid).link
    fine = flat_section_transport(fine_exact, fine_exact[fine_grid.basepoint], fine_grid).link[::2, ::2]
    extrapolated = (16 * fine - coarse) / 15
    return tuple(float(np.max(np.abs(link - exact))) for link in (coarse, fine, extrapolated))


def cones_suite(config):
    report = Report('verify cones')
    grid = fixture_grid(config, 'clifford')
    frame, exact = surfaces.example_surface('clifford', grid, config.spec.N)
    angle = lagrangian_angle(exact)
    lift = legendrian_frame(frame.at_lambda(0), angle, grid)
    f = surfaces.clifford_point(grid.z)
    derivatives = surfaces.clifford_point_derivatives(grid.z)
    p0, q0 = grid.basepoint
    phase = np.vdot(f[p0, q0], lift.link[p0, q0])
    report.add('cones_clifford_link', float(np.max(np.abs(lift.link - phase * f))), CLOSED_FORM_TOL)
    fundamental = fundamental_lift(f, grid, derivatives)
    report.add('cones_clifford_angle_transfer', float(np.max(np.abs(fundamental.cone_angle - angle.beta))),
               CLOSED_FORM_TOL)
    report.add('cones_clifford_horizontality', lift.horizontality, grid.fd_tolerance())

    points = project_cp2(frame.at_lambda(0))
    transport = flat_section_transport(points, lift.link[p0, q0], grid)
    report.add('cones_transport_agreement', float(np.max(np.abs(transport.link - lift.link))),
               grid.fd_tolerance(order=4))
    coarse, fine, extrapolated = transport_refinement(TRANSPORT_GRID)
    report.add_range('cones_transport_refinement_ratio', coarse / fine, *TRANSPORT_RATIO)
    report.add('cones_transport_extrapolated', extrapolated, ROUNDTRIP_TOL)
    turned = flat_section_transport(points, np.exp(0.7j) * lift.link[p0, q0], grid)
    report.add('cones_circle_ambiguity', float(np.max(np.abs(turned.link - np.exp(0.7j) * transport.link))),
               EXACT_TOL)
    mesh = cone_mesh(f, (0.5, 1.0), grid, derivatives)
    report.add('cones_clifford_lagrangian', mesh.lagrangian, EXACT_TOL)

    rng = _rng(config)
    params = surfaces.VacuumParams.random(rng, scale=0.5)
    vgrid = fixture_grid(config, 'vacuum')
    vframe = surfaces.vacuum_frame(params, vgrid, config.spec.N)
    vangle = lagrangian_angle(surfaces.vacuum_form(params, vgrid))
    vlift = legendrian_frame(vframe.at_lambda(0), vangle, vgrid)
    report.add('cones_vacuum_determinant', vlift.det_defect, 1e-10)
    report.add('cones_vacuum_z_component', vlift.z_component, vgrid.fd_tolerance())
    report.add('cones_vacuum_horizontality', vlift.horizontality, vgrid.fd_tolerance())
    vfundamental = fundamental_lift(vlift.link, vgrid)
    gap = np.angle(np.exp(1j * (vfundamental.cone_angle - vangle.beta)))
    report.add('cones_vacuum_angle_transfer', float(np.max(np.abs(_interior(gap)))), vgrid.fd_tolerance())
    return report


def iwasawa_suite(config):
    rng = _rng(config)
    spec = config.spec
    report = Report('verify iwasawa')
    reports, unitary_gap, plus_gap, twisting = [], [], [], []
    for scale in FIXTURE_SCALES:
        unitary, plus, phi = iwasawa_fixture(rng, CP2, spec.N, FACTORIZATION_SAMPLES, scale)
        result = loop_iwasawa(phi, spec, strict=False)
        reports.append(result.report(spec.tol_unitary))
        unitary_gap.append(unitary.distance(result.unitary_factor))
        plus_gap.append(plus.distance(result.positive_factor))
        twisting.append(result.unitary_factor.twisting_residual())
        report.note(f'iwasawa_max_fourier_cap_scale_{scale:g}', result.max_fourier_cap)
    merge_worst(report, reports, '')
    report.add('iwasawa_recovered_unitary', max(unitary_gap), CLOSED_FORM_TOL)
    report.add('iwasawa_recovered_plus', max(plus_gap), CLOSED_FORM_TOL)
    report.add('iwasawa_twisting', max(twisting), spec.tol_twist)
    try:
        loop_iwasawa(identity_loop(CH2, spec.N), spec)
        refused = 1.0
    except FactorizationError:
        refused = 0.0
    report.add('iwasawa_noncompact_refused', refused, 0)
    return report


def birkhoff_suite(config):
    rng = _rng(config)
    spec = config.spec
    report = Report('verify birkhoff')
    reports, misses, minus_gap, plus_gap = [], [], [], []
    for scale in FIXTURE_SCALES:
        minus, plus, phi = birkhoff_fixture(rng, CP2, spec.N, FACTORIZATION_SAMPLES, scale)
        split = birkhoff(phi, spec)
        reports.append(split.report(spec.tol_unitary))
        misses.append(len(split.misses))
        minus_gap.append(minus.distance(split.minus_factor))
        plus_gap.append(plus.distance(split.plus_factor))
    merge_worst(report, reports, '')
    report.add('birkhoff_big_cell_misses', sum(misses), 0)
    report.add('birkhoff_recovered_minus', max(minus_gap), CLOSED_FORM_TOL)
    report.add('birkhoff_recovered_plus', max(plus_gap), CLOSED_FORM_TOL)
    flagged = birkhoff(off_big_cell_loop(spec.N), spec)
    report.add('birkhoff_off_cell_flagged', 0.0 if not flagged.all_big_cell else 1.0, 0)
    return report


def family_suite(config):
    rng = _rng(config)
    grid = fixture_grid(config, 'vacuum')
    N = config.spec.N
    report = Report('verify family')
    params = surfaces.VacuumParams.random(rng, scale=0.5)
    frame = surfaces.vacuum_frame(params, grid, N)
    alpha = extract_maurer_cartan(frame)
    report.add('family_flatness', max(alpha.flatness_residual().values()), grid.fd_tolerance())

    members = [surface_from_frame(frame, alpha, frame.lambdas[j]) for j in range(0, N, N // FAMILY_MEMBERS)]
    base = members[0]
    report.add('family_conformal_invariance',
               max(float(np.max(np.abs(m.rho - base.rho))) for m in members), CLOSED_FORM_TOL)
    report.add('family_stationarity', max(m.residuals['stationarity'] for m in members), grid.fd_tolerance())
    moved = surface_from_frame(frame, alpha, 1j)
    report.add_range('family_points_moved', float(np.max(np.abs(moved.points - base.points))), 1e-6, np.inf)
    return report


def archive_suite(config):
    archive = read_archive(config.archive)
    frame = ExtendedFrame(archive.grid, archive.samples, archive.case)
    grid = archive.grid
    spec = config.spec
    report = Report(f'verify archive {config.archive.name}')
    loop = frame.as_loop()
    report.add('archive_unitarity', loop.unitarity_residual(), spec.tol_unitary)
    report.add('archive_twisting', loop.twisting_residual(), spec.tol_unitary)
    report.add('archive_basepoint', frame.basepoint_defect(), spec.tol_unitary)
    alpha = extract_maurer_cartan(frame)
    report.add('archive_flatness', max(alpha.flatness_residual().values()), grid.fd_tolerance())
    report.add('archive_partial_primitivity', alpha.partial_primitivity_residual(), grid.fd_tolerance())
    report.note('case', archive.case.name)
    report.note('grid', f'{grid.nx}x{grid.ny} on {grid.domain}')
    report.note('lambda_samples', archive.N)
    report.note('fourier_cap', archive.K)
    return report


SUITES = {
    'algebra': algebra_suite,
    'clifford': clifford_suite,
    'rp2': rp2_suite,
    'vacuum': vacuum_suite,
    'roundtrip': roundtrip_suite,
    'cones': cones_suite,
    'iwasawa': iwasawa_suite,
    'birkhoff': birkhoff_suite,
    'family': family_suite,
    'archive': archive_suite,
}


def run_suite(name, config):
    try:
        suite = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite '{name}'; choose one of {', '.join(SUITES)}") from None
    started = time.perf_counter()
    try:
        report = suite(config)
    except HslagError as exc:
        logger.error('suite %s stopped: %s', name, exc)
        report = Report(f'verify {name}')
        report.warn(str(exc))
        report.add('suite_error', 1.0, 0)
    report.note('suite', name)
    report.note('seed', config.seed)
    logger.info('suite %s: %s in %.2fs', name, 'pass' if report.passed else 'fail', time.perf_counter() - started)
    return report
