# backend/lagrangian/dpw.py
"""
Weierstrass machinery: holomorphic potentials, the integration dH = H mu,
the extended frame via loop Iwasawa, Maurer-Cartan extraction and the two
inverse constructions (holomorphic lift and meromorphic extraction).

Convention: F = H B with H holomorphic in z and B a plus-loop, used in both
directions.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

from .algebra import dagger, frobenius
from .exceptions import FactorizationError, IntegrationError
from .factorization import birkhoff, loop_iwasawa
from .loops import TWIST_TOL, FourierTable, TwistedAlgebraLoop, TwistedGroupLoop, identity_loop, lambda_grid
from .reports import Report

logger = logging.getLogger(__name__)

MAX_SUBSTEPS = 64
STEP_TOL = 1e-11
FIT_DEGREE = 16


@dataclass(frozen=True, eq=False)
class HoloPotential:
    """
    mu = sum_k lambda^k mu_k(z) dz with mu_k polynomial in z:
    ``coeffs[k - k_min, d]`` is the matrix coefficient of lambda^k z^d.
    """

    coeffs: np.ndarray
    case: object
    k_min: int = -2
    domain: tuple = None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        n = self.case.size
        if coeffs.ndim != 4 or coeffs.shape[-2:] != (n, n):
            raise ValueError(f"potential coefficients need shape (modes, degrees, {n}, {n}), got {coeffs.shape}")
        object.__setattr__(self, 'coeffs', coeffs)

    @classmethod
    def zero(cls, case, domain=None):
        return cls(np.zeros((1, 1, case.size, case.size)), case, -2, domain)

    @classmethod
    def constant(cls, case, table, domain=None):
        """Potential with z-independent coefficients from a {k: matrix} table."""
        if not table:
            return cls.zero(case, domain)
        k_min = min(min(table), -2)
        k_max = max(table)
        coeffs = np.zeros((k_max - k_min + 1, 1, case.size, case.size), dtype=complex)
        for k, matrix in table.items():
            coeffs[k - k_min, 0] = matrix
        return cls(coeffs, case, k_min, domain)

    @property
    def k_max(self):
        return self.k_min + self.coeffs.shape[0] - 1

    @property
    def modes(self):
        return np.arange(self.k_min, self.k_max + 1)

    @property
    def degree(self):
        return self.coeffs.shape[1] - 1

    def is_zero(self, tol=0.0):
        return float(np.max(np.abs(self.coeffs), initial=0.0)) <= tol

    def table(self, z):
        """Fourier coefficients at the points z, as a FourierTable of shape z.shape."""
        z = np.asarray(z, dtype=complex)
        powers = z[..., None] ** np.arange(self.degree + 1)
        values = np.einsum('...d,mdij->...mij', powers, self.coeffs)
        return FourierTable(values, self.k_min, self.case)

    def samples(self, z, N):
        return self.table(z).synthesize(N)


def validate_potential(mu, tol=TWIST_TOL):
    """Twisting, support and leading-term checks of a holomorphic potential."""
    report = Report('potential')
    below = mu.modes < -2
    report.add('potential_support_lower', float(np.sqrt(np.sum(np.abs(mu.coeffs[below]) ** 2))), tol)

    twisting = 0.0
    for i, k in enumerate(mu.modes):
        c = mu.coeffs[i]
        twisting = max(twisting, float(np.max(frobenius(mu.case.tau(c) - (1j ** k) * c), initial=0.0)))
    report.add('potential_twisting', twisting, tol)

    leading = mu.coeffs[list(mu.modes).index(-2)] if -2 in mu.modes else np.zeros((1, mu.case.size, mu.case.size))
    coords = mu.case.g2_coordinates(leading)
    along = sum(coords[..., j, None, None] * E for j, E in enumerate(mu.case.g2_basis))
    report.add('potential_leading_direction', float(np.max(frobenius(leading - along), initial=0.0)), tol)

    report.note('modes', f'{mu.k_min}..{mu.k_max}')
    report.note('degree', mu.degree)
    if mu.is_zero():
        report.warn('potential is identically zero; the surface degenerates to a point')
    elif -1 not in mu.modes or np.allclose(mu.coeffs[list(mu.modes).index(-1)], 0):
        report.warn('lambda^-1 coefficient vanishes; the surface is not immersed')
    return report


@dataclass(eq=False)
class LoopField:
    """Loops at every grid node: ``samples`` has shape (nx, ny, N, n, n)."""

    grid: object
    samples: np.ndarray
    case: object
    diagnostics: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.samples.shape[2]

    @property
    def lambdas(self):
        return lambda_grid(self.N)

    def loop(self, p, q):
        return TwistedGroupLoop(self.samples[p, q], self.case)

    def as_loop(self):
        return TwistedGroupLoop(self.samples, self.case)

    def at_lambda(self, j):
        return self.samples[:, :, j]

    def lambda_index(self, lam0, tol=1e-9):
        lam0 = complex(lam0)
        distance = np.abs(self.lambdas - lam0)
        j = int(np.argmin(distance))
        if distance[j] > tol:
            raise ValueError(f"lambda0 = {lam0} is not one of the {self.N} lambda samples")
        return j


class ExtendedFrame(LoopField):
    """Unitary twisted loops F_lambda(z); ``build_extended_frame`` normalizes them to 1 at the basepoint."""

    def basepoint_defect(self):
        p, q = self.grid.basepoint
        return float(np.max(frobenius(self.samples[p, q] - np.eye(self.case.size))))


def _rk4(H, z, direction, length, substeps, mu, N):
    h = length / substeps
    dz = direction * h

    def rate(point):
        return direction * mu.samples(point, N)

    for s in range(substeps):
        z0 = z + s * dz
        A0 = rate(z0)
        Ah = rate(z0 + dz / 2)
        A1 = rate(z0 + dz)
        k1 = H @ A0
        k2 = (H + 0.5 * h * k1) @ Ah
        k3 = (H + 0.5 * h * k2) @ Ah
        k4 = (H + h * k3) @ A1
        H = H + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return H


class _Marcher:
    """Fourth order one-step integration along edges with step doubling."""

    def __init__(self, mu, N, tol, max_substeps):
        self.mu = mu
        self.N = N
        self.tol = tol
        self.max_substeps = max_substeps
        self.substeps = 1
        self.largest = 1

    def edge(self, H, z, direction, length, label):
        """Advance H from the points z by ``length`` along ``direction`` (1 or 1j)."""
        m = max(1, self.substeps // 2)
        while True:
            coarse = _rk4(H, z, direction, length, m, self.mu, self.N)
            fine = _rk4(H, z, direction, length, 2 * m, self.mu, self.N)
            scale = max(1.0, float(np.max(np.abs(fine))))
            error = float(np.max(np.abs(fine - coarse))) / scale
            if error <= self.tol:
                self.substeps = 2 * m
                self.largest = max(self.largest, 2 * m)
                return fine
            m *= 2
            if 2 * m > self.max_substeps:
                raise IntegrationError(
                    f"local error {error:.3e} exceeds tolerance {self.tol:.1e} with {self.max_substeps} substeps",
                    label,
                )

    def line(self, H0, z_line, start, direction, spacing, axis_name):
        """Integrate outwards from index ``start`` along a line of points; batch over leading axes."""
        count = z_line.shape[-1]
        out = np.empty(z_line.shape + H0.shape[-3:], dtype=complex)
        out[..., start, :, :, :] = H0
        H = H0
        for i in range(start, count - 1):
            H = self.edge(H, z_line[..., i], direction, spacing, f"{axis_name} {i}->{i + 1}")
            out[..., i + 1, :, :, :] = H
        H = H0
        for i in range(start, 0, -1):
            H = self.edge(H, z_line[..., i], direction, -spacing, f"{axis_name} {i}->{i - 1}")
            out[..., i - 1, :, :, :] = H
        return out


def integrate_potential(mu, H0, grid, tol=STEP_TOL, max_substeps=MAX_SUBSTEPS, check_paths=True):
    """
    Solve dH = H mu on the grid with H(p0) = H0.

    Primary path: the basepoint column (y direction) first, then every row
    (x direction). The alternate path integrates rows first; the largest
    disagreement between the two is the path residual.
    """
    if mu.case is not H0.case:
        raise ValueError(f"case mismatch: potential {mu.case.name}, initial loop {H0.case.name}")
    N = H0.N
    p0, q0 = grid.basepoint
    z = grid.z
    marcher = _Marcher(mu, N, tol, max_substeps)

    column = marcher.line(H0.samples, z[p0, :], q0, 1j, grid.hy, f"y (x index {p0})")
    H = np.moveaxis(marcher.line(column, z.T, p0, 1.0, grid.hx, 'x'), 1, 0)

    diagnostics = {'substeps': marcher.largest}
    if check_paths:
        row = marcher.line(H0.samples, z[:, q0], p0, 1.0, grid.hx, f"x (y index {q0})")
        H_alt = marcher.line(row, z, q0, 1j, grid.hy, 'y')
        scale = max(1.0, float(np.max(np.abs(H))))
        diagnostics['path_residual'] = float(np.max(frobenius(H - H_alt))) / scale
    logger.info('integrated potential on %dx%d grid, N=%d, up to %d substeps per edge',
                grid.nx, grid.ny, N, marcher.largest)
    return LoopField(grid, H, mu.case, diagnostics)


def build_extended_frame(H, spec, check_resolution=True):
    """
    Per-node loop Iwasawa H = F B, then F -> F(p0)^-1 F.

    Returns the frame and the B field. With ``check_resolution`` the Fourier
    cap is raised node by node until consecutive caps agree.
    """
    result = loop_iwasawa(H.as_loop(), spec, strict=False, check_resolution=check_resolution)
    if not result.converged:
        raise FactorizationError(
            f"extended frame: loop Iwasawa residual {result.residual:.3e} "
            f"(resolution gap {result.resolution_gap or 0.0:.3e}) above {spec.tol_unitary:.1e}",
            result.failed_nodes,
        )
    F = result.unitary_factor.samples
    p0, q0 = H.grid.basepoint
    F = dagger(F[p0, q0]) @ F

    diagnostics = {
        'iwasawa_residual': result.residual,
        'iwasawa_spectral_identity': result.spectral_residual,
        'iwasawa_negative_modes': result.negative_mass,
        'fourier_cap_used': result.max_fourier_cap,
    }
    if result.resolution_gap is not None:
        diagnostics['iwasawa_resolution_gap'] = result.resolution_gap
        diagnostics['under_resolved'] = result.under_resolved
    logger.info('extended frame on %dx%d grid: Iwasawa residual %.3e up to K=%d',
                H.grid.nx, H.grid.ny, result.residual, result.max_fourier_cap)
    frame = ExtendedFrame(H.grid, F, H.case, diagnostics)
    return frame, LoopField(H.grid, result.positive_factor.samples, H.case)


@dataclass(eq=False)
class MCForm:
    """
    alpha_lambda = a_z dz + a_zbar dzbar as coefficient fields over the grid.

    ``a_z`` and ``a_zbar`` are TwistedAlgebraLoop tables with batch shape
    (nx, ny) on the modes -2..2.
    """

    grid: object
    case: object
    a_z: TwistedAlgebraLoop
    a_zbar: TwistedAlgebraLoop
    out_of_band: float = 0.0
    boundary: np.ndarray = None
    exact: bool = False

    def interior(self, margin=1):
        mask = np.zeros(self.grid.shape, dtype=bool)
        mask[margin:-margin, margin:-margin] = True
        return mask

    def samples(self, N):
        return self.a_z.synthesize(N), self.a_zbar.synthesize(N)

    def at_lambda(self, lam):
        return self.a_z.evaluate(lam), self.a_zbar.evaluate(lam)

    def xy(self, N):
        a, abar = self.samples(N)
        return a + abar, 1j * (a - abar)

    def flatness_field(self, N=16):
        """Per node and mode |d alpha + alpha ^ alpha|, shape (nx, ny, modes)."""
        ax, ay = self.xy(N)
        dax_dy = np.gradient(ax, self.grid.hy, axis=1, edge_order=2)
        day_dx = np.gradient(ay, self.grid.hx, axis=0, edge_order=2)
        residual = day_dx - dax_dy + ax @ ay - ay @ ax
        spectrum = np.fft.fft(residual, axis=2) / N
        modes = np.arange(-4, 5)
        return modes, frobenius(spectrum[:, :, modes % N])

    def flatness_residual(self, N=16, margin=1):
        modes, values = self.flatness_field(N)
        inside = values[self.interior(margin)]
        return {int(k): float(np.max(inside[:, i])) for i, k in enumerate(modes)}

    def partial_primitivity_residual(self):
        return float(max(np.max(frobenius(self.a_zbar[-1])), np.max(frobenius(self.a_z[1]))))

    def support_residual(self):
        """Mass of dz parts on positive modes and dzbar parts on negative modes."""
        wrong = [self.a_z[k] for k in (1, 2)] + [self.a_zbar[k] for k in (-2, -1)]
        return max(float(np.max(frobenius(c))) for c in wrong)

    def reality_residual(self):
        return max(
            float(np.max(frobenius(self.a_zbar[k] - self.case.tilde(self.a_z[-k]))))
            for k in range(-2, 3)
        )

    def twisting_residual(self):
        return max(self.a_z.twisting_residual(), self.a_zbar.twisting_residual())

    def report(self, tol, flat_tol):
        report = Report('maurer-cartan form')
        report.add('mc_out_of_band', self.out_of_band, tol)
        report.add('mc_support', self.support_residual(), tol)
        report.add('mc_reality', self.reality_residual(), tol)
        report.add('mc_twisting', self.twisting_residual(), tol)
        report.add('mc_partial_primitivity', self.partial_primitivity_residual(), tol)
        flatness = self.flatness_residual()
        report.add('mc_flatness', max(flatness.values()), flat_tol)
        report.note('mc_source', 'closed form' if self.exact else 'finite differences')
        return report


def _band(samples, case, k_lo, k_hi, real):
    N = samples.shape[-3]
    spectrum = np.fft.fft(samples, axis=-3) / N
    modes = np.arange(k_lo, k_hi + 1)
    coeffs = spectrum[..., modes % N, :, :]
    others = np.ones(N, dtype=bool)
    others[modes % N] = False
    mass = np.sqrt(np.sum(np.abs(spectrum[..., others, :, :]) ** 2, axis=(-3, -2, -1)))
    return TwistedAlgebraLoop(coeffs, k_lo, case, real), mass


def extract_maurer_cartan(F, k_lo=-2, k_hi=2):
    """Second-order finite differences of F on the grid; boundary nodes use one-sided stencils."""
    S = F.samples
    Fx, Fy = F.grid.gradient(S)
    Finv = np.linalg.inv(S)
    a_z, mass_z = _band(Finv @ (Fx - 1j * Fy) / 2, F.case, k_lo, k_hi, False)
    a_zbar, mass_zbar = _band(Finv @ (Fx + 1j * Fy) / 2, F.case, k_lo, k_hi, False)
    out_of_band = float(np.max(np.maximum(mass_z, mass_zbar)))
    logger.debug('Maurer-Cartan extraction: out-of-band mass %.3e', out_of_band)
    return MCForm(F.grid, F.case, a_z, a_zbar, out_of_band, F.grid.boundary)


def mc_from_samples(grid, case, a_z_samples, a_zbar_samples, exact=True):
    """MCForm from sampled closed-form values a(z, lambda_j)."""
    a_z, mass_z = _band(a_z_samples, case, -2, 2, False)
    a_zbar, mass_zbar = _band(a_zbar_samples, case, -2, 2, False)
    return MCForm(grid, case, a_z, a_zbar, float(np.max(np.maximum(mass_z, mass_zbar))),
                  grid.boundary, exact)


def _scaling(grid):
    center = 0.5 * complex(grid.x0 + grid.x1, grid.y0 + grid.y1)
    radius = 0.5 * abs(complex(grid.x1 - grid.x0, grid.y1 - grid.y0))
    return center, radius


def _vander(w, degree):
    return w[:, None] ** np.arange(degree + 1)


def _holomorphic_fit(field, grid, degree, valid=None):
    """
    Least-squares fit of a field (nx, ny, ...) by a polynomial in the scaled
    variable w = (z - c) / r. Returns values, d/dz and the relative residual.
    """
    center, radius = _scaling(grid)
    w = ((grid.z - center) / radius).reshape(-1)
    values = field.reshape(w.shape[0], -1)
    valid = np.ones(w.shape[0], dtype=bool) if valid is None else valid.reshape(-1)
    degree = min(degree, int(valid.sum()) - 1)
    V = _vander(w, degree)
    coeffs, *_ = np.linalg.lstsq(V[valid], values[valid], rcond=None)
    fitted = V @ coeffs
    dV = np.zeros_like(V)
    dV[:, 1:] = V[:, :-1] * np.arange(1, degree + 1)
    derivative = (dV @ coeffs) / radius
    scale = max(1.0, float(np.max(np.abs(values[valid]))))
    residual = float(np.max(np.abs(fitted[valid] - values[valid]))) / scale
    shape = field.shape
    return fitted.reshape(shape), derivative.reshape(shape), residual, coeffs, (center, radius)


def _to_z_powers(coeffs_w, center, radius):
    """Coefficients of sum_d c_d ((z - center)/radius)^d in powers of z."""
    D = coeffs_w.shape[0]
    T = np.zeros((D, D), dtype=complex)
    for d in range(D):
        for j in range(d + 1):
            T[j, d] = comb(d, j) * (-center) ** (d - j) / radius ** d
    return np.tensordot(T, coeffs_w, axes=(1, 0))


@dataclass(eq=False)
class LiftResult:
    H: LoopField
    B: LoopField
    potential: HoloPotential
    report: Report


def lift_to_potential(F, spec, degree=6, fit_degree=FIT_DEGREE):
    """
    Holomorphic potential of an extended frame.

    The per-node Birkhoff split F = F_minus F_plus gives H = F_minus F_plus(p0)
    and B = F_plus(p0)^-1 F_plus, so F = H B with B(p0) = 1 and H holomorphic.
    mu = H^-1 dH/dz is fitted by polynomials of the given degree.
    """
    case = F.case
    grid = F.grid
    N = F.N
    n = case.size
    p0, q0 = grid.basepoint
    report = Report('holomorphic lift')

    split = birkhoff(F.as_loop(), spec)
    valid = np.asarray(split.big_cell)
    report.note('lift_method', 'per-node Birkhoff split F = F_minus F_plus, H = F_minus F_plus(p0)')
    report.add('lift_birkhoff_misses', len(split.misses), 0)
    report.add('lift_birkhoff_unresolved', len(split.unresolved), 0)
    if not valid[p0, q0]:
        raise FactorizationError('frame is off the big cell at the basepoint', [(p0, q0)])
    plus0 = split.plus_factor.samples[p0, q0]
    H = split.minus_factor.samples @ plus0
    B = np.linalg.inv(plus0) @ split.plus_factor.samples

    H_fit, dH, fit_residual, _, _ = _holomorphic_fit(H, grid, fit_degree, valid)
    report.add('lift_holomorphic_fit', fit_residual, spec.tol_flat)

    interior = np.zeros(grid.shape, dtype=bool)
    interior[1:-1, 1:-1] = True
    interior &= valid
    Hx, Hy = grid.gradient(np.where(valid[..., None, None, None], H, 0))
    dbar_H = frobenius(0.5 * (Hx + 1j * Hy)).max(axis=-1)
    holomorphy = float(np.max(dbar_H[interior], initial=0.0))
    report.add('lift_holomorphy', holomorphy, grid.fd_tolerance())

    alpha = extract_maurer_cartan(F)
    a_zbar = alpha.a_zbar.synthesize(N)
    Bx, By = grid.gradient(np.where(valid[..., None, None, None], B, 0))
    dbar_B = frobenius(0.5 * (Bx + 1j * By) - B @ a_zbar).max(axis=-1)
    report.add('lift_dbar_equation', float(np.max(dbar_B[interior], initial=0.0)), grid.fd_tolerance())

    mu_nodes = np.linalg.solve(np.where(valid[..., None, None, None], H_fit, np.eye(n)), dH)
    table, mass = _band(mu_nodes, case, -2, spec.K, False)
    report.add('lift_out_of_band', float(np.max(mass[valid], initial=0.0)), spec.tol_flat)

    _, _, mu_residual, coeffs_w, (center, radius) = _holomorphic_fit(
        table.coeffs, grid, degree, valid
    )
    report.add('lift_potential_fit', mu_residual, spec.tol_flat)
    coeffs = _to_z_powers(coeffs_w, center, radius)
    coeffs = coeffs.reshape((coeffs.shape[0],) + table.coeffs.shape[2:])
    coeffs = np.moveaxis(coeffs, 0, 1)

    twisting = 0.0
    for i, k in enumerate(table.modes):
        projected = case.project(coeffs[i], k)
        twisting = max(twisting, float(np.max(frobenius(coeffs[i] - projected))))
        coeffs[i] = projected
    report.add('lift_potential_twisting', twisting, spec.tol_flat)

    for check in report.failures:
        message = f'{check.name} = {check.value:.3e} exceeds {check.tol:.1e}'
        report.warn(message)
        logger.warning('holomorphic lift: %s', message)

    potential = HoloPotential(coeffs, case, -2, grid.domain)
    return LiftResult(LoopField(grid, H, case), LoopField(grid, B, case), potential, report)


@dataclass(eq=False)
class MeromorphicResult:
    minus: LoopField
    potential: TwistedAlgebraLoop
    misses: list
    support_mass: float
    report: Report


def meromorphic_extract(F, spec, fit_degree=FIT_DEGREE):
    """
    Per-node Birkhoff split of the frame; mu = F_minus^-1 dF_minus/dz on the big cell.

    Nodes off the big cell are candidate poles and are returned in ``misses``.
    """
    case = F.case
    grid = F.grid
    n = case.size
    report = Report('meromorphic potential')
    split = birkhoff(F.as_loop(), spec)
    valid = np.asarray(split.big_cell)
    misses = split.misses
    report.add('meromorphic_plus_negative_modes', split.residual, spec.tol_unitary)
    report.add('meromorphic_minus_at_infinity', split.normalization, spec.tol_unitary)
    report.note('meromorphic_misses', len(misses))
    report.add('meromorphic_unresolved', len(split.unresolved), 0)
    if misses:
        logger.warning('meromorphic extraction: %d node(s) off the big cell', len(misses))

    minus = split.minus_factor.samples
    fitted, derivative, fit_residual, _, _ = _holomorphic_fit(
        np.where(valid[..., None, None, None], minus, 0), grid, fit_degree, valid
    )
    report.add('meromorphic_fit', fit_residual, spec.tol_flat)
    base = np.where(valid[..., None, None, None], fitted, np.eye(n))
    mu_nodes = np.linalg.solve(base, derivative)
    table, mass = _band(mu_nodes, case, -2, -1, False)
    coeffs = np.where(valid[..., None, None, None], table.coeffs, np.nan)
    support_mass = float(np.max(mass[valid], initial=0.0))
    report.add('meromorphic_support', support_mass, spec.tol_unitary)
    potential = TwistedAlgebraLoop(coeffs, -2, case)
    return MeromorphicResult(LoopField(grid, minus, case), potential, misses, support_mass, report)


@dataclass(eq=False)
class ForwardResult:
    H: LoopField
    frame: ExtendedFrame
    B: LoopField
    alpha: MCForm
    report: Report


def run_forward(mu, grid, spec, H0=None, check_resolution=True):
    """Potential -> H -> extended frame -> Maurer-Cartan form, with a residual report."""
    report = Report('forward')
    report.extend(validate_potential(mu, spec.tol_twist))
    if H0 is None:
        H0 = identity_loop(mu.case, spec.N)
    H = integrate_potential(mu, H0, grid)
    report.add('integration_path_residual', H.diagnostics['path_residual'], spec.tol_unitary)
    frame, B = build_extended_frame(H, spec, check_resolution=check_resolution)
    report.add('frame_unitarity', frame.as_loop().unitarity_residual(), spec.tol_unitary)
    report.add('frame_twisting', frame.as_loop().twisting_residual(), spec.tol_unitary)
    report.add('frame_basepoint', frame.basepoint_defect(), spec.tol_unitary)
    if 'iwasawa_resolution_gap' in frame.diagnostics:
        report.add('iwasawa_resolution_gap', frame.diagnostics['iwasawa_resolution_gap'], spec.tol_unitary)
    alpha = extract_maurer_cartan(frame)
    mc = alpha.report(spec.tol_unitary, grid.fd_tolerance())
    # twisting survives finite differences exactly; the rest is held to C h^2
    for check in mc.checks:
        tol = check.tol if check.name == 'mc_twisting' else grid.fd_tolerance()
        report.add(check.name, check.value, tol)
    report.note('grid', f'{grid.nx}x{grid.ny} on {grid.domain}')
    report.note('lambda_samples', spec.N)
    report.note('fourier_cap', spec.K)
    report.note('fourier_cap_used', frame.diagnostics['fourier_cap_used'])
    return ForwardResult(H, frame, B, alpha, report)


def refinement_ratio(measure, grid, margin=2):
    """
    Ratio of a residual field on ``grid`` to the same field on the refined
    grid, both taken at the shared interior nodes; about 4 for O(h^2).
    """
    coarse = np.asarray(measure(grid))
    fine = np.asarray(measure(grid.refine()))[::2, ::2]
    inside = np.zeros(grid.shape, dtype=bool)
    inside[margin:-margin, margin:-margin] = True
    c = float(np.max(coarse[inside]))
    f = float(np.max(fine[inside]))
    return c, f, (c / f if f > 0 else np.inf)
