"""
Closed-form surfaces: the real projective plane, the Clifford torus and the
vacuum family of constant potentials.

Frames are generated from the explicit formulas at call time. Each generator
comes with its exact Maurer-Cartan form, which the verification suites use
as the oracle for the finite-difference pipeline.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .algebra import CP2, EPSILON, LieMatrix, bracket, frobenius
from .dpw import ExtendedFrame, HoloPotential, MCForm
from .loops import TwistedAlgebraLoop, lambda_grid

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)
SQRT6 = np.sqrt(6.0)

K_RP2 = np.array([[0, -1j, 0], [1j, 0, 0], [0, 0, 0]], dtype=complex)
A_CLIFFORD = 0.5 * np.array([[1j, -1, 0], [-1, -1j, 0], [0, 0, 0]], dtype=complex)

EXAMPLE_CHOICES = (
    ('rp2', 'Real projective plane'),
    ('clifford', 'Clifford torus'),
    ('vacuum', 'Vacuum family'),
)

# the rp2 chart degenerates on |z| = 1
EXAMPLE_DOMAINS = {
    'rp2': (-0.6, -0.6, 0.6, 0.6),
    'clifford': (0.0, 0.0, np.pi, 2 * np.pi / SQRT3),
    'vacuum': (-1.0, -1.0, 1.0, 1.0),
}

# translations of the Clifford parametrization fixing the projected point
CLIFFORD_PERIODS = (np.pi + 1j * np.pi / SQRT3, 2j * np.pi / SQRT3)


def rp2_frame_field(z):
    """Real orthogonal frames of the projective plane chart, shape z.shape + (3, 3)."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    F = np.empty(z.shape + (3, 3))
    F[..., 0, 0] = 1 - x ** 2 + y ** 2
    F[..., 0, 1] = -2 * x * y
    F[..., 0, 2] = 2 * x
    F[..., 1, 0] = -2 * x * y
    F[..., 1, 1] = 1 + x ** 2 - y ** 2
    F[..., 1, 2] = 2 * y
    F[..., 2, 0] = -2 * x
    F[..., 2, 1] = -2 * y
    F[..., 2, 2] = 1 - x ** 2 - y ** 2
    return (F / (1 + np.abs(z) ** 2)[..., None, None]).astype(complex)


def rp2_frame(z):
    return LieMatrix(rp2_frame_field(complex(z)), 'gl3C')


def _clifford_phases(z):
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    e1 = np.exp(2j * x)
    e2 = np.exp(1j * (SQRT3 * y - x))
    e3 = np.exp(-1j * (x + SQRT3 * y))
    return e1, e2, e3


def clifford_frame_field(z):
    e1, e2, e3 = _clifford_phases(z)
    zero = np.zeros_like(e1)
    rows = [
        np.stack([2j * e1, zero, SQRT2 * e1], axis=-1),
        np.stack([-1j * e2, 1j * SQRT3 * e2, SQRT2 * e2], axis=-1),
        np.stack([-1j * e3, -1j * SQRT3 * e3, SQRT2 * e3], axis=-1),
    ]
    return np.stack(rows, axis=-2) / SQRT6


def clifford_frame(z):
    return LieMatrix(clifford_frame_field(complex(z)), 'gl3C')


def clifford_point(z):
    """Horizontal parametrization of the Clifford link in S^5, shape z.shape + (3,)."""
    return np.stack(_clifford_phases(z), axis=-1) / SQRT3


def clifford_point_derivatives(z):
    """Exact d/dx and d/dy of ``clifford_point``."""
    f = clifford_point(z)
    return f * np.array([2j, -1j, -1j]), f * np.array([0, 1j * SQRT3, -1j * SQRT3])


@dataclass(frozen=True)
class VacuumParams:
    """
    Parameters (b, c) of a constant potential.

    The commuting condition fixes a = -(conj(c) + i conj(b)) / 3 and the
    conformal factor e^(2 rho) = 8 Im(conj(b) c), which must be positive.
    """

    b: complex
    c: complex

    def __post_init__(self):
        object.__setattr__(self, 'b', complex(self.b))
        object.__setattr__(self, 'c', complex(self.c))
        if not self.imag_product > 0:
            raise ValueError(
                f"vacuum parameters need Im(conj(b) c) > 0, got {self.imag_product:.6g} for b={self.b}, c={self.c}"
            )

    @classmethod
    def minimal(cls, b):
        """The minimal member c = i b."""
        return cls(b, 1j * complex(b))

    @classmethod
    def random(cls, rng, scale=1.0):
        b, c = scale * (rng.normal(size=2) + 1j * rng.normal(size=2))
        if (np.conj(b) * c).imag < 0:
            c = -c
        return cls(b, c)

    @property
    def imag_product(self):
        return float((np.conj(self.b) * self.c).imag)

    @property
    def a(self):
        return -(np.conj(self.c) + 1j * np.conj(self.b)) / 3

    @property
    def e_rho(self):
        return float(np.sqrt(8 * self.imag_product))

    @property
    def is_minimal(self):
        return abs(self.a) <= 1e-14 * max(1.0, abs(self.b), abs(self.c))

    def scaled(self, t):
        return VacuumParams(t * self.b, t * self.c)

    def with_argument(self, phase):
        """Same |b| and c with b turned so that arg(conj(b) c) = phase."""
        return VacuumParams(abs(self.b) * np.exp(1j * (np.angle(self.c) - phase)), self.c)


CLIFFORD_PARAMS = VacuumParams.minimal(0.5j)


def vacuum_coefficients(params):
    """{k: matrix} coefficients of M_lambda on the modes -2..0."""
    block = np.zeros((3, 3), dtype=complex)
    block[:2, :2] = [[params.b, params.c], [params.c, -params.b]]
    return {
        -2: -3 * params.a * CP2.Y,
        -1: params.e_rho * EPSILON,
        0: block,
    }


def vacuum_loop(params):
    """The constant loop M_lambda as a twisted algebra loop on the modes -2..0."""
    table = vacuum_coefficients(params)
    return TwistedAlgebraLoop(np.stack([table[k] for k in (-2, -1, 0)]), -2, CP2)


def vacuum_commutator(params, N):
    """Per lambda sample |[M_lambda, tilde(M)_lambda]|, shape (N,)."""
    M = vacuum_loop(params)
    return frobenius(bracket(M.synthesize(N), M.tilde().synthesize(N)))


def vacuum_potential(params, domain=None):
    return HoloPotential.constant(CP2, vacuum_coefficients(params), domain)


def vacuum_frame(params, grid, N):
    """exp(z M + zbar tilde(M)) on the grid; the two terms commute, so the product splits in x and y."""
    M = vacuum_loop(params)
    Mz = M.synthesize(N)
    Mzbar = M.tilde().synthesize(N)
    ax = Mz + Mzbar
    ay = 1j * (Mz - Mzbar)
    Ex = linalg.expm(grid.xs[:, None, None, None] * ax)
    Ey = linalg.expm(grid.ys[:, None, None, None] * ay)
    samples = Ex[:, None] @ Ey[None, :]
    return ExtendedFrame(grid, samples, CP2, {'source': 'vacuum closed form'})


def rp2_extended_frame(grid, N):
    """F_lambda(z) = F(z / lambda)."""
    z = grid.z[..., None] / lambda_grid(N)
    return ExtendedFrame(grid, rp2_frame_field(z), CP2, {'source': 'rp2 closed form'})


def clifford_extended_frame(grid, N):
    vacuum = vacuum_frame(CLIFFORD_PARAMS, grid, N)
    samples = clifford_frame_field(0) @ vacuum.samples
    return ExtendedFrame(grid, samples, CP2, {'source': 'clifford closed form'})


def _exact_form(grid, coeffs, k_min):
    a_z = TwistedAlgebraLoop(coeffs, k_min, CP2).restrict(-2, 2)
    a_zbar = a_z.tilde().restrict(-2, 2)
    return MCForm(grid, CP2, a_z, a_zbar, 0.0, grid.boundary, exact=True)


def rp2_form(grid):
    z = grid.z
    scale = (1 / (1 + np.abs(z) ** 2))[..., None, None]
    coeffs = np.stack([2 * EPSILON * scale, K_RP2 * (np.conj(z)[..., None, None] * scale)], axis=-3)
    return _exact_form(grid, coeffs, -1)


def _constant_form(grid, M):
    coeffs = np.broadcast_to(M.coeffs, grid.shape + M.coeffs.shape).copy()
    return _exact_form(grid, coeffs, M.k_min)


def clifford_form(grid):
    return _constant_form(grid, vacuum_loop(CLIFFORD_PARAMS))


def vacuum_form(params, grid):
    return _constant_form(grid, vacuum_loop(params))


def example_surface(name, grid, N, params=None):
    """Extended frame and exact Maurer-Cartan form of a named closed-form surface."""
    if name == 'rp2':
        return rp2_extended_frame(grid, N), rp2_form(grid)
    if name == 'clifford':
        return clifford_extended_frame(grid, N), clifford_form(grid)
    if name == 'vacuum':
        params = params or CLIFFORD_PARAMS
        return vacuum_frame(params, grid, N), vacuum_form(params, grid)
    choices = ', '.join(key for key, _ in EXAMPLE_CHOICES)
    raise ValueError(f"unknown example '{name}'; choose one of {choices}")
