"""
Surface geometry read off an extended frame and its Maurer-Cartan form.

At a fixed lambda0 the frozen frame projects to the surface through its
third column. The conformal factor is the norm of the (-1)-eigenspace part
of the dz coefficient, the Lagrangian angle integrates twice the Y
coordinate of the 2-eigenspace part, and Hamiltonian stationarity is the
vanishing of its flat codifferential.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .algebra import LieMatrix, dagger, frobenius
from .dpw import extract_maurer_cartan
from .exceptions import GeometryError

logger = logging.getLogger(__name__)

PRIMITIVITY_TOL = 1e-10
PHASE_TOL = 1e-12
CHART_TOL = 1e-8

# affine chart (z1/z3, z2/z3) in R^4 -> R^3
DEFAULT_PROJECTION = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1 / np.sqrt(2), 1 / np.sqrt(2)],
])


def normalize_phase(v, tol=PHASE_TOL):
    """Unit vectors whose first entry above ``tol`` is real positive."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    index = np.argmax(np.abs(v) > tol, axis=-1)
    pivot = np.take_along_axis(v, index[..., None], axis=-1)
    return v * (np.conj(pivot) / np.abs(pivot))


def project_cp2(F, tol=PHASE_TOL):
    """Representative of the line through F e_3, for one frame or a field of frames."""
    entries = F.entries if isinstance(F, LieMatrix) else np.asarray(F)
    return normalize_phase(entries[..., :, 2], tol)


def _default_tol(alpha, tol):
    if tol is not None:
        return tol
    return PRIMITIVITY_TOL if alpha.exact else alpha.grid.fd_tolerance()


def conformal_factor(alpha, lam0=1.0, tol=None):
    """
    rho with e^rho = |(-1)-eigenspace part of the dz coefficient|.

    Branch points, where that part vanishes, get rho = -inf.
    """
    tol = _default_tol(alpha, tol)
    a_z, a_zbar = alpha.at_lambda(lam0)
    case = alpha.case
    residual = float(np.max(frobenius(case.project(a_zbar, -1))))
    if residual > tol:
        raise GeometryError('Maurer-Cartan form is not partially primitive; the surface is not Lagrangian', residual)
    e_rho = frobenius(case.project(a_z, -1))
    with np.errstate(divide='ignore'):
        return np.log(e_rho)


@dataclass(eq=False)
class LagrangianAngle:
    """beta on the grid with its prescribed derivatives and integration diagnostics."""

    beta: np.ndarray
    beta_x: np.ndarray
    beta_y: np.ndarray
    closure: float
    curl: float


def angle_rates(alpha, lam0=1.0):
    """(d beta/dx, d beta/dy) = 2 x (Y coordinates of the 2-eigenspace part of alpha)."""
    a_z, a_zbar = alpha.at_lambda(lam0)
    c_z = alpha.case.y_coefficient(a_z)
    c_zbar = alpha.case.y_coefficient(a_zbar)
    return np.real(2 * (c_z + c_zbar)), np.real(2j * (c_z - c_zbar))


def _integrate(beta_x, beta_y, grid):
    """Integrate from the basepoint along the basepoint row then columns, and the other way round."""
    p0, q0 = grid.basepoint
    row = cumulative_trapezoid(beta_x[:, q0], grid.xs, initial=0)
    columns = cumulative_trapezoid(beta_y, grid.ys, axis=1, initial=0)
    primary = (row - row[p0])[:, None] + columns - columns[:, q0:q0 + 1]

    column = cumulative_trapezoid(beta_y[p0, :], grid.ys, initial=0)
    rows = cumulative_trapezoid(beta_x, grid.xs, axis=0, initial=0)
    alternate = (column - column[q0])[None, :] + rows - rows[p0:p0 + 1, :]
    return primary, float(np.max(np.abs(primary - alternate)))


def _interior(grid, margin=1):
    mask = np.zeros(grid.shape, dtype=bool)
    mask[margin:-margin, margin:-margin] = True
    return mask


def lagrangian_angle(alpha, lam0=1.0, tol=None):
    """
    beta with beta(p0) = 0 and d beta = 2 (Y coordinate of alpha_2).

    Raises GeometryError when the prescribed derivatives are not closed.
    """
    grid = alpha.grid
    beta_x, beta_y = angle_rates(alpha, lam0)
    dx_by = grid.gradient(beta_y)[0]
    dy_bx = grid.gradient(beta_x)[1]
    curl = float(np.max(np.abs(dx_by - dy_bx)[_interior(grid)]))
    scale = max(1.0, float(np.max(np.abs(beta_x))), float(np.max(np.abs(beta_y))))
    limit = _default_tol(alpha, tol) * scale
    if curl > limit:
        raise GeometryError('alpha_2 is not closed', curl)
    beta, closure = _integrate(beta_x, beta_y, grid)
    logger.debug('Lagrangian angle: curl %.3e, closure %.3e', curl, closure)
    return LagrangianAngle(beta, beta_x, beta_y, closure, curl)


def maslov_form(beta, grid):
    """Theta = d beta / pi as (Theta_x, Theta_y), shape (nx, ny, 2)."""
    bx, by = grid.gradient(np.asarray(beta))
    return np.stack([bx, by], axis=-1) / np.pi


def maslov_defect(theta, angle):
    """Largest gap between Theta and (2/pi) times the Y coordinate of alpha_2."""
    expected = np.stack([angle.beta_x, angle.beta_y], axis=-1) / np.pi
    return float(np.max(np.abs(theta - expected)))


def maslov_curl(theta, grid):
    dx_ty = grid.gradient(theta[..., 1])[0]
    dy_tx = grid.gradient(theta[..., 0])[1]
    return float(np.max(np.abs(dx_ty - dy_tx)[_interior(grid)]))


def stationarity_residual(alpha, lam0=1.0):
    """d*alpha_2 in conformal coordinates: d/dx c_x + d/dy c_y per node."""
    beta_x, beta_y = angle_rates(alpha, lam0)
    dx = alpha.grid.gradient(beta_x / 2)[0]
    dy = alpha.grid.gradient(beta_y / 2)[1]
    return dx + dy


def chart_coordinates(points, tol=CHART_TOL):
    """(Re w1, Im w1, Re w2, Im w2) with w = (z1/z3, z2/z3)."""
    z3 = points[..., 2]
    if np.min(np.abs(z3), initial=np.inf) < tol:
        raise GeometryError('surface leaves the affine chart z3 != 0', float(np.min(np.abs(z3))))
    w1 = points[..., 0] / z3
    w2 = points[..., 1] / z3
    return np.stack([w1.real, w1.imag, w2.real, w2.imag], axis=-1)


@dataclass(frozen=True)
class SurfaceSample:
    point: np.ndarray
    rho: float
    beta: float
    maslov_z: complex
    residuals: dict


@dataclass(eq=False)
class SurfaceField:
    """Geometry of one member of the associated family on the grid."""

    grid: object
    lam0: complex
    points: np.ndarray
    rho: np.ndarray
    beta: np.ndarray
    maslov: np.ndarray
    stationarity: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def branch_points(self):
        return ~np.isfinite(self.rho)

    @property
    def maslov_z(self):
        return 0.5 * (self.maslov[..., 0] - 1j * self.maslov[..., 1])

    def sample(self, p, q):
        return SurfaceSample(
            self.points[p, q], float(self.rho[p, q]), float(self.beta[p, q]),
            complex(self.maslov_z[p, q]), dict(self.residuals),
        )

    def mesh_vertices(self, projection=DEFAULT_PROJECTION):
        return chart_coordinates(self.points) @ np.asarray(projection).T


def surface_from_frozen(frozen, alpha, lam0=1.0, tol=None):
    """Geometry from a field of frozen frames (nx, ny, n, n) and the Maurer-Cartan form."""
    grid = alpha.grid
    points = project_cp2(frozen)
    rho = conformal_factor(alpha, lam0, tol)
    if not np.all(np.isfinite(rho)):
        logger.warning('%d branch point(s) where the conformal factor vanishes', int(np.sum(~np.isfinite(rho))))
    angle = lagrangian_angle(alpha, lam0, tol)
    theta = maslov_form(angle.beta, grid)
    stationarity = stationarity_residual(alpha, lam0)
    inside = _interior(grid)
    n = frozen.shape[-1]
    residuals = {
        'frame_unitarity': float(np.max(frobenius(dagger(frozen) @ frozen - np.eye(n)))),
        'partial_primitivity': alpha.partial_primitivity_residual(),
        'beta_closure': angle.closure,
        'beta_curl': angle.curl,
        'maslov_cross_check': maslov_defect(theta, angle),
        'maslov_curl': maslov_curl(theta, grid),
        'stationarity': float(np.max(np.abs(stationarity[inside]))),
    }
    return SurfaceField(grid, complex(lam0), points, rho, angle.beta, theta, stationarity, residuals)


def surface_from_frame(F, alpha=None, lam0=1.0, tol=None):
    """Surface of the extended frame at lambda0; alpha defaults to the finite-difference form of F."""
    j = F.lambda_index(lam0)
    if alpha is None:
        alpha = extract_maurer_cartan(F)
    return surface_from_frozen(F.at_lambda(j), alpha, F.lambdas[j], tol)


def associated_family(F, lam0, alpha=None, tol=None):
    """Frozen frame at lambda0 and its surface."""
    j = F.lambda_index(lam0)
    return F.at_lambda(j), surface_from_frame(F, alpha, lam0, tol)
