"""
Lagrangian cones in C^3 over surfaces in CP^2.

The link of the cone is a horizontal lift of the surface to S^5. Two
independent routes produce it: the phase twist of the frame by
exp(i beta / 3), and discrete parallel transport for the Hopf connection.
The cone's own Lagrangian angle is the phase of det of its fundamental
lift, and it agrees with beta.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .algebra import CP2, S5, LieMatrix, frobenius
from .exceptions import AlgebraError, GeometryError
from .loops import TwistedAlgebraLoop

logger = logging.getLogger(__name__)

HOLONOMY_TOL = 0.05
CLOSURE_TOL = 1e-6
AREA_TOL = 1e-12

# coordinates of C^3 = R^6 are (Re z1, Im z1, Re z2, Im z2, Re z3, Im z3)
PROJECTIONS = {
    're': (0, 2, 4),
    'im': (1, 3, 5),
    'mixed': (0, 1, 2),
}


def hermitian(u, v):
    """<u, v> = sum u conj(v) over the last axis."""
    return np.sum(u * np.conj(v), axis=-1)


@dataclass(eq=False)
class TransportResult:
    link: np.ndarray
    holonomy: np.ndarray
    max_holonomy: float


def plaquette_holonomy(points, grid):
    """Bargmann phase of each grid plaquette over its area, shape (nx-1, ny-1)."""
    f00 = points[:-1, :-1]
    f10 = points[1:, :-1]
    f11 = points[1:, 1:]
    f01 = points[:-1, 1:]
    loop = hermitian(f00, f10) * hermitian(f10, f11) * hermitian(f11, f01) * hermitian(f01, f00)
    return np.angle(loop) / (grid.hx * grid.hy)


def triangle_phase(a, b, c):
    """Phase of <c, b><b, a><a, c>; independent of the lifts chosen for a, b, c."""
    return np.angle(hermitian(c, b) * hermitian(b, a) * hermitian(a, c))


def _segment_phases(line):
    """
    Phase of <s_{i+1}, s_i> along a horizontal lift of a line of points
    (L, ..., 3), from the triangles through neighbouring points. Exact to
    O(h^5) per segment.
    """
    T = triangle_phase(line[:-2], line[1:-1], line[2:])
    A = np.empty((line.shape[0] - 1,) + T.shape[1:])
    A[0] = T[0]
    A[-1] = T[-1]
    A[1:-1] = 0.5 * (T[:-1] + T[1:])
    return -A / 6


def _step(s_prev, f_next, phase):
    w = hermitian(f_next, s_prev)
    return f_next * (np.conj(w) / np.abs(w) * np.exp(1j * phase))[..., None]


def flat_section_transport(points, s0, grid, tol=HOLONOMY_TOL):
    """
    Horizontal lift of a point field, s(p0) = s0.

    Each step picks the lift of the next point whose Hermitian product with
    the current one has the phase of the segment's triangle correction, so
    the lift is accurate to O(h^4). The basepoint row is transported first,
    then every column.
    """
    points = np.asarray(points, dtype=complex)
    points = points / np.linalg.norm(points, axis=-1, keepdims=True)
    s0 = np.asarray(s0, dtype=complex)
    p0, q0 = grid.basepoint
    overlap = abs(hermitian(s0, points[p0, q0]))
    if abs(overlap - 1) > 1e-10:
        raise ValueError(f"s0 is not a unit lift of the basepoint (|<s0, f(p0)>| = {overlap:.12g})")

    holonomy = plaquette_holonomy(points, grid)
    largest = float(np.max(np.abs(holonomy), initial=0.0))
    if largest > tol:
        raise GeometryError('Hopf connection has holonomy; the surface is not Lagrangian', largest)

    row = _segment_phases(points[:, q0])
    columns = _segment_phases(np.swapaxes(points, 0, 1))
    link = np.empty_like(points)
    link[p0, q0] = s0
    for p in range(p0 + 1, grid.nx):
        link[p, q0] = _step(link[p - 1, q0], points[p, q0], row[p - 1])
    for p in range(p0 - 1, -1, -1):
        link[p, q0] = _step(link[p + 1, q0], points[p, q0], -row[p])
    for q in range(q0 + 1, grid.ny):
        link[:, q] = _step(link[:, q - 1], points[:, q], columns[q - 1])
    for q in range(q0 - 1, -1, -1):
        link[:, q] = _step(link[:, q + 1], points[:, q], -columns[q])
    return TransportResult(link, holonomy, largest)


def horizontality_residual(link, grid, derivatives=None):
    """max |Im <d link, link>| over both directions."""
    dx, dy = derivatives if derivatives is not None else grid.gradient(link)
    return float(max(np.max(np.abs(hermitian(dx, link).imag)), np.max(np.abs(hermitian(dy, link).imag))))


@dataclass(eq=False)
class LegendrianLift:
    frame: np.ndarray
    link: np.ndarray
    det_defect: float
    z_component: float
    horizontality: float


def legendrian_frame(frozen, angle, grid, tol=CLOSURE_TOL):
    """
    U(3) frames exp(i beta / 3) F whose third column is the horizontal lift.

    det of the result is exp(i beta). The 2-eigenspace part of its
    Maurer-Cartan form has no component along Z.
    """
    if angle.closure > tol:
        raise GeometryError(
            'beta is multivalued on this domain; pass to a covering before lifting to S^5', angle.closure
        )
    phase = np.exp(1j * angle.beta / 3)
    frame = phase[..., None, None] * np.asarray(frozen)
    det_defect = float(np.max(np.abs(np.linalg.det(frame) - np.exp(1j * angle.beta))))

    fx, fy = grid.gradient(frame)
    inverse = np.linalg.inv(frame)
    a_z = inverse @ (fx - 1j * fy) / 2
    a_zbar = inverse @ (fx + 1j * fy) / 2
    inside = np.zeros(grid.shape, dtype=bool)
    inside[1:-1, 1:-1] = True
    z_component = float(max(
        np.max(np.abs(S5.g2_coordinates(a_z)[..., 1][inside])),
        np.max(np.abs(S5.g2_coordinates(a_zbar)[..., 1][inside])),
    ))
    link = frame[..., :, 2]
    horizontality = horizontality_residual(link, grid)
    return LegendrianLift(frame, link, det_defect, z_component, horizontality)


def _unwrap(phase, grid):
    """Continuous phase field, unwrapped along the basepoint row then along columns."""
    p0, q0 = grid.basepoint
    out = np.unwrap(phase, axis=1)
    row = np.unwrap(out[:, q0])
    return out + (row - out[:, q0])[:, None]


@dataclass(eq=False)
class FundamentalLift:
    frame: np.ndarray
    cone_angle: np.ndarray
    unitarity: float


def fundamental_lift(link, grid, derivatives=None):
    """
    U(3) frames with columns d_x link / |.|, d_y link / |.|, link.

    ``cone_angle`` is the unwrapped phase of det, shifted to vanish at the
    basepoint.
    """
    dx, dy = derivatives if derivatives is not None else grid.gradient(link)
    columns = [
        dx / np.linalg.norm(dx, axis=-1, keepdims=True),
        dy / np.linalg.norm(dy, axis=-1, keepdims=True),
        link,
    ]
    frame = np.stack(columns, axis=-1)
    unitarity = float(np.max(frobenius(np.conj(np.swapaxes(frame, -1, -2)) @ frame - np.eye(3))))
    angle = _unwrap(np.angle(np.linalg.det(frame)), grid)
    p0, q0 = grid.basepoint
    return FundamentalLift(frame, angle - angle[p0, q0], unitarity)


@dataclass(frozen=True)
class ConeSample:
    link_point: np.ndarray
    radius_range: tuple
    beta_check: float


@dataclass(eq=False)
class ConeMesh:
    """Points r * link for each radius, shape (radii, nx, ny, 3)."""

    radii: tuple
    points: np.ndarray
    lagrangian: float
    horizontality: float
    warnings: list = field(default_factory=list)

    def table(self):
        """One row per point: the six real coordinates of C^3."""
        flat = self.points.reshape(-1, 3)
        return np.stack([flat.real, flat.imag], axis=-1).reshape(-1, 6)

    def projection(self, name):
        """Vertices (radii, nx, ny, 3) of one of the named three-dimensional slices."""
        if name not in PROJECTIONS:
            raise ValueError(f"unknown projection '{name}'; choose one of {', '.join(PROJECTIONS)}")
        real = np.stack([self.points.real, self.points.imag], axis=-1).reshape(self.points.shape[:-1] + (6,))
        return real[..., list(PROJECTIONS[name])]

    def sample(self, p, q, beta_check=0.0):
        return ConeSample(self.points[-1, p, q] / self.radii[-1], (min(self.radii), max(self.radii)), beta_check)


def cone_mesh(link, radii, grid, derivatives=None):
    """
    Sample the cone r * link over the given radii.

    ``lagrangian`` is max |omega(d_x, d_y)| on the link, ``horizontality``
    the radial term |omega(d_r, .)|; both vanish for a Legendrian link.
    """
    radii = tuple(float(r) for r in radii)
    if not radii or min(radii) <= 0:
        raise ValueError(f"radii must be positive, got {radii}")
    link = np.asarray(link, dtype=complex)
    dx, dy = derivatives if derivatives is not None else grid.gradient(link)
    lagrangian = float(np.max(np.abs(hermitian(dx, dy).imag)))
    horizontality = horizontality_residual(link, grid, (dx, dy))
    warnings = []
    area = float(np.max(np.linalg.norm(dx, axis=-1) * np.linalg.norm(dy, axis=-1)))
    if area < AREA_TOL:
        message = 'link has zero area; the cone degenerates to a ray'
        warnings.append(message)
        logger.warning(message)
    points = np.stack([r * link for r in radii])
    return ConeMesh(radii, points, lagrangian, horizontality, warnings)


def _reindex(X):
    return X - (np.trace(X, axis1=-2, axis2=-1) / 3)[..., None, None] * np.eye(3)


def g2_reindex(X):
    """
    diag(a, b, 0) -> diag(2a - b, 2b - a, -(a + b)) / 3.

    The image is the traceless representative: the S5 generator
    Y_CHECK = diag(i, i, 0) goes to Y = (i/3) diag(1, 1, -2), that is the map
    sends Y-check to Y. Keeping 0 in the last slot would send Y-check to
    (i/3) diag(1, 1, 0), which is not in su(3).
    """
    entries = X.entries if isinstance(X, LieMatrix) else np.asarray(X, dtype=complex)
    scale = max(1.0, float(frobenius(entries)))
    off_diagonal = entries - np.diag(np.diagonal(entries))
    if float(frobenius(off_diagonal)) > 1e-12 * scale or abs(entries[2, 2]) > 1e-12 * scale:
        raise AlgebraError('g2_reindex needs a diagonal matrix of the form diag(a, b, 0)')
    image = _reindex(entries)
    imaginary = np.allclose(np.diagonal(entries).real, 0, atol=1e-12 * scale)
    return LieMatrix(image, 'su3' if imaginary else 'sl3C')


def g2_reindex_loop(xi, tol=1e-10):
    """
    Coefficientwise reindex of a u(3) algebra loop into su(3).

    Only the 2-eigenspace part changes; it must have no Z component.
    """
    if xi.case is not S5:
        raise AlgebraError(f"g2_reindex_loop expects an S5 loop, got {xi.case.name}")
    z_part = float(np.max(np.abs(S5.g2_coordinates(xi.coeffs)[..., 1]), initial=0.0))
    if z_part > tol:
        raise AlgebraError(f"loop has a Z component of size {z_part:.3e}; reindexing is defined where it vanishes")
    return TwistedAlgebraLoop(_reindex(xi.coeffs), xi.k_min, CP2, xi.real)
