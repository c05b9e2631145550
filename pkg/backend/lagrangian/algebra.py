# backend/lagrangian/algebra.py
"""
Case data for the symmetric spaces handled by hslag.

Each case carries the order four automorphism tau of the complexified Lie
algebra, the involution sigma = tau**2, the complex structure generator Y
and, for the non-compact duals, the indefinite form B defining the real form.
Eigenspace projections are obtained by averaging over the powers of tau,
so one code path serves every case.

All array helpers act on the last two axes and broadcast over leading ones.
"""
import logging
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import linalg

from .exceptions import AlgebraError
from .reports import Report

logger = logging.getLogger(__name__)

# tolerance for structural identities that hold in exact arithmetic
AUDIT_TOL = 1e-12
MEMBERSHIP_TOL = 1e-10

TAG_SIZE = {
    'su3': 3,
    'sl3C': 3,
    'u3': 3,
    'gl3C': 3,
    'su21': 3,
    'su2xsu2': 4,
    'su11xsu11': 4,
    'sl2xsl2C': 4,
}

COMPLEXIFICATION = {
    'su3': 'sl3C',
    'sl3C': 'sl3C',
    'su21': 'sl3C',
    'u3': 'gl3C',
    'gl3C': 'gl3C',
    'su2xsu2': 'sl2xsl2C',
    'su11xsu11': 'sl2xsl2C',
    'sl2xsl2C': 'sl2xsl2C',
}

B_SU21 = np.diag([1.0, 1.0, -1.0]).astype(complex)
B_SU11 = np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)

# real forms: tag -> indefinite form (identity for the compact ones)
REAL_FORMS = {
    'su3': np.eye(3, dtype=complex),
    'u3': np.eye(3, dtype=complex),
    'su21': B_SU21,
    'su2xsu2': np.eye(4, dtype=complex),
    'su11xsu11': B_SU11,
}

TRACELESS_TAGS = ('su3', 'sl3C', 'su21')
BLOCK_TAGS = ('su2xsu2', 'su11xsu11', 'sl2xsl2C')

TWIST_CP2 = np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 1]], dtype=complex)
TWIST_CP1xCP1 = np.array(
    [[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=complex
)

Y_CP2 = (1j / 3) * np.diag([1.0, 1.0, -2.0])
Y_CHECK = np.diag([1j, 1j, 0])
Z_CHECK = np.diag([0, 0, 1j])
Y_CP1xCP1 = 0.5 * np.diag([-1j, 1j, -1j, 1j])
X_CP1xCP1 = 0.5 * np.diag([-1j, 1j, 1j, -1j])

# unit Frobenius norm basis vector of the (-1)-eigenspace and its conjugate
EPSILON = 0.5 * np.array([[0, 0, 1], [0, 0, -1j], [-1, 1j, 0]], dtype=complex)
EPSILON_TILDE = 0.5 * np.array([[0, 0, 1], [0, 0, 1j], [-1, -1j, 0]], dtype=complex)

CASE_CHOICES = (
    ('CP2', 'Complex projective plane'),
    ('S5', 'Cones over the five-sphere'),
    ('CH2', 'Complex hyperbolic plane'),
    ('CP1xCP1', 'Product of projective lines'),
    ('CP1xCP1_dual', 'Product of hyperbolic discs'),
)


def dagger(X):
    return np.conj(np.swapaxes(X, -1, -2))


def bracket(X, Z):
    return X @ Z - Z @ X


def frobenius(X):
    """Frobenius norm over the last two axes."""
    return np.sqrt(np.sum(np.abs(X) ** 2, axis=(-2, -1)))


def _unit(n, i, j):
    E = np.zeros((n, n), dtype=complex)
    E[i, j] = 1.0
    return E


def _sl_span(n):
    span = [_unit(n, i, j) for i in range(n) for j in range(n) if i != j]
    span += [_unit(n, i, i) - _unit(n, n - 1, n - 1) for i in range(n - 1)]
    return span


def _gl_span(n):
    return [_unit(n, i, j) for i in range(n) for j in range(n)]


def _sl2xsl2_span():
    return [
        _unit(4, 0, 1), _unit(4, 1, 0), _unit(4, 0, 0) - _unit(4, 1, 1),
        _unit(4, 2, 3), _unit(4, 3, 2), _unit(4, 2, 2) - _unit(4, 3, 3),
    ]


def _block_mask():
    mask = np.zeros((4, 4), dtype=bool)
    mask[:2, :2] = mask[2:, 2:] = True
    return mask


def tag_violation(entries, tag):
    """Largest defect of ``entries`` against the defining relations of ``tag``."""
    violation = 0.0
    if tag in TRACELESS_TAGS:
        violation = max(violation, abs(np.trace(entries)))
    if tag in BLOCK_TAGS:
        violation = max(violation, float(np.max(np.abs(entries[~_block_mask()]))))
        violation = max(violation, abs(np.trace(entries[:2, :2])), abs(np.trace(entries[2:, 2:])))
    B = REAL_FORMS.get(tag)
    if B is not None:
        violation = max(violation, float(frobenius(entries @ B + B @ dagger(entries))))
    return violation


@dataclass(frozen=True, eq=False)
class LieMatrix:
    """A matrix together with the Lie algebra it is claimed to belong to."""

    entries: np.ndarray
    tag: str = 'gl3C'

    def __post_init__(self):
        if self.tag not in TAG_SIZE:
            raise AlgebraError(f"unknown algebra tag '{self.tag}'")
        entries = np.array(self.entries, dtype=complex)
        n = TAG_SIZE[self.tag]
        if entries.shape != (n, n):
            raise AlgebraError(f"{self.tag} needs a {n}x{n} matrix, got shape {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)
        violation = tag_violation(entries, self.tag)
        if violation > AUDIT_TOL * max(1.0, self.norm()):
            raise AlgebraError(f"matrix is not in {self.tag} (violation {violation:.3e})")

    def __repr__(self):
        return f"LieMatrix(tag={self.tag!r}, norm={self.norm():.6g})"

    def norm(self):
        return float(frobenius(self.entries))

    @property
    def complexified(self):
        return COMPLEXIFICATION[self.tag]

    def _combine(self, other):
        return self.tag if other.tag == self.tag else self.complexified

    def __add__(self, other):
        return LieMatrix(self.entries + other.entries, self._combine(other))

    def __sub__(self, other):
        return LieMatrix(self.entries - other.entries, self._combine(other))

    def __neg__(self):
        return LieMatrix(-self.entries, self.tag)

    def __mul__(self, scalar):
        tag = self.tag if np.isreal(scalar) else self.complexified
        return LieMatrix(complex(scalar) * self.entries, tag)

    __rmul__ = __mul__

    def bracket(self, other):
        return LieMatrix(bracket(self.entries, other.entries), self._combine(other))

    def allclose(self, other, tol=AUDIT_TOL):
        target = other.entries if isinstance(other, LieMatrix) else np.asarray(other)
        return float(frobenius(self.entries - target)) <= tol


@dataclass(frozen=True, eq=False)
class CaseData:
    """
    One symmetric-space case.

    ``kind`` selects the formula for tau: ``transpose`` is
    X -> -P X^T P^-1 (the projective plane family), ``conjugation`` is
    X -> T X T^-1 (the product of projective lines).
    """

    name: str
    size: int
    twist: np.ndarray
    kind: str
    sigma_matrix: np.ndarray
    Y: np.ndarray
    real_tag: str
    complex_tag: str
    form_B: np.ndarray = None
    g2_extra: tuple = ()
    compact: bool = True

    def __repr__(self):
        return f"CaseData({self.name})"

    @cached_property
    def twist_inv(self):
        return np.linalg.inv(self.twist)

    @property
    def tags(self):
        return (self.real_tag, self.complex_tag)

    def tau(self, X):
        X = np.asarray(X)
        if self.kind == 'transpose':
            return -(self.twist @ np.swapaxes(X, -1, -2) @ self.twist_inv)
        return self.twist @ X @ self.twist_inv

    def tau_power(self, X, a):
        for _ in range(a % 4):
            X = self.tau(X)
        return X

    def tau_group(self, g):
        """Group automorphism whose differential is ``tau``."""
        g = np.asarray(g)
        if self.kind == 'transpose':
            return self.twist @ np.linalg.inv(np.swapaxes(g, -1, -2)) @ self.twist_inv
        return self.twist @ g @ self.twist_inv

    def sigma(self, X):
        return self.sigma_matrix @ np.asarray(X) @ self.sigma_matrix

    def project(self, X, k):
        """Component of X in the eigenspace of tau with eigenvalue i**k."""
        k %= 4
        out = np.zeros(np.shape(X), dtype=complex)
        current = np.asarray(X, dtype=complex)
        for a in range(4):
            out = out + (1j ** (-a * k)) * current
            current = self.tau(current)
        return out / 4

    def tilde(self, X):
        """Conjugation with respect to the real form."""
        Xs = dagger(np.asarray(X))
        if self.form_B is None:
            return -Xs
        return -(self.form_B @ Xs @ self.form_B)

    def tilde_group(self, g):
        inv = np.linalg.inv(dagger(np.asarray(g)))
        if self.form_B is None:
            return inv
        return self.form_B @ inv @ self.form_B

    def spanning_set(self):
        if self.complex_tag == 'sl3C':
            return _sl_span(3)
        if self.complex_tag == 'gl3C':
            return _gl_span(3)
        return _sl2xsl2_span()

    @cached_property
    def eigenbasis(self):
        """Orthonormal (Frobenius) bases of the four eigenspaces of tau."""
        n = self.size
        basis = {}
        for k in range(4):
            columns = np.stack([self.project(E, k).reshape(-1) for E in self.spanning_set()], axis=1)
            span = linalg.orth(columns, rcond=1e-10)
            basis[k] = np.moveaxis(span, 1, 0).reshape(-1, n, n)
        return basis

    def basis(self, k):
        return self.eigenbasis[k % 4]

    @property
    def g2_basis(self):
        return (np.asarray(self.Y, dtype=complex),) + tuple(np.asarray(E, dtype=complex) for E in self.g2_extra)

    @property
    def dim_g2(self):
        return len(self.g2_basis)

    def g2_coordinates(self, X):
        """Coordinates of the 2-eigenspace part of X along ``g2_basis``, shape (..., dim_g2)."""
        X2 = self.project(X, 2)
        coords = [
            np.sum(np.conj(E) * X2, axis=(-2, -1)) / np.sum(np.abs(E) ** 2)
            for E in self.g2_basis
        ]
        return np.stack(coords, axis=-1)

    def y_coefficient(self, X):
        return self.g2_coordinates(X)[..., 0]

    @cached_property
    def j_matrix(self):
        return linalg.expm(0.5 * np.pi * np.asarray(self.Y, dtype=complex))

    def J(self, X):
        U = self.j_matrix
        return U @ np.asarray(X) @ np.linalg.inv(U)

    def real_part(self, A):
        """Projection of an arbitrary complex matrix onto the real form."""
        A = np.array(A, dtype=complex)
        if self.size == 4:
            A = np.where(_block_mask(), A, 0)
        X = 0.5 * (A + self.tilde(A))
        n = self.size
        if self.real_tag in TRACELESS_TAGS:
            X = X - np.trace(X, axis1=-2, axis2=-1)[..., None, None] * np.eye(n) / n
        elif self.real_tag in BLOCK_TAGS:
            for block in (slice(0, 2), slice(2, 4)):
                tr = np.trace(X[..., block, block], axis1=-2, axis2=-1)
                X[..., block, block] -= tr[..., None, None] * np.eye(2) / 2
        return X

    def random_element(self, rng, scale=1.0):
        n = self.size
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        return LieMatrix(scale * self.real_part(A), self.real_tag)


CP2 = CaseData(
    name='CP2', size=3, twist=TWIST_CP2, kind='transpose',
    sigma_matrix=np.diag([1.0, 1.0, -1.0]).astype(complex), Y=Y_CP2,
    real_tag='su3', complex_tag='sl3C',
)

S5 = CaseData(
    name='S5', size=3, twist=TWIST_CP2, kind='transpose',
    sigma_matrix=np.diag([1.0, 1.0, -1.0]).astype(complex), Y=Y_CHECK,
    real_tag='u3', complex_tag='gl3C', g2_extra=(Z_CHECK,),
)

CH2 = CaseData(
    name='CH2', size=3, twist=TWIST_CP2, kind='transpose',
    sigma_matrix=np.diag([1.0, 1.0, -1.0]).astype(complex), Y=Y_CP2,
    real_tag='su21', complex_tag='sl3C', form_B=B_SU21, compact=False,
)

CP1xCP1 = CaseData(
    name='CP1xCP1', size=4, twist=TWIST_CP1xCP1, kind='conjugation',
    sigma_matrix=TWIST_CP1xCP1 @ TWIST_CP1xCP1, Y=Y_CP1xCP1,
    real_tag='su2xsu2', complex_tag='sl2xsl2C',
)

CP1xCP1_DUAL = CaseData(
    name='CP1xCP1_dual', size=4, twist=TWIST_CP1xCP1, kind='conjugation',
    sigma_matrix=TWIST_CP1xCP1 @ TWIST_CP1xCP1, Y=Y_CP1xCP1,
    real_tag='su11xsu11', complex_tag='sl2xsl2C', form_B=B_SU11, compact=False,
)

CASES = {case.name: case for case in (CP2, S5, CH2, CP1xCP1, CP1xCP1_DUAL)}


def get_case(name):
    try:
        return CASES[name]
    except KeyError:
        raise AlgebraError(f"unknown case '{name}'; expected one of {', '.join(CASES)}") from None


def _check_tag(case, X):
    if X.tag not in case.tags:
        raise AlgebraError(f"{X.tag} matrix does not belong to case {case.name} ({', '.join(case.tags)})")


def apply_tau(case, X):
    _check_tag(case, X)
    return LieMatrix(case.tau(X.entries), X.tag)


def project_eigenspace(case, X, k):
    _check_tag(case, X)
    tag = X.tag if k % 4 in (0, 2) else X.complexified
    return LieMatrix(case.project(X.entries, k), tag)


def tilde(X, case=None):
    """
    Real-form conjugation; an involution fixing exactly the real form.

    Without a case the form is read from the tag, which only distinguishes
    the indefinite real forms when the input is tagged with one of them.
    """
    if case is None:
        B = REAL_FORMS.get(X.tag)
        if B is None or np.allclose(B, np.eye(len(B))):
            return LieMatrix(-dagger(X.entries), X.tag)
        return LieMatrix(-(B @ dagger(X.entries) @ B), X.tag)
    return LieMatrix(case.tilde(X.entries), X.tag)


def complex_structure(case, v):
    """J = exp(pi/2 ad Y) on the (-1)-eigenspace of sigma."""
    _check_tag(case, v)
    defect = float(frobenius(case.sigma(v.entries) + v.entries))
    if defect > MEMBERSHIP_TOL * max(1.0, v.norm()):
        raise AlgebraError(f"complex structure is only defined on m (sigma defect {defect:.3e})")
    return LieMatrix(case.J(v.entries), v.tag)


def embed_m(u):
    """The element [[0, u], [-u^*, 0]] of m for u in C^2."""
    u = np.asarray(u, dtype=complex)
    X = np.zeros((3, 3), dtype=complex)
    X[:2, 2] = u
    X[2, :2] = -np.conj(u)
    return LieMatrix(X, 'su3')


def _max_defect(values):
    return max((float(frobenius(v)) for v in values), default=0.0)


def structure_audit(case, tol=AUDIT_TOL):
    """Check the structural relations of ``case`` on basis elements."""
    report = Report(f'algebra audit {case.name}')
    span = case.spanning_set()
    pairs = [(E, F) for E in span for F in span]

    report.add('tau_order', _max_defect(case.tau_power(E, 4) - E for E in span), tol)
    report.add('tau_squared_sigma', _max_defect(case.tau_power(E, 2) - case.sigma(E) for E in span), tol)
    report.add('tau_bracket', _max_defect(
        case.tau(bracket(E, F)) - bracket(case.tau(E), case.tau(F)) for E, F in pairs
    ), tol)
    report.add('resolution', _max_defect(
        sum(case.project(E, k) for k in range(4)) - E for E in span
    ), tol)
    report.add('eigen_projection', _max_defect(
        case.tau(case.project(E, k)) - (1j ** k) * case.project(E, k) for E in span for k in range(4)
    ), tol)

    grading = []
    for a in range(4):
        for b in range(4):
            for A in case.basis(a):
                for B in case.basis(b):
                    C = bracket(A, B)
                    grading.append(C - case.project(C, a + b))
    report.add('grading', _max_defect(grading), tol)

    g2 = case.g2_basis
    report.add('g2_abelian', _max_defect(bracket(A, B) for A in g2 for B in g2), tol)
    report.add('g2_g0', _max_defect(bracket(A, E) for A in g2 for E in case.basis(0)), tol)
    report.add('y_in_g2', max(
        _max_defect(case.tau(A) + A for A in g2),
        _max_defect(case.tilde(A) - A for A in g2),
    ), tol)

    m_basis = list(case.basis(1)) + list(case.basis(3))
    report.add('complex_structure', max(
        _max_defect(case.J(case.J(v)) + v for v in m_basis),
        _max_defect(case.sigma(case.J(v)) + case.J(v) for v in m_basis),
    ), tol)

    report.note('case', case.name)
    report.note('dim_g2', case.dim_g2)
    for k in range(4):
        report.note(f'dim_g{k}', len(case.basis(k)))
    if not report.passed:
        logger.warning('algebra audit for %s failed: %s', case.name,
                       ', '.join(c.name for c in report.failures))
    return report


def corrupted(case, Y):
    """Copy of ``case`` with another complex structure generator."""
    return replace(case, Y=np.asarray(Y, dtype=complex))
