# backend/lagrangian/loops.py
"""
Truncated twisted loops.

Group loops are stored as samples on the lambda circle, algebra loops as
Fourier coefficients; ``fourier_coeffs`` and ``FourierTable.synthesize``
bridge the two. Every container carries arbitrary leading batch axes so a
whole grid of loops is handled by one array operation.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .algebra import LieMatrix, frobenius
from .exceptions import LoopError

logger = logging.getLogger(__name__)

TWIST_TOL = 1e-10
MIN_DET = 1e-10


@dataclass(frozen=True)
class LoopSpec:
    N: int = 64
    K: int = 15
    tol_twist: float = 1e-10
    tol_unitary: float = 1e-8
    tol_flat: float = 1e-6
    big_cell_condition: float = 1e12

    def __post_init__(self):
        if self.N <= 0 or self.N % 4:
            raise LoopError(f"lambda sample count must be a positive multiple of 4, got {self.N}")
        if self.K < 1:
            raise LoopError(f"Fourier cap must be at least 1, got {self.K}")
        if self.N < 4 * (self.K + 1):
            raise LoopError(f"{self.N} lambda samples cannot resolve Fourier cap {self.K}; need N >= {4 * (self.K + 1)}")
        for name in ('tol_twist', 'tol_unitary', 'tol_flat', 'big_cell_condition'):
            if not getattr(self, name) > 0:
                raise LoopError(f"{name} must be positive")

    @classmethod
    def from_settings(cls, config, **overrides):
        values = {
            'N': int(config['LAMBDA_SAMPLES']),
            'K': int(config['FOURIER_CAP']),
            'tol_twist': float(config['TOL_TWIST']),
            'tol_unitary': float(config['TOL_UNITARY']),
            'tol_flat': float(config['TOL_FLAT']),
            'big_cell_condition': float(config['BIG_CELL_CONDITION']),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def doubled(self):
        """Same tolerances with twice the Fourier cap."""
        K = 2 * self.K
        return LoopSpec(max(self.N, 4 * (K + 1)), K, self.tol_twist, self.tol_unitary,
                        self.tol_flat, self.big_cell_condition)


def lambda_grid(N):
    return np.exp(2j * np.pi * np.arange(N) / N)


def _twist_index(N):
    if N % 4:
        raise LoopError(f"sample count {N} is not a multiple of 4")
    return (np.arange(N) + N // 4) % N


@dataclass(frozen=True, eq=False)
class FourierTable:
    """Coefficients ``coeffs[..., k - k_min, :, :]`` of a loop sum_k c_k lambda^k."""

    coeffs: np.ndarray
    k_min: int
    case: object

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.ndim < 3 or coeffs.shape[-1] != self.case.size or coeffs.shape[-2] != self.case.size:
            raise LoopError(f"coefficient table of shape {coeffs.shape} does not fit case {self.case.name}")
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def k_max(self):
        return self.k_min + self.coeffs.shape[-3] - 1

    @property
    def modes(self):
        return np.arange(self.k_min, self.k_max + 1)

    @property
    def batch_shape(self):
        return self.coeffs.shape[:-3]

    def __getitem__(self, k):
        if not self.k_min <= k <= self.k_max:
            return np.zeros(self.batch_shape + (self.case.size, self.case.size), dtype=complex)
        return self.coeffs[..., k - self.k_min, :, :]

    def node(self, index):
        return type(self)(**{**self._fields(), 'coeffs': self.coeffs[index]})

    def _fields(self):
        return {'coeffs': self.coeffs, 'k_min': self.k_min, 'case': self.case}

    def restrict(self, k_min, k_max):
        """Coefficients on [k_min, k_max], zero padded where absent."""
        coeffs = np.stack([self[k] for k in range(k_min, k_max + 1)], axis=-3)
        return type(self)(**{**self._fields(), 'coeffs': coeffs, 'k_min': k_min})

    def mass_outside(self, k_lo, k_hi):
        """Frobenius mass of modes outside [k_lo, k_hi], max over the batch."""
        outside = (self.modes < k_lo) | (self.modes > k_hi)
        if not outside.any():
            return 0.0
        mass = np.sqrt(np.sum(np.abs(self.coeffs[..., outside, :, :]) ** 2, axis=(-3, -2, -1)))
        return float(np.max(mass))

    def twisting_residual(self):
        """max_k |tau(c_k) - i^k c_k|; meaningful for algebra loops."""
        residual = 0.0
        for k in self.modes:
            c = self[k]
            residual = max(residual, float(np.max(frobenius(self.case.tau(c) - (1j ** k) * c), initial=0.0)))
        return residual

    def evaluate(self, lam, allow_off_circle=False):
        lam = complex(lam)
        if not allow_off_circle and abs(abs(lam) - 1) > 1e-12:
            raise LoopError(f"|lambda| = {abs(lam):.6g}; pass allow_off_circle=True to evaluate off S^1")
        powers = lam ** self.modes.astype(float)
        return np.einsum('k,...kij->...ij', powers, self.coeffs)

    def synthesize(self, N):
        """Samples at the N-th roots of unity, shape (..., N, n, n)."""
        if self.k_max - self.k_min + 1 > N:
            raise LoopError(f"{N} samples cannot carry modes {self.k_min}..{self.k_max}")
        n = self.case.size
        full = np.zeros(self.batch_shape + (N, n, n), dtype=complex)
        full[..., self.modes % N, :, :] = self.coeffs
        return np.fft.ifft(full, axis=-3) * N

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))


@dataclass(frozen=True, eq=False)
class TwistedAlgebraLoop(FourierTable):
    """Loop in the twisted loop algebra; ``real`` marks loops in the real form."""

    real: bool = False

    def _fields(self):
        return {**super()._fields(), 'real': self.real}

    def coefficient(self, k):
        if self.batch_shape:
            raise LoopError('coefficient() needs a single loop; index the batch first')
        tag = self.case.real_tag if (self.real and k == 0) else self.case.complex_tag
        return LieMatrix(self[k], tag)

    def validate(self, tol=TWIST_TOL):
        residual = self.twisting_residual()
        if residual > tol:
            raise LoopError(f"coefficients violate the twisting condition (residual {residual:.3e})")
        if self.real:
            defect = self.reality_residual()
            if defect > tol:
                raise LoopError(f"loop marked real violates c_-k = tilde(c_k) (residual {defect:.3e})")
        return self

    def reality_residual(self):
        residual = 0.0
        for k in range(min(self.k_min, -self.k_max), max(self.k_max, -self.k_min) + 1):
            defect = frobenius(self[-k] - self.case.tilde(self[k]))
            residual = max(residual, float(np.max(defect, initial=0.0)))
        return residual

    def tilde(self):
        """The loop lambda -> tilde(xi) on S^1: coefficients k -> tilde(c_-k)."""
        coeffs = np.stack([self.case.tilde(self[-k]) for k in range(-self.k_max, -self.k_min + 1)], axis=-3)
        return TwistedAlgebraLoop(coeffs, -self.k_max, self.case, self.real)

    def __add__(self, other):
        k_min = min(self.k_min, other.k_min)
        k_max = max(self.k_max, other.k_max)
        coeffs = np.stack([self[k] + other[k] for k in range(k_min, k_max + 1)], axis=-3)
        return TwistedAlgebraLoop(coeffs, k_min, self.case, self.real and other.real)


@dataclass(frozen=True, eq=False)
class TwistedGroupLoop:
    """Samples ``samples[..., j, :, :]`` at lambda_j = exp(2 pi i j / N)."""

    samples: np.ndarray
    case: object

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        n = self.case.size
        if samples.ndim < 3 or samples.shape[-2:] != (n, n):
            raise LoopError(f"samples of shape {samples.shape} do not fit case {self.case.name}")
        if samples.shape[-3] % 4:
            raise LoopError(f"sample count {samples.shape[-3]} is not a multiple of 4")
        object.__setattr__(self, 'samples', samples)

    @property
    def N(self):
        return self.samples.shape[-3]

    @property
    def batch_shape(self):
        return self.samples.shape[:-3]

    def node(self, index):
        return TwistedGroupLoop(self.samples[index], self.case)

    def twisting_residual(self):
        rotated = self.samples[..., _twist_index(self.N), :, :]
        defect = frobenius(rotated - self.case.tau_group(self.samples))
        return float(np.nanmax(defect, initial=0.0))

    def min_abs_det(self):
        return float(np.nanmin(np.abs(np.linalg.det(self.samples)), initial=np.inf))

    def validate(self, tol=TWIST_TOL):
        if self.min_abs_det() <= MIN_DET:
            raise LoopError(f"loop is not invertible (min |det| {self.min_abs_det():.3e})")
        residual = self.twisting_residual()
        if residual > tol:
            raise LoopError(f"samples violate the quarter-rotation twisting test (residual {residual:.3e})")
        return self

    def unitarity_residual(self):
        n = self.case.size
        defect = frobenius(np.conj(np.swapaxes(self.samples, -1, -2)) @ self.samples - np.eye(n))
        return float(np.nanmax(defect, initial=0.0))

    def at(self, j):
        return self.samples[..., j, :, :]

    def distance(self, other):
        return float(np.nanmax(frobenius(self.samples - other.samples), initial=0.0))


def _check_compatible(a, b):
    if a.case is not b.case:
        raise LoopError(f"case mismatch: {a.case.name} vs {b.case.name}")
    if a.samples.shape != b.samples.shape:
        raise LoopError(f"shape mismatch: {a.samples.shape} vs {b.samples.shape}")


def loop_multiply(a, b):
    _check_compatible(a, b)
    return TwistedGroupLoop(a.samples @ b.samples, a.case)


def loop_inverse(a):
    return TwistedGroupLoop(np.linalg.inv(a.samples), a.case)


def identity_loop(case, N, batch_shape=()):
    samples = np.broadcast_to(np.eye(case.size, dtype=complex), tuple(batch_shape) + (N, case.size, case.size))
    return TwistedGroupLoop(samples.copy(), case)


def constant_loop(case, M, N):
    M = np.asarray(M, dtype=complex)
    samples = np.broadcast_to(M[..., None, :, :], M.shape[:-2] + (N,) + M.shape[-2:])
    return TwistedGroupLoop(samples.copy(), case)


def exp_loop(xi, N):
    """Samplewise matrix exponential of an algebra loop."""
    return TwistedGroupLoop(linalg.expm(xi.synthesize(N)), xi.case)


def resample(samples, M):
    """
    Trigonometric interpolation of loop samples (..., N, n, n) onto M >= N
    roots of unity. The Nyquist mode is split evenly between +-N/2, which keeps
    twisted loops twisted when N is a multiple of 4.
    """
    N = samples.shape[-3]
    if M == N:
        return samples
    if M < N or M % N:
        raise LoopError(f"cannot resample {N} lambda samples onto {M}")
    spectrum = np.fft.fft(samples, axis=-3)
    full = np.zeros(samples.shape[:-3] + (M,) + samples.shape[-2:], dtype=complex)
    half = N // 2
    full[..., :half, :, :] = spectrum[..., :half, :, :]
    full[..., M - half + 1:, :, :] = spectrum[..., half + 1:, :, :]
    full[..., half, :, :] = 0.5 * spectrum[..., half, :, :]
    full[..., M - half, :, :] = 0.5 * spectrum[..., half, :, :]
    return np.fft.ifft(full, axis=-3) * (M / N)


def fourier_coeffs(phi, k_min, k_max):
    """Discrete Fourier coefficients of a sampled loop on [k_min, k_max]."""
    N = phi.N
    if k_max < k_min:
        raise LoopError(f"empty mode range {k_min}..{k_max}")
    if max(abs(k_min), abs(k_max)) > N // 2 or k_max - k_min + 1 > N:
        raise LoopError(f"modes {k_min}..{k_max} alias on {N} samples; refusing beyond N/2")
    spectrum = np.fft.fft(phi.samples, axis=-3) / N
    modes = np.arange(k_min, k_max + 1)
    return FourierTable(spectrum[..., modes % N, :, :], k_min, phi.case)


def algebra_loop_from_samples(samples, case, k_min, k_max, real=False):
    """Fourier coefficients of sampled algebra-valued data as a TwistedAlgebraLoop."""
    table = fourier_coeffs(_AlgebraSamples(samples, case), k_min, k_max)
    return TwistedAlgebraLoop(table.coeffs, k_min, case, real)


@dataclass(frozen=True, eq=False)
class _AlgebraSamples:
    samples: np.ndarray
    case: object

    @property
    def N(self):
        return self.samples.shape[-3]


def quarter_rotation_residual(samples, case):
    """Twisting test tau(xi(lambda)) = xi(i lambda) on sampled algebra values."""
    samples = np.asarray(samples)
    rotated = samples[..., _twist_index(samples.shape[-3]), :, :]
    return float(np.max(frobenius(rotated - case.tau(samples)), initial=0.0))


def hs_norm(xi, s):
    """(sum_k |k|^(2s) |c_k|_F^2)^(1/2); batched tables return the max over the batch."""
    if s < 0:
        raise LoopError(f"H^s norm needs s >= 0, got {s}")
    if s <= 0.5:
        logger.warning('H^s norm with s = %s <= 1/2 does not control the sup norm', s)
    weights = np.abs(xi.modes).astype(float) ** (2 * s)
    mass = np.sum(np.abs(xi.coeffs) ** 2, axis=(-2, -1))
    return float(np.max(np.sqrt(np.sum(weights * mass, axis=-1))))


def eval_loop(xi, lam, allow_off_circle=False):
    """xi(lambda) as a LieMatrix; real loops on the circle give real-form values."""
    value = xi.evaluate(lam, allow_off_circle)
    on_circle = abs(abs(complex(lam)) - 1) <= 1e-12
    tag = xi.case.real_tag if (getattr(xi, 'real', False) and on_circle) else xi.case.complex_tag
    return LieMatrix(value, tag)
