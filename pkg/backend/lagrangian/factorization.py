# backend/lagrangian/factorization.py
"""
Loop Iwasawa and Birkhoff factorizations of truncated twisted loops.

Iwasawa: phi = F B with F unitary and B a plus-loop whose constant term is
upper triangular with positive diagonal. It is computed from the canonical
spectral factorization phi^* phi = B^* B, solved as a block Toeplitz system
on the Fourier blocks of phi^* phi.

Birkhoff: phi = phi_minus phi_plus with phi_minus = 1 at lambda = infinity.
The inverse of phi_minus is found from the block Toeplitz system that kills
the negative modes of phi_minus^-1 phi; its conditioning decides big-cell
membership, and a miss is returned as data.

Both routines accept loops with leading batch axes and factorize every loop
of the batch in one call.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .algebra import dagger, frobenius
from .exceptions import FactorizationError
from .loops import MIN_DET, TwistedGroupLoop, resample
from .reports import Report

logger = logging.getLogger(__name__)

RESOLUTION_DOUBLINGS = 3
CHUNK_BYTES = 2 ** 26


def qr_positive(A):
    """
    Unique QR decomposition with positive real diagonal in R.

    A = QR with Q unitary and R upper triangular, batched over leading axes.
    """
    Q, R = np.linalg.qr(A)
    diag_R = np.diagonal(R, axis1=-2, axis2=-1).copy()
    diag_R[np.abs(diag_R) < 1.e-15] = 1.
    phase = diag_R / np.abs(diag_R)
    Q = Q * phase[..., None, :]
    R = np.conj(phase)[..., :, None] * R
    return Q, R


def pointwise_iwasawa_sl3(g):
    """Split g in SL(3, C) as u b, u in SU(3), b upper triangular with positive diagonal."""
    g = np.asarray(g, dtype=complex)
    det = np.linalg.det(g)
    if abs(det) < MIN_DET:
        raise FactorizationError(f"singular matrix (|det| = {abs(det):.3e})")
    if abs(det - 1) > 1e-10:
        raise FactorizationError(f"expected det 1, got {det:.6g}")
    return qr_positive(g)


def block_toeplitz(spectrum, row_modes, col_modes):
    """
    Block matrix with block (a, b) equal to the Fourier coefficient of mode
    row_modes[a] - col_modes[b], read from a full FFT spectrum (..., N, n, n).
    """
    N = spectrum.shape[-3]
    idx = np.subtract.outer(np.asarray(row_modes), np.asarray(col_modes)) % N
    blocks = spectrum[..., idx, :, :]
    *batch, r, c, n, _ = blocks.shape
    return blocks.swapaxes(-3, -2).reshape(*batch, r * n, c * n)


def _spectrum(samples):
    return np.fft.fft(samples, axis=-3) / samples.shape[-3]


def _synthesize(coeffs, modes, N):
    """Samples of sum_j coeffs[..., j] lambda^modes[j] at the N-th roots of unity."""
    n = coeffs.shape[-1]
    full = np.zeros(coeffs.shape[:-3] + (N, n, n), dtype=complex)
    full[..., np.asarray(modes) % N, :, :] = coeffs
    return np.fft.ifft(full, axis=-3) * N


def _mode_mass(samples, negative):
    """Frobenius mass of the strictly negative (or positive) modes, per loop."""
    N = samples.shape[-3]
    spectrum = _spectrum(samples)
    half = np.arange(1, N // 2)
    idx = (-half) % N if negative else half
    return np.sqrt(np.sum(np.abs(spectrum[..., idx, :, :]) ** 2, axis=(-3, -2, -1)))


def _nodes(mask):
    return [tuple(int(i) for i in node) for node in np.argwhere(mask)]


def _max(values):
    values = np.asarray(values, dtype=float)
    return float(np.nanmax(values)) if values.size and not np.all(np.isnan(values)) else 0.0


def normalize_constant_term(F, B):
    """
    Gauge (F, B) -> (F u, u^* B) so that the constant term of B is upper
    triangular with positive diagonal.
    """
    B0 = np.mean(B, axis=-3)
    u, _ = qr_positive(B0)
    u = u[..., None, :, :]
    return F @ u, dagger(u) @ B


def resolution_levels(K, N, doublings=RESOLUTION_DOUBLINGS):
    """
    (K, M) pairs tried in turn: the Fourier cap doubles at every level and the
    loop is resampled onto M lambda samples once the cap outgrows N.
    """
    levels = []
    M = N
    for _ in range(doublings + 1):
        while M < 4 * (K + 1):
            M *= 2
        levels.append((K, M))
        K *= 2
    return levels


def _chunks(count, width):
    size = max(1, CHUNK_BYTES // (16 * width * width))
    for start in range(0, count, size):
        yield slice(start, min(count, start + size))


def _positivity_failures(T):
    return np.linalg.eigvalsh(T)[..., 0] <= 0


def _iwasawa_once(samples, K):
    """
    Finite-section Iwasawa of flat samples (count, N, n, n) at Fourier cap K.

    Returns (F, B, lost) with ``lost`` marking loops whose Gram system is not
    positive definite; their factors are meaningless.
    """
    N = samples.shape[-3]
    n = samples.shape[-1]
    P = dagger(samples) @ samples
    modes = np.arange(K + 1)
    T = block_toeplitz(_spectrum(P), modes, modes)
    T = 0.5 * (T + dagger(T))
    try:
        np.linalg.cholesky(T)
        lost = np.zeros(T.shape[:-2], dtype=bool)
    except np.linalg.LinAlgError:
        lost = _positivity_failures(T)
        T = np.where(lost[..., None, None], np.eye(T.shape[-1]), T)

    rhs = np.zeros(((K + 1) * n, n), dtype=complex)
    rhs[:n] = np.eye(n)
    X = np.linalg.solve(T, np.broadcast_to(rhs, T.shape[:-2] + rhs.shape))
    X = X.reshape(T.shape[:-2] + (K + 1, n, n))

    gram = np.linalg.inv(X[..., 0, :, :])
    gram = 0.5 * (gram + dagger(gram))
    R = dagger(np.linalg.cholesky(gram))
    G = _synthesize(X @ dagger(R)[..., None, :, :], modes, N)

    F, B = normalize_constant_term(samples @ G, np.linalg.inv(G))
    return F, B, lost


def _iwasawa_level(samples, K, M):
    """
    Iwasawa at one resolution level on flat samples, chunked so no Toeplitz
    batch exceeds CHUNK_BYTES. Factors come back on the original nodes.
    """
    count, N, n, _ = samples.shape
    F = np.empty_like(samples)
    B = np.empty_like(samples)
    residual = np.empty(count)
    lost = np.zeros(count, dtype=bool)
    stride = M // N
    for part in _chunks(count, (K + 1) * n):
        F_part, B_part, lost[part] = _iwasawa_once(resample(samples[part], M), K)
        unitarity = frobenius(dagger(F_part) @ F_part - np.eye(n)).max(axis=-1)
        residual[part] = np.maximum(unitarity, _mode_mass(B_part, negative=True))
        F[part] = F_part[:, ::stride]
        B[part] = B_part[:, ::stride]
    return F, B, residual, lost


@dataclass
class IwasawaResult:
    unitary_factor: TwistedGroupLoop
    positive_factor: TwistedGroupLoop
    residual: float
    converged: bool
    node_residual: np.ndarray
    node_converged: np.ndarray
    unitarity: float
    negative_mass: float
    spectral_residual: float
    product_residual: float
    history: dict = field(default_factory=dict)
    resolution_gap: float = None
    under_resolved: bool = False
    fourier_caps: np.ndarray = None

    @property
    def failed_nodes(self):
        return _nodes(~self.node_converged)

    @property
    def max_fourier_cap(self):
        return int(np.max(self.fourier_caps))

    def report(self, tol):
        report = Report('loop iwasawa')
        report.add('iwasawa_unitarity', self.unitarity, tol)
        report.add('iwasawa_negative_modes', self.negative_mass, tol)
        report.add('iwasawa_spectral_identity', self.spectral_residual, tol)
        report.add('iwasawa_product', self.product_residual, tol)
        if self.resolution_gap is not None:
            report.add('iwasawa_resolution_gap', self.resolution_gap, tol)
        for K, value in self.history.items():
            report.note(f'iwasawa_residual_K{K}', f'{value:.3e}')
        report.note('iwasawa_max_fourier_cap', self.max_fourier_cap)
        return report


def loop_iwasawa(phi, spec, strict=True, check_resolution=True):
    """
    Factor phi = F B with F in the unitary twisted loop group and B a
    normalized plus-loop.

    With ``check_resolution`` every loop is factorized at Fourier caps K, 2K,
    4K, ... (resampling the loop when the cap outgrows the sample count) until
    two consecutive caps agree to ``spec.tol_unitary`` and the finer one is
    unitary to the same tolerance; only the loops still disagreeing move on
    to the next cap. Without it a single cap ``spec.K`` is used.

    With ``strict`` a loop that does not converge raises FactorizationError
    listing the failing batch nodes; otherwise the flags are returned in the
    result.
    """
    if not phi.case.compact:
        raise FactorizationError(f"loop Iwasawa needs a compact real form; {phi.case.name} is not compact")
    det = np.abs(np.linalg.det(phi.samples))
    if np.nanmin(det, initial=np.inf) <= MIN_DET:
        raise FactorizationError('singular loop samples', _nodes(np.min(det, axis=-1) <= MIN_DET))

    batch = phi.batch_shape
    N, n = phi.N, phi.case.size
    flat = phi.samples.reshape((-1, N, n, n))
    count = flat.shape[0]
    levels = resolution_levels(spec.K, N) if check_resolution else [(spec.K, N)]

    F = np.empty_like(flat)
    B = np.empty_like(flat)
    node_residual = np.full(count, np.inf)
    gap = np.full(count, np.nan)
    caps = np.zeros(count, dtype=int)
    history = {}
    active = np.arange(count)
    previous = None
    for K, M in levels:
        F_level, B_level, residual, lost = _iwasawa_level(flat[active], K, M)
        if np.any(lost):
            mask = np.zeros(count, dtype=bool)
            mask[active[lost]] = True
            raise FactorizationError('loss of positivity in the Gram system', _nodes(mask.reshape(batch)))
        F[active], B[active] = F_level, B_level
        node_residual[active] = residual
        caps[active] = K
        history[K] = _max(residual)
        if not check_resolution:
            break
        if previous is not None:
            step = frobenius(F_level - previous).max(axis=-1)
            gap[active] = step
            settled = (step <= spec.tol_unitary) & (residual <= spec.tol_unitary)
            active, F_level = active[~settled], F_level[~settled]
            if not active.size:
                break
        previous = F_level
        logger.debug('Iwasawa: %d loop(s) move past K=%d', active.size, K)

    converged_mask = node_residual <= spec.tol_unitary
    resolution_gap = None
    under_resolved = False
    if check_resolution:
        converged_mask &= gap <= spec.tol_unitary
        resolution_gap = _max(gap)
        under_resolved = bool(active.size)
        if under_resolved:
            logger.warning('Iwasawa: %d loop(s) still under-resolved at K=%d (gap %.3e)',
                           active.size, levels[-1][0], _max(gap[active]))

    P = dagger(flat) @ flat
    unitarity = frobenius(dagger(F) @ F - np.eye(n)).max(axis=-1)
    negative = _mode_mass(B, negative=True)
    spectral = frobenius(dagger(B) @ B - P).max(axis=-1)
    product = frobenius(F @ B - flat).max(axis=-1)

    result = IwasawaResult(
        unitary_factor=TwistedGroupLoop(F.reshape(phi.samples.shape), phi.case),
        positive_factor=TwistedGroupLoop(B.reshape(phi.samples.shape), phi.case),
        residual=_max(node_residual),
        converged=bool(np.all(converged_mask)),
        node_residual=node_residual.reshape(batch),
        node_converged=converged_mask.reshape(batch),
        unitarity=_max(unitarity),
        negative_mass=_max(negative),
        spectral_residual=_max(spectral),
        product_residual=_max(product),
        history=history,
        resolution_gap=resolution_gap,
        under_resolved=under_resolved,
        fourier_caps=caps.reshape(batch),
    )
    logger.debug('Iwasawa K<=%d on %s loops: residual %.3e', result.max_fourier_cap,
                 batch or 'single', result.residual)
    if strict and not result.converged:
        history_text = ', '.join(f'K={K}: {value:.3e}' for K, value in history.items())
        raise FactorizationError(
            f"loop Iwasawa did not converge (residual history {history_text})",
            _nodes(~result.node_converged),
        )
    return result


def iwasawa_samples(samples, case, spec, **kwargs):
    """loop_iwasawa on a raw sample array (..., N, n, n)."""
    return loop_iwasawa(TwistedGroupLoop(samples, case), spec, **kwargs)


@dataclass
class BirkhoffResult:
    minus_factor: TwistedGroupLoop
    plus_factor: TwistedGroupLoop
    big_cell: np.ndarray
    condition: np.ndarray
    residual: float
    normalization: float
    resolution_gap: float = None
    under_resolved: bool = False
    resolved: np.ndarray = None
    fourier_caps: np.ndarray = None

    @property
    def misses(self):
        return _nodes(~np.asarray(self.big_cell))

    @property
    def unresolved(self):
        """Big-cell loops whose factors did not settle under cap doubling."""
        if self.resolved is None:
            return []
        return _nodes(np.asarray(self.big_cell) & ~np.asarray(self.resolved))

    @property
    def all_big_cell(self):
        return bool(np.all(self.big_cell))

    def report(self, tol):
        report = Report('birkhoff')
        report.add('birkhoff_plus_negative_modes', self.residual, tol)
        report.add('birkhoff_minus_at_infinity', self.normalization, tol)
        report.note('birkhoff_max_condition', f'{_max(self.condition):.3e}')
        report.note('birkhoff_misses', len(self.misses))
        if self.resolution_gap is not None:
            report.add('birkhoff_resolution_gap', self.resolution_gap, tol)
            report.add('birkhoff_unresolved', len(self.unresolved), 0)
        if self.fourier_caps is not None:
            report.note('birkhoff_max_fourier_cap', int(np.max(self.fourier_caps, initial=0)))
        return report


def _birkhoff_once(samples, K, threshold):
    N = samples.shape[-3]
    n = samples.shape[-1]
    batch = samples.shape[:-3]
    spectrum = _spectrum(samples)
    modes = np.arange(1, K + 1)
    A = block_toeplitz(spectrum, modes, modes)
    C = -np.concatenate([spectrum[..., (-m) % N, :, :] for m in modes], axis=-1)

    condition = np.linalg.cond(A)
    condition = np.where(np.isfinite(condition), condition, np.inf)
    big_cell = condition < threshold

    minus = np.full(samples.shape, np.nan, dtype=complex)
    plus = np.full(samples.shape, np.nan, dtype=complex)
    if np.any(big_cell):
        sol = np.linalg.solve(np.swapaxes(A[big_cell], -1, -2), np.swapaxes(C[big_cell], -1, -2))
        X = np.swapaxes(sol, -1, -2)
        coeffs = np.moveaxis(X.reshape(X.shape[:-1] + (K, n)), -2, -3)
        psi = np.eye(n) + _synthesize(coeffs, -modes, N)
        minus[big_cell] = np.linalg.inv(psi)
        plus[big_cell] = psi @ samples[big_cell]
    return minus, plus, np.asarray(big_cell).reshape(batch), np.asarray(condition).reshape(batch)


def _birkhoff_level(samples, K, M, threshold):
    """Birkhoff at one resolution level on flat samples, chunked like _iwasawa_level."""
    count, N, n, _ = samples.shape
    minus = np.empty_like(samples)
    plus = np.empty_like(samples)
    residual = np.full(count, np.nan)
    big_cell = np.zeros(count, dtype=bool)
    condition = np.empty(count)
    stride = M // N
    for part in _chunks(count, K * n):
        minus_part, plus_part, big_cell[part], condition[part] = _birkhoff_once(
            resample(samples[part], M), K, threshold)
        residual[part] = np.where(big_cell[part], _mode_mass(plus_part, negative=True), np.nan)
        minus[part] = minus_part[:, ::stride]
        plus[part] = plus_part[:, ::stride]
    return minus, plus, residual, big_cell, condition


def birkhoff(phi, spec, check_resolution=True):
    """
    Factor phi = phi_minus phi_plus on the big cell.

    Loops off the big cell get ``big_cell = False`` and NaN factors. With
    ``check_resolution`` big-cell loops are refactorized at doubled Fourier
    caps, as in ``loop_iwasawa``, until consecutive minus factors agree to
    ``spec.tol_unitary``; loops that never settle are reported in
    ``unresolved`` and fail the ``birkhoff_unresolved`` check.
    """
    batch = phi.batch_shape
    N, n = phi.N, phi.case.size
    flat = phi.samples.reshape((-1, N, n, n))
    count = flat.shape[0]
    levels = resolution_levels(spec.K, N) if check_resolution else [(spec.K, N)]

    minus, plus, node_residual, big_cell, condition = _birkhoff_level(
        flat, spec.K, levels[0][1], spec.big_cell_condition)
    caps = np.where(big_cell, spec.K, 0)
    gap = np.full(count, np.nan)
    resolved = big_cell.copy()
    active = np.flatnonzero(big_cell)
    previous = minus[active]
    for K, M in levels[1:]:
        if not active.size:
            break
        minus_level, plus_level, residual, big_level, _ = _birkhoff_level(
            flat[active], K, M, spec.big_cell_condition)
        # a finer cap that loses the big cell leaves the coarser factors in place
        kept = active[big_level]
        minus[kept], plus[kept] = minus_level[big_level], plus_level[big_level]
        node_residual[kept] = residual[big_level]
        caps[kept] = K
        step = frobenius(minus_level - previous).max(axis=-1)
        gap[active] = np.where(big_level, step, np.inf)
        settled = big_level & (step <= spec.tol_unitary) & (residual <= spec.tol_unitary)
        done = settled | ~big_level
        active, previous = active[~done], minus_level[~done]

    resolution_gap = None
    under_resolved = False
    if check_resolution:
        resolved = big_cell & (gap <= spec.tol_unitary) & (node_residual <= spec.tol_unitary)
        resolution_gap = _max(np.where(big_cell, gap, np.nan))
        under_resolved = bool(np.any(big_cell & ~resolved))
        if under_resolved:
            logger.warning('Birkhoff: %d big-cell loop(s) unresolved up to K=%d',
                           int(np.count_nonzero(big_cell & ~resolved)), levels[-1][0])

    at_infinity = frobenius(np.mean(minus, axis=-3) - np.eye(n))
    misses = int(count - np.count_nonzero(big_cell))
    if misses:
        logger.info('Birkhoff: %d loop(s) off the big cell (max condition %.3e)', misses, _max(condition))
    return BirkhoffResult(
        minus_factor=TwistedGroupLoop(minus.reshape(phi.samples.shape), phi.case),
        plus_factor=TwistedGroupLoop(plus.reshape(phi.samples.shape), phi.case),
        big_cell=big_cell.reshape(batch),
        condition=condition.reshape(batch),
        residual=_max(np.where(big_cell, node_residual, np.nan)),
        normalization=_max(np.where(big_cell, at_infinity, np.nan)),
        resolution_gap=resolution_gap,
        under_resolved=under_resolved,
        resolved=resolved.reshape(batch),
        fourier_caps=caps.reshape(batch),
    )


def birkhoff_samples(samples, case, spec, **kwargs):
    """birkhoff on a raw sample array (..., N, n, n)."""
    return birkhoff(TwistedGroupLoop(samples, case), spec, **kwargs)
