"""Seeded random twisted loops and potentials for the verification suites and tests."""
import numpy as np

from .algebra import CP2
from .dpw import HoloPotential
from .loops import TwistedAlgebraLoop, TwistedGroupLoop, exp_loop, lambda_grid, loop_multiply


def random_twisted(rng, case, k, scale=1.0, batch=()):
    """Random element of the complexified i**k eigenspace of tau."""
    basis = case.basis(k)
    shape = tuple(batch) + (len(basis),)
    weights = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return scale * np.tensordot(weights, basis, axes=([-1], [0]))


def random_real_loop(rng, case, k_max=2, scale=0.3, batch=()):
    """Twisted algebra loop in the real form on the modes -k_max..k_max."""
    positive = [random_twisted(rng, case, k, scale, batch) for k in range(1, k_max + 1)]
    c0 = case.real_part(random_twisted(rng, case, 0, scale, batch))
    coeffs = [case.tilde(c) for c in reversed(positive)] + [c0] + positive
    return TwistedAlgebraLoop(np.stack(coeffs, axis=-3), -k_max, case, real=True)


def random_unitary_loop(rng, case, N, k_max=2, scale=0.3, batch=()):
    return exp_loop(random_real_loop(rng, case, k_max, scale, batch), N)


def random_plus_loop(rng, case, N, k_max=2, scale=0.3, batch=()):
    """
    exp of a twisted plus-loop whose constant term is upper triangular with
    real diagonal, so the constant term of the result is already normalized.
    """
    c0 = np.triu(random_twisted(rng, case, 0, scale, batch))
    diagonal = np.arange(case.size)
    c0[..., diagonal, diagonal] = c0[..., diagonal, diagonal].real
    c0 = case.project(c0, 0)
    coeffs = [c0] + [random_twisted(rng, case, k, scale, batch) for k in range(1, k_max + 1)]
    return exp_loop(TwistedAlgebraLoop(np.stack(coeffs, axis=-3), 0, case), N)


def random_minus_loop(rng, case, N, k_max=2, scale=0.3, batch=()):
    """exp of a twisted loop on the modes -k_max..-1; equal to 1 at lambda = infinity."""
    coeffs = [random_twisted(rng, case, k, scale, batch) for k in range(-k_max, 0)]
    return exp_loop(TwistedAlgebraLoop(np.stack(coeffs, axis=-3), -k_max, case), N)


def iwasawa_fixture(rng, case, N, count, scale=0.3):
    """(unitary, plus, product) for ``count`` loops."""
    unitary = random_unitary_loop(rng, case, N, scale=scale, batch=(count,))
    plus = random_plus_loop(rng, case, N, scale=scale, batch=(count,))
    return unitary, plus, loop_multiply(unitary, plus)


def birkhoff_fixture(rng, case, N, count, scale=0.3):
    """(minus, plus, product) for ``count`` loops."""
    minus = random_minus_loop(rng, case, N, scale=scale, batch=(count,))
    plus = random_plus_loop(rng, case, N, scale=scale, batch=(count,))
    return minus, plus, loop_multiply(minus, plus)


def off_big_cell_loop(N):
    """diag(lambda^4, lambda^-4, 1): twisted, invertible and outside the big cell."""
    lam = lambda_grid(N)
    samples = np.zeros((N, 3, 3), dtype=complex)
    samples[:, 0, 0] = lam ** 4
    samples[:, 1, 1] = lam ** -4
    samples[:, 2, 2] = 1
    return TwistedGroupLoop(samples, CP2)


def random_potential(rng, case=CP2, degree=1, scale=0.3, k_max=0, domain=None):
    """Polynomial potential on the modes -2..k_max with a nonvanishing lambda^-1 term."""
    coeffs = np.stack([
        random_twisted(rng, case, k, scale, batch=(degree + 1,)) / np.arange(1, degree + 2)[:, None, None]
        for k in range(-2, k_max + 1)
    ])
    return HoloPotential(coeffs, case, -2, domain)
