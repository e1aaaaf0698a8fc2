# Copyright (c) 2021 SUSE LLC
#
# This program is free software; you can redistribute it and/or
# modify it under the terms of version 3 of the GNU General Public License as
# published by the Free Software Foundation.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.   See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, contact SUSE LLC.
#
# To contact SUSE about this file by physical or electronic mail,
# you may find current contact information at www.suse.com

"""Factorisation of matrix loops on the unit circle.

Loops are sampled at ``theta_j = 2 pi j / N`` and stored with the sample axis
third from the end, ``(*batch, N, n, n)``.  Coefficient lists are arrays
``(*batch, K, n, n)``: entry k multiplies ``lambda^k`` for holomorphic
(plus) factors and ``lambda^-k`` for antiholomorphic (minus) factors.
"""

from dataclasses import dataclass
from functools import cached_property
import logging

import numpy as np

from split_twistor.errors import SplitTwistorError
from split_twistor.parallel import map_chunks

class FactorizationError(SplitTwistorError):
    pass

class NotPositiveDefinite(FactorizationError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index

class UndersampledLoop(FactorizationError):
    pass

class FactorizationDiverged(FactorizationError):
    pass

class UnitarityViolation(FactorizationError):
    pass

class LargeDataJump(FactorizationError):
    pass

LOG = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-10
MIN_EIGENVALUE = 1e-8
TAIL_TOLERANCE = 1e-6
UNITARITY_TOLERANCE = 1e-10
RESIDUAL_TOLERANCE = 1e-8
CONDITION_LIMIT = 1e10
MIN_SAMPLES = 16


def is_power_of_two(value):
    return value > 0 and (value & (value - 1)) == 0


def _dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _hermitian_power(a, power):
    values, vectors = np.linalg.eigh(0.5 * (a + _dagger(a)))
    return (vectors * values[..., None, :] ** power) @ _dagger(vectors)


def _sup_norm(a):
    if a.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(a, axis=(-2, -1))))


def evaluate_series(coefficients, points, inverse=False):
    """Evaluate a coefficient list at complex ``points``.

    With ``inverse`` the series is in powers of 1/lambda.
    """
    points = np.asarray(points, dtype=complex)
    powers = np.arange(coefficients.shape[-3])
    base = 1.0 / points if inverse else points
    table = base[..., None] ** powers
    table = table.reshape(-1, len(powers))
    return np.einsum('...kij,lk->...lij', coefficients, table
                     ).reshape(coefficients.shape[:-3] + points.shape
                               + coefficients.shape[-2:])


def samples_from_coefficients(coefficients, N, inverse=False):
    """Values of a coefficient list at the N equispaced circle samples."""
    K = coefficients.shape[-3]
    padded = np.zeros(coefficients.shape[:-3] + (N,) + coefficients.shape[-2:],
                      dtype=complex)
    if inverse:
        padded[..., 0, :, :] = coefficients[..., 0, :, :]
        for k in range(1, min(K, N)):
            padded[..., N - k, :, :] = coefficients[..., k, :, :]
    else:
        padded[..., :min(K, N), :, :] = coefficients[..., :min(K, N), :, :]
    return np.fft.ifft(padded, axis=-3) * N


class LoopMatrixFunction(object):
    """Equispaced samples of an n x n matrix function on the unit circle."""

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=complex)
        if samples.ndim < 3:
            raise FactorizationError(
                'Loop samples need shape (*batch, N, n, n), got %s'
                % repr(samples.shape))
        N = samples.shape[-3]
        if not is_power_of_two(N) or N < MIN_SAMPLES:
            raise UndersampledLoop(
                'Sample count %d is not a power of two >= %d'
                % (N, MIN_SAMPLES))
        self.samples = samples

    @classmethod
    def from_scalar(cls, values):
        values = np.asarray(values, dtype=complex)
        return cls(values[..., None, None])

    @classmethod
    def from_callable(cls, func, N):
        theta = 2.0 * np.pi * np.arange(N) / N
        return cls(np.stack([np.asarray(func(t), dtype=complex)
                             for t in theta], axis=-3))

    @property
    def N(self):
        return self.samples.shape[-3]

    @property
    def size(self):
        return self.samples.shape[-1]

    @property
    def batch_shape(self):
        return self.samples.shape[:-3]

    @property
    def thetas(self):
        return 2.0 * np.pi * np.arange(self.N) / self.N

    @cached_property
    def coefficients(self):
        return np.fft.fft(self.samples, axis=-3) / self.N

    def coefficient(self, k):
        return self.coefficients[..., k % self.N, :, :]

    @cached_property
    def tail_ratio(self):
        """Largest fraction of Fourier energy above order N/4."""
        energy = np.sum(np.abs(self.coefficients) ** 2, axis=(-2, -1))
        freqs = np.abs(np.fft.fftfreq(self.N, 1.0 / self.N))
        total = np.sum(energy, axis=-1)
        tail = np.sum(energy[..., freqs > self.N // 4], axis=-1)
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = np.where(total > 0, np.sqrt(tail / total), 0.0)
        return float(np.max(ratio)) if ratio.size else 0.0

    def check_sampling(self, tolerance=TAIL_TOLERANCE):
        if self.tail_ratio > tolerance:
            raise UndersampledLoop(
                'Fourier tail %.3g exceeds %.3g, increase the sample count'
                % (self.tail_ratio, tolerance))

    def inverse(self):
        return LoopMatrixFunction(np.linalg.inv(self.samples))

    def __repr__(self):
        return 'LoopMatrixFunction(batch=%s, N=%d, n=%d)' % (
            repr(self.batch_shape), self.N, self.size)


@dataclass
class FactorizationResult:
    g_plus: np.ndarray
    g_minus: np.ndarray
    residual: float
    normalization: str
    plus_samples: np.ndarray = None
    minus_samples: np.ndarray = None

    @property
    def value_at_zero(self):
        return self.g_plus[..., 0, :, :]

    def evaluate_plus(self, points):
        return evaluate_series(self.g_plus, points)

    def evaluate_minus(self, points):
        return evaluate_series(self.g_minus, points, inverse=True)


def cauchy_split(f):
    """Split real loop samples ``f`` as ``g + conj(g)``.

    Returns ``(g, g_full)``, coefficient arrays of length N/2 + 1 along the
    last axis.  ``g`` carries half the zero mode so that g + conj(g) = f on
    the samples; ``g_full`` carries the full zero mode, g_full(0) = f^_0.
    """
    f = np.asarray(f)
    if np.iscomplexobj(f) and np.max(np.abs(f.imag), initial=0.0) > 1e-12:
        raise FactorizationError('cauchy_split needs real samples')
    f = np.real(f)
    N = f.shape[-1]
    fhat = np.fft.fft(f, axis=-1) / N
    g = np.array(fhat[..., :N // 2 + 1])
    g[..., 0] *= 0.5
    g[..., N // 2] *= 0.5
    g_full = np.array(g)
    g_full[..., 0] = fhat[..., 0]
    return g, g_full


def _first_failure(failed):
    """Batch index, as plain ints, of the first failing loop in flat order."""
    flat = int(np.flatnonzero(failed.ravel())[0])
    index = np.unravel_index(flat, failed.shape)[:-1]
    return tuple(int(i) for i in index)


def _check_hermitian_data(H):
    samples = H.samples
    scale = max(1.0, _sup_norm(samples))
    skew = np.linalg.norm(samples - _dagger(samples), axis=(-2, -1))
    failed = skew > HERMITIAN_TOLERANCE * scale
    if np.any(failed):
        index = _first_failure(failed)
        raise NotPositiveDefinite(
            'Loop is not hermitian at batch index %s' % repr(index), index)
    lowest = np.linalg.eigvalsh(0.5 * (samples + _dagger(samples)))[..., 0]
    failed = lowest <= MIN_EIGENVALUE
    if np.any(failed):
        index = _first_failure(failed)
        raise NotPositiveDefinite(
            'Loop is not positive definite at batch index %s '
            '(eigenvalue %.3g)' % (repr(index), np.min(lowest[index])),
            index)


def _toeplitz_indices(m):
    k = np.arange(m + 1)
    return k[None, :] - k[:, None]


def _birkhoff_truncated(coefficients, N, m):
    """Solve the block Toeplitz system for a flat batch of loops."""
    batch, _, n, _ = coefficients.shape
    index = _toeplitz_indices(m) % N
    blocks = coefficients[:, index]
    size = (m + 1) * n
    T = blocks.transpose(0, 1, 3, 2, 4).reshape(batch, size, size)
    rhs = np.zeros((batch, (m + 1) * n, n), dtype=complex)
    rhs[:, :n, :] = np.eye(n)
    X = np.linalg.solve(T, rhs).reshape(batch, m + 1, n, n)
    R = 0.5 * (X[:, 0] + _dagger(X[:, 0]))
    root = _hermitian_power(R, 0.5)
    inv_root = _hermitian_power(R, -0.5)
    g = inv_root[:, None] @ _dagger(X)
    g[:, 0] = root
    return g


def birkhoff_hermitian(H, truncation=None, tolerance=RESIDUAL_TOLERANCE,
                       threads=None, check_sampling=True):
    """Factor a positive definite hermitian loop as ``g H g* = I``.

    ``g`` is holomorphic in the disc and normalised by g(0) hermitian
    positive definite.  The truncation order defaults to N/4 and is raised
    to N/2 - 1 once if the residual misses ``tolerance``.

    Args:
        H: LoopMatrixFunction, hermitian positive definite at every sample.
        truncation: highest retained coefficient order.
        tolerance: bound on sup |g H g* - I|.
        threads: worker count for the batch, None for all cores.

    Returns:
        FactorizationResult with g in ``g_plus`` and the coefficients of
        ``g H = g^-*`` in ``g_minus``.
    """
    _check_hermitian_data(H)
    if check_sampling:
        H.check_sampling()
    N, n = H.N, H.size
    batch_shape = H.batch_shape
    flat = H.coefficients.reshape((-1, N, n, n))
    samples = H.samples.reshape((-1, N, n, n))
    orders = [truncation or N // 4]
    if truncation is None:
        orders.append(N // 2 - 1)

    for m in orders:
        g = np.empty((flat.shape[0], m + 1, n, n), dtype=complex)

        def solve(chunk):
            g[chunk] = _birkhoff_truncated(flat[chunk], N, m)

        map_chunks(solve, flat.shape[0], threads)
        g_values = samples_from_coefficients(g, N)
        product = g_values @ samples
        defect = product @ _dagger(g_values) - np.eye(n)
        residual = _sup_norm(defect)
        LOG.debug("Birkhoff truncation %d residual %.3g", m, residual)
        if residual <= tolerance:
            break
        LOG.warning("Birkhoff residual %.3g at truncation %d", residual, m)
    else:
        raise FactorizationDiverged(
            'Birkhoff residual %.3g exceeds %.3g' % (residual, tolerance))

    minus_coeffs = np.fft.fft(product, axis=-3) / N
    g_minus = np.concatenate([minus_coeffs[:, :1],
                              minus_coeffs[:, ::-1][:, :N // 2]], axis=1)
    return FactorizationResult(
        g_plus=g.reshape(batch_shape + g.shape[1:]),
        g_minus=g_minus.reshape(batch_shape + g_minus.shape[1:]),
        residual=residual,
        normalization='g(0) hermitian positive definite',
        plus_samples=g_values.reshape(batch_shape + (N, n, n)),
        minus_samples=product.reshape(batch_shape + (N, n, n)))


def _check_unitary_loop(h):
    samples = h.samples
    defect = samples @ _dagger(samples) - np.eye(h.size)
    worst = _sup_norm(defect)
    if worst > UNITARITY_TOLERANCE:
        raise UnitarityViolation(
            'Loop deviates from unitarity by %.3g' % worst)
    at_infinity = _sup_norm(samples[..., 0, :, :] - np.eye(h.size))
    if at_infinity > UNITARITY_TOLERANCE:
        raise FactorizationError(
            'Loop is not the identity at z3 = infinity (%.3g)' % at_infinity)


def _rhp_truncated(coefficients, N, m):
    batch, _, n, _ = coefficients.shape
    r = np.arange(1, m + 1)
    index = (r[None, :] - r[:, None]) % N
    blocks = coefficients[:, index]
    A = blocks.transpose(0, 1, 3, 2, 4).reshape(batch, m * n, m * n)
    rhs = -coefficients[:, (-r) % N].reshape(batch, m * n, n)
    condition = np.linalg.cond(A) if m else np.ones(batch)
    a = np.linalg.solve(A, rhs).reshape(batch, m, n, n)
    minus = np.concatenate(
        [np.broadcast_to(np.eye(n), (batch, 1, n, n)), a], axis=1)
    return minus, condition


def rhp_factorize(h, truncation=None, tolerance=RESIDUAL_TOLERANCE,
                  threads=None):
    """Factor a unitary loop on the Cayley circle as ``h g- = g+``.

    The circle variable is ``zeta = (z3 - i) / (z3 + i)`` so sample 0 sits
    at z3 = infinity, where h, g+ and g- all equal the identity.  g+ is
    holomorphic in the disc (upper half z3-plane) and g- outside it.
    """
    _check_unitary_loop(h)
    h.check_sampling()
    N, n = h.N, h.size
    batch_shape = h.batch_shape
    m = truncation or N // 4
    flat = h.coefficients.reshape((-1, N, n, n))
    samples = h.samples.reshape((-1, N, n, n))
    minus = np.empty((flat.shape[0], m + 1, n, n), dtype=complex)
    condition = np.empty(flat.shape[0])

    def solve(chunk):
        minus[chunk], condition[chunk] = _rhp_truncated(flat[chunk], N, m)

    map_chunks(solve, flat.shape[0], threads)
    if np.max(condition, initial=1.0) > CONDITION_LIMIT:
        worst = np.unravel_index(int(np.argmax(condition)),
                                 batch_shape or (1,))
        raise LargeDataJump(
            'Riemann-Hilbert system singular (condition %.3g) at slice %s'
            % (np.max(condition), repr(worst)))

    minus_values = samples_from_coefficients(minus, N, inverse=True)
    norm = np.linalg.inv(minus_values[:, 0])
    minus_values = minus_values @ norm[:, None]
    minus = minus @ norm[:, None]
    product = samples @ minus_values
    plus_coeffs = np.fft.fft(product, axis=-3) / N
    g_plus = plus_coeffs[:, :N // 2 + 1]
    plus_values = samples_from_coefficients(g_plus, N)
    residual = _sup_norm(product - plus_values)
    LOG.debug("Riemann-Hilbert residual %.3g", residual)
    if residual > tolerance:
        raise FactorizationDiverged(
            'Riemann-Hilbert residual %.3g exceeds %.3g'
            % (residual, tolerance))
    return FactorizationResult(
        g_plus=g_plus.reshape(batch_shape + g_plus.shape[1:]),
        g_minus=minus.reshape(batch_shape + minus.shape[1:]),
        residual=residual,
        normalization='identity at z3 = infinity',
        plus_samples=plus_values.reshape(batch_shape + (N, n, n)),
        minus_samples=minus_values.reshape(batch_shape + (N, n, n)))


def hermitian_from_rhp(result):
    """``H = g-* g-`` on the samples of a Riemann-Hilbert factorisation."""
    g = result.minus_samples
    return LoopMatrixFunction(_dagger(g) @ g)


def spectral_factor(H, side='plus', tolerance=RESIDUAL_TOLERANCE,
                    threads=None):
    """Samples of k with ``H = k* k``, k holomorphic inside ('plus') or
    outside ('minus') the disc, normalised to a positive hermitian value
    at sample 0."""
    if side == 'plus':
        g = birkhoff_hermitian(H.inverse(), tolerance=tolerance,
                               threads=threads).plus_samples
        k = g
    elif side == 'minus':
        g = birkhoff_hermitian(H, tolerance=tolerance,
                               threads=threads).plus_samples
        k = np.linalg.inv(_dagger(g))
    else:
        raise FactorizationError('Unknown factor side %s' % repr(side))
    u, _, vh = np.linalg.svd(k[..., 0, :, :])
    unitary = u @ vh
    return _dagger(unitary)[..., None, :, :] @ k


def loop_from_hermitian(H, tolerance=RESIDUAL_TOLERANCE, threads=None):
    """Rebuild the unitary loop ``h = g+ (g-)^-1`` from ``H`` alone."""
    plus = spectral_factor(H, 'plus', tolerance, threads)
    minus = spectral_factor(H, 'minus', tolerance, threads)
    return LoopMatrixFunction(plus @ np.linalg.inv(minus))
