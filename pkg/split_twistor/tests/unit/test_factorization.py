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

import numpy as np
import pytest
from scipy.linalg import expm

from split_twistor import factorization
from split_twistor.factorization import LoopMatrixFunction


def _theta(N):
    return 2.0 * np.pi * np.arange(N) / N


def _polynomial_loop(rng, n, N, scale=0.02):
    """H = G^-1 G^-* for G(zeta) = B0 + scale (A1 zeta + A2 zeta^2)."""
    def normal():
        return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))

    B0 = np.eye(n) + 0.1 * normal()
    A1, A2 = scale * normal(), scale * normal()
    zeta = np.exp(1j * _theta(N))[:, None, None]
    G = B0 + A1 * zeta + A2 * zeta ** 2
    Ginv = np.linalg.inv(G)
    H = Ginv @ np.conj(np.swapaxes(Ginv, -1, -2))
    return LoopMatrixFunction(0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))), B0


@pytest.mark.parametrize("N", [8, 12, 48])
def test_loop_needs_a_power_of_two(N):
    with pytest.raises(factorization.UndersampledLoop):
        LoopMatrixFunction.from_scalar(np.ones(N))


def test_rough_loop_fails_the_sampling_check(rng):
    loop = LoopMatrixFunction.from_scalar(rng.normal(size=16))
    with pytest.raises(factorization.UndersampledLoop):
        loop.check_sampling()
    LoopMatrixFunction.from_scalar(np.exp(0.1 * np.cos(_theta(32)))) \
        .check_sampling()


def test_cauchy_split_reproduces_the_samples(rng):
    N = 32
    theta = _theta(N)
    f = (0.3 + np.cos(theta) - 0.5 * np.sin(3 * theta)
         + 0.1 * np.cos(16 * theta))
    g, g_full = factorization.cauchy_split(f)
    assert g.shape == (N // 2 + 1,)
    zeta = np.exp(1j * theta)
    powers = zeta[:, None] ** np.arange(N // 2 + 1)
    values = np.sum(g[None, :] * powers, axis=1)
    assert np.allclose(2.0 * values.real, f)
    assert g_full[0] == pytest.approx(0.3)
    assert np.allclose(g_full[1:], g[1:])


def test_cauchy_split_needs_real_samples():
    with pytest.raises(factorization.FactorizationError):
        factorization.cauchy_split(1j * np.ones(16))


def test_birkhoff_of_a_constant_loop():
    C = np.array([[2.0, 0.5 - 0.25j], [0.5 + 0.25j, 1.0]])
    H = LoopMatrixFunction(np.broadcast_to(C, (16, 2, 2)))
    result = factorization.birkhoff_hermitian(H)
    g0 = result.value_at_zero
    assert result.residual < 1e-12
    assert np.allclose(np.linalg.inv(g0) @ np.linalg.inv(g0).conj().T, C)
    assert np.allclose(result.g_plus[1:], 0.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_birkhoff_recovers_polynomial_factor(seed, n):
    H, B0 = _polynomial_loop(np.random.default_rng(seed), n, 64)
    result = factorization.birkhoff_hermitian(H)
    assert result.residual < 1e-8
    g0 = result.value_at_zero
    assert np.allclose(g0, g0.conj().T)
    assert np.min(np.linalg.eigvalsh(g0)) > 0
    J = np.linalg.inv(g0) @ np.linalg.inv(g0).conj().T
    expected = np.linalg.inv(B0) @ np.linalg.inv(B0).conj().T
    assert np.allclose(J, expected, atol=1e-8)


def test_birkhoff_names_the_bad_loop():
    theta = _theta(16)
    values = np.stack([np.ones(16), -1.0 - 0.1 * np.cos(theta),
                       2.0 * np.ones(16)])
    with pytest.raises(factorization.NotPositiveDefinite) as e:
        factorization.birkhoff_hermitian(
            LoopMatrixFunction.from_scalar(values))
    assert e.value.index == (1,)


def test_birkhoff_names_the_first_bad_loop():
    # the worst loop comes last; the report follows batch order
    theta = _theta(16)
    values = np.stack([np.ones(16), -0.5 * np.ones(16),
                       -3.0 - 0.1 * np.cos(theta)])
    with pytest.raises(factorization.NotPositiveDefinite) as e:
        factorization.birkhoff_hermitian(
            LoopMatrixFunction.from_scalar(values))
    assert e.value.index == (1,)
    assert all(type(i) is int for i in e.value.index)
    assert 'batch index (1,)' in str(e.value)


def _scalar_oracle(N):
    """h = exp(i psi) with psi = (1 - cos theta) / 4 and its exact factors."""
    zeta = np.exp(1j * _theta(N))
    h = np.exp(0.25j * (1.0 - np.cos(_theta(N))))
    minus = np.exp(0.125j * (1.0 / zeta - 1.0))
    plus = np.exp(0.125j * (1.0 - zeta))
    return h, minus, plus


def test_riemann_hilbert_scalar_oracle():
    N = 32
    h, minus, plus = _scalar_oracle(N)
    result = factorization.rhp_factorize(LoopMatrixFunction.from_scalar(h))
    assert result.residual < 1e-10
    assert np.allclose(result.minus_samples[:, 0, 0], minus, atol=1e-10)
    assert np.allclose(result.plus_samples[:, 0, 0], plus, atol=1e-10)
    H = factorization.hermitian_from_rhp(result)
    assert np.allclose(H.samples[:, 0, 0].real,
                       np.exp(0.25 * np.sin(_theta(N))), atol=1e-10)


def test_loop_rebuilt_from_its_hermitian_metric():
    N = 32
    h, minus, plus = _scalar_oracle(N)
    H = LoopMatrixFunction.from_scalar(np.exp(0.25 * np.sin(_theta(N))))
    assert np.allclose(factorization.spectral_factor(H, 'plus')[:, 0, 0],
                       plus, atol=1e-10)
    assert np.allclose(factorization.spectral_factor(H, 'minus')[:, 0, 0],
                       minus, atol=1e-10)
    rebuilt = factorization.loop_from_hermitian(H)
    assert np.allclose(rebuilt.samples[:, 0, 0], h, atol=1e-10)


def test_riemann_hilbert_matrix_loop_round_trip():
    N = 32
    theta = _theta(N)
    X = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, -0.3]])
    values, vectors = np.linalg.eigh(X)
    psi = (1.0 - np.cos(theta))[:, None] * values[None, :]
    h = (vectors[None] * np.exp(1j * psi)[:, None, :]) @ vectors.conj().T
    loop = LoopMatrixFunction(h)
    result = factorization.rhp_factorize(loop)
    assert result.residual < 1e-10
    assert np.allclose(result.minus_samples[0], np.eye(2))
    H = factorization.hermitian_from_rhp(result)
    rebuilt = factorization.loop_from_hermitian(H)
    assert np.allclose(rebuilt.samples, h, atol=1e-9)


def test_riemann_hilbert_needs_unitary_data():
    with pytest.raises(factorization.UnitarityViolation):
        factorization.rhp_factorize(
            LoopMatrixFunction(2.0 * np.broadcast_to(np.eye(2), (16, 2, 2))))


def test_riemann_hilbert_needs_identity_at_infinity():
    h = np.exp(0.25j * (1.0 + np.cos(_theta(16))))
    with pytest.raises(factorization.FactorizationError):
        factorization.rhp_factorize(LoopMatrixFunction.from_scalar(h))


def test_unknown_spectral_side():
    H = LoopMatrixFunction.from_scalar(np.ones(16))
    with pytest.raises(factorization.FactorizationError):
        factorization.spectral_factor(H, 'sideways')


def test_birkhoff_corpus_at_full_resolution():
    rng = np.random.default_rng(2021)
    for trial in range(20):
        n = trial % 4 + 1
        H, B0 = _polynomial_loop(rng, n, 256)
        result = factorization.birkhoff_hermitian(H)
        assert result.residual < 1e-8, trial
        g0 = result.value_at_zero
        J = np.linalg.inv(g0) @ np.linalg.inv(g0).conj().T
        expected = np.linalg.inv(B0) @ np.linalg.inv(B0).conj().T
        assert np.max(np.abs(J - expected)) < 1e-8, trial


def test_birkhoff_is_independent_of_truncation():
    H, _ = _polynomial_loop(np.random.default_rng(7), 3, 256)
    products = []
    for m in (32, 64, 127):
        g0 = factorization.birkhoff_hermitian(H, truncation=m).value_at_zero
        products.append(np.linalg.inv(g0) @ np.linalg.inv(g0).conj().T)
    for J in products[1:]:
        assert np.max(np.abs(J - products[0])) < 1e-8


def test_riemann_hilbert_factors_scale_with_small_data():
    N = 32
    theta = _theta(N)
    K = np.array([[0.4, 0.1 - 0.2j], [0.1 + 0.2j, -0.3]])
    L = np.array([[-0.2, 0.3j], [-0.3j, 0.5]])
    generator = 1j * ((1.0 - np.cos(theta))[:, None, None] * K
                      + np.sin(theta)[:, None, None] * L)
    scaled = []
    for epsilon in (1e-3, 2e-3, 4e-3):
        h = LoopMatrixFunction(expm(epsilon * generator))
        result = factorization.rhp_factorize(h)
        minus = np.max(np.abs(result.minus_samples - np.eye(2)))
        plus = np.max(np.abs(result.plus_samples - np.eye(2)))
        scaled.append((minus / epsilon, plus / epsilon))
    scaled = np.array(scaled)
    assert np.all(scaled > 0.1)
    assert np.allclose(scaled, scaled[0], rtol=1e-2)
