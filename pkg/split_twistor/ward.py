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

"""Reconstruction of anti-self-dual connections from twistor data.

Three routes are provided: per-point Birkhoff factorisation of a hermitian
twistor metric H into Yang's J-matrix, the closed-form Ward ansatz built
from the X-ray transform of one function, and the ADHM projector for the
charge two family.  The closed-form abelian solution with non-trivial
first Chern classes lives here as well.

NOTE: the Ward ansatz J is assembled with the split normalisation
phi = f^_0 / 2 of the Cauchy integral.  The alternative phi = f^_0 is kept
as ``convention='doubled'`` only to show that it does not solve Yang's
equation.
"""

from dataclasses import dataclass
from types import SimpleNamespace
import logging

import numpy as np
from scipy.stats import special_ortho_group

from split_twistor.errors import SplitTwistorError
from split_twistor.factorization import (
    FactorizationError, LoopMatrixFunction, NotPositiveDefinite,
    birkhoff_hermitian)
from split_twistor.fields import (
    CurvatureField, LatticeGaugeField, PAIRS, dagger, relative_residual,
    sample_derivatives, sample_laplacians)
from split_twistor.geometry import (
    boundary_loop, hat_array, spinor_from_chart)
from split_twistor.parallel import map_chunks
from split_twistor.transforms import (
    _loop_modes, random_real_twistors, unit_quaternion, xray_field)

class WardError(SplitTwistorError):
    pass

class ConstraintViolation(WardError):
    pass

class DegenerateDelta(WardError):
    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points

class CertificateFailure(DegenerateDelta):
    pass

LOG = logging.getLogger(__name__)

DEFAULT_LOOP_SAMPLES = 32
DEFAULT_QUADRATURE = 32
CONSTRAINT_TOLERANCE = 1e-10
DELTA_TOLERANCE = 1e-10
GENERATOR_STEP = 1e-5
SYMMETRY_TOLERANCE = 1e-12
# maxwell_form = INTEGRAL_FORMULA_RATIO * (rank-1 Ward curvature); the contour
# measure dt is pi times d(pi_1 / pi_0) on the real line
INTEGRAL_FORMULA_RATIO = 2j

CONJUGATION = np.array([[0.0, -1.0], [1.0, 0.0]])


def _hermitian_power(a, power):
    values, vectors = np.linalg.eigh(0.5 * (a + dagger(a)))
    return (vectors * values[..., None, :] ** power) @ dagger(vectors)


class HermitianTwistorData(object):
    """A hermitian positive definite matrix function H(Z) on real twistors."""

    def __init__(self, func, rank, degree=0, name='H'):
        self.func = func
        self.rank = rank
        self.degree = degree
        self.name = name

    def __repr__(self):
        return 'HermitianTwistorData(%s, rank=%d)' % (self.name, self.rank)

    def __call__(self, Z):
        return np.asarray(self.func(np.asarray(Z, dtype=complex)),
                          dtype=complex)

    @classmethod
    def constant(cls, C):
        C = np.asarray(C, dtype=complex)
        return cls(lambda Z: np.broadcast_to(C, np.shape(Z)[:-2] + C.shape),
                   C.shape[0], name='constant')

    @classmethod
    def scalar_exp(cls, f):
        return cls(lambda Z: np.exp(f(Z))[..., None, None], 1,
                   name='exp(%s)' % f.name)

    @classmethod
    def quadric_series(cls, matrices, quadrics):
        """H(Z) = C + sum_k (q.Q_k q) B_k with q the unit quaternion of Z.

        ``matrices`` holds C followed by the B_k, ``quadrics`` the real
        symmetric 4x4 Q_k.  The result is degree 0 but need not be positive.
        """
        matrices = np.asarray(matrices, dtype=complex)
        quadrics = np.asarray(quadrics, dtype=float).reshape(-1, 4, 4)
        if matrices.shape[0] != quadrics.shape[0] + 1:
            raise WardError('Need one matrix more than quadrics, got %d and %d'
                            % (matrices.shape[0], quadrics.shape[0]))

        def func(Z):
            q = unit_quaternion(Z)
            weights = np.einsum('...i,kij,...j->...k', q, quadrics, q)
            return matrices[0] + np.einsum('...k,kab->...ab', weights,
                                           matrices[1:])

        return cls(func, matrices.shape[-1], name='quadric series')

    def congruent(self, g):
        """The gauge-equivalent data g H g* for a constant matrix g."""
        g = np.asarray(g, dtype=complex)
        return HermitianTwistorData(lambda Z: g @ self(Z) @ dagger(g),
                                    self.rank, self.degree,
                                    name='g %s g*' % self.name)

    def check(self, seed=0, samples=32, tolerance=1e-10):
        rng = np.random.default_rng(seed)
        Z = random_real_twistors(rng, samples)
        values = self(Z)
        skew = float(np.max(np.abs(values - dagger(values))))
        if skew > tolerance:
            raise NotPositiveDefinite('%s is not hermitian (%.3g)'
                                      % (self.name, skew))
        lowest = float(np.min(np.linalg.eigvalsh(values)))
        if lowest <= tolerance:
            raise NotPositiveDefinite('%s is not positive definite (%.3g)'
                                      % (self.name, lowest))
        scale = rng.uniform(0.5, 2.0, samples)[:, None, None]
        scaled = self(scale * Z)
        defect = float(np.max(np.abs(scaled - scale ** self.degree * values)))
        if defect > tolerance * max(1.0, float(np.max(np.abs(values)))):
            raise WardError('%s fails the degree %d scale test by %.3g'
                            % (self.name, self.degree, defect))


class JMatrixField(object):
    """Yang's J-matrix on a grid, optionally with its generating callable
    ``func(c1, w1, c2, w2)`` for derivative refinement studies."""

    def __init__(self, grid, values, func=None, residual=0.0):
        self.grid = grid
        self.values = np.asarray(values, dtype=complex)
        self.func = func
        self.residual = residual

    @property
    def rank(self):
        return self.values.shape[-1]

    def hermitian_defect(self):
        return float(np.max(np.abs(self.values - dagger(self.values))))

    def min_eigenvalue(self):
        return float(np.min(np.linalg.eigvalsh(
            0.5 * (self.values + dagger(self.values)))))

    def determinant(self):
        return np.linalg.det(self.values)


def _node_label(grid, flat):
    index = np.unravel_index(int(flat), grid.shape)
    return 'node %d %s' % (int(flat), repr(tuple(int(i) for i in index)))


def reconstruct_J(H, grid, samples=DEFAULT_LOOP_SAMPLES, threads=None,
                  tolerance=1e-8, check_sampling=True):
    """J(p) = g(0)^-1 g(0)^-* from the Birkhoff factor of H on each disc
    boundary ``theta -> x y^T + exp(i theta) xhat yhat^T``.

    Without ``check_sampling`` the Fourier tail gate is skipped and the
    factorisation residual alone decides the truncation order.
    """
    x = np.broadcast_to(grid.x(), grid.shape + (2,)).reshape(-1, 2)
    y = np.broadcast_to(grid.y(), grid.shape + (2,)).reshape(-1, 2)
    J = np.empty((x.shape[0], H.rank, H.rank), dtype=complex)
    residual = np.zeros(x.shape[0])

    def run(chunk):
        loops = LoopMatrixFunction(H(boundary_loop(x[chunk], y[chunk],
                                                   samples)))
        try:
            result = birkhoff_hermitian(loops, tolerance=tolerance, threads=1,
                                        check_sampling=check_sampling)
        except NotPositiveDefinite as e:
            node = chunk.start + int(e.index[0])
            label = _node_label(grid, node)
            raise NotPositiveDefinite('%s at %s' % (e, label), (node,))
        except FactorizationError as e:
            raise type(e)('%s in nodes %d-%d' % (e, chunk.start, chunk.stop))
        g0inv = np.linalg.inv(result.value_at_zero)
        J[chunk] = g0inv @ dagger(g0inv)
        residual[chunk] = result.residual

    map_chunks(run, x.shape[0], threads)
    LOG.info("Reconstructed J on %d nodes, worst residual %.3g",
             x.shape[0], residual.max())
    return JMatrixField(grid, J.reshape(grid.shape + (H.rank, H.rank)),
                        residual=float(residual.max()))


def unitary_gauge(values):
    """Pointwise g = J^-1/2, taking the holomorphic frame to a unitary one."""
    return _hermitian_power(values, -0.5)


def connection_from_J(J, gauge='holomorphic'):
    """A = J^-1 dJ in the holomorphic frame (A_wbar = 0) or its transform
    by g = J^-1/2 into unitary gauge."""
    grid = J.grid
    values = J.values
    Jinv = np.linalg.inv(values)
    dJ = [grid.derivative(values, mu) for mu in range(4)]
    zero = np.zeros_like(values)
    holomorphic = np.stack([Jinv @ dJ[0], zero, Jinv @ dJ[2], zero])
    if gauge == 'holomorphic':
        return LatticeGaugeField(grid, holomorphic)
    if gauge != 'unitary':
        raise WardError('Unknown gauge %s' % repr(gauge))
    g = unitary_gauge(values)
    ginv = np.linalg.inv(g)
    dg = np.stack([grid.derivative(g, mu) for mu in range(4)])
    components = ginv[None] @ holomorphic @ g[None] + ginv[None] @ dg
    return LatticeGaugeField(grid, components, unitary=True)


def _yang_terms(grid, J, dJ, lap1, lap2):
    Jinv = np.linalg.inv(J)
    terms = []
    for dhol, dbar, lap, rho in ((dJ[0], dJ[1], lap1, grid.rho1),
                                 (dJ[2], dJ[3], lap2, grid.rho2)):
        inner = -Jinv @ dbar @ Jinv @ dhol + Jinv @ (0.25 * lap)
        terms.append((rho ** 2 / 4.0)[..., None, None] * inner)
    return terms


def yang_residual(J, step=None, order=2, relative=False):
    """L2 norm of mu1 dbar1(J^-1 d1 J) - mu2 dbar2(J^-1 d2 J).

    Lattice differences by default; with ``step`` the generating callable
    of ``J`` is differenced instead.
    """
    grid = J.grid
    if step is None:
        values = J.values
        dJ = [grid.derivative(values, mu) for mu in range(4)]
        lap1 = 4.0 * grid.derivative(dJ[0], 1)
        lap2 = 4.0 * grid.derivative(dJ[2], 3)
    else:
        if J.func is None:
            raise WardError('Generator differences need a J callable')
        values, dJ = sample_derivatives(J.func, grid, step, order)
        lap1, lap2 = sample_laplacians(J.func, grid, step, order)
        values = np.asarray(grid.full(values))
    first, second = _yang_terms(grid, values, dJ, lap1, lap2)
    residual = grid.matrix_norm(first - second)
    if relative:
        scale = grid.matrix_norm(first) + grid.matrix_norm(second)
        return relative_residual(residual, scale, grid)
    return residual


def abelian_k_curvature(grid, k=-1, normalization='integral'):
    """Closed-form rank-1 ASD curvature c (dw1^dw1bar / rho1^2 +
    dw2^dw2bar / rho2^2) with c = k, or c = 2/pi for 'displayed'."""
    if normalization == 'integral':
        coefficient = float(k)
    elif normalization == 'displayed':
        coefficient = 2.0 / np.pi
    else:
        raise WardError('Unknown normalization %s' % repr(normalization))
    F = np.zeros((6,) + grid.shape + (1, 1), dtype=complex)
    F[0] = grid.full(coefficient / grid.rho1 ** 2)[..., None, None]
    F[5] = grid.full(coefficient / grid.rho2 ** 2)[..., None, None]
    return CurvatureField(grid, F)


def abelian_connection(grid, k=-1):
    """Unitary rank-1 potential whose curvature is abelian_k_curvature."""
    A = np.zeros((4,) + grid.shape + (1, 1), dtype=complex)
    for index, (w, rho) in enumerate(((grid.w1, grid.rho1),
                                      (grid.w2, grid.rho2))):
        A[2 * index] = grid.full(-0.5 * k * np.conj(w) / rho)[..., None, None]
        A[2 * index + 1] = grid.full(0.5 * k * w / rho)[..., None, None]
    return LatticeGaugeField(grid, A, unitary=True)


@dataclass
class WardAnsatz:
    J: JMatrixField
    phi: np.ndarray
    gprime: np.ndarray
    alpha: tuple
    beta: tuple
    convention: str


def default_alpha(phi):
    return (1.0 + np.exp(-4.0 * phi)) ** -0.5, np.zeros_like(phi)


def ward_ansatz_components(phi, alpha_selector=None):
    """alpha and beta spinor components for a split-normalised phi.

    Raises ConstraintViolation if the selected alpha misses the unit
    determinant constraint.
    """
    selector = alpha_selector or default_alpha
    alpha0, alpha1 = [np.asarray(a, dtype=complex) for a in selector(phi)]
    det = ((1.0 + np.exp(-4.0 * phi)) * np.abs(alpha0) ** 2
           + (1.0 + np.exp(4.0 * phi)) * np.abs(alpha1) ** 2)
    defect = float(np.max(np.abs(det - 1.0)))
    if defect > CONSTRAINT_TOLERANCE:
        raise ConstraintViolation(
            'alpha violates the unit determinant constraint by %.3g' % defect)
    beta0 = np.exp(-2.0 * phi) * alpha0
    beta1 = np.conj(-np.exp(2.0 * phi) * np.conj(alpha1))
    return (alpha0, alpha1), (beta0, beta1)


def ansatz_matrix(xray_value, gprime, weight, convention='split'):
    """The 2x2 ansatz J from the X-ray transform, g'0 and the frame weight
    ``weight`` (rho1 rho2 in the holomorphic frame, 1 in the unitary one)."""
    if convention == 'split':
        c = np.cosh(xray_value)
    elif convention == 'doubled':
        c = np.cosh(2.0 * xray_value)
    else:
        raise WardError('Unknown convention %s' % repr(convention))
    g2 = np.abs(gprime) ** 2
    J = np.empty(np.broadcast(c, gprime, weight).shape + (2, 2),
                 dtype=complex)
    J[..., 0, 0] = 2.0 * (c ** 2 + g2) / (c * weight)
    J[..., 0, 1] = -np.conj(gprime) / c
    J[..., 1, 0] = -gprime / c
    J[..., 1, 1] = weight / (2.0 * c)
    return J


def ward_ansatz_J(f, grid, alpha_selector=None, convention='split',
                  frame='holomorphic', M=DEFAULT_QUADRATURE, threads=None):
    """Rank-2 J of the Ward ansatz from a degree-0 function f.

    phi = xray(f) / 2 and g'0 = gprime0(f) in the chart frame of each block.
    """
    def weight(c1, w1, c2, w2):
        if frame == 'unitary':
            return np.ones(np.broadcast(w1, w2).shape)
        return (1.0 + np.abs(w1) ** 2) * (1.0 + np.abs(w2) ** 2)

    def func(c1, w1, c2, w2):
        value, g = _loop_modes(f, spinor_from_chart(c1, w1),
                               spinor_from_chart(c2, w2), M, 1, threads)
        return ansatz_matrix(value, g, weight(c1, w1, c2, w2), convention)

    value, g = _loop_modes(f, grid.x(), grid.y(), M, 1, threads)
    J = ansatz_matrix(value, g, weight(grid.c1, grid.w1, grid.c2, grid.w2),
                      convention)
    phi = 0.5 * value if convention == 'split' else value
    alpha, beta = ward_ansatz_components(phi, alpha_selector)
    LOG.debug("Ward ansatz %s convention, det J range %s", convention,
              repr((np.min(np.abs(np.linalg.det(J))),
                    np.max(np.abs(np.linalg.det(J))))))
    return WardAnsatz(JMatrixField(grid, J, func=func), phi, g, alpha, beta,
                      convention)


def _complex_hessian(func, c1, w1, c2, w2, step):
    """Matrix of d_m d_n func in (w1, w1bar, w2, w2bar), central
    differences of ``step`` in the real coordinates."""
    def shifted(delta):
        return func(c1, w1 + delta[0] + 1j * delta[1], c2,
                    w2 + delta[2] + 1j * delta[3])

    eye = np.eye(4) * step
    centre = shifted(np.zeros(4))
    real = np.empty(np.shape(centre) + (4, 4))
    for i in range(4):
        real[..., i, i] = (shifted(eye[i]) - 2.0 * centre
                           + shifted(-eye[i])) / step ** 2
        for j in range(i + 1, 4):
            real[..., i, j] = real[..., j, i] = (
                shifted(eye[i] + eye[j]) - shifted(eye[i] - eye[j])
                - shifted(eye[j] - eye[i]) + shifted(-eye[i] - eye[j])
            ) / (4.0 * step ** 2)
    T = np.array([[0.5, -0.5j, 0, 0], [0.5, 0.5j, 0, 0],
                  [0, 0, 0.5, -0.5j], [0, 0, 0.5, 0.5j]])
    return np.einsum('mi,...ij,nj->...mn', T, real, T)


def maxwell_from_scalar_J(f, c1, w1, c2, w2, step=1e-2,
                          M=DEFAULT_QUADRATURE):
    """Curvature 2-form of the rank-1 Ward connection J = exp(xray f) at a
    point: the holomorphic-gauge A = d log J differentiated once more."""
    hess = _complex_hessian(xray_field(f, M), c1, w1, c2, w2, step)
    D = np.zeros(hess.shape, dtype=complex)
    D[..., :, 0] = hess[..., :, 0]
    D[..., :, 2] = hess[..., :, 2]
    return D - np.swapaxes(D, -1, -2)


def compare_forms(reference, candidate, ratio=INTEGRAL_FORMULA_RATIO):
    """Relative residual of reference - ratio * candidate.

    The default ratio is the fixed one between transforms.maxwell_form and
    the rank-1 Ward curvature of maxwell_from_scalar_J.
    """
    reference = np.asarray(reference).ravel()
    candidate = np.asarray(candidate).ravel()
    return float(np.linalg.norm(reference - ratio * candidate)
                 / np.linalg.norm(reference))


# spin-1 spinors spanning the quartic data, and the symmetric embedding of
# C3 into C2 x C2
LEVI = np.array([[[-0.5, 0.0], [0.0, 0.5]],
                 [[0.5j, 0.0], [0.0, 0.5j]],
                 [[0.0, 0.5], [0.5, 0.0]]])
SYMMETRIC = np.array([[1.0, 0.0, 0.0],
                      [0.0, 1.0 / np.sqrt(2.0), 0.0],
                      [0.0, 1.0 / np.sqrt(2.0), 0.0],
                      [0.0, 0.0, 1.0]])


def _symmetrize(tensor):
    perms = [(0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 1, 3), (0, 2, 3, 1),
             (0, 3, 1, 2), (0, 3, 2, 1), (1, 0, 2, 3), (1, 0, 3, 2),
             (1, 2, 0, 3), (1, 2, 3, 0), (1, 3, 0, 2), (1, 3, 2, 0),
             (2, 0, 1, 3), (2, 0, 3, 1), (2, 1, 0, 3), (2, 1, 3, 0),
             (2, 3, 0, 1), (2, 3, 1, 0), (3, 0, 1, 2), (3, 0, 2, 1),
             (3, 1, 0, 2), (3, 1, 2, 0), (3, 2, 0, 1), (3, 2, 1, 0)]
    return sum(np.transpose(tensor, p) for p in perms) / len(perms)


def _hat4(h):
    C = CONJUGATION
    return np.einsum('ai,bj,ck,dl,ijkl->abcd', C, C, C, C, np.conj(h))


def _quartic(M):
    return sum(M[i, j] * _symmetrize(np.einsum('ab,cd->abcd', LEVI[i],
                                               LEVI[j]))
               for i in range(3) for j in range(3))


def _quartic_pairing(M):
    """N = h with two indices lowered, and its hermitian 3x3 block on the
    symmetric spinors."""
    N = np.einsum('abxy,xc,yd->abcd', _quartic(M), CONJUGATION,
                  CONJUGATION).reshape(4, 4)
    block = SYMMETRIC.T @ np.conj(N) @ SYMMETRIC
    return N, 0.5 * (block + dagger(block))


class ADHMData(object):
    """Charge-two ADHM data, a real symmetric traceless 3x3 matrix M.

    The quartic spinor is h = sum M_ij Sym(l_i l_j); the associated
    S = 1 - 3 M^2 / tr M^2 satisfies tr S = 0 and tr S^2 = 3/2.  M and -M
    describe the same bundle; the sign kept is the one whose pairing has
    two positive directions on Sym^2 C^2, which makes it positive on the
    bundle.
    """

    def __init__(self, M):
        M = np.asarray(M, dtype=float)
        if np.max(np.abs(M - M.T)) > SYMMETRY_TOLERANCE:
            raise WardError('ADHM matrix must be symmetric')
        M = 0.5 * (M + M.T)
        N, block = _quartic_pairing(M)
        if np.count_nonzero(np.linalg.eigvalsh(block) > 0) < 2:
            M = -M
            N, block = -N, -block
        self.M = M
        self.h = _quartic(M)
        self.N = N
        self.pairing = np.kron(block, np.eye(2))
        self.frame_operator = np.linalg.pinv(SYMMETRIC.T @ N.T @ SYMMETRIC)

    def __repr__(self):
        return 'ADHMData(eigenvalues=%s)' % repr(np.linalg.eigvalsh(self.M))

    @classmethod
    def from_S(cls, S):
        """Data for a symmetric traceless S, rescaled to tr S^2 = 3/2."""
        S = np.asarray(S, dtype=float)
        S = S - np.trace(S) / 3.0 * np.eye(3)
        S = S * np.sqrt(1.5 / np.trace(S @ S))
        values, Q = np.linalg.eigh(S)
        radii = np.sqrt(np.clip(1.0 - values, 0.0, None))
        largest = int(np.argmax(radii))
        signs = np.ones(3)
        signs[largest] = -1.0
        m = signs * radii
        return cls(Q @ np.diag(m) @ Q.T)

    @classmethod
    def random(cls, seed=0):
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(0.5, 1.5, 2)
        Q = special_ortho_group.rvs(3, random_state=rng)
        return cls(Q @ np.diag([a, b, -(a + b)]) @ Q.T)

    @property
    def S(self):
        M2 = self.M @ self.M
        return np.eye(3) - 3.0 * M2 / np.trace(M2)

    def certificate(self):
        """True when every eigenvalue of S has modulus below one."""
        return bool(np.all(np.abs(np.linalg.eigvalsh(self.S)) < 1.0 - 1e-9))

    def symmetry_defect(self):
        return float(np.max(np.abs(self.h - _symmetrize(self.h))))

    def reality_defect(self):
        return float(np.max(np.abs(_hat4(self.h) - self.h)))

    def jumping_points(self):
        """Unit 3-vectors +-k of the kernel of M (empty when nonsingular)."""
        values, vectors = np.linalg.eigh(self.M)
        scale = np.max(np.abs(values))
        kernel = vectors[:, np.abs(values) < 1e-9 * scale]
        return [s * kernel[:, i] for i in range(kernel.shape[1])
                for s in (1.0, -1.0)]


def adhm_map(Z):
    """K . Z as a map C2 -> W, shape (..., 6, 2)."""
    Z = np.asarray(Z, dtype=complex)
    eye = np.eye(2)
    T = 0.5 * (np.einsum('kp,...qd->...kpqd', eye, Z)
               + np.einsum('kq,...pd->...kpqd', eye, Z))
    T = T.reshape(T.shape[:-4] + (2, 4, 2))
    W = np.einsum('ps,...kpd->...sdk', SYMMETRIC, T)
    return W.reshape(W.shape[:-3] + (6, 2))


def adhm_identity_defect(data, Z):
    """Largest entry of (K . Zhat)^H G (K . Z) over a batch of twistors."""
    Z = np.asarray(Z, dtype=complex)
    Zhat = CONJUGATION @ np.conj(Z) @ CONJUGATION.T
    value = dagger(adhm_map(Zhat)) @ data.pairing @ adhm_map(Z)
    return float(np.max(np.abs(value)))


def _adhm_maps(x, y):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=complex),
                               np.asarray(y, dtype=complex))
    first = x[..., :, None] * y[..., None, :]
    second = hat_array(x)[..., :, None] * hat_array(y)[..., None, :]
    return adhm_map(first), adhm_map(second)


def delta_matrix(data, x, y=None):
    if y is None:
        y = np.broadcast_to(np.array([1.0, 0.0], dtype=complex),
                            np.shape(x))
    A1, _ = _adhm_maps(x, y)
    return dagger(A1) @ data.pairing @ A1


def delta_determinant(data, x, y=None):
    return np.linalg.det(delta_matrix(data, x, y))


def adhm_projector(data, x, y):
    """P = I - A1 D^-1 A1^H G + A2 D^-1 A2^H G on W, shape (..., 6, 6)."""
    A1, A2 = _adhm_maps(x, y)
    G = data.pairing
    Dinv = np.linalg.inv(dagger(A1) @ G @ A1)
    return (np.eye(6) - A1 @ Dinv @ dagger(A1) @ G
            + A2 @ Dinv @ dagger(A2) @ G)


def adhm_frame(data, x, y):
    """Pairing-orthonormal frame (..., 6, 2) of the image of P."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=complex),
                               np.asarray(y, dtype=complex))
    xh = hat_array(x)
    yh = hat_array(y)
    proj = data.frame_operator @ SYMMETRIC.T
    t1 = np.einsum('sp,...p->...s', proj,
                   (xh[..., :, None] * xh[..., None, :]).reshape(
                       xh.shape[:-1] + (4,)))
    t2 = np.einsum('sp,...p->...s', proj,
                   (x[..., :, None] * x[..., None, :]).reshape(
                       x.shape[:-1] + (4,)))
    u1 = (t1[..., :, None] * y[..., None, :]).reshape(x.shape[:-1] + (6,))
    u2 = (t2[..., :, None] * yh[..., None, :]).reshape(x.shape[:-1] + (6,))
    raw = adhm_projector(data, x, y) @ np.stack([u1, u2], axis=-1)
    gram = dagger(raw) @ data.pairing @ raw
    gram = 0.5 * (gram + dagger(gram))
    lowest = float(np.min(np.linalg.eigvalsh(gram)))
    if lowest <= 0:
        raise WardError('ADHM pairing is not positive on the bundle (%.3g)'
                        % lowest)
    return raw @ _hermitian_power(gram, -0.5)


def _sphere_to_chart(k):
    if k[2] > -0.5:
        return 0, complex(k[0], k[1]) / (1.0 + k[2])
    return 1, complex(k[0], -k[1]) / (1.0 - k[2])


def check_nondegenerate(data, grid):
    """Raise DegenerateDelta if Delta is singular on the grid or the
    certificate fails.  Delta depends on the first sphere only."""
    x = grid.sphere.spinors()
    det = np.abs(delta_determinant(data, x))
    relative = det / max(float(det.max()), 1e-300)
    if relative.min() < DELTA_TOLERANCE:
        node = np.unravel_index(int(np.argmin(relative)), det.shape)
        raise DegenerateDelta(
            'Delta is singular at first-sphere node %s (w = %s)'
            % (repr(tuple(int(i) for i in node)), repr(grid.sphere.w[node])),
            [node])
    if not data.certificate():
        points = [_sphere_to_chart(k) for k in data.jumping_points()]
        raise CertificateFailure(
            'S eigenvalues %s violate the certificate; Delta jumps at %s'
            % (repr(np.linalg.eigvalsh(data.S)), repr(points)), points)


def _assemble_rows(compute, grid, lead, threads=None):
    """Fill a (lead, *grid.shape, 2, 2) array one first-factor row at a
    time; ``compute(view)`` sees a grid restricted to that row."""
    n = grid.n
    out = np.empty((lead,) + grid.shape + (2, 2), dtype=complex)

    def run(chunk):
        for row in range(chunk.start, chunk.stop):
            c, i = divmod(row, n)
            view = SimpleNamespace(c1=grid.c1[c:c + 1, i:i + 1],
                                   w1=grid.w1[c:c + 1, i:i + 1],
                                   c2=grid.c2, w2=grid.w2,
                                   shape=(1, 1, n) + grid.sphere.shape)
            value = compute(view)
            out[:, c, i] = np.broadcast_to(
                value, (lead,) + view.shape + (2, 2))[:, 0, 0]

    map_chunks(run, 2 * n, threads, chunk=1)
    return out


def adhm_connection(data, grid, step=GENERATOR_STEP, threads=None):
    """Unitary charge-two connection A = U^H G dU on the grid."""
    check_nondegenerate(data, grid)

    def frame(c1, w1, c2, w2):
        return adhm_frame(data, spinor_from_chart(c1, w1),
                          spinor_from_chart(c2, w2))

    def compute(view):
        U, dU = sample_derivatives(frame, view, step, order=2)
        return (dagger(U) @ data.pairing)[None] @ dU

    components = _assemble_rows(compute, grid, 4, threads)
    LOG.info("ADHM connection assembled on %d nodes", grid.node_count)
    return LatticeGaugeField(grid, components, unitary=True)


def _connection_callable(data, step):
    def connection(c1, w1, c2, w2):
        def frame(u1, u2):
            return adhm_frame(data, spinor_from_chart(c1, u1),
                              spinor_from_chart(c2, u2))

        UH = dagger(frame(w1, w2)) @ data.pairing
        parts = []
        for factor in (0, 1):
            partial = []
            for direction in (1.0, 1j):
                shift = step * direction
                if factor == 0:
                    diff = frame(w1 + shift, w2) - frame(w1 - shift, w2)
                else:
                    diff = frame(w1, w2 + shift) - frame(w1, w2 - shift)
                partial.append(diff / (2.0 * step))
            parts.append(0.5 * (partial[0] - 1j * partial[1]))
            parts.append(0.5 * (partial[0] + 1j * partial[1]))
        return np.stack([UH @ p for p in parts], axis=-3)
    return connection


def adhm_curvature(data, grid, step=None, threads=None):
    """Curvature of the ADHM connection.

    Without ``step`` this is the projector formula F = U^H G [dP, dP] U;
    with ``step`` the connection is differenced with that step instead.
    """
    check_nondegenerate(data, grid)

    def projector(c1, w1, c2, w2):
        return adhm_projector(data, spinor_from_chart(c1, w1),
                              spinor_from_chart(c2, w2))

    def exact(view):
        _, dP = sample_derivatives(projector, view, GENERATOR_STEP, order=2)
        U = adhm_frame(data, spinor_from_chart(view.c1, view.w1),
                       spinor_from_chart(view.c2, view.w2))
        UH = dagger(U) @ data.pairing
        return np.stack([UH @ (dP[mu] @ dP[nu] - dP[nu] @ dP[mu]) @ U
                         for mu, nu in PAIRS])

    def differenced(view):
        A, dA = sample_derivatives(_connection_callable(data, GENERATOR_STEP),
                                   view, step, order=2)
        return np.stack([dA[mu][..., nu, :, :] - dA[nu][..., mu, :, :]
                         + A[..., mu, :, :] @ A[..., nu, :, :]
                         - A[..., nu, :, :] @ A[..., mu, :, :]
                         for mu, nu in PAIRS])

    compute = exact if step is None else differenced
    return CurvatureField(grid, _assemble_rows(compute, grid, 6, threads))
