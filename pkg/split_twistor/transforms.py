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

"""Scalar transforms from real twistor space to S2 x S2.

The X-ray transform averages a degree-0 function over the real circle
``theta -> x y^T + exp(i theta) xhat yhat^T`` of a point, the potential
g'0 is the first Fourier mode of the same loop, and ``maxwell_asd`` is the
contour integral formula for the anti-self-dual Maxwell field in the affine
chart M+.
"""

import itertools
import logging

import numpy as np

from split_twistor.errors import SplitTwistorError
from split_twistor.fields import sample_derivatives, sample_laplacians
from split_twistor.geometry import (
    SpacetimePoint, affine_coords, boundary_loop, cartesian,
    incidence_matrix, spinor_from_chart, twistor_from_affine)
from split_twistor.parallel import map_chunks

class TransformError(SplitTwistorError):
    pass

class ChartBoundary(TransformError):
    pass

class HomogeneityError(TransformError):
    pass

LOG = logging.getLogger(__name__)

DEFAULT_QUADRATURE = 64
MAXWELL_STEP = 1e-4
MAXWELL_QUADRATURE = 64
CHART_MARGIN = 1e-3
HOMOGENEITY_TOLERANCE = 1e-10
WAVE_STEP = 2e-3


class TwistorScalarFunction(object):
    """A real function on real twistor space, homogeneous of ``degree``.

    ``func`` maps arrays of 2x2 twistors (..., 2, 2) to real arrays (...).
    ``omega_hessian``, when given, maps (omega, pi) to the 2x2 matrix of
    second omega-derivatives and replaces finite differences in
    maxwell_asd.
    """

    def __init__(self, func, degree=0, omega_hessian=None, name=None):
        self.func = func
        self.degree = degree
        self.omega_hessian = omega_hessian
        self.name = name or getattr(func, '__name__', 'f')

    def __repr__(self):
        return 'TwistorScalarFunction(%s, degree=%d)' % (self.name,
                                                          self.degree)

    def __call__(self, Z):
        return np.real(self.func(np.asarray(Z, dtype=complex)))

    def __add__(self, other):
        return TwistorScalarFunction(lambda Z: self(Z) + other(Z), self.degree,
                                     name='%s+%s' % (self.name, other.name))

    def scaled(self, factor):
        return TwistorScalarFunction(lambda Z: factor * self(Z), self.degree,
                                     name='%g*%s' % (factor, self.name))

    @classmethod
    def constant(cls, value):
        return cls(lambda Z: np.full(np.shape(Z)[:-2], float(value)),
                   name='constant')

    def check_homogeneity(self, seed=0, samples=16,
                          tolerance=HOMOGENEITY_TOLERANCE):
        rng = np.random.default_rng(seed)
        Z = random_real_twistors(rng, samples)
        scale = rng.uniform(0.5, 2.0, samples)
        lhs = self(scale[:, None, None] * Z)
        rhs = scale ** self.degree * self(Z)
        defect = float(np.max(np.abs(lhs - rhs)))
        if defect > tolerance * max(1.0, float(np.max(np.abs(rhs)))):
            raise HomogeneityError(
                '%s fails the degree %d scale test by %.3g'
                % (self.name, self.degree, defect))
        return defect


def random_real_twistors(rng, count):
    w = rng.normal(size=(2, count)) + 1j * rng.normal(size=(2, count))
    x = spinor_from_chart(0, w[0])
    y = spinor_from_chart(0, w[1])
    phase = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, count))
    return incidence_matrix(x, y, np.ones(count), phase)


def unit_quaternion(Z):
    """Unit 4-vector (Re a, Im a, Re b, Im b) of a real twistor.

    Z is rescaled into SU(2) = [[a, b], [-conj b, conj a]]; the result is
    defined up to an overall sign.
    """
    Z = np.asarray(Z, dtype=complex)
    s = 0.5 * np.sum(np.abs(Z) ** 2, axis=(-2, -1))
    U = Z / np.sqrt(s)[..., None, None]
    U = U / np.sqrt(np.linalg.det(U))[..., None, None]
    return np.stack([U[..., 0, 0].real, U[..., 0, 0].imag,
                     U[..., 0, 1].real, U[..., 0, 1].imag], axis=-1)


def harmonic_function(degree=8, seed=0):
    """Random band-limited function on RP3: an even polynomial in the unit
    quaternion of a real twistor, with seeded normal coefficients."""
    if degree % 2:
        raise TransformError('Projective harmonics need an even degree')
    rng = np.random.default_rng(seed)
    exponents = np.array([e for e in itertools.product(range(degree + 1),
                                                       repeat=4)
                          if sum(e) == degree])
    coefficients = rng.normal(size=len(exponents)) / np.sqrt(len(exponents))

    def func(Z):
        q = unit_quaternion(Z)
        powers = q[..., :, None] ** np.arange(degree + 1)
        monomials = powers[..., 0, exponents[:, 0]]
        for i in range(1, 4):
            monomials = monomials * powers[..., i, exponents[:, i]]
        return monomials @ coefficients

    return TwistorScalarFunction(func, name='harmonic%d/%d' % (degree, seed))


def loop_values(f, x, y, M=DEFAULT_QUADRATURE, orientation=1):
    """f on the boundary circles of the points (x, y): shape (..., M).

    ``orientation=-1`` samples the circle backwards, theta -> -theta,
    rephased by exp(i theta); sample j is then sample j of the forward
    circle of the antipode.
    """
    if orientation not in (1, -1):
        raise TransformError('Orientation must be 1 or -1, got %s'
                             % repr(orientation))
    x, y = np.broadcast_arrays(np.asarray(x, dtype=complex),
                               np.asarray(y, dtype=complex))
    Z = boundary_loop(x, y, M, orientation)
    if orientation < 0:
        theta = 2.0 * np.pi * np.arange(M) / M
        Z = Z * np.exp(1j * theta)[:, None, None]
    return f(Z)


def _loop_modes(f, x, y, M, orientation, threads):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=complex),
                               np.asarray(y, dtype=complex))
    shape = x.shape[:-1]
    flat_x = x.reshape(-1, 2)
    flat_y = y.reshape(-1, 2)
    modes = np.empty((flat_x.shape[0], 2), dtype=complex)
    first = np.exp(-2j * np.pi * np.arange(M) / M)

    def run(chunk):
        values = loop_values(f, flat_x[chunk], flat_y[chunk], M, orientation)
        modes[chunk, 0] = np.mean(values, axis=-1)
        modes[chunk, 1] = values @ first / M

    map_chunks(run, flat_x.shape[0], threads, chunk=512)
    return modes[:, 0].real.reshape(shape), modes[:, 1].reshape(shape)


def _point_spinors(p):
    return p.x.as_array(), p.y.as_array()


def xray(f, p, M=DEFAULT_QUADRATURE, orientation=1, threads=None):
    """X-ray transform of a degree-0 function at a point or on a grid.

    ``p`` is a SpacetimePoint (float result) or a ProductGrid (array over
    the grid).  The transform is the oriented integral (1/2 pi) int f dtheta
    along the line.  ``orientation=-1`` traverses the line backwards
    through the antipode's parametrization, so the measure runs negative
    and xray(f, p, orientation=-1) = -xray(f, antipode(p)).
    """
    _require_degree_zero(f)
    if isinstance(p, SpacetimePoint):
        phi, _ = _loop_modes(f, *_point_spinors(p), M, orientation, threads)
        return orientation * float(phi)
    phi, _ = _loop_modes(f, p.x(), p.y(), M, orientation, threads)
    return orientation * phi


def gprime0(f, p, M=DEFAULT_QUADRATURE, threads=None):
    """First positive Fourier mode of f around the boundary circle."""
    _require_degree_zero(f)
    if isinstance(p, SpacetimePoint):
        _, g = _loop_modes(f, *_point_spinors(p), M, 1, threads)
        return complex(g)
    _, g = _loop_modes(f, p.x(), p.y(), M, 1, threads)
    return g


def _require_degree_zero(f):
    if getattr(f, 'degree', 0) != 0:
        raise HomogeneityError('Transform needs a degree 0 function, got %s'
                               % repr(f))


def xray_field(f, M=DEFAULT_QUADRATURE):
    """``phi(c1, w1, c2, w2)`` as a callable, for generator differences."""
    def phi(c1, w1, c2, w2):
        value, _ = _loop_modes(f, spinor_from_chart(c1, w1),
                               spinor_from_chart(c2, w2), M, 1, 1)
        return value
    return phi


def gprime0_field(f, M=DEFAULT_QUADRATURE):
    def g(c1, w1, c2, w2):
        _, value = _loop_modes(f, spinor_from_chart(c1, w1),
                               spinor_from_chart(c2, w2), M, 1, 1)
        return value
    return g


def _second_difference(values, axis, step):
    out = np.gradient(np.gradient(values, step, axis=axis, edge_order=2),
                      step, axis=axis, edge_order=2)
    moved = np.moveaxis(values, axis, 0)
    target = np.moveaxis(out, axis, 0)
    target[1:-1] = (moved[2:] - 2.0 * moved[1:-1] + moved[:-2]) / step ** 2
    return out


def laplacians(phi, grid, step=WAVE_STEP, order=4):
    """Round-sphere Laplacians of phi in each factor.

    ``phi`` is either an array on the grid (lattice second differences) or a
    callable ``phi(c1, w1, c2, w2)`` (generator differences of ``step``).
    """
    if callable(phi):
        flat1, flat2 = sample_laplacians(phi, grid, step, order)
    else:
        values = np.asarray(grid.full(phi))
        flat1 = (_second_difference(values, 1, grid.step)
                 + _second_difference(values, 2, grid.step))
        flat2 = (_second_difference(values, 4, grid.step)
                 + _second_difference(values, 5, grid.step))
    return grid.rho1 ** 2 / 4.0 * flat1, grid.rho2 ** 2 / 4.0 * flat2


def wave_residual(phi, grid, step=WAVE_STEP, order=4):
    """L2 norm of (Delta_x - Delta_y) phi over the grid."""
    first, second = laplacians(phi, grid, step, order)
    return grid.norm(np.abs(first - second) ** 2)


def scalar_norm(phi, grid):
    if callable(phi):
        phi = phi(grid.c1, grid.w1, grid.c2, grid.w2)
    return grid.norm(np.abs(grid.full(phi)) ** 2)


def lax_residual(f, grid, step=1e-3, M=DEFAULT_QUADRATURE):
    """Defects of the Lax relations linking phi and g'0.

    In chart frames the weighted derivatives read
    ``dbar_x g = s1 (rho1 d/dw1bar g - w1 g)`` and ``d_y phi = s2 rho2 d/dw2
    phi`` (s = +1 in chart 0, -1 in chart 1); the relations are
    dbar_x g'0 + d_y phi = 0 and the same with the factors exchanged.
    Returns the two L2 norms relative to the norm of phi.
    """
    phi_value, dphi = sample_derivatives(xray_field(f, M), grid, step)
    g_value, dg = sample_derivatives(gprime0_field(f, M), grid, step)
    sign1 = np.where(grid.c1 == 0, 1.0, -1.0)
    sign2 = np.where(grid.c2 == 0, 1.0, -1.0)
    first = (sign1 * (grid.rho1 * dg[1] - grid.w1 * g_value)
             + sign2 * grid.rho2 * dphi[2])
    second = (sign2 * (grid.rho2 * dg[3] - grid.w2 * g_value)
              + sign1 * grid.rho1 * dphi[0])
    scale = max(scalar_norm(phi_value, grid), 1e-300)
    return (grid.norm(np.abs(grid.full(first)) ** 2) / scale,
            grid.norm(np.abs(grid.full(second)) ** 2) / scale)


def _check_chart(x, y, margin):
    gap = cartesian(y)[..., 2] - cartesian(x)[..., 2]
    if np.any(gap < margin):
        raise ChartBoundary(
            'Point lies within %g of the boundary of the affine chart M+'
            % margin)


def _omega_hessian(f, omega, pi, step):
    """Second omega-derivatives of f at (omega, pi) by central differences."""
    if getattr(f, 'omega_hessian', None) is not None:
        return f.omega_hessian(omega, pi)

    def value(shift):
        return f(twistor_from_affine(omega + shift, pi))

    eye = np.eye(2) * step
    centre = value(0.0)
    hess = np.empty(omega.shape[:-1] + (2, 2))
    for a in range(2):
        hess[..., a, a] = (value(eye[a]) - 2.0 * centre
                           + value(-eye[a])) / step ** 2
    mixed = (value(eye[0] + eye[1]) - value(eye[0] - eye[1])
             - value(-eye[0] + eye[1]) + value(-eye[0] - eye[1]))
    hess[..., 0, 1] = hess[..., 1, 0] = mixed / (4.0 * step ** 2)
    return hess


def maxwell_asd(f, p, quadrature=MAXWELL_QUADRATURE, step=MAXWELL_STEP,
                margin=CHART_MARGIN):
    """ASD Maxwell spinor phi_AB at ``p`` by the contour integral formula.

    phi_AB = (1/2pi) int_0^2pi d_A d_B f(X pi(t), pi(t)) dt with
    pi(t) = (cos t, sin t) and X the affine coordinates of ``p``.  Returns
    the independent components (phi_00, phi_01, phi_11).
    """
    if isinstance(p, SpacetimePoint):
        x, y = _point_spinors(p)
    else:
        x, y = p
    _check_chart(x, y, margin)
    X = affine_coords(x, y)
    t = 2.0 * np.pi * np.arange(quadrature) / quadrature
    pi = np.stack([np.cos(t), np.sin(t)], axis=-1)
    omega = np.einsum('...ab,tb->...ta', X, pi)
    hess = _omega_hessian(f, omega, np.broadcast_to(pi, omega.shape), step)
    phi = np.mean(hess, axis=-3)
    return np.stack([phi[..., 0, 0], phi[..., 0, 1], phi[..., 1, 1]], axis=-1)


def assemble_maxwell(phi, jacobian):
    """Pull F_{AA'BB'} = phi_AB eps_A'B' back to a (4, 4) form array.

    ``jacobian[m, A, A']`` holds d x^{AA'} / d w^m in (w1, w1bar, w2, w2bar)
    order.
    """
    phi = np.asarray(phi)
    sym = np.array([[phi[..., 0], phi[..., 1]], [phi[..., 1], phi[..., 2]]])
    sym = np.moveaxis(sym, (0, 1), (-2, -1))
    eps = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.einsum('...ab,cd,...mac,...nbd->...mn', sym, eps,
                     jacobian, jacobian)


def affine_jacobian(c1, w1, c2, w2, step=1e-5):
    """d x^{AA'} / d w^m of the affine coordinates, by central differences."""
    def coords(u1, u2):
        return affine_coords(spinor_from_chart(c1, u1),
                             spinor_from_chart(c2, u2))

    rows = []
    for factor in (0, 1):
        partial = []
        for direction in (1.0, 1j):
            shift = step * direction
            if factor == 0:
                diff = coords(w1 + shift, w2) - coords(w1 - shift, w2)
            else:
                diff = coords(w1, w2 + shift) - coords(w1, w2 - shift)
            partial.append(diff / (2.0 * step))
        da, db = partial
        rows.append(0.5 * (da - 1j * db))
        rows.append(0.5 * (da + 1j * db))
    return np.stack(rows, axis=-3)


def maxwell_form(f, c1, w1, c2, w2, jacobian_step=1e-5, **kwargs):
    """The assembled Maxwell 2-form in w-coordinates at one chart point."""
    x = spinor_from_chart(c1, w1)
    y = spinor_from_chart(c2, w2)
    phi = maxwell_asd(f, (x, y), **kwargs)
    return assemble_maxwell(phi, affine_jacobian(c1, w1, c2, w2,
                                                 jacobian_step))


def closedness_residual(f, c1, w1, c2, w2, step=1e-2, **kwargs):
    """Largest component of dF at a point relative to |F|, with F
    differentiated by central differences of ``step``."""
    def d(index):
        factor, direction = divmod(index, 2)
        parts = []
        for unit in (1.0, 1j):
            shift = step * unit
            if factor == 0:
                plus = maxwell_form(f, c1, w1 + shift, c2, w2, **kwargs)
                minus = maxwell_form(f, c1, w1 - shift, c2, w2, **kwargs)
            else:
                plus = maxwell_form(f, c1, w1, c2, w2 + shift, **kwargs)
                minus = maxwell_form(f, c1, w1, c2, w2 - shift, **kwargs)
            parts.append((plus - minus) / (2.0 * step))
        sign = -1.0 if direction == 0 else 1.0
        return 0.5 * (parts[0] + sign * 1j * parts[1])

    derivs = [d(index) for index in range(4)]
    centre = maxwell_form(f, c1, w1, c2, w2, **kwargs)
    worst = 0.0
    for lam, mu, nu in itertools.combinations(range(4), 3):
        value = (derivs[lam][mu, nu] + derivs[mu][nu, lam]
                 + derivs[nu][lam, mu])
        worst = max(worst, abs(value))
    return worst / max(float(np.max(np.abs(centre))), 1e-300)
