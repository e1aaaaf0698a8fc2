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

"""Lattice gauge fields on S2 x S2.

Each sphere factor is covered by two stereographic charts sampled on the
same n x n square ``[-L, L]^2``; a smooth partition of unity blends the two
charts in quadrature.  Arrays on the product grid have shape
``(2, n, n, 2, n, n)`` = (chart1, a1, b1, chart2, a2, b2) with ``w = a + i b``
and may carry trailing matrix axes.  Fields in a chart block are expressed
in that chart's coordinates and spinor frame.
"""

from collections import namedtuple
import logging
import warnings

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import erfc

from split_twistor.errors import NonIntegralWarning, SplitTwistorError
from split_twistor.geometry import spinor_from_chart

class FieldError(SplitTwistorError):
    pass

class GridError(FieldError):
    pass

LOG = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 48
DEFAULT_SPHERE_SIZE = 48
DEFAULT_HALF_WIDTH = 2.5
DEFAULT_BLEND_WIDTH = 0.25
DEFAULT_TRANSPORT_STEPS = 512
MIN_GRID_SIZE = 8
INTEGRALITY_TOLERANCE = 0.05
# scales below this times sqrt(node_count) are rounding noise
RELATIVE_FLOOR = 1e-12

# component order of CurvatureField
PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

ChernNumbers = namedtuple('ChernNumbers',
                          ['c1_factor1', 'c1_factor2', 'c2_total'])


def blend(r, width=DEFAULT_BLEND_WIDTH):
    """Chart-0 partition of unity; blend(r) + blend(1/r) = 1."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide='ignore'):
        return 0.5 * erfc(np.log(r) / width)


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _first_difference(values, axis, step, order):
    out = np.gradient(values, step, axis=axis, edge_order=2)
    if order == 4 and values.shape[axis] > 4:
        moved = np.moveaxis(values, axis, 0)
        target = np.moveaxis(out, axis, 0)
        target[2:-2] = (-moved[4:] + 8.0 * moved[3:-1]
                        - 8.0 * moved[1:-3] + moved[:-4]) / (12.0 * step)
    elif order not in (2, 4):
        raise FieldError('Unsupported finite-difference order %s' % order)
    return out


class SphereGrid(object):
    """Two-chart stereographic grid on one sphere factor."""

    def __init__(self, n=DEFAULT_SPHERE_SIZE, half_width=DEFAULT_HALF_WIDTH,
                 blend_width=DEFAULT_BLEND_WIDTH):
        if n < MIN_GRID_SIZE:
            raise GridError('Grid needs at least %d nodes per side, got %d'
                            % (MIN_GRID_SIZE, n))
        self.n = n
        self.half_width = half_width
        self.blend_width = blend_width
        self.axis = np.linspace(-half_width, half_width, n)
        self.step = self.axis[1] - self.axis[0]
        a, b = np.meshgrid(self.axis, self.axis, indexing='ij')
        self.w = np.broadcast_to(a + 1j * b, (2, n, n)).copy()
        self.chart = np.broadcast_to(np.arange(2)[:, None, None], (2, n, n))
        self.rho = 1.0 + np.abs(self.w) ** 2
        self.blend = blend(np.abs(self.w), blend_width)
        self.weights = self.blend * 4.0 / self.rho ** 2 * self.step ** 2

    @property
    def shape(self):
        return (2, self.n, self.n)

    def spinors(self):
        return spinor_from_chart(self.chart, self.w)

    def angles(self):
        """Polar angle theta and azimuth phi of every node."""
        n = _sphere_cartesian(self.chart, self.w)
        theta = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
        phi = np.mod(np.arctan2(n[..., 1], n[..., 0]), 2.0 * np.pi)
        return theta, phi


def _sphere_cartesian(chart, w):
    rho = 1.0 + np.abs(w) ** 2
    sign = np.where(chart == 0, 1.0, -1.0)
    return np.stack([2.0 * w.real / rho, sign * 2.0 * w.imag / rho,
                     sign * (1.0 - np.abs(w) ** 2) / rho], axis=-1)


class ProductGrid(object):

    def __init__(self, n=DEFAULT_GRID_SIZE, half_width=DEFAULT_HALF_WIDTH,
                 blend_width=DEFAULT_BLEND_WIDTH, order=2):
        self.sphere = SphereGrid(n, half_width, blend_width)
        self.order = order
        s = self.sphere
        self.w1 = s.w[:, :, :, None, None, None]
        self.w2 = s.w[None, None, None]
        self.c1 = s.chart[:, :, :, None, None, None]
        self.c2 = s.chart[None, None, None]
        self.rho1 = s.rho[:, :, :, None, None, None]
        self.rho2 = s.rho[None, None, None]
        self.weights = (s.weights[:, :, :, None, None, None]
                        * s.weights[None, None, None])

    def __repr__(self):
        return 'ProductGrid(n=%d, half_width=%g, blend_width=%g, order=%d)' % (
            self.n, self.half_width, self.blend_width, self.order)

    @property
    def n(self):
        return self.sphere.n

    @property
    def half_width(self):
        return self.sphere.half_width

    @property
    def blend_width(self):
        return self.sphere.blend_width

    @property
    def step(self):
        return self.sphere.step

    @property
    def shape(self):
        return self.sphere.shape + self.sphere.shape

    @property
    def node_count(self):
        return int(np.prod(self.shape))

    def x(self):
        return self.sphere.spinors()[:, :, :, None, None, None]

    def y(self):
        return self.sphere.spinors()[None, None, None]

    def full(self, values):
        """Broadcast a per-node array up to the full grid shape."""
        values = np.asarray(values)
        return np.broadcast_to(values, self.shape + values.shape[6:])

    def flat_index(self, index):
        return int(np.ravel_multi_index(index, self.shape))

    def derivative(self, values, index, order=None):
        """d/dw1, d/dw1bar, d/dw2 or d/dw2bar (index 0..3) by finite
        differences within each chart block."""
        order = order or self.order
        values = np.asarray(self.full(values))
        a_axis = 1 if index < 2 else 4
        da = _first_difference(values, a_axis, self.step, order)
        db = _first_difference(values, a_axis + 1, self.step, order)
        sign = -1.0 if index % 2 == 0 else 1.0
        return 0.5 * (da + sign * 1j * db)

    def integrate(self, values):
        values = np.asarray(values)
        extra = values.ndim - 6
        weights = self.weights.reshape(self.weights.shape + (1,) * extra)
        return np.sum(weights * values, axis=tuple(range(6)))

    def norm(self, density):
        """L2 norm of a pointwise squared-norm density, normalised volume."""
        total = np.sum(self.weights * density) / (16.0 * np.pi ** 2)
        return float(np.sqrt(max(total, 0.0)))

    def matrix_norm(self, values):
        values = np.asarray(self.full(values))
        density = np.abs(values) ** 2
        if values.ndim > 6:
            density = np.sum(density, axis=tuple(range(6, values.ndim)))
        return self.norm(density)

    def metadata(self):
        return {'n': self.n, 'half_width': self.half_width,
                'blend_width': self.blend_width, 'order': self.order}

    @classmethod
    def from_metadata(cls, metadata):
        return cls(n=metadata['n'], half_width=metadata['half_width'],
                   blend_width=metadata['blend_width'],
                   order=metadata.get('order', 2))


def sample_derivatives(func, grid, step, order=4):
    """Value and the four complex derivatives of a callable on the grid.

    ``func(c1, w1, c2, w2)`` is evaluated at central-difference stencils of
    half-width ``step`` inside each chart; the result has a leading axis of
    length 4 in (w1, w1bar, w2, w2bar) order.
    """
    if order == 2:
        offsets, weights = (1, -1), (0.5, -0.5)
    else:
        offsets = (2, 1, -1, -2)
        weights = (-1 / 12., 8 / 12., -8 / 12., 1 / 12.)
    value = np.asarray(func(grid.c1, grid.w1, grid.c2, grid.w2))
    derivs = []
    for factor in (0, 1):
        partial = []
        for direction in (1.0, 1j):
            total = 0
            for offset, weight in zip(offsets, weights):
                shift = offset * step * direction
                if factor == 0:
                    sample = func(grid.c1, grid.w1 + shift, grid.c2, grid.w2)
                else:
                    sample = func(grid.c1, grid.w1, grid.c2, grid.w2 + shift)
                total = total + weight * np.asarray(sample)
            partial.append(total / step)
        da, db = partial
        derivs.append(0.5 * (da - 1j * db))
        derivs.append(0.5 * (da + 1j * db))
    return value, np.stack([derivs[0], derivs[1], derivs[2], derivs[3]])


def sample_laplacians(func, grid, step, order=4):
    """Flat Laplacians (d_a^2 + d_b^2) of a callable in each factor, of
    order 2 or 4 in ``step``."""
    if order == 2:
        offsets, weights = (1, 0, -1), (1.0, -2.0, 1.0)
    else:
        offsets = (2, 1, 0, -1, -2)
        weights = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    laplacians = []
    for factor in (0, 1):
        total = 0
        for direction in (1.0, 1j):
            for offset, weight in zip(offsets, weights):
                shift = offset * step * direction
                if factor == 0:
                    sample = func(grid.c1, grid.w1 + shift, grid.c2, grid.w2)
                else:
                    sample = func(grid.c1, grid.w1, grid.c2, grid.w2 + shift)
                total = total + weight * np.asarray(sample)
        laplacians.append(total / step ** 2)
    return laplacians[0], laplacians[1]


class LatticeGaugeField(object):
    """Connection components (A_w1, A_w1bar, A_w2, A_w2bar) on a grid."""

    def __init__(self, grid, components, unitary=False):
        components = np.asarray(components, dtype=complex)
        if components.shape[:1 + len(grid.shape)] != (4,) + grid.shape:
            raise FieldError('Connection shape %s does not match %s'
                             % (repr(components.shape), repr(grid)))
        self.grid = grid
        self.components = components
        self.unitary = unitary

    @classmethod
    def zeros(cls, grid, rank, unitary=True):
        return cls(grid, np.zeros((4,) + grid.shape + (rank, rank),
                                  dtype=complex), unitary)

    @property
    def rank(self):
        return self.components.shape[-1]

    def unitary_defect(self):
        A = self.components
        first = np.abs(A[1] + dagger(A[0]))
        second = np.abs(A[3] + dagger(A[2]))
        return float(max(first.max(), second.max()))

    def along(self, path, chart=(0, 0)):
        """The 1-form contracted with a path's velocity, as a callable of t.

        ``path(t)`` returns (w1, w2, dw1/dt, dw2/dt) in the charts given by
        ``chart``; fields are interpolated linearly within that chart block.
        """
        axis = self.grid.sphere.axis
        block = self.components[:, chart[0], :, :, chart[1]]
        n = self.grid.n
        values = np.moveaxis(block, 0, 4).reshape(n, n, n, n, -1)
        points = (axis, axis, axis, axis)
        real = RegularGridInterpolator(points, values.real)
        imag = RegularGridInterpolator(points, values.imag)
        rank = self.rank

        def form(t):
            w1, w2, dw1, dw2 = path(t)
            where = np.stack(np.broadcast_arrays(
                np.real(w1), np.imag(w1), np.real(w2), np.imag(w2)), axis=-1)
            sampled = real(where) + 1j * imag(where)
            sampled = sampled.reshape(where.shape[:-1] + (4, rank, rank))
            velocity = np.stack(np.broadcast_arrays(
                dw1, np.conj(dw1), dw2, np.conj(dw2)), axis=-1)
            return np.einsum('...m,...mij->...ij', velocity, sampled)

        return form


class CurvatureField(object):
    """Six components F_mn (m < n, order of PAIRS) of a curvature 2-form."""

    def __init__(self, grid, components):
        components = np.asarray(components, dtype=complex)
        if components.shape[:1 + len(grid.shape)] != (6,) + grid.shape:
            raise FieldError('Curvature shape %s does not match %s'
                             % (repr(components.shape), repr(grid)))
        self.grid = grid
        self.components = components

    @property
    def rank(self):
        return self.components.shape[-1]

    def component(self, mu, nu):
        if mu == nu:
            return np.zeros_like(self.components[0])
        if mu < nu:
            return self.components[PAIRS.index((mu, nu))]
        return -self.components[PAIRS.index((nu, mu))]

    def conjugate_by(self, g):
        """Pointwise g^-1 F g."""
        ginv = np.linalg.inv(g)
        return CurvatureField(self.grid, ginv @ self.components @ g)


def curvature(A, order=None):
    """F = dA + A ^ A by finite differences within each chart block."""
    grid = A.grid
    comps = A.components
    F = np.empty((6,) + comps.shape[1:], dtype=complex)
    for k, (mu, nu) in enumerate(PAIRS):
        F[k] = (grid.derivative(comps[nu], mu, order)
                - grid.derivative(comps[mu], nu, order)
                + comps[mu] @ comps[nu] - comps[nu] @ comps[mu])
    return CurvatureField(grid, F)


def sd_asd_decompose(F):
    """Coefficients of F on the SD and ASD bases, each of shape (3, ...).

    F = sum sd_i SD_i + sum asd_i ASD_i exactly, with the bases of
    geometry.sd_asd_basis_arrays.
    """
    rho1 = F.grid.rho1[..., None, None]
    rho2 = F.grid.rho2[..., None, None]
    f01, f02, f03, f12, f13, f23 = F.components
    sd = np.stack([f02, f13, (rho1 ** 2 * f01 - rho2 ** 2 * f23) / 8.0])
    asd = np.stack([f03, f12, (rho1 ** 2 * f01 + rho2 ** 2 * f23) / 8.0])
    return sd, asd


def recombine(grid, sd, asd):
    rho1 = grid.rho1[..., None, None]
    rho2 = grid.rho2[..., None, None]
    F = np.stack([4.0 * (sd[2] + asd[2]) / rho1 ** 2, sd[0], asd[0],
                  asd[1], sd[1], 4.0 * (asd[2] - sd[2]) / rho2 ** 2])
    return CurvatureField(grid, F)


def _part_density(grid, part):
    scale = (grid.rho1 * grid.rho2 / 4.0) ** 2
    sq = np.sum(np.abs(part) ** 2, axis=(-2, -1))
    return scale * (sq[0] + sq[1]) + 2.0 * sq[2]


def relative_residual(residual, scale, grid):
    """residual / scale, or the absolute residual when the scale is too
    small to carry a meaningful ratio (a flat field)."""
    if scale <= RELATIVE_FLOOR * np.sqrt(grid.node_count):
        return residual
    return residual / scale


def asd_residual(F):
    """L2 norm of the self-dual part of F over the grid."""
    sd, _ = sd_asd_decompose(F)
    return F.grid.norm(_part_density(F.grid, sd))


def field_strength_norm(F):
    sd, asd = sd_asd_decompose(F)
    return F.grid.norm(_part_density(F.grid, sd) + _part_density(F.grid, asd))


def _base_points(sphere, count):
    inside = np.flatnonzero((sphere.chart == 0).ravel()
                            & (np.abs(sphere.w) <= 1.0).ravel())
    picks = inside[np.linspace(0, len(inside) - 1, count).astype(int)]
    return [np.unravel_index(p, sphere.shape) for p in picks]


def _warn_if_not_integral(name, value, tolerance):
    if abs(value - round(value)) > tolerance:
        warnings.warn('%s = %.6f is not within %g of an integer'
                      % (name, value, tolerance), NonIntegralWarning)


def chern_integrals(F, base_samples=8, tolerance=INTEGRALITY_TOLERANCE):
    """First Chern numbers on each factor and the second Chern number.

    The c1 values average the fibre integral over ``base_samples`` base
    points of the other factor.  The 4-form integral follows the sign
    convention of the split metric, under which the closed-form abelian
    solution of first Chern numbers (k, k) has c2_total = -k^2.
    """
    grid = F.grid
    sphere = grid.sphere
    trace01 = np.trace(F.component(0, 1), axis1=-2, axis2=-1).real
    trace23 = np.trace(F.component(2, 3), axis1=-2, axis2=-1).real
    first, second = [], []
    for base in _base_points(sphere, base_samples):
        first.append(np.sum(sphere.weights * sphere.rho ** 2 / 4.0
                            * trace01[(slice(None),) * 3 + base]) / np.pi)
        second.append(np.sum(sphere.weights * sphere.rho ** 2 / 4.0
                             * trace23[base]) / np.pi)
    f = F.component
    density = 2.0 * np.trace(f(0, 1) @ f(2, 3) - f(0, 2) @ f(1, 3)
                             + f(0, 3) @ f(1, 2), axis1=-2, axis2=-1).real
    flat = grid.weights * (grid.rho1 * grid.rho2 / 4.0) ** 2
    c2 = -4.0 * np.sum(flat * density) / (8.0 * np.pi ** 2)
    numbers = ChernNumbers(float(np.mean(first)), float(np.mean(second)),
                           float(c2))
    LOG.info("Chern numbers: %s", repr(numbers))
    for name, value in numbers._asdict().items():
        _warn_if_not_integral(name, value, tolerance)
    return numbers


def unitary_part(U):
    u, _, vh = np.linalg.svd(U)
    return u @ vh


def parallel_transport(connection, path=None, steps=DEFAULT_TRANSPORT_STEPS,
                       unitary=True, chart=(0, 0)):
    """Solve dU/dt = -(A . gamma'(t)) U, U(0) = I, for t in [0, 1] by RK4.

    ``connection`` is either a LatticeGaugeField together with ``path`` or a
    callable returning the contracted form A . gamma'(t) for a batch of
    paths.  Unitary transports are projected back onto U(n) after every
    step.
    """
    if isinstance(connection, LatticeGaugeField):
        if path is None:
            raise FieldError('A lattice connection needs a path')
        form = connection.along(path, chart)
    else:
        form = connection
    dt = 1.0 / steps
    start = np.asarray(form(0.0), dtype=complex)
    U = np.broadcast_to(np.eye(start.shape[-1], dtype=complex),
                        start.shape).copy()
    current = start
    for step in range(steps):
        t = step * dt
        middle = np.asarray(form(t + 0.5 * dt))
        end = np.asarray(form(t + dt))
        k1 = -current @ U
        k2 = -middle @ (U + 0.5 * dt * k1)
        k3 = -middle @ (U + 0.5 * dt * k2)
        k4 = -end @ (U + dt * k3)
        U = U + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if unitary:
            U = unitary_part(U)
        current = end
    return U


def holonomy_trace(U):
    return np.trace(U, axis1=-2, axis2=-1)


def pure_gauge(grid, gauge, step=None):
    """The flat connection g^-1 dg of a callable gauge ``g(c1, w1, c2, w2)``.

    With ``step`` the derivatives are generator central differences,
    otherwise lattice differences of the sampled gauge.
    """
    if step is None:
        g = np.asarray(grid.full(gauge(grid.c1, grid.w1, grid.c2, grid.w2)))
        dg = np.stack([grid.derivative(g, mu) for mu in range(4)])
    else:
        g, dg = sample_derivatives(gauge, grid, step)
        g = np.asarray(grid.full(g))
    ginv = np.linalg.inv(g)
    components = np.broadcast_to(ginv[None] @ dg,
                                 (4,) + grid.shape + g.shape[-2:])
    return LatticeGaugeField(grid, components.copy(), unitary=True)


def gauge_transform(A, g, dg=None):
    """A -> g^-1 A g + g^-1 dg for a sampled gauge ``g``."""
    grid = A.grid
    g = np.asarray(grid.full(g))
    if dg is None:
        dg = np.stack([grid.derivative(g, mu) for mu in range(4)])
    ginv = np.linalg.inv(g)
    components = ginv[None] @ A.components @ g[None] + ginv[None] @ dg
    return LatticeGaugeField(grid, components, A.unitary)
