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

"""Spinors, charts on S2 x S2 and the incidence relation with twistor space.

Index conventions: spinors carry a trailing axis of length 2, contraction is
``x.y = x0 y1 - x1 y0`` and ``hat(x) = (-conj(x1), conj(x0))``.  A point of
S2 x S2 is a pair of unit spinors (x, y); chart 0 of a sphere factor uses
``x = (1, w) / sqrt(1 + |w|^2)`` and chart 1 uses
``x = (w, 1) / sqrt(1 + |w|^2)``.
Two-forms are antisymmetric 4x4 coefficient arrays in the coordinate order
(w1, w1bar, w2, w2bar) with ``F = 1/2 F_mn dx^m ^ dx^n``.
"""

from dataclasses import dataclass
import logging

import numpy as np

from split_twistor.errors import SplitTwistorError

class GeometryError(SplitTwistorError):
    pass

class RealTwistorInput(GeometryError):
    pass

class ChartOverflow(GeometryError):
    pass

LOG = logging.getLogger(__name__)

EPSILON = np.array([[0.0, 1.0], [-1.0, 0.0]])
REALITY_TOLERANCE = 1e-9
NORMALIZATION_TOLERANCE = 1e-12
DISC_TOLERANCE = 1e-12
SWITCH_RADIUS = 1.0

# coordinate order of the 4x4 form arrays
W1, W1BAR, W2, W2BAR = range(4)


def hat_array(v):
    v = np.asarray(v, dtype=complex)
    return np.stack([-np.conj(v[..., 1]), np.conj(v[..., 0])], axis=-1)


def contract(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def spinor_from_chart(chart, w):
    """Unit spinors for stereographic coordinates ``w`` in ``chart``.

    ``chart`` and ``w`` broadcast against each other; the result has a
    trailing axis of length 2.
    """
    w = np.asarray(w, dtype=complex)
    chart = np.broadcast_to(np.asarray(chart), w.shape)
    scale = 1.0 / np.sqrt(1.0 + np.abs(w) ** 2)
    first = np.where(chart == 0, 1.0 + 0j, w)
    second = np.where(chart == 0, w, 1.0 + 0j)
    return np.stack([first * scale, second * scale], axis=-1)


def chart_coordinate(v):
    """Canonical (chart, w) of spinors ``v``: chart 0 whenever |v0| >= |v1|."""
    v = np.asarray(v, dtype=complex)
    chart = np.where(np.abs(v[..., 0]) >= np.abs(v[..., 1]), 0, 1)
    with np.errstate(divide='ignore', invalid='ignore'):
        w = np.where(chart == 0, v[..., 1] / v[..., 0], v[..., 0] / v[..., 1])
    return chart, w


def cartesian(v):
    """Unit 3-vector of the sphere point represented by unit spinors ``v``."""
    v = np.asarray(v, dtype=complex)
    n12 = 2.0 * np.conj(v[..., 0]) * v[..., 1]
    n3 = np.abs(v[..., 0]) ** 2 - np.abs(v[..., 1]) ** 2
    return np.stack([n12.real, n12.imag, n3], axis=-1)


def incidence_matrix(x, y, lambda0=1.0, lambda1=0.0):
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    lambda0 = np.asarray(lambda0)[..., None, None]
    lambda1 = np.asarray(lambda1)[..., None, None]
    outer = x[..., :, None] * y[..., None, :]
    outer_hat = hat_array(x)[..., :, None] * hat_array(y)[..., None, :]
    return lambda0 * outer + lambda1 * outer_hat


def boundary_loop(x, y, samples, orientation=1):
    """Real twistors ``x y^T + exp(i orientation theta_j) xhat yhat^T``.

    ``theta_j = 2 pi j / samples``; the loop axis is inserted before the
    two matrix axes, so spinors of shape (..., 2) give (..., samples, 2, 2).
    """
    theta = 2.0 * np.pi * np.arange(samples) / samples
    phase = np.exp(1j * orientation * theta)
    x = np.asarray(x, dtype=complex)[..., None, :]
    y = np.asarray(y, dtype=complex)[..., None, :]
    return incidence_matrix(x, y, np.ones_like(phase), phase)


def reality_defect(Z):
    """Scale-free distance of ``Z`` from being unitary up to a real scale."""
    Z = np.asarray(Z, dtype=complex)
    gram = np.conj(np.swapaxes(Z, -1, -2)) @ Z
    s = 0.5 * np.trace(gram, axis1=-2, axis2=-1).real
    defect = gram - s[..., None, None] * np.eye(2)
    return np.linalg.norm(defect, axis=(-2, -1)) / s


def quadric(Z):
    """``Z^{aa'} Z_{aa'}``, i.e. twice the determinant."""
    return 2.0 * np.linalg.det(np.asarray(Z, dtype=complex))


def affine_coords(x, y):
    """Real 2x2 affine coordinates of (x, y) on the chart M+ = {|w1| > |w2|}.

    Built from the unit 3-vectors n of x and m of y; singular where n3 = m3,
    which is the boundary of the chart.
    """
    n = cartesian(x)
    m = cartesian(y)
    scale = 1.0 / (np.sqrt(2.0) * (n[..., 2] - m[..., 2]))
    X = np.empty(n.shape[:-1] + (2, 2))
    X[..., 0, 0] = n[..., 0] - m[..., 0]
    X[..., 0, 1] = n[..., 1] + m[..., 1]
    X[..., 1, 0] = m[..., 1] - n[..., 1]
    X[..., 1, 1] = n[..., 0] + m[..., 0]
    return X * scale[..., None, None]


def twistor_affine(Z):
    """Real twistor ``Z`` to homogeneous real coordinates (omega, pi).

    Defined up to an overall real sign, like the projective point itself.
    """
    Z = np.asarray(Z, dtype=complex)
    s = 0.5 * np.trace(np.conj(np.swapaxes(Z, -1, -2)) @ Z,
                       axis1=-2, axis2=-1).real
    U = Z / np.sqrt(s)[..., None, None]
    U = U / np.sqrt(np.linalg.det(U))[..., None, None]
    a = U[..., 0, 0]
    b = U[..., 0, 1]
    omega = np.stack([-a.imag, a.real], axis=-1)
    pi = np.sqrt(2.0) * np.stack([b.imag, b.real], axis=-1)
    return omega, pi


def twistor_from_affine(omega, pi):
    omega = np.asarray(omega, dtype=float)
    pi = np.asarray(pi, dtype=float)
    a = omega[..., 1] - 1j * omega[..., 0]
    b = (pi[..., 1] + 1j * pi[..., 0]) / np.sqrt(2.0)
    Z = np.empty(a.shape + (2, 2), dtype=complex)
    Z[..., 0, 0] = a
    Z[..., 0, 1] = b
    Z[..., 1, 0] = -np.conj(b)
    Z[..., 1, 1] = np.conj(a)
    return Z


def metric_components(rho1, rho2):
    """Metric and inverse metric in (w1, w1bar, w2, w2bar) order."""
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    shape = np.broadcast(rho1, rho2).shape
    g = np.zeros(shape + (4, 4))
    ginv = np.zeros(shape + (4, 4))
    g[..., W1, W1BAR] = g[..., W1BAR, W1] = 2.0 / rho1 ** 2
    g[..., W2, W2BAR] = g[..., W2BAR, W2] = -2.0 / rho2 ** 2
    ginv[..., W1, W1BAR] = ginv[..., W1BAR, W1] = rho1 ** 2 / 2.0
    ginv[..., W2, W2BAR] = ginv[..., W2BAR, W2] = -rho2 ** 2 / 2.0
    return g, ginv


def _two_form(shape, mu, nu, value):
    form = np.zeros(shape + (4, 4))
    form[..., mu, nu] = value
    form[..., nu, mu] = -value
    return form


def sd_asd_basis_arrays(rho1, rho2):
    """SD and ASD two-form bases as arrays of shape (..., 3, 4, 4).

    SD: dw1^dw2, dw1bar^dw2bar and the Kahler-like 4dw1^dw1bar/rho1^2 -
    4dw2^dw2bar/rho2^2.  ASD: dw1^dw2bar, dw1bar^dw2 and the same
    combination with a plus sign.
    """
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    shape = np.broadcast(rho1, rho2).shape
    one = np.ones(shape)
    first = _two_form(shape, W1, W1BAR, 4.0 / rho1 ** 2)
    second = _two_form(shape, W2, W2BAR, 4.0 / rho2 ** 2)
    sd = np.stack([_two_form(shape, W1, W2, one),
                   _two_form(shape, W1BAR, W2BAR, one),
                   first - second], axis=-3)
    asd = np.stack([_two_form(shape, W1, W2BAR, one),
                    _two_form(shape, W1BAR, W2, one),
                    first + second], axis=-3)
    return sd, asd


def form_pairing(F, G, rho1, rho2):
    """Bilinear pairing 1/2 F_mn G_kl g^mk g^nl of two-form arrays."""
    _, ginv = metric_components(rho1, rho2)
    return 0.5 * np.einsum('...mn,...kl,...mk,...nl->...', F, G, ginv, ginv)


@dataclass(frozen=True)
class Spinor:
    c0: complex
    c1: complex

    @classmethod
    def from_array(cls, v):
        return cls(complex(v[0]), complex(v[1]))

    @classmethod
    def from_stereographic(cls, w, chart=0):
        return cls.from_array(spinor_from_chart(chart, w))

    def as_array(self):
        return np.array([self.c0, self.c1], dtype=complex)

    def contract(self, other):
        return self.c0 * other.c1 - self.c1 * other.c0

    def hat(self):
        return Spinor(-np.conj(self.c1), np.conj(self.c0))

    def norm2(self):
        return abs(self.c0) ** 2 + abs(self.c1) ** 2

    def stereographic(self):
        chart, w = chart_coordinate(self.as_array())
        return int(chart), complex(w)


@dataclass(frozen=True)
class SpacetimePoint:
    x: Spinor
    y: Spinor

    def __post_init__(self):
        for name, s in (('x', self.x), ('y', self.y)):
            if abs(s.contract(s.hat()) - 1.0) > NORMALIZATION_TOLERANCE:
                raise GeometryError(
                    'Spinor %s is not unit normalised: %s' % (name, repr(s)))

    @classmethod
    def from_stereographic(cls, w1, w2, chart1=0, chart2=0):
        return cls(Spinor.from_stereographic(w1, chart1),
                   Spinor.from_stereographic(w2, chart2))

    @property
    def charts(self):
        return self.x.stereographic()[0], self.y.stereographic()[0]

    @property
    def w1(self):
        return self.x.stereographic()[1]

    @property
    def w2(self):
        return self.y.stereographic()[1]

    def canonical(self):
        return SpacetimePoint.from_stereographic(
            self.w1, self.w2, *self.charts)

    def antipode(self):
        return SpacetimePoint(self.x.hat(), self.y.hat())

    def coordinates(self, charts=None):
        """Stereographic (w1, w2) in the requested charts.

        Raises ChartOverflow when a coordinate lies beyond the switch radius
        of the requested chart.
        """
        if charts is None:
            charts = self.charts
        coords = []
        for chart, s in zip(charts, (self.x, self.y)):
            c0, c1 = s.c0, s.c1
            if chart == 0:
                w = c1 / c0 if c0 != 0 else np.inf
            else:
                w = c0 / c1 if c1 != 0 else np.inf
            if abs(w) > SWITCH_RADIUS + NORMALIZATION_TOLERANCE:
                raise ChartOverflow(
                    '|w| = %g exceeds the switch radius of chart %d'
                    % (abs(w), chart))
            coords.append(complex(w))
        return tuple(coords)


@dataclass(frozen=True)
class DiscParam:
    lambda0: complex = 1.0
    lambda1: complex = 0.0

    def __post_init__(self):
        if self.lambda0 == 0:
            raise GeometryError('lambda0 must be nonzero')
        if abs(self.affine) > 1.0 + DISC_TOLERANCE:
            raise GeometryError(
                'Disc parameter %s lies outside the closed unit disc'
                % repr(self.affine))

    @classmethod
    def boundary(cls, theta):
        return cls(1.0, np.exp(1j * theta))

    @property
    def affine(self):
        return self.lambda1 / self.lambda0

    def on_boundary(self, tol=REALITY_TOLERANCE):
        return abs(abs(self.affine) - 1.0) < tol


@dataclass(frozen=True, eq=False)
class TwistorPoint:
    """Projective 2x2 twistor, stored Frobenius-normalised with its first
    nonzero entry rotated onto the positive real axis."""
    Z: np.ndarray

    def __post_init__(self):
        Z = np.array(self.Z, dtype=complex).reshape(2, 2)
        scale = np.linalg.norm(Z)
        if scale == 0:
            raise GeometryError('The zero matrix is not a twistor')
        Z = Z / scale
        flat = Z.ravel()
        lead = flat[np.argmax(np.abs(flat) > 1e-14 * np.abs(flat).max())]
        Z = Z * (abs(lead) / lead)
        Z.setflags(write=False)
        object.__setattr__(self, 'Z', Z)

    def reality_defect(self):
        return float(reality_defect(self.Z))

    def is_real(self, tol=REALITY_TOLERANCE):
        return self.reality_defect() < tol

    def quadric(self):
        return complex(quadric(self.Z))

    def distance(self, other):
        return float(np.linalg.norm(self.Z - other.Z))

    def isclose(self, other, tol=1e-10):
        return self.distance(other) < tol


def hat(s):
    return s.hat()


def antipode(p):
    return p.antipode()


def incidence(p, d):
    Z = incidence_matrix(p.x.as_array(), p.y.as_array(), d.lambda0, d.lambda1)
    return TwistorPoint(Z)


def boundary_circle(p, samples, orientation=1):
    """The real line of p as ``samples`` twistors, shape (samples, 2, 2).

    orientation=-1 traverses it backwards; projectively that is the line
    of the antipode.
    """
    return boundary_loop(p.x.as_array(), p.y.as_array(), samples, orientation)


def point_from_twistor(Z, tol=REALITY_TOLERANCE):
    """Unique spacetime point and interior disc parameter lying over ``Z``.

    The returned point is the canonical chart representative and the disc
    parameter is scaled so that lambda0 = 1.
    """
    if isinstance(Z, TwistorPoint):
        Z = Z.Z
    Z = np.asarray(Z, dtype=complex)
    defect = float(reality_defect(Z))
    if defect < tol:
        raise RealTwistorInput(
            'Twistor is real to %g, the inverse is undefined' % defect)
    u, _, vh = np.linalg.svd(Z)
    p = SpacetimePoint(Spinor.from_array(u[:, 0]),
                       Spinor.from_array(vh[0]))
    p = p.canonical()
    x = p.x.as_array()
    y = p.y.as_array()
    lambda0 = np.conj(x) @ Z @ np.conj(y)
    lambda1 = np.conj(hat_array(x)) @ Z @ np.conj(hat_array(y))
    LOG.debug("Disc parameters: %s", repr((lambda0, lambda1)))
    return p, DiscParam(1.0, complex(lambda1 / lambda0))


def metric_eval(p, v, charts=None):
    """Split-signature metric on a tangent vector ``v``.

    ``v`` holds the components along (w1, w1bar, w2, w2bar).
    """
    w1, w2 = p.coordinates(charts)
    v = np.asarray(v, dtype=complex)
    rho1 = 1.0 + abs(w1) ** 2
    rho2 = 1.0 + abs(w2) ** 2
    first = 4.0 * (v[W1] * v[W1BAR]).real / rho1 ** 2
    second = 4.0 * (v[W2] * v[W2BAR]).real / rho2 ** 2
    return float(first - second)


def sd_asd_bases(p, charts=None):
    w1, w2 = p.coordinates(charts)
    return sd_asd_basis_arrays(1.0 + abs(w1) ** 2, 1.0 + abs(w2) ** 2)
