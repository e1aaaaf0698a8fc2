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
"""Scattering of characteristic data through twistor space.

Data on the past null boundary are anti-hermitian matrix functions A-(w, eta)
of the first sphere coordinate inside the unit disc, one per value of the
generator coordinate eta, entering the connection as
``A-(w, eta) (d eta + i w dwbar - i wbar dw)``.  For every real direction
z in the unit sphere the circle ``z3 (1 - |w|^2) + Re((z1 + i z2) w) = 0``
cuts the disc in an arc whose parallel propagator is the holonomy h(z).
A Riemann-Hilbert factorisation of h along a fan of meridians gives the
twistor metric H.  Yang's J-matrix is reconstructed from H on a polar
collar of every beta-plane of the null boundary, and the final data are
the connection of that J in the frame parallel-propagated from future
timelike infinity.

Final data are represented pulled back to past coordinates by the antipodal
map, so abelian data scatter to exactly minus themselves.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import expm
from scipy.optimize import minimize

from split_twistor.errors import SplitTwistorError
from split_twistor.factorization import (
    LargeDataJump, LoopMatrixFunction, hermitian_from_rhp,
    loop_from_hermitian, rhp_factorize)
from split_twistor.fields import dagger, parallel_transport, unitary_part
from split_twistor.fields import _first_difference
from split_twistor.geometry import spinor_from_chart
from split_twistor.parallel import map_chunks
from split_twistor.ward import (
    HermitianTwistorData, connection_from_J, reconstruct_J)

class ScatteringError(SplitTwistorError):
    pass

class SupportViolation(ScatteringError):
    pass

LOG = logging.getLogger(__name__)

INNER_RADIUS = 0.05
OUTER_RADIUS = 0.95
SUPPORT_TOLERANCE = 1e-12
ANTIHERMITIAN_TOLERANCE = 1e-12
BUMP_ORDER = 8
DEFAULT_ETA_SAMPLES = 64
DEFAULT_RADIAL_MODES = 1
DEFAULT_ANGULAR_MODES = 2
DEFAULT_SAMPLE_SIZE = 33
DEFAULT_LAYOUT = 'fibonacci'
DEFAULT_FIBONACCI_POINTS = 512
DEFAULT_MERIDIANS = 32
DEFAULT_MERIDIAN_SAMPLES = 256
DEFAULT_TRANSPORT_STEPS = 512
DEFAULT_COLLAR_RADII = 65
DEFAULT_COLLAR_ANGLES = 32
DEFAULT_COLLAR_LOOP_SAMPLES = 256
COLLAR_RIM = 2
COLLAR_SIDES = ('past', 'future')
EVALUATION_BATCH = 4096


def hermitian_basis(n):
    """Trace-orthonormal basis of n x n hermitian matrices; element 0 is
    the scaled identity, so su(n) data have a zero first coefficient."""
    basis = [np.eye(n, dtype=complex) / np.sqrt(n)]
    for level in range(1, n):
        diagonal = np.zeros(n)
        diagonal[:level] = 1.0
        diagonal[level] = -level
        basis.append(np.diag(diagonal).astype(complex)
                     / np.sqrt(level * (level + 1)))
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2.0)
            skew = np.zeros((n, n), dtype=complex)
            skew[j, k] = -1j / np.sqrt(2.0)
            skew[k, j] = 1j / np.sqrt(2.0)
            basis.extend([sym, skew])
    return np.array(basis)


def radial_bump(r, centre, width):
    """Bump (1 - u^2)^8, u = (r - centre) / width, zero for |u| >= 1."""
    u = (np.asarray(r, dtype=float) - centre) / width
    return np.where(np.abs(u) < 1.0, (1.0 - u ** 2) ** BUMP_ORDER, 0.0)


def _radial_layout(count):
    # bumps tile the admissible annulus and stay inside it
    width = (OUTER_RADIUS - INNER_RADIUS) / (count + 1)
    return INNER_RADIUS + width * np.arange(1, count + 1), width


def spatial_basis(w, radial=DEFAULT_RADIAL_MODES,
                  angular=DEFAULT_ANGULAR_MODES):
    """Real basis functions bump_k(|w|) x (1, cos m phi, sin m phi) at w,
    shape (..., radial * (2 * angular + 1))."""
    w = np.asarray(w, dtype=complex)
    r = np.abs(w)
    phi = np.angle(w)
    centres, width = _radial_layout(radial)
    bumps = [radial_bump(r, c, width) for c in centres]
    waves = [np.ones_like(r)]
    for m in range(1, angular + 1):
        waves.extend([np.cos(m * phi), np.sin(m * phi)])
    return np.stack([b * a for b in bumps for a in waves], axis=-1)


class CharacteristicData(object):
    """Modal characteristic data on the past null boundary.

    ``coefficients`` has shape (eta, radial * (2 * angular + 1), rank^2):
    real weights of the spatial basis against the hermitian basis, so that
    A-(w, eta_j) = i sum c[j, k, a] basis_k(w) T_a.
    """

    def __init__(self, coefficients, rank, radial=DEFAULT_RADIAL_MODES,
                 angular=DEFAULT_ANGULAR_MODES,
                 sample_size=DEFAULT_SAMPLE_SIZE):
        coefficients = np.asarray(coefficients, dtype=float)
        expected = (radial * (2 * angular + 1), rank * rank)
        if coefficients.ndim != 3 or coefficients.shape[1:] != expected:
            raise ScatteringError(
                'Coefficient shape %s does not match rank %d with %d radial '
                'and %d angular modes' % (repr(coefficients.shape), rank,
                                          radial, angular))
        self.coefficients = coefficients
        self.rank = rank
        self.radial = radial
        self.angular = angular
        self.sample_size = sample_size
        self.basis = hermitian_basis(rank)

    def __repr__(self):
        return 'CharacteristicData(rank=%d, eta=%d, radial=%d, angular=%d)' % (
            self.rank, self.eta_count, self.radial, self.angular)

    @property
    def eta_count(self):
        return self.coefficients.shape[0]

    @property
    def eta(self):
        return 2.0 * np.pi * np.arange(self.eta_count) / self.eta_count

    @property
    def mode_count(self):
        return self.coefficients.shape[1]

    @classmethod
    def zeros(cls, rank, eta_count=DEFAULT_ETA_SAMPLES, **kwargs):
        radial = kwargs.get('radial', DEFAULT_RADIAL_MODES)
        angular = kwargs.get('angular', DEFAULT_ANGULAR_MODES)
        shape = (eta_count, radial * (2 * angular + 1), rank * rank)
        return cls(np.zeros(shape), rank, **kwargs)

    def like(self, coefficients):
        return CharacteristicData(coefficients, self.rank, self.radial,
                                  self.angular, self.sample_size)

    def __neg__(self):
        return self.like(-self.coefficients)

    def evaluate(self, w, eta_index):
        """A-(w, eta_j) at an array of points, shape (..., rank, rank)."""
        modes = spatial_basis(w, self.radial, self.angular)
        weights = modes @ self.coefficients[eta_index]
        return 1j * np.einsum('...a,aij->...ij', weights, self.basis)

    def sample_axis(self, size=None):
        return np.linspace(-1.0, 1.0, size or self.sample_size)

    @property
    def samples(self):
        """Values on the Cartesian grid of the closed unit square times
        eta, shape (eta, size, size, rank, rank)."""
        axis = self.sample_axis()
        w = axis[:, None] + 1j * axis[None, :]
        return np.stack([self.evaluate(w, j) for j in range(self.eta_count)])

    def sup_norm(self):
        return float(np.max(np.linalg.norm(self.samples, ord=2,
                                           axis=(-2, -1))))

    @classmethod
    def from_samples(cls, samples, radial=DEFAULT_RADIAL_MODES,
                     angular=DEFAULT_ANGULAR_MODES):
        """Least-squares projection of sampled data on the Cartesian grid
        of ``sample_axis`` onto the modal basis.

        Raises SupportViolation when the samples do not vanish outside the
        admissible annulus.
        """
        samples = np.asarray(samples, dtype=complex)
        if samples.ndim != 5 or samples.shape[1] != samples.shape[2]:
            raise ScatteringError('Samples must have shape (eta, size, size, '
                                  'rank, rank), got %s'
                                  % repr(samples.shape))
        eta_count, size, _, rank, _ = samples.shape
        skew = float(np.max(np.abs(samples + dagger(samples)),
                            initial=0.0))
        if skew > ANTIHERMITIAN_TOLERANCE:
            raise ScatteringError('Characteristic data are not anti-hermitian '
                                  '(defect %.3g)' % skew)
        axis = np.linspace(-1.0, 1.0, size)
        w = axis[:, None] + 1j * axis[None, :]
        r = np.abs(w)
        outside = (r < INNER_RADIUS) | (r > OUTER_RADIUS)
        leak = float(np.max(np.abs(samples[:, outside]), initial=0.0))
        if leak > SUPPORT_TOLERANCE:
            raise SupportViolation(
                'Characteristic data reach %.3g outside the annulus '
                '%g <= |w| <= %g' % (leak, INNER_RADIUS, OUTER_RADIUS))
        basis = hermitian_basis(rank)
        design = spatial_basis(w, radial, angular).reshape(size * size, -1)
        targets = np.einsum('aij,exyji->exya', basis, -1j * samples).real
        targets = targets.reshape(eta_count, size * size, rank * rank)
        coefficients = np.stack([
            np.linalg.lstsq(design, targets[j], rcond=None)[0]
            for j in range(eta_count)])
        return cls(coefficients, rank, radial, angular, size)

    def check_support(self):
        samples = self.samples
        axis = self.sample_axis()
        r = np.abs(axis[:, None] + 1j * axis[None, :])
        outside = (r < INNER_RADIUS) | (r > OUTER_RADIUS)
        leak = float(np.max(np.abs(samples[:, outside]), initial=0.0))
        if leak > SUPPORT_TOLERANCE:
            raise SupportViolation('Characteristic data reach %.3g outside '
                                   'the annulus' % leak)

    def metadata(self):
        return {'rank': self.rank, 'eta': self.eta_count,
                'radial': self.radial, 'angular': self.angular,
                'sample_size': self.sample_size}


def bump_data(rank=2, amplitude=0.3, seed=0, eta_count=DEFAULT_ETA_SAMPLES,
              radial=DEFAULT_RADIAL_MODES, angular=DEFAULT_ANGULAR_MODES):
    """Seeded smooth data with sup norm ``amplitude``; u(1) for rank 1 and
    traceless otherwise.  The eta dependence is a first Fourier mode."""
    rng = np.random.default_rng(seed)
    modes = radial * (2 * angular + 1)
    decay = np.array([1.0] + [1.0 / (1 + m) for m in range(1, angular + 1)
                              for _ in range(2)])
    decay = np.tile(decay, radial)[:, None]
    parts = [rng.normal(size=(modes, rank * rank)) * decay for _ in range(3)]
    if rank > 1:
        for part in parts:
            part[:, 0] = 0.0
    eta = 2.0 * np.pi * np.arange(eta_count) / eta_count
    coefficients = (parts[0][None] + np.cos(eta)[:, None, None] * parts[1]
                    + 0.5 * np.sin(eta)[:, None, None] * parts[2])
    data = CharacteristicData(coefficients, rank, radial, angular)
    peak = data.sup_norm()
    if peak > 0:
        data = data.like(coefficients * amplitude / peak)
    LOG.debug("Built bump data: %s", repr(data))
    return data


def _unit_direction(z):
    """(conj zeta / |zeta|, kappa, dir) of the circle cut by direction z,
    zeta = z1 + i z2, kappa = 2|z3| / |zeta|."""
    z = np.asarray(z, dtype=float)
    zeta = z[..., 0] + 1j * z[..., 1]
    size = np.abs(zeta)
    trivial = size < 1e-12
    unit = np.where(trivial, 0.0, np.conj(zeta) / np.where(trivial, 1.0, size))
    kappa = np.where(trivial, 0.0,
                     2.0 * np.abs(z[..., 2]) / np.where(trivial, 1.0, size))
    direction = np.where(z[..., 2] < 0, -1.0, 1.0)
    return unit, kappa, direction


def circle_arc(z, t):
    """Point and velocity on the interior arc of the circle of direction z.

    The arc runs over t in [0, 1] from i conj(zeta)/|zeta| to its negative.
    It is the chord through the origin when z3 = 0; reversing z reverses
    the arc, and zeta = 0 gives the constant path at the origin.
    """
    unit, kappa, direction = _unit_direction(z)
    sigma = 2.0 * np.asarray(t, dtype=float) - 1.0
    alpha = np.arctan(kappa)
    root = np.sqrt(1.0 + kappa ** 2)
    ratio = np.where(kappa > 0, alpha / np.where(kappa > 0, kappa, 1.0), 1.0)
    odd = root * sigma * ratio * np.sinc(sigma * alpha / np.pi)
    even = (-kappa / (1.0 + root) + root * sigma ** 2 * alpha * ratio / 2.0
            * np.sinc(sigma * alpha / (2.0 * np.pi)) ** 2)
    w = unit * (direction * even - 1j * odd)
    dw = 2.0 * unit * (direction * alpha * odd
                       - 1j * root * ratio * np.cos(sigma * alpha))
    return w, dw


def meridian_points(meridians=DEFAULT_MERIDIANS,
                    samples=DEFAULT_MERIDIAN_SAMPLES):
    """Unit directions (sin(t/2) cos b, sin(t/2) sin b, -cos(t/2)) with
    t = 2 pi j / samples, so z3 / |zeta| = -cot(t/2) is the Cayley image of
    exp(i t) and sample 0 sits at z3 = infinity.  Shape (meridians *
    samples, 3) with the antipodal index of every point."""
    if meridians % 2:
        raise ScatteringError('Meridian count must be even, got %d'
                              % meridians)
    beta = 2.0 * np.pi * np.arange(meridians) / meridians
    theta = 2.0 * np.pi * np.arange(samples) / samples
    b, t = np.meshgrid(beta, theta, indexing='ij')
    z = np.stack([np.sin(t / 2) * np.cos(b), np.sin(t / 2) * np.sin(b),
                  -np.cos(t / 2)], axis=-1).reshape(-1, 3)
    bi, ti = np.meshgrid(np.arange(meridians), np.arange(samples),
                         indexing='ij')
    antipodes = (((bi + meridians // 2) % meridians) * samples
                 + (samples - ti) % samples).ravel()
    return z, antipodes


def fibonacci_points(count=DEFAULT_FIBONACCI_POINTS):
    """Fibonacci lattice on the upper hemisphere closed under z -> -z."""
    if count % 2:
        raise ScatteringError('Fibonacci point count must be even, got %d'
                              % count)
    half = count // 2
    index = np.arange(half)
    z3 = 1.0 - (index + 0.5) / half
    radius = np.sqrt(1.0 - z3 ** 2)
    phi = index * np.pi * (3.0 - np.sqrt(5.0))
    upper = np.stack([radius * np.cos(phi), radius * np.sin(phi), z3], axis=-1)
    z = np.concatenate([upper, -upper])
    antipodes = np.concatenate([index + half, index])
    return z, antipodes


LAYOUTS = {'meridian': meridian_points, 'fibonacci': fibonacci_points}


@dataclass
class HolonomyData:
    """U(n) holonomies h(z; eta), shape (eta, points, n, n).

    ``source`` transports the data behind the family around other circles;
    families read back from a file have none.
    """
    samples: np.ndarray
    z: np.ndarray
    antipodes: np.ndarray
    eta: np.ndarray
    layout: str
    shape: tuple = ()
    source: object = field(default=None, repr=False, compare=False)

    @property
    def rank(self):
        return self.samples.shape[-1]

    def traces(self):
        return np.trace(self.samples, axis1=-2, axis2=-1)

    def inverse_defect(self):
        """sup |h(-z) h(z) - I|."""
        product = self.samples[:, self.antipodes] @ self.samples
        return float(np.max(np.abs(product - np.eye(self.rank))))

    def unitarity_defect(self):
        product = dagger(self.samples) @ self.samples
        return float(np.max(np.abs(product - np.eye(self.rank))))

    def like(self, samples):
        return HolonomyData(samples, self.z, self.antipodes, self.eta,
                            self.layout, self.shape, self.source)

    def resample(self, layout, **resolution):
        """The same family on another sphere layout."""
        z, antipodes, shape = layout_points(layout, **resolution)
        if self.layout == layout and tuple(self.shape) == shape:
            return self
        if self.source is None:
            raise ScatteringError(
                'Holonomies on the %s layout cannot be resampled without '
                'their characteristic data' % self.layout)
        return self.source(z, antipodes, layout, shape)

    def metadata(self):
        return {'layout': self.layout, 'points': int(self.z.shape[0]),
                'eta': int(self.eta.shape[0]), 'shape': list(self.shape)}


def layout_points(layout=DEFAULT_LAYOUT, **resolution):
    try:
        build = LAYOUTS[layout]
    except KeyError:
        raise ScatteringError('Unknown sphere layout %s' % repr(layout))
    z, antipodes = build(**resolution)
    if layout == 'meridian':
        shape = (resolution.get('meridians', DEFAULT_MERIDIANS),
                 resolution.get('samples', DEFAULT_MERIDIAN_SAMPLES))
    else:
        shape = (z.shape[0],)
    return z, antipodes, shape


def _transport_slice(data, z, eta_index, steps):
    def form(t):
        w, dw = circle_arc(z, t)
        weight = 2.0 * np.imag(np.conj(w) * dw)
        return weight[..., None, None] * data.evaluate(w, eta_index)
    return parallel_transport(form, steps=steps, unitary=True)


class _Transport(object):
    """Holonomies of fixed data around the circles of any layout."""

    def __init__(self, data, steps, threads):
        self.data = data
        self.steps = steps
        self.threads = threads

    def __call__(self, z, antipodes, layout, shape=None):
        data = self.data
        samples = np.empty((data.eta_count, z.shape[0], data.rank,
                            data.rank), dtype=complex)

        def run(chunk):
            for j in range(chunk.start, chunk.stop):
                samples[j] = _transport_slice(data, z, j, self.steps)

        map_chunks(run, data.eta_count, self.threads, chunk=1)
        LOG.info("Holonomy family on %d directions x %d eta samples",
                 z.shape[0], data.eta_count)
        return HolonomyData(samples, z, antipodes, data.eta, layout,
                            shape or (z.shape[0],), self)


def holonomy_family(data, layout=DEFAULT_LAYOUT,
                    steps=DEFAULT_TRANSPORT_STEPS, threads=None, points=None,
                    **resolution):
    """Holonomy of ``data`` around every circle of the sphere layout.

    ``points`` overrides the layout with explicit (z, antipodes) arrays.
    """
    data.check_support()
    if points is None:
        z, antipodes, shape = layout_points(layout, **resolution)
    else:
        z, antipodes = points
        shape = (z.shape[0],)
        layout = 'explicit'
    return _Transport(data, steps, threads)(z, antipodes, layout, shape)


def transported_like(data, holonomy, steps=DEFAULT_TRANSPORT_STEPS,
                     threads=None):
    """Holonomies of ``data`` around the circles of ``holonomy``."""
    return _Transport(data, steps, threads)(
        holonomy.z, holonomy.antipodes, holonomy.layout, holonomy.shape)


def twistor_directions(Z, eta):
    """Unit directions z of real twistors on the beta-plane w2 = e^(i eta) w1.

    With Z = sqrt(det Z) [[a, b], [-conj b, conj a]] and c = i e^(i eta/2),
    b / c is real and z is proportional to (2 a c, b / c); the sign of the
    square root only flips z, which the metric does not see.
    """
    Z = np.asarray(Z, dtype=complex)
    root = np.sqrt(np.linalg.det(Z))
    a = Z[..., 0, 0] / root
    b = Z[..., 0, 1] / root
    c = 1j * np.exp(0.5j * eta)
    w = 2.0 * a * c
    z = np.stack([w.real, w.imag, np.real(b / c)], axis=-1)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


@dataclass
class TwistorMetricSamples:
    """Twistor metric H(z; eta) factorised along a fan of meridians.

    ``fan`` has shape (eta, meridians, samples, n, n) and holds ``band``
    Cayley modes either side of zero; ``samples`` is H at the points of
    ``holonomy``, shape (eta, points, n, n).
    """
    fan: np.ndarray
    fan_holonomy: HolonomyData
    holonomy: HolonomyData
    symmetry_defect: float
    residual: float
    band: int
    samples: np.ndarray = None

    def __post_init__(self):
        eta_count, meridians, count, n, _ = self.fan.shape
        modes = np.fft.fft2(self.fan, axes=(1, 2)) / (meridians * count)
        keep = np.r_[0:self.band + 1, count - self.band:count]
        modes = np.moveaxis(modes[:, :, keep], 2, 1)
        self._modes = modes.reshape(eta_count, len(keep), -1)
        self._t_freqs = np.fft.fftfreq(count, 1.0 / count)[keep]
        self._b_freqs = np.fft.fftfreq(meridians, 1.0 / meridians)
        if self.samples is None:
            if self.holonomy is self.fan_holonomy:
                self.samples = self.fan.reshape(self.holonomy.samples.shape)
            else:
                self.samples = np.stack([
                    self.evaluate(self.holonomy.z, j)
                    for j in range(eta_count)])

    @property
    def rank(self):
        return self.fan.shape[-1]

    @property
    def eta(self):
        return self.holonomy.eta

    def evaluate(self, z, eta_index):
        """H at directions ``z`` of shape (..., 3) by trigonometric
        interpolation in the meridian angle and the Cayley angle."""
        z = np.asarray(z, dtype=float)
        shape = z.shape[:-1]
        z = z.reshape(-1, 3)
        z = z / np.linalg.norm(z, axis=-1, keepdims=True)
        beta = np.arctan2(z[:, 1], z[:, 0])
        t = 2.0 * np.arccos(np.clip(-z[:, 2], -1.0, 1.0))
        n = self.rank
        meridians = self.fan.shape[1]
        out = np.empty((z.shape[0], n, n), dtype=complex)
        for start in range(0, z.shape[0], EVALUATION_BATCH):
            part = slice(start, start + EVALUATION_BATCH)
            along = np.exp(1j * np.outer(t[part], self._t_freqs))
            around = np.exp(1j * np.outer(beta[part], self._b_freqs))
            partial = (along @ self._modes[eta_index]).reshape(
                -1, meridians, n, n)
            out[part] = np.einsum('qb,qbij->qij', around, partial)
        out = 0.5 * (out + dagger(out))
        return out.reshape(shape + (n, n))

    def at_eta(self, eta_index):
        """H on the real twistors of one beta-plane, for Yang's J."""
        eta = float(self.eta[eta_index])

        def func(Z):
            return self.evaluate(twistor_directions(Z, eta), eta_index)

        return HermitianTwistorData(func, self.rank,
                                    name='H(eta=%.4f)' % eta)

    def hermitian_defect(self):
        return float(np.max(np.abs(self.samples - dagger(self.samples))))

    def min_eigenvalue(self):
        return float(min(np.min(np.linalg.eigvalsh(self.fan)),
                         np.min(np.linalg.eigvalsh(self.samples))))

    def metadata(self):
        meta = self.holonomy.metadata()
        meta['symmetry_defect'] = self.symmetry_defect
        meta['band'] = self.band
        meta['fan'] = list(self.fan_holonomy.shape)
        return meta


def twistor_metric(holonomy, meridians=DEFAULT_MERIDIANS,
                   samples=DEFAULT_MERIDIAN_SAMPLES, truncation=None,
                   tolerance=1e-8, threads=None):
    """H = g-* g- from ``h g- = g+`` along every meridian, symmetrised
    between z and -z.

    Families on other layouts are first transported around a fan of
    ``meridians`` x ``samples`` circles; H at their own points comes from
    the interpolated fan.
    """
    if holonomy.layout == 'meridian':
        fan = holonomy
    else:
        fan = holonomy.resample('meridian', meridians=meridians,
                                samples=samples)
    meridians, count = fan.shape
    n = fan.rank
    loops = LoopMatrixFunction(
        fan.samples.reshape((-1, meridians, count, n, n)))
    try:
        result = rhp_factorize(loops, truncation, tolerance, threads)
    except LargeDataJump as e:
        raise LargeDataJump('%s (slices are (eta, meridian))' % e)
    H = hermitian_from_rhp(result).samples
    mirrored = np.roll(H, -(meridians // 2), axis=1)
    mirrored = np.roll(mirrored[:, :, ::-1], 1, axis=2)
    defect = float(np.max(np.abs(H - mirrored)))
    LOG.info("Twistor metric symmetry defect %.3g", defect)
    H = 0.5 * (H + mirrored)
    return TwistorMetricSamples(H, fan, holonomy, defect, result.residual,
                                truncation or count // 4)


def rebuild_holonomy(metric, tolerance=1e-8, threads=None):
    """The fan holonomies recovered from H alone."""
    loops = LoopMatrixFunction(metric.fan)
    h = loop_from_hermitian(loops, tolerance, threads).samples
    return metric.fan_holonomy.like(
        h.reshape(metric.fan_holonomy.samples.shape))


def _diameters(values):
    """Values on the diameters through the centre of a polar grid, shape
    (2 radii - 1, angles, ...); the negative half is the opposite ray."""
    opposite = np.roll(values[1:], -(values.shape[1] // 2), axis=1)[::-1]
    return np.concatenate([opposite, values], axis=0)


def _angular_derivative(values):
    angles = values.shape[1]
    freqs = np.fft.fftfreq(angles, 1.0 / angles)
    freqs[angles // 2] = 0.0
    freqs = freqs.reshape((1, angles) + (1,) * (values.ndim - 2))
    return np.fft.ifft(1j * freqs * np.fft.fft(values, axis=1), axis=1)


def _trig_interpolate(values, phi):
    """Periodic interpolant of samples at 2 pi l / angles along axis 1."""
    angles = values.shape[1]
    modes = np.fft.fft(values, axis=1) / angles
    phases = np.exp(1j * np.outer(phi, np.fft.fftfreq(angles, 1.0 / angles)))
    phases[:, angles // 2] = np.cos(0.5 * angles * phi)
    return np.einsum('qk,qk...->q...', phases, modes)


def _radial_frames(line, radii, step):
    """U along every ray with dU/drho = -A_rho U and U = I at the centre,
    from A_rho on the diameters; RK4 with four-point midpoint values."""
    centre = radii - 1
    n = line.shape[-1]
    U = np.broadcast_to(np.eye(n, dtype=complex), line.shape[1:]).copy()
    frames = np.empty((radii,) + line.shape[1:], dtype=complex)
    frames[0] = U
    for k in range(radii - 1):
        i = centre + k
        start, end = line[i], line[i + 1]
        if i + 2 < line.shape[0]:
            middle = (9.0 * (start + end) - line[i - 1] - line[i + 2]) / 16.0
        else:
            middle = 0.5 * (start + end)
        k1 = -start @ U
        k2 = -middle @ (U + 0.5 * step * k1)
        k3 = -middle @ (U + 0.5 * step * k2)
        k4 = -end @ (U + step * k3)
        U = unitary_part(U + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        frames[k + 1] = U
    return frames


class CollarGrid(object):
    """Polar nodes u = rho e^(i phi) of the beta-plane w2 = e^(i eta) w1.

    On the past side u is the point (u, e^(i eta) u) of the past null
    boundary; on the future side it is its antipode (-1/conj u, ...), in
    chart 1 coordinates (-conj u, -e^(-i eta) conj u).  rho runs from the
    centre (past or future timelike infinity) to 1 and ``rim`` cells
    beyond, across the spacelike infinity circle.
    """

    def __init__(self, eta, side='future', radii=DEFAULT_COLLAR_RADII,
                 angles=DEFAULT_COLLAR_ANGLES, rim=COLLAR_RIM):
        if side not in COLLAR_SIDES:
            raise ScatteringError('Unknown collar side %s' % repr(side))
        if angles % 4 or angles < 4:
            raise ScatteringError('Collar angle count must be a positive '
                                  'multiple of 4, got %d' % angles)
        if radii < 5:
            raise ScatteringError('Collar needs at least 5 radii, got %d'
                                  % radii)
        self.eta = float(eta)
        self.side = side
        self.radii = radii
        self.angles = angles
        self.rim = rim
        self.step = 1.0 / (radii - 1)
        self.rho = self.step * np.arange(radii + rim)
        self.phi = 2.0 * np.pi * np.arange(angles) / angles
        self.u = self.rho[:, None] * np.exp(1j * self.phi)[None, :]

    def __repr__(self):
        return 'CollarGrid(eta=%.4f, side=%s, radii=%d, angles=%d)' % (
            self.eta, self.side, self.radii, self.angles)

    @property
    def shape(self):
        return (self.radii + self.rim, self.angles)

    def inside(self):
        """Nodes on the closed unit disc."""
        return np.broadcast_to(self.rho[:, None] <= 1.0 + 1e-12, self.shape)

    def x(self):
        if self.side == 'past':
            return spinor_from_chart(0, self.u)
        return spinor_from_chart(1, -np.conj(self.u))

    def y(self):
        twist = np.exp(1j * self.eta)
        if self.side == 'past':
            return spinor_from_chart(0, twist * self.u)
        return spinor_from_chart(1, -np.conj(twist * self.u))

    def _expand(self, array, values):
        return array.reshape(array.shape + (1,) * (values.ndim - 2))

    def polar_derivatives(self, values):
        """d/drho and (1/rho) d/dphi; at the centre the second is the
        radial derivative a quarter turn on."""
        values = np.asarray(values, dtype=complex)
        radial = _first_difference(_diameters(values), 0, self.step, 4)
        radial = radial[self.shape[0] - 1:]
        angular = np.empty_like(radial)
        angular[1:] = (_angular_derivative(values)[1:]
                       / self._expand(self.rho[1:, None], values))
        angular[0] = np.roll(radial[0], -(self.angles // 4), axis=0)
        return radial, angular

    def derivative(self, values, index, order=None):
        """d/dv, d/dvbar (index 0, 1) for the holomorphic coordinate v of
        the beta-plane, v = u in the past and v = -conj u in the future.
        Indices 2 and 3 are transverse and vanish on the collar."""
        values = np.asarray(values, dtype=complex)
        if index >= 2:
            return np.zeros_like(values)
        radial, angular = self.polar_derivatives(values)
        phase = self._expand(np.exp(1j * self.phi)[None, :], values)
        d_u = 0.5 * np.conj(phase) * (radial - 1j * angular)
        d_ubar = 0.5 * phase * (radial + 1j * angular)
        if self.side == 'past':
            return d_u if index == 0 else d_ubar
        return -d_ubar if index == 0 else -d_u

    def radial_gauge(self, connection):
        """Angular component A_phi of ``connection`` in the frame
        parallel-propagated along the rays from the centre, where the
        radial component vanishes; shape (radii + rim, angles, n, n)."""
        A = connection.components
        if self.side == 'past':
            A_u, A_ubar = A[0], A[1]
        else:
            A_u, A_ubar = -A[1], -A[0]
        phase = np.exp(1j * self.phi)[None, :, None, None]
        rho = self.rho[:, None, None, None]
        A_rho = A_u * phase + A_ubar * np.conj(phase)
        A_phi = 1j * rho * (A_u * phase - A_ubar * np.conj(phase))
        U = _radial_frames(_diameters(A_rho), self.shape[0], self.step)
        Uinv = dagger(U)
        return Uinv @ A_phi @ U + Uinv @ _angular_derivative(U)


class CollarData(object):
    """Data sampled on collar nodes, one beta-plane per eta.

    ``angular`` is the component A_phi of the connection in the radial
    gauge, shape (eta, radii + rim, angles, n, n).  On the beta-plane the
    data form restricts to 2 rho^2 d phi, so the data themselves are
    A_phi / (2 rho^2).
    """

    def __init__(self, angular, eta, radii, rim=COLLAR_RIM):
        angular = np.asarray(angular, dtype=complex)
        if angular.ndim != 5 or angular.shape[1] != radii + rim:
            raise ScatteringError('Collar samples must have shape (eta, %d, '
                                  'angles, rank, rank), got %s'
                                  % (radii + rim, repr(angular.shape)))
        self.angular = angular
        self.eta = np.asarray(eta, dtype=float)
        self.radii = radii
        self.rim = rim
        self.step = 1.0 / (radii - 1)
        self.rho = self.step * np.arange(radii + rim)
        nodes = self.coefficients()
        self._splines = [self._spline(nodes[j])
                         for j in range(self.eta_count)]

    def __repr__(self):
        return 'CollarData(rank=%d, eta=%d, radii=%d, angles=%d)' % (
            self.rank, self.eta_count, self.radii, self.angles)

    @property
    def rank(self):
        return self.angular.shape[-1]

    @property
    def eta_count(self):
        return self.angular.shape[0]

    @property
    def angles(self):
        return self.angular.shape[2]

    def grid(self, eta_index, side='future'):
        return CollarGrid(self.eta[eta_index], side, self.radii,
                          self.angles, self.rim)

    @classmethod
    def from_characteristic(cls, data, radii=DEFAULT_COLLAR_RADII,
                            angles=DEFAULT_COLLAR_ANGLES, rim=COLLAR_RIM):
        """Modal data on collar nodes, as A_phi = 2 rho^2 A(u)."""
        grid = CollarGrid(0.0, 'past', radii, angles, rim)
        weight = 2.0 * grid.rho[:, None, None, None] ** 2
        angular = np.stack([weight * data.evaluate(grid.u, j)
                            for j in range(data.eta_count)])
        return cls(angular, data.eta, radii, rim)

    def inside(self):
        return self.angular[:, self.rho <= 1.0 + 1e-12]

    def coefficients(self):
        """A_phi / (2 rho^2) on the nodes, the centre extrapolated from the
        even part of the first two rings."""
        values = np.empty_like(self.angular)
        rho = self.rho[1:, None, None, None]
        values[:, 1:] = self.angular[:, 1:] / (2.0 * rho ** 2)
        half = self.angles // 2
        even = 0.5 * (values[:, 1:3] + np.roll(values[:, 1:3], -half,
                                               axis=2))
        centre = np.mean((4.0 * even[:, 0] - even[:, 1]) / 3.0, axis=1)
        values[:, 0] = centre[:, None]
        return values

    def _spline(self, nodes):
        line = _diameters(nodes)
        s = self.step * np.arange(-(len(self.rho) - 1), len(self.rho))
        return (CubicSpline(s, line.real, axis=0),
                CubicSpline(s, line.imag, axis=0))

    def evaluate(self, w, eta_index):
        """Data at points ``w`` of the disc, shape (..., rank, rank)."""
        w = np.asarray(w, dtype=complex)
        flat = w.reshape(-1)
        r = np.abs(flat)
        if r.size and r.max() > self.rho[-1] + 1e-12:
            raise ScatteringError('Collar data end at radius %.4f, asked '
                                  'for %.4f' % (self.rho[-1], r.max()))
        real, imag = self._splines[eta_index]
        values = _trig_interpolate(real(r) + 1j * imag(r), np.angle(flat))
        return values.reshape(w.shape + (self.rank, self.rank))

    def metadata(self):
        return {'rank': self.rank, 'eta': self.eta_count,
                'radii': self.radii, 'angles': self.angles, 'rim': self.rim}


def reconstruct_collar(metric, side='future', radii=DEFAULT_COLLAR_RADII,
                       angles=DEFAULT_COLLAR_ANGLES,
                       loop_samples=DEFAULT_COLLAR_LOOP_SAMPLES,
                       tolerance=1e-8, threads=None):
    """Yang's J from H on the collar of every beta-plane, and its
    connection in the radial gauge from the centre.

    The future side gives the final data, the past side recovers the
    incoming data up to a constant gauge.
    """
    parts = []
    worst = 0.0
    for j, eta in enumerate(metric.eta):
        grid = CollarGrid(eta, side, radii, angles)
        J = reconstruct_J(metric.at_eta(j), grid, loop_samples, threads,
                          tolerance, check_sampling=False)
        lowest = J.min_eigenvalue()
        if lowest <= 0.0:
            raise ScatteringError('J is not positive definite on the %s '
                                  'collar at eta %.4f (%.3g)'
                                  % (side, eta, lowest))
        A = connection_from_J(J, 'unitary')
        parts.append(grid.radial_gauge(A))
        worst = max(worst, J.residual)
    LOG.info("Reconstructed the %s collar on %d beta-planes, worst "
             "residual %.3g", side, len(parts), worst)
    return CollarData(np.stack(parts), metric.eta, radii)


def gauge_aligned_distance(first, second, restarts=4, seed=0):
    """min over constant g in SU(n) of the RMS of g B g^-1 + A, for samples
    B = ``first`` and A = ``second`` of shape (..., n, n)."""
    B = np.asarray(first)
    A = np.asarray(second)
    n = B.shape[-1]
    if n == 1:
        return float(np.sqrt(np.mean(np.abs(B + A) ** 2)))
    basis = hermitian_basis(n)[1:]

    def distance(x):
        g = expm(1j * np.einsum('a,aij->ij', x, basis))
        return float(np.sqrt(np.mean(np.abs(g @ B @ dagger(g) + A) ** 2)))

    rng = np.random.default_rng(seed)
    starts = [np.zeros(len(basis))] + [rng.normal(scale=np.pi, size=len(basis))
                                       for _ in range(restarts)]
    best = min(minimize(distance, x0, method='BFGS').fun for x0 in starts)
    return float(min(best, distance(np.zeros(len(basis)))))


def sign_reversal(a_plus, a_minus):
    """Distance of the final data from minus the incoming data, up to a
    constant gauge, over the collar nodes inside the unit disc."""
    reference = CollarData.from_characteristic(a_minus, a_plus.radii,
                                               a_plus.angles, a_plus.rim)
    return gauge_aligned_distance(a_plus.inside(), reference.inside())


@dataclass
class ScatteringResult:
    a_plus: CollarData
    holonomy: HolonomyData
    metric: TwistorMetricSamples
    rebuilt: HolonomyData
    recovered: CollarData
    roundtrip: HolonomyData
    final: HolonomyData
    diagnostics: list = field(default_factory=list)

    def diagnostic(self, name):
        for row in self.diagnostics:
            if row[0] == name:
                return row[1]
        raise KeyError(name)

    @property
    def passed(self):
        return all(row[3] for row in self.diagnostics)


DEFAULT_TOLERANCES = {
    'holonomy_inverse_defect': 1e-6,
    'metric_symmetry_defect': 1e-6,
    'metric_min_eigenvalue': 0.0,
    'rebuild_defect': 1e-6,
    'holonomy_roundtrip': 1e-3,
    'final_trace_defect': 1e-4,
    'alpha_plane_total': 1e-3,
    'abelian_sign_reversal': 1e-5,
}


def _check(name, value, tolerances, lower=False):
    tolerance = tolerances.get(name, DEFAULT_TOLERANCES[name])
    passed = value > tolerance if lower else value <= tolerance
    return (name, float(value), float(tolerance), bool(passed))


def alpha_plane_total(holonomy, final):
    """sup |tr(h(z) hol+(z)) - n|: the incoming half-holonomy composed
    with the outgoing one around each alpha-plane curve."""
    product = holonomy.samples @ final.samples
    return float(np.max(np.abs(np.trace(product, axis1=-2, axis2=-1)
                               - holonomy.rank)))


def holonomy_roundtrip(holonomy, recovered):
    """sup |tr(h_recovered) - tr(h)| over all circles and eta."""
    return float(np.max(np.abs(recovered.traces() - holonomy.traces())))


def final_trace_defect(holonomy, final):
    """sup |tr(hol+) - tr(h^-1)| over all circles and eta."""
    inverse = np.trace(dagger(holonomy.samples), axis1=-2, axis2=-1)
    return float(np.max(np.abs(final.traces() - inverse)))


def _resolution(layout, points, meridians, samples):
    if layout == 'meridian':
        return {'meridians': meridians, 'samples': samples}
    if layout == 'fibonacci':
        return {'count': points}
    raise ScatteringError('Unknown sphere layout %s' % repr(layout))


def _incoming(a_minus, layout, points, meridians, samples, steps, threads):
    holonomy = holonomy_family(a_minus, layout, steps, threads,
                               **_resolution(layout, points, meridians,
                                             samples))
    metric = twistor_metric(holonomy, meridians, samples, threads=threads)
    return holonomy, metric


def scatter(a_minus, layout=DEFAULT_LAYOUT, points=DEFAULT_FIBONACCI_POINTS,
            meridians=DEFAULT_MERIDIANS, samples=DEFAULT_MERIDIAN_SAMPLES,
            steps=DEFAULT_TRANSPORT_STEPS, radii=DEFAULT_COLLAR_RADII,
            angles=DEFAULT_COLLAR_ANGLES,
            loop_samples=DEFAULT_COLLAR_LOOP_SAMPLES, tolerances=None,
            threads=None):
    """Run the whole pipeline from past data to pulled-back final data.

    Holonomies live on ``layout`` (``points`` Fibonacci nodes, or the
    meridian fan itself); the twistor metric is factorised on a fan of
    ``meridians`` x ``samples`` circles and J is reconstructed on collars
    of ``radii`` x ``angles`` nodes from ``loop_samples`` twistors each.
    """
    tolerances = tolerances or {}
    holonomy, metric = _incoming(a_minus, layout, points, meridians,
                                 samples, steps, threads)
    rebuilt = rebuild_holonomy(metric, threads=threads)
    collar = {'radii': radii, 'angles': angles,
              'loop_samples': loop_samples, 'threads': threads}
    recovered = reconstruct_collar(metric, 'past', **collar)
    a_plus = reconstruct_collar(metric, 'future', **collar)
    roundtrip = transported_like(recovered, holonomy, steps, threads)
    final = transported_like(a_plus, holonomy, steps, threads)
    diagnostics = [
        _check('holonomy_inverse_defect', holonomy.inverse_defect(),
               tolerances),
        _check('metric_symmetry_defect', metric.symmetry_defect, tolerances),
        _check('metric_min_eigenvalue', metric.min_eigenvalue(), tolerances,
               lower=True),
        _check('rebuild_defect', np.max(np.abs(
            rebuilt.samples - metric.fan_holonomy.samples)), tolerances),
        _check('holonomy_roundtrip', holonomy_roundtrip(holonomy, roundtrip),
               tolerances),
        _check('final_trace_defect', final_trace_defect(holonomy, final),
               tolerances),
        _check('alpha_plane_total', alpha_plane_total(holonomy, final),
               tolerances),
    ]
    if a_minus.rank == 1:
        diagnostics.append(_check('abelian_sign_reversal',
                                  sign_reversal(a_plus, a_minus),
                                  tolerances))
    for row in diagnostics:
        LOG.info("%s = %.3g (tolerance %.3g) %s", row[0], row[1], row[2],
                 'pass' if row[3] else 'FAIL')
    return ScatteringResult(a_plus, holonomy, metric, rebuilt, recovered,
                            roundtrip, final, diagnostics)


def holonomy_roundtrip_check(a_minus, layout=DEFAULT_LAYOUT,
                             points=DEFAULT_FIBONACCI_POINTS,
                             meridians=DEFAULT_MERIDIANS,
                             samples=DEFAULT_MERIDIAN_SAMPLES,
                             steps=DEFAULT_TRANSPORT_STEPS,
                             radii=DEFAULT_COLLAR_RADII,
                             angles=DEFAULT_COLLAR_ANGLES,
                             loop_samples=DEFAULT_COLLAR_LOOP_SAMPLES,
                             threads=None):
    """sup |tr(h_recovered) - tr(h)| with h_recovered the holonomies of the
    connection reconstructed from H on the past collars."""
    holonomy, metric = _incoming(a_minus, layout, points, meridians,
                                 samples, steps, threads)
    recovered = reconstruct_collar(metric, 'past', radii, angles,
                                   loop_samples, threads=threads)
    roundtrip = transported_like(recovered, holonomy, steps, threads)
    return holonomy_roundtrip(holonomy, roundtrip)
