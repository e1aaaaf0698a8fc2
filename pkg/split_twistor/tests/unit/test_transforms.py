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

from split_twistor import transforms
from split_twistor.geometry import SpacetimePoint, twistor_from_affine
from split_twistor.tests.unit import mock_twistor_data
from split_twistor.transforms import TwistorScalarFunction
from split_twistor.ward import compare_forms, maxwell_from_scalar_J


@pytest.fixture(scope='module')
def quartic():
    return transforms.harmonic_function(4, seed=1)


def test_harmonic_functions_are_projective(quartic):
    assert quartic.check_homogeneity() < 1e-10
    with pytest.raises(transforms.TransformError):
        transforms.harmonic_function(3)


def test_scale_test_catches_wrong_degree():
    f = TwistorScalarFunction(lambda Z: np.abs(Z[..., 0, 0]) ** 2,
                              name='modulus')
    with pytest.raises(transforms.HomogeneityError):
        f.check_homogeneity()
    TwistorScalarFunction(f.func, degree=2).check_homogeneity()


def test_unit_quaternion_is_a_unit_vector(rng):
    Z = transforms.random_real_twistors(rng, 10)
    q = transforms.unit_quaternion(Z)
    assert np.allclose(np.linalg.norm(q, axis=-1), 1.0)
    U = twistor_from_affine(np.array([0.0, 0.6]), np.array([0.0, 0.0]))
    assert np.allclose(np.abs(transforms.unit_quaternion(U)), [1, 0, 0, 0])


@pytest.mark.parametrize("orientation", [1, -1])
def test_xray_of_a_constant(orientation):
    p = SpacetimePoint.from_stereographic(0.4 - 0.2j, 1.3j)
    f = TwistorScalarFunction.constant(0.7)
    assert transforms.xray(f, p, orientation=orientation) == \
        pytest.approx(0.7 * orientation)
    assert abs(transforms.gprime0(f, p)) < 1e-14


@pytest.mark.parametrize("w1,w2", mock_twistor_data.stereographic_points)
def test_reversed_circle_is_the_antipodal_circle(quartic, w1, w2):
    p = SpacetimePoint.from_stereographic(w1, w2)
    q = p.antipode()
    backwards = transforms.loop_values(quartic, p.x.as_array(),
                                       p.y.as_array(), 32, orientation=-1)
    forwards = transforms.loop_values(quartic, q.x.as_array(),
                                      q.y.as_array(), 32)
    assert np.allclose(backwards, forwards, rtol=0, atol=1e-12)


@pytest.mark.parametrize("w1,w2", mock_twistor_data.stereographic_points)
def test_xray_is_odd_on_oriented_lines(quartic, w1, w2):
    p = SpacetimePoint.from_stereographic(w1, w2)
    q = p.antipode()
    assert transforms.xray(quartic, p, orientation=-1) == \
        pytest.approx(-transforms.xray(quartic, q), abs=1e-12)
    assert transforms.xray(quartic, q, orientation=-1) == \
        pytest.approx(-transforms.xray(quartic, p), abs=1e-12)


def test_xray_rejects_other_orientations(quartic):
    p = SpacetimePoint.from_stereographic(0.1, 0.2)
    with pytest.raises(transforms.TransformError):
        transforms.xray(quartic, p, orientation=0)


def test_xray_needs_degree_zero():
    p = SpacetimePoint.from_stereographic(0.1, 0.2)
    f = TwistorScalarFunction(lambda Z: np.ones(np.shape(Z)[:-2]), degree=2)
    with pytest.raises(transforms.HomogeneityError):
        transforms.xray(f, p)


def test_xray_is_linear(quartic):
    p = SpacetimePoint.from_stereographic(0.4 - 0.2j, 1.3j)
    other = transforms.harmonic_function(2, seed=5)
    total = transforms.xray(quartic + other.scaled(-2.5), p)
    parts = transforms.xray(quartic, p) - 2.5 * transforms.xray(other, p)
    assert total == pytest.approx(parts, abs=1e-12)
    assert transforms.gprime0(quartic.scaled(3.0), p) == \
        pytest.approx(3.0 * transforms.gprime0(quartic, p), abs=1e-12)


def test_xray_on_a_grid_matches_points(small_grid, quartic):
    phi = transforms.xray(quartic, small_grid, M=32, threads=2)
    assert phi.shape == small_grid.shape
    index = (0, 3, 5, 1, 2, 6)
    p = SpacetimePoint.from_stereographic(small_grid.sphere.w[index[:3]],
                                          small_grid.sphere.w[index[3:]],
                                          index[0], index[3])
    assert phi[index] == pytest.approx(transforms.xray(quartic, p, M=32))


def test_xray_solves_the_wave_equation(small_grid, quartic):
    field = transforms.xray_field(quartic, M=32)
    residual = transforms.wave_residual(field, small_grid)
    assert residual / transforms.scalar_norm(field, small_grid) < 1e-5


def test_wave_residual_is_second_order_in_the_step(small_grid, quartic):
    field = transforms.xray_field(quartic, M=32)
    coarse, fine = [transforms.wave_residual(field, small_grid, step=h,
                                             order=2)
                    for h in (4e-2, 2e-2)]
    assert np.log2(coarse / fine) >= 1.8


def test_wave_residual_rejects_other_functions(small_grid):
    def field(c1, w1, c2, w2):
        return np.abs(w1) ** 2 + 0.0 * np.real(w2)

    residual = transforms.wave_residual(field, small_grid)
    assert residual / transforms.scalar_norm(field, small_grid) > 0.1


@pytest.mark.parametrize("w1,w2", mock_twistor_data.stereographic_points)
def test_maxwell_field_is_closed(quartic, w1, w2):
    assert transforms.closedness_residual(quartic, 0, w1, 0, w2) < 1e-2


def test_maxwell_field_needs_the_affine_chart(quartic):
    p = SpacetimePoint.from_stereographic(0.3, 1.5)
    with pytest.raises(transforms.ChartBoundary):
        transforms.maxwell_asd(quartic, p)


def test_maxwell_field_is_linear(quartic):
    p = SpacetimePoint.from_stereographic(1.5 + 0.2j, 0.3 - 0.1j)
    other = transforms.harmonic_function(2, seed=5)
    total = transforms.maxwell_asd(quartic + other, p)
    parts = transforms.maxwell_asd(quartic, p) + transforms.maxwell_asd(
        other, p)
    assert np.allclose(total, parts, atol=1e-6)


def _pole_difference(Z):
    """|Z00|^2 - |Z01|^2 over their sum; its X-ray is n3 * m3."""
    a = np.abs(Z[..., 0, 0]) ** 2
    b = np.abs(Z[..., 0, 1]) ** 2
    return (a - b) / (a + b)


def test_integral_formula_ratio_at_the_origin_of_the_chart():
    # x at the south pole (chart 1), y at the north pole: X = 0 there, the
    # Ward potential is -nu(w1) nu(w2) with nu = (1 - |w|^2) / (1 + |w|^2)
    f = TwistorScalarFunction(_pole_difference, name='pole difference')
    reference = transforms.maxwell_form(f, 1, 0j, 0, 0j)
    candidate = maxwell_from_scalar_J(f, 1, 0j, 0, 0j)
    assert candidate[1, 0] == pytest.approx(2.0, rel=1e-3)
    assert candidate[3, 2] == pytest.approx(2.0, rel=1e-3)
    assert reference[1, 0] == pytest.approx(4j, rel=1e-6)
    assert reference[3, 2] == pytest.approx(4j, rel=1e-6)
    assert compare_forms(reference, candidate) < 1e-3


@pytest.mark.parametrize("w1,w2", mock_twistor_data.stereographic_points)
def test_ward_and_integral_formula_agree(quartic, w1, w2):
    reference = transforms.maxwell_form(quartic, 0, w1, 0, w2)
    candidate = maxwell_from_scalar_J(quartic, 0, w1, 0, w2)
    assert compare_forms(reference, candidate) < 1e-2
    assert compare_forms(reference, candidate, ratio=-2j) > 1.0


@pytest.mark.parametrize("w1,w2", mock_twistor_data.stereographic_points)
def test_ward_field_converges_to_the_integral_formula(w1, w2):
    f = transforms.harmonic_function(4, seed=7)
    reference = transforms.maxwell_form(f, 0, w1, 0, w2)
    coarse, fine = [
        compare_forms(reference,
                      maxwell_from_scalar_J(f, 0, w1, 0, w2, step=step))
        for step in (4e-2, 2e-2)]
    assert np.log2(coarse / fine) >= 1.8
