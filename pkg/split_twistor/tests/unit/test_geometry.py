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

from split_twistor import geometry
from split_twistor.geometry import DiscParam, SpacetimePoint
from split_twistor.tests.unit import mock_twistor_data


@pytest.mark.parametrize("w", [0.0, 0.3 + 0.2j, -2.0j, 5.0 - 1.0j])
def test_hat_squares_to_minus_one(w):
    v = geometry.spinor_from_chart(0, w)
    assert np.allclose(geometry.hat_array(geometry.hat_array(v)), -v)
    assert abs(geometry.contract(v, geometry.hat_array(v)) - 1.0) < 1e-14


@pytest.mark.parametrize("w", [0.3 + 0.2j, -2.0j, 5.0 - 1.0j])
def test_hat_is_the_antipodal_map(w):
    v = geometry.spinor_from_chart(0, w)
    n = geometry.cartesian(v)
    assert np.allclose(geometry.cartesian(geometry.hat_array(v)), -n)
    assert abs(np.linalg.norm(n) - 1.0) < 1e-14


@pytest.mark.parametrize("w", [0.3 + 0.2j, -2.0j, 5.0 - 1.0j])
def test_charts_agree_on_overlap(w):
    first = geometry.cartesian(geometry.spinor_from_chart(0, w))
    second = geometry.cartesian(geometry.spinor_from_chart(1, 1.0 / w))
    assert np.allclose(first, second)


def test_chart_coordinate_prefers_the_smaller_coordinate():
    chart, w = geometry.chart_coordinate(geometry.spinor_from_chart(1, 0.5j))
    assert chart == 1
    assert abs(w - 0.5j) < 1e-14
    chart, w = geometry.chart_coordinate(geometry.spinor_from_chart(1, 2.0))
    assert chart == 0
    assert abs(w - 0.5) < 1e-14


@pytest.mark.parametrize("lam", mock_twistor_data.interior_disc)
def test_incidence_inverts_on_the_open_disc(lam):
    p = SpacetimePoint.from_stereographic(0.3 + 0.2j, -0.5j)
    Z = geometry.incidence(p, DiscParam(1.0, lam))
    q, d = geometry.point_from_twistor(Z)
    assert np.allclose(q.x.as_array(), p.x.as_array())
    assert np.allclose(q.y.as_array(), p.y.as_array())
    assert abs(d.affine - lam) < 1e-12


def test_boundary_twistors_are_real():
    p = SpacetimePoint.from_stereographic(0.7 - 0.1j, 1.5j, 0, 1)
    loop = geometry.boundary_loop(p.x.as_array(), p.y.as_array(), 32)
    assert loop.shape == (32, 2, 2)
    assert np.max(geometry.reality_defect(loop)) < 1e-12
    Z = geometry.incidence(p, DiscParam.boundary(0.7))
    assert Z.is_real()
    with pytest.raises(geometry.RealTwistorInput):
        geometry.point_from_twistor(Z)


def test_reversed_circle_is_the_antipodal_line():
    p = SpacetimePoint.from_stereographic(0.7 - 0.1j, 0.4 + 0.3j)
    reversed_loop = geometry.boundary_circle(p, 16, orientation=-1)
    far_loop = geometry.boundary_circle(geometry.antipode(p), 16)
    phase = np.exp(2j * np.pi * np.arange(16) / 16)
    assert np.allclose(far_loop, phase[:, None, None] * reversed_loop)


def test_interior_twistors_are_not_real():
    p = SpacetimePoint.from_stereographic(0.1, 0.2)
    assert not geometry.incidence(p, DiscParam(1.0, 0.5)).is_real()


def test_disc_parameter_outside_the_disc():
    with pytest.raises(geometry.GeometryError):
        DiscParam(1.0, 1.5)


def test_antipode_is_an_involution():
    p = SpacetimePoint.from_stereographic(0.3 + 0.2j, -0.5j)
    twice = geometry.antipode(geometry.antipode(p)).canonical()
    assert np.allclose(twice.x.as_array(), p.x.as_array())
    assert np.allclose(twice.y.as_array(), p.y.as_array())
    far = geometry.antipode(p)
    assert np.allclose(geometry.cartesian(far.x.as_array()),
                       -geometry.cartesian(p.x.as_array()))


def test_coordinates_refuse_far_chart():
    p = SpacetimePoint.from_stereographic(0.5, 0.2)
    assert np.allclose(p.coordinates(), (0.5, 0.2))
    with pytest.raises(geometry.ChartOverflow):
        p.coordinates(charts=(1, 0))


def test_metric_has_split_signature():
    p = SpacetimePoint.from_stereographic(0.0, 0.0)
    assert geometry.metric_eval(p, [1.0, 1.0, 0.0, 0.0]) == pytest.approx(4.0)
    assert geometry.metric_eval(p, [0.0, 0.0, 1.0, 1.0]) == pytest.approx(-4.0)
    assert geometry.metric_eval(p, [1.0, 1.0, 1.0, 1.0]) == pytest.approx(0.0)


def test_self_dual_and_anti_self_dual_forms_are_orthogonal():
    p = SpacetimePoint.from_stereographic(0.6 - 0.3j, 0.9j)
    w1, w2 = p.coordinates()
    rho1 = 1.0 + abs(w1) ** 2
    rho2 = 1.0 + abs(w2) ** 2
    sd, asd = geometry.sd_asd_bases(p)
    assert sd.shape == (3, 4, 4)
    for i in range(3):
        for j in range(3):
            assert abs(geometry.form_pairing(sd[i], asd[j], rho1,
                                             rho2)) < 1e-12
    assert abs(geometry.form_pairing(sd[2], sd[2], rho1, rho2)) > 1.0


def test_affine_twistor_coordinates():
    omega = np.array([0.6, -0.2])
    pi = np.array([0.5, 0.9])
    scale = np.sqrt(omega @ omega + 0.5 * pi @ pi)
    Z = geometry.twistor_from_affine(omega, pi)
    assert geometry.reality_defect(Z) < 1e-14
    back_omega, back_pi = geometry.twistor_affine(Z)
    assert np.allclose(back_omega * scale, omega)
    assert np.allclose(back_pi * scale, pi)


def test_affine_coordinates_are_singular_on_the_chart_boundary():
    x = geometry.spinor_from_chart(0, 1.5)
    y = geometry.spinor_from_chart(0, 0.5)
    X = geometry.affine_coords(x, y)
    assert np.all(np.isfinite(X))
    with np.errstate(divide='ignore', invalid='ignore'):
        edge = geometry.affine_coords(x, geometry.spinor_from_chart(0, -1.5))
    assert not np.all(np.isfinite(edge))
