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

import json

import numpy as np
import pytest

from split_twistor import persistence


def test_container_round_trip(tmp_path, rng):
    values = rng.normal(size=(3, 4, 2, 2)) + 1j * rng.normal(size=(3, 4, 2, 2))
    path = str(tmp_path / 'out' / 'field.json')
    meta = persistence.write_container(path, values, kind='j-matrix', grid=4)
    loaded, loaded_meta = persistence.read_container(path)
    assert np.array_equal(loaded, values)
    assert loaded_meta == meta
    assert meta['rank'] == 2
    assert meta['shape'] == [3, 4, 2, 2]
    assert meta['version'] == persistence.CONTAINER_VERSION
    again = str(tmp_path / 'again.json')
    persistence.write_container(again, values, kind='j-matrix', grid=4)
    assert persistence.same_container(persistence.read_container(path),
                                      persistence.read_container(again))


def test_containers_differ_by_values(tmp_path):
    first = str(tmp_path / 'a.json')
    second = str(tmp_path / 'b.json')
    persistence.write_container(first, np.eye(2))
    persistence.write_container(second, 2 * np.eye(2))
    assert not persistence.same_container(persistence.read_container(first),
                                          persistence.read_container(second))


def test_explicit_rank(tmp_path):
    path = str(tmp_path / 'scalar.json')
    meta = persistence.write_container(path, np.arange(5.0), rank=1)
    assert meta['rank'] == 1
    values, _ = persistence.read_container(path)
    assert np.array_equal(values, np.arange(5.0))


@pytest.mark.parametrize("body", [
    {'metadata': {'version': 'other/0', 'shape': [1]}, 'data': [[0, 0]]},
    {'metadata': {'version': persistence.CONTAINER_VERSION, 'shape': [3]},
     'data': [[0, 0]]},
    {'values': []},
    [1, 2, 3],
])
def test_bad_containers(tmp_path, body):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps(body))
    with pytest.raises(persistence.PersistenceError):
        persistence.read_container(str(path))


def test_container_must_be_json(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text('not json')
    with pytest.raises(persistence.PersistenceError):
        persistence.read_container(str(path))


def test_diagnostics_round_trip(tmp_path):
    rows = [('wave_residual', 3.5e-7, 1e-4, True),
            ('asd_residual', 0.25, 5e-2, False)]
    path = str(tmp_path / 'diagnostics.csv')
    persistence.write_diagnostics(path, rows)
    assert persistence.read_diagnostics(path) == rows
    with open(path) as f:
        assert f.readline().strip() == 'check,value,tolerance,pass'


def test_diagnostics_header_is_checked(tmp_path):
    path = tmp_path / 'diagnostics.csv'
    path.write_text('name,value\nx,1\n')
    with pytest.raises(persistence.PersistenceError):
        persistence.read_diagnostics(str(path))


def test_diagnostics_pass_column_is_checked(tmp_path):
    path = tmp_path / 'diagnostics.csv'
    path.write_text('check,value,tolerance,pass\nx,1.0,2.0,maybe\n')
    with pytest.raises(persistence.PersistenceError):
        persistence.read_diagnostics(str(path))


def test_grid_field_table(tmp_path, small_grid):
    values = np.abs(small_grid.full(small_grid.w1)) ** 2
    path = str(tmp_path / 'phi.csv')
    persistence.write_grid_field(path, small_grid, values)
    table = persistence.read_table(path, persistence.GRID_FIELDS)
    assert table.shape == (small_grid.node_count, 8)
    assert np.array_equal(table[:, 0], np.arange(small_grid.node_count))
    assert np.allclose(table[:, 2] ** 2 + table[:, 3] ** 2, table[:, 7])
    assert set(table[:, 1]) == {0.0, 1.0}


def test_sphere_field_table(tmp_path, small_grid):
    path = str(tmp_path / 'sphere.csv')
    persistence.write_sphere_field(path, small_grid,
                                   np.ones(small_grid.shape))
    table = persistence.read_table(path, persistence.SPHERE_FIELDS)
    assert table.shape == (small_grid.node_count, 5)
    assert np.all(table[:, 4] == 1.0)
    assert np.all((table[:, 0] >= 0) & (table[:, 0] <= np.pi))


def test_read_table_rejects_text(tmp_path):
    path = tmp_path / 'table.csv'
    path.write_text('check,value,tolerance,pass\nx,1.0,2.0,true\n')
    with pytest.raises(persistence.PersistenceError):
        persistence.read_table(str(path), persistence.DIAGNOSTIC_FIELDS)
