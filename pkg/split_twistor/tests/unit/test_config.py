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
import os

import mock
import pytest

from split_twistor import config


def _write(tmp_path, tree):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps(tree))
    return str(path)


def test_defaults_validate():
    loaded = config.load_config()
    assert loaded == config.DEFAULTS
    assert loaded is not config.DEFAULTS


def test_file_values_merge_over_defaults(tmp_path):
    tolerances = {'rebuild_defect': 1e-4}
    path = _write(tmp_path, {'seed': 7, 'scatter': {
        'rank': 1, 'tolerances': tolerances}})
    loaded = config.load_config(path)
    assert loaded['seed'] == 7
    assert loaded['scatter']['rank'] == 1
    assert loaded['scatter']['tolerances']['rebuild_defect'] == 1e-4
    assert loaded['scatter']['tolerances']['holonomy_roundtrip'] == 1e-3
    assert config.DEFAULTS['scatter']['rank'] == 2


def test_overrides_win_over_file(tmp_path):
    path = _write(tmp_path, {'threads': 2})
    loaded = config.load_config(path, {'threads': 3})
    assert loaded['threads'] == 3


@pytest.mark.parametrize("tree,dotted", [
    ({'colour': 'red'}, 'colour'),
    ({'xray': {'grid': 8}}, 'xray.grid'),
    ({'scatter': {'tolerances': {'speed': 1.0}}}, 'scatter.tolerances.speed'),
])
def test_unknown_keys_name_their_path(tree, dotted):
    with pytest.raises(config.ConfigError) as e:
        config.load_config(overrides=tree)
    assert dotted in str(e.value)


def test_section_must_be_a_mapping():
    with pytest.raises(config.ConfigError):
        config.load_config(overrides={'xray': 4})


@pytest.mark.parametrize("tree", [
    {'xray': {'quadrature': 48}},
    {'reconstruct': {'loop_samples': 8}},
    {'example': {'grid_size': 6}},
    {'xray': {'wave_step': 0}},
    {'scatter': {'amplitude': -0.1}},
    {'scatter': {'rank': 5}},
    {'reconstruct': {'rank': 1.5}},
    {'threads': 0},
    {'scatter': {'meridians': 7}},
    {'scatter': {'points': 33}},
    {'scatter': {'angles': 30}},
    {'scatter': {'radii': 3}},
    {'scatter': {'loop_samples': 100}},
    {'scatter': {'layout': 'hexagonal'}},
    {'verify': {'tolerances': {'unitary_defect': 0}}},
    {'example': {'tolerances': {'asd_residual': 'small'}}},
])
def test_invalid_values(tree):
    with pytest.raises(config.ConfigError):
        config.load_config(overrides=tree)


def test_zero_lower_bound_is_allowed():
    tree = {'scatter': {'tolerances': {'metric_min_eigenvalue': 0.0}}}
    assert config.load_config(overrides=tree)


def test_output_dir_from_environment(tmp_path):
    with mock.patch.dict(os.environ,
                         {config.OUTPUT_DIR_VARIABLE: str(tmp_path)}):
        loaded = config.load_config(overrides={'output_dir': 'elsewhere'})
    assert loaded['output_dir'] == str(tmp_path)


def test_invalid_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"seed": ')
    with pytest.raises(config.ConfigError):
        config.load_config(str(path))


def test_json_must_be_an_object(tmp_path):
    path = _write(tmp_path, [1, 2])
    with pytest.raises(config.ConfigError):
        config.load_config(path)


def test_lookup():
    key = 'scatter.tolerances.rebuild_defect'
    assert config.lookup(config.DEFAULTS, key) == 1e-6
