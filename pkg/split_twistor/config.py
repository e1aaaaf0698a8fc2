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
"""Run configuration: one JSON key tree per run, deep-merged over DEFAULTS.

Only the output directory may come from the environment, through
SPLIT_TWISTOR_OUTPUT_DIR.
"""

import copy
import json
import logging
import os

from split_twistor.errors import SplitTwistorError
from split_twistor.factorization import is_power_of_two
from split_twistor.scattering import LAYOUTS

class ConfigError(SplitTwistorError):
    pass

LOG = logging.getLogger(__name__)

OUTPUT_DIR_VARIABLE = 'SPLIT_TWISTOR_OUTPUT_DIR'
MAX_RANK = 4

DEFAULTS = {
    'seed': 0,
    'threads': None,
    'output_dir': '.',
    'xray': {
        'grid_size': 16,
        'residual_grid_size': 8,
        'degree': 8,
        'quadrature': 64,
        'orientation': 1,
        'wave_step': 2e-3,
        'output': 'xray',
        'tolerances': {
            'wave_residual': 1e-4,
        },
    },
    'reconstruct': {
        'data': 'scalar-exp',
        'input': None,
        'matrix': None,
        'rank': 1,
        'amplitude': 0.5,
        'degree': 4,
        'grid_size': 12,
        'loop_samples': 32,
        'factorization_tolerance': 1e-8,
        'output': 'reconstruct',
        'tolerances': {
            'hermitian_defect': 1e-10,
            'yang_residual': 5e-2,
            'asd_residual': 5e-2,
        },
    },
    'example': {
        'grid_size': 16,
        'k': -1,
        'normalization': 'integral',
        'degree': 4,
        'amplitude': 0.3,
        'quadrature': 32,
        'adhm_S': None,
        'output': 'example',
        'tolerances': {
            'sd_residual': 1e-10,
            'chern_integrality': 5e-2,
            'det_defect': 1e-10,
            'yang_residual': 5e-2,
            'adhm_identity': 1e-12,
            'projector_defect': 1e-10,
            'asd_residual': 5e-2,
            'c2_bundle': 5e-2,
        },
    },
    'scatter': {
        'data': 'builtin-bump',
        'input': None,
        'rank': 2,
        'amplitude': 0.3,
        'eta': 64,
        'radial': 1,
        'angular': 2,
        'layout': 'fibonacci',
        'points': 512,
        'meridians': 32,
        'samples': 256,
        'steps': 512,
        'radii': 65,
        'angles': 32,
        'loop_samples': 256,
        'output': 'scatter',
        'tolerances': {
            'holonomy_inverse_defect': 1e-6,
            'metric_symmetry_defect': 1e-6,
            'metric_min_eigenvalue': 0.0,
            'rebuild_defect': 1e-6,
            'holonomy_roundtrip': 1e-3,
            'final_trace_defect': 1e-4,
            'alpha_plane_total': 1e-3,
            'abelian_sign_reversal': 1e-5,
        },
    },
    'verify': {
        'input': None,
        'tolerances': {
            'hermitian_defect': 1e-10,
            'unitary_defect': 1e-8,
            'inverse_defect': 1e-6,
            'asd_residual': 5e-2,
            'yang_residual': 5e-2,
        },
    },
}

FFT_SIZES = ('xray.quadrature', 'reconstruct.loop_samples',
             'example.quadrature', 'scatter.samples',
             'scatter.loop_samples')
GRID_SIZES = ('xray.grid_size', 'xray.residual_grid_size',
              'reconstruct.grid_size', 'example.grid_size')
POSITIVE = ('xray.wave_step', 'reconstruct.factorization_tolerance')
NON_NEGATIVE = ('reconstruct.amplitude', 'example.amplitude',
                'scatter.amplitude')
RANKS = ('reconstruct.rank', 'scatter.rank')
# lower bounds rather than tolerances
ZERO_ALLOWED = ('scatter.tolerances.metric_min_eigenvalue',)


def get_environ_entry(key_name, default=None):
    return os.environ.get(key_name, default)


def _merge(base, override, path=''):
    for key, value in override.items():
        dotted = path + key
        if key not in base:
            raise ConfigError('Unknown configuration key %s' % dotted)
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError('Configuration key %s must be a mapping'
                                  % dotted)
            _merge(base[key], value, dotted + '.')
        else:
            base[key] = value
    return base


def lookup(config, dotted):
    value = config
    for part in dotted.split('.'):
        value = value[part]
    return value


def _tolerance_keys(config):
    for section, body in config.items():
        if isinstance(body, dict) and 'tolerances' in body:
            for name in body['tolerances']:
                yield '%s.tolerances.%s' % (section, name)


def validate(config):
    """Raise ConfigError on the first invalid value."""
    for key in FFT_SIZES:
        value = lookup(config, key)
        if not isinstance(value, int) or value < 16 or \
                not is_power_of_two(value):
            raise ConfigError('%s must be a power of two >= 16, got %s'
                              % (key, repr(value)))
    for key in GRID_SIZES:
        value = lookup(config, key)
        if not isinstance(value, int) or value < 8:
            raise ConfigError('%s must be an integer >= 8, got %s'
                              % (key, repr(value)))
    for key in POSITIVE:
        value = lookup(config, key)
        if not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError('%s must be positive, got %s'
                              % (key, repr(value)))
    for key in _tolerance_keys(config):
        value = lookup(config, key)
        if not isinstance(value, (int, float)) or value < 0 or \
                (value == 0 and key not in ZERO_ALLOWED):
            raise ConfigError('Tolerance %s must be positive, got %s'
                              % (key, repr(value)))
    for key in NON_NEGATIVE:
        value = lookup(config, key)
        if not isinstance(value, (int, float)) or value < 0:
            raise ConfigError('%s must be non-negative, got %s'
                              % (key, repr(value)))
    for key in RANKS:
        value = lookup(config, key)
        if not isinstance(value, int) or not 1 <= value <= MAX_RANK:
            raise ConfigError('%s must be an integer in 1..%d, got %s'
                              % (key, MAX_RANK, repr(value)))
    threads = config['threads']
    if threads is not None and (not isinstance(threads, int) or threads < 1):
        raise ConfigError('threads must be a positive integer or null, got %s'
                          % repr(threads))
    scatter = config['scatter']
    if scatter['layout'] not in LAYOUTS:
        raise ConfigError('scatter.layout must be one of %s, got %s'
                          % (', '.join(sorted(LAYOUTS)),
                             repr(scatter['layout'])))
    for key in ('points', 'meridians'):
        if not isinstance(scatter[key], int) or scatter[key] < 2 \
                or scatter[key] % 2:
            raise ConfigError('scatter.%s must be a positive even integer, '
                              'got %s' % (key, repr(scatter[key])))
    if not isinstance(scatter['angles'], int) or scatter['angles'] < 4 \
            or scatter['angles'] % 4:
        raise ConfigError('scatter.angles must be a positive multiple of 4, '
                          'got %s' % repr(scatter['angles']))
    if not isinstance(scatter['radii'], int) or scatter['radii'] < 5:
        raise ConfigError('scatter.radii must be an integer of at least 5, '
                          'got %s' % repr(scatter['radii']))
    return config


def load_config(path=None, overrides=None):
    """Defaults, then the JSON file at ``path``, then ``overrides``.

    Args:
        path (filepath): optional JSON run configuration
        overrides (dict): key tree applied last, e.g. from the command line

    Returns:
        The validated configuration tree.
    """
    config = copy.deepcopy(DEFAULTS)
    if path:
        LOG.debug("Loading configuration: %s", repr(path))
        try:
            with open(path) as f:
                data = json.load(f)
        except ValueError as e:
            raise ConfigError('Configuration %s is not valid JSON: %s'
                              % (path, e))
        if not isinstance(data, dict):
            raise ConfigError('Configuration %s must hold a JSON object'
                              % path)
        _merge(config, data)
    if overrides:
        _merge(config, overrides)
    output_dir = get_environ_entry(OUTPUT_DIR_VARIABLE)
    if output_dir:
        LOG.debug("Output directory from %s: %s", OUTPUT_DIR_VARIABLE,
                  repr(output_dir))
        config['output_dir'] = output_dir
    return validate(config)
