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
import logging
import os
import sys

import click
import numpy as np

from split_twistor.config import load_config
from split_twistor.errors import SplitTwistorError
from split_twistor.factorization import NotPositiveDefinite
from split_twistor.fields import (
    CurvatureField, LatticeGaugeField, ProductGrid, asd_residual,
    chern_integrals, curvature, field_strength_norm, relative_residual,
    sd_asd_decompose)
from split_twistor.persistence import (
    PersistenceError, read_container, write_container, write_diagnostics,
    write_sphere_field)
from split_twistor.scattering import (
    LAYOUTS, CharacteristicData, HolonomyData, bump_data, scatter)
from split_twistor.transforms import (
    harmonic_function, random_real_twistors, scalar_norm, wave_residual, xray,
    xray_field)
from split_twistor.ward import (
    ADHMData, HermitianTwistorData, JMatrixField, abelian_k_curvature,
    adhm_curvature, adhm_identity_defect, adhm_projector, connection_from_J,
    reconstruct_J, ward_ansatz_J, yang_residual)

LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_TOLERANCE = 2
INPUT_ERRORS = (SplitTwistorError, OSError, ValueError, KeyError)
CHART = 'two-chart stereographic'
WARD_STEP = 1e-3


def _config(ctx, **overrides):
    tree = {}
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = tree
        parts = dotted.split('.')
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    options = ctx.obj
    for key in ('threads', 'output_dir'):
        if options.get(key) is not None:
            tree[key] = options[key]
    return load_config(options.get('config'), tree)


def _path(config, name):
    return os.path.join(config['output_dir'], name)


def _row(name, value, tolerance, lower=False):
    value = float(value)
    passed = value > tolerance if lower else value <= tolerance
    return (name, value, float(tolerance), bool(passed))


def _asd_ratio(F):
    return relative_residual(asd_residual(F), field_strength_norm(F), F.grid)


def _finish(ctx, config, prefix, rows):
    write_diagnostics(_path(config, prefix + '_diagnostics.csv'), rows)
    for name, value, tolerance, passed in rows:
        print('%-28s %12.4e  tolerance %.1e  %s'
              % (name, value, tolerance, 'pass' if passed else 'FAIL'))
    if not all(row[3] for row in rows):
        print('Tolerance check failed.')
        ctx.exit(EXIT_TOLERANCE)
    ctx.exit(EXIT_OK)


def _fail(ctx, action, e):
    LOG.debug(e, exc_info=True)
    print('Failed to %s: %s' % (action, e))
    ctx.exit(EXIT_INPUT_ERROR)


def _write_grid(config, name, grid, values, kind, **extra):
    return write_container(_path(config, name), values, kind=kind,
                           grid=grid.metadata(), chart=CHART,
                           rank=int(np.shape(values)[-1]), **extra)


@click.group(help='Numerical twistor constructions of anti-self-dual '
                  'Yang-Mills fields on S2 x S2 with split signature')
@click.option('-d', '--debug', help='Enable debugging', is_flag=True)
@click.option('-q', '--quiet',
              help='Minimises output unless --debug specified',
              is_flag=True)
@click.option('-c', '--config', help='JSON run configuration', default=None,
              type=str)
@click.option('-t', '--threads', help='Worker threads (default: all cores)',
              default=None, type=int)
@click.option('-o', '--output-dir', help='Directory for output files',
              default=None, type=str)
@click.pass_context
def twistor(ctx, debug, quiet, config, threads, output_dir):
    if not any((debug, quiet)):
        logging.basicConfig(stream=sys.stdout, level=logging.INFO)
    elif debug:
        logging.basicConfig(stream=sys.stdout, level=logging.DEBUG)
    elif quiet:
        logging.basicConfig(stream=sys.stdout, level=logging.WARNING)
    ctx.ensure_object(dict)
    ctx.obj.update({'config': config, 'threads': threads,
                    'output_dir': output_dir})
    LOG.debug('options: %s', ctx.obj)


@click.command(help='X-ray transform of a seeded band-limited function on '
                    'real twistor space: the average over the real circle '
                    'of each point of S2 x S2.  Writes the field as CSV and '
                    'checks the ultrahyperbolic wave equation.')
@click.option('--seed', help='Seed of the random function', type=int)
@click.option('--grid-size', help='Nodes per chart side', type=int)
@click.pass_context
def xray_cmd(ctx, seed, grid_size):
    try:
        config = _config(ctx, **{'seed': seed, 'xray.grid_size': grid_size})
        cfg = config['xray']
        f = harmonic_function(cfg['degree'], config['seed'])
        grid = ProductGrid(cfg['grid_size'])
        phi = xray(f, grid, cfg['quadrature'], cfg['orientation'],
                   config['threads'])
        write_sphere_field(_path(config, cfg['output'] + '_field.csv'), grid,
                           phi)
        _write_grid(config, cfg['output'] + '_field.json', grid,
                    np.asarray(grid.full(phi))[..., None, None], 'xray',
                    seed=config['seed'])
        check = ProductGrid(cfg['residual_grid_size'])
        field = xray_field(f, cfg['quadrature'])
        residual = relative_residual(
            wave_residual(field, check, cfg['wave_step']),
            scalar_norm(field, check), check)
        rows = [_row('wave_residual', residual,
                     cfg['tolerances']['wave_residual'])]
    except INPUT_ERRORS as e:
        _fail(ctx, 'compute the X-ray transform', e)
    _finish(ctx, config, cfg['output'], rows)


def _twistor_data(config):
    cfg = config['reconstruct']
    kind = cfg['data']
    rank = cfg['rank']
    if kind == 'identity':
        return HermitianTwistorData.constant(np.eye(rank))
    if kind == 'constant':
        if cfg['matrix'] is None:
            raise PersistenceError('reconstruct.matrix is required for '
                                   'constant data')
        return HermitianTwistorData.constant(np.array(cfg['matrix']))
    if kind == 'scalar-exp':
        f = harmonic_function(cfg['degree'], config['seed'])
        return HermitianTwistorData.scalar_exp(f.scaled(cfg['amplitude']))
    if kind == 'file':
        values, meta = read_container(cfg['input'])
        if meta.get('kind') != 'twistor-metric':
            raise PersistenceError('%s holds %s, not a twistor metric'
                                   % (cfg['input'], repr(meta.get('kind'))))
        return HermitianTwistorData.quadric_series(values, meta['quadrics'])
    raise PersistenceError('Unknown twistor data %s' % repr(kind))


@click.command(help='Reconstruct an anti-self-dual connection from a '
                    'hermitian metric H on real twistor space: Birkhoff '
                    'factorisation of H around the boundary of the disc of '
                    'every grid point gives the J-matrix, whose unitary '
                    'connection is checked against Yang\'s equation.')
@click.option('--input', 'input_path', help='Twistor metric container',
              type=str)
@click.option('--grid-size', help='Nodes per chart side', type=int)
@click.pass_context
def reconstruct(ctx, input_path, grid_size):
    try:
        overrides = {'reconstruct.grid_size': grid_size}
        if input_path:
            overrides.update({'reconstruct.input': input_path,
                              'reconstruct.data': 'file'})
        config = _config(ctx, **overrides)
        cfg = config['reconstruct']
        H = _twistor_data(config)
        grid = ProductGrid(cfg['grid_size'])
        J = reconstruct_J(H, grid, cfg['loop_samples'], config['threads'],
                          cfg['factorization_tolerance'])
        A = connection_from_J(J, 'unitary')
        F = curvature(A)
        _write_grid(config, cfg['output'] + '_J.json', grid, J.values,
                    'j-matrix')
        _write_grid(config, cfg['output'] + '_connection.json', grid,
                    A.components, 'connection', unitary=True)
        tolerances = cfg['tolerances']
        rows = [
            _row('hermitian_defect', J.hermitian_defect(),
                 tolerances['hermitian_defect']),
            _row('yang_residual', yang_residual(J, relative=True),
                 tolerances['yang_residual']),
            _row('asd_residual', _asd_ratio(F),
                 tolerances['asd_residual']),
        ]
    except NotPositiveDefinite as e:
        _fail(ctx, 'factorise the twistor metric', e)
    except INPUT_ERRORS as e:
        _fail(ctx, 'reconstruct the connection', e)
    _finish(ctx, config, cfg['output'], rows)


def _abelian_example(config, grid):
    cfg = config['example']
    tolerances = cfg['tolerances']
    F = abelian_k_curvature(grid, cfg['k'], cfg['normalization'])
    sd, _ = sd_asd_decompose(F)
    numbers = chern_integrals(F)
    rows = [
        _row('sd_residual', np.max(np.abs(sd)), tolerances['sd_residual']),
        _row('c1_first_integrality',
             abs(numbers.c1_factor1 - round(numbers.c1_factor1)),
             tolerances['chern_integrality']),
        _row('c1_second_integrality',
             abs(numbers.c1_factor2 - round(numbers.c1_factor2)),
             tolerances['chern_integrality']),
        _row('c1_factor_difference',
             abs(numbers.c1_factor1 - numbers.c1_factor2),
             tolerances['chern_integrality']),
    ]
    if cfg['normalization'] == 'integral':
        rows.append(_row('c2_total_defect',
                         abs(numbers.c2_total + cfg['k'] ** 2),
                         tolerances['chern_integrality']))
    _write_grid(config, cfg['output'] + '_abelian_curvature.json', grid,
                F.components, 'curvature', k=cfg['k'],
                normalization=cfg['normalization'])
    return rows


def _ward_example(config, grid):
    cfg = config['example']
    tolerances = cfg['tolerances']
    f = harmonic_function(cfg['degree'], config['seed'])
    ansatz = ward_ansatz_J(f.scaled(cfg['amplitude']), grid,
                           M=cfg['quadrature'], threads=config['threads'])
    J = ansatz.J
    rows = [
        _row('det_defect', np.max(np.abs(J.determinant() - 1.0)),
             tolerances['det_defect']),
        _row('yang_residual', yang_residual(J, WARD_STEP, relative=True),
             tolerances['yang_residual']),
    ]
    _write_grid(config, cfg['output'] + '_ward_J.json', grid, J.values,
                'j-matrix', convention=ansatz.convention)
    return rows


def _adhm_example(config, grid):
    cfg = config['example']
    tolerances = cfg['tolerances']
    if cfg['adhm_S'] is None:
        data = ADHMData.random(config['seed'])
    else:
        data = ADHMData.from_S(np.array(cfg['adhm_S']))
    rng = np.random.default_rng(config['seed'])
    identity = adhm_identity_defect(data, random_real_twistors(rng, 200))
    F = adhm_curvature(data, grid, threads=config['threads'])
    P = adhm_projector(data, grid.x(), grid.y())
    GP = data.pairing @ P
    projector = max(float(np.max(np.abs(P @ P - P))),
                    float(np.max(np.abs(GP - np.conj(np.swapaxes(GP, -1,
                                                                 -2))))))
    numbers = chern_integrals(F)
    rows = [
        _row('adhm_identity', identity, tolerances['adhm_identity']),
        _row('projector_defect', projector, tolerances['projector_defect']),
        _row('asd_residual', _asd_ratio(F),
             tolerances['asd_residual']),
        _row('c2_bundle_defect', abs(abs(numbers.c2_total) / 2.0 - 2.0),
             tolerances['c2_bundle']),
    ]
    _write_grid(config, cfg['output'] + '_adhm_curvature.json', grid,
                F.components, 'curvature', M=data.M.tolist())
    return rows


EXAMPLES = {'abelian': _abelian_example, 'ward-ansatz': _ward_example,
            'adhm': _adhm_example}


@click.command(help='Closed-form solutions and their checks.  abelian: the '
                    'rank one field with first Chern numbers k on both '
                    'factors.  ward-ansatz: the rank two J-matrix built from '
                    'the X-ray transform of one function.  adhm: the charge '
                    'two instanton from a quartic spinor via the ADHM '
                    'projector.')
@click.argument('kind', type=click.Choice(sorted(EXAMPLES)))
@click.option('--grid-size', help='Nodes per chart side', type=int)
@click.pass_context
def example(ctx, kind, grid_size):
    try:
        config = _config(ctx, **{'example.grid_size': grid_size})
        grid = ProductGrid(config['example']['grid_size'])
        rows = EXAMPLES[kind](config, grid)
    except INPUT_ERRORS as e:
        _fail(ctx, 'build the %s example' % kind, e)
    _finish(ctx, config, '%s_%s' % (config['example']['output'], kind), rows)


def _characteristic_data(config):
    cfg = config['scatter']
    if cfg['data'] == 'builtin-bump':
        return bump_data(cfg['rank'], cfg['amplitude'], config['seed'],
                         cfg['eta'], cfg['radial'], cfg['angular'])
    if cfg['data'] == 'file':
        values, meta = read_container(cfg['input'])
        if meta.get('kind') != 'characteristic-data':
            raise PersistenceError('%s holds %s, not characteristic data'
                                   % (cfg['input'], repr(meta.get('kind'))))
        return CharacteristicData.from_samples(values, cfg['radial'],
                                               cfg['angular'])
    raise PersistenceError('Unknown characteristic data %s'
                           % repr(cfg['data']))


@click.command(help='Scatter characteristic data on the past null boundary: '
                    'holonomies around the alpha-plane circles, a '
                    'Riemann-Hilbert factorisation along a fan of meridians '
                    'giving the twistor metric H, Yang\'s J rebuilt from H '
                    'on a collar of every beta-plane, and the final data '
                    'read off its connection in the radial gauge.')
@click.option('--amplitude', help='Sup norm of the builtin data', type=float)
@click.option('--rank', help='Rank of the builtin data', type=int)
@click.option('--layout', help='Sphere layout of the holonomy family',
              type=click.Choice(sorted(LAYOUTS)))
@click.pass_context
def scatter_cmd(ctx, amplitude, rank, layout):
    try:
        config = _config(ctx, **{'scatter.amplitude': amplitude,
                                 'scatter.rank': rank,
                                 'scatter.layout': layout})
        cfg = config['scatter']
        a_minus = _characteristic_data(config)
        result = scatter(a_minus, cfg['layout'], cfg['points'],
                         cfg['meridians'], cfg['samples'], cfg['steps'],
                         cfg['radii'], cfg['angles'], cfg['loop_samples'],
                         cfg['tolerances'], config['threads'])
        holonomy = result.holonomy
        extra = {'layout': holonomy.layout, 'z': holonomy.z.tolist(),
                 'antipodes': holonomy.antipodes.tolist(),
                 'eta': holonomy.eta.tolist(),
                 'chart': 'sphere of directions'}
        write_container(_path(config, cfg['output'] + '_holonomy.json'),
                        holonomy.samples, kind='holonomy',
                        shape_layout=list(holonomy.shape), **extra)
        write_container(_path(config, cfg['output'] + '_metric.json'),
                        result.metric.samples, kind='twistor-metric-samples',
                        symmetry_defect=result.metric.symmetry_defect,
                        band=result.metric.band, **extra)
        write_container(_path(config, cfg['output'] + '_a_minus.json'),
                        a_minus.samples, kind='characteristic-data',
                        chart='past w1 disc', **a_minus.metadata())
        write_container(_path(config, cfg['output'] + '_a_plus.json'),
                        result.a_plus.angular, kind='collar-data',
                        chart='past w1 polar collar, radial gauge',
                        **dict(result.a_plus.metadata(),
                               eta=result.a_plus.eta.tolist()))
        rows = result.diagnostics
    except INPUT_ERRORS as e:
        _fail(ctx, 'scatter the characteristic data', e)
    _finish(ctx, config, cfg['output'], rows)


def _verify_rows(values, meta, tolerances):
    kind = meta.get('kind')
    if kind in ('curvature', 'connection', 'j-matrix'):
        grid = ProductGrid.from_metadata(meta['grid'])
    if kind == 'curvature':
        F = CurvatureField(grid, values)
        return [_row('asd_residual', _asd_ratio(F),
                     tolerances['asd_residual'])]
    if kind == 'connection':
        A = LatticeGaugeField(grid, values, unitary=meta.get('unitary', False))
        F = curvature(A)
        rows = [_row('asd_residual', _asd_ratio(F),
                     tolerances['asd_residual'])]
        if A.unitary:
            rows.append(_row('unitary_defect', A.unitary_defect(),
                             tolerances['unitary_defect']))
        return rows
    if kind == 'j-matrix':
        J = JMatrixField(grid, values)
        return [_row('hermitian_defect', J.hermitian_defect(),
                     tolerances['hermitian_defect']),
                _row('min_eigenvalue', J.min_eigenvalue(), 0.0, lower=True),
                _row('yang_residual', yang_residual(J, relative=True),
                     tolerances['yang_residual'])]
    if kind == 'holonomy':
        holonomy = HolonomyData(values, np.array(meta['z']),
                                np.array(meta['antipodes']),
                                np.array(meta['eta']), meta['layout'],
                                tuple(meta['shape_layout']))
        return [_row('inverse_defect', holonomy.inverse_defect(),
                     tolerances['inverse_defect']),
                _row('unitary_defect', holonomy.unitarity_defect(),
                     tolerances['unitary_defect'])]
    if kind == 'twistor-metric-samples':
        skew = np.max(np.abs(values - np.conj(np.swapaxes(values, -1, -2))))
        lowest = np.min(np.linalg.eigvalsh(values))
        return [_row('hermitian_defect', skew,
                     tolerances['hermitian_defect']),
                _row('min_eigenvalue', lowest, 0.0, lower=True)]
    raise PersistenceError('Cannot verify containers of kind %s'
                           % repr(kind))


@click.command(help='Recompute the invariants of a saved field container: '
                    'anti-self-duality of curvatures and connections, '
                    'Yang\'s equation for J-matrices, inversion symmetry of '
                    'holonomy families and positivity of twistor metrics.')
@click.option('--input', 'input_path', help='Field container to verify',
              type=str)
@click.pass_context
def verify(ctx, input_path):
    try:
        config = _config(ctx, **{'verify.input': input_path})
        cfg = config['verify']
        if not cfg['input']:
            raise PersistenceError('No container given, use --input')
        values, meta = read_container(cfg['input'])
        rows = _verify_rows(values, meta, cfg['tolerances'])
    except INPUT_ERRORS as e:
        _fail(ctx, 'verify the container', e)
    _finish(ctx, config, 'verify', rows)


twistor.add_command(xray_cmd, name='xray')
twistor.add_command(reconstruct)
twistor.add_command(example)
twistor.add_command(scatter_cmd, name='scatter')
twistor.add_command(verify)


def main():
    twistor(obj={})


if __name__ == '__main__':
    main()
