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
"""JSON field containers and CSV tables.

A container is ``{"metadata": {...}, "data": [[re, im], ...]}`` with the
array flattened row-major, nodes first and matrix entries last.  The
metadata always carries ``version``, ``shape``, ``rank`` and ``timestamp``.
"""

from datetime import datetime
import csv
import json
import logging
import os

import numpy as np

from split_twistor.errors import SplitTwistorError

class PersistenceError(SplitTwistorError):
    pass

LOG = logging.getLogger(__name__)

CONTAINER_VERSION = 'split-twistor/1'
DIAGNOSTIC_FIELDS = ('check', 'value', 'tolerance', 'pass')
GRID_FIELDS = ('node', 'chart1', 'w1_re', 'w1_im', 'chart2', 'w2_re',
               'w2_im', 'value')
SPHERE_FIELDS = ('theta1', 'phi1', 'theta2', 'phi2', 'value')


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_container(path, values, **metadata):
    """Write ``values`` and ``metadata`` as a JSON container.

    Args:
        path (filepath): destination, parent directories are created
        values (array): any real or complex array
        metadata: JSON-serialisable descriptive fields (kind, grid, chart)

    Returns:
        The metadata actually written.
    """
    values = np.asarray(values, dtype=complex)
    rank = metadata.pop('rank', values.shape[-1] if values.ndim else 1)
    meta = dict(metadata)
    meta.update({'version': CONTAINER_VERSION, 'rank': int(rank),
                 'shape': list(values.shape),
                 'timestamp': datetime.utcnow().isoformat()})
    flat = values.ravel()
    body = {'metadata': meta,
            'data': np.stack([flat.real, flat.imag], axis=-1).tolist()}
    _ensure_parent(path)
    with open(path, 'w') as f:
        json.dump(body, f, sort_keys=True)
    LOG.info("Wrote %s container %s", meta.get('kind', 'field'), path)
    return meta


def read_container(path):
    """Load a JSON container.

    Returns:
        (values, metadata), values shaped by the stored ``shape``.
    """
    try:
        with open(path) as f:
            body = json.load(f)
    except ValueError as e:
        raise PersistenceError('%s is not a JSON container: %s' % (path, e))
    if not isinstance(body, dict) or set(body) != {'metadata', 'data'}:
        raise PersistenceError('%s lacks the metadata/data layout' % path)
    meta = body['metadata']
    if meta.get('version') != CONTAINER_VERSION:
        raise PersistenceError('%s has version %s, expected %s'
                               % (path, repr(meta.get('version')),
                                  CONTAINER_VERSION))
    pairs = np.asarray(body['data'], dtype=float).reshape(-1, 2)
    shape = tuple(meta.get('shape', ()))
    if int(np.prod(shape)) != pairs.shape[0]:
        raise PersistenceError('%s holds %d values for shape %s'
                               % (path, pairs.shape[0], repr(shape)))
    values = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(shape)
    LOG.debug("Read %s: %s", path, repr(shape))
    return values, meta


def same_container(first, second):
    """Equality of two loaded containers, ignoring the timestamp."""
    (a, meta_a), (b, meta_b) = first, second
    meta_a = {k: v for k, v in meta_a.items() if k != 'timestamp'}
    meta_b = {k: v for k, v in meta_b.items() if k != 'timestamp'}
    return meta_a == meta_b and a.shape == b.shape and \
        bool(np.array_equal(a, b))


def _write_rows(path, header, rows):
    _ensure_parent(path)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _read_rows(path, header):
    with open(path, newline='') as f:
        reader = csv.reader(f)
        found = next(reader, None)
        if found is None or tuple(found) != tuple(header):
            raise PersistenceError('%s does not start with the header %s'
                                   % (path, ','.join(header)))
        return [row for row in reader]


def write_diagnostics(path, rows):
    """CSV of (check, value, tolerance, pass) rows."""
    _write_rows(path, DIAGNOSTIC_FIELDS,
                [(name, repr(float(value)), repr(float(tolerance)),
                  'true' if passed else 'false')
                 for name, value, tolerance, passed in rows])


def read_diagnostics(path):
    rows = []
    for row in _read_rows(path, DIAGNOSTIC_FIELDS):
        if len(row) != 4 or row[3] not in ('true', 'false'):
            raise PersistenceError('Bad diagnostics row in %s: %s'
                                   % (path, repr(row)))
        rows.append((row[0], float(row[1]), float(row[2]), row[3] == 'true'))
    return rows


def write_grid_field(path, grid, values):
    """CSV of a real scalar on a ProductGrid, one row per node."""
    values = np.asarray(grid.full(values), dtype=float).ravel()
    c1 = np.broadcast_to(grid.c1, grid.shape).ravel()
    c2 = np.broadcast_to(grid.c2, grid.shape).ravel()
    w1 = np.broadcast_to(grid.w1, grid.shape).ravel()
    w2 = np.broadcast_to(grid.w2, grid.shape).ravel()
    _write_rows(path, GRID_FIELDS,
                ((i, int(c1[i]), repr(float(w1[i].real)),
                  repr(float(w1[i].imag)), int(c2[i]),
                  repr(float(w2[i].real)), repr(float(w2[i].imag)),
                  repr(float(values[i]))) for i in range(values.size)))


def write_sphere_field(path, grid, values):
    """CSV of a real scalar on a ProductGrid by polar angles of both
    factors; chart blend overlaps give repeated angles."""
    theta, phi = grid.sphere.angles()
    values = np.asarray(grid.full(values), dtype=float)
    rows = []
    for index in np.ndindex(grid.shape):
        first, second = index[:3], index[3:]
        rows.append((repr(float(theta[first])), repr(float(phi[first])),
                     repr(float(theta[second])), repr(float(phi[second])),
                     repr(float(values[index]))))
    _write_rows(path, SPHERE_FIELDS, rows)


def read_table(path, header):
    """Float rows of a CSV written by this module."""
    try:
        return np.array([[float(v) for v in row]
                         for row in _read_rows(path, header)])
    except ValueError as e:
        raise PersistenceError('Non-numeric entry in %s: %s' % (path, e))
