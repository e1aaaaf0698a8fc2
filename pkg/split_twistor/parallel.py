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

from concurrent.futures import ThreadPoolExecutor
import logging
import os

LOG = logging.getLogger(__name__)

DEFAULT_CHUNK = 256


def resolve_threads(threads=None):
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return int(threads)


def chunk_slices(total, chunk=DEFAULT_CHUNK):
    return [slice(start, min(start + chunk, total))
            for start in range(0, total, chunk)]


def map_chunks(func, total, threads=None, chunk=DEFAULT_CHUNK):
    """Apply ``func(slice)`` over consecutive chunks of ``range(total)``.

    Results come back in chunk order whatever the worker count, so callers
    writing into preallocated arrays get identical output serial or threaded.
    """
    slices = chunk_slices(total, chunk)
    workers = min(resolve_threads(threads), max(len(slices), 1))
    LOG.debug("Running %d chunks on %d workers", len(slices), workers)
    if workers == 1:
        return [func(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, slices))
