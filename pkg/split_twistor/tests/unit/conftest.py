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

from split_twistor.fields import ProductGrid
from split_twistor.ward import ADHMData


@pytest.fixture(scope='session')
def small_grid():
    return ProductGrid(8)


@pytest.fixture(scope='session')
def chern_grid():
    return ProductGrid(16)


@pytest.fixture(scope='session')
def adhm_data():
    return ADHMData.random(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20211)
