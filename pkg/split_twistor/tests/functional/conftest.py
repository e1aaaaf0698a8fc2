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

import pytest

DEFAULT_GRID_SIZE = "8"


def pytest_addoption(parser):
    parser.addoption(
        "--grid-size",
        action="store",
        default=DEFAULT_GRID_SIZE,
        help="nodes per chart side for the command runs"
    )


@pytest.fixture(scope="session")
def grid_size(request):
    return request.config.getoption("--grid-size", default=DEFAULT_GRID_SIZE)
