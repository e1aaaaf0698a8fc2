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
# bump on every release; setup.cfg reads it
__VERSION__ = '1.0.0'

from split_twistor.errors import (
    NonIntegralWarning, SplitTwistorError
)
from split_twistor.geometry import (
    SpacetimePoint, Spinor, TwistorPoint, antipode, incidence,
    point_from_twistor
)
from split_twistor.fields import (
    CurvatureField, LatticeGaugeField, ProductGrid, SphereGrid,
    chern_integrals, curvature, parallel_transport
)
from split_twistor.factorization import (
    LoopMatrixFunction, birkhoff_hermitian, cauchy_split, rhp_factorize
)
from split_twistor.transforms import (
    TwistorScalarFunction, harmonic_function, maxwell_asd, xray
)
from split_twistor.ward import (
    ADHMData, HermitianTwistorData, JMatrixField, adhm_connection,
    connection_from_J, reconstruct_J, ward_ansatz_J, yang_residual
)
from split_twistor.scattering import (
    CharacteristicData, HolonomyData, holonomy_family, scatter,
    twistor_metric
)
