"""meltpath: scan-path design toolkit for laser powder bed fusion.

Couples a voxel phase-field grain-growth solver under a moving Rosenthal
heat source with grain morphology analytics, scan-pattern generation, a
precomputed per-movement reward table, and a from-scratch DQN toolpath
optimizer.
"""

from .domain import (
    DEFAULT_N_ORI,
    DEFAULT_VOI_MM,
    LIQUID,
    DomainSpec,
    GrainField,
    VoiWindow,
    augment_voi,
    extract_voi,
    generate_voronoi_microstructure,
    write_back_voi,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .thermal import LaserParams, MaterialThermal, MeltMask, TemperatureField

__version__ = "0.1.0"
