"""Kernel backend selection.

The compiled extension is preferred when importable; the NumPy fallback is
always available. ``MELTPATH_KERNEL=python|cython`` forces a choice (useful
for the backend benchmark and for debugging).
"""

import os

from . import _pf_numpy

_requested = os.environ.get("MELTPATH_KERNEL", "").lower()

_core = None
if _requested != "python":
    try:
        from . import _pf_core as _core
    except ImportError:
        _core = None
        if _requested == "cython":
            raise ImportError(
                "MELTPATH_KERNEL=cython but the compiled kernel is not built; "
                "reinstall with a C compiler available"
            )

BACKEND = "cython" if _core is not None else "python"

step_tdgl = _core.step_tdgl if _core is not None else _pf_numpy.step_tdgl

# Diagnostics are not performance-critical; the NumPy versions serve both
# backends.
discrete_energy = _pf_numpy.discrete_energy
bulk_energy_density = _pf_numpy.bulk_energy_density
gradient_energy = _pf_numpy.gradient_energy
