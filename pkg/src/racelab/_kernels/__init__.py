"""Hot numerical kernels.

The compiled Cython build is used when importable; otherwise the NumPy
fallback is selected. Set ``RACELAB_PURE_PYTHON=1`` to force the fallback.
"""

import os

from racelab._kernels import dda_py

BACKEND = "python"
cast_rays = dda_py.cast_rays

if os.environ.get("RACELAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from racelab._kernels._dda import cast_rays  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

__all__ = ["BACKEND", "cast_rays", "dda_py"]
