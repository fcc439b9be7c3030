"""Numerical laboratory for heat-kernel entropy under mean curvature flow.

Surfaces live in Euclidean space, flat 3-tori or the unit round 3-sphere.
"""

__version__ = "0.1.0"

from .ambient import Ambient, parse_ambient  # noqa: E402
from .functionals import SearchConfig, area_growth, entropy, f_functional  # noqa: E402
from .heat_kernel import KernelConfig, heat_kernel  # noqa: E402
from .shapes import make_shape  # noqa: E402
from .surface import SurfaceMesh, load_mesh, save_mesh  # noqa: E402

__all__ = [
    "Ambient",
    "KernelConfig",
    "SearchConfig",
    "SurfaceMesh",
    "area_growth",
    "entropy",
    "f_functional",
    "heat_kernel",
    "load_mesh",
    "make_shape",
    "parse_ambient",
    "save_mesh",
]
