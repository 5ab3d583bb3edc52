"""Camera network planning on voxelized indoor scenes.

Voxelizes a triangle-mesh environment, computes per-camera visibility
sets, adaptively samples candidate camera configurations and selects a
budget-constrained network by exact branch-and-bound or a greedy
heuristic.
"""

from camcover.kernels import backend_name

__all__ = ["backend_name"]
__version__ = "0.1.0"
