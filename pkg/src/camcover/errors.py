"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Degenerate geometric input (antiparallel rotation, vertical view)."""


class SceneError(ValueError):
    """Mesh loading, room generation or voxelization failure."""


class SamplingError(ValueError):
    """Candidate generation failure (zero direction, no valid position)."""


class SolverError(ValueError):
    """Invalid coverage instance or infeasible warm start."""


class ConfigError(ValueError):
    """Malformed run configuration (CLI exit code 2)."""
