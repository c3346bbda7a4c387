"""Exception hierarchy shared by all modules."""


class TrijunctionError(Exception):
    """Base class for all package errors."""


class GeometryError(TrijunctionError):
    """Degenerate or invalid curve data (vanishing velocity, self-intersection, ...)."""


class ProjectionError(GeometryError):
    """Point outside the tubular neighborhood: closest-point projection not unique."""


class ConfigError(TrijunctionError):
    """Invalid triple-junction configuration."""


class MeshError(TrijunctionError):
    """Mesh generation or quality failure."""


class SolveError(TrijunctionError):
    """Linear solve failed (singular system, non-convergence)."""


class AdmissibilityError(TrijunctionError):
    """Velocity field / diffeomorphism violates the admissibility constraints."""
