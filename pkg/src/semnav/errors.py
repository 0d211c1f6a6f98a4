"""Exception types shared across the toolkit."""


class SemnavError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(SemnavError):
    """Invalid or degenerate geometric input (bad polygon, empty region, ...)."""


class ConstructionError(SemnavError):
    """Deformation construction failed (no admissible center/collar, tight clearance)."""


class DomainError(SemnavError):
    """Evaluation requested outside the valid domain of a map or controller."""


class ScenarioError(SemnavError):
    """Scenario file is malformed, inconsistent, or violates the separation assumptions."""
