"""Reactive semantic navigation toolkit for 2D polygonal worlds.

Builds smooth deformations from partially known polygonal environments onto
disk-worlds, evaluates safe reactive controllers through those deformations,
and simulates full navigation episodes with incremental obstacle discovery,
moving-target tracking and scripted semantic events.
"""

from semnav.errors import (
    SemnavError,
    GeometryError,
    ConstructionError,
    DomainError,
    ScenarioError,
)

__version__ = "0.1.0"

__all__ = [
    "SemnavError",
    "GeometryError",
    "ConstructionError",
    "DomainError",
    "ScenarioError",
    "__version__",
]
