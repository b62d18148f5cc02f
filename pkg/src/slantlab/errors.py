"""Exception hierarchy.

Errors fall into two families that the CLI maps to exit codes: usage
problems (bad input, unknown names, malformed grids) and numerical failures
(degenerate immersions, singular slant angles, unstable spectra).
"""

from __future__ import annotations


class SlantlabError(Exception):
    """Base class for every error raised by the toolkit."""


class UsageError(SlantlabError):
    """Input that cannot be acted on (exit code 2)."""


class NumericalFailure(SlantlabError):
    """A computation that is well-posed but numerically impossible here (exit code 3)."""


# -- ambient ---------------------------------------------------------------

class InvalidDimension(UsageError):
    pass


class DimensionError(UsageError):
    pass


# -- expressions -----------------------------------------------------------

class ParseError(UsageError):
    def __init__(self, position: int, expected, message: str | None = None):
        self.position = position
        self.expected = frozenset(expected)
        exp = ", ".join(sorted(self.expected))
        super().__init__(message or f"parse error at position {position}; expected one of: {exp}")


class UnknownIdentifier(UsageError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(f"unknown identifier {name!r} at position {position}")


class DomainError(NumericalFailure):
    def __init__(self, node, point, reason: str, coord_index: int | None = None):
        self.node = node
        self.point = point
        self.reason = reason
        self.coord_index = coord_index
        super().__init__(self._message())

    def _message(self) -> str:
        where = "" if self.coord_index is None else f" (coordinate {self.coord_index})"
        return f"{self.reason} at point {list(self.point)}{where}"

    def with_coord(self, index: int) -> "DomainError":
        self.coord_index = index
        self.args = (self._message(),)
        return self


# -- immersions ------------------------------------------------------------

class UnknownExample(UsageError):
    pass


class OddAmbientDimension(UsageError):
    pass


class SpecDocumentError(UsageError):
    """Malformed immersion document (missing keys, wrong types)."""


class CoordinateParseError(UsageError):
    def __init__(self, coord_index: int, cause: Exception):
        self.coord_index = coord_index
        self.cause = cause
        super().__init__(f"coordinate {coord_index}: {cause}")


class InvalidGrid(UsageError):
    pass


class InvalidSplit(UsageError):
    pass


class MissingSplit(UsageError):
    pass


# -- geometry --------------------------------------------------------------

class ImmersionDegenerate(NumericalFailure):
    def __init__(self, point, detail: str = ""):
        self.point = point
        super().__init__(f"immersion degenerate at {list(point)} {detail}".rstrip())


class NumericalInstability(NumericalFailure):
    pass


class ZeroVector(NumericalFailure):
    pass


class NotUnitNormal(UsageError):
    pass


class SlantAngleSingular(NumericalFailure):
    pass


class OddSlantDimension(NumericalFailure):
    pass


class InvalidWarping(NumericalFailure):
    pass


class ProjectorDiscontinuity(NumericalFailure):
    pass


class StructureNotUniform(SlantlabError):
    """Mixed point classes across a grid. Reported in field reports, not raised by them."""


class NotAWarpedProduct(SlantlabError):
    """Metric fails the warped-product block tests. Reported as a flag by `detect_warped`."""
