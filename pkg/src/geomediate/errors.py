"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) and a ``details``
mapping so the command line front end can emit machine-readable reports.
"""


class GeomediateError(Exception):
    """Base class for all data and model errors raised by the package."""

    def __init__(self, message="", **details):
        super().__init__(message or self.__class__.__name__)
        self.details = details

    @property
    def code(self):
        return type(self).__name__

    def to_dict(self):
        out = {"error": self.code, "message": str(self)}
        out.update({k: _jsonable(v) for k, v in self.details.items()})
        return out


def _jsonable(value):
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


# data ingestion
class MissingColumn(GeomediateError, KeyError):
    pass


class NonNumericCell(GeomediateError, ValueError):
    pass


class DuplicateCoordinate(GeomediateError, ValueError):
    pass


class TooFewRows(GeomediateError, ValueError):
    pass


class ZeroVariance(GeomediateError, ValueError):
    pass


class BadConfig(GeomediateError, ValueError):
    pass


class InconsistentSpec(GeomediateError, ValueError):
    pass


class DimensionMismatch(GeomediateError, ValueError):
    pass


# linear algebra
class RankDeficient(GeomediateError, ValueError):
    pass


class PerfectCollinearity(GeomediateError, ValueError):
    pass


class LocalRankDeficient(GeomediateError, ValueError):
    pass


class DegreesOfFreedomExhausted(GeomediateError, ValueError):
    pass


class NonPositiveDefiniteCovariance(GeomediateError, ValueError):
    pass


class BootstrapDegenerate(GeomediateError, RuntimeError):
    pass


# geometry and search
class DegenerateCoordinates(GeomediateError, ValueError):
    pass


class KOutOfRange(GeomediateError, ValueError):
    pass


class NonpositiveBandwidth(GeomediateError, ValueError):
    pass


class BadBracket(GeomediateError, ValueError):
    pass


class MaxIterExceeded(GeomediateError, RuntimeError):
    pass


# surfaces
class EmptySamples(GeomediateError, ValueError):
    pass


class BadGridSpec(GeomediateError, ValueError):
    pass


class AllMasked(GeomediateError, ValueError):
    pass


class EmptyMask(GeomediateError, ValueError):
    pass
