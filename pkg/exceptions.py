"""
Exception hierarchy for the weighted geometry verification toolkit
Numeric failures derive from GeometryError, configuration failures from ScenarioError
"""


class GeometryError(Exception):
    """Base class for numeric and geometric failures"""


class ChartDomainError(GeometryError, ValueError):
    """A point lies outside the chart domain of a model"""


class MetricNotPositiveDefiniteError(GeometryError):
    """Metric components are not symmetric positive-definite"""


class PerturbationNotPositiveDefiniteError(MetricNotPositiveDefiniteError):
    """g + t*h loses positive-definiteness within the variation step"""


class DegenerateDensityError(GeometryError):
    """df vanishes on every sampled point, nothing left to extract"""


class PotentialSignError(GeometryError):
    """The potential u has the wrong sign where positivity is required"""


class PotentialNotVanishingError(GeometryError):
    """The potential u does not vanish on the boundary"""


class UnsupportedBoundaryError(GeometryError):
    """Integration by parts would leave boundary terms unaccounted for"""


class IllConditionedBasisError(GeometryError):
    """The weighted Gram matrix of a basis is numerically singular"""


class EigenSolverError(GeometryError):
    """The dense eigensolver or SVD did not converge"""


class ScenarioError(Exception):
    """Base class for scenario configuration errors"""


class UnknownIdentifierError(ScenarioError, KeyError):
    """A model, density, identity or basis id is not in its registry"""

    def __init__(self, kind, key, valid):
        self.kind = kind
        self.key = key
        self.valid = sorted(valid)
        super().__init__(f"Unknown {kind} '{key}'. Valid {kind} ids: {', '.join(self.valid)}")

    def __str__(self):
        return self.args[0]


class MalformedScenarioError(ScenarioError, ValueError):
    """A scenario value cannot be parsed or violates its contract"""
