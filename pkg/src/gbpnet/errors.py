"""Exception hierarchy shared by every gbpnet module."""


class GbpError(Exception):
    """Base class for all errors raised by gbpnet."""


class DimMismatch(GbpError, ValueError):
    """A label shared between two tensors carries different dimensions."""


class UnknownLabel(GbpError, KeyError):
    """An operation referenced a label the tensor does not carry."""

    def __str__(self):
        return Exception.__str__(self)


class ZeroToNegativePower(GbpError, ArithmeticError):
    """A structural zero was raised to a negative power."""


class DegenerateNormalizer(GbpError, ArithmeticError):
    """A normalization constant vanished (or became non-finite)."""


class NonFiniteEntry(GbpError, ArithmeticError):
    """A message update produced NaN or infinite entries."""


class LabelMismatch(GbpError, ValueError):
    """An explicit message does not live on its child region's labels."""


class CoverageError(GbpError, ValueError):
    """Some network tensor is not contained in any parent region."""


class GeometryMissing(GbpError, ValueError):
    """A region preset needs plaquette/voxel metadata the model did not supply."""


class DegenerateRegionGraph(GbpError, ValueError):
    """A child region has c_b + |P(b)| == 0, so its update is undefined."""


class NotAFixedPoint(GbpError, ValueError):
    """Linear stability was requested around messages that are not a fixed point."""


class UncoveredIndex(GbpError, ValueError):
    """A tensor subset contains an index covered by no region inside it."""


class BudgetExceeded(GbpError, MemoryError):
    """Exact contraction would create an intermediate above the entry budget."""

    def __init__(self, size, budget):
        super().__init__(f"intermediate of {size} entries exceeds budget {budget}")
        self.size = size
        self.budget = budget


class QuadratureNonConvergence(GbpError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class OutsideDomain(GbpError, ValueError):
    """An analytic formula was evaluated outside its domain."""


class EmptyGroup(GbpError, ValueError):
    """Aggregation was asked to summarise a group without records."""


class DivisionDegeneracy(GbpError, ArithmeticError):
    """Stitched beliefs put nonzero mass on entries where a divisor vanishes."""
