"""Exception hierarchy shared by all msh modules."""


class MSHError(Exception):
    """Base class for every error raised by msh."""


class Degenerate(MSHError):
    """A minimal subset does not determine a unique model."""


class InsufficientPoints(MSHError, ValueError):
    """Fewer data points than required."""


class GenerationExhausted(MSHError):
    """Too many consecutive degenerate draws while generating hypotheses."""


class DegenerateScale(MSHError):
    """IKOSE could not produce a positive inlier scale."""


class EmptyHypergraph(MSHError):
    """Every hypothesis was rejected during hypergraph construction."""


class ZeroVector(MSHError, ValueError):
    """A preference vector has no nonzero entry."""


class AllZeroWeights(MSHError):
    """Weight-aware sampling was asked to sample from all-zero weights."""


class TooFewVertices(MSHError):
    """Mode selection needs at least two sampled vertices."""


class DimensionMismatch(MSHError, ValueError):
    """Point dimension does not match the model family."""


class ParseError(MSHError, ValueError):
    """A dataset file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
