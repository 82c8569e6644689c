"""Exception hierarchy."""


class KrawtchoukError(ValueError):
    """Base class for all package errors."""


class CapacityError(KrawtchoukError):
    """An enumeration would exceed the configured capacity limit."""


class DimensionError(KrawtchoukError):
    """Inputs of incompatible dimensions."""


class InvalidProbabilityError(KrawtchoukError):
    """A probability vector that is not strictly positive or does not sum to one."""


class BasisConventionError(KrawtchoukError):
    """A basis does not satisfy the normalization a routine requires."""


class ZeroLastColumnError(KrawtchoukError):
    """Some h_{id} (or u_d^{(i)}) vanishes, so hypergroup quantities are undefined."""


class ZeroScaleError(ZeroLastColumnError):
    """Some b_i = u_d^{(i)} vanishes, so the scaled polynomial system is undefined."""


class InvalidCharacterTableError(KrawtchoukError):
    """A character table that fails the orthogonality relations."""


class UnsortedProbabilityError(KrawtchoukError):
    """The Metropolis construction needs p_1 >= ... >= p_d."""


class SymmetryError(KrawtchoukError):
    """A product-space kernel is not invariant under coordinate permutations."""


class ReversibilityError(KrawtchoukError):
    """Detailed balance fails beyond tolerance."""


class MarginError(KrawtchoukError):
    """A bivariate table whose margins are not the expected multinomial."""


class HypergroupPreconditionError(KrawtchoukError):
    """The base basis does not have the hypergroup property."""
