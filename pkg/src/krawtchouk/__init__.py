"""Multivariate Krawtchouk polynomials on the multinomial distribution."""

from .basis import (
    OrthoBasis,
    OrthogonalMatrixH,
    character_basis,
    gks_check,
    helmert_basis,
    hypergroup_check,
    is_strongly_monotone,
    probability_vector,
    strongly_monotone_extremes,
    triple_products,
    validate_basis,
    xu_basis,
)
from .combinatorics import (
    enumerate_compositions,
    multinomial_coefficient,
    multinomial_pmf,
    pochhammer,
)

__version__ = "0.1.0"
