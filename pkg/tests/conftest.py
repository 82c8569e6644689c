from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import strategies as st


def random_rational_p(d: int, rng: random.Random, denom: int = 24, sort: bool = False) -> tuple:
    """Random strictly positive rational probability vector with small denominators."""
    while True:
        cuts = sorted(rng.sample(range(1, denom), d - 1)) if d > 1 else []
        parts = [b - a for a, b in zip([0] + cuts, cuts + [denom])]
        if all(parts):
            p = [Fraction(v, denom) for v in parts]
            if sort:
                p.sort(reverse=True)
            return tuple(p)


def strongly_monotone_p(d: int, rng: random.Random) -> tuple:
    """Random interior point of the strongly monotone cone (convex mix of the extreme points)."""
    from krawtchouk.basis import strongly_monotone_extremes

    ext = [e.p for e in strongly_monotone_extremes(d)]
    w = [Fraction(rng.randint(1, 9)) for _ in ext]
    tot = sum(w)
    return tuple(sum(wi * e[j] for wi, e in zip(w, ext)) / tot for j in range(d))


@st.composite
def rational_probability(draw, d: int, denom: int = 30):
    cuts = draw(st.lists(st.integers(1, denom - 1), min_size=d - 1, max_size=d - 1, unique=True))
    cuts = sorted(cuts)
    parts = [b - a for a, b in zip([0] + cuts, cuts + [denom])]
    return tuple(Fraction(v, denom) for v in parts)


@pytest.fixture
def rng():
    return random.Random(20240601)


P3 = (Fraction(1, 2), Fraction(1, 3), Fraction(1, 6))
P4 = (Fraction(2, 5), Fraction(3, 10), Fraction(1, 5), Fraction(1, 10))
