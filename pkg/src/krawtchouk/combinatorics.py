"""Enumeration of compositions and elementary combinatorial quantities.

Compositions (box-count vectors summing to N) are listed in
lexicographically descending order; every table in the package indexes
states by position in that order.  Multi-indices n = (n_1, ..., n_{d-1})
with |n| <= N are listed by total degree, lexicographically descending
within a degree.
"""

from __future__ import annotations

import math
import os
from functools import lru_cache
from typing import Sequence

from .errors import CapacityError, DimensionError

Composition = tuple[int, ...]
MultiIndex = tuple[int, ...]

DEFAULT_CAPACITY = 10**7
_capacity = [int(os.environ.get("KRAWTCHOUK_CAPACITY", DEFAULT_CAPACITY))]


def capacity() -> int:
    """Current maximal number of cells an enumeration may produce."""
    return _capacity[0]


def set_capacity(limit: int) -> int:
    """Set the enumeration capacity, returning the previous value."""
    if limit < 1:
        raise ValueError("capacity must be positive")
    old = _capacity[0]
    _capacity[0] = int(limit)
    return old


def check_capacity(cells: int, what: str = "enumeration") -> None:
    if cells > capacity():
        raise CapacityError(f"{what} needs {cells} cells, capacity is {capacity()}")


def count_compositions(d: int, N: int) -> int:
    return math.comb(d + N - 1, N)


@lru_cache(maxsize=256)
def _compositions(d: int, N: int) -> tuple[Composition, ...]:
    if d == 1:
        return ((N,),)
    out = []
    for first in range(N, -1, -1):
        for rest in _compositions(d - 1, N - first):
            out.append((first,) + rest)
    return tuple(out)


def enumerate_compositions(d: int, N: int) -> list[Composition]:
    """All nonnegative integer d-vectors summing to N, lexicographically descending.

    >>> enumerate_compositions(2, 2)
    [(2, 0), (1, 1), (0, 2)]
    """
    if d < 1 or N < 0:
        raise ValueError("need d >= 1 and N >= 0")
    check_capacity(count_compositions(d, N), f"compositions of {N} into {d} parts")
    return list(_compositions(d, N))


def composition_index(d: int, N: int) -> dict[Composition, int]:
    return {x: i for i, x in enumerate(enumerate_compositions(d, N))}


def multi_indices(d: int, N: int) -> list[MultiIndex]:
    """Polynomial indices n in N^{d-1} with |n| <= N, graded then lex descending."""
    if d < 1 or N < 0:
        raise ValueError("need d >= 1 and N >= 0")
    if d == 1:
        return [()]
    out: list[MultiIndex] = []
    for k in range(N + 1):
        out.extend(enumerate_compositions(d - 1, k))
    return out


def extend_index(n: Sequence[int], N: int) -> Composition:
    """n -> n+ = (N - |n|, n_1, ..., n_{d-1})."""
    rest = N - sum(n)
    if rest < 0:
        raise ValueError(f"|n| = {sum(n)} exceeds N = {N}")
    return (rest,) + tuple(n)


def unit(d: int, j: int, scale: int = 1) -> Composition:
    return tuple(scale if i == j else 0 for i in range(d))


def check_composition(x: Sequence[int], d: int | None = None, N: int | None = None) -> Composition:
    x = tuple(int(v) for v in x)
    if any(v < 0 for v in x):
        raise ValueError(f"negative entry in composition {x}")
    if d is not None and len(x) != d:
        raise DimensionError(f"composition {x} has length {len(x)}, expected {d}")
    if N is not None and sum(x) != N:
        raise ValueError(f"composition {x} sums to {sum(x)}, expected {N}")
    return x


def composition_type(z: Sequence[int], d: int) -> Composition:
    """Box counts of a label sequence z with labels in range(d)."""
    counts = [0] * d
    for label in z:
        counts[label] += 1
    return tuple(counts)


def multinomial_coefficient(x: Sequence[int]) -> int:
    """N! / prod x_i! as an exact integer."""
    out = 1
    total = 0
    for v in x:
        if v < 0:
            raise ValueError("negative multinomial part")
        total += v
        out *= math.comb(total, v)
    return out


def multinomial_pmf(x: Sequence[int], p: Sequence):
    """m(x, p) = C(N; x) prod p_j^{x_j}; exact when p is rational."""
    if len(x) != len(p):
        raise DimensionError(f"composition of length {len(x)} vs p of length {len(p)}")
    out = multinomial_coefficient(x)
    for xj, pj in zip(x, p):
        if xj:
            out = out * pj**xj
    return out


def multinomial_weights(d: int, N: int, p: Sequence) -> list:
    return [multinomial_pmf(x, p) for x in enumerate_compositions(d, N)]


def pochhammer(a, k: int, direction: str = "rising"):
    """Rising a(a+1)...(a+k-1) or falling a(a-1)...(a-k+1); 1 when k = 0."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    step = {"rising": 1, "falling": -1}[direction]
    out = 1
    for i in range(k):
        out = out * (a + step * i)
    return out


def rising(a, k: int):
    return pochhammer(a, k, "rising")


def falling(a, k: int):
    return pochhammer(a, k, "falling")


def bounded_vectors(length: int, total_max: int, caps: Sequence[int] | None = None):
    """Yield nonnegative integer vectors with sum <= total_max and entry-wise <= caps."""
    if length == 0:
        yield ()
        return
    top = total_max if caps is None else min(total_max, caps[0])
    for v in range(top + 1):
        rest_caps = None if caps is None else caps[1:]
        for rest in bounded_vectors(length - 1, total_max - v, rest_caps):
            yield (v,) + rest


def vectors_with_sum(length: int, total: int, caps: Sequence[int] | None = None):
    """Yield nonnegative integer vectors of given length and exact sum, entry-wise <= caps."""
    if length == 0:
        if total == 0:
            yield ()
        return
    top = total if caps is None else min(total, caps[0])
    if length == 1:
        if total <= top:
            yield (total,)
        return
    for v in range(top, -1, -1):
        rest_caps = None if caps is None else caps[1:]
        for rest in vectors_with_sum(length - 1, total - v, rest_caps):
            yield (v,) + rest


def contingency_tables(row_sums: Sequence[int], col_sums: Sequence[int]):
    """Yield nonnegative integer matrices (as tuples of rows) with the given margins."""
    if sum(row_sums) != sum(col_sums):
        return
    if not row_sums:
        yield ()
        return
    first, rest = row_sums[0], row_sums[1:]
    for row in vectors_with_sum(len(col_sums), first, col_sums):
        remaining = tuple(c - r for c, r in zip(col_sums, row))
        for tail in contingency_tables(rest, remaining):
            yield (row,) + tail


def multiset_permutations(counts: Sequence[int]):
    """Yield every distinct sequence containing label l exactly counts[l] times."""
    total = sum(counts)
    counts = list(counts)
    seq = [0] * total

    def rec(pos):
        if pos == total:
            yield tuple(seq)
            return
        for label, c in enumerate(counts):
            if c:
                counts[label] -= 1
                seq[pos] = label
                yield from rec(pos + 1)
                counts[label] += 1

    yield from rec(0)
