"""Multivariate Krawtchouk polynomials Q_n(x, u).

Q_n(x, u) is the coefficient of w_1^{n_1} ... w_{d-1}^{n_{d-1}} in

    prod_j (1 + sum_l w_l u_j^{(l)})^{x_j}.

Three evaluators are provided (generating function, hypergeometric series
and symmetrized sum over label sequences) so that each can serve as an
oracle for the others.  All evaluators work on the rational ``core`` of a
basis and multiply by ``u.index_factor(n)`` at the end, which keeps the
Irwin-Helmert polynomials exact.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .basis import OrthoBasis, OrthogonalMatrixH, gks_values
from .combinatorics import (
    check_capacity,
    check_composition,
    contingency_tables,
    enumerate_compositions,
    extend_index,
    multi_indices,
    multinomial_coefficient,
    multinomial_pmf,
    rising,
    vectors_with_sum,
)
from .errors import BasisConventionError, CapacityError, DimensionError, ZeroScaleError
from .scalar import format_scalar, surd

SYMMETRIZED_MAX_N = 10


# ---------------------------------------------------------------------------
# generating-function evaluation


def _mul_linear(poly: dict, lin: Sequence, cap_vec=None, cap_total=None) -> dict:
    """poly * (1 + sum_l lin[l] w_l), dropping monomials beyond the caps."""
    out = dict(poly)
    m = len(lin)
    for mono, c in poly.items():
        if cap_total is not None and sum(mono) >= cap_total:
            continue
        for l in range(m):
            a = lin[l]
            if a == 0:
                continue
            if cap_vec is not None and mono[l] >= cap_vec[l]:
                continue
            new = mono[:l] + (mono[l] + 1,) + mono[l + 1 :]
            out[new] = out.get(new, 0) + c * a
    return out


def _gf_core_poly(x: Sequence[int], core, cap_vec=None, cap_total=None) -> dict:
    d = len(core)
    poly = {(0,) * (d - 1): 1}
    for j, xj in enumerate(x):
        lin = [core[l][j] for l in range(1, d)]
        for _ in range(xj):
            poly = _mul_linear(poly, lin, cap_vec, cap_total)
    return poly


def _check_nx(n, x, u: OrthoBasis):
    n = tuple(int(v) for v in n)
    x = check_composition(x, d=u.d)
    if len(n) != u.d - 1:
        raise DimensionError(f"multi-index {n} should have length {u.d - 1}")
    if any(v < 0 for v in n):
        raise ValueError(f"negative multi-index {n}")
    if sum(n) > sum(x):
        raise IndexError(f"|n| = {sum(n)} exceeds N = {sum(x)}")
    return n, x


def eval_core_gf(n, x, u: OrthoBasis):
    """Q_n(x, core): the generating-function coefficient for the unscaled core rows."""
    n, x = _check_nx(n, x, u)
    poly = _gf_core_poly(x, u.core, cap_vec=n)
    return poly.get(n, 0)


def eval_Q_gf(n, x, u: OrthoBasis):
    """Q_n(x, u) by truncated expansion of the generating function.

    >>> from krawtchouk.basis import helmert_basis
    >>> eval_Q_gf((1,), (0, 2), helmert_basis(["1/2", "1/2"]))
    Fraction(2, 1)
    """
    return eval_core_gf(n, x, u) * u.index_factor(n)


def all_Q_at(x, u: OrthoBasis) -> dict:
    """Every Q_n(x, core) with |n| <= |x| from one expansion (core values, no scale factor)."""
    x = check_composition(x, d=u.d)
    return _gf_core_poly(x, u.core, cap_total=sum(x))


# ---------------------------------------------------------------------------
# hypergeometric evaluation


def _row_tables(m, caps):
    """(d-1)x(d-1) nonnegative matrices with row sums <= m_i and column sums <= caps."""
    if not m:
        yield ()
        return
    k = len(caps)
    for total in range(m[0] + 1):
        for row in vectors_with_sum(k, total, caps):
            rest = tuple(c - r for c, r in zip(caps, row))
            for tail in _row_tables(m[1:], rest):
                yield (row,) + tail


def hypergeometric_F1(m, x, N: int, umat) -> object:
    """F_1^{(d-1)}(-m, -x; -N; u) summed over matrices with row sums <= m and column sums <= x."""
    total = 0
    r = len(m)
    for k in _row_tables(tuple(m), tuple(x)):
        rows = [sum(row) for row in k]
        cols = [sum(k[i][j] for i in range(r)) for j in range(r)]
        kk = sum(rows)
        num = 1
        for i in range(r):
            num *= rising(-m[i], rows[i])
        for j in range(r):
            num *= rising(-x[j], cols[j])
        den = rising(-N, kk)
        term = Fraction(num, den) if isinstance(num, int) and isinstance(den, int) else num / den
        for i in range(r):
            for j in range(r):
                if k[i][j]:
                    term = term * umat[i][j] ** k[i][j] / math.factorial(k[i][j])
        total = total + term
    return total


def eval_Q_hypergeometric(m, x, v: OrthoBasis, rescale: bool = True):
    """Q_m(x, v) through the Appell-Lauricella type series.

    The series needs the convention v_d^{(l)} = 1.  With ``rescale`` each
    row is divided by its last entry b_l first and the result multiplied
    by prod b_l^{m_l}; otherwise a basis not in the convention raises
    :class:`BasisConventionError`.  The prefactor is the multinomial
    N! / ((N - |m|)! prod m_i!).
    """
    m, x = _check_nx(m, x, v)
    d = v.d
    N = sum(x)
    last = [v.core[l][d - 1] for l in range(1, d)]
    if any(b == 0 for b in last):
        raise ZeroScaleError("some u_d^{(l)} = 0; the hypergeometric form is undefined")
    if not rescale:
        b_full = v.last_column()[1:]
        if any(b != 1 for b in b_full):
            raise BasisConventionError("basis does not satisfy v_d^{(l)} = 1")
    one = Fraction(1) if v.exact else 1.0
    umat = [[one - v.core[i][j] * one / last[i - 1] for j in range(d - 1)] for i in range(1, d)]
    value = multinomial_coefficient(extend_index(m, N)) * hypergeometric_F1(m, x[: d - 1], N, umat)
    for l, ml in enumerate(m):
        value = value * last[l] ** ml
    return value * v.index_factor(m)


# ---------------------------------------------------------------------------
# symmetrized evaluation


def eval_Q_symmetrized(n, z: Sequence[int], u: OrthoBasis):
    """Sum over disjoint position sets A_1, ..., A_{d-1} (|A_l| = n_l) of prod_l prod_{k in A_l} u_{z_k}^{(l)}.

    ``z`` is a label sequence with entries in range(d).  Factorial cost:
    limited to N <= 10.
    """
    z = tuple(int(v) for v in z)
    N = len(z)
    if N > SYMMETRIZED_MAX_N:
        raise CapacityError(f"symmetrized evaluation limited to N <= {SYMMETRIZED_MAX_N}")
    n = tuple(int(v) for v in n)
    if len(n) != u.d - 1:
        raise DimensionError(f"multi-index {n} should have length {u.d - 1}")
    if sum(n) > N:
        raise IndexError(f"|n| = {sum(n)} exceeds N = {N}")
    core = u.core

    def rec(l: int, free: tuple):
        if l == len(n):
            return 1
        total = 0
        row = core[l + 1]
        for chosen in itertools.combinations(free, n[l]):
            prod = 1
            for k in chosen:
                prod = prod * row[z[k]]
                if prod == 0:
                    break
            if prod == 0:
                continue
            rest = tuple(k for k in free if k not in chosen)
            total = total + prod * rec(l + 1, rest)
        return total

    return rec(0, tuple(range(N))) * u.index_factor(n)


def labels_of(x: Sequence[int]) -> tuple[int, ...]:
    """The sorted label sequence with x_j copies of j."""
    return tuple(j for j, xj in enumerate(x) for _ in range(xj))


# ---------------------------------------------------------------------------
# explicit polynomial form (independent of N)


def binomial_coefficients(n, u: OrthoBasis) -> dict:
    """Q_n(x, core) = sum_k coef[k] prod_j C(x_j, k_j) with |k| = |n|.

    The coefficients involve only the basis, never N, which is the
    stability property of the family.
    """
    d = u.d
    n = tuple(n)
    deg = sum(n)
    out = {}
    for k in vectors_with_sum(d, deg):
        poly = {(0,) * (d - 1): 1}
        for j, kj in enumerate(k):
            lin = [u.core[l][j] for l in range(1, d)]
            for _ in range(kj):
                poly = _pure_linear(poly, lin, n)
        c = poly.get(n, 0)
        if c != 0:
            out[k] = c
    return out


def _pure_linear(poly, lin, cap):
    out = {}
    for mono, c in poly.items():
        for l, a in enumerate(lin):
            if a == 0 or mono[l] >= cap[l]:
                continue
            new = mono[:l] + (mono[l] + 1,) + mono[l + 1 :]
            out[new] = out.get(new, 0) + c * a
    return out


def eval_Q_binomial(n, x, u: OrthoBasis):
    """Q_n(x, u) from :func:`binomial_coefficients`; valid for any N >= |n|."""
    total = 0
    for k, c in binomial_coefficients(n, u).items():
        b = 1
        for xj, kj in zip(x, k):
            b *= math.comb(xj, kj)
        total = total + c * b
    return total * u.index_factor(n)


def _falling_poly(k: int) -> list[Fraction]:
    """Monomial coefficients of C(x, k) = x(x-1)...(x-k+1)/k!."""
    coeffs = [Fraction(1)]
    for i in range(k):
        new = [Fraction(0)] * (len(coeffs) + 1)
        for e, c in enumerate(coeffs):
            new[e + 1] += c
            new[e] -= i * c
        coeffs = new
    f = math.factorial(k)
    return [c / f for c in coeffs]


def monomial_coefficients(n, u: OrthoBasis) -> dict:
    """Q_n(x, core) as a polynomial in x_1, ..., x_d: {exponent tuple: coefficient}."""
    out: dict = {}
    for k, c in binomial_coefficients(n, u).items():
        parts = [_falling_poly(kj) for kj in k]
        for exps in itertools.product(*[range(len(pj)) for pj in parts]):
            coef = c
            for pj, e in zip(parts, exps):
                coef = coef * pj[e]
                if coef == 0:
                    break
            if coef != 0:
                out[exps] = out.get(exps, 0) + coef
    return {e: c for e, c in out.items() if c != 0}


def total_degree(n, u: OrthoBasis) -> int:
    """Total degree of Q_n in x; equals |n| for any basis."""
    coeffs = monomial_coefficients(n, u)
    return max((sum(e) for e in coeffs), default=-1)


# ---------------------------------------------------------------------------
# conditional binomial (Xu) polynomials


def eval_xu_K(n, x, p):
    """Conditional-binomial multivariate Krawtchouk polynomial K_n(x; p, N).

    Each factor (-N_j)_{(n_j)} K_{n_j}(x_j; p'_j, N_j) is evaluated as the
    terminating sum  sum_k (-n_j)_k (-x_j)_k / k! (1/p'_j)^k (-N_j + k)_{(n_j - k)},
    which stays finite when N_j < n_j.
    """
    d = len(p)
    n = tuple(int(v) for v in n)
    x = check_composition(x, d=d)
    N = sum(x)
    if len(n) != d - 1:
        raise DimensionError(f"multi-index {n} should have length {d - 1}")
    if sum(n) > N:
        raise IndexError(f"|n| = {sum(n)} exceeds N = {N}")
    value = 1
    head_p = 0
    head_x = 0
    for j in range(d - 1):
        pj = p[j] / (1 - head_p)
        Nj = N - head_x - sum(n[j + 1 :])
        nj = n[j]
        s = 0
        for k in range(nj + 1):
            term = rising(-nj, k) * rising(-x[j], k) * rising(-Nj + k, nj - k)
            if term:
                s = s + term * (1 / pj) ** k / math.factorial(k)
        value = value * pj**nj * s
        head_p += p[j]
        head_x += x[j]
    return value * (-1) ** sum(n) / rising(-N, sum(n))


def xu_constant(n, p, N: int):
    """The factor c with K_n(x; p, N) = c * Q_n(x, xu_basis(p))."""
    c = 1
    head = 0
    for j, nj in enumerate(n):
        c = c * math.factorial(nj) * (p[j] / (1 - head)) ** nj
        head += p[j]
    return c / rising(-N, sum(n))


# ---------------------------------------------------------------------------
# tables


@dataclass
class PolynomialTable:
    """Q_n(x, u) for all |n| <= N and x in the composition space.

    ``core[r, c]`` is Q_n(x, core) for n = indices[r], x = states[c]; the
    actual value is ``factors[r] * core[r, c]`` (see :attr:`values`).
    """

    basis: OrthoBasis
    N: int
    indices: list
    states: list
    core: np.ndarray = field(repr=False)
    factors: list = field(repr=False)

    @property
    def p(self):
        return self.basis.p

    @property
    def exact(self) -> bool:
        return self.basis.exact

    def index_of(self, n) -> int:
        return self._index_map()[tuple(n)]

    def state_of(self, x) -> int:
        return self._state_map()[tuple(x)]

    def _index_map(self):
        if not hasattr(self, "_imap"):
            self._imap = {n: i for i, n in enumerate(self.indices)}
        return self._imap

    def _state_map(self):
        if not hasattr(self, "_smap"):
            self._smap = {x: i for i, x in enumerate(self.states)}
        return self._smap

    @property
    def values(self) -> np.ndarray:
        out = np.empty(self.core.shape, dtype=object)
        for r, f in enumerate(self.factors):
            for c in range(self.core.shape[1]):
                out[r, c] = f * self.core[r, c]
        return out

    def value(self, n, x):
        r = self.index_of(n)
        return self.factors[r] * self.core[r, self.state_of(x)]

    def row(self, n) -> list:
        r = self.index_of(n)
        f = self.factors[r]
        return [f * v for v in self.core[r]]

    def weights(self) -> list:
        return [multinomial_pmf(x, self.p) for x in self.states]

    def float_values(self) -> np.ndarray:
        vals = self.values
        if any(isinstance(v, complex) for v in vals.flat):
            return vals.astype(complex)
        return np.array([[float(v) for v in row] for row in vals])

    def gram(self) -> list:
        """G[r][s] = sum_x m(x, p) Q_{n_r}(x) Q_{n_s}(x)."""
        w = self.weights()
        R = len(self.indices)
        out = [[0] * R for _ in range(R)]
        for r in range(R):
            for s in range(r, R):
                acc = 0
                cr, cs = self.core[r], self.core[s]
                for c, wc in enumerate(w):
                    if cr[c] != 0 and cs[c] != 0:
                        acc = acc + wc * cr[c] * cs[c]
                acc = acc * (self.factors[r] * self.factors[s])
                out[r][s] = out[s][r] = acc
        return out

    def orthogonality_deviation(self):
        """max |G - diag(norm_Q)| over all pairs."""
        G = self.gram()
        worst = 0
        for r, n in enumerate(self.indices):
            target = norm_Q(n, self.basis, self.N)
            for s in range(len(self.indices)):
                dev = abs(G[r][s] - (target if r == s else 0))
                if dev > worst:
                    worst = dev
        return worst

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n"] + [" ".join(map(str, x)) for x in self.states])
        for n, row in zip(self.indices, self.values):
            writer.writerow([" ".join(map(str, n))] + [_csv_scalar(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "d": self.basis.d,
            "N": self.N,
            "p": [format_scalar(v) for v in self.p],
            "basis": self.basis.name,
            "backend": "exact" if self.exact else "float",
            "indices": [list(n) for n in self.indices],
            "states": [list(x) for x in self.states],
            "values": [[format_scalar(v) for v in row] for row in self.values],
        }


def _csv_scalar(v) -> str:
    s = format_scalar(v)
    if isinstance(s, list):
        return f"{s[0]}{s[1]:+}j"
    return str(s)


def build_table(u: OrthoBasis, N: int, p=None) -> PolynomialTable:
    """Complete table of Q_n(x, u), rows in graded order, columns in composition order."""
    if p is not None and len(p) != u.d:
        raise DimensionError("p and basis disagree on d")
    d = u.d
    indices = multi_indices(d, N)
    from .combinatorics import count_compositions

    check_capacity(count_compositions(d, N) * len(indices), "polynomial table")
    states = enumerate_compositions(d, N)
    dtype = object
    core = np.empty((len(indices), len(states)), dtype=dtype)
    for c, x in enumerate(states):
        poly = all_Q_at(x, u)
        for r, n in enumerate(indices):
            core[r, c] = poly.get(n, 0)
    factors = [u.index_factor(n) for n in indices]
    return PolynomialTable(basis=u, N=N, indices=indices, states=states, core=core, factors=factors)


def norm_Q(n, u: OrthoBasis, N: int):
    """E[Q_n^2] = C(N, |n|) C(|n|; n) prod a_j^{n_j}."""
    out = multinomial_coefficient(extend_index(n, N))
    for a, nj in zip(u.weights[1:], n):
        out = out * a**nj
    return out


def orthonormal_Q(n, x, u: OrthoBasis):
    """Q_n(x) / sqrt(norm_Q), exact as a surd when possible."""
    N = sum(x)
    q = eval_Q_gf(n, x, u)
    nq = norm_Q(n, u, N)
    return q / (surd(1, nq) if u.exact else math.sqrt(nq))


# ---------------------------------------------------------------------------
# scaled polynomials


def _last_core(u: OrthoBasis) -> list:
    b = [u.core[l][u.d - 1] for l in range(1, u.d)]
    if any(v == 0 for v in b):
        raise ZeroScaleError("u_d^{(i)} = 0 for some i; the scaled polynomials are undefined")
    return b


def Q_at_last(n, u: OrthoBasis, N: int):
    """Q_n(N e_d, u) = C(N; n+) prod b_i^{n_i}."""
    out = multinomial_coefficient(extend_index(n, N))
    for b, nj in zip(u.last_column()[1:], n):
        out = out * b**nj
    return out


def scaled_Q(n, x, u: OrthoBasis):
    """Q^diamond_n(x) = Q_n(x) / Q_n(N e_d); rational whenever the core is."""
    b = _last_core(u)
    N = sum(x)
    den = multinomial_coefficient(extend_index(n, N))
    for bl, nl in zip(b, n):
        den = den * bl**nl
    return eval_core_gf(n, x, u) / den


def h_diamond(n, u: OrthoBasis, N: int):
    """h^diamond_n = C(N; n+) prod (b_i^2 / a_i)^{n_i}, so E[(Q^diamond_n)^2] = 1 / h^diamond_n.

    For an orthonormal basis this is C(N; n+) prod b_i^{2 n_i}.
    """
    _last_core(u)
    out = multinomial_coefficient(extend_index(n, N))
    b = u.last_column()[1:]
    for bl, al, nl in zip(b, u.weights[1:], n):
        out = out * (bl * bl / al) ** nl
    return out


@dataclass
class ScaledTable:
    basis: OrthoBasis
    N: int
    indices: list
    states: list
    values: np.ndarray = field(repr=False)
    h: list = field(repr=False)


def build_scaled_table(u: OrthoBasis, N: int) -> ScaledTable:
    b = _last_core(u)
    table = build_table(u, N)
    values = np.empty(table.core.shape, dtype=object)
    for r, n in enumerate(table.indices):
        den = multinomial_coefficient(extend_index(n, N))
        for bl, nl in zip(b, n):
            den = den * bl**nl
        for c in range(len(table.states)):
            values[r, c] = table.core[r, c] / den
    h = [h_diamond(n, u, N) for n in table.indices]
    return ScaledTable(basis=u, N=N, indices=table.indices, states=table.states, values=values, h=h)


# ---------------------------------------------------------------------------
# dual polynomials


@dataclass
class DualTable:
    """hat Q_{n+}(x, H) with rows n+ and columns x, both in composition order."""

    H: OrthogonalMatrixH
    N: int
    states: list
    values: np.ndarray = field(repr=False)

    def value(self, nplus, x):
        idx = {s: i for i, s in enumerate(self.states)}
        return self.values[idx[tuple(nplus)], idx[tuple(x)]]


def dual_table(H: OrthogonalMatrixH, N: int) -> DualTable:
    """Coefficients of the double generating function [sum_ij h_ij w_i z_j]^N.

    hat Q_{n+}(x) = N! / (C(N; n+) C(N; x)) * sum_k prod h_ij^{k_ij} / k_ij!
    over contingency tables k with row sums n+ and column sums x.
    """
    d = H.d
    states = enumerate_compositions(d, N)
    check_capacity(len(states) ** 2, "dual table")
    exact = H.exact
    fN = math.factorial(N)
    h = None if exact else H.to_array()
    values = np.empty((len(states), len(states)), dtype=object)
    for r, nplus in enumerate(states):
        for c, x in enumerate(states):
            acc = 0
            for k in contingency_tables(nplus, x):
                term = Fraction(1) if exact else 1.0
                for i in range(d):
                    for j in range(d):
                        kij = k[i][j]
                        if kij:
                            base = H.core[i][j] if exact else h[i, j]
                            term = term * base**kij / math.factorial(kij)
                    if term == 0:
                        break
                acc = acc + term
            scale = Fraction(fN, multinomial_coefficient(nplus) * multinomial_coefficient(x))
            if exact:
                rad = Fraction(1)
                for i in range(d):
                    rad *= Fraction(H.row2[i]) ** nplus[i]
                for j in range(d):
                    rad *= Fraction(H.col2[j]) ** x[j]
                values[r, c] = surd(acc * scale, rad)
            else:
                values[r, c] = float(acc) * float(scale)
    return DualTable(H=H, N=N, states=states, values=values)


def dual_from_polynomials(u: OrthoBasis, N: int) -> DualTable:
    """hat Q_{n+}(x, H) = C(N; n+)^{-1} Q_n(x, u) prod_j p_j^{x_j / 2} for H built from u."""
    table = build_table(u, N)
    states = table.states
    values = np.empty((len(states), len(states)), dtype=object)
    for r, nplus in enumerate(states):
        n = nplus[1:]
        row = table.row(n)
        cn = multinomial_coefficient(nplus)
        for c, x in enumerate(states):
            if u.exact:
                rad = Fraction(1)
                for pj, xj in zip(u.p, x):
                    rad *= Fraction(pj) ** xj
                values[r, c] = row[c] * surd(Fraction(1, cn), rad)
            else:
                values[r, c] = row[c] / cn * math.prod(float(pj) ** (xj / 2) for pj, xj in zip(u.p, x))
    return DualTable(H=u.H(), N=N, states=states, values=values)


@dataclass
class DualityReport:
    duality_deviation: object
    first_orthogonality_deviation: object
    second_orthogonality_deviation: object

    def max_deviation(self):
        return max(
            self.duality_deviation,
            self.first_orthogonality_deviation,
            self.second_orthogonality_deviation,
        )


def check_duality(H: OrthogonalMatrixH, N: int) -> DualityReport:
    """Deviations in hat Q_{n+}(x, H) = hat Q_x(n+, H^T) and both dual orthogonality sums."""
    A = dual_table(H, N)
    B = dual_table(H.T, N)
    S = A.states
    mc = [multinomial_coefficient(s) for s in S]
    R = len(S)
    dual_dev = 0
    for r in range(R):
        for c in range(R):
            dev = abs(A.values[r, c] - B.values[c, r])
            if dev > dual_dev:
                dual_dev = dev
    first = 0
    for a in range(R):
        for b in range(a, R):
            s = sum(A.values[a, c] * A.values[b, c] * mc[c] for c in range(R))
            target = Fraction(1, mc[a]) if a == b else 0
            first = max(first, abs(s - target))
    second = 0
    for x in range(R):
        for y in range(x, R):
            s = sum(B.values[r, x] * B.values[r, y] * mc[r] for r in range(R))
            target = Fraction(1, mc[x]) if x == y else 0
            second = max(second, abs(s - target))
    return DualityReport(dual_dev, first, second)


# ---------------------------------------------------------------------------
# transforms, recurrence, reproducing kernels


def transform_forms(phi, u: OrthoBasis) -> list:
    """T_i(phi) = sum_j phi_j p_j u_j^{(i)} for every basis index i."""
    return [
        sum(phi[j] * u.p[j] * u.core[i][j] for j in range(u.d)) * u.row_factor(i)
        for i in range(u.d)
    ]


def transform_check(phi, n, u: OrthoBasis, p=None, N: int | None = None):
    """(lhs, rhs) of E[prod phi_i^{X_i} Q_n(X)] = C(N,|n|) C(|n|; n) T_0^{N-|n|} prod T_i^{n_i}."""
    if p is not None and len(p) != u.d:
        raise DimensionError("p and basis disagree on d")
    if N is None:
        raise ValueError("N is required")
    n = tuple(n)
    lhs = 0
    for x in enumerate_compositions(u.d, N):
        w = multinomial_pmf(x, u.p)
        for phij, xj in zip(phi, x):
            w = w * phij**xj
        if w != 0:
            lhs = lhs + w * eval_core_gf(n, x, u)
    lhs = lhs * u.index_factor(n)
    T = transform_forms(phi, u)
    rhs = multinomial_coefficient(extend_index(n, N)) * T[0] ** (N - sum(n))
    for Ti, ni in zip(T[1:], n):
        rhs = rhs * Ti**ni
    return lhs, rhs


@dataclass
class RecurrenceReport:
    """Expansion of S_i Q*_n in {Q*_m}: exact projection versus two closed forms."""

    i: int
    n: tuple
    projection: dict
    published: dict
    derived: dict

    @property
    def matches_published(self) -> bool:
        return _same_expansion(self.projection, self.published)

    @property
    def matches_derived(self) -> bool:
        return _same_expansion(self.projection, self.derived)

    def to_json(self) -> dict:
        def enc(dct):
            return [{"m": list(m), "coef": format_scalar(c)} for m, c in sorted(dct.items())]

        return {
            "i": self.i,
            "n": list(self.n),
            "projection": enc(self.projection),
            "published": enc(self.published),
            "derived": enc(self.derived),
            "matches_published": self.matches_published,
            "matches_derived": self.matches_derived,
        }


def _same_expansion(a: dict, b: dict, tol: float = 1e-9) -> bool:
    keys = set(a) | set(b)
    for k in keys:
        x, y = a.get(k, 0), b.get(k, 0)
        if isinstance(x, float) or isinstance(y, float):
            if abs(x - y) > tol:
                return False
        elif x != y:
            return False
    return True


def _add(dct: dict, m, coef, N: int):
    if any(v < 0 for v in m) or sum(m) > N or coef == 0:
        return
    dct[m] = dct.get(m, 0) + coef


def recurrence_coefficients(i: int, n, u: OrthoBasis, N: int, table: PolynomialTable | None = None) -> RecurrenceReport:
    """Expand S_i(x) Q*_n(x), Q*_n = prod n_l! Q_n, in the basis {Q*_m}.

    ``i`` is a basis index in 1..d-1.  ``projection`` comes from inner
    products with the table; ``published`` uses coefficients
    {1 at n+e_i, N-|n|+1 at n-e_i, c(i,l,k) at n-e_l+e_k}; ``derived``
    uses {1, n_i a_i (N-|n|+1), n_l c(i,l,k)/a_k} at the same places.
    Indices outside 0 <= m, |m| <= N are dropped.
    """
    d = u.d
    if not 1 <= i <= d - 1:
        raise ValueError("i must be a basis index in 1..d-1")
    n = tuple(n)
    if table is None:
        table = build_table(u, N)
    fact = lambda m: math.prod(math.factorial(v) for v in m)  # noqa: E731
    w = table.weights()
    s_i = [sum(u.core[i][j] * x[j] for j in range(d)) * u.row_factor(i) for x in table.states]
    qn = table.row(n)
    f = [s * q * fact(n) for s, q in zip(s_i, qn)]
    projection = {}
    for m in table.indices:
        qm = table.row(m)
        inner = sum(wc * fc * qc for wc, fc, qc in zip(w, f, qm) if fc != 0 and qc != 0)
        coef = inner / (fact(m) * norm_Q(m, u, N))
        if coef != 0 and not (isinstance(coef, float) and abs(coef) < 1e-12):
            projection[m] = coef
    c = gks_values(u)
    cval = lambda a, b, e: c[tuple(sorted((a, b, e)))]  # noqa: E731
    a = u.weights
    ei = lambda k: tuple(1 if t == k - 1 else 0 for t in range(d - 1))  # noqa: E731
    plus = lambda m, v: tuple(x + y for x, y in zip(m, v))  # noqa: E731
    minus = lambda m, v: tuple(x - y for x, y in zip(m, v))  # noqa: E731
    published: dict = {}
    derived: dict = {}
    _add(published, plus(n, ei(i)), 1, N)
    _add(derived, plus(n, ei(i)), 1, N)
    _add(published, minus(n, ei(i)), N - sum(n) + 1, N)
    _add(derived, minus(n, ei(i)), n[i - 1] * a[i] * (N - sum(n) + 1), N)
    for l in range(1, d):
        for k in range(1, d):
            m = plus(minus(n, ei(l)), ei(k))
            _add(published, m, cval(i, l, k), N)
            _add(derived, m, n[l - 1] * cval(i, l, k) / a[k], N)
    return RecurrenceReport(i=i, n=n, projection=projection, published=published, derived=derived)


def reproducing_kernel(deg: int, x, y, u: OrthoBasis, p=None):
    """sum_{|n| = deg} Q_n(x) Q_n(y) / norm_Q(n): the degree-deg kernel of the orthonormalized system."""
    if p is not None and len(p) != u.d:
        raise DimensionError("p and basis disagree on d")
    N = sum(x)
    if sum(y) != N:
        raise ValueError("x and y must have the same total")
    px = all_Q_at(x, u)
    py = all_Q_at(y, u)
    total = 0
    for n in vectors_with_sum(u.d - 1, deg):
        qx, qy = px.get(n, 0), py.get(n, 0)
        if qx == 0 or qy == 0:
            continue
        f = u.index_factor(n)
        total = total + qx * qy * (f * f) / norm_Q(n, u, N)
    return total


def leading_term_reconstruction(n, x, u: OrthoBasis):
    """E[prod S_l(Y)^{n_l} / prod n_l! * K_{|n|}(x, Y)], which reproduces Q_n(x)."""
    N = sum(x)
    d = u.d
    deg = sum(n)
    fact = math.prod(math.factorial(v) for v in n)
    total = 0
    for y in enumerate_compositions(d, N):
        s = 1
        for l, nl in enumerate(n, start=1):
            s = s * (sum(u.core[l][j] * y[j] for j in range(d)) * u.row_factor(l)) ** nl
        if s == 0:
            continue
        total = total + multinomial_pmf(y, u.p) * s / fact * reproducing_kernel(deg, x, y, u)
    return total


# ---------------------------------------------------------------------------
# aggregate checks


def xu_identity_deviation(p, N: int):
    """max over (n, x) of |K_n(x; p, N) - c_n Q_n(x, xu_basis(p))|."""
    from .basis import xu_basis

    u = xu_basis(p)
    worst = 0
    for x in enumerate_compositions(len(p), N):
        q = all_Q_at(x, u)
        for n in multi_indices(len(p), N):
            dev = abs(eval_xu_K(n, x, u.p) - xu_constant(n, u.p, N) * q.get(n, 0))
            worst = max(worst, dev)
    return worst


def orthonormal_float_basis(u: OrthoBasis) -> OrthoBasis:
    """Rows u^{(l)} / sqrt(a_l) as a float basis."""
    vals = u.values()
    w = u.weights
    rows = [[complex(v) if isinstance(v, complex) else float(v) for v in vals[l]] for l in range(u.d)]
    rows = [[v / math.sqrt(float(w[l])) for v in rows[l]] for l in range(u.d)]
    return OrthoBasis(core=tuple(tuple(r) for r in rows), p=tuple(float(v) for v in u.p), name=f"{u.name}-orthonormal")


def kernel_invariance_deviation(u: OrthoBasis, N: int, rotation) -> float:
    """max |K_k(x, y; u) - K_k(x, y; R u)| over degrees k and state pairs, R orthogonal on rows 1..d-1."""
    base = orthonormal_float_basis(u)
    mixed = base.transformed(rotation)
    states = enumerate_compositions(u.d, N)
    worst = 0.0
    for deg in range(N + 1):
        for a, x in enumerate(states):
            for y in states[a:]:
                worst = max(worst, abs(reproducing_kernel(deg, x, y, base) - reproducing_kernel(deg, x, y, mixed)))
    return worst
