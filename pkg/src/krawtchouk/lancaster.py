"""Bivariate distributions with multinomial margins and Krawtchouk correlations.

Internally every expansion uses orthonormalised polynomials
Q~_n = Q_n / sqrt(E[Q_n^2]).  Only products Q~_n(x) Q~_n(y) are ever
formed, and those are rational for the factored bases, so the exact
backend never leaves the rationals.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .basis import OrthoBasis, PositivityReport, hypergroup_check
from .chains import TransitionKernel
from .combinatorics import check_capacity, count_compositions, multinomial_pmf
from .errors import HypergroupPreconditionError, MarginError, ReversibilityError
from .polynomials import PolynomialTable, ScaledTable, build_scaled_table, build_table, norm_Q
from .scalar import all_exact, exact_sqrt, format_scalar, parse_scalar

DEFAULT_TOL = 1e-10


@dataclass
class BivariateTable:
    """P(x, y) on pairs of compositions, with the multinomial law m(., p) as intended margin."""

    states: list
    values: np.ndarray = field(repr=False)
    p: tuple
    N: int
    rho: dict | None = None

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def exact(self) -> bool:
        return self.values.dtype == object and all_exact(self.values.flat)

    def total(self):
        return sum(self.values.flat)

    def row_margin(self) -> list:
        return [sum(self.values[i, :]) for i in range(self.size)]

    def col_margin(self) -> list:
        return [sum(self.values[:, j]) for j in range(self.size)]

    def margin_deviation(self):
        m = [multinomial_pmf(x, self.p) for x in self.states]
        r, c = self.row_margin(), self.col_margin()
        return max(max(abs(a - b) for a, b in zip(r, m)), max(abs(a - b) for a, b in zip(c, m)))

    def positivity(self, tol=None) -> PositivityReport:
        if tol is None:
            tol = 0 if self.exact else DEFAULT_TOL
        S = self.size
        i, j = min(((i, j) for i in range(S) for j in range(S)), key=lambda ij: self.values[ij])
        v = self.values[i, j]
        return PositivityReport(holds=bool(v >= -tol), min_value=v, witness=(self.states[i], self.states[j]), tol=tol)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x\\y"] + [_label(s) for s in self.states])
        for s, row in zip(self.states, self.values):
            w.writerow([_label(s)] + [str(format_scalar(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> dict:
        out = {
            "schema": 1,
            "d": len(self.p),
            "N": self.N,
            "p": [format_scalar(v) for v in self.p],
            "states": [list(s) for s in self.states],
        }
        if self.rho is not None:
            out["rho"] = [{"n": list(n), "rho": format_scalar(r)} for n, r in self.rho.items()]
        return out


def _label(s) -> str:
    return " ".join(map(str, s))


def read_contingency_csv(text: str, p, normalize: bool = True) -> BivariateTable:
    """Parse a table in the :meth:`BivariateTable.to_csv` layout (counts or probabilities).

    Header cells and row labels are space-separated compositions; entries
    accept rational literals.  Counts are normalised to total mass 1.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    header = [tuple(int(t) for t in c.split()) for c in rows[0][1:]]
    labels = [tuple(int(t) for t in r[0].split()) for r in rows[1:]]
    if labels != header:
        raise MarginError("row and column labels must list the same compositions in the same order")
    vals = [[parse_scalar(c) for c in r[1:]] for r in rows[1:]]
    exact = all_exact(v for r in vals for v in r)
    arr = np.empty((len(vals), len(vals)), dtype=object if exact else float)
    for i, r in enumerate(vals):
        for j, v in enumerate(r):
            arr[i, j] = v
    if normalize:
        tot = sum(arr.flat)
        arr = arr / tot if not exact else np.vectorize(lambda v: v / tot, otypes=[object])(arr)
    N = sum(header[0])
    return BivariateTable(states=header, values=arr, p=tuple(p), N=N)


def _pair_products(table: PolynomialTable, N: int) -> dict:
    """Per index n: (core row, factor^2 / E[Q_n^2]) so Q~_n(x) Q~_n(y) = c * core(x) core(y)."""
    out = {}
    for r, n in enumerate(table.indices):
        f = table.factors[r]
        out[n] = (table.core[r], f * f / norm_Q(n, table.basis, N))
    return out


def bivariate_from_correlations(rho: dict, u: OrthoBasis, N: int, tol=None) -> tuple[BivariateTable, PositivityReport]:
    """P(x, y) = m(x) m(y) {1 + sum_{n != 0} rho_n Q~_n(x) Q~_n(y)}; unspecified rho_n are 0."""
    d = u.d
    S = count_compositions(d, N)
    check_capacity(S * S, "bivariate table")
    table = build_table(u, N)
    pairs = _pair_products(table, N)
    m = [multinomial_pmf(x, u.p) for x in table.states]
    rho = {tuple(k): v for k, v in rho.items()}
    exact = u.exact and all_exact(rho.values())
    P = np.empty((S, S), dtype=object if exact else float)
    active = [(n, rho[n]) for n in table.indices if sum(n) > 0 and rho.get(n, 0) != 0]
    for a in range(S):
        for b in range(S):
            s = 1
            for n, r in active:
                core, c = pairs[n]
                s = s + r * c * core[a] * core[b]
            P[a, b] = m[a] * m[b] * s
    full_rho = {n: (1 if sum(n) == 0 else rho.get(n, 0)) for n in table.indices}
    B = BivariateTable(states=table.states, values=P, p=u.p, N=N, rho=full_rho)
    return B, B.positivity(tol)


@dataclass
class CorrelationReport:
    rho: dict
    max_cross: object
    cross_witness: tuple | None

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "rho": [{"n": list(n), "rho": format_scalar(r)} for n, r in self.rho.items()],
            "max_cross": format_scalar(self.max_cross),
            "cross_witness": None if self.cross_witness is None else [list(n) for n in self.cross_witness],
        }


def extract_correlations(P: BivariateTable, u: OrthoBasis, tol=None, check_margins: bool = True) -> CorrelationReport:
    """rho_n = E[Q~_n(X) Q~_n(Y)] under P, plus the largest cross term |E[Q~_n(X) Q~_m(Y)]|, n != m."""
    if tol is None:
        tol = 0 if P.exact and u.exact else DEFAULT_TOL
    if check_margins:
        dev = P.margin_deviation()
        if dev > tol:
            raise MarginError(f"margins differ from m(., p) by {format_scalar(dev)}")
    table = build_table(u, P.N)
    if table.states != P.states:
        raise MarginError("table states do not match the composition space of the basis")
    N = P.N
    idx = table.indices
    # G[r, s] = sum_{x,y} P(x,y) core_r(x) core_s(y)
    C = table.core
    V = P.values
    G = C.dot(V).dot(C.T) if V.dtype == object else C.astype(float).dot(V).dot(C.astype(float).T)
    norms = [norm_Q(n, u, N) for n in idx]
    fac = table.factors
    rho = {}
    worst, witness = 0, None
    for r, n in enumerate(idx):
        rho[n] = G[r, r] * fac[r] * fac[r] / norms[r]
        for s, m in enumerate(idx):
            if s == r or G[r, s] == 0:
                continue
            if u.exact and P.exact:
                scale = exact_sqrt(Fraction(fac[r] * fac[r] * fac[s] * fac[s]) / (norms[r] * norms[s]))
            else:
                scale = abs(complex(fac[r] * fac[s])) / float(np.sqrt(float(norms[r] * norms[s])))
            v = abs(G[r, s] * scale)
            if v > worst:
                worst, witness = v, (n, m)
    return CorrelationReport(rho=rho, max_cross=worst, cross_witness=witness)


def bivariate_from_kernel(K: TransitionKernel, u: OrthoBasis | None = None, tol=None) -> BivariateTable:
    """P(x, y) = m(x, p) K(x, y) with rho_n extracted by :func:`extract_correlations`."""
    if K.N is None:
        raise ValueError("expected a composition kernel")
    if not K.is_reversible(tol):
        raise ReversibilityError(
            f"detailed balance fails (max deviation {format_scalar(K.detailed_balance_deviation())})"
        )
    if u is None:
        if K.eigen is None:
            raise ValueError("kernel carries no eigen-data; pass a basis")
        u = K.eigen.alpha
    m = K.stationary
    exact = K.exact
    S = K.size
    P = np.empty((S, S), dtype=object if exact else float)
    for a in range(S):
        for b in range(S):
            P[a, b] = m[a] * K.matrix[a, b]
    B = BivariateTable(states=K.states, values=P, p=K.p, N=K.N)
    B.rho = extract_correlations(B, u, tol=tol).rho
    return B


def hypergroup_triple_sum(x, y, z, u: OrthoBasis, N: int | None = None, table: ScaledTable | None = None):
    """sum_n Q^diamond_n(x) Q^diamond_n(y) Q^diamond_n(z) h^diamond_n."""
    N = sum(x) if N is None else N
    if table is None:
        table = build_scaled_table(u, N)
    idx = {s: i for i, s in enumerate(table.states)}
    a, b, c = idx[tuple(x)], idx[tuple(y)], idx[tuple(z)]
    V = table.values
    return sum(V[r, a] * V[r, b] * V[r, c] * table.h[r] for r in range(len(table.indices)))


def all_triple_sums(u: OrthoBasis, N: int) -> dict:
    """Triple sums for every unordered triple of compositions."""
    import itertools

    table = build_scaled_table(u, N)
    S = len(table.states)
    V = table.values
    h = table.h
    R = len(table.indices)
    out = {}
    for a, b, c in itertools.combinations_with_replacement(range(S), 3):
        out[(table.states[a], table.states[b], table.states[c])] = sum(
            V[r, a] * V[r, b] * V[r, c] * h[r] for r in range(R)
        )
    return out


@dataclass
class Linearization:
    x: tuple
    y: tuple
    states: list
    phi: list
    identity_deviation: object

    @property
    def min_value(self):
        return min(self.phi)

    @property
    def total(self):
        return sum(self.phi)

    def is_probability(self, tol=None) -> bool:
        if tol is None:
            tol = 0 if all_exact(self.phi) else DEFAULT_TOL
        return self.min_value >= -tol and abs(self.total - 1) <= tol

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "x": list(self.x),
            "y": list(self.y),
            "phi": [{"z": list(z), "value": format_scalar(v)} for z, v in zip(self.states, self.phi)],
            "identity_deviation": format_scalar(self.identity_deviation),
        }


def linearization_distribution(
    x, y, u: OrthoBasis, N: int | None = None, tol=None, table: ScaledTable | None = None, check: bool = True
) -> Linearization:
    """phi_xy(z) = m(z, p) sum_n h^diamond_n Q^diamond_n(x) Q^diamond_n(y) Q^diamond_n(z).

    Then Q^diamond_n(x) Q^diamond_n(y) = sum_z phi_xy(z) Q^diamond_n(z) for all n;
    the deviation of that identity is reported.
    """
    N = sum(x) if N is None else N
    if check:
        rep = hypergroup_check(u.H(), tol)
        if not rep.holds:
            raise HypergroupPreconditionError(
                f"base hypergroup property fails: s{rep.witness} = {format_scalar(rep.min_value)}"
            )
    if table is None:
        table = build_scaled_table(u, N)
    idx = {s: i for i, s in enumerate(table.states)}
    a, b = idx[tuple(x)], idx[tuple(y)]
    V = table.values
    R = len(table.indices)
    weights = [V[r, a] * V[r, b] * table.h[r] for r in range(R)]
    phi = []
    for c, z in enumerate(table.states):
        phi.append(multinomial_pmf(z, u.p) * sum(w * V[r, c] for r, w in enumerate(weights)))
    dev = 0
    for r in range(R):
        lhs = V[r, a] * V[r, b]
        rhs = sum(f * V[r, c] for c, f in enumerate(phi))
        dev = max(dev, abs(lhs - rhs))
    return Linearization(x=tuple(x), y=tuple(y), states=table.states, phi=phi, identity_deviation=dev)
