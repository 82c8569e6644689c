"""Orthogonal function systems on [d] = {0, ..., d-1} and their positivity diagnostics.

A basis is stored in *factored* form: each row l is ``sqrt(scale2[l])``
times a ``core`` row.  For the Irwin-Helmert basis the core is the
(rational) Irwin-Lancaster basis and ``scale2`` is rational, so every
identity that is polynomial in the basis entries can be checked exactly;
the radical factors are tracked with :class:`~krawtchouk.scalar.Surd`.

States and basis indices are 0-based everywhere in the code: state ``j``
of [d] = {1, ..., d} is index ``j - 1`` here, and the distinguished last
state ``d`` is index ``d - 1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    InvalidCharacterTableError,
    InvalidProbabilityError,
    ZeroLastColumnError,
)
from .scalar import all_exact, exact_sqrt, format_scalar, is_exact, parse_scalar, surd

DEFAULT_TOL = 1e-10


# ---------------------------------------------------------------------------
# probability vectors


def probability_vector(values, *, allow_zero: bool = False, tol: float = 1e-12) -> tuple:
    """Validate and normalise a probability vector.

    Strings such as ``"1/3"`` are parsed exactly.  The result is a tuple of
    Fractions when every entry is exact, otherwise a tuple of floats.
    """
    vals = []
    for v in values:
        if isinstance(v, str):
            v = parse_scalar(v)
        vals.append(v)
    if not vals:
        raise InvalidProbabilityError("empty probability vector")
    if all_exact(vals):
        vals = [Fraction(v) for v in vals]
        total_ok = sum(vals) == 1
    else:
        vals = [float(v) for v in vals]
        total_ok = abs(math.fsum(vals) - 1.0) <= tol
    for v in vals:
        if v < 0 or (v == 0 and not allow_zero):
            raise InvalidProbabilityError(f"entries must be positive, got {v}")
    if not total_ok:
        raise InvalidProbabilityError(f"entries sum to {sum(vals)}, not 1")
    return tuple(vals)


def as_float_vector(p) -> tuple[float, ...]:
    return tuple(float(v) for v in p)


def _tail_sums(p) -> list:
    """tails[i] = p_i + ... + p_{d-1} (0-based), tails[d] = 0."""
    tails = [0] * (len(p) + 1)
    for i in range(len(p) - 1, -1, -1):
        tails[i] = tails[i + 1] + p[i]
    return tails


# ---------------------------------------------------------------------------
# bases


@dataclass(frozen=True)
class OrthoBasis:
    """Functions u^{(0)}, ..., u^{(d-1)} on [d] with u^{(0)} = 1.

    ``u[l][j] = sqrt(scale2[l]) * core[l][j]`` (``scale2=None`` means all
    ones).  ``declared_weights`` are the a_l the constructor promises,
    i.e. sum_j u_j^{(k)} u_j^{(l)} p_j = delta_{kl} a_k.  The class is also
    used for the non-orthogonal (biorthogonal, possibly complex) eigen
    families of Markov kernels; :func:`validate_basis` is the check.
    """

    core: tuple
    p: tuple
    scale2: tuple | None = None
    declared_weights: tuple | None = None
    name: str = "custom"

    def __post_init__(self):
        d = len(self.p)
        if len(self.core) != d or any(len(row) != d for row in self.core):
            raise DimensionError(f"basis core must be {d}x{d}")
        if self.scale2 is not None and len(self.scale2) != d:
            raise DimensionError("scale2 must have one entry per row")

    @property
    def d(self) -> int:
        return len(self.p)

    @property
    def exact(self) -> bool:
        entries = [v for row in self.core for v in row] + list(self.p)
        if self.scale2 is not None:
            entries += list(self.scale2)
        return all_exact(entries)

    def row_factor(self, l: int):
        if self.scale2 is None or self.scale2[l] == 1:
            return 1
        s = self.scale2[l]
        return exact_sqrt(s) if isinstance(s, Rational) else math.sqrt(s)

    def index_factor(self, n: Sequence[int]):
        """prod_l row_factor(l)^{n_l}: the factor turning core-based Q_n into u-based Q_n."""
        if self.scale2 is None:
            return 1
        if all(isinstance(s, Rational) for s in self.scale2):
            rad = Fraction(1)
            for l, nl in enumerate(n, start=1):
                rad *= Fraction(self.scale2[l]) ** nl
            return exact_sqrt(rad)
        out = 1.0
        for l, nl in enumerate(n, start=1):
            out *= math.sqrt(self.scale2[l]) ** nl
        return out

    @property
    def u(self) -> tuple:
        """Entries u[l][j] (Surd/Fraction in the exact backend)."""
        return tuple(
            tuple(self.row_factor(l) * v for v in row) for l, row in enumerate(self.core)
        )

    def computed_weights(self) -> tuple:
        out = []
        for l, row in enumerate(self.core):
            a = sum(v * v * pj for v, pj in zip(row, self.p))
            if self.scale2 is not None:
                a = a * self.scale2[l]
            out.append(a)
        return tuple(out)

    @property
    def weights(self) -> tuple:
        return self.declared_weights if self.declared_weights is not None else self.computed_weights()

    def is_orthonormal(self, tol: float = DEFAULT_TOL) -> bool:
        a = self.weights
        if all_exact(a):
            return all(w == 1 for w in a)
        return all(abs(w - 1) <= tol for w in a)

    def last_column(self) -> tuple:
        """b_l = u_{d}^{(l)} (the last state, index d-1)."""
        return tuple(row[-1] for row in self.u)

    def values(self) -> np.ndarray:
        """Float (or complex) array of the entries, rows = basis index."""
        dtype = complex if any(isinstance(v, complex) for row in self.core for v in row) else float
        return np.array([[complex(v) if dtype is complex else float(v) for v in row] for row in self.u], dtype=dtype)

    def as_float(self) -> "OrthoBasis":
        vals = self.values()
        w = self.declared_weights
        return OrthoBasis(
            core=tuple(tuple(row) for row in vals.tolist()),
            p=as_float_vector(self.p),
            declared_weights=None if w is None else tuple(float(x) for x in w),
            name=self.name,
        )

    def transformed(self, matrix) -> "OrthoBasis":
        """Mix rows 1..d-1 by a (d-1)x(d-1) matrix (float backend)."""
        m = np.asarray(matrix, dtype=float)
        vals = self.values()
        mixed = vals.copy()
        mixed[1:] = m @ vals[1:]
        return OrthoBasis(
            core=tuple(tuple(r) for r in mixed.tolist()),
            p=as_float_vector(self.p),
            name=f"{self.name}-mixed",
        )

    def H(self) -> "OrthogonalMatrixH":
        return OrthogonalMatrixH(
            core=self.core,
            row2=self.scale2 if self.scale2 is not None else tuple(1 for _ in self.p),
            col2=self.p,
        )


@dataclass(frozen=True)
class OrthogonalMatrixH:
    """h_{ij} = sqrt(row2_i) * core_ij * sqrt(col2_j).

    For a basis u on p this is h_{ij} = u_j^{(i)} sqrt(p_j) with
    ``core = u core``, ``row2 = scale2`` and ``col2 = p``.
    """

    core: tuple
    row2: tuple
    col2: tuple

    @classmethod
    def from_array(cls, h) -> "OrthogonalMatrixH":
        h = np.asarray(h, dtype=float)
        d = h.shape[0]
        return cls(core=tuple(tuple(r) for r in h.tolist()), row2=(1.0,) * d, col2=(1.0,) * d)

    @property
    def d(self) -> int:
        return len(self.core)

    @property
    def exact(self) -> bool:
        return all_exact([v for r in self.core for v in r] + list(self.row2) + list(self.col2))

    def entry(self, i: int, j: int):
        c = self.core[i][j]
        rad = self.row2[i] * self.col2[j]
        if self.exact:
            return surd(c, rad)
        return c * math.sqrt(rad)

    @property
    def T(self) -> "OrthogonalMatrixH":
        return OrthogonalMatrixH(
            core=tuple(zip(*self.core)), row2=self.col2, col2=self.row2
        )

    def to_array(self) -> np.ndarray:
        return np.array([[float(self.entry(i, j)) for j in range(self.d)] for i in range(self.d)])

    def orthogonality_deviation(self):
        """max_{i,k} |(H H^T)_{ik} - delta_{ik}|, exact when possible."""
        d = self.d
        worst = 0
        for i in range(d):
            for k in range(i, d):
                s = sum(self.core[i][j] * self.core[k][j] * self.col2[j] for j in range(d))
                if self.exact:
                    val = surd(s, self.row2[i] * self.row2[k])
                else:
                    val = s * math.sqrt(self.row2[i] * self.row2[k])
                dev = abs(val - (1 if i == k else 0))
                if dev > worst:
                    worst = dev
        return worst

    def basis(self) -> OrthoBasis:
        """Recover u_j^{(i)} = h_{ij} / sqrt(p_j) with p_j = h_{1j}^2."""
        if self.exact and all(v == 1 for v in self.core[0]) and self.row2[0] == 1:
            return OrthoBasis(core=self.core, p=tuple(self.col2), scale2=tuple(self.row2))
        h = self.to_array()
        p = h[0] ** 2
        core = h / np.sqrt(p)
        return OrthoBasis(core=tuple(tuple(r) for r in core.tolist()), p=tuple(p.tolist()))


def helmert_basis(p) -> OrthoBasis:
    """Irwin-Helmert orthonormal basis.

    Rows are ordered like the rows of the Irwin-Helmert matrix: row l
    (l >= 1) has its pivot at state d-1-l, zeros before it and a constant
    after it.  Exact input gives the factored exact form (core is the
    Irwin-Lancaster basis, scale2 rational).
    """
    p = probability_vector(p)
    d = len(p)
    tails = _tail_sums(p)
    core = [tuple(1 for _ in p)]
    scale2 = [1]
    for l in range(1, d):
        t = d - 1 - l
        row = [0] * d
        row[t] = -tails[t + 1] / p[t]
        for j in range(t + 1, d):
            row[j] = 1
        core.append(row)
        scale2.append(p[t] / (tails[t] * tails[t + 1]))
    ones = tuple(1 for _ in p)
    if all_exact(p):
        return OrthoBasis(
            core=tuple(tuple(Fraction(v) for v in r) for r in core),
            p=p,
            scale2=tuple(Fraction(s) for s in scale2),
            declared_weights=ones,
            name="helmert",
        )
    vals = tuple(tuple(math.sqrt(s) * v for v in r) for s, r in zip(scale2, core))
    return OrthoBasis(core=vals, p=p, declared_weights=(1.0,) * d, name="helmert")


def xu_basis(p) -> OrthoBasis:
    """Unscaled Irwin-Lancaster basis: row j has 0 before state j-1, -(1-|p_j|)/p_j at it, 1 after."""
    p = probability_vector(p)
    d = len(p)
    tails = _tail_sums(p)
    core = [tuple(1 for _ in p)]
    weights = [1]
    for j in range(1, d):
        t = j - 1
        row = [0] * d
        row[t] = -tails[t + 1] / p[t]
        for k in range(t + 1, d):
            row[k] = 1
        core.append(tuple(row))
        weights.append(tails[t + 1] * tails[t] / p[t])
    if all_exact(p):
        core = [tuple(Fraction(v) for v in r) for r in core]
    else:
        core = [tuple(float(v) for v in r) for r in core]
    return OrthoBasis(core=tuple(core), p=p, declared_weights=tuple(weights), name="xu")


# -- group characters -------------------------------------------------------

S3_CHARACTER_TABLE = ((1, 1, 1), (0, -1, 2), (-1, 1, 1))
S3_CLASS_SIZES = (3, 2, 1)

#: The 4x4 matrix 2H for the uniform distribution on four points
#: (characters of C_2 x C_2).
HADAMARD4_TABLE = (
    (1, 1, 1, 1),
    (-1, 1, -1, 1),
    (1, 1, -1, -1),
    (-1, 1, 1, -1),
)


def c2n_character_table(n: int) -> tuple[tuple, tuple]:
    """Characters of C_2^n with the trivial character first and the identity element last.

    Returns ``(table, class_sizes)``; group elements are bit vectors
    1, 2, ..., 2^n - 1, 0 and chi_x(y) = (-1)^{x.y}.
    """
    size = 2**n
    elements = list(range(1, size)) + [0]
    table = tuple(
        tuple((-1) ** bin(x & y).count("1") for y in elements) for x in range(size)
    )
    return table, (1,) * size


def character_basis(char_table, class_sizes) -> tuple[tuple, OrthogonalMatrixH]:
    """p_j = |C_j|/|G| and h_{ij} = chi_i(C_j) sqrt(p_j) from a real character table."""
    basis = character_ortho_basis(char_table, class_sizes)
    return basis.p, basis.H()


def character_ortho_basis(char_table, class_sizes, name: str = "character") -> OrthoBasis:
    d = len(class_sizes)
    table = [[parse_scalar(v) if isinstance(v, str) else v for v in row] for row in char_table]
    if len(table) != d or any(len(r) != d for r in table):
        raise DimensionError("character table must be square with one column per class")
    order = sum(class_sizes)
    if any(c <= 0 for c in class_sizes):
        raise InvalidCharacterTableError("class sizes must be positive")
    exact = all_exact([v for r in table for v in r])
    p = tuple(Fraction(c, order) for c in class_sizes)
    if not exact:
        p = as_float_vector(p)
    if any(v != 1 for v in table[0]):
        raise InvalidCharacterTableError("first row must be the trivial character")
    for k in range(d):
        for l in range(k, d):
            s = sum(table[k][j] * table[l][j] * p[j] for j in range(d))
            target = 1 if k == l else 0
            if (s != target) if exact else abs(s - target) > 1e-10:
                raise InvalidCharacterTableError(
                    f"rows {k} and {l} violate the orthogonality relations (got {s})"
                )
    core = tuple(tuple(Fraction(v) if exact else float(v) for v in r) for r in table)
    return OrthoBasis(core=core, p=p, declared_weights=(1,) * d, name=name)


def s3_basis() -> OrthoBasis:
    return character_ortho_basis(S3_CHARACTER_TABLE, S3_CLASS_SIZES, name="s3")


def c2n_basis(n: int) -> OrthoBasis:
    table, sizes = c2n_character_table(n)
    return character_ortho_basis(table, sizes, name=f"c2^{n}")


def hadamard4_basis() -> OrthoBasis:
    return character_ortho_basis(HADAMARD4_TABLE, (1, 1, 1, 1), name="hadamard4")


# ---------------------------------------------------------------------------
# validation and positivity


@dataclass
class PositivityReport:
    """``holds`` iff ``min_value >= -tol``; ``witness`` is a 0-based index triple."""

    holds: bool
    min_value: object
    witness: tuple
    tol: float = 0.0

    def to_json(self) -> dict:
        return {
            "holds": self.holds,
            "min_value": format_scalar(self.min_value),
            "witness": list(self.witness),
            "tol": self.tol,
        }


@dataclass
class BasisValidation:
    valid: bool
    max_deviation: object
    row0_is_one: bool
    gram: list = field(repr=False, default_factory=list)

    def to_json(self) -> dict:
        return {
            "valid": self.valid,
            "max_deviation": format_scalar(self.max_deviation),
            "row0_is_one": self.row0_is_one,
        }


def _resolve_tol(tol, exact: bool) -> float:
    if tol is None:
        return 0.0 if exact else DEFAULT_TOL
    return tol


def _with_p(u: OrthoBasis, p) -> OrthoBasis:
    if p is None:
        return u
    if len(p) != u.d:
        raise DimensionError(f"basis has d={u.d} but p has {len(p)} entries")
    return u


def validate_basis(u: OrthoBasis, p=None, tol=None) -> BasisValidation:
    """Max deviation of sum_j u^{(k)} u^{(l)} p_j from delta_{kl} a_k over all pairs."""
    u = _with_p(u, p)
    d = u.d
    exact = u.exact
    tol = _resolve_tol(tol, exact)
    a = u.weights
    row0 = all((v == 1) if exact else abs(v - 1) <= max(tol, 1e-12) for v in u.core[0])
    if u.scale2 is not None and u.scale2[0] != 1:
        row0 = False
    gram = [[0] * d for _ in range(d)]
    worst = 0
    for k in range(d):
        for l in range(k, d):
            s = sum(u.core[k][j] * u.core[l][j] * u.p[j] for j in range(d))
            s = s * u.row_factor(k) * u.row_factor(l)
            gram[k][l] = gram[l][k] = s
            dev = abs(s - (a[k] if k == l else 0))
            if dev > worst:
                worst = dev
    valid = row0 and (worst <= tol)
    return BasisValidation(valid=valid, max_deviation=worst, row0_is_one=row0, gram=gram)


def _as_H(H) -> OrthogonalMatrixH:
    if isinstance(H, OrthogonalMatrixH):
        return H
    if isinstance(H, OrthoBasis):
        return H.H()
    return OrthogonalMatrixH.from_array(H)


def _report(values: dict, tol: float) -> PositivityReport:
    witness = min(values, key=lambda key: (values[key], key))
    m = values[witness]
    return PositivityReport(holds=bool(m >= -tol), min_value=m, witness=witness, tol=tol)


def hypergroup_s(H) -> dict:
    """s(j,k,l) = sum_i h_ij h_ik h_il / h_id for 0 <= j <= k <= l < d."""
    H = _as_H(H)
    d = H.d
    last = d - 1
    if any(H.core[i][last] == 0 or H.row2[i] == 0 for i in range(d)) or H.col2[last] == 0:
        raise ZeroLastColumnError("h_{id} = 0 for some i; the hypergroup sums are undefined")
    out = {}
    if H.exact:
        for j, k, l in itertools.combinations_with_replacement(range(d), 3):
            r = sum(
                H.row2[i] * H.core[i][j] * H.core[i][k] * H.core[i][l] / H.core[i][last]
                for i in range(d)
            )
            out[(j, k, l)] = surd(r, Fraction(H.col2[j] * H.col2[k] * H.col2[l]) / H.col2[last])
    else:
        h = H.to_array()
        for j, k, l in itertools.combinations_with_replacement(range(d), 3):
            out[(j, k, l)] = float(np.sum(h[:, j] * h[:, k] * h[:, l] / h[:, last]))
    return out


def hypergroup_check(H, tol=None) -> PositivityReport:
    """Nonnegativity of all s(j,k,l); the minimum and a witness triple are reported."""
    H = _as_H(H)
    return _report(hypergroup_s(H), _resolve_tol(tol, H.exact))


def gks_values(u: OrthoBasis, p=None) -> dict:
    """c(l,m,r) = sum_j u^{(l)} u^{(m)} u^{(r)} p_j for 0 <= l <= m <= r < d."""
    u = _with_p(u, p)
    d = u.d
    out = {}
    for l, m, r in itertools.combinations_with_replacement(range(d), 3):
        s = sum(u.core[l][j] * u.core[m][j] * u.core[r][j] * u.p[j] for j in range(d))
        out[(l, m, r)] = s * u.row_factor(l) * u.row_factor(m) * u.row_factor(r)
    return out


def gks_check(u: OrthoBasis, p=None, tol=None) -> PositivityReport:
    """GKS property: every basis triple product is nonnegative."""
    u = _with_p(u, p)
    return _report(gks_values(u), _resolve_tol(tol, u.exact))


def is_strongly_monotone(p) -> bool:
    """p_{i+1} + ... + p_d <= p_i for every i < d (non-strict)."""
    tails = _tail_sums(list(p))
    return all(tails[i + 1] <= p[i] for i in range(len(p) - 1))


@dataclass(frozen=True)
class MonotoneExtreme:
    p: tuple
    boundary: bool  # True when some entry is zero: not usable to build a basis


def strongly_monotone_extremes(d: int, displayed: bool = False) -> list[MonotoneExtreme]:
    """The d extreme points of the strongly monotone simplex.

    Points are oriented so that they satisfy :func:`is_strongly_monotone`:
    (1, 0, ..., 0), (1/2, 1/2, 0, ...), ..., (1/2, 1/4, ..., 1/2^{d-1}, 1/2^{d-1}).
    ``displayed=True`` returns the same points with coordinates reversed,
    (0, ..., 0, 1), (0, ..., 1/2, 1/2), ..., which is the increasing
    orientation p_1 <= ... <= p_d.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    out = []
    for k in range(d):
        if k == 0:
            tail = [Fraction(1)]
        else:
            tail = [Fraction(1, 2**k), Fraction(1, 2**k)] + [Fraction(1, 2**i) for i in range(k - 1, 0, -1)]
        pt = tuple([Fraction(0)] * (d - len(tail)) + tail)
        if not displayed:
            pt = pt[::-1]
        out.append(MonotoneExtreme(p=pt, boundary=any(v == 0 for v in pt)))
    return out


@dataclass
class TripleProduct:
    """c[i][l][k] over basis indices and s[j][k][l] over states, as full symmetric arrays."""

    c: np.ndarray
    s: np.ndarray


def triple_products(u: OrthoBasis, p=None) -> TripleProduct:
    u = _with_p(u, p)
    d = u.d
    dtype = object if u.exact else float
    c = np.zeros((d, d, d), dtype=dtype)
    for (l, m, r), v in gks_values(u).items():
        for perm in set(itertools.permutations((l, m, r))):
            c[perm] = v
    s = np.zeros((d, d, d), dtype=dtype)
    for (j, k, l), v in hypergroup_s(u.H()).items():
        for perm in set(itertools.permutations((j, k, l))):
            s[perm] = v
    return TripleProduct(c=c, s=s)


# ---------------------------------------------------------------------------
# JSON


def _scalar_list(values) -> list:
    return [format_scalar(v) for v in values]


def basis_to_json(u: OrthoBasis) -> dict:
    """{d, p, rows, weights} plus exact ``core``/``scale2`` when available."""
    out = {
        "schema": 1,
        "name": u.name,
        "d": u.d,
        "p": _scalar_list(u.p),
        "rows": [_scalar_list(r) for r in u.u],
        "weights": _scalar_list(u.weights),
    }
    if u.exact:
        out["core"] = [_scalar_list(r) for r in u.core]
        if u.scale2 is not None:
            out["scale2"] = _scalar_list(u.scale2)
    return out


def _parse_entry(v):
    if isinstance(v, str):
        return parse_scalar(v)
    if isinstance(v, list):
        return complex(v[0], v[1])
    return v


def basis_from_json(obj: dict) -> OrthoBasis:
    """Inverse of :func:`basis_to_json`; also accepts plain {p, rows[, weights]} or {class_sizes, rows}."""
    if "class_sizes" in obj:
        return character_ortho_basis(obj["rows"], obj["class_sizes"], name=obj.get("name", "character"))
    p = probability_vector([_parse_entry(v) for v in obj["p"]])
    if "core" in obj:
        core = tuple(tuple(_parse_entry(v) for v in r) for r in obj["core"])
        scale2 = obj.get("scale2")
        scale2 = None if scale2 is None else tuple(_parse_entry(v) for v in scale2)
    else:
        core = tuple(tuple(_parse_entry(v) for v in r) for r in obj["rows"])
        scale2 = None
    if "d" in obj and obj["d"] != len(p):
        raise DimensionError("declared d does not match p")
    weights = obj.get("weights")
    weights = None if weights is None else tuple(_parse_entry(v) for v in weights)
    if not all(is_exact(v) for row in core for v in row):
        p = as_float_vector(p)
    return OrthoBasis(core=core, p=p, scale2=scale2, declared_weights=weights, name=obj.get("name", "custom"))
