"""Single-ball kernels on [d], their composition-space lifts, and spectral checks.

Kernels are stored as numpy arrays: ``dtype=object`` holding Fractions in
the exact backend, ``float`` otherwise.  Eigen-data live in
:class:`EigenSystem` (right family alpha, left weights beta, eigenvalues
rho) and may be complex for non-reversible circulant kernels; the
kernels themselves are always real.
"""

from __future__ import annotations

import bisect
import cmath
import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .basis import OrthoBasis, helmert_basis, probability_vector
from .combinatorics import (
    check_capacity,
    composition_type,
    contingency_tables,
    enumerate_compositions,
    extend_index,
    multi_indices,
    multinomial_coefficient,
    multinomial_pmf,
    vectors_with_sum,
)
from .errors import (
    CapacityError,
    DimensionError,
    HypergroupPreconditionError,
    ReversibilityError,
    SymmetryError,
    UnsortedProbabilityError,
)
from .polynomials import PolynomialTable, build_table, norm_Q
from .scalar import all_exact, format_scalar

DEFAULT_TOL = 1e-10


# ---------------------------------------------------------------------------
# data types


@dataclass
class EigenSystem:
    """K alpha^{(k)} = rho_k alpha^{(k)} and (p beta^{(k)})^T K = rho_k (p beta^{(k)})^T."""

    alpha: OrthoBasis
    beta: OrthoBasis
    rho: tuple

    @property
    def d(self) -> int:
        return self.alpha.d

    def pair(self, k: int, i: int, j: int):
        """alpha_i^{(k)} beta_j^{(k)}, rational for factored bases with alpha = beta."""
        a, b = self.alpha, self.beta
        val = a.core[k][i] * b.core[k][j]
        if a is b or (a.core == b.core and a.scale2 == b.scale2):
            s = 1 if a.scale2 is None else a.scale2[k]
            return val * s
        return val * a.row_factor(k) * b.row_factor(k)

    def biorthogonality_deviation(self):
        p = self.alpha.p
        d = self.d
        worst = 0
        for k in range(d):
            for l in range(d):
                a, b = self.alpha, self.beta
                s = sum(p[i] * a.core[k][i] * b.core[l][i] for i in range(d))
                s = s * a.row_factor(k) * b.row_factor(l)
                dev = abs(s - (1 if k == l else 0))
                if dev > worst:
                    worst = dev
        return worst

    def reconstruct(self) -> np.ndarray:
        """p_ij = p_j {1 + sum_k rho_k alpha_i^{(k)} beta_j^{(k)}}."""
        d = self.d
        p = self.alpha.p
        out = np.empty((d, d), dtype=object)
        for i in range(d):
            for j in range(d):
                s = 1
                for k in range(1, d):
                    s = s + self.rho[k] * self.pair(k, i, j)
                out[i, j] = p[j] * s
        return out


@dataclass
class TransitionKernel:
    """Row-stochastic matrix on ``states`` with stationary law ``stationary``.

    ``p`` is the single-ball law (stationary law itself for kernels on
    [d], the multinomial parameter for composition chains).  ``eigen`` is
    the single-ball eigen-data and ``eigenvalues`` maps multi-indices to
    the composition-chain eigenvalues when known.
    """

    states: list
    matrix: np.ndarray = field(repr=False)
    p: tuple
    N: int | None = None
    eigen: EigenSystem | None = None
    eigenvalues: dict | None = None
    name: str = "kernel"

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def d(self) -> int:
        return len(self.p)

    @property
    def exact(self) -> bool:
        return self.matrix.dtype == object and all_exact(self.matrix.flat)

    @property
    def stationary(self) -> list:
        if self.N is None:
            return list(self.p)
        return [multinomial_pmf(x, self.p) for x in self.states]

    def index(self, state) -> int:
        return self.states.index(tuple(state) if self.N is not None else state)

    def float_matrix(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.matrix])

    def row_sum_deviation(self):
        return max(abs(sum(row) - 1) for row in self.matrix)

    def min_entry(self):
        return min(self.matrix.flat)

    def stationarity_deviation(self):
        pi = self.stationary
        worst = 0
        for j in range(self.size):
            s = sum(pi[i] * self.matrix[i, j] for i in range(self.size))
            worst = max(worst, abs(s - pi[j]))
        return worst

    def detailed_balance_deviation(self):
        pi = self.stationary
        worst = 0
        for i in range(self.size):
            for j in range(i + 1, self.size):
                worst = max(worst, abs(pi[i] * self.matrix[i, j] - pi[j] * self.matrix[j, i]))
        return worst

    def is_reversible(self, tol: float | None = None) -> bool:
        dev = self.detailed_balance_deviation()
        if tol is None:
            tol = 0 if self.exact else DEFAULT_TOL
        return bool(dev <= tol)

    def is_stochastic(self, tol: float | None = None) -> bool:
        if tol is None:
            tol = 0 if self.exact else 1e-12
        return bool(self.row_sum_deviation() <= tol and self.min_entry() >= -tol)

    def apply(self, f: Sequence) -> list:
        """(K f)(x) = sum_y K(x, y) f(y)."""
        return [sum(self.matrix[i, j] * f[j] for j in range(self.size) if self.matrix[i, j] != 0) for i in range(self.size)]

    def apply_left(self, g: Sequence) -> list:
        """(g^T K)(y) = sum_x g(x) K(x, y)."""
        return [sum(g[i] * self.matrix[i, j] for i in range(self.size) if self.matrix[i, j] != 0) for j in range(self.size)]

    def state_label(self, s) -> str:
        return " ".join(map(str, s)) if isinstance(s, tuple) else str(s)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["state"] + [self.state_label(s) for s in self.states])
        for s, row in zip(self.states, self.matrix):
            w.writerow([self.state_label(s)] + [str(format_scalar(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> dict:
        out = {
            "schema": 1,
            "name": self.name,
            "d": self.d,
            "N": self.N,
            "p": [format_scalar(v) for v in self.p],
            "states": [list(s) if isinstance(s, tuple) else s for s in self.states],
            "matrix": [[format_scalar(v) for v in row] for row in self.matrix],
            "backend": "exact" if self.exact else "float",
        }
        if self.eigen is not None:
            key = "eigenvalues" if self.N is None else "rho"
            out[key] = [format_scalar(r) for r in self.eigen.rho]
        if self.eigenvalues is not None:
            out["eigenvalues"] = [
                {"n": list(n), "lambda": format_scalar(lam)} for n, lam in self.eigenvalues.items()
            ]
        return out


def _matrix(rows, exact: bool) -> np.ndarray:
    if exact:
        arr = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                arr[i, j] = Fraction(v) if not isinstance(v, Fraction) else v
        return arr
    return np.array([[float(v) for v in row] for row in rows], dtype=float)


def kernel_on_d(matrix, p=None, eigen: EigenSystem | None = None, name: str = "kernel") -> TransitionKernel:
    """Wrap a d x d stochastic matrix; ``p`` defaults to the left Perron vector (float) if omitted."""
    rows = [list(r) for r in matrix]
    d = len(rows)
    exact = all_exact(v for r in rows for v in r)
    mat = _matrix(rows, exact)
    if p is None:
        p = stationary_distribution(mat)
    return TransitionKernel(states=list(range(d)), matrix=mat, p=tuple(p), eigen=eigen, name=name)


def stationary_distribution(mat: np.ndarray) -> tuple:
    """Left Perron vector; exact (Fractions) for rational matrices."""
    d = mat.shape[0]
    if mat.dtype == object:
        # solve pi (K - I) = 0, sum pi = 1 by Gaussian elimination
        A = [[mat[j, i] - (1 if i == j else 0) for j in range(d)] for i in range(d)]
        A[-1] = [Fraction(1)] * d
        b = [Fraction(0)] * (d - 1) + [Fraction(1)]
        return tuple(_solve_exact(A, b))
    w, v = np.linalg.eig(mat.T)
    k = int(np.argmin(np.abs(w - 1)))
    pi = np.real(v[:, k])
    pi = pi / pi.sum()
    return tuple(float(x) for x in pi)


def _solve_exact(A, b):
    n = len(A)
    M = [list(map(Fraction, row)) + [Fraction(bi)] for row, bi in zip(A, b)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [a - f * bb for a, bb in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


# ---------------------------------------------------------------------------
# kernels on [d]


def reversible_eigensystem(u: OrthoBasis, rho) -> EigenSystem:
    return EigenSystem(alpha=u, beta=u, rho=tuple(rho))


def metropolis_eigenvalues(p) -> tuple:
    """Eigenvalues for the Irwin-Helmert rows, aligned with :func:`helmert_basis` row order.

    Helmert row l >= 1 has its pivot at 1-based state i = d - l, and
    K u = beta u with beta = 1 - ((i - 1) + A_i^2 / p_i) / d, where
    A_i^2 = p_i + ... + p_d.
    """
    p = probability_vector(p)
    d = len(p)
    out = [Fraction(1) if all_exact(p) else 1.0]
    for l in range(1, d):
        i = d - l  # 1-based pivot
        A2 = sum(p[i - 1 :])
        out.append(1 - ((i - 1) + A2 / p[i - 1]) / d)
    return tuple(out)


def metropolis_eigenvalues_published(p) -> tuple:
    """The closed form 1 - A_i^2 / (d p_i) for the same rows; agrees with the true values only at i = 1."""
    p = probability_vector(p)
    d = len(p)
    out = [Fraction(1) if all_exact(p) else 1.0]
    for l in range(1, d):
        i = d - l
        A2 = sum(p[i - 1 :])
        out.append(1 - A2 / (d * p[i - 1]))
    return tuple(out)


def metropolis_chain(p) -> tuple[TransitionKernel, tuple]:
    """Random-scan Metropolis chain for p_1 >= ... >= p_d.

    From i pick j uniformly in [d]; move if p_j >= p_i, otherwise with
    probability p_j / p_i.  Returns the kernel (with Helmert eigen-data)
    and the eigenvalues aligned with the Helmert rows.
    """
    p = probability_vector(p)
    d = len(p)
    if any(p[i] < p[i + 1] for i in range(d - 1)):
        raise UnsortedProbabilityError("the Metropolis construction needs p sorted in decreasing order")
    exact = all_exact(p)
    rows = []
    for i in range(d):
        row = []
        for j in range(d):
            if j == i:
                row.append(0)
            else:
                acc = 1 if p[j] >= p[i] else p[j] / p[i]
                row.append(Fraction(acc) / d if exact else acc / d)
        row[i] = 1 - sum(row)
        rows.append(row)
    beta = metropolis_eigenvalues(p)
    u = helmert_basis(p)
    K = kernel_on_d(rows, p=p, eigen=reversible_eigensystem(u, beta), name="metropolis")
    return K, beta


def _pair(u: OrthoBasis, l: int, i: int, j: int):
    s = 1 if u.scale2 is None else u.scale2[l]
    return u.core[l][i] * u.core[l][j] * s


@dataclass
class LancasterKernelResult:
    kernel: TransitionKernel
    member: bool
    min_entry: object
    witness: tuple


def lancaster_kernel(beta, u: OrthoBasis, p=None, tol=None) -> LancasterKernelResult:
    """K_beta(i, j) = p_j {1 + sum_l beta_l u_i^{(l)} u_j^{(l)}}; membership means all entries >= -tol."""
    if p is not None and len(p) != u.d:
        raise DimensionError("p and basis disagree on d")
    d = u.d
    beta = tuple(beta)
    if len(beta) != d - 1:
        raise DimensionError(f"beta needs {d - 1} components")
    exact = u.exact and all_exact(beta)
    rows = []
    for i in range(d):
        row = []
        for j in range(d):
            s = 1
            for l in range(1, d):
                s = s + beta[l - 1] * _pair(u, l, i, j)
            row.append(u.p[j] * s)
        rows.append(row)
    mat = _matrix(rows, exact)
    if tol is None:
        tol = 0 if exact else DEFAULT_TOL
    witness = min(((i, j) for i in range(d) for j in range(d)), key=lambda ij: mat[ij])
    m = mat[witness]
    rho = (1,) + beta
    K = TransitionKernel(
        states=list(range(d)), matrix=mat, p=u.p, eigen=reversible_eigensystem(u, rho), name="lancaster"
    )
    return LancasterKernelResult(kernel=K, member=bool(m >= -tol), min_entry=m, witness=witness)


@dataclass
class LancasterCandidate:
    state: int
    beta: tuple
    member: bool
    min_entry: object


def hypergroup_sums_at(u: OrthoBasis, i0: int) -> dict:
    """sum_l u_i^{(l)} u_j^{(l)} u_k^{(l)} / u_{i0}^{(l)} for i <= j <= k."""
    d = u.d
    if any(u.core[l][i0] == 0 for l in range(d)):
        raise HypergroupPreconditionError(f"u_{{i0}}^{{(l)}} = 0 for some l (i0 = {i0})")
    out = {}
    for i, j, k in itertools.combinations_with_replacement(range(d), 3):
        s = 0
        for l in range(d):
            sc = 1 if u.scale2 is None else u.scale2[l]
            s = s + sc * u.core[l][i] * u.core[l][j] * u.core[l][k] / u.core[l][i0]
        out[(i, j, k)] = s
    return out


def lancaster_extreme_candidates(u: OrthoBasis, i0: int | None = None, tol=None) -> list[LancasterCandidate]:
    """Candidates beta^{(j)}_l = u_j^{(l)} / u_{i0}^{(l)}, one per state j, with membership flags.

    Requires the hypergroup property at the distinguished state ``i0``
    (default: the last state).
    """
    d = u.d
    i0 = d - 1 if i0 is None else i0
    sums = hypergroup_sums_at(u, i0)
    t = 0 if tol is None and u.exact else (DEFAULT_TOL if tol is None else tol)
    bad = [k for k, v in sums.items() if v < -t]
    if bad:
        raise HypergroupPreconditionError(f"hypergroup sums negative at {bad[0]}")
    out = []
    for j in range(d):
        beta = tuple(u.core[l][j] / u.core[l][i0] if u.exact else u.core[l][j] / u.core[l][i0] for l in range(1, d))
        if u.exact:
            beta = tuple(Fraction(b) for b in beta)
        res = lancaster_kernel(beta, u, tol=tol)
        out.append(LancasterCandidate(state=j, beta=beta, member=res.member, min_entry=res.min_entry))
    return out


def flip_kernel(q=Fraction(1)) -> TransitionKernel:
    """Two-state kernel [[1-q, q], [q, 1-q]] with eigenvalue 1 - 2q on u^{(1)} = (-1, 1)."""
    q = Fraction(q) if all_exact([q]) else float(q)
    u = helmert_basis([Fraction(1, 2), Fraction(1, 2)] if isinstance(q, Fraction) else [0.5, 0.5])
    rows = [[1 - q, q], [q, 1 - q]]
    return kernel_on_d(rows, p=u.p, eigen=reversible_eigensystem(u, (1, 1 - 2 * q)), name="flip")


def eigensystem_numeric(matrix, p) -> EigenSystem:
    """Biorthogonal eigen-data from a numeric eigendecomposition (float/complex)."""
    K = np.array([[float(v) for v in row] for row in matrix])
    p = tuple(float(v) for v in p)
    w, R = np.linalg.eig(K)
    order = sorted(range(len(w)), key=lambda k: (abs(w[k] - 1) > 1e-9, -w[k].real, -w[k].imag))
    w = w[order]
    R = R[:, order]
    L = np.linalg.inv(R)
    c = R[0, 0]
    R[:, 0] = R[:, 0] / c
    L[0, :] = L[0, :] * c
    d = len(p)
    beta = L / np.array(p)[None, :]
    real = np.allclose(R.imag, 0) and np.allclose(beta.imag, 0) and np.allclose(w.imag, 0)
    conv = (lambda z: float(z.real)) if real else complex
    alpha_b = OrthoBasis(core=tuple(tuple(conv(R[i, k]) for i in range(d)) for k in range(d)), p=p, name="alpha")
    beta_b = OrthoBasis(core=tuple(tuple(conv(beta[k, i]) for i in range(d)) for k in range(d)), p=p, name="beta")
    return EigenSystem(alpha=alpha_b, beta=beta_b, rho=tuple(conv(x) for x in w))


def hoare_rahmann_kernel(alpha, theta) -> TransitionKernel:
    """K(i, j) = alpha_i delta_ij + (1 - alpha_i) theta_j; stationary p_i proportional to theta_i / (1 - alpha_i)."""
    alpha = [Fraction(a) if all_exact([a]) else float(a) for a in alpha]
    theta = probability_vector(theta)
    d = len(theta)
    if len(alpha) != d:
        raise DimensionError("alpha and theta must have the same length")
    if any(a >= 1 or a < 0 for a in alpha):
        raise ValueError("need 0 <= alpha_i < 1")
    rows = [[(alpha[i] if i == j else 0) + (1 - alpha[i]) * theta[j] for j in range(d)] for i in range(d)]
    w = [t / (1 - a) for t, a in zip(theta, alpha)]
    p = tuple(x / sum(w) for x in w)
    K = kernel_on_d(rows, p=p, name="hoare-rahmann")
    K.eigen = eigensystem_numeric(K.matrix, p)
    return K


def circulant_eta(q) -> tuple:
    """eta_k = sum_r q_r omega^{r k}, omega = exp(2 pi i / d) (0-based r, k)."""
    d = len(q)
    return tuple(sum(float(q[r]) * cmath.exp(2j * math.pi * r * k / d) for r in range(d)) for k in range(d))


def circulant_kernel(q) -> TransitionKernel:
    """P(a, b) = q_{(b - a) mod d} with Fourier eigen-data alpha^{(l)}_a = omega^{l a}, beta^{(l)}_b = omega^{-l b}."""
    q = probability_vector(q, allow_zero=True)
    d = len(q)
    rows = [[q[(b - a) % d] for b in range(d)] for a in range(d)]
    p = tuple(1.0 / d for _ in range(d))
    alpha = OrthoBasis(
        core=tuple(tuple(cmath.exp(2j * math.pi * l * a / d) for a in range(d)) for l in range(d)), p=p, name="fourier"
    )
    beta = OrthoBasis(
        core=tuple(tuple(cmath.exp(-2j * math.pi * l * b / d) for b in range(d)) for l in range(d)), p=p, name="fourier-dual"
    )
    eigen = EigenSystem(alpha=alpha, beta=beta, rho=circulant_eta(q))
    K = kernel_on_d(rows, p=p if not all_exact(q) else tuple(Fraction(1, d) for _ in range(d)), eigen=eigen, name="circulant")
    return K


CIRCULANT_SCHEMES = {
    "a": lambda d: [0] + [Fraction(1, d - 1)] * (d - 1),
    "b": lambda d: [0, 1] + [0] * (d - 2),
    "c": lambda d: [0, Fraction(1, 2)] + [0] * (d - 3) + [Fraction(1, 2)] if d > 2 else [0, 1],
}


# ---------------------------------------------------------------------------
# composition-space lifts


def _check_lift(K1: TransitionKernel, N: int):
    if K1.N is not None:
        raise DimensionError("expected a kernel on [d]")
    from .combinatorics import count_compositions

    n = count_compositions(K1.d, N)
    check_capacity(n * n, "composition kernel")


def _composition_matrix(K1: TransitionKernel, N: int, row_law: Callable) -> tuple[list, np.ndarray]:
    states = enumerate_compositions(K1.d, N)
    idx = {x: i for i, x in enumerate(states)}
    exact = K1.matrix.dtype == object
    zero = Fraction(0) if exact else 0.0
    M = np.empty((len(states), len(states)), dtype=object if exact else float)
    M[:] = zero
    for i, x in enumerate(states):
        for y, prob in row_law(x).items():
            M[i, idx[y]] += prob
    return states, M


def _move_all(K1: TransitionKernel, s: tuple) -> dict:
    """Law of the box counts after each of s_i balls in box i moves independently by K1."""
    d = K1.d
    out: dict = {}
    # convolve one box at a time
    dist = {(0,) * d: 1}
    for i, si in enumerate(s):
        if si == 0:
            continue
        box = {}
        for col in vectors_with_sum(d, si):
            prob = multinomial_coefficient(col)
            for j, c in enumerate(col):
                if c:
                    prob = prob * K1.matrix[i, j] ** c
            if prob != 0:
                box[col] = prob
        new = {}
        for a, pa in dist.items():
            for b, pb in box.items():
                key = tuple(x + y for x, y in zip(a, b))
                new[key] = new.get(key, 0) + pa * pb
        dist = new
    out.update(dist)
    return out


def _subset_row(K1: TransitionKernel, x: tuple, k: int) -> dict:
    """Refresh a uniformly chosen k-subset of the N balls independently by K1."""
    N = sum(x)
    total = math.comb(N, k)
    row: dict = {}
    for s in vectors_with_sum(len(x), k, x):
        w = Fraction(math.prod(math.comb(xi, si) for xi, si in zip(x, s)), total)
        if K1.matrix.dtype != object:
            w = float(w)
        rest = tuple(xi - si for xi, si in zip(x, s))
        for moved, prob in _move_all(K1, s).items():
            y = tuple(r + m for r, m in zip(rest, moved))
            row[y] = row.get(y, 0) + w * prob
    return row


def single_site_eigenvalues(rho, N: int) -> dict:
    """lambda_n = (n_0 + sum_l n_l rho_l) / N with n_0 = N - |n|."""
    d = len(rho)
    out = {}
    for n in multi_indices(d, N):
        s = N - sum(n)
        for l, nl in enumerate(n, start=1):
            s = s + nl * rho[l]
        out[n] = s / N if N else 1
    return out


def independent_eigenvalues(rho, N: int) -> dict:
    """gamma_n = prod_l rho_l^{n_l}."""
    d = len(rho)
    out = {}
    for n in multi_indices(d, N):
        g = 1
        for l, nl in enumerate(n, start=1):
            g = g * rho[l] ** nl
        out[n] = g
    return out


def subset_eigenvalues(rho, N: int, law) -> dict:
    """lambda_n = sum_k law_k E[prod_l rho_l^{J_l}], J multivariate hypergeometric:
    k of N slots drawn without replacement from n_0 = N - |n| neutral slots and n_l slots of type l."""
    d = len(rho)
    out = {}
    for n in multi_indices(d, N):
        counts = extend_index(n, N)
        lam = 0
        for k, wk in enumerate(law):
            if wk == 0:
                continue
            tot = math.comb(N, k)
            e = 0
            for j in vectors_with_sum(d, k, counts):
                c = Fraction(math.prod(math.comb(a, b) for a, b in zip(counts, j)), tot)
                term = c
                for l in range(1, d):
                    term = term * rho[l] ** j[l]
                e = e + term
            lam = lam + wk * e
        out[n] = lam
    return out


def _law_vector(law, N: int, exact: bool) -> list:
    law = list(law)
    if len(law) != N + 1:
        raise DimensionError(f"subset-size law needs {N + 1} entries (k = 0..N)")
    law = [Fraction(v) if exact and all_exact([v]) else v for v in law]
    if exact:
        if sum(law) != 1:
            raise ValueError("subset-size law must sum to 1")
    elif abs(sum(float(v) for v in law) - 1) > 1e-12:
        raise ValueError("subset-size law must sum to 1")
    return law


def point_mass(k: int, N: int) -> list:
    return [Fraction(1) if i == k else Fraction(0) for i in range(N + 1)]


def single_site_chain(K1: TransitionKernel, N: int) -> TransitionKernel:
    """Pick one of the N balls uniformly and move it by K1."""
    _check_lift(K1, N)
    states, M = _composition_matrix(K1, N, lambda x: _subset_row(K1, x, 1) if N else {x: 1})
    lam = single_site_eigenvalues(K1.eigen.rho, N) if K1.eigen else None
    return TransitionKernel(states=states, matrix=M, p=K1.p, N=N, eigen=K1.eigen, eigenvalues=lam, name=f"{K1.name}-single")


def independent_all_chain(K1: TransitionKernel, N: int) -> TransitionKernel:
    """Every ball moves independently by K1."""
    _check_lift(K1, N)
    states, M = _composition_matrix(K1, N, lambda x: _move_all(K1, x))
    lam = independent_eigenvalues(K1.eigen.rho, N) if K1.eigen else None
    return TransitionKernel(states=states, matrix=M, p=K1.p, N=N, eigen=K1.eigen, eigenvalues=lam, name=f"{K1.name}-all")


def subset_chain(K1: TransitionKernel, N: int, law) -> TransitionKernel:
    """Pick |S| = k with probability law[k], S uniform given k; refresh coordinates in S by K1."""
    _check_lift(K1, N)
    exact = K1.matrix.dtype == object
    law = _law_vector(law, N, exact)

    def row(x):
        out: dict = {}
        for k, wk in enumerate(law):
            if wk == 0:
                continue
            for y, pr in _subset_row(K1, x, k).items():
                out[y] = out.get(y, 0) + wk * pr
        return out

    states, M = _composition_matrix(K1, N, row)
    lam = subset_eigenvalues(K1.eigen.rho, N, law) if K1.eigen else None
    return TransitionKernel(states=states, matrix=M, p=K1.p, N=N, eigen=K1.eigen, eigenvalues=lam, name=f"{K1.name}-subset")


def ehrenfest_chain(P: TransitionKernel, N: int, k: int = 1) -> TransitionKernel:
    """Move a uniformly chosen k-set of balls independently by P."""
    K = subset_chain(P, N, point_mass(k, N))
    K.name = "ehrenfest"
    return K


def lightbulb_chain(N: int, k: int) -> TransitionKernel:
    """Toggle a uniformly chosen set of k of the N bulbs; states are (off, on) counts."""
    K = subset_chain(flip_kernel(1), N, point_mass(k, N))
    K.name = "lightbulb"
    return K


def hoare_rahmann_chain(alpha, theta, N: int) -> TransitionKernel:
    K = independent_all_chain(hoare_rahmann_kernel(alpha, theta), N)
    K.name = "hoare-rahmann"
    return K


def circulant_chain(q, N: int, variant: str = "single") -> TransitionKernel:
    """Composition lift of the circulant kernel with first row q.

    ``single`` moves one ball per step (eigenvalues sum_l eta_l n_l / N
    with n_0 = N - |n|); ``all`` moves every ball (eigenvalues prod eta^n).
    """
    K1 = circulant_kernel(q)
    if variant == "single":
        K = single_site_chain(K1, N)
    elif variant == "all":
        K = independent_all_chain(K1, N)
    else:
        raise ValueError("variant must be 'single' or 'all'")
    K.name = f"circulant-{variant}"
    return K


def urn_eigenvalues(points: Sequence[Sequence], N: int) -> dict:
    """lambda_n for N Lancaster points assigned to the coordinates in uniformly random order.

    With beta^{(0)} := 1, lambda_n is the average over ordered splits of the
    points into groups of sizes (n_0, n_1, ..., n_{d-1}) of prod_l prod_{t in group l} beta^t_l.
    """
    points = [tuple(b) for b in points]
    if len(points) != N:
        raise DimensionError("need exactly N Lancaster points")
    d = len(points[0]) + 1
    out = {}
    for n in multi_indices(d, N):
        counts = extend_index(n, N)
        total = 0
        ways = 0

        def rec(l, free):
            nonlocal total, ways
            if l == d:
                ways += 1
                return [1]
            vals = []
            for chosen in itertools.combinations(free, counts[l]):
                f = 1
                if l > 0:
                    for t in chosen:
                        f = f * points[t][l - 1]
                rest = tuple(t for t in free if t not in chosen)
                for v in rec(l + 1, rest):
                    vals.append(f * v)
            return vals

        vals = rec(0, tuple(range(N)))
        total = sum(vals)
        out[n] = total / len(vals) if all_exact(vals) is False else Fraction(1, len(vals)) * total
    return out


def lancaster_urn_chain(points: Sequence[Sequence], u: OrthoBasis, N: int) -> TransitionKernel:
    """Orbit chain for the exchangeable law drawing the N points without replacement.

    Coordinate t moves by K_{beta^{sigma(t)}} for a uniform permutation sigma.
    """
    if len(points) != N:
        raise DimensionError("need exactly N Lancaster points")
    kernels = [lancaster_kernel(b, u).kernel for b in points]
    d = u.d
    states = enumerate_compositions(d, N)
    idx = {x: i for i, x in enumerate(states)}
    exact = all(k.matrix.dtype == object for k in kernels)
    M = np.empty((len(states), len(states)), dtype=object if exact else float)
    M[:] = Fraction(0) if exact else 0.0
    for r, x in enumerate(states):
        z = tuple(j for j, xj in enumerate(x) for _ in range(xj))
        perms = list(itertools.permutations(range(N)))
        for sigma in perms:
            dist = {(0,) * d: 1}
            for t in range(N):
                K = kernels[sigma[t]]
                new = {}
                for a, pa in dist.items():
                    for j in range(d):
                        pr = K.matrix[z[t], j]
                        if pr == 0:
                            continue
                        key = a[:j] + (a[j] + 1,) + a[j + 1 :]
                        new[key] = new.get(key, 0) + pa * pr
                dist = new
            for y, pr in dist.items():
                M[r, idx[y]] += pr
        M[r, :] = M[r, :] / len(perms) if not exact else [v / len(perms) for v in M[r, :]]
    lam = urn_eigenvalues(points, N)
    return TransitionKernel(
        states=states, matrix=M, p=u.p, N=N, eigen=reversible_eigensystem(u, (1,) + tuple(points[0])), eigenvalues=lam, name="lancaster-urn"
    )


# ---------------------------------------------------------------------------
# product-space oracle


def product_states(d: int, N: int) -> list:
    check_capacity(d ** (2 * N), "product-space kernel")
    return list(itertools.product(range(d), repeat=N))


def product_kernel(K_factor: Callable, d: int, N: int, exact: bool = True) -> np.ndarray:
    """Dense kernel on [d]^N from a function (z, w) -> probability."""
    S = product_states(d, N)
    M = np.empty((len(S), len(S)), dtype=object if exact else float)
    for a, z in enumerate(S):
        for b, w in enumerate(S):
            M[a, b] = K_factor(z, w)
    return M


def product_single_site(K1: TransitionKernel, N: int) -> np.ndarray:
    m = K1.matrix

    def f(z, w):
        diff = [t for t in range(N) if z[t] != w[t]]
        if len(diff) > 1:
            return 0
        if len(diff) == 1:
            t = diff[0]
            return m[z[t], w[t]] / N
        return sum(m[z[t], z[t]] for t in range(N)) / N

    return product_kernel(f, K1.d, N, K1.matrix.dtype == object)


def product_independent(K1: TransitionKernel, N: int) -> np.ndarray:
    m = K1.matrix
    return product_kernel(lambda z, w: math.prod((m[a, b] for a, b in zip(z, w)), start=Fraction(1) if m.dtype == object else 1.0), K1.d, N, m.dtype == object)


def product_subset(K1: TransitionKernel, N: int, law) -> np.ndarray:
    m = K1.matrix
    exact = m.dtype == object
    law = _law_vector(law, N, exact)

    def f(z, w):
        total = 0
        for k, wk in enumerate(law):
            if wk == 0:
                continue
            s = 0
            for S in itertools.combinations(range(N), k):
                pr = 1
                for t in range(N):
                    if t in S:
                        pr = pr * m[z[t], w[t]]
                    elif z[t] != w[t]:
                        pr = 0
                        break
                s = s + pr
            total = total + wk * s / math.comb(N, k)
        return total

    return product_kernel(f, K1.d, N, exact)


def product_urn(kernels: Sequence[TransitionKernel], N: int) -> np.ndarray:
    mats = [k.matrix for k in kernels]
    exact = all(m.dtype == object for m in mats)
    perms = list(itertools.permutations(range(N)))

    def f(z, w):
        s = 0
        for sigma in perms:
            pr = 1
            for t in range(N):
                pr = pr * mats[sigma[t]][z[t], w[t]]
                if pr == 0:
                    break
            s = s + pr
        return s / len(perms) if not exact else Fraction(1, len(perms)) * s

    return product_kernel(f, kernels[0].d, N, exact)


def dynkin_lump(full: np.ndarray, d: int, N: int, p=None, tol=None) -> TransitionKernel:
    """Lump a permutation-symmetric kernel on [d]^N to the composition space."""
    S = product_states(d, N)
    pos = {z: i for i, z in enumerate(S)}
    exact = full.dtype == object
    if tol is None:
        tol = 0 if exact else DEFAULT_TOL
    # invariance under adjacent transpositions generates S_N
    for t in range(N - 1):
        perm = [pos[z[:t] + (z[t + 1], z[t]) + z[t + 2 :]] for z in S]
        for a in range(len(S)):
            pa = perm[a]
            for b in range(len(S)):
                if abs(full[a, b] - full[pa, perm[b]]) > tol:
                    raise SymmetryError(f"kernel not invariant under swapping coordinates {t}, {t + 1}")
    states = enumerate_compositions(d, N)
    idx = {x: i for i, x in enumerate(states)}
    M = np.empty((len(states), len(states)), dtype=object if exact else float)
    M[:] = Fraction(0) if exact else 0.0
    rep = {}
    for z in S:
        rep.setdefault(composition_type(z, d), z)
    for x, z in rep.items():
        a = pos[z]
        for b, w in enumerate(S):
            v = full[a, b]
            if v != 0:
                M[idx[x], idx[composition_type(w, d)]] += v
    if p is None:
        p = tuple(Fraction(1, d) for _ in range(d))
    return TransitionKernel(states=states, matrix=M, p=tuple(p), N=N, name="lumped")


# ---------------------------------------------------------------------------
# spectral checks


def charpoly(matrix) -> list:
    """Exact characteristic polynomial det(t I - A), coefficients from t^0 upwards.

    Hessenberg reduction followed by the standard recurrence; O(n^3)
    rational operations.
    """
    n = len(matrix)
    H = [[Fraction(matrix[i][j]) for j in range(n)] for i in range(n)]
    for m in range(1, n - 1):
        piv = next((i for i in range(m, n) if H[i][m - 1] != 0), None)
        if piv is None:
            continue
        if piv != m:
            H[piv], H[m] = H[m], H[piv]
            for row in H:
                row[piv], row[m] = row[m], row[piv]
        for i in range(m + 1, n):
            if H[i][m - 1] == 0:
                continue
            f = H[i][m - 1] / H[m][m - 1]
            for j in range(n):
                H[i][j] -= f * H[m][j]
            for row in H:
                row[m] += f * row[i]
    polys = [[Fraction(1)]]
    for k in range(1, n + 1):
        # p_k = (t - h_kk) p_{k-1} - sum_{i=1}^{k-1} h_{k-i,k} prod_{j=k-i+1}^{k} h_{j,j-1} p_{k-i-1}
        prev = polys[k - 1]
        cur = [Fraction(0)] + prev
        for e, c in enumerate(prev):
            cur[e] -= H[k - 1][k - 1] * c
        prod = Fraction(1)
        for i in range(1, k):
            prod *= H[k - i][k - i - 1]
            coef = prod * H[k - i - 1][k - 1]
            if coef:
                for e, c in enumerate(polys[k - i - 1]):
                    cur[e] -= coef * c
        polys.append(cur)
    return polys[n]


def poly_from_roots(roots) -> list:
    out = [Fraction(1)]
    for r in roots:
        new = [Fraction(0)] * (len(out) + 1)
        for e, c in enumerate(out):
            new[e + 1] += c
            new[e] -= r * c
        out = new
    return out


def spectrum_matches(matrix, eigenvalues, tol: float = 1e-8) -> bool:
    """Do ``eigenvalues`` (with multiplicity) form the spectrum of ``matrix``?

    Exact comparison of characteristic polynomials for rational data,
    otherwise greedy matching against numpy eigenvalues.
    """
    vals = list(eigenvalues)
    rows = [list(r) for r in matrix]
    if all_exact(v for r in rows for v in r) and all_exact(vals):
        return charpoly(rows) == poly_from_roots(vals)
    A = np.array([[float(v) for v in r] for r in rows])
    got = list(np.linalg.eigvals(A))
    for v in vals:
        k = min(range(len(got)), key=lambda i: abs(got[i] - complex(v)))
        if abs(got[k] - complex(v)) > tol:
            return False
        got.pop(k)
    return not got


@dataclass
class EigenReport:
    max_residual: object
    residuals: dict
    passed: bool
    left_max_residual: object = 0

    def to_json(self) -> list:
        return [
            {"n": list(n), "lambda": format_scalar(lam), "residual": format_scalar(res)}
            for n, (lam, res) in self.residuals.items()
        ]


def verify_eigen(
    kernel: TransitionKernel,
    table: PolynomialTable,
    lambdas: dict,
    tol=None,
    left_table: PolynomialTable | None = None,
) -> EigenReport:
    """max_n ||K Q_n - lambda_n Q_n||_inf, plus the left check with m(x, p) Q_n(x, beta) when given."""
    if table.states != kernel.states:
        raise DimensionError("table and kernel index different state spaces")
    if tol is None:
        tol = 0 if (kernel.exact and table.exact and all_exact(lambdas.values())) else DEFAULT_TOL
    residuals = {}
    worst = 0
    for n in table.indices:
        lam = lambdas[n]
        q = table.row(n)
        Kq = kernel.apply(q)
        res = max((abs(a - lam * b) for a, b in zip(Kq, q)), default=0)
        residuals[n] = (lam, res)
        worst = max(worst, res)
    left_worst = 0
    if left_table is not None:
        m = kernel.stationary
        for n in left_table.indices:
            lam = lambdas[n]
            g = [mi * v for mi, v in zip(m, left_table.row(n))]
            gK = kernel.apply_left(g)
            res = max((abs(a - lam * b) for a, b in zip(gK, g)), default=0)
            left_worst = max(left_worst, res)
            lam0, r0 = residuals[n]
            residuals[n] = (lam0, max(r0, res))
    passed = bool(worst <= tol and left_worst <= tol)
    return EigenReport(max_residual=worst, residuals=residuals, passed=passed, left_max_residual=left_worst)


def eigen_tables(kernel: TransitionKernel) -> tuple[PolynomialTable, PolynomialTable]:
    """Right (alpha) and left (beta) polynomial tables for a composition kernel."""
    e = kernel.eigen
    right = build_table(e.alpha, kernel.N)
    left = right if e.beta is e.alpha else build_table(e.beta, kernel.N)
    return right, left


def reconstruct_composition_kernel(kernel: TransitionKernel) -> np.ndarray:
    """K(x, y) = m(y, p) {1 + sum_{n != 0} lambda_n Q_n(x, alpha) Q_n(y, beta) / C(N; n+)}.

    The normaliser is E[Q_n(X, alpha) Q_n(X, beta)], which is C(N; n+)
    for a biorthonormal single-ball system.
    """
    right, left = eigen_tables(kernel)
    N = kernel.N
    m = kernel.stationary
    S = len(kernel.states)
    out = np.empty((S, S), dtype=object)
    rows_r = {n: right.row(n) for n in right.indices}
    rows_l = {n: left.row(n) for n in left.indices}
    for a in range(S):
        for b in range(S):
            s = 1
            for n in right.indices:
                if sum(n) == 0:
                    continue
                lam = kernel.eigenvalues[n]
                if lam == 0:
                    continue
                s = s + lam * rows_r[n][a] * rows_l[n][b] / multinomial_coefficient(extend_index(n, N))
            out[a, b] = m[b] * s
    return out


def matrix_deviation(A, B):
    worst = 0
    for a, b in zip(np.asarray(A).flat, np.asarray(B).flat):
        worst = max(worst, abs(a - b))
    return worst


def require_reversible(kernel: TransitionKernel, tol=None):
    if not kernel.is_reversible(tol):
        raise ReversibilityError(
            f"detailed balance fails (max deviation {format_scalar(kernel.detailed_balance_deviation())})"
        )


# ---------------------------------------------------------------------------
# simulation


@dataclass
class SimulationResult:
    trajectory: np.ndarray = field(repr=False)
    states: list = field(repr=False)
    counts: np.ndarray = field(repr=False)
    tv_distance: float
    seed: int

    @property
    def empirical(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    def trace_jsonl(self) -> str:
        lines = [json.dumps({"step": t, "state": list(self.states[s])}) for t, s in enumerate(self.trajectory.tolist())]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "seed": self.seed,
            "steps": int(len(self.trajectory) - 1),
            "tv_distance": self.tv_distance,
            "empirical": [
                {"state": list(s), "frequency": float(f)} for s, f in zip(self.states, self.empirical.tolist())
            ],
        }


def simulate(kernel: TransitionKernel, x0, steps: int, seed: int = 0) -> SimulationResult:
    """Seeded trajectory x_0, ..., x_steps; empirical occupation over all steps+1 states."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    S = kernel.size
    start = kernel.states.index(tuple(x0) if kernel.N is not None else x0)
    F = kernel.float_matrix()
    cum = np.cumsum(F, axis=1)
    cum[:, -1] = 1.0
    cum_rows = [row.tolist() for row in cum]
    rng = np.random.default_rng(seed)
    draws = rng.random(steps)
    traj = np.empty(steps + 1, dtype=np.int64)
    traj[0] = start
    s = start
    for t in range(steps):
        s = bisect.bisect_right(cum_rows[s], draws[t])
        if s >= S:
            s = S - 1
        traj[t + 1] = s
    counts = np.bincount(traj, minlength=S).astype(float)
    target = np.array([float(v) for v in kernel.stationary])
    tv = 0.5 * float(np.abs(counts / counts.sum() - target).sum())
    return SimulationResult(trajectory=traj, states=kernel.states, counts=counts, tv_distance=tv, seed=seed)
