import json
import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krawtchouk.basis import hadamard4_basis, helmert_basis, s3_basis, xu_basis
from krawtchouk.combinatorics import enumerate_compositions, extend_index, multi_indices, multinomial_coefficient, multinomial_pmf
from krawtchouk.errors import BasisConventionError, CapacityError, ZeroScaleError
from krawtchouk.polynomials import (
    Q_at_last,
    all_Q_at,
    binomial_coefficients,
    build_scaled_table,
    build_table,
    check_duality,
    dual_from_polynomials,
    dual_table,
    eval_Q_binomial,
    eval_Q_gf,
    eval_Q_hypergeometric,
    eval_Q_symmetrized,
    eval_xu_K,
    h_diamond,
    kernel_invariance_deviation,
    labels_of,
    leading_term_reconstruction,
    norm_Q,
    recurrence_coefficients,
    reproducing_kernel,
    scaled_Q,
    total_degree,
    transform_check,
    xu_constant,
    xu_identity_deviation,
)
from krawtchouk.basis import OrthoBasis

from conftest import P3, P4, rational_probability

HALF = (F(1, 2), F(1, 2))


def test_gf_examples():
    u = helmert_basis(HALF)
    assert eval_Q_gf((0,), (1, 1), u) == 1
    assert eval_Q_gf((1,), (1, 1), u) == 0
    assert eval_Q_gf((2,), (0, 2), u) == 1
    assert eval_Q_gf((1,), (0, 2), u) == 2
    assert Q_at_last((1,), u, 2) == 2


def test_gf_index_out_of_range():
    with pytest.raises(IndexError):
        eval_Q_gf((3,), (1, 1), helmert_basis(HALF))


def test_first_order_polynomials_are_linear_statistics():
    u = helmert_basis(P4)
    for x in enumerate_compositions(4, 3):
        for l in range(1, 4):
            n = tuple(1 if k == l else 0 for k in range(1, 4))
            S = sum(u.u[l][j] * x[j] for j in range(4))
            assert eval_Q_gf(n, x, u) == S
            assert eval_Q_symmetrized(n, labels_of(x), u) == S


def test_hypergeometric_matches_gf_d2():
    u = helmert_basis(HALF)
    for N in range(7):
        for x in enumerate_compositions(2, N):
            assert eval_Q_hypergeometric((0,), x, u) == 1
            for n in multi_indices(2, N):
                assert eval_Q_hypergeometric(n, x, u) == eval_Q_gf(n, x, u)


def test_hypergeometric_matches_gf_xu_d3():
    u = xu_basis(P3)
    for N in range(5):
        for x in enumerate_compositions(3, N):
            for n in multi_indices(3, N):
                assert eval_Q_hypergeometric(n, x, u) == eval_Q_gf(n, x, u)


def test_hypergeometric_requires_convention_without_rescale():
    u = helmert_basis(P3)
    with pytest.raises(BasisConventionError):
        eval_Q_hypergeometric((1, 0), (1, 1, 1), u, rescale=False)


def test_symmetrized_capacity():
    with pytest.raises(CapacityError):
        eval_Q_symmetrized((1,), (0,) * 11, helmert_basis(HALF))


def test_symmetrized_random_sequences(rng):
    u = helmert_basis(P3)
    for _ in range(20):
        z = tuple(rng.randrange(3) for _ in range(5))
        x = tuple(z.count(j) for j in range(3))
        for n in multi_indices(3, 5):
            assert eval_Q_symmetrized(n, z, u) == eval_Q_gf(n, x, u)


def test_xu_examples():
    p = P4
    u = xu_basis(p)
    N = 3
    x = (0, 0, 0, N)
    for n in multi_indices(4, N):
        expected = (-1) ** sum(n)
        head = 0
        for j, nj in enumerate(n):
            expected *= (p[j] / (1 - head)) ** nj
            head += p[j]
        assert eval_xu_K(n, x, p) == expected
    assert eval_xu_K((0, 0, 0), (1, 1, 1, 0), p) == 1


def test_xu_identity_d3():
    assert xu_identity_deviation(P3, 3) == 0
    u = xu_basis(P3)
    for x in enumerate_compositions(3, 3):
        for n in multi_indices(3, 3):
            assert eval_xu_K(n, x, P3) == xu_constant(n, P3, 3) * eval_Q_gf(n, x, u)


def test_table_example():
    t = build_table(helmert_basis(HALF), 2)
    assert t.states == [(2, 0), (1, 1), (0, 2)]
    assert t.values.tolist() == [[1, 1, 1], [-2, 0, 2], [1, -1, 1]]
    one = build_table(OrthoBasis(core=((1,),), p=(F(1),)), 3)
    assert one.values.tolist() == [[1]]


def test_gram_diagonal_with_norms():
    u = helmert_basis(P3)
    t = build_table(u, 2)
    g = t.gram()
    for r, n in enumerate(t.indices):
        for c, m in enumerate(t.indices):
            assert g[r][c] == (norm_Q(n, u, 2) if r == c else 0)
    assert t.orthogonality_deviation() == 0


def test_norm_examples():
    assert norm_Q((0,), helmert_basis(HALF), 2) == 1
    assert norm_Q((1,), helmert_basis(HALF), 2) == 2
    u = helmert_basis(P3)
    assert norm_Q((1, 1), u, 3) == 6
    brute = sum(multinomial_pmf(x, u.p) * eval_Q_gf((1, 1), x, u) ** 2 for x in enumerate_compositions(3, 3))
    assert brute == 6


def test_scaled_examples():
    u = helmert_basis(HALF)
    assert scaled_Q((1,), (2, 0), u) == -1
    assert scaled_Q((1,), (1, 1), u) == 0
    assert h_diamond((1,), u, 2) == 2
    for n in multi_indices(3, 3):
        assert scaled_Q(n, (0, 0, 3), helmert_basis(P3)) == 1


@pytest.mark.parametrize("u", [helmert_basis(P3), xu_basis(P3), s3_basis(), hadamard4_basis()], ids=lambda u: u.name)
def test_scaled_orthogonality(u):
    N = 2
    st_ = build_scaled_table(u, N)
    w = [multinomial_pmf(x, u.p) for x in st_.states]
    for a in range(len(st_.indices)):
        for b in range(len(st_.indices)):
            e = sum(wi * st_.values[a, c] * st_.values[b, c] for c, wi in enumerate(w))
            assert e == (1 / st_.h[a] if a == b else 0)


def test_scaled_requires_nonzero_last_column():
    u = OrthoBasis(core=((1, 1, 1), (-1, 1, 0), (F(-1, 2), F(-1, 2), 1)), p=(F(1, 3),) * 3)
    with pytest.raises(ZeroScaleError):
        scaled_Q((1, 0), (1, 1, 1), u)


def test_duality_d2_uniform():
    H = helmert_basis(HALF).H()
    for N in range(5):
        A, B = dual_table(H, N), dual_table(H.T, N)
        for r, s in enumerate(A.states):
            for c, x in enumerate(A.states):
                assert A.values[r, c] == B.values[c, r]


def test_dual_orthogonality_helmert_d3():
    rep = check_duality(helmert_basis(P3).H(), 3)
    assert rep.max_deviation() == 0


def test_dual_first_row_and_polynomial_link():
    u = helmert_basis(P3)
    N = 3
    D = dual_table(u.H(), N)
    for x in D.states:
        prod = math.prod(math.sqrt(float(pj)) ** xj for pj, xj in zip(u.p, x))
        assert math.isclose(float(D.value((N, 0, 0), x)), prod)
    E = dual_from_polynomials(u, N)
    assert all(a == b for a, b in zip(D.values.flat, E.values.flat))


def test_dual_orthogonality_fails_for_non_orthogonal_H():
    # the xu basis is orthogonal but not orthonormal, so its H is not an orthogonal matrix
    assert check_duality(xu_basis(P3).H(), 2).max_deviation() != 0


def test_transform_examples():
    u = helmert_basis(HALF)
    for n in multi_indices(2, 2):
        lhs, rhs = transform_check((1, 1), n, u, N=2)
        assert lhs == rhs == (1 if sum(n) == 0 else 0)
    lhs, rhs = transform_check((2, 1), (1,), u, N=2)
    assert lhs == rhs
    v = helmert_basis(P3)
    for n in multi_indices(3, 3):
        lhs, rhs = transform_check((F(1, 2), F(2), F(3)), n, v, N=3)
        assert lhs == rhs


def test_recurrence_base_case():
    r = recurrence_coefficients(1, (0,), helmert_basis(HALF), 3)
    assert {m: c for m, c in r.projection.items() if c} == {(1,): 1}


@pytest.mark.parametrize(
    "u", [helmert_basis(HALF), helmert_basis(P3), xu_basis(P3), s3_basis()], ids=lambda u: u.name
)
def test_recurrence_derived_coefficients_match_projection(u):
    N = 3
    t = build_table(u, N)
    published_misses = 0
    for i in range(1, u.d):
        for n in t.indices:
            r = recurrence_coefficients(i, n, u, N, table=t)
            assert r.matches_derived
            published_misses += not r.matches_published
    # the closed form without the n_i and n_l factors does not reproduce the projection
    assert published_misses > 0


def test_recurrence_published_example_d2():
    # at n = (1) both closed forms agree; at n = (2) the n_i factor matters
    r = recurrence_coefficients(1, (1,), helmert_basis(HALF), 3)
    assert r.matches_derived and r.matches_published
    r = recurrence_coefficients(1, (2,), helmert_basis(HALF), 3)
    assert r.projection[(1,)] == 4
    assert r.matches_derived and not r.matches_published
    assert json.loads(json.dumps(r.to_json()))["matches_derived"] is True


def test_reproducing_kernel():
    u = helmert_basis([F(1, 3)] * 3)
    for x in enumerate_compositions(3, 2):
        for y in enumerate_compositions(3, 2):
            assert reproducing_kernel(0, x, y, u) == 1
            assert reproducing_kernel(2, x, y, u) == reproducing_kernel(2, y, x, u)
    th = 0.9
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    assert kernel_invariance_deviation(u, 2, R) < 1e-10


def test_kernel_completeness_d2():
    u = helmert_basis((F(2, 3), F(1, 3)))
    for N in range(5):
        for x in enumerate_compositions(2, N):
            for y in enumerate_compositions(2, N):
                s = sum(reproducing_kernel(k, x, y, u) for k in range(N + 1))
                assert s == (1 / multinomial_pmf(x, u.p) if x == y else 0)


@pytest.mark.parametrize("p,N", [(HALF, 4), (P3, 3)])
def test_leading_term_reconstruction(p, N):
    u = helmert_basis(p)
    for n in multi_indices(len(p), N):
        for x in enumerate_compositions(len(p), N):
            assert leading_term_reconstruction(n, x, u) == eval_Q_gf(n, x, u)


def test_coefficients_do_not_depend_on_N():
    u = helmert_basis(P3)
    for n in multi_indices(3, 3):
        for N in range(sum(n), 6):
            for x in enumerate_compositions(3, N):
                assert eval_Q_binomial(n, x, u) == eval_Q_gf(n, x, u)
        assert total_degree(n, u) == sum(n)
    assert binomial_coefficients((1, 0), u)


def test_table_exports():
    t = build_table(helmert_basis(HALF), 2)
    assert t.to_csv().splitlines()[0].startswith("n")
    obj = json.loads(json.dumps(t.to_json()))
    assert obj["schema"] == 1 and obj["N"] == 2


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 3).flatmap(rational_probability), st.integers(0, 3))
def test_orthogonality_random_p(p, N):
    for u in (helmert_basis(p), xu_basis(p)):
        assert build_table(u, N).orthogonality_deviation() == 0


@pytest.mark.parametrize("u", [helmert_basis(P3), xu_basis(P3), s3_basis(), hadamard4_basis()], ids=lambda u: u.name)
def test_total_degree_is_index_size(u):
    for n in multi_indices(u.d, 3):
        assert total_degree(n, u) == sum(n)
