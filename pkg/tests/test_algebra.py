"""Polynomial ring operations and exact rank."""

from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnasym.algebra import (
    RationalMatrix,
    exact_rank,
    make_poly,
    mat_from_rows,
    mat_transpose,
    nullspace_basis,
    poly_add,
    poly_align,
    poly_const,
    poly_eval,
    poly_is_zero,
    poly_mul,
    poly_parse,
    poly_partial,
    poly_pow,
    poly_render,
    poly_scale,
    poly_sub,
    poly_subst,
    poly_total_degree,
    poly_var,
    row_space_basis,
    solve_linear,
)

# ---------------------------------------------------------------------------
# strategies

_COEFF = st.builds(
    F,
    st.integers(min_value=-9, max_value=9),
    st.integers(min_value=1, max_value=5),
)


@st.composite
def polys(draw, max_vars=3, max_terms=5, max_exp=4):
    nv = draw(st.integers(min_value=1, max_value=max_vars))
    vs = tuple(f"w{i+1}" for i in range(nv))
    terms = {}
    for _ in range(draw(st.integers(min_value=0, max_value=max_terms))):
        exp = tuple(draw(st.integers(min_value=0, max_value=max_exp)) for _ in vs)
        c = draw(_COEFF)
        if c != 0:
            terms[exp] = terms.get(exp, F(0)) + c
    return make_poly(vs, {e: c for e, c in terms.items() if c != 0})


_POINT_VAL = st.builds(
    F,
    st.integers(min_value=-7, max_value=7),
    st.integers(min_value=1, max_value=4),
)


def _point_for(p, draw_vals):
    return {v: val for v, val in zip(p.vars, draw_vals)}


# ---------------------------------------------------------------------------
# grammar

def test_render_canonical_example():
    p = make_poly(("w1", "w2"), {(2, 2): F(1), (4, 0): F(3, 2)})
    assert poly_render(p) == "w1^2*w2^2 + 3/2*w1^4"


def test_parse_round_trip_example():
    text = "w1^2*w2^2 + 3/2*w1^4"
    assert poly_render(poly_parse(text)) == text


def test_parse_signs_and_constants():
    p = poly_parse("-x + 2 - 1/2*x^2")
    assert p.terms == {(1,): F(-1), (0,): F(2), (2,): F(-1, 2)}
    assert poly_render(poly_parse("0")) == "0"


def test_parse_repeated_variable_in_term():
    p = poly_parse("x*x + x^2")
    assert p.terms == {(2,): F(2)}


@pytest.mark.parametrize(
    "bad",
    ["", "x +", "* x", "x ^", "x^1/2", "x**2", "2x", "x + + y", "(x+y)", "x^-1"],
)
def test_parse_rejects_malformed(bad):
    with pytest.raises(ValueError):
        poly_parse(bad)


def test_parse_with_declared_variables():
    p = poly_parse("y", variables=("x", "y"))
    assert p.vars == ("x", "y")
    with pytest.raises(ValueError):
        poly_parse("z", variables=("x", "y"))


@given(polys())
@settings(max_examples=200, deadline=None)
def test_round_trip(p):
    q = poly_parse(poly_render(p), variables=p.vars) if p.terms else p
    assert q == p


# ---------------------------------------------------------------------------
# ring laws

@given(polys(), polys())
@settings(max_examples=100, deadline=None)
def test_add_commutes(p, q):
    assert poly_add(p, q) == poly_add(q, p)


@given(polys(), polys(), polys())
@settings(max_examples=60, deadline=None)
def test_mul_distributes(p, q, r):
    left = poly_mul(p, poly_add(q, r))
    right = poly_add(poly_mul(p, q), poly_mul(p, r))
    assert left == right


@given(polys())
@settings(max_examples=100, deadline=None)
def test_sub_self_is_zero(p):
    assert poly_is_zero(poly_sub(p, p))


@given(polys(), st.lists(_POINT_VAL, min_size=3, max_size=3))
@settings(max_examples=100, deadline=None)
def test_eval_is_ring_hom(p, vals):
    q = poly_pow(p, 2)
    point = _point_for(q, vals)
    assert poly_eval(q, point) == poly_eval(p, point) ** 2


# ---------------------------------------------------------------------------
# calculus

@given(polys(), polys())
@settings(max_examples=60, deadline=None)
def test_partial_product_rule(p, q):
    a, b = poly_align(p, q)
    v = a.vars[0]
    left = poly_partial(poly_mul(a, b), v)
    right = poly_add(
        poly_mul(poly_partial(a, v), b), poly_mul(a, poly_partial(b, v))
    )
    assert left == right


def test_partial_example():
    p = poly_parse("w1^2*w2 + 3*w1")
    assert poly_render(poly_partial(p, "w1")) == "3 + 2*w1*w2"
    assert poly_render(poly_partial(p, "w2")) == "w1^2"
    assert poly_is_zero(poly_partial(p, "w3"))


def test_subst_linear_shift():
    p = poly_parse("x^2")
    shifted = poly_subst(p, {"x": poly_parse("x + 1")})
    assert shifted == poly_parse("x^2 + 2*x + 1")


@given(polys(max_vars=2), st.lists(_POINT_VAL, min_size=2, max_size=2))
@settings(max_examples=60, deadline=None)
def test_subst_matches_eval(p, vals):
    reps = {v: poly_const((), val) for v, val in zip(p.vars, vals)}
    composed = poly_subst(p, reps)
    expected = poly_eval(p, _point_for(p, vals))
    if expected == 0:
        assert poly_is_zero(composed)
    else:
        assert composed.terms == {(0,) * len(composed.vars): expected}


def test_total_degree():
    assert poly_total_degree(poly_parse("1 + x*y^3")) == 4
    assert poly_total_degree(poly_const(("x",), 0)) == -1


# ---------------------------------------------------------------------------
# exact rank

def test_rank_hand_cases():
    assert exact_rank(mat_from_rows([[1, 0], [0, 1]])) == 2
    assert exact_rank(mat_from_rows([[1, 2], [2, 4]])) == 1
    assert exact_rank(mat_from_rows([[0, 0], [0, 0]])) == 0
    m = mat_from_rows(
        [
            [F(1, 2), F(1, 3), F(1, 5)],
            [F(1, 7), F(1, 11), F(1, 13)],
            [F(9, 14), F(14, 33), F(18, 65)],  # row0 + row1
        ]
    )
    assert exact_rank(m) == 2


_MAT_ENTRY = st.builds(
    F,
    st.integers(min_value=-20, max_value=20),
    st.integers(min_value=1, max_value=7),
)


@st.composite
def matrices(draw, max_dim=5):
    nr = draw(st.integers(min_value=1, max_value=max_dim))
    nc = draw(st.integers(min_value=1, max_value=max_dim))
    rows = [[draw(_MAT_ENTRY) for _ in range(nc)] for _ in range(nr)]
    return mat_from_rows(rows)


@given(matrices())
@settings(max_examples=100, deadline=None)
def test_rank_transpose_invariant(m):
    assert exact_rank(m) == exact_rank(mat_transpose(m))


@given(matrices(), st.data())
@settings(max_examples=100, deadline=None)
def test_rank_row_op_invariant(m, data):
    if m.nrows < 2:
        rank0 = exact_rank(m)
        scaled = mat_from_rows([[3 * x for x in m.rows[0]]])
        assert exact_rank(scaled) == rank0
        return
    i = data.draw(st.integers(min_value=0, max_value=m.nrows - 1))
    j = data.draw(st.integers(min_value=0, max_value=m.nrows - 1))
    if i == j:
        j = (j + 1) % m.nrows
    c = data.draw(_MAT_ENTRY)
    rows = [list(r) for r in m.rows]
    rows[i] = [x + c * y for x, y in zip(rows[i], rows[j])]
    assert exact_rank(mat_from_rows(rows)) == exact_rank(m)


@given(matrices())
@settings(max_examples=60, deadline=None)
def test_rank_matches_sympy(m):
    sympy = pytest.importorskip("sympy")
    sm = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in r] for r in m.rows])
    assert exact_rank(m) == sm.rank()


def test_rank_stop_at():
    m = mat_from_rows([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])
    assert exact_rank(m, stop_at=2) == 2
    assert exact_rank(m) == 3


def test_row_space_basis_greedy_order():
    rows = [
        [F(0), F(0)],
        [F(1), F(1)],
        [F(2), F(2)],
        [F(1), F(0)],
    ]
    assert row_space_basis(rows) == [1, 3]
    assert row_space_basis([]) == []


# ---------------------------------------------------------------------------
# small solvers

def test_solve_linear():
    a = [[F(2), F(1)], [F(1), F(-1)]]
    x = solve_linear(a, [F(5), F(1)])
    assert x == [F(2), F(1)]
    assert solve_linear([[F(1), F(1)], [F(1), F(1)]], [F(0), F(1)]) is None
    x = solve_linear([[F(1), F(1)]], [F(3)])
    assert x == [F(3), F(0)]  # free variable pinned to zero


def test_nullspace_basis():
    basis = nullspace_basis([[F(1), F(1), F(0)], [F(0), F(0), F(1)]])
    assert len(basis) == 1
    v = basis[0]
    assert v[0] + v[1] == 0 and v[2] == 0 and v != [0, 0, 0]
