"""Pole engines: monomial formula, Newton region, blow-ups, oracle, cache."""

from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnasym.algebra import poly_mul, poly_parse, poly_pow, poly_scale
from bnasym.rlct import (
    RlctCache,
    blowup_pole,
    canonical_key,
    monomial_pole,
    newton_pole,
    newton_polyhedron,
    numeric_lambda_oracle,
    rlct,
)


def pair_sum(n):
    """sum of w_i^2 w_j^2 over i < j in n variables"""
    vs = [f"w{i}" for i in range(1, n + 1)]
    return poly_parse(
        " + ".join(
            f"{vs[i]}^2*{vs[j]}^2" for i in range(n) for j in range(i + 1, n)
        )
    )


# ---------------------------------------------------------------------------
# monomial formula


def test_monomial_single_square():
    r = monomial_pole([2])
    assert (r.pole, r.multiplicity) == (F(-1, 2), 1)


def test_monomial_product_double_pole():
    r = monomial_pole([2, 2])
    assert (r.pole, r.multiplicity) == (F(-1, 2), 2)


def test_monomial_mixed_exponents():
    r = monomial_pole([4, 2])
    assert (r.pole, r.multiplicity) == (F(-1, 4), 1)


def test_monomial_rejects_bad_exponents():
    with pytest.raises(ValueError):
        monomial_pole([])
    with pytest.raises(ValueError):
        monomial_pole([2, 0])


# ---------------------------------------------------------------------------
# Newton region


def test_polyhedron_single_point():
    region = newton_polyhedron(poly_parse("w1^2*w2^2"))
    assert region.dimension == 2
    assert ((1, 0), 2) in region.facets
    assert ((0, 1), 2) in region.facets


def test_polyhedron_pair_sum_diagonal_facet():
    region = newton_polyhedron(pair_sum(3))
    assert ((1, 1, 1), 4) in region.facets


def test_polyhedron_quadratic_corner():
    region = newton_polyhedron(poly_parse("w1^2 + w2^2"))
    # x1/2 + x2/2 >= 1 cleared to primitive integers
    assert ((1, 1), 2) in region.facets


def test_polyhedron_rejects_constant_term():
    with pytest.raises(ValueError):
        newton_polyhedron(poly_parse("1 + w1^2"))


def test_polyhedron_contains_support():
    p = pair_sum(4)
    region = newton_polyhedron(p)
    for point in p.terms:
        for normal, offset in region.facets:
            assert sum(a * x for a, x in zip(normal, point)) >= offset


def test_newton_pair_sums():
    for n, want in [(3, F(-3, 4)), (6, F(-3, 2))]:
        r = newton_pole(pair_sum(n))
        assert (r.pole, r.multiplicity) == (want, 1)


def test_newton_agrees_with_monomial():
    r = newton_pole(poly_parse("w1^2*w2^2"))
    assert (r.pole, r.multiplicity) == (F(-1, 2), 2)


def test_newton_unresolved_on_odd_exponent():
    r = newton_pole(poly_parse("w1^2 + 2*w1*w2 + w2^2"))
    assert not r.resolved


# ---------------------------------------------------------------------------
# blow-ups


def test_blowup_recenters_squared_line():
    r = blowup_pole(poly_parse("w1^2 + 2*w1*w2 + w2^2"))
    assert (r.pole, r.multiplicity) == (F(-1, 2), 1)


def test_blowup_monomial_without_charts():
    r = blowup_pole(poly_parse("w1^2*w2^2"))
    assert (r.pole, r.multiplicity) == (F(-1, 2), 2)


def test_blowup_mixed_powers():
    r = blowup_pole(poly_parse("w1^2 + w2^4"))
    assert (r.pole, r.multiplicity) == (F(-3, 4), 1)


def test_blowup_agrees_with_newton_on_pair_sums():
    for n in (3, 4, 5, 6):
        rn = newton_pole(pair_sum(n))
        rb = blowup_pole(pair_sum(n))
        assert (rn.pole, rn.multiplicity) == (rb.pole, rb.multiplicity)


def test_blowup_one_sided_domain_changes_pole():
    p = poly_parse("w1^2 + 2*w1*w2 + w2^2")
    r = blowup_pole(p, sides={"w1": "pos", "w2": "pos"})
    # on the positive quadrant the zero line w1 = -w2 only touches the origin
    assert (r.pole, r.multiplicity) == (F(-1), 1)


def test_blowup_generator_mode_graph():
    # single transversal generator: one graph elimination, no vanishing left
    p = poly_parse("w1^2 + 2*w1*w2 + w2^2")
    r = blowup_pole(p, gens=[poly_parse("w1 + w2")])
    assert (r.pole, r.multiplicity) == (F(-1, 2), 1)


def test_blowup_depth_exhaustion_is_unresolved():
    p = poly_parse("w1^2 + w2^4")
    r = blowup_pole(p, max_depth=0)
    assert not r.resolved
    assert r.pole is None


# ---------------------------------------------------------------------------
# dispatch, cache


def test_rlct_table_family():
    for n, want in [(4, F(-1)), (5, F(-5, 4))]:
        r = rlct(pair_sum(n), cache=RlctCache())
        assert (r.pole, r.multiplicity) == (want, 1)


def test_rlct_cache_hit_flag(tmp_path):
    cache = RlctCache(str(tmp_path / "poles.json"))
    p = pair_sum(3)
    first = rlct(p, cache=cache)
    assert "cache_hit" not in first.certificate
    again = rlct(p, cache=cache)
    assert again.certificate.get("cache_hit") is True
    assert (again.pole, again.multiplicity) == (first.pole, first.multiplicity)


def test_rlct_cache_persists_across_instances(tmp_path):
    path = str(tmp_path / "poles.json")
    rlct(pair_sum(3), cache=RlctCache(path))
    fresh = RlctCache(path)
    hit = fresh.get(canonical_key(pair_sum(3)))
    assert hit is not None and hit.pole == F(-3, 4)


def test_canonical_key_ignores_names_and_term_order():
    a = poly_parse("w1^2*w2^2 + w1^4")
    b = poly_parse("x^4 + x^2*y^2")
    assert canonical_key(a) == canonical_key(b)


def test_rlct_sos_bound_holds():
    for p in (pair_sum(3), poly_parse("w1^2 + w2^4"), poly_parse("w1^2*w2^2")):
        r = rlct(p, cache=RlctCache())
        assert -F(len(p.vars), 2) <= r.pole < 0


# ---------------------------------------------------------------------------
# numeric oracle


def test_oracle_single_square():
    est = numeric_lambda_oracle(poly_parse("w1^2"), seed=5)
    assert abs(est["lambda"] - 0.5) < 0.05


def test_oracle_pair_sum():
    est = numeric_lambda_oracle(pair_sum(3), seed=5)
    assert abs(est["lambda"] - 0.75) < 0.1


def test_oracle_detects_multiplicity():
    est = numeric_lambda_oracle(poly_parse("w1^2*w2^2"), seed=5)
    assert abs(est["lambda"] - 0.5) < 0.1
    assert est["m"] > 1.5


def test_oracle_matches_exact_on_closed_forms():
    # quasi-Monte-Carlo stays sharp through three dimensions at the default
    # sample count; beyond that the reported stderr blows up honestly
    fixtures = [
        (poly_parse("w1^2"), F(1, 2), 1),
        (poly_parse("w1^2*w2^2"), F(1, 2), 2),
        (poly_parse("w1^2 + w2^4"), F(3, 4), 1),
        (pair_sum(3), F(3, 4), 1),
    ]
    for p, lam, m in fixtures:
        est = numeric_lambda_oracle(p, seed=11)
        assert abs(est["lambda"] - float(lam)) < 0.1
        assert abs(est["m"] - m) <= 0.5


def test_oracle_rejects_negative_polynomial():
    with pytest.raises(ValueError):
        numeric_lambda_oracle(poly_parse("0 - w1^2"), seed=1)


# ---------------------------------------------------------------------------
# invariance properties on a generated corpus


@st.composite
def even_positive_polys(draw, max_vars=3, max_terms=4, max_half_exp=3):
    """Sums of positive-coefficient monomials with even exponents, p(0) = 0."""
    nv = draw(st.integers(min_value=1, max_value=max_vars))
    vs = tuple(f"w{i + 1}" for i in range(nv))
    terms = {}
    for _ in range(draw(st.integers(min_value=1, max_value=max_terms))):
        exp = tuple(
            2 * draw(st.integers(min_value=0, max_value=max_half_exp)) for _ in vs
        )
        if not any(exp):
            continue
        terms[exp] = terms.get(exp, F(0)) + F(
            draw(st.integers(min_value=1, max_value=9))
        )
    if not terms:
        terms[(2,) + (0,) * (nv - 1)] = F(1)
    from bnasym.algebra import make_poly

    return make_poly(vs, terms)


@settings(max_examples=60, deadline=None)
@given(even_positive_polys())
def test_property_engines_agree(p):
    rn = newton_pole(p)
    rb = blowup_pole(p)
    assert rn.resolved
    if rb.resolved:
        assert (rn.pole, rn.multiplicity) == (rb.pole, rb.multiplicity)


@settings(max_examples=60, deadline=None)
@given(
    even_positive_polys(),
    st.builds(
        F,
        st.integers(min_value=1, max_value=12),
        st.integers(min_value=1, max_value=12),
    ),
)
def test_property_scaling_invariance(p, c):
    base = rlct(p, cache=RlctCache())
    scaled = rlct(poly_scale(p, c), cache=RlctCache())
    assert (base.pole, base.multiplicity) == (scaled.pole, scaled.multiplicity)


@settings(max_examples=40, deadline=None)
@given(even_positive_polys(max_vars=2), st.integers(min_value=2, max_value=3))
def test_property_power_scaling(p, k):
    base = newton_pole(p)
    powered = newton_pole(poly_pow(p, k))
    assert powered.pole == base.pole / k
    assert powered.multiplicity == base.multiplicity


@settings(max_examples=40, deadline=None)
@given(even_positive_polys())
def test_property_dummy_variable_invariance(p):
    from bnasym.algebra import make_poly

    base = rlct(p, cache=RlctCache())
    widened = make_poly(
        p.vars + ("zz_unused",), {e + (0,): c for e, c in p.terms.items()}
    )
    wide = rlct(widened, cache=RlctCache())
    assert (base.pole, base.multiplicity) == (wide.pole, wide.multiplicity)


@settings(max_examples=40, deadline=None)
@given(even_positive_polys(max_vars=3), st.permutations([0, 1, 2]))
def test_property_permutation_invariance(p, perm):
    from bnasym.algebra import make_poly

    order = [i for i in perm if i < len(p.vars)]
    vs = tuple(p.vars[i] for i in order)
    shuffled = make_poly(
        vs, {tuple(e[i] for i in order): c for e, c in p.terms.items()}
    )
    base = rlct(p, cache=RlctCache())
    other = rlct(shuffled, cache=RlctCache())
    assert (base.pole, base.multiplicity) == (other.pole, other.multiplicity)


def test_power_scaling_on_table_family():
    base = newton_pole(pair_sum(3))
    for k in (2, 3):
        powered = newton_pole(poly_pow(pair_sum(3), k))
        assert powered.pole == base.pole / k
        assert powered.multiplicity == base.multiplicity


def test_scaled_table_family_blowup_agreement():
    p = poly_scale(pair_sum(3), F(7, 3))
    rb = blowup_pole(p)
    assert (rb.pole, rb.multiplicity) == (F(-3, 4), 1)
