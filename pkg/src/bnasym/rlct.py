"""Largest pole and multiplicity of sum-of-squares polynomial integrals.

For a nonnegative polynomial p with p(0) = 0, the function
J(s) = integral of p(w)^s over a small box around the origin extends
meromorphically in s, and its largest pole -lambda with multiplicity m
controls the large-N decay of integral of exp(-N p):

    I(N) ~ const * N^(-lambda) * (ln N)^(m - 1).

Three exact engines of increasing generality compute (pole, multiplicity):

* ``monomial_pole``   closed form for a single monomial;
* ``newton_pole``     Newton-polyhedron face analysis, valid for sums of
                      monomials with positive coefficients and all-even
                      exponents (then no face polynomial vanishes off the
                      coordinate planes, so the polyhedron alone decides);
* ``blowup_pole``     depth-bounded coordinate blow-ups with exact
                      bookkeeping of the accumulated volume monomial and
                      of exceptional-divisor identities.

``numeric_lambda_oracle`` estimates lambda and m from quasi-Monte-Carlo
integrals of exp(-N p) as an engine-independent cross-check, and ``rlct``
dispatches between the engines behind a result cache.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .algebra import (
    SparsePoly,
    exact_rank,
    make_poly,
    mat_from_rows,
    nullspace_basis,
    poly_add,
    poly_is_zero,
    poly_mul,
    poly_pow,
    poly_render,
    poly_scale,
    poly_subst,
    poly_zero,
)

DEFAULT_MAX_DEPTH = 6
DEFAULT_CHART_CAP = 10_000

TWO_SIDED = "two"
ONE_SIDED = "pos"


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class PoleResult:
    """Outcome of a pole computation.

    ``pole`` is the largest pole (a negative rational) and ``multiplicity``
    its order; both are None when ``method`` is ``"unresolved"``.  The
    certificate carries method-specific evidence: the face hit by the
    diagonal, the per-divisor pole table, or the reason a computation gave
    up together with any partial bound it established.
    """

    pole: Optional[Fraction]
    multiplicity: Optional[int]
    method: str  # "monomial" | "newton" | "blowup" | "unresolved"
    certificate: Mapping[str, object] = field(default_factory=dict)

    @property
    def resolved(self) -> bool:
        return self.pole is not None

    @property
    def lambda_(self) -> Optional[Fraction]:
        return None if self.pole is None else -self.pole


def _check_sos_bound(result: PoleResult, n_vars: int) -> PoleResult:
    # a sum of squares vanishing at 0 in d variables decays no faster than
    # the fully transversal case, so -d/2 <= pole < 0
    if result.pole is not None:
        assert -Fraction(n_vars, 2) <= result.pole < 0, (
            f"pole {result.pole} outside [-{n_vars}/2, 0)"
        )
    return result


# ---------------------------------------------------------------------------
# monomial engine


def monomial_pole(exponents: Sequence[int]) -> PoleResult:
    """Largest pole of J(s) for p = prod w_i^(a_i) over the unit box.

    J(s) = prod 1/(a_i s + 1): each variable contributes a simple pole at
    -1/a_i, so the largest pole is -1/max(a) and its multiplicity is the
    number of variables attaining the maximal exponent.
    """
    exps = [int(a) for a in exponents]
    if not exps or any(a < 1 for a in exps):
        raise ValueError("monomial_pole needs a nonempty all-positive exponent vector")
    top = max(exps)
    mult = sum(1 for a in exps if a == top)
    return PoleResult(
        Fraction(-1, top),
        mult,
        "monomial",
        {"exponents": exps, "max_exponent": top},
    )


# ---------------------------------------------------------------------------
# Newton polyhedron


@dataclass(frozen=True)
class NewtonPolyhedron:
    """Convex hull of a polynomial's exponent support plus the orthant.

    ``facets`` lists inequalities <a, x> >= b with primitive integer a >= 0;
    every support point satisfies all of them, and the recession cone is the
    full nonnegative orthant, so the region is unbounded in every coordinate
    direction.
    """

    dimension: int
    generators: Tuple[Tuple[int, ...], ...]
    facets: Tuple[Tuple[Tuple[int, ...], int], ...]


def _prune_dominated(points: Sequence[Tuple[int, ...]]) -> List[Tuple[int, ...]]:
    # s is redundant when some s' <= s componentwise: s lies in s' + orthant
    keep: List[Tuple[int, ...]] = []
    for s in points:
        if any(t != s and all(ti <= si for ti, si in zip(t, s)) for t in points):
            continue
        keep.append(s)
    return sorted(set(keep))


def _primitive_normal(vec: Sequence[Fraction]) -> Optional[Tuple[int, ...]]:
    denom = 1
    for x in vec:
        denom = denom * x.denominator // math.gcd(denom, x.denominator)
    ints = [int(x * denom) for x in vec]
    g = 0
    for v in ints:
        g = math.gcd(g, abs(v))
    if g == 0:
        return None
    ints = [v // g for v in ints]
    if all(v <= 0 for v in ints):
        ints = [-v for v in ints]
    if any(v < 0 for v in ints):
        # mixed sign cannot support a region receding in the full orthant
        return None
    return tuple(ints)


def newton_polyhedron(p: SparsePoly) -> NewtonPolyhedron:
    """Facet description of conv(support of p) + nonnegative orthant."""
    if poly_is_zero(p):
        raise ValueError("zero polynomial has no Newton polyhedron")
    d = len(p.vars)
    if tuple([0] * d) in p.terms:
        raise ValueError(
            "constant term present: the integrand does not vanish at the origin"
        )
    pts = _prune_dominated(list(p.terms.keys()))
    facets: Dict[Tuple[int, ...], int] = {}
    if d == 1:
        facets[(1,)] = min(s[0] for s in pts)
        return NewtonPolyhedron(d, tuple(pts), tuple(sorted(facets.items())))
    axes = [tuple(1 if j == i else 0 for j in range(d)) for i in range(d)]
    npts = len(pts)
    for k in range(1, min(npts, d) + 1):
        n_axes = d - k
        for pt_idx in itertools.combinations(range(npts), k):
            base = pts[pt_idx[0]]
            point_rows = [
                [Fraction(pts[i][j] - base[j]) for j in range(d)] for i in pt_idx[1:]
            ]
            for ax_idx in itertools.combinations(range(d), n_axes):
                cand = point_rows + [[Fraction(x) for x in axes[i]] for i in ax_idx]
                basis = nullspace_basis(cand)
                if len(basis) != 1:
                    continue
                normal = _primitive_normal(basis[0])
                if normal is None or normal in facets:
                    continue
                b = min(sum(a * s for a, s in zip(normal, pt)) for pt in pts)
                touching = [
                    pt for pt in pts if sum(a * s for a, s in zip(normal, pt)) == b
                ]
                free_axes = [i for i in range(d) if normal[i] == 0]
                t0 = touching[0]
                span = [
                    [Fraction(t[j] - t0[j]) for j in range(d)] for t in touching[1:]
                ] + [[Fraction(x) for x in axes[i]] for i in free_axes]
                # a supporting hyperplane is a facet iff its touching set
                # spans an affine subspace of dimension d - 1
                if span and exact_rank(mat_from_rows(span)) == d - 1:
                    facets[normal] = b
    return NewtonPolyhedron(d, tuple(pts), tuple(sorted(facets.items())))


def _diagonal_face(
    support: Sequence[Tuple[int, ...]],
    weights: Sequence[int],
) -> Tuple[Fraction, int, Dict[str, object]]:
    """Largest pole data for a sum of positive monomials with measure weights.

    Integrating prod v_i^(w_i) * p(v)^s picks up, from each facet
    <a, x> >= b of the Newton region with b > 0, a pole at
    s = -<a, w + 1>/b.  The multiplicity of the overall largest pole is the
    rank of the normals of the facets attaining it, i.e. the codimension of
    the smallest face met by the weighted diagonal.
    """
    d = len(weights)
    dummy = tuple(f"v{i}" for i in range(d))
    region = newton_polyhedron(
        make_poly(dummy, {tuple(s): Fraction(1) for s in support})
    )
    best: Optional[Fraction] = None
    for normal, b in region.facets:
        if b <= 0:
            continue
        value = Fraction(sum(a * (w + 1) for a, w in zip(normal, weights)), b)
        if best is None or value < best:
            best = value
    assert best is not None, "support away from the origin has a separating facet"
    active = [
        (normal, b)
        for normal, b in region.facets
        if b > 0
        and Fraction(sum(a * (w + 1) for a, w in zip(normal, weights)), b) == best
    ]
    mult = exact_rank(
        mat_from_rows([[Fraction(a) for a in normal] for normal, _ in active])
    )
    cert: Dict[str, object] = {
        "lambda": str(best),
        "active_facets": [{"normal": list(normal), "offset": b} for normal, b in active],
        "face_codimension": mult,
    }
    return best, mult, cert


def newton_pole(p: SparsePoly) -> PoleResult:
    """Pole via the Newton polyhedron, for even-exponent positive sums.

    Preconditions (sufficient for nondegeneracy): every coefficient is
    positive and every exponent vector is componentwise even, with
    p(0) = 0.  Violations yield an unresolved result rather than a guess.
    """
    if poly_is_zero(p):
        return PoleResult(None, None, "unresolved", {"reason": "zero polynomial"})
    d_all = len(p.vars)
    if tuple([0] * d_all) in p.terms:
        return PoleResult(None, None, "unresolved", {"reason": "nonzero at origin"})
    for exps, coef in p.terms.items():
        if coef <= 0:
            return PoleResult(
                None, None, "unresolved", {"reason": "nonpositive coefficient present"}
            )
        if any(e % 2 for e in exps):
            return PoleResult(
                None, None, "unresolved", {"reason": "odd exponent present"}
            )
    # unused variables contribute no pole; restrict to the active ones
    used = [i for i in range(d_all) if any(e[i] for e in p.terms)]
    support = [tuple(e[i] for i in used) for e in p.terms]
    lam, mult, cert = _diagonal_face(support, [0] * len(used))
    cert["engine"] = "newton"
    return PoleResult(-lam, mult, "newton", cert)


# ---------------------------------------------------------------------------
# blow-up engine
#
# Chart state for the bounded resolution search.  ``weights`` holds the
# accumulated volume-form exponent per variable, ``divisor`` names the
# hypersurface {v = 0} so poles found in overlapping charts can be
# reconciled, ``sides`` records whether a variable ranges over both signs,
# and ``fixed_range`` marks direction variables of earlier blow-ups whose
# chart domain cannot be shrunk: their zeros must be chased by recentering
# instead of being pushed out of the neighborhood.


@dataclass
class _Chart:
    p: SparsePoly
    gens: Optional[List[SparsePoly]]
    weights: Dict[str, int]
    divisor: Dict[str, str]
    sides: Dict[str, str]
    fixed_range: Dict[str, bool]
    depth: int
    shift: Fraction  # lambda already banked by transversal eliminations
    path: str


@dataclass
class _ChartOutcome:
    lam: Fraction
    mult: int
    divisors: List[str]
    path: str


def _poly_vars_used(p: SparsePoly) -> List[str]:
    return [v for i, v in enumerate(p.vars) if any(e[i] for e in p.terms)]


def _restrict_vars(p: SparsePoly, keep: Sequence[str]) -> SparsePoly:
    idx = [p.vars.index(v) for v in keep]
    terms: Dict[Tuple[int, ...], Fraction] = {}
    for e, c in p.terms.items():
        key = tuple(e[i] for i in idx)
        terms[key] = terms.get(key, Fraction(0)) + c
    return make_poly(tuple(keep), {k: v for k, v in terms.items() if v})


def _embed(p: SparsePoly, varlist: Tuple[str, ...]) -> SparsePoly:
    pos = {v: i for i, v in enumerate(varlist)}
    terms: Dict[Tuple[int, ...], Fraction] = {}
    for e, c in p.terms.items():
        key = [0] * len(varlist)
        for v, x in zip(p.vars, e):
            key[pos[v]] = x
        terms[tuple(key)] = terms.get(tuple(key), Fraction(0)) + c
    return make_poly(varlist, terms)


def _var_poly(varlist: Tuple[str, ...], name: str) -> SparsePoly:
    e = tuple(1 if v == name else 0 for v in varlist)
    return make_poly(varlist, {e: Fraction(1)})


def _split_by_var(p: SparsePoly, var: str) -> Dict[int, SparsePoly]:
    """Decompose p = sum_j coeff_j * var^j with var-free coefficients."""
    vi = p.vars.index(var)
    rest = tuple(v for v in p.vars if v != var)
    out: Dict[int, Dict[Tuple[int, ...], Fraction]] = {}
    for e, c in p.terms.items():
        j = e[vi]
        key = tuple(x for i, x in enumerate(e) if i != vi)
        bucket = out.setdefault(j, {})
        bucket[key] = bucket.get(key, Fraction(0)) + c
    return {j: make_poly(rest, terms) for j, terms in out.items()}


def _monomial_factor(p: SparsePoly) -> Tuple[Tuple[int, ...], SparsePoly]:
    """p = v^a * q with a the componentwise minimum of the support."""
    if poly_is_zero(p):
        return tuple([0] * len(p.vars)), p
    a = [min(e[i] for e in p.terms) for i in range(len(p.vars))]
    terms = {tuple(e[i] - a[i] for i in range(len(e))): c for e, c in p.terms.items()}
    return tuple(a), make_poly(p.vars, terms)


def _certify_unit(
    q: SparsePoly,
    fixed: Optional[Mapping[str, bool]] = None,
    sides: Optional[Mapping[str, str]] = None,
    tries: int = 40,
) -> bool:
    """True when q is provably nonzero on its chart domain near the origin.

    Two sound certificates.  Sign-definite: the constant is positive and
    every other term is nonnegative on the domain (positive coefficient,
    even exponents on two-sided variables).  Dominance: shrinking each
    shrinkable variable by 2^-k makes the constant dominate the absolute
    sum of the rest; direction variables of earlier blow-ups keep their
    full range and contribute magnitude one.  Pole locations do not depend
    on how far a shrinkable box is shrunk, so shrinking is free.
    """
    d = len(q.vars)
    zero = tuple([0] * d)
    c0 = q.terms.get(zero)
    if not c0:
        return False
    others = [(e, c) for e, c in q.terms.items() if e != zero]
    if not others:
        return True
    fixed = fixed or {}
    sides = sides or {}

    def term_nonneg(e: Tuple[int, ...], c: Fraction) -> bool:
        if c <= 0:
            return False
        for v, exp in zip(q.vars, e):
            if exp % 2 and sides.get(v, TWO_SIDED) == TWO_SIDED:
                return False
        return True

    if c0 > 0 and all(term_nonneg(e, c) for e, c in others):
        return True
    if c0 < 0 and all(term_nonneg(e, -c) for e, c in others):
        return True

    shrink_deg = [
        sum(exp for v, exp in zip(q.vars, e) if not fixed.get(v, False))
        for e, _ in others
    ]
    for k in range(1, tries + 1):
        bound = sum(
            abs(c) * Fraction(1, 2 ** (k * deg))
            for (_, c), deg in zip(others, shrink_deg)
        )
        if abs(c0) > bound:
            return True
        if all(deg == 0 for deg in shrink_deg):
            break
    return False


def _axis_coefficients(q: SparsePoly, var: str) -> List[Fraction]:
    """Dense coefficients of q restricted to the ``var`` axis, degree ascending."""
    vi = q.vars.index(var)
    degree = max((e[vi] for e in q.terms), default=0)
    coeffs = [Fraction(0)] * (degree + 1)
    for e, c in q.terms.items():
        if any(x for i, x in enumerate(e) if i != vi):
            continue
        coeffs[e[vi]] += c
    return coeffs


def _divisors_of(n: int) -> List[int]:
    if n == 0:
        return [1]
    out = []
    i = 1
    while i * i <= n:
        if n % i == 0:
            out.append(i)
            if i != n // i:
                out.append(n // i)
        i += 1
    return sorted(out)


def _axis_rational_roots(q: SparsePoly, var: str) -> List[Fraction]:
    """Nonzero rational roots of q on the ``var`` axis, within [-1, 1]."""
    coeffs = _axis_coefficients(q, var)
    denom = 1
    for c in coeffs:
        denom = denom * c.denominator // math.gcd(denom, c.denominator)
    ints = [int(c * denom) for c in coeffs]
    while ints and ints[-1] == 0:
        ints.pop()
    while ints and ints[0] == 0:
        ints.pop(0)  # roots at zero belong to the origin analysis
    if len(ints) <= 1:
        return []
    lead, const = ints[-1], ints[0]
    roots: List[Fraction] = []
    for num in _divisors_of(abs(const)):
        for den in _divisors_of(abs(lead)):
            for sign in (1, -1):
                r = Fraction(sign * num, den)
                if abs(r) > 1 or r in roots:
                    continue
                if sum(c * r**j for j, c in enumerate(ints)) == 0:
                    roots.append(r)
    return roots


def _divide_linear(q: SparsePoly, var: str, root: Fraction) -> Optional[SparsePoly]:
    """Exact quotient q / (var - root), or None when not divisible."""
    parts = _split_by_var(q, var)
    top = max(parts)
    if top == 0:
        return None
    rest_vars = next(iter(parts.values())).vars
    quot: Dict[int, SparsePoly] = {}
    carry = poly_zero(rest_vars)
    for j in range(top, 0, -1):
        bj = poly_add(parts.get(j, poly_zero(rest_vars)), carry)
        quot[j - 1] = bj
        carry = poly_scale(bj, root)
    remainder = poly_add(parts.get(0, poly_zero(rest_vars)), carry)
    if not poly_is_zero(remainder):
        return None
    varlist = q.vars
    out = poly_zero(varlist)
    vp = _var_poly(varlist, var)
    for j, cj in quot.items():
        out = poly_add(out, poly_mul(poly_pow(vp, j), _embed(cj, varlist)))
    return out


_F0 = Fraction(0)


def _grlex_key(exp: Tuple[int, ...]) -> Tuple[int, Tuple[int, ...]]:
    return (sum(exp), exp)


def _content_normalized(terms: Dict[Tuple[int, ...], Fraction]) -> None:
    """Scale coefficients in place to coprime integers, lowest term positive.

    Multiplying a generator by a nonzero constant leaves the generated
    ideal alone; keeping contents trimmed stops coefficient growth from
    compounding across elimination rounds.
    """
    if not terms:
        return
    num = 0
    den = 1
    for c in terms.values():
        num = math.gcd(num, c.numerator)
        den = den * c.denominator // math.gcd(den, c.denominator)
    low = min(terms, key=_grlex_key)
    scale = Fraction(den, num)
    if terms[low] < 0:
        scale = -scale
    if scale != 1:
        for m in terms:
            terms[m] *= scale


def _echelon_reduce_gens(gens: List[SparsePoly]) -> List[SparsePoly]:
    """Row-reduce the generators as vectors over their monomials.

    Invertible rational row operations keep the ideal; full reduction
    against graded-lex-lowest pivots cancels the shared tails that
    elimination substitutions pile up, which keeps later rounds cheap.
    """
    rows = [dict(g.terms) for g in gens if not poly_is_zero(g)]
    if not rows or sum(len(r) for r in rows) > 200_000:
        return gens
    vars_ = gens[0].vars

    def subtract(row: Dict, pivot_row: Dict, factor: Fraction) -> None:
        for m, pc in pivot_row.items():
            nv = row.get(m, _F0) - factor * pc
            if nv:
                row[m] = nv
            else:
                row.pop(m, None)

    pivots: List[Tuple[Tuple[int, ...], Dict]] = []
    for row in rows:
        for pm, prow in pivots:
            c = row.get(pm)
            if c:
                subtract(row, prow, c / prow[pm])
        if not row:
            continue
        _content_normalized(row)
        pivots.append((min(row, key=_grlex_key), row))
    for pm, prow in pivots:
        for pm2, row2 in pivots:
            if row2 is prow:
                continue
            c = row2.get(pm)
            if c:
                subtract(row2, prow, c / prow[pm])
    out: List[SparsePoly] = []
    for pm, row in pivots:
        if row:
            _content_normalized(row)
            out.append(make_poly(vars_, row))
    return out


def _eliminate_with(chart: _Chart, gi: int, var: str) -> None:
    """Apply the graph elimination of ``var`` using generator ``gi``.

    Caller guarantees gens[gi] = var*U + R with U a var-free unit.  Higher
    powers of var in the other generators are cleared through
    var*U = -R (mod g): a generator h = sum c_j var^j becomes
    sum c_j (-R)^j U^(k-j), which generates the same ideal up to the unit
    U^k.
    """
    gens = chart.gens
    assert gens is not None
    parts = _split_by_var(gens[gi], var)
    unit = parts[1]
    neg_rest = poly_scale(parts.get(0, poly_zero(unit.vars)), Fraction(-1))
    new_gens: List[SparsePoly] = []
    for hj, h in enumerate(gens):
        if hj == gi or poly_is_zero(h):
            continue
        hparts = _split_by_var(h, var)
        k = max(hparts)
        acc = poly_zero(unit.vars)
        for j, cj in hparts.items():
            acc = poly_add(
                acc,
                poly_mul(cj, poly_mul(poly_pow(neg_rest, j), poly_pow(unit, k - j))),
            )
        new_gens.append(acc)
    chart.shift += Fraction(1, 2)
    chart.path += f" elim({var})"
    for table in (chart.weights, chart.divisor, chart.sides, chart.fixed_range):
        table.pop(var, None)
    gens[:] = _echelon_reduce_gens(new_gens)


def _eliminator_ok(chart: _Chart, g: SparsePoly, var: str) -> bool:
    parts = _split_by_var(g, var)
    if max(parts) != 1:
        return False
    unit = parts[1]
    if not unit.terms.get(tuple([0] * len(unit.vars))):
        return False  # coefficient vanishes at the origin: no graph
    rest = parts.get(0, poly_zero(unit.vars))
    if chart.sides.get(var, TWO_SIDED) != TWO_SIDED and not poly_is_zero(rest):
        return False  # one-sided variable: the graph may leave the domain
    return True


def _find_eliminator(chart: _Chart, var: str) -> Optional[Tuple[int, SparsePoly]]:
    """Sparsest linear combination of generators usable to eliminate ``var``.

    A usable eliminator is degree one in var with a unit coefficient (and
    var-free part identically zero when var is one-sided).  Degree and
    one-sidedness are linear constraints on the combination weights, so
    candidates come from a null space; sparsity matters because the
    substitution multiplies the other generators by powers of the
    eliminator's coefficients, and a combination touching few variables
    keeps them eliminable in later rounds.  Variables are banned from the
    support greedily while the system stays solvable.  Returns (index to
    replace, combination), which spans the same ideal because the replaced
    generator enters with nonzero weight.
    """
    gens = chart.gens
    assert gens is not None
    monomials: List[Tuple[Tuple[str, int], ...]] = []
    seen = set()
    for g in gens:
        for e in g.terms:
            key = tuple(sorted((v, k) for v, k in zip(g.vars, e) if k))
            if key not in seen:
                seen.add(key)
                monomials.append(key)
    coef_rows: Dict[Tuple[Tuple[str, int], ...], List[Fraction]] = {}
    for key in monomials:
        want = dict(key)
        row = []
        for g in gens:
            if any(v not in g.vars for v in want):
                row.append(Fraction(0))
                continue
            exp = tuple(want.get(v, 0) for v in g.vars)
            row.append(g.terms.get(exp, Fraction(0)))
        coef_rows[key] = row

    one_sided = chart.sides.get(var, TWO_SIDED) != TWO_SIDED

    def solve(banned: set) -> Optional[Tuple[int, SparsePoly]]:
        rows = []
        for key in monomials:
            want = dict(key)
            vdeg = want.get(var, 0)
            if (
                vdeg >= 2
                or any(x in banned for x in want)
                or (one_sided and vdeg == 0)
            ):
                rows.append(coef_rows[key])
        if not rows:
            rows = [[Fraction(0)] * len(gens)]
        for weights_vec in nullspace_basis(rows):
            combo = poly_zero(())
            for w, g in zip(weights_vec, gens):
                if w:
                    combo = poly_add(combo, poly_scale(g, w))
            if poly_is_zero(combo) or var not in combo.vars:
                continue
            if not _eliminator_ok(chart, combo, var):
                continue
            replace = next(i for i, w in enumerate(weights_vec) if w)
            return replace, combo
        return None

    best = solve(set())
    if best is None:
        return None
    banned: set = set()
    others = sorted(
        {v for g in gens for v in _poly_vars_used(g) if v != var}
    )
    for x in others:
        trial = solve(banned | {x})
        if trial is not None:
            banned.add(x)
            best = trial
    return best


def _try_eliminations(chart: _Chart) -> None:
    """Remove variables cut out transversally by generators.

    When a generator reads g = v*U + R with U a unit, R free of v, v ranging
    over both signs (or R identically zero), and v carrying no volume
    weight, the zero set is locally the graph v = -R/U: integrating out v
    contributes exactly one half to lambda, and substituting the graph into
    the other generators preserves the generated ideal, hence the pole
    pair.  When no generator is linear in v, a rational recombination of
    generators that cancels the higher v-powers is tried first.
    """
    gens = chart.gens
    assert gens is not None
    changed = True
    while changed:
        changed = False
        candidates = sorted(
            {
                v
                for g in gens
                if not poly_is_zero(g)
                for v in _poly_vars_used(g)
                if not chart.weights.get(v, 0)
            }
        )
        for var in candidates:
            found = _find_eliminator(chart, var)
            if found is not None:
                replace, combo = found
                gens[replace] = combo
                _eliminate_with(chart, replace, var)
                changed = True
                break
    seen = set()
    cleaned = []
    for g in gens:
        if poly_is_zero(g):
            continue
        key = poly_render(g)
        if key in seen:
            continue
        seen.add(key)
        cleaned.append(g)
    gens[:] = cleaned


def _sparsify_basis(chart: _Chart) -> bool:
    """Re-basis the generator span so each element touches few variables.

    Substitution leaves generators that are mixtures of structurally
    distinct pieces; an invertible rational recombination (same span, same
    ideal) often splits them back apart, which the monomial-times-unit
    normalization needs.  Each new basis element minimizes its variable
    support greedily.  Returns False when the basis is left unchanged.
    """
    gens = [g for g in chart.gens or [] if not poly_is_zero(g)]
    if not gens or len(gens) > 24:
        return False
    monomials: List[Tuple[Tuple[str, int], ...]] = []
    seen = set()
    for g in gens:
        for e in g.terms:
            key = tuple(sorted((v, k) for v, k in zip(g.vars, e) if k))
            if key not in seen:
                seen.add(key)
                monomials.append(key)
    if len(monomials) > 2000:
        return False
    ncols = len(monomials)
    col_of = {key: c for c, key in enumerate(monomials)}
    col_vars = [frozenset(v for v, _ in key) for key in monomials]
    amat: List[List[Fraction]] = []
    for g in gens:
        row = [Fraction(0)] * ncols
        for e, c in g.terms.items():
            key = tuple(sorted((v, k) for v, k in zip(g.vars, e) if k))
            row[col_of[key]] = c
        amat.append(row)
    basis: List[List[Fraction]] = []
    for row in amat:
        r = list(row)
        for b in basis:
            piv = next(i for i, x in enumerate(b) if x)
            if r[piv]:
                f = r[piv] / b[piv]
                r = [x - f * y for x, y in zip(r, b)]
        if any(x for x in r):
            basis.append(r)
    d = len(basis)

    picked_ech: List[List[Fraction]] = []

    def independent(v: List[Fraction]) -> bool:
        r = list(v)
        for b in picked_ech:
            piv = next(i for i, x in enumerate(b) if x)
            if r[piv]:
                f = r[piv] / b[piv]
                r = [x - f * y for x, y in zip(r, b)]
        return any(x for x in r)

    def solve(banned: frozenset) -> Optional[List[Fraction]]:
        cols = [c for c in range(ncols) if col_vars[c] & banned]
        rows = [[basis[i][c] for i in range(d)] for c in cols]
        if not rows:
            rows = [[Fraction(0)] * d]
        for nu in nullspace_basis(rows):
            v = [
                sum((nu[i] * basis[i][c] for i in range(d)), Fraction(0))
                for c in range(ncols)
            ]
            if any(x for x in v) and independent(v):
                return v
        return None

    all_vars = sorted({v for g in gens for v in _poly_vars_used(g)})
    result: List[List[Fraction]] = []
    while len(result) < d:
        banned: frozenset = frozenset()
        best = solve(banned)
        if best is None:
            return False  # cannot happen with exact arithmetic, stay safe
        for x in all_vars:
            trial = solve(banned | {x})
            if trial is not None:
                banned = banned | {x}
                best = trial
        result.append(best)
        r = list(best)
        for b in picked_ech:
            piv = next(i for i, x in enumerate(b) if x)
            if r[piv]:
                f = r[piv] / b[piv]
                r = [x - f * y for x, y in zip(r, b)]
        picked_ech.append(r)
    new_gens: List[SparsePoly] = []
    for v in result:
        used = sorted({name for c in range(ncols) if v[c] for name in col_vars[c]})
        terms: Dict[Tuple[int, ...], Fraction] = {}
        for c in range(ncols):
            if v[c]:
                want = dict(monomials[c])
                terms[tuple(want.get(name, 0) for name in used)] = v[c]
        new_gens.append(make_poly(used, terms))
    before = sorted(poly_render(g) for g in gens)
    after = sorted(poly_render(g) for g in new_gens)
    if before == after:
        return False
    assert chart.gens is not None
    chart.gens[:] = new_gens
    return True


def _normalize_monomial_gens(
    chart: _Chart,
) -> Optional[Tuple[List[Tuple[int, ...]], List[str]]]:
    """Squared support when every generator is monomial-times-unit.

    The generated ideal ignores unit factors, so each such generator may be
    replaced by its monomial part.  A generator that does not factor this
    way is still redundant when each of its terms is divisible by one of
    the collected monomials (membership in a monomial ideal is term-wise):
    dropping it keeps the ideal.  Returns None when some generator neither
    factors nor reduces away.
    """
    gens = chart.gens
    assert gens is not None
    all_vars = sorted({v for g in gens for v in _poly_vars_used(g)})
    fixed = {v: f for v, f in chart.fixed_range.items() if f}
    monomials: List[Dict[str, int]] = []
    leftovers: List[SparsePoly] = []
    for g in gens:
        used = _poly_vars_used(g)
        if not used:
            continue  # unit generator, caller bails out before this matters
        restricted = _restrict_vars(g, used)
        a, q = _monomial_factor(restricted)
        if _certify_unit(q, fixed, chart.sides):
            monomials.append(dict(zip(used, a)))
        else:
            leftovers.append(g)
    for g in leftovers:
        for e, _ in g.terms.items():
            term = dict(zip(g.vars, e))
            if not any(
                all(term.get(v, 0) >= k for v, k in mono.items()) for mono in monomials
            ):
                return None
    support = [
        tuple(2 * mono.get(v, 0) for v in all_vars) for mono in monomials
    ]
    return support, all_vars


def _blowup_children(chart: _Chart, occ: Sequence[str], event: int) -> List[_Chart]:
    # ``occ`` is the blow-up center: the coordinate subspace on which the
    # non-monomial cofactor is singular, never the whole ambient space
    varlist = chart.p.vars
    children: List[_Chart] = []
    for lead in occ:
        lead_poly = _var_poly(varlist, lead)
        sub = {v: poly_mul(lead_poly, _var_poly(varlist, v)) for v in occ if v != lead}
        weights = dict(chart.weights)
        divisor = dict(chart.divisor)
        sides = dict(chart.sides)
        fixed = dict(chart.fixed_range)
        weights[lead] = sum(chart.weights.get(v, 0) for v in occ) + len(occ) - 1
        divisor[lead] = f"E{event}"
        for v in occ:
            if v == lead:
                continue
            # a direction coordinate keeps its divisor identity, but its
            # sign can flip through the lead variable
            if (
                sides.get(v, TWO_SIDED) == ONE_SIDED
                and sides.get(lead, TWO_SIDED) == ONE_SIDED
            ):
                sides[v] = ONE_SIDED
            else:
                sides[v] = TWO_SIDED
            fixed[v] = True
        children.append(
            _Chart(
                poly_subst(chart.p, sub),
                None,
                weights,
                divisor,
                sides,
                fixed,
                chart.depth + 1,
                chart.shift,
                chart.path + f" blow({lead})",
            )
        )
    return children


def _recenter(chart: _Chart, var: str, root: Fraction, event: int) -> _Chart:
    varlist = chart.p.vars
    shifted = poly_add(
        _var_poly(varlist, var),
        make_poly(varlist, {tuple([0] * len(varlist)): root}),
    )
    new_p = poly_subst(chart.p, {var: shifted})
    weights = dict(chart.weights)
    divisor = dict(chart.divisor)
    sides = dict(chart.sides)
    fixed = dict(chart.fixed_range)
    # around an interior point of the old range the variable becomes an
    # ordinary local coordinate: two-sided, shrinkable, its own hypersurface,
    # and any previous volume weight is a unit there
    sides[var] = TWO_SIDED
    fixed[var] = False
    divisor[var] = f"S{event}:{var}"
    weights[var] = 0
    return _Chart(
        new_p,
        None,
        weights,
        divisor,
        sides,
        fixed,
        chart.depth,  # recentering refines a chart, it does not deepen the tower
        chart.shift,
        chart.path + f" shift({var},{root})",
    )


def blowup_pole(
    p: SparsePoly,
    max_depth: int = DEFAULT_MAX_DEPTH,
    chart_cap: int = DEFAULT_CHART_CAP,
    gens: Optional[Sequence[SparsePoly]] = None,
    sides: Optional[Mapping[str, str]] = None,
) -> PoleResult:
    """Pole via bounded blow-ups, graph eliminations, and recentering.

    Works on the expanded polynomial, or on explicit sum-of-squares
    generators when the caller knows them (the generated ideal determines
    the pole pair, which licenses generator-level simplification).  Every
    chart either terminates in monomial-times-unit form, is recentered at
    discovered zeros of its unit candidate, or is blown up again at the
    origin; exhausting the depth or chart budget yields an unresolved
    result carrying the best bound found, never a guess.
    """
    if gens is not None:
        gens = [g for g in gens if not poly_is_zero(g)]
        if p is None:
            if not gens:
                return PoleResult(
                    None, None, "unresolved",
                    {"reason": "zero or nonvanishing at origin"},
                )
            p = poly_zero(gens[0].vars)
        degenerate_input = not gens or any(
            g.terms.get(tuple([0] * len(g.vars))) for g in gens
        )
    else:
        degenerate_input = poly_is_zero(p) or bool(
            p.terms.get(tuple([0] * len(p.vars)))
        )
    if degenerate_input:
        return PoleResult(
            None, None, "unresolved", {"reason": "zero or nonvanishing at origin"}
        )
    base_sides = {v: TWO_SIDED for v in p.vars}
    if sides:
        base_sides.update(sides)
    root_chart = _Chart(
        p,
        None if gens is None else list(gens),
        {v: 0 for v in p.vars},
        {v: f"w:{v}" for v in p.vars},
        base_sides,
        {v: False for v in p.vars},
        0,
        Fraction(0),
        "origin",
    )
    queue: List[_Chart] = [root_chart]
    outcomes: List[_ChartOutcome] = []
    divisor_pole: Dict[str, Fraction] = {}
    events = 0
    charts_seen = 0
    incomplete: List[str] = []

    def record(names: Sequence[str], lam: Fraction, shift: Fraction) -> None:
        for name in names:
            total = lam + shift
            if name in divisor_pole and divisor_pole[name] != total:
                incomplete.append(f"divisor {name} pole mismatch")
            divisor_pole[name] = total

    while queue:
        chart = queue.pop(0)
        charts_seen += 1
        if charts_seen > chart_cap:
            incomplete.append("chart budget exhausted")
            break

        fixed_now = {v: f for v, f in chart.fixed_range.items() if f}

        if chart.gens is not None:
            handled = False
            for attempt in range(3):
                _try_eliminations(chart)
                if any(not _poly_vars_used(g) for g in chart.gens):
                    handled = True  # a nonzero constant generator: nothing vanishes
                    break
                if not chart.gens:
                    # the zero set was a transversally cut graph: poles banked
                    outcomes.append(
                        _ChartOutcome(chart.shift, 1, [], chart.path + " graph")
                    )
                    handled = True
                    break
                normalized = _normalize_monomial_gens(chart)
                if normalized is not None:
                    support, mono_vars = normalized
                    weights = [chart.weights.get(v, 0) for v in mono_vars]
                    lam, mult, _ = _diagonal_face(support, weights)
                    achieved = [
                        chart.divisor.get(v, f"w:{v}")
                        for i, v in enumerate(mono_vars)
                        if min(s[i] for s in support) > 0
                        and Fraction(weights[i] + 1, min(s[i] for s in support)) == lam
                    ]
                    record(achieved, lam, chart.shift)
                    outcomes.append(
                        _ChartOutcome(
                            chart.shift + lam, mult, achieved, chart.path + " corner"
                        )
                    )
                    handled = True
                    break
                if not _sparsify_basis(chart):
                    break  # basis is stable: no further generator-level progress
            if handled:
                continue
            # generators stopped simplifying: fall back to the expanded sum
            expanded = poly_zero(chart.p.vars)
            for g in chart.gens:
                expanded = poly_add(expanded, _embed(poly_mul(g, g), chart.p.vars))
            chart.p = expanded
            chart.gens = None

        a, q = _monomial_factor(chart.p)
        if _certify_unit(q, fixed_now, chart.sides):
            lam_by_var = {
                v: Fraction(chart.weights.get(v, 0) + 1, e)
                for v, e in zip(chart.p.vars, a)
                if e
            }
            if not lam_by_var:
                incomplete.append(f"unit without vanishing at {chart.path}")
                continue
            lam = min(lam_by_var.values())
            achieved = [
                chart.divisor.get(v, f"w:{v}")
                for v, value in lam_by_var.items()
                if value == lam
            ]
            record(achieved, lam, chart.shift)
            outcomes.append(
                _ChartOutcome(chart.shift + lam, len(achieved), achieved, chart.path + " unit")
            )
            continue

        # chase zeros of the unit candidate sitting away from the origin on
        # fixed-range axes; exact division certifies they are all accounted for
        residue = q
        found: List[Tuple[str, Fraction]] = []
        for var in chart.p.vars:
            if not chart.fixed_range.get(var, False):
                continue
            for r in _axis_rational_roots(residue, var):
                if chart.sides.get(var, TWO_SIDED) == ONE_SIDED and r < 0:
                    continue
                divided = False
                quotient = _divide_linear(residue, var, r)
                while quotient is not None:
                    residue = quotient
                    divided = True
                    quotient = _divide_linear(residue, var, r)
                if divided:
                    found.append((var, r))
        for var, r in found:
            queue.append(_recenter(chart, var, r, events))
            events += 1

        if q.terms.get(tuple([0] * len(q.vars))):
            # the origin side is already monomial-times-unit; poles from the
            # divided-out hyperplanes come from the recentered charts
            lam_by_var = {
                v: Fraction(chart.weights.get(v, 0) + 1, e)
                for v, e in zip(chart.p.vars, a)
                if e
            }
            if lam_by_var:
                lam = min(lam_by_var.values())
                achieved = [
                    chart.divisor.get(v, f"w:{v}")
                    for v, value in lam_by_var.items()
                    if value == lam
                ]
                record(achieved, lam, chart.shift)
                outcomes.append(
                    _ChartOutcome(
                        chart.shift + lam,
                        len(achieved),
                        achieved,
                        chart.path + " unit-off-axis",
                    )
                )
            if not _certify_unit(residue, fixed_now, chart.sides):
                incomplete.append(f"unlocated zeros at {chart.path}")
            continue

        if chart.depth >= max_depth:
            incomplete.append(f"depth cap at {chart.path}")
            continue
        center = _poly_vars_used(q)
        if len(center) < 2:
            incomplete.append(f"degenerate center at {chart.path}")
            continue
        queue.extend(_blowup_children(chart, center, events))
        events += 1

    if not outcomes:
        return PoleResult(
            None,
            None,
            "unresolved",
            {"reason": "; ".join(sorted(set(incomplete))) or "no terminal chart"},
        )
    best = min(o.lam for o in outcomes)
    mult = max(o.mult for o in outcomes if o.lam == best)
    witness = next(o for o in outcomes if o.lam == best and o.mult == mult)
    cert: Dict[str, object] = {
        "charts": len(outcomes),
        "witness_chart": witness.path,
        "divisor_poles": {k: str(-v) for k, v in sorted(divisor_pole.items())},
    }
    if incomplete:
        # unexplored regions may hide a still-larger pole, so only a bound
        # survives: the true lambda is at most the best value seen
        cert["reason"] = "; ".join(sorted(set(incomplete)))
        cert["partial_lambda_upper_bound"] = str(best)
        return PoleResult(None, None, "unresolved", cert)
    return PoleResult(-best, mult, "blowup", cert)


# ---------------------------------------------------------------------------
# numeric oracle


def numeric_lambda_oracle(
    p: Optional[SparsePoly],
    n_grid: Optional[Sequence[int]] = None,
    samples: int = 1 << 18,
    seed: int = 0,
    box: Optional[Sequence[Tuple[float, float]]] = None,
    gens: Optional[Sequence[SparsePoly]] = None,
) -> Dict[str, object]:
    """Estimate (lambda, m) from quasi-Monte-Carlo decay measurements.

    Computes I(N) = integral of exp(-N p) over the unit box (or a supplied
    box) with one shared scrambled-Sobol sample, then least-squares fits
    ln I(N) = c - lambda ln N + (m - 1) ln ln N.  Returns point estimates
    with standard errors; this is validation hardware, never an exact
    answer.
    """
    import numpy as np
    from scipy.stats import qmc

    if p is None and not gens:
        raise ValueError("either a polynomial or generators are required")
    if n_grid is None:
        n_grid = [1 << k for k in range(10, 21)]
    d = len(p.vars) if p is not None else len(gens[0].vars)
    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    u = sampler.random(samples)
    volume = 1.0
    if box is not None:
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        u = lo + u * (hi - lo)
        volume = float(np.prod(hi - lo))
    cols = u.T

    def evaluate(poly: SparsePoly) -> "np.ndarray":
        out = np.zeros(samples)
        for exps, coef in poly.terms.items():
            term = np.full(samples, float(coef))
            for i, e in enumerate(exps):
                if e:
                    term = term * cols[i] ** e
            out += term
        return out

    if p is not None:
        values = evaluate(p)
    else:
        values = np.zeros(samples)
        for g in gens:
            gv = evaluate(g)
            values += gv * gv
    if (values < -1e-12).any():
        raise ValueError("polynomial is negative on the sampled box")
    values = np.maximum(values, 0.0)
    logs = []
    for n in n_grid:
        mean = float(np.exp(-n * values).mean()) * volume
        if mean <= 0.0:
            raise ValueError("integral underflowed; shrink the N grid")
        logs.append(math.log(mean))
    ln_n = np.log(np.array(n_grid, dtype=float))
    design = np.column_stack([np.ones_like(ln_n), -ln_n, np.log(ln_n)])
    y = np.array(logs)
    coef, residuals, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise ValueError("degenerate fit: widen the N grid")
    dof = max(len(n_grid) - 3, 1)
    rss = (
        float(residuals[0])
        if len(residuals)
        else float(((design @ coef - y) ** 2).sum())
    )
    cov = np.linalg.inv(design.T @ design) * (rss / dof)
    stderr = np.sqrt(np.diag(cov))
    return {
        "lambda": float(coef[1]),
        "m": float(coef[2]) + 1.0,
        "stderr_lambda": float(stderr[1]),
        "stderr_m": float(stderr[2]),
        "n_grid": list(n_grid),
        "log_integrals": logs,
        "samples": samples,
    }


# ---------------------------------------------------------------------------
# cache and dispatch


def canonical_key(p: SparsePoly) -> str:
    """Cache key: variables renamed by first occurrence, graded-lex terms."""
    used = [v for i, v in enumerate(p.vars) if any(e[i] for e in p.terms)]
    renamed = _restrict_vars(p, used) if used else p
    q = make_poly(tuple(f"x{i}" for i in range(len(renamed.vars))), dict(renamed.terms))
    return poly_render(q)


class RlctCache:
    """Memoises pole results; optionally persisted as a JSON key-value file.

    Writes take a lock and rewrite the file atomically after merging what
    is already on disk, so concurrent processes lose no entries.
    """

    def __init__(self, path: Optional[str] = None) -> None:
        self.path = path
        self._lock = threading.Lock()
        self._memory: Dict[str, Tuple[str, int, str]] = {}
        if path and os.path.exists(path):
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    raw = json.load(fh)
                for k, v in raw.items():
                    self._memory[k] = (v["pole"], int(v["multiplicity"]), v["method"])
            except (OSError, ValueError, KeyError, TypeError):
                pass

    def get(self, key: str) -> Optional[PoleResult]:
        hit = self._memory.get(key)
        if hit is None:
            return None
        pole, mult, method = hit
        return PoleResult(Fraction(pole), mult, method, {"cache_hit": True})

    def put(self, key: str, result: PoleResult) -> None:
        if result.pole is None:
            return
        with self._lock:
            self._memory[key] = (
                str(result.pole),
                int(result.multiplicity or 1),
                result.method,
            )
            if not self.path:
                return
            merged = dict(self._memory)
            if os.path.exists(self.path):
                try:
                    with open(self.path, "r", encoding="utf-8") as fh:
                        for k, v in json.load(fh).items():
                            merged.setdefault(
                                k, (v["pole"], int(v["multiplicity"]), v["method"])
                            )
                except (OSError, ValueError, KeyError, TypeError):
                    pass
            tmp = self.path + ".tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        k: {"pole": pole, "multiplicity": mult, "method": method}
                        for k, (pole, mult, method) in sorted(merged.items())
                    },
                    fh,
                )
            os.replace(tmp, self.path)


_default_cache = RlctCache(os.environ.get("BNASYM_CACHE") or None)


def rlct(
    p: Optional[SparsePoly],
    method: str = "auto",
    max_blowup_depth: int = DEFAULT_MAX_DEPTH,
    chart_cap: int = DEFAULT_CHART_CAP,
    cache: Optional[RlctCache] = None,
    oracle: bool = False,
    oracle_seed: int = 0,
    gens: Optional[Sequence[SparsePoly]] = None,
    sides: Optional[Mapping[str, str]] = None,
) -> PoleResult:
    """Dispatch: monomial formula, then Newton region, then blow-ups.

    Results are memoised under the canonical rendering of p.  When the
    exact engines give up and ``oracle`` is set, the unresolved result
    carries the numeric estimate in its certificate.  ``p`` may be None
    when ``gens`` is supplied; the expanded sum of squares is then never
    materialised, which matters once the generators get large.
    """
    if p is None and not gens:
        raise ValueError("either a polynomial or generators are required")
    if cache is None:
        cache = _default_cache
    use_cache = method == "auto" and gens is None
    if use_cache:
        key = canonical_key(p)
        hit = cache.get(key)
        if hit is not None:
            return hit

    result: Optional[PoleResult] = None
    if method in ("auto", "monomial") and gens is None:
        if len(p.terms) == 1:
            ((exps, coefficient),) = p.terms.items()
            active = [e for e in exps if e]
            if active and coefficient > 0 and all(e % 2 == 0 for e in active):
                result = monomial_pole(active)
        if method == "monomial" and result is None:
            result = PoleResult(
                None, None, "unresolved", {"reason": "not a positive even monomial"}
            )
    if result is None and method in ("auto", "newton") and gens is None:
        candidate = newton_pole(p)
        if candidate.resolved or method == "newton":
            result = candidate
    if result is None or (method == "auto" and not result.resolved):
        blown = blowup_pole(
            p,
            max_depth=max_blowup_depth,
            chart_cap=chart_cap,
            gens=gens,
            sides=sides,
        )
        if result is None or blown.resolved:
            result = blown

    if result.resolved:
        n_vars = len(p.vars) if p is not None else len(gens[0].vars)
        _check_sos_bound(result, n_vars)
        if use_cache:
            cache.put(key, result)
    elif oracle:
        cert = dict(result.certificate)
        try:
            cert["oracle"] = numeric_lambda_oracle(p, seed=oracle_seed, gens=gens)
        except ValueError as exc:
            cert["oracle_error"] = str(exc)
        result = PoleResult(None, None, "unresolved", cert)
    return result
