"""Exact rational arithmetic: sparse polynomials and fraction-free linear algebra.

Coefficients are `fractions.Fraction` throughout.  A polynomial carries an
ordered variable tuple and a mapping from exponent tuples to nonzero
coefficients.  Terms are ordered graded-lexicographically (total degree
first, then the exponent tuple), which fixes a canonical text form used for
serialization and cache keys.

Matrix rank is computed over the rationals by fraction-free elimination:
rows are scaled to integers and inserted incrementally into a row-echelon
basis using cross-multiplication, with gcd content removal keeping entries
small.  No floating point is involved anywhere in this module.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

try:
    from gmpy2 import gcd as _gcd
    from gmpy2 import mpz as _mpz
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _gcd = math.gcd
    _mpz = int

Rational = Fraction

Exponents = Tuple[int, ...]
TermMap = Dict[Exponents, Fraction]

_VAR_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<var>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*^]))"
)


# ---------------------------------------------------------------------------
# sparse polynomials


@dataclass(frozen=True)
class SparsePoly:
    """Multivariate polynomial over Q.

    ``vars`` is the ordered variable tuple; ``terms`` maps exponent tuples
    (one entry per variable) to nonzero Fraction coefficients.  Instances
    are treated as immutable; use the module functions to combine them.
    """

    vars: Tuple[str, ...]
    terms: TermMap

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparsePoly):
            return NotImplemented
        if self.vars == other.vars:
            return self.terms == other.terms
        a, b = poly_align(self, other)
        return a.terms == b.terms

    def __hash__(self) -> int:
        return hash(poly_render(self))


def make_poly(variables: Sequence[str], terms: Mapping[Exponents, Fraction]) -> SparsePoly:
    """Validated constructor: drops zero coefficients, checks arity."""
    vs = tuple(variables)
    if len(set(vs)) != len(vs):
        raise ValueError(f"duplicate variable in {vs!r}")
    clean: TermMap = {}
    for exp, coeff in terms.items():
        if len(exp) != len(vs):
            raise ValueError(f"exponent tuple {exp!r} does not match variables {vs!r}")
        if any(e < 0 for e in exp):
            raise ValueError(f"negative exponent in {exp!r}")
        c = Fraction(coeff)
        if c != 0:
            clean[tuple(int(e) for e in exp)] = c
    return SparsePoly(vs, clean)


def poly_zero(variables: Sequence[str] = ()) -> SparsePoly:
    return SparsePoly(tuple(variables), {})


def poly_const(variables: Sequence[str], value: Fraction | int) -> SparsePoly:
    c = Fraction(value)
    if c == 0:
        return poly_zero(variables)
    return SparsePoly(tuple(variables), {(0,) * len(tuple(variables)): c})


def poly_var(variables: Sequence[str], name: str) -> SparsePoly:
    vs = tuple(variables)
    idx = vs.index(name)
    exp = tuple(1 if i == idx else 0 for i in range(len(vs)))
    return SparsePoly(vs, {exp: Fraction(1)})


def poly_is_zero(p: SparsePoly) -> bool:
    return not p.terms


def poly_total_degree(p: SparsePoly) -> int:
    """Total degree; -1 for the zero polynomial."""
    if not p.terms:
        return -1
    return max(sum(e) for e in p.terms)


def poly_align(p: SparsePoly, q: SparsePoly) -> Tuple[SparsePoly, SparsePoly]:
    """Rewrite both polynomials over the union variable tuple.

    Union order: p's variables first, then q's new ones in q's order.
    """
    if p.vars == q.vars:
        return p, q
    merged = list(p.vars) + [v for v in q.vars if v not in p.vars]
    return _reindex(p, tuple(merged)), _reindex(q, tuple(merged))


def _reindex(p: SparsePoly, variables: Tuple[str, ...]) -> SparsePoly:
    if p.vars == variables:
        return p
    pos = {v: i for i, v in enumerate(variables)}
    idx = [pos[v] for v in p.vars]
    n = len(variables)
    terms: TermMap = {}
    for exp, coeff in p.terms.items():
        new = [0] * n
        for i, e in zip(idx, exp):
            new[i] = e
        terms[tuple(new)] = coeff
    return SparsePoly(variables, terms)


def poly_add(p: SparsePoly, q: SparsePoly) -> SparsePoly:
    a, b = poly_align(p, q)
    terms = dict(a.terms)
    for exp, coeff in b.terms.items():
        s = terms.get(exp, Fraction(0)) + coeff
        if s == 0:
            terms.pop(exp, None)
        else:
            terms[exp] = s
    return SparsePoly(a.vars, terms)


def poly_neg(p: SparsePoly) -> SparsePoly:
    return SparsePoly(p.vars, {e: -c for e, c in p.terms.items()})


def poly_sub(p: SparsePoly, q: SparsePoly) -> SparsePoly:
    return poly_add(p, poly_neg(q))


def poly_scale(p: SparsePoly, factor: Fraction | int) -> SparsePoly:
    f = Fraction(factor)
    if f == 0:
        return poly_zero(p.vars)
    return SparsePoly(p.vars, {e: c * f for e, c in p.terms.items()})


def poly_mul(p: SparsePoly, q: SparsePoly) -> SparsePoly:
    a, b = poly_align(p, q)
    terms: TermMap = {}
    for e1, c1 in a.terms.items():
        for e2, c2 in b.terms.items():
            exp = tuple(x + y for x, y in zip(e1, e2))
            s = terms.get(exp, Fraction(0)) + c1 * c2
            if s == 0:
                terms.pop(exp, None)
            else:
                terms[exp] = s
    return SparsePoly(a.vars, terms)


def poly_pow(p: SparsePoly, n: int) -> SparsePoly:
    if n < 0:
        raise ValueError("negative power of a polynomial")
    result = poly_const(p.vars, 1)
    base = p
    while n:
        if n & 1:
            result = poly_mul(result, base)
        base = poly_mul(base, base) if n > 1 else base
        n >>= 1
    return result


def poly_eval(p: SparsePoly, point: Mapping[str, Fraction]) -> Fraction:
    """Evaluate at a rational point; every variable must be present."""
    missing = [v for v in p.vars if v not in point]
    if missing:
        raise ValueError(f"point missing variables {missing}")
    vals = [Fraction(point[v]) for v in p.vars]
    total = Fraction(0)
    for exp, coeff in p.terms.items():
        acc = coeff
        for v, e in zip(vals, exp):
            if e:
                acc *= v**e
        total += acc
    return total


def poly_partial(p: SparsePoly, var: str) -> SparsePoly:
    """Exact partial derivative with respect to one variable."""
    if var not in p.vars:
        return poly_zero(p.vars)
    i = p.vars.index(var)
    terms: TermMap = {}
    for exp, coeff in p.terms.items():
        e = exp[i]
        if e == 0:
            continue
        new = exp[:i] + (e - 1,) + exp[i + 1 :]
        terms[new] = terms.get(new, Fraction(0)) + coeff * e
    return SparsePoly(p.vars, {e: c for e, c in terms.items() if c != 0})


def poly_subst(p: SparsePoly, replacements: Mapping[str, SparsePoly]) -> SparsePoly:
    """Substitute polynomials for variables (full composition).

    Variables not mentioned in ``replacements`` are kept as themselves.
    """
    target_vars: List[str] = []
    for v in p.vars:
        if v in replacements:
            for w in replacements[v].vars:
                if w not in target_vars:
                    target_vars.append(w)
        elif v not in target_vars:
            target_vars.append(v)
    base: Dict[str, SparsePoly] = {}
    for v in p.vars:
        if v in replacements:
            base[v] = _reindex_insert(replacements[v], target_vars)
        else:
            base[v] = _reindex_insert(poly_var((v,), v), target_vars)
    result = poly_zero(tuple(target_vars))
    # cache powers per variable to avoid repeated squaring work
    pow_cache: Dict[Tuple[str, int], SparsePoly] = {}

    def power(v: str, e: int) -> SparsePoly:
        key = (v, e)
        if key not in pow_cache:
            pow_cache[key] = poly_pow(base[v], e)
        return pow_cache[key]

    for exp, coeff in p.terms.items():
        term = poly_const(tuple(target_vars), coeff)
        for v, e in zip(p.vars, exp):
            if e:
                term = poly_mul(term, power(v, e))
        result = poly_add(result, term)
    return result


def _reindex_insert(p: SparsePoly, target_vars: List[str]) -> SparsePoly:
    for v in p.vars:
        if v not in target_vars:
            target_vars.append(v)
    return _reindex(p, tuple(target_vars))


def _term_key(exp: Exponents) -> Tuple[int, Exponents]:
    return (sum(exp), exp)


def poly_render(p: SparsePoly) -> str:
    """Canonical text form under the graded-lexicographic term order."""
    if not p.terms:
        return "0"
    parts: List[str] = []
    for exp in sorted(p.terms, key=_term_key):
        coeff = p.terms[exp]
        factors: List[str] = []
        for v, e in zip(p.vars, exp):
            if e == 1:
                factors.append(v)
            elif e > 1:
                factors.append(f"{v}^{e}")
        mag = abs(coeff)
        if not factors or mag != 1:
            factors.insert(0, str(mag))
        body = "*".join(factors)
        if not parts:
            parts.append(body if coeff > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if coeff > 0 else f"- {body}")
    return " ".join(parts)


def poly_parse(text: str, variables: Optional[Sequence[str]] = None) -> SparsePoly:
    """Parse the polynomial text grammar.

    Terms are joined by ``+``/``-``; a term is ``*``-joined factors, each an
    integer or ``a/b`` rational coefficient or ``var`` / ``var^exp``.  When
    ``variables`` is omitted the variable tuple is inferred in order of
    first appearance.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ValueError("empty polynomial text")
    terms: List[Tuple[Fraction, Dict[str, int]]] = []
    i = 0
    sign = 1
    if tokens[i] == ("op", "+") or tokens[i] == ("op", "-"):
        sign = -1 if tokens[i][1] == "-" else 1
        i += 1
    while True:
        coeff, powers, i = _parse_term(tokens, i, text)
        terms.append((sign * coeff, powers))
        if i == len(tokens):
            break
        kind, val = tokens[i]
        if kind != "op" or val not in "+-":
            raise ValueError(f"expected '+' or '-' at token {val!r} in {text!r}")
        sign = -1 if val == "-" else 1
        i += 1
        if i == len(tokens):
            raise ValueError(f"dangling {val!r} at end of {text!r}")
    if variables is None:
        seen: List[str] = []
        for _, powers in terms:
            for v in powers:
                if v not in seen:
                    seen.append(v)
        vs = tuple(seen)
    else:
        vs = tuple(variables)
        for _, powers in terms:
            for v in powers:
                if v not in vs:
                    raise ValueError(f"unknown variable {v!r} in {text!r}")
    out: TermMap = {}
    for coeff, powers in terms:
        exp = tuple(powers.get(v, 0) for v in vs)
        s = out.get(exp, Fraction(0)) + coeff
        if s == 0:
            out.pop(exp, None)
        else:
            out[exp] = s
    return SparsePoly(vs, out)


def _tokenize(text: str) -> List[Tuple[str, str]]:
    tokens: List[Tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip():
                raise ValueError(f"bad character {text[pos:].strip()[0]!r} in {text!r}")
            break
        pos = m.end()
        for kind in ("num", "var", "op"):
            val = m.group(kind)
            if val is not None:
                tokens.append((kind, val))
                break
    return tokens


def _parse_term(
    tokens: List[Tuple[str, str]], i: int, text: str
) -> Tuple[Fraction, Dict[str, int], int]:
    coeff = Fraction(1)
    powers: Dict[str, int] = {}
    expect_factor = True
    while i < len(tokens):
        kind, val = tokens[i]
        if not expect_factor:
            if kind == "op" and val in "+-":
                break
            if kind == "op" and val == "*":
                i += 1
                expect_factor = True
                continue
            raise ValueError(f"missing '*' before {val!r} in {text!r}")
        if kind == "num":
            coeff *= Fraction(val)
            i += 1
        elif kind == "var":
            exp = 1
            if i + 1 < len(tokens) and tokens[i + 1] == ("op", "^"):
                if i + 2 >= len(tokens):
                    raise ValueError(f"dangling '^' in {text!r}")
                nkind, nval = tokens[i + 2]
                if nkind != "num" or "/" in nval:
                    raise ValueError(f"bad exponent after {val!r} in {text!r}")
                exp = int(nval)
                i += 3
            else:
                i += 1
            powers[val] = powers.get(val, 0) + exp
        else:
            raise ValueError(f"unexpected {val!r} in {text!r}")
        expect_factor = False
    if expect_factor:
        raise ValueError(f"incomplete term in {text!r}")
    return coeff, powers, i


# ---------------------------------------------------------------------------
# exact matrices


@dataclass(frozen=True)
class RationalMatrix:
    nrows: int
    ncols: int
    rows: Tuple[Tuple[Fraction, ...], ...]


def mat_from_rows(rows: Sequence[Sequence[Fraction | int]]) -> RationalMatrix:
    tup = tuple(tuple(Fraction(x) for x in row) for row in rows)
    if tup and any(len(r) != len(tup[0]) for r in tup):
        raise ValueError("ragged rows")
    return RationalMatrix(len(tup), len(tup[0]) if tup else 0, tup)


def mat_transpose(m: RationalMatrix) -> RationalMatrix:
    return RationalMatrix(
        m.ncols, m.nrows, tuple(zip(*m.rows)) if m.rows else ()
    )


def _row_to_ints(row: Sequence[Fraction]) -> List:
    """Scale a rational row to coprime integers (rank-preserving)."""
    den = 1
    for x in row:
        d = x.denominator
        den = den * d // math.gcd(den, d)
    ints = [x.numerator * (den // x.denominator) for x in row]
    g = 0
    for v in ints:
        g = math.gcd(g, v)
        if g == 1:
            break
    if g > 1:
        ints = [v // g for v in ints]
    return [_mpz(v) for v in ints]


_CONTENT_BITS = 1 << 12  # strip gcd content once entries pass this bit size


class _Echelon:
    """Incremental fraction-free row-echelon basis over the integers."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.pivots: Dict[int, List] = {}  # leading column -> integer row
        self.rank = 0

    def _strip_content(self, row: List) -> List:
        g = _mpz(0)
        for v in row:
            if v:
                g = _gcd(g, v)
                if g == 1:
                    return row
        if g > 1:
            row = [v // g for v in row]
        return row

    def insert(self, row: Sequence[Fraction]) -> bool:
        """Reduce a rational row against the basis; True if rank grew."""
        return self.insert_ints(_row_to_ints(row))

    def insert_ints(self, work: List) -> bool:
        ncols = self.ncols
        pivots = self.pivots
        lead = -1
        while True:
            lead = -1
            for c in range(ncols):
                if work[c]:
                    lead = c
                    break
            if lead < 0:
                return False
            piv = pivots.get(lead)
            if piv is None:
                break
            a, b = piv[lead], work[lead]
            g = _gcd(a, b)
            if g > 1:
                a, b = a // g, b // g
            work = [a * w - b * p for w, p in zip(work, piv)]
            if any(w.bit_length() > _CONTENT_BITS for w in work):
                work = self._strip_content(work)
        work = self._strip_content(work)
        if work[lead] < 0:
            work = [-w for w in work]
        pivots[lead] = work
        self.rank += 1
        return True


def exact_rank(m: RationalMatrix, stop_at: Optional[int] = None) -> int:
    """Rank over Q by fraction-free elimination.

    ``stop_at`` allows early exit once the rank provably cannot grow
    further (for example when it reaches min(nrows, ncols), or a known
    structural bound); the result is then ``stop_at``.
    """
    ech = _Echelon(m.ncols)
    bound = min(m.nrows, m.ncols)
    if stop_at is not None:
        bound = min(bound, stop_at)
    for row in m.rows:
        ech.insert(row)
        if ech.rank >= bound:
            break
    return ech.rank


_RANK_PRIMES = (999983, 999979, 999961, 983063)


def modular_rank(m: RationalMatrix, prime: int, stop_at: Optional[int] = None) -> int:
    """Rank of the matrix reduced mod a prime; lower bound on the Q-rank.

    Raises ZeroDivisionError if some entry's denominator vanishes mod the
    prime; callers switch primes.  Vectorized elimination, int64-safe for
    primes below 2**20.
    """
    import numpy as np

    if prime >= 1 << 20:
        raise ValueError("prime too large for int64-safe elimination")
    nrows, ncols = m.nrows, m.ncols
    if nrows == 0 or ncols == 0:
        return 0
    inv_cache: Dict[int, int] = {}
    a = np.empty((nrows, ncols), dtype=np.int64)
    for i, row in enumerate(m.rows):
        for j, x in enumerate(row):
            den = x.denominator % prime
            if den == 0:
                raise ZeroDivisionError("denominator divisible by prime")
            inv = inv_cache.get(den)
            if inv is None:
                inv = pow(den, -1, prime)
                inv_cache[den] = inv
            a[i, j] = (x.numerator % prime) * inv % prime
    bound = min(nrows, ncols)
    if stop_at is not None:
        bound = min(bound, stop_at)
    r = 0
    for c in range(ncols):
        col = a[r:, c]
        nz = np.nonzero(col)[0]
        if nz.size == 0:
            continue
        pr = r + int(nz[0])
        if pr != r:
            a[[r, pr]] = a[[pr, r]]
        inv = pow(int(a[r, c]), -1, prime)
        a[r, c:] = (a[r, c:] * inv) % prime
        below = a[r + 1 :, c]
        mask = below != 0
        if mask.any():
            block = a[r + 1 :, c:]
            block[mask] = (block[mask] - below[mask, None] * a[r, c:]) % prime
        r += 1
        if r >= bound:
            break
    return r


def certified_rank(m: RationalMatrix, cap: Optional[int] = None) -> int:
    """Exact rank with a fast certified path for full-rank matrices.

    A rank computed mod a prime never exceeds the rational rank, so when it
    reaches ``cap`` (a proven upper bound such as min(rows, cols) or a
    structural bound) the exact answer is ``cap``.  Anything short of the
    cap falls back to fraction-free exact elimination, which is always
    authoritative.  The returned value equals exact_rank in all cases.
    """
    bound = min(m.nrows, m.ncols)
    if cap is not None:
        bound = min(bound, cap)
    for prime in _RANK_PRIMES:
        try:
            r = modular_rank(m, prime, stop_at=bound)
        except ZeroDivisionError:
            continue
        if r >= bound:
            return bound
        break
    return exact_rank(m, stop_at=bound)


def row_space_basis(rows: Sequence[Sequence[Fraction]]) -> List[int]:
    """Indices of a minimal spanning subset of rows, greedy in input order."""
    if not rows:
        return []
    ech = _Echelon(len(rows[0]))
    picked: List[int] = []
    for i, row in enumerate(rows):
        if ech.insert(row):
            picked.append(i)
    return picked


def solve_linear(
    a_rows: Sequence[Sequence[Fraction]], b: Sequence[Fraction]
) -> Optional[List[Fraction]]:
    """One exact solution of A x = b, or None if inconsistent.

    Free variables are set to zero.  Small systems only; plain rational
    Gaussian elimination.
    """
    nrows = len(a_rows)
    if nrows == 0:
        return [] if all(x == 0 for x in b) else None
    ncols = len(a_rows[0])
    aug = [[Fraction(x) for x in row] + [Fraction(b[i])] for i, row in enumerate(a_rows)]
    pivot_cols: List[int] = []
    r = 0
    for c in range(ncols):
        pr = next((i for i in range(r, nrows) if aug[i][c] != 0), None)
        if pr is None:
            continue
        aug[r], aug[pr] = aug[pr], aug[r]
        inv = 1 / aug[r][c]
        aug[r] = [x * inv for x in aug[r]]
        for i in range(nrows):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivot_cols.append(c)
        r += 1
        if r == nrows:
            break
    for i in range(r, nrows):
        if aug[i][ncols] != 0:
            return None
    x = [Fraction(0)] * ncols
    for i, c in enumerate(pivot_cols):
        x[c] = aug[i][ncols]
    return x


def nullspace_basis(a_rows: Sequence[Sequence[Fraction]]) -> List[List[Fraction]]:
    """Basis of the right null space of A, exact."""
    nrows = len(a_rows)
    if nrows == 0:
        return []
    ncols = len(a_rows[0])
    aug = [[Fraction(x) for x in row] for row in a_rows]
    pivot_cols: List[int] = []
    r = 0
    for c in range(ncols):
        pr = next((i for i in range(r, nrows) if aug[i][c] != 0), None)
        if pr is None:
            continue
        aug[r], aug[pr] = aug[pr], aug[r]
        inv = 1 / aug[r][c]
        aug[r] = [x * inv for x in aug[r]]
        for i in range(nrows):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivot_cols.append(c)
        r += 1
        if r == nrows:
            break
    free_cols = [c for c in range(ncols) if c not in pivot_cols]
    basis: List[List[Fraction]] = []
    for fc in free_cols:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for i, c in enumerate(pivot_cols):
            v[c] = -aug[i][fc]
        basis.append(v)
    return basis
