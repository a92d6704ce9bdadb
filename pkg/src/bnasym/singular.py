"""Classify maximum-likelihood statistics and score singular models.

Given observed-variable statistics, the functions here decide whether the
fitted model sits at a regular or a singular point of the parameter space,
and produce the leading asymptotic expansion of the log marginal
likelihood.  Regular points get the classical penalty (half the local
Jacobian rank per ln N).  Singular points are handled by translating the
fitting problem to an exact rational anchor, forming the residual
sum-of-squares polynomial there, and extracting its real log-canonical
threshold with the machinery in :mod:`bnasym.rlct`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .algebra import (
    SparsePoly,
    make_poly,
    poly_add,
    poly_const,
    poly_mul,
    poly_render,
    poly_sub,
    poly_subst,
    poly_var,
    row_space_basis,
)
from .dimension import derived_seed
from .jacobian import (
    float_jacobian,
    float_svd_rank,
    rank_at_point,
    regular_rank,
    theta_values,
)
from .likelihood import (
    DEFAULT_RESTARTS,
    MLResult,
    SufficientStatistics,
    em_fit,
)
from .network import (
    JointMap,
    NetworkStructure,
    ParamBlock,
    _unrank,
    build_joint_map,
    model_param_count,
)
from .rlct import DEFAULT_MAX_DEPTH, PoleResult, numeric_lambda_oracle, rlct

DEFAULT_CLASSIFY_TRIALS = 3
SNAP_DENOMINATOR_LIMIT = 64
# EM stops on log-likelihood gain, so the returned parameters can sit a
# few 1e-6 away from the true optimum even when the likelihood itself is
# converged to 1e-10.  Snap acceptance therefore tests the likelihood,
# not the parameter distance.
SNAP_LOGLIK_SLACK = 1e-9
SNAP_THETA_TOL = 1e-9
NEAR_BEST_SLACK = 1e-7
NUMERIC_RANK_RTOL = 1e-6


@dataclass(frozen=True)
class StatisticsClass:
    """Verdict on the statistics: regular or singular, and the ranks behind it."""

    kind: str
    rank_at_ml: int
    regular_rank: int
    ml_dim: int
    reliable: bool
    rank_exact: bool
    anchor: Optional[Tuple[Fraction, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in ("regular", "singular"):
            raise ValueError(f"unknown class kind: {self.kind!r}")
        expected = "singular" if self.rank_at_ml < self.regular_rank else "regular"
        if self.kind != expected:
            raise ValueError(
                f"kind {self.kind!r} inconsistent with ranks "
                f"{self.rank_at_ml} vs {self.regular_rank}"
            )


@dataclass(frozen=True)
class AsymptoticScore:
    """Leading terms of ln P(D) as the sample size N grows.

    lambda_ multiplies -ln N and m - 1 multiplies +ln ln N.  The pole is
    the negated coefficient, kept for direct comparison with the output
    of the pole engines.
    """

    lambda_: Fraction
    m: int
    pole: Fraction
    formula: str
    details: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.lambda_ <= 0:
            raise ValueError("lambda must be positive")
        if self.m < 1:
            raise ValueError("multiplicity must be at least 1")
        if self.pole != -self.lambda_:
            raise ValueError("pole must equal -lambda")


@dataclass(frozen=True)
class UnresolvedScore:
    """Returned when no anchor yields a certified pole.

    Carries the reason, which anchors were attempted, and a numeric
    estimate when one could be computed.
    """

    reason: str
    anchors_tried: int
    oracle: Optional[Mapping[str, float]] = None


@dataclass(frozen=True)
class ResidualPolynomial:
    """Sum of squared fitted-minus-anchor probability differences.

    Variables are displacements from the anchor; one-sided variables
    (listed in sides as 'pos') touch a simplex face there.  gens holds
    the individual differences before squaring, in joint-state order of
    the selected indices.  The expanded square sum p is assembled on
    first access: the pole engines work from the generators, and for the
    larger models the expansion is far too big to build eagerly.
    """

    anchor: Tuple[Fraction, ...]
    selected: Tuple[int, ...]
    gens: Tuple[SparsePoly, ...]
    sides: Mapping[str, str]
    boundary: bool
    variables: Tuple[str, ...]

    @cached_property
    def p(self) -> SparsePoly:
        total = make_poly(self.variables, {})
        for g in self.gens:
            total = poly_add(total, poly_mul(g, g))
        return total


def _to_fraction_point(
    point: Sequence[object], names: Sequence[str]
) -> Tuple[Fraction, ...]:
    if isinstance(point, Mapping):
        missing = [v for v in names if v not in point]
        if missing:
            raise ValueError(f"anchor missing coordinates: {missing}")
        raw: List[object] = [point[v] for v in names]
    else:
        raw = list(point)
        if len(raw) != len(names):
            raise ValueError(
                f"anchor has {len(raw)} coordinates, expected {len(names)}"
            )
    out: List[Fraction] = []
    for v in raw:
        if isinstance(v, float):
            raise ValueError(
                "anchor coordinates must be exact rationals, not floats"
            )
        out.append(Fraction(v))
    return tuple(out)


def _block_of(space, name: str) -> ParamBlock:
    i = space.var_index[name]
    for block in space.blocks:
        if block.start <= i < block.start + block.states - 1:
            return block
    raise KeyError(name)


def _validate_anchor(space, w0: Sequence[Fraction]) -> None:
    for val in w0:
        if val < 0 or val > 1:
            raise ValueError(f"anchor coordinate {val} outside [0, 1]")
    for block in space.blocks:
        total = sum(w0[block.start + k] for k in range(block.states - 1))
        if total > 1:
            raise ValueError(
                f"anchor violates simplex constraint in block for node "
                f"{block.node_id!r} (free sum {total})"
            )


def simplify_map(
    jmap: JointMap, w0: Sequence[Fraction]
) -> Tuple[List[SparsePoly], List[int]]:
    """Select a spanning subset of the probability differences at w0.

    Returns the differences theta_x - theta_x(w0) whose monomial
    coefficient vectors span the space of all of them, together with the
    joint-state indices that were kept.  Dropping the dependent rows does
    not change the generated ideal, hence not the pole either.
    """
    thetas = jmap.thetas()
    values = theta_values(jmap, tuple(w0))
    diffs = [
        poly_sub(theta, poly_const(theta.vars, val))
        for theta, val in zip(thetas, values)
    ]
    monomials = sorted({exp for d in diffs for exp in d.terms})
    rows = [[d.terms.get(exp, Fraction(0)) for exp in monomials] for d in diffs]
    keep = row_space_basis(rows)
    return [diffs[i] for i in keep], list(keep)


def residual_polynomial(
    jmap_or_net, w0: Sequence[object]
) -> ResidualPolynomial:
    """Build the residual sum-of-squares polynomial at an exact anchor.

    Coordinates at a simplex face are reflected or kept one-sided so the
    displacement variables range over [0, eps); interior coordinates stay
    two-sided.  The constant term is zero by construction.
    """
    jmap = (
        jmap_or_net
        if isinstance(jmap_or_net, JointMap)
        else build_joint_map(jmap_or_net)
    )
    space = jmap.space
    anchor = _to_fraction_point(w0, space.var_names)
    _validate_anchor(space, anchor)

    sub: Dict[str, SparsePoly] = {}
    sides: Dict[str, str] = {}
    boundary = False
    for name, val in zip(space.var_names, anchor):
        block = _block_of(space, name)
        others = sum(
            anchor[block.start + k]
            for k in range(block.states - 1)
            if space.var_names[block.start + k] != name
        )
        upper = 1 - others
        u = poly_var((name,), name)
        if val == 0:
            sub[name] = u
            sides[name] = "pos"
            boundary = True
        elif val == upper:
            sub[name] = poly_sub(poly_const((name,), val), u)
            sides[name] = "pos"
            boundary = True
        else:
            sub[name] = poly_add(poly_const((name,), val), u)
            sides[name] = "two"

    kept, indices = simplify_map(jmap, anchor)
    gens: List[SparsePoly] = []
    for diff in kept:
        shifted = poly_subst(diff, sub)
        if shifted.terms.get((0,) * len(shifted.vars), Fraction(0)) != 0:
            raise AssertionError("residual generator has a constant term")
        gens.append(shifted)

    return ResidualPolynomial(
        anchor=anchor,
        selected=tuple(indices),
        gens=tuple(gens),
        sides=sides,
        boundary=boundary,
        variables=tuple(space.var_names),
    )


def _full_rows(space, w: Sequence[float]) -> Dict[Tuple[str, int], List[float]]:
    """Full conditional distributions, one row per (node, parent config)."""
    rows: Dict[Tuple[str, int], List[float]] = {}
    for block in space.blocks:
        free = [float(w[block.start + k]) for k in range(block.states - 1)]
        rows[(block.node_id, block.config_index)] = free + [1.0 - sum(free)]
    return rows


def _snap_coordwise(
    w: Sequence[float], limit: int = SNAP_DENOMINATOR_LIMIT
) -> Tuple[Fraction, ...]:
    return tuple(Fraction(float(x)).limit_denominator(limit) for x in w)


def _write_row(
    out: List[Fraction], block: ParamBlock, row: Sequence[Fraction]
) -> None:
    for k in range(block.states - 1):
        out[block.start + k] = row[k]


def _hidden_collapse_candidates(
    net: NetworkStructure, space, w: Sequence[float]
) -> List[Tuple[Fraction, ...]]:
    """Anchors where one hidden root carries no information.

    Each child's conditional table is averaged over the states of the
    hidden parent, weighted by the fitted hidden distribution (so the
    collapsed table reproduces the fitted marginal exactly), and the
    hidden distribution itself is then replaced by the snapped fit, the
    uniform distribution, and each vertex of its simplex.  Only single
    hidden roots are handled; anything more entangled falls back to
    plain snaps.
    """
    roots = [
        node
        for node in net.nodes
        if node.hidden and not net.parents[node.id]
    ]
    if len(roots) != 1 or len(net.hidden) != 1:
        return []
    h = roots[0]
    base = list(_snap_coordwise(w))
    rows = _full_rows(space, w)
    h_weights = rows[(h.id, 0)]

    collapsed = list(base)
    for node_id in net.children[h.id]:
        parents = net.parents[node_id]
        h_pos = parents.index(h.id)
        cards = [net.node(p).states for p in parents]
        groups: Dict[Tuple[int, ...], List[Tuple[int, List[float]]]] = {}
        for block in space.blocks:
            if block.node_id != node_id:
                continue
            cfg = list(_unrank(block.config_index, tuple(cards)))
            key = tuple(c for i, c in enumerate(cfg) if i != h_pos)
            groups.setdefault(key, []).append(
                (cfg[h_pos], rows[(node_id, block.config_index)])
            )
        means: Dict[Tuple[int, ...], List[Fraction]] = {}
        for key, members in groups.items():
            mean = [
                sum(h_weights[hs] * row[k] for hs, row in members)
                for k in range(len(members[0][1]))
            ]
            means[key] = [
                Fraction(x).limit_denominator(SNAP_DENOMINATOR_LIMIT)
                for x in mean
            ]
        for block in space.blocks:
            if block.node_id != node_id:
                continue
            cfg = list(_unrank(block.config_index, tuple(cards)))
            key = tuple(c for i, c in enumerate(cfg) if i != h_pos)
            _write_row(collapsed, block, means[key])

    h_block = next(b for b in space.blocks if b.node_id == h.id)
    k = h_block.states
    options: List[List[Fraction]] = []
    options.append([base[h_block.start + j] for j in range(k - 1)])
    options.append([Fraction(1, k)] * (k - 1))
    for j in range(k):
        vertex = [Fraction(0)] * (k - 1)
        if j < k - 1:
            vertex[j] = Fraction(1)
        options.append(vertex)

    out: List[Tuple[Fraction, ...]] = []
    seen = set()
    for opt in options:
        cand = list(collapsed)
        for j in range(k - 1):
            cand[h_block.start + j] = opt[j]
        tup = tuple(cand)
        if tup not in seen:
            seen.add(tup)
            out.append(tup)
    return out


def _anchor_candidates(
    net: NetworkStructure, space, w: Sequence[float]
) -> List[Tuple[Fraction, ...]]:
    cands = [_snap_coordwise(w)]
    for extra in _hidden_collapse_candidates(net, space, w):
        if extra not in cands:
            cands.append(extra)
    return [c for c in cands if _anchor_feasible(space, c)]


def _anchor_feasible(space, w0: Sequence[Fraction]) -> bool:
    try:
        _validate_anchor(space, w0)
    except ValueError:
        return False
    return True


def _snap_verified(
    jmap: JointMap,
    stats: SufficientStatistics,
    cand: Sequence[Fraction],
    best_loglik: float,
    theta_hat: Sequence[float],
) -> bool:
    values = theta_values(jmap, tuple(cand))
    floats = [float(v) for v in values]
    if any(v < 0 for v in floats):
        return False
    if max(abs(a - b) for a, b in zip(floats, theta_hat)) <= SNAP_THETA_TOL:
        return True
    ll = 0.0
    for f, t in zip(stats.frequencies, floats):
        if f == 0:
            continue
        if t <= 0.0:
            return False
        ll += float(f) * math.log(t)
    return ll >= best_loglik - SNAP_LOGLIK_SLACK * max(1.0, abs(best_loglik))


def _numeric_rank(jmap: JointMap, w: Sequence[float]) -> int:
    matrix = float_jacobian(jmap, [Fraction(float(x)) for x in w])
    flat = [abs(e) for row in matrix for e in row]
    scale = max(flat) if flat else 0.0
    if scale == 0.0:
        return 0
    dim = max(len(matrix), len(matrix[0]))
    tol = max(NUMERIC_RANK_RTOL, dim * 2.3e-16) * scale * dim
    return float_svd_rank(matrix, tol=tol)


def find_anchor_points(
    net: NetworkStructure,
    stats: SufficientStatistics,
    samples: int = DEFAULT_RESTARTS,
    seed: int = 0,
    ml: Optional[MLResult] = None,
    jobs: int = 1,
) -> List[Tuple[Fraction, ...]]:
    """Exact rational anchors for the maximum-likelihood set.

    Runs EM from many seeds, snaps the near-best optima to small-
    denominator rationals (plus hidden-root collapse variants), keeps
    the candidates whose likelihood certifies them as optima, and among
    those returns the ones of minimal Jacobian rank.  Returns [] when
    every verified anchor has full generic rank (a regular fit).
    """
    jmap = build_joint_map(net)
    if ml is None:
        ml = em_fit(
            net,
            stats,
            restarts=samples,
            seed=derived_seed(seed, "anchors:em"),
            jobs=jobs,
        )
    best_ll = ml.loglik
    theta_hat = [float(v) for v in theta_values(jmap, _as_fracs(ml.w_ml))]

    near_best = [ml.w_ml]
    for opt in ml.optima:
        if opt.loglik >= best_ll - NEAR_BEST_SLACK * max(1.0, abs(best_ll)):
            near_best.append(opt.w)

    verified: List[Tuple[Fraction, ...]] = []
    seen = set()
    for w in near_best:
        for cand in _anchor_candidates(net, jmap.space, w):
            if cand in seen:
                continue
            seen.add(cand)
            if _snap_verified(jmap, stats, cand, best_ll, theta_hat):
                verified.append(cand)
    if not verified:
        return []

    generic = regular_rank(jmap, seed=derived_seed(seed, "anchors:rr"))
    ranked = [(rank_at_point(jmap, cand), cand) for cand in verified]
    min_rank = min(r for r, _ in ranked)
    if min_rank >= generic:
        return []
    return [cand for r, cand in ranked if r == min_rank]


def _as_fracs(w: Sequence[float]) -> Tuple[Fraction, ...]:
    return tuple(Fraction(float(x)) for x in w)


def classify_statistics(
    net: NetworkStructure,
    stats: SufficientStatistics,
    trials: int = DEFAULT_CLASSIFY_TRIALS,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    jobs: int = 1,
    ml: Optional[MLResult] = None,
) -> StatisticsClass:
    """Decide whether the ML fit for these statistics is regular or singular.

    The generic rank comes from seeded interior sampling; the rank at the
    fit is exact when a snapped rational anchor reproduces the optimum,
    and a guarded floating SVD rank otherwise.
    """
    jmap = build_joint_map(net)
    ds = model_param_count(net)
    if not net.hidden:
        generic = regular_rank(
            jmap, seed=derived_seed(seed, "classify:rr"), trials=trials
        )
        return StatisticsClass(
            kind="regular",
            rank_at_ml=generic,
            regular_rank=generic,
            ml_dim=ds - generic,
            reliable=True,
            rank_exact=True,
        )

    if ml is None:
        ml = em_fit(
            net,
            stats,
            restarts=restarts,
            seed=derived_seed(seed, "classify:em"),
            jobs=jobs,
        )
    generic = regular_rank(
        jmap, seed=derived_seed(seed, "classify:rr"), trials=trials
    )

    best_ll = ml.loglik
    theta_hat = [float(v) for v in theta_values(jmap, _as_fracs(ml.w_ml))]
    near_best = [ml.w_ml]
    for opt in ml.optima:
        if opt.loglik >= best_ll - NEAR_BEST_SLACK * max(1.0, abs(best_ll)):
            near_best.append(opt.w)

    exact_ranks: List[Tuple[int, Tuple[Fraction, ...]]] = []
    seen = set()
    for w in near_best:
        for cand in _anchor_candidates(net, jmap.space, w):
            if cand in seen:
                continue
            seen.add(cand)
            if _snap_verified(jmap, stats, cand, best_ll, theta_hat):
                exact_ranks.append((rank_at_point(jmap, cand), cand))

    if exact_ranks:
        rank, anchor = min(exact_ranks, key=lambda rc: rc[0])
        rank_exact = True
    else:
        rank = min(_numeric_rank(jmap, w) for w in near_best)
        anchor = None
        rank_exact = False

    kind = "singular" if rank < generic else "regular"
    return StatisticsClass(
        kind=kind,
        rank_at_ml=rank,
        regular_rank=generic,
        ml_dim=ds - rank,
        reliable=ml.converged,
        rank_exact=rank_exact,
        anchor=anchor,
    )


def regular_score(cls: StatisticsClass) -> AsymptoticScore:
    """Classical BIC-style expansion for a regular fit: lambda = rank / 2."""
    if cls.kind != "regular":
        raise ValueError("regular_score requires a regular classification")
    lam = Fraction(cls.rank_at_ml, 2)
    return AsymptoticScore(
        lambda_=lam,
        m=1,
        pole=-lam,
        formula=_formula(lam, 1),
        details={"class": "regular", "rank": cls.rank_at_ml},
    )


def _formula(lam: Fraction, m: int) -> str:
    text = f"lnP ≈ lnP(D|w_ML) - {lam} ln N"
    if m > 1:
        text += f" + {m - 1} ln ln N"
    return text


def singular_score(
    net: NetworkStructure,
    stats: SufficientStatistics,
    candidate_points: Optional[Iterable[Sequence[object]]] = None,
    samples: int = DEFAULT_RESTARTS,
    seed: int = 0,
    max_blowup_depth: int = DEFAULT_MAX_DEPTH,
    use_oracle: bool = True,
    jobs: int = 1,
    ml: Optional[MLResult] = None,
):
    """Asymptotic score of a singular fit via residual pole analysis.

    Anchors come from candidate_points when given, otherwise from
    find_anchor_points.  Each anchor contributes a pole; the greatest
    pole (ties broken by larger multiplicity) gives the reported
    expansion.  Returns UnresolvedScore when no anchor can be certified.
    """
    jmap = build_joint_map(net)
    if candidate_points is not None:
        anchors = [
            _to_fraction_point(p, jmap.space.var_names) for p in candidate_points
        ]
        for a in anchors:
            _validate_anchor(jmap.space, a)
    else:
        anchors = find_anchor_points(
            net, stats, samples=samples, seed=seed, ml=ml, jobs=jobs
        )
    if not anchors:
        raise ValueError(
            "no singular anchor points found; the fit looks regular"
        )

    per_anchor: List[Tuple[PoleResult, ResidualPolynomial]] = []
    unresolved = 0
    oracle_est: Optional[Mapping[str, float]] = None
    for anchor in anchors:
        rp = residual_polynomial(jmap, anchor)
        result = rlct(
            None,
            gens=list(rp.gens),
            sides=dict(rp.sides),
            max_blowup_depth=max_blowup_depth,
        )
        if result.resolved:
            per_anchor.append((result, rp))
        else:
            unresolved += 1
            if use_oracle and oracle_est is None:
                try:
                    oracle_est = numeric_lambda_oracle(
                        None,
                        gens=list(rp.gens),
                        seed=derived_seed(seed, "score:oracle"),
                    )
                except ValueError:
                    oracle_est = None
    if not per_anchor:
        return UnresolvedScore(
            reason="no anchor produced a certified pole",
            anchors_tried=len(anchors),
            oracle=oracle_est,
        )

    best, best_rp = max(per_anchor, key=lambda pr: (pr[0].pole, pr[0].multiplicity))
    lam = -best.pole
    disagreement = len(
        {(r.pole, r.multiplicity) for r, _ in per_anchor}
    ) > 1
    details: Dict[str, object] = {
        "anchors_tried": len(anchors),
        "anchors_resolved": len(per_anchor),
        "anchors_unresolved": unresolved,
        "anchor": tuple(str(c) for c in best_rp.anchor),
        "boundary": best_rp.boundary,
        "method": best.method,
        "disagreement": disagreement,
    }
    if disagreement:
        details["all_poles"] = sorted(
            {(str(r.pole), r.multiplicity) for r, _ in per_anchor}, reverse=True
        )
    return AsymptoticScore(
        lambda_=lam,
        m=best.multiplicity,
        pole=best.pole,
        formula=_formula(lam, best.multiplicity),
        details=details,
    )


def asymptotic_score(
    net: NetworkStructure,
    stats: SufficientStatistics,
    candidate_points: Optional[Iterable[Sequence[object]]] = None,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    max_blowup_depth: int = DEFAULT_MAX_DEPTH,
    jobs: int = 1,
):
    """Classify the statistics, then score by the appropriate route.

    Returns (StatisticsClass, AsymptoticScore | UnresolvedScore).  The EM
    fit is shared between the classification and the scoring pass.
    """
    ml = None
    if net.hidden:
        ml = em_fit(
            net,
            stats,
            restarts=restarts,
            seed=derived_seed(seed, "classify:em"),
            jobs=jobs,
        )
    cls = classify_statistics(
        net, stats, seed=seed, restarts=restarts, jobs=jobs, ml=ml
    )
    if cls.kind == "regular" and candidate_points is None:
        return cls, regular_score(cls)
    score = singular_score(
        net,
        stats,
        candidate_points=candidate_points,
        samples=restarts,
        seed=seed,
        max_blowup_depth=max_blowup_depth,
        jobs=jobs,
        ml=ml,
    )
    return cls, score
