"""Jacobian of the parameter-to-joint map and its exact rank.

The generic (regular) rank of the map is the maximum Jacobian rank over
interior parameter points, attained at random points with probability one.
Points are sampled with rational coordinates k/D, D = 10007 prime, then
rescaled inside each conditional-probability block so the block sums stay
below one; ranks at those exact points are computed by fraction-free
elimination.  No tolerance ever enters the rank decision.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .algebra import (
    RationalMatrix,
    SparsePoly,
    certified_rank,
    exact_rank,
    mat_from_rows,
    poly_eval,
    poly_partial,
)
from .network import (
    JointMap,
    ParameterSpace,
    _rank,
    enumerate_hidden_states,
    enumerate_joint_states,
    joint_param_count,
    model_param_count,
)

SAMPLE_DENOMINATOR = 10007  # prime
DEFAULT_TRIALS = 3

PointLike = Union[Sequence[Fraction], Mapping[str, Fraction]]


@dataclass(frozen=True)
class SymbolicJacobian:
    """All partial derivatives of the joint map, as polynomials.

    Rows follow joint-state order, columns follow parameter order.  Meant
    for small networks and for tests; rank computations use the pointwise
    evaluation path, which never expands these polynomials.
    """

    jmap: JointMap
    entries: Tuple[Tuple[SparsePoly, ...], ...]

    @property
    def nrows(self) -> int:
        return len(self.entries)

    @property
    def ncols(self) -> int:
        return self.jmap.space.size


def build_jacobian(jmap: JointMap) -> SymbolicJacobian:
    names = jmap.space.var_names
    rows = []
    for x in enumerate_joint_states(jmap.net):
        theta = jmap.theta(x)
        rows.append(tuple(poly_partial(theta, v) for v in names))
    return SymbolicJacobian(jmap, tuple(rows))


def _as_flat_point(space: ParameterSpace, point: PointLike) -> List[Fraction]:
    if isinstance(point, Mapping):
        missing = [v for v in space.var_names if v not in point]
        if missing:
            raise ValueError(f"point missing parameters {missing[:4]}")
        return [Fraction(point[v]) for v in space.var_names]
    vals = [Fraction(x) for x in point]
    if len(vals) != space.size:
        raise ValueError(
            f"point has {len(vals)} coordinates, expected {space.size}"
        )
    return vals


def evaluate_jacobian(jmap: JointMap, point: PointLike) -> RationalMatrix:
    """Exact Jacobian matrix at a rational point, via the product rule.

    Works factor-by-factor on the network, so it stays cheap even when the
    expanded symbolic polynomials would be enormous.
    """
    net = jmap.net
    space = jmap.space
    vals = _as_flat_point(space, point)
    nvars = space.size

    # complement value per block: 1 - sum of the block's free entries
    comp: Dict[int, Fraction] = {}
    for bi, block in enumerate(space.blocks):
        comp[bi] = Fraction(1) - sum(
            (vals[block.start + k] for k in range(block.states - 1)), Fraction(0)
        )
    block_index: Dict[Tuple[str, int], int] = {
        (b.node_id, b.config_index): i for i, b in enumerate(space.blocks)
    }

    nodes = net.nodes
    node_pos = {n.id: i for i, n in enumerate(nodes)}
    parent_ids = [net.parents[n.id] for n in nodes]
    parent_cards = [
        tuple(net.node(p).states for p in net.parents[n.id]) for n in nodes
    ]
    parent_positions = [
        tuple(node_pos[p] for p in net.parents[n.id]) for n in nodes
    ]

    hidden_states = enumerate_hidden_states(net)
    joint_states = enumerate_joint_states(net)
    hidden_slots = [i for i, n in enumerate(nodes) if n.hidden]
    observed_slots = [i for i, n in enumerate(nodes) if not n.hidden]

    rows: List[List[Fraction]] = []
    n = len(nodes)
    assignment = [0] * n
    for x in joint_states:
        row = [Fraction(0)] * nvars
        for slot, v in zip(observed_slots, x):
            assignment[slot] = v
        for h in hidden_states:
            for slot, v in zip(hidden_slots, h):
                assignment[slot] = v
            factors: List[Fraction] = []
            blocks_here: List[int] = []
            for i, node in enumerate(nodes):
                cfg = _rank(
                    [assignment[p] for p in parent_positions[i]], parent_cards[i]
                )
                bi = block_index[(node.id, cfg)]
                blocks_here.append(bi)
                v = assignment[i]
                block = space.blocks[bi]
                if v < node.states - 1:
                    factors.append(vals[block.start + v])
                else:
                    factors.append(comp[bi])
            # prefix/suffix products around each factor
            prefix = [Fraction(1)] * (n + 1)
            for i in range(n):
                prefix[i + 1] = prefix[i] * factors[i]
            suffix = Fraction(1)
            for i in range(n - 1, -1, -1):
                rest = prefix[i] * suffix
                block = space.blocks[blocks_here[i]]
                v = assignment[i]
                if v < nodes[i].states - 1:
                    row[block.start + v] += rest
                else:
                    for k in range(nodes[i].states - 1):
                        row[block.start + k] -= rest
                suffix *= factors[i]
        rows.append(row)
    return RationalMatrix(len(rows), nvars, tuple(tuple(r) for r in rows))


def theta_values(jmap: JointMap, point: PointLike) -> List[Fraction]:
    """Exact joint probabilities at a rational parameter point."""
    net = jmap.net
    space = jmap.space
    vals = _as_flat_point(space, point)
    comp: Dict[Tuple[str, int], Fraction] = {}
    for block in space.blocks:
        comp[(block.node_id, block.config_index)] = Fraction(1) - sum(
            (vals[block.start + k] for k in range(block.states - 1)), Fraction(0)
        )
    nodes = net.nodes
    node_pos = {n.id: i for i, n in enumerate(nodes)}
    parent_cards = [
        tuple(net.node(p).states for p in net.parents[n.id]) for n in nodes
    ]
    parent_positions = [
        tuple(node_pos[p] for p in net.parents[n.id]) for n in nodes
    ]
    hidden_slots = [i for i, n in enumerate(nodes) if n.hidden]
    observed_slots = [i for i, n in enumerate(nodes) if not n.hidden]
    out: List[Fraction] = []
    n = len(nodes)
    assignment = [0] * n
    for x in enumerate_joint_states(net):
        total = Fraction(0)
        for slot, v in zip(observed_slots, x):
            assignment[slot] = v
        for h in enumerate_hidden_states(net):
            for slot, v in zip(hidden_slots, h):
                assignment[slot] = v
            prob = Fraction(1)
            for i, node in enumerate(nodes):
                cfg = _rank(
                    [assignment[p] for p in parent_positions[i]], parent_cards[i]
                )
                block = space.block_of_node_config[(node.id, cfg)]
                v = assignment[i]
                if v < node.states - 1:
                    prob *= vals[block.start + v]
                else:
                    prob *= comp[(node.id, cfg)]
            total += prob
        out.append(total)
    return out


def rank_at_point(
    jac: Union[SymbolicJacobian, JointMap], point: PointLike, stop_at: Optional[int] = None
) -> int:
    """Exact rank of the Jacobian evaluated at a rational point."""
    if isinstance(jac, SymbolicJacobian):
        space = jac.jmap.space
        vals = _as_flat_point(space, point)
        env = {v: x for v, x in zip(space.var_names, vals)}
        rows = [
            [poly_eval(entry, env) for entry in row] for row in jac.entries
        ]
        return exact_rank(mat_from_rows(rows), stop_at=stop_at)
    matrix = evaluate_jacobian(jac, point)
    return exact_rank(matrix, stop_at=stop_at)


def sample_interior_point(
    space: ParameterSpace, rng: random.Random
) -> List[Fraction]:
    """Random rational interior parameter point.

    Per block of c free entries, c + 1 integers are drawn uniformly from
    [1, D - 1]; dividing by their total puts every entry in (0, 1) with the
    block sum strictly below one.
    """
    D = SAMPLE_DENOMINATOR
    point: List[Fraction] = []
    for block in space.blocks:
        c = block.states - 1
        draws = [rng.randint(1, D - 1) for _ in range(c + 1)]
        total = sum(draws)
        point.extend(Fraction(k, total) for k in draws[:c])
    return point


def regular_rank(
    jmap: JointMap,
    seed: int = 0,
    trials: int = DEFAULT_TRIALS,
) -> int:
    """Generic Jacobian rank: maximum over seeded random interior points.

    The rank is bounded by min(parameter count, joint dimension); sampling
    stops early once that cap is reached.
    """
    cap = min(model_param_count(jmap.net), joint_param_count(jmap.net))
    rng = random.Random(seed)
    best = 0
    for _ in range(max(1, trials)):
        point = sample_interior_point(jmap.space, rng)
        matrix = evaluate_jacobian(jmap, point)
        r = certified_rank(matrix, cap=cap)
        best = max(best, r)
        if best >= cap:
            break
    return best


def float_jacobian(jmap: JointMap, point: PointLike):
    """Float Jacobian for the optional SVD cross-check path."""
    import numpy as np

    m = evaluate_jacobian(jmap, point)
    return np.array([[float(x) for x in row] for row in m.rows])


def float_svd_rank(matrix, tol: Optional[float] = None) -> int:
    """Numerical rank via SVD; cross-check only, never the exact answer."""
    import numpy as np

    a = np.asarray(matrix, dtype=float)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if tol is None:
        tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return int((s > tol).sum())
