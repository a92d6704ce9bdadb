"""Effective dimensionality of hidden-variable networks.

The effective dimension is the generic rank of the parameter-to-joint
Jacobian.  Hidden-free networks are regular: the rank equals the parameter
count.  With hidden nodes the rank can drop, but the drop is local: it
happens inside the Markov neighborhoods of the hidden nodes (the hidden
node, its parents, its children, and the children's other parents).
Disjoint neighborhoods lose rank independently, so the effective dimension
of the whole network is the parameter count minus the sum of the local
rank drops.  This turns intractable joint spaces (the full joint may have
ten-plus orders of magnitude more states than any neighborhood) into a
handful of small exact rank computations.

A grid search over naive-Bayes-style families flags models whose effective
dimension falls below both the parameter count and the joint dimension;
those are the models for which the classic dimension penalty is wrong.
"""

from __future__ import annotations

import itertools
import zlib
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .jacobian import DEFAULT_TRIALS, regular_rank
from .network import (
    NetworkStructure,
    build_joint_map,
    joint_param_count,
    model_param_count,
    naive_bayes_network,
    parse_network,
)

__all__ = [
    "NeighborhoodResult",
    "DimensionReport",
    "markov_neighborhoods",
    "local_subnetwork",
    "effective_dimension",
    "ModelResult",
    "SearchReport",
    "grid_models",
    "search_degenerate",
]


@dataclass(frozen=True)
class NeighborhoodResult:
    nodes: Tuple[str, ...]
    local_param_count: int
    local_effective_dimension: int

    @property
    def drop(self) -> int:
        return self.local_param_count - self.local_effective_dimension


@dataclass(frozen=True)
class DimensionReport:
    effective_dimension: int
    standard_dimension: int
    joint_dimension: int
    neighborhoods: Tuple[NeighborhoodResult, ...]
    decomposed: bool

    @property
    def degenerate(self) -> bool:
        return self.effective_dimension < min(
            self.standard_dimension, self.joint_dimension
        )


def markov_neighborhoods(net: NetworkStructure) -> List[Tuple[str, ...]]:
    """Disjoint Markov-blanket closures of the hidden nodes.

    Each hidden node starts with its blanket (parents, children, children's
    other parents); overlapping closures are merged until disjoint.  Node
    order inside a neighborhood, and neighborhood order, follow node
    declaration order.
    """
    order = {n.id: i for i, n in enumerate(net.nodes)}
    closures: List[Set[str]] = []
    for h in net.hidden:
        c: Set[str] = {h.id}
        c.update(net.parents[h.id])
        for child in net.children[h.id]:
            c.add(child)
            c.update(net.parents[child])
        closures.append(c)
    merged = True
    while merged:
        merged = False
        for i in range(len(closures)):
            for j in range(i + 1, len(closures)):
                if closures[i] & closures[j]:
                    closures[i] |= closures[j]
                    del closures[j]
                    merged = True
                    break
            if merged:
                break
    closures.sort(key=lambda c: min(order[n] for n in c))
    return [tuple(sorted(c, key=order.__getitem__)) for c in closures]


def local_subnetwork(net: NetworkStructure, members: Sequence[str]) -> NetworkStructure:
    """Induced sub-network on a neighborhood.

    Members keep only their in-neighborhood parents; members at the
    boundary therefore become roots with free marginals.  Hidden flags are
    preserved, so non-hidden members act as observed nodes of the local
    model.
    """
    member_set = set(members)
    order = {n.id: i for i, n in enumerate(net.nodes)}
    nodes = [
        {"id": n.id, "states": n.states, "hidden": n.hidden}
        for n in net.nodes
        if n.id in member_set
    ]
    edges = [
        [a, b] for a, b in net.edges if a in member_set and b in member_set
    ]
    edges.sort(key=lambda e: (order[e[1]], order[e[0]]))
    return parse_network({"nodes": nodes, "edges": edges})


def derived_seed(seed: int, tag: str) -> int:
    return (seed * 0x1000193 + zlib.crc32(tag.encode())) & 0x7FFFFFFF


def effective_dimension(
    net: NetworkStructure,
    seed: int = 0,
    trials: int = DEFAULT_TRIALS,
    decompose: bool = True,
) -> DimensionReport:
    """Exact effective dimension, decomposed over Markov neighborhoods.

    With ``decompose`` off the rank is taken on the whole network in one
    piece; results agree, the decomposition is only there to make large
    sparse networks tractable.
    """
    ds = model_param_count(net)
    dc = joint_param_count(net)
    if not net.hidden:
        return DimensionReport(ds, ds, dc, (), False)
    if not decompose:
        de = regular_rank(build_joint_map(net), seed=seed, trials=trials)
        return DimensionReport(de, ds, dc, (), False)
    results: List[NeighborhoodResult] = []
    total_drop = 0
    for idx, members in enumerate(markov_neighborhoods(net)):
        sub = local_subnetwork(net, members)
        ds_i = model_param_count(sub)
        de_i = regular_rank(
            build_joint_map(sub),
            seed=derived_seed(seed, "|".join(members)),
            trials=trials,
        )
        results.append(NeighborhoodResult(tuple(members), ds_i, de_i))
        total_drop += ds_i - de_i
    return DimensionReport(ds - total_drop, ds, dc, tuple(results), True)


# ---------------------------------------------------------------------------
# degenerate-model search


@dataclass(frozen=True)
class ModelResult:
    hidden_states: int
    feature_states: Tuple[int, ...]
    effective_dimension: int
    standard_dimension: int
    joint_dimension: int

    @property
    def degenerate(self) -> bool:
        return self.effective_dimension < min(
            self.standard_dimension, self.joint_dimension
        )


@dataclass(frozen=True)
class SearchReport:
    models: Tuple[ModelResult, ...]

    @property
    def degenerate_models(self) -> Tuple[ModelResult, ...]:
        return tuple(m for m in self.models if m.degenerate)


def grid_models(
    hidden_counts: Iterable[int],
    feature_counts: Iterable[int],
    state_counts: Iterable[int],
) -> List[Tuple[int, Tuple[int, ...]]]:
    """Grid of naive Bayes models, feature multisets deduplicated.

    Feature order does not change any dimension, so multisets are
    canonicalized to sorted tuples; hidden counts stay explicit.
    """
    states = sorted(set(int(s) for s in state_counts))
    hiddens = sorted(set(int(h) for h in hidden_counts))
    models: List[Tuple[int, Tuple[int, ...]]] = []
    for nf in sorted(set(int(n) for n in feature_counts)):
        multisets = sorted(
            set(itertools.combinations_with_replacement(states, nf))
        )
        for h in hiddens:
            for ms in multisets:
                models.append((h, ms))
    return models


def _evaluate_model(
    args: Tuple[int, Tuple[int, ...], int, int]
) -> ModelResult:
    hidden_states, feature_states, seed, trials = args
    net = naive_bayes_network(hidden_states, feature_states)
    tag = f"{hidden_states}:{','.join(map(str, feature_states))}"
    report = effective_dimension(
        net, seed=derived_seed(seed, tag), trials=trials, decompose=False
    )
    return ModelResult(
        hidden_states,
        tuple(feature_states),
        report.effective_dimension,
        report.standard_dimension,
        report.joint_dimension,
    )


def search_degenerate(
    hidden_counts: Iterable[int],
    feature_counts: Iterable[int],
    state_counts: Iterable[int],
    seed: int = 0,
    trials: int = DEFAULT_TRIALS,
    jobs: int = 1,
) -> SearchReport:
    """Scan a naive Bayes grid for degenerate models.

    A model is flagged when its effective dimension is below both the
    parameter count and the joint dimension.  Per-model seeds are derived
    from the model signature, so results do not depend on evaluation order
    or on the number of worker processes.
    """
    models = grid_models(hidden_counts, feature_counts, state_counts)
    tasks = [(h, ms, seed, trials) for h, ms in models]
    if jobs > 1 and len(tasks) > 1:
        import multiprocessing

        with multiprocessing.Pool(processes=jobs) as pool:
            results = pool.map(_evaluate_model, tasks, chunksize=4)
    else:
        results = [_evaluate_model(t) for t in tasks]
    return SearchReport(tuple(results))
