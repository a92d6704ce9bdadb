"""Discrete Bayesian network structures and their parameter-to-joint map.

A network is a DAG of finite-state nodes, some marked hidden.  Its free
parameters are conditional probability entries: for each node and each
configuration of its parents, the first ``states - 1`` probabilities are
free and the last is the complement.  The map of interest sends a
parameter vector to the joint distribution over the observed nodes, with
hidden nodes summed out; every coordinate of that map is a polynomial.

Parent order, parent-configuration order, and joint-state order all follow
node declaration order, with the last coordinate varying fastest.  This
fixes variable names, matrix layouts, and file outputs deterministically.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .algebra import SparsePoly, make_poly, poly_add, poly_mul

__all__ = [
    "Node",
    "NetworkStructure",
    "ParamBlock",
    "ParameterSpace",
    "JointMap",
    "parse_network",
    "load_network",
    "naive_bayes_network",
    "model_param_count",
    "joint_param_count",
    "enumerate_joint_states",
    "enumerate_hidden_states",
    "build_joint_map",
]

_ID_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


@dataclass(frozen=True)
class Node:
    id: str
    states: int
    hidden: bool


@dataclass(frozen=True)
class NetworkStructure:
    """Validated DAG with per-node state counts and hidden flags."""

    nodes: Tuple[Node, ...]
    edges: Tuple[Tuple[str, str], ...]
    parents: Mapping[str, Tuple[str, ...]]  # in declaration order
    children: Mapping[str, Tuple[str, ...]]  # in declaration order

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def observed(self) -> Tuple[Node, ...]:
        return tuple(n for n in self.nodes if not n.hidden)

    @property
    def hidden(self) -> Tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.hidden)


def parse_network(data) -> NetworkStructure:
    """Build a network from the JSON object format.

    ``data`` may be a dict, a JSON string, or bytes.  Expected shape:
    ``{"nodes": [{"id": "H", "states": 3, "hidden": true}, ...],
    "edges": [["H", "X1"], ...]}``.  ``hidden`` defaults to false.
    """
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError("network document must be a JSON object")
    raw_nodes = data.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise ValueError("network needs a non-empty 'nodes' list")
    nodes: List[Node] = []
    for entry in raw_nodes:
        if not isinstance(entry, dict) or "id" not in entry or "states" not in entry:
            raise ValueError(f"bad node entry {entry!r}: need 'id' and 'states'")
        nid = entry["id"]
        if not isinstance(nid, str) or not nid or set(nid) - _ID_CHARS or nid[0].isdigit():
            raise ValueError(f"bad node id {nid!r}: use letters, digits, underscores")
        states = entry["states"]
        if not isinstance(states, int) or states < 2:
            raise ValueError(f"node {nid!r}: 'states' must be an integer >= 2")
        hidden = entry.get("hidden", False)
        if not isinstance(hidden, bool):
            raise ValueError(f"node {nid!r}: 'hidden' must be a boolean")
        nodes.append(Node(nid, states, hidden))
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate node ids")
    raw_edges = data.get("edges", [])
    if not isinstance(raw_edges, list):
        raise ValueError("'edges' must be a list of [parent, child] pairs")
    edge_set = set()
    edges: List[Tuple[str, str]] = []
    for entry in raw_edges:
        if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
            raise ValueError(f"bad edge {entry!r}: expected [parent, child]")
        a, b = entry
        if a not in ids or b not in ids:
            raise ValueError(f"edge {entry!r} references unknown node")
        if a == b:
            raise ValueError(f"self-loop on {a!r}")
        if (a, b) in edge_set:
            raise ValueError(f"duplicate edge {entry!r}")
        edge_set.add((a, b))
        edges.append((a, b))
    order = {nid: i for i, nid in enumerate(ids)}
    parents = {
        nid: tuple(sorted((a for a, b in edges if b == nid), key=order.__getitem__))
        for nid in ids
    }
    children = {
        nid: tuple(sorted((b for a, b in edges if a == nid), key=order.__getitem__))
        for nid in ids
    }
    _check_acyclic(ids, parents)
    return NetworkStructure(tuple(nodes), tuple(edges), parents, children)


def _check_acyclic(ids: Sequence[str], parents: Mapping[str, Tuple[str, ...]]) -> None:
    indeg = {nid: len(parents[nid]) for nid in ids}
    queue = [nid for nid in ids if indeg[nid] == 0]
    seen = 0
    while queue:
        nid = queue.pop()
        seen += 1
        for other in ids:
            if nid in parents[other]:
                indeg[other] -= 1
                if indeg[other] == 0:
                    queue.append(other)
    if seen != len(ids):
        raise ValueError("network has a directed cycle")


def load_network(path: str) -> NetworkStructure:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network(fh.read())


def naive_bayes_network(hidden_states: int, feature_states: Sequence[int]) -> NetworkStructure:
    """Hidden root H with one observed child per feature."""
    obj = {
        "nodes": [{"id": "H", "states": int(hidden_states), "hidden": True}]
        + [
            {"id": f"X{i+1}", "states": int(r)}
            for i, r in enumerate(feature_states)
        ],
        "edges": [["H", f"X{i+1}"] for i in range(len(feature_states))],
    }
    return parse_network(obj)


# ---------------------------------------------------------------------------
# parameter space


@dataclass(frozen=True)
class ParamBlock:
    """Free parameters of one node under one parent configuration."""

    node_id: str
    node_index: int
    states: int
    config_index: int
    parent_ids: Tuple[str, ...]
    parent_states: Tuple[int, ...]
    var_names: Tuple[str, ...]
    start: int  # offset of var_names[0] in the flat parameter vector


@dataclass(frozen=True)
class ParameterSpace:
    net: NetworkStructure
    blocks: Tuple[ParamBlock, ...]
    var_names: Tuple[str, ...]
    var_index: Mapping[str, int]
    block_of_node_config: Mapping[Tuple[str, int], ParamBlock]

    @property
    def size(self) -> int:
        return len(self.var_names)


def build_parameter_space(net: NetworkStructure) -> ParameterSpace:
    blocks: List[ParamBlock] = []
    names: List[str] = []
    by_key: Dict[Tuple[str, int], ParamBlock] = {}
    for ni, node in enumerate(net.nodes):
        pids = net.parents[node.id]
        pcards = tuple(net.node(p).states for p in pids)
        nconfigs = 1
        for c in pcards:
            nconfigs *= c
        for j in range(nconfigs):
            cfg = _unrank(j, pcards)
            vnames = tuple(
                f"w_{node.id}_{j}_{k}" for k in range(node.states - 1)
            )
            block = ParamBlock(
                node.id, ni, node.states, j, pids, cfg, vnames, len(names)
            )
            blocks.append(block)
            names.extend(vnames)
            by_key[(node.id, j)] = block
    var_index = {v: i for i, v in enumerate(names)}
    return ParameterSpace(net, tuple(blocks), tuple(names), var_index, by_key)


def _unrank(index: int, cards: Tuple[int, ...]) -> Tuple[int, ...]:
    out = []
    for c in reversed(cards):
        out.append(index % c)
        index //= c
    return tuple(reversed(out))


def _rank(values: Sequence[int], cards: Sequence[int]) -> int:
    idx = 0
    for v, c in zip(values, cards):
        idx = idx * c + v
    return idx


def model_param_count(net: NetworkStructure) -> int:
    """Number of free conditional-probability parameters."""
    total = 0
    for node in net.nodes:
        prod = 1
        for p in net.parents[node.id]:
            prod *= net.node(p).states
        total += (node.states - 1) * prod
    return total


def joint_param_count(net: NetworkStructure) -> int:
    """Dimension of the observed joint simplex: product of state counts minus one."""
    prod = 1
    for node in net.observed:
        prod *= node.states
    return prod - 1


def enumerate_joint_states(net: NetworkStructure) -> List[Tuple[int, ...]]:
    """Observed joint states in declaration order, last coordinate fastest."""
    cards = [n.states for n in net.observed]
    return [tuple(x) for x in itertools.product(*(range(c) for c in cards))]


def enumerate_hidden_states(net: NetworkStructure) -> List[Tuple[int, ...]]:
    cards = [n.states for n in net.hidden]
    return [tuple(x) for x in itertools.product(*(range(c) for c in cards))]


# ---------------------------------------------------------------------------
# the parameter-to-joint map


@dataclass(frozen=True)
class JointMap:
    """Polynomial map from free parameters to the observed joint distribution.

    ``theta(i)`` gives the i-th coordinate (joint-state order) as a
    SparsePoly over the full parameter variable tuple.  Exact pointwise
    evaluation that never expands polynomials is available separately in
    the jacobian module; this class is the symbolic form.
    """

    net: NetworkStructure
    space: ParameterSpace

    def factor_poly(self, node: Node, config_index: int, value: int) -> SparsePoly:
        block = self.space.block_of_node_config[(node.id, config_index)]
        nvars = len(self.space.var_names)
        if value < node.states - 1:
            exp = [0] * nvars
            exp[block.start + value] = 1
            return make_poly(self.space.var_names, {tuple(exp): Fraction(1)})
        terms = {(0,) * nvars: Fraction(1)}
        for k in range(node.states - 1):
            exp = [0] * nvars
            exp[block.start + k] = 1
            terms[tuple(exp)] = Fraction(-1)
        return make_poly(self.space.var_names, terms)

    def _assignment(self, x: Tuple[int, ...], h: Tuple[int, ...]) -> Dict[str, int]:
        values: Dict[str, int] = {}
        xi = iter(x)
        hi = iter(h)
        for node in self.net.nodes:
            values[node.id] = next(hi) if node.hidden else next(xi)
        return values

    def theta(self, x: Tuple[int, ...]) -> SparsePoly:
        total = make_poly(self.space.var_names, {})
        for h in enumerate_hidden_states(self.net):
            values = self._assignment(x, h)
            prod = make_poly(
                self.space.var_names,
                {(0,) * len(self.space.var_names): Fraction(1)},
            )
            for node in self.net.nodes:
                cfg = _rank(
                    [values[p] for p in self.net.parents[node.id]],
                    [self.net.node(p).states for p in self.net.parents[node.id]],
                )
                prod = poly_mul(prod, self.factor_poly(node, cfg, values[node.id]))
            total = poly_add(total, prod)
        return total

    def thetas(self) -> List[SparsePoly]:
        return [self.theta(x) for x in enumerate_joint_states(self.net)]


def build_joint_map(net: NetworkStructure) -> JointMap:
    return JointMap(net, build_parameter_space(net))
