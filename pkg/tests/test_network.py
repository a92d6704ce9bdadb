"""Network parsing, parameter space layout, and the joint map."""

import json
from fractions import Fraction as F

import pytest

from bnasym.algebra import poly_add, poly_eval
from bnasym.network import (
    build_joint_map,
    build_parameter_space,
    enumerate_joint_states,
    joint_param_count,
    model_param_count,
    naive_bayes_network,
    parse_network,
)

W = parse_network(
    {
        "nodes": [
            {"id": "X1", "states": 2},
            {"id": "X2", "states": 2},
            {"id": "H", "states": 2, "hidden": True},
            {"id": "Y1", "states": 2},
            {"id": "Y2", "states": 2},
        ],
        "edges": [["X1", "Y1"], ["H", "Y1"], ["H", "Y2"], ["X2", "Y2"]],
    }
)


# ---------------------------------------------------------------------------
# parsing


def test_parse_accepts_string_and_dict():
    doc = {"nodes": [{"id": "A", "states": 2}], "edges": []}
    a = parse_network(doc)
    b = parse_network(json.dumps(doc))
    assert a.nodes == b.nodes
    assert a.edges == b.edges


def test_parse_defaults_hidden_false():
    net = parse_network({"nodes": [{"id": "A", "states": 3}], "edges": []})
    assert net.nodes[0].hidden is False
    assert net.hidden == ()
    assert net.observed == net.nodes


def test_parse_preserves_declaration_order():
    net = naive_bayes_network(3, [2, 4])
    assert [n.id for n in net.nodes] == ["H", "X1", "X2"]
    assert net.node("X2").states == 4


@pytest.mark.parametrize(
    "doc",
    [
        {"nodes": [], "edges": []},
        {"edges": []},
        {"nodes": [{"id": "A"}], "edges": []},
        {"nodes": [{"id": "A", "states": 1}], "edges": []},
        {"nodes": [{"id": "A", "states": 2}, {"id": "A", "states": 2}], "edges": []},
        {"nodes": [{"id": "A", "states": 2}], "edges": [["A", "B"]]},
        {"nodes": [{"id": "A", "states": 2}], "edges": [["A", "A"]]},
        {
            "nodes": [{"id": "A", "states": 2}, {"id": "B", "states": 2}],
            "edges": [["A", "B"], ["B", "A"]],
        },
        "not json",
        "[1]",
    ],
)
def test_parse_rejects(doc):
    with pytest.raises(ValueError):
        parse_network(doc)


def test_parse_rejects_duplicate_edge():
    with pytest.raises(ValueError):
        parse_network(
            {
                "nodes": [{"id": "A", "states": 2}, {"id": "B", "states": 2}],
                "edges": [["A", "B"], ["A", "B"]],
            }
        )


def test_parents_and_children():
    assert W.parents["Y1"] == ("X1", "H")
    assert set(W.children["H"]) == {"Y1", "Y2"}
    assert W.parents["X1"] == ()


# ---------------------------------------------------------------------------
# parameter counting


def test_param_counts_naive_bayes():
    net = naive_bayes_network(3, [2, 2, 4])
    # root: 2 free; children: 3 configs x (1 + 1 + 3)
    assert model_param_count(net) == 17
    assert joint_param_count(net) == 15


def test_param_counts_w_structure():
    assert model_param_count(W) == 11
    assert joint_param_count(W) == 15


def test_space_var_order_follows_blocks():
    net = naive_bayes_network(2, [2])
    space = build_parameter_space(net)
    assert space.size == 3
    assert len(space.blocks) == 3
    assert space.blocks[0].node_id == "H"
    # one block per parent configuration of the child
    assert [b.node_id for b in space.blocks[1:]] == ["X1", "X1"]
    for i, name in enumerate(space.var_names):
        assert space.var_index[name] == i


# ---------------------------------------------------------------------------
# joint map


def test_joint_states_last_coordinate_fastest():
    net = naive_bayes_network(2, [2, 3])
    xs = enumerate_joint_states(net)
    assert xs[0] == (0, 0)
    assert xs[1] == (0, 1)
    assert xs[3] == (1, 0)


def test_theta_sums_to_one_symbolically():
    for net in (naive_bayes_network(2, [2, 2]), W):
        jmap = build_joint_map(net)
        total = None
        for theta in jmap.thetas():
            total = theta if total is None else poly_add(total, theta)
        # exact cancellation: the sum is the constant polynomial 1
        assert total.terms == {(0,) * len(total.vars): F(1)}


def test_theta_marginalizes_hidden():
    net = naive_bayes_network(2, [2])
    jmap = build_joint_map(net)
    # t = P(H=0), a = P(X1=0 | H=0), b = P(X1=0 | H=1)
    point = {name: v for name, v in zip(jmap.space.var_names, (F(1, 3), F(1, 2), F(3, 4)))}
    got = poly_eval(jmap.theta((0,)), point)
    assert got == F(1, 3) * F(1, 2) + F(2, 3) * F(3, 4)


def test_theta_hidden_free_is_product():
    net = parse_network(
        {
            "nodes": [{"id": "A", "states": 2}, {"id": "B", "states": 2}],
            "edges": [["A", "B"]],
        }
    )
    jmap = build_joint_map(net)
    names = jmap.space.var_names
    point = dict(zip(names, (F(2, 5), F(1, 4), F(2, 3))))
    # theta(A=1, B=0) = (1 - 2/5) * P(B=0 | A=1)
    assert poly_eval(jmap.theta((1, 0)), point) == F(3, 5) * F(2, 3)
