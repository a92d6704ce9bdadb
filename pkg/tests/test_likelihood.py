"""Statistics loading, log-likelihood, EM, and the BIC score."""

import json
import math
import random
from fractions import Fraction as F

import pytest

from bnasym.likelihood import (
    em_fit,
    bic_report,
    bic_score,
    load_statistics,
    loglik,
    predicted_distribution,
)
from bnasym.network import (
    build_parameter_space,
    naive_bayes_network,
    parse_network,
)

BINARY_NODE = parse_network({"nodes": [{"id": "A", "states": 2}], "edges": []})
QUAD_NODE = parse_network({"nodes": [{"id": "A", "states": 4}], "edges": []})


def _stats(net, counts, n):
    return load_statistics(json.dumps({"counts": counts, "N": n}), net)


# ---------------------------------------------------------------------------
# load_statistics


def test_load_uniform():
    st = _stats(QUAD_NODE, [1, 1, 1, 1], 4)
    assert st.frequencies == (F(1, 4),) * 4
    assert st.sample_size == 4


def test_load_three_one():
    st = _stats(BINARY_NODE, [3, 1], 4)
    assert st.frequencies == (F(3, 4), F(1, 4))
    assert st.counts == (3, 1)


@pytest.mark.parametrize(
    "doc",
    [
        '{"counts": [1, 2, 3], "N": 6}',  # wrong length
        '{"counts": [-1, 5], "N": 4}',
        '{"counts": [0, 0], "N": 4}',
        '{"counts": [1, 1], "N": 4}',  # sum mismatch
        '{"counts": [1, 3]}',
        '{"N": 4}',
        '{"counts": [1, 3], "N": 0}',
        '{"counts": [1, 3], "N": 4.0}',
        '{"counts": [1.5, 2.5], "N": 4}',
        "[1, 3]",
        "not json",
    ],
)
def test_load_rejects(doc):
    with pytest.raises(ValueError):
        load_statistics(doc, BINARY_NODE)


def test_load_state_order_is_last_fastest():
    net = parse_network(
        {
            "nodes": [{"id": "A", "states": 2}, {"id": "B", "states": 3}],
            "edges": [["A", "B"]],
        }
    )
    st = _stats(net, [1, 2, 3, 4, 5, 6], 21)
    # index 4 is A=1, B=1
    assert st.frequencies[4] == F(5, 21)


# ---------------------------------------------------------------------------
# loglik


def test_loglik_uniform():
    st = _stats(QUAD_NODE, [1, 1, 1, 1], 4)
    val = loglik(QUAD_NODE, [F(1, 4), F(1, 4), F(1, 4)], st)
    assert val == pytest.approx(math.log(0.25), abs=1e-12)


def test_loglik_saturated_reaches_entropy_bound():
    st = _stats(QUAD_NODE, [2, 3, 4, 1], 10)
    w = [F(2, 10), F(3, 10), F(4, 10)]
    bound = sum(float(f) * math.log(float(f)) for f in st.frequencies)
    assert loglik(QUAD_NODE, w, st) == pytest.approx(bound, abs=1e-12)


def test_loglik_gibbs_bound():
    rng = random.Random(11)
    st = _stats(QUAD_NODE, [2, 3, 4, 1], 10)
    bound = sum(float(f) * math.log(float(f)) for f in st.frequencies)
    for _ in range(100):
        draws = [rng.random() + 0.01 for _ in range(4)]
        tot = sum(draws)
        w = [d / tot for d in draws[:3]]
        assert loglik(QUAD_NODE, w, st) <= bound + 1e-12


def test_loglik_zero_prob_observed_state_raises():
    st = _stats(BINARY_NODE, [3, 1], 4)
    with pytest.raises(ValueError):
        loglik(BINARY_NODE, [1.0], st)


def test_loglik_zero_freq_state_ignored():
    st = _stats(BINARY_NODE, [4, 0], 4)
    assert loglik(BINARY_NODE, [1.0], st) == pytest.approx(0.0)


# ---------------------------------------------------------------------------
# em_fit


def test_em_hidden_free_hits_relative_frequencies():
    st = _stats(QUAD_NODE, [2, 3, 4, 1], 10)
    fit = em_fit(QUAD_NODE, st, restarts=1, seed=0)
    assert fit.converged
    assert fit.residual < 1e-12
    bound = sum(float(f) * math.log(float(f)) for f in st.frequencies)
    assert fit.loglik == pytest.approx(bound, abs=1e-12)


def test_em_naive_bayes_mixed_marginal():
    net = naive_bayes_network(2, [2])
    st = _stats(net, [3, 1], 4)
    fit = em_fit(net, st, restarts=5, seed=0)
    target = 0.75 * math.log(0.75) + 0.25 * math.log(0.25)
    assert fit.loglik == pytest.approx(target, abs=1e-10)
    assert fit.residual < 1e-8
    theta = predicted_distribution(net, fit.w_ml)
    assert theta[0] == pytest.approx(0.75, abs=1e-8)


def test_em_restart_count_and_optima():
    net = naive_bayes_network(2, [2])
    st = _stats(net, [3, 1], 4)
    fit = em_fit(net, st, restarts=4, seed=2)
    assert fit.restarts_used == 4
    assert len(fit.optima) == 4
    assert fit.loglik == max(o.loglik for o in fit.optima)


def test_em_interior_iterates():
    net = naive_bayes_network(2, [2, 2])
    st = _stats(net, [9, 1, 1, 1], 12)
    fit = em_fit(net, st, restarts=3, seed=0)
    space = build_parameter_space(net)
    for block in space.blocks:
        free = [fit.w_ml[block.start + k] for k in range(block.states - 1)]
        assert all(v > 0 for v in free)
        assert sum(free) < 1
    assert math.isfinite(fit.loglik)


def test_em_generate_and_refit():
    net = naive_bayes_network(2, [2, 2])
    space = build_parameter_space(net)
    rng = random.Random(5)
    for draw in range(20):
        w = []
        for block in space.blocks:
            draws = [rng.randint(2, 30) for _ in range(block.states)]
            tot = sum(draws)
            w.extend(F(k, tot) for k in draws[: block.states - 1])
        dist = predicted_distribution(net, w)
        counts = [round(p * 2000) for p in dist]
        counts[0] += 2000 - sum(counts)
        st = _stats(net, counts, 2000)
        generator = loglik(net, w, st)
        fit = em_fit(net, st, restarts=4, seed=draw)
        assert fit.loglik >= generator - 1e-9


def test_em_jobs_deterministic():
    net = naive_bayes_network(2, [2, 2])
    st = _stats(net, [5, 2, 2, 3], 12)
    serial = em_fit(net, st, restarts=6, seed=3, jobs=1)
    parallel = em_fit(net, st, restarts=6, seed=3, jobs=2)
    assert serial.w_ml == parallel.w_ml
    assert serial.loglik == parallel.loglik


def test_em_rejects_zero_restarts():
    st = _stats(BINARY_NODE, [3, 1], 4)
    with pytest.raises(ValueError):
        em_fit(BINARY_NODE, st, restarts=0)


# ---------------------------------------------------------------------------
# bic


def test_bic_hidden_free_binary():
    st = _stats(BINARY_NODE, [3, 1], 4)
    expected = 4 * (0.75 * math.log(0.75) + 0.25 * math.log(0.25)) - 0.5 * math.log(4)
    assert bic_score(BINARY_NODE, st) == pytest.approx(expected, abs=1e-9)


def test_bic_penalty_scales_with_sample_size():
    small = _stats(BINARY_NODE, [3, 1], 4)
    large = _stats(BINARY_NODE, [300, 100], 400)
    r_small = bic_report(BINARY_NODE, small)
    r_large = bic_report(BINARY_NODE, large)
    assert r_small["penalty"] == pytest.approx(-0.5 * math.log(4))
    assert r_large["penalty"] == pytest.approx(-0.5 * math.log(400))
    assert r_small["loglik"] == pytest.approx(r_large["loglik"], abs=1e-9)


def test_bic_uses_effective_dimension():
    # 3:2,2,4 has 17 raw parameters but effective dimension 14
    net = naive_bayes_network(3, [2, 2, 4])
    counts = [2] * 16
    st = _stats(net, counts, 32)
    report = bic_report(net, st, restarts=2, seed=0)
    assert report["standard_dimension"] == 17
    assert report["effective_dimension"] == 14
    assert report["penalty"] == pytest.approx(-7 * math.log(32))


def test_bic_decomposes():
    st = _stats(BINARY_NODE, [7, 3], 10)
    report = bic_report(BINARY_NODE, st)
    assert report["score"] == pytest.approx(
        report["data_loglik"] + report["penalty"], abs=1e-12
    )
    assert report["data_loglik"] == pytest.approx(
        report["sample_size"] * report["loglik"], abs=1e-12
    )
