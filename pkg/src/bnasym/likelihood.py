"""Sufficient statistics, log-likelihood, EM fitting, and the BIC score.

Observed data enters as per-joint-state counts.  Counts are kept as exact
rationals (frequencies with denominator equal to the sample size) so the
singular-analysis layer can reason about them symbolically; the EM loop
itself runs in floating point for speed, and the fitted point carries a
``residual`` field quantifying how closely the fitted distribution matches
the data frequencies.
"""

from __future__ import annotations

import json
import math
import multiprocessing
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .dimension import derived_seed, effective_dimension
from .network import (
    NetworkStructure,
    ParameterSpace,
    _rank,
    build_parameter_space,
    enumerate_hidden_states,
    enumerate_joint_states,
)

PARAM_FLOOR = 1e-12
DEFAULT_RESTARTS = 20
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10000


# ---------------------------------------------------------------------------
# sufficient statistics


@dataclass(frozen=True)
class SufficientStatistics:
    """Normalized joint-state counts, exact.

    ``frequencies[i]`` is the observed relative frequency of the i-th
    observable joint state (declaration order, last coordinate fastest),
    a Fraction with denominator dividing ``sample_size``.
    """

    frequencies: Tuple[Fraction, ...]
    sample_size: int

    def __post_init__(self) -> None:
        if self.sample_size <= 0:
            raise ValueError("sample size must be positive")
        if any(f < 0 for f in self.frequencies):
            raise ValueError("negative frequency")
        if sum(self.frequencies) != 1:
            raise ValueError("frequencies must sum to one")

    @property
    def counts(self) -> Tuple[Fraction, ...]:
        return tuple(f * self.sample_size for f in self.frequencies)


def load_statistics(
    text: Union[str, bytes, Mapping], net: NetworkStructure
) -> SufficientStatistics:
    """Parse a ``{"counts": [...], "N": n}`` document against ``net``.

    Counts follow the lexicographic observable-state order of the network
    (declaration order of observed nodes, last coordinate fastest) and
    must be nonnegative integers summing to N.
    """
    if isinstance(text, (str, bytes)):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"statistics file is not valid JSON: {exc}") from exc
    else:
        data = text
    if not isinstance(data, Mapping):
        raise ValueError("statistics document must be a JSON object")
    if "counts" not in data or "N" not in data:
        raise ValueError("statistics document needs 'counts' and 'N'")
    raw_n = data["N"]
    if not isinstance(raw_n, int) or isinstance(raw_n, bool) or raw_n <= 0:
        raise ValueError("'N' must be a positive integer")
    raw_counts = data["counts"]
    if not isinstance(raw_counts, (list, tuple)):
        raise ValueError("'counts' must be an array")
    n_states = 1
    for node in net.observed:
        n_states *= node.states
    if len(raw_counts) != n_states:
        raise ValueError(
            f"expected {n_states} counts for this network, got {len(raw_counts)}"
        )
    counts: List[Fraction] = []
    for i, c in enumerate(raw_counts):
        if isinstance(c, bool) or not isinstance(c, (int, str)):
            raise ValueError(f"count {i} is not an integer or rational string")
        try:
            value = Fraction(c)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"count {i}: {exc}") from exc
        if value < 0:
            raise ValueError(f"count {i} is negative")
        counts.append(value)
    total = sum(counts)
    if total == 0:
        raise ValueError("all counts are zero")
    if total != raw_n:
        raise ValueError(f"counts sum to {total}, expected N = {raw_n}")
    return SufficientStatistics(
        tuple(c / raw_n for c in counts), raw_n
    )


def load_statistics_file(path: str, net: NetworkStructure) -> SufficientStatistics:
    with open(path, "r", encoding="utf-8") as fh:
        return load_statistics(fh.read(), net)


# ---------------------------------------------------------------------------
# table layout shared by the likelihood and EM routines
#
# Conditional probabilities live in one flat vector holding ALL states of
# every (node, parent-config) block, complements included; this makes
# normalization and expected-count accumulation plain array operations.
# The free-parameter vector seen by the rest of the package is the same
# thing with each block's last entry dropped.


@dataclass
class _Tables:
    net: NetworkStructure
    space: ParameterSpace
    full_starts: Tuple[int, ...]  # per block, offset into the full vector
    full_size: int
    obs_states: Tuple[Tuple[int, ...], ...]
    n_hidden_states: int
    index: np.ndarray  # (n_obs * n_hid, n_nodes) flat cpt positions
    start_arr: np.ndarray  # block starts, for reduceat
    size_arr: np.ndarray  # block sizes
    block_of_entry: np.ndarray  # block ordinal for every full-vector slot


def _build_tables(net: NetworkStructure) -> _Tables:
    space = build_parameter_space(net)
    starts: List[int] = []
    off = 0
    for block in space.blocks:
        starts.append(off)
        off += block.states
    block_pos = {
        (b.node_id, b.config_index): i for i, b in enumerate(space.blocks)
    }
    obs = enumerate_joint_states(net)
    hid = enumerate_hidden_states(net)
    parent_cards = {
        node.id: [net.node(p).states for p in net.parents[node.id]]
        for node in net.nodes
    }
    rows: List[List[int]] = []
    for x in obs:
        for h in hid:
            values: Dict[str, int] = {}
            xi = iter(x)
            hi = iter(h)
            for node in net.nodes:
                values[node.id] = next(hi) if node.hidden else next(xi)
            row = []
            for node in net.nodes:
                cfg = _rank(
                    [values[p] for p in net.parents[node.id]],
                    parent_cards[node.id],
                )
                pos = block_pos[(node.id, cfg)]
                row.append(starts[pos] + values[node.id])
            rows.append(row)
    index = np.asarray(rows, dtype=np.int64)
    start_arr = np.asarray(starts, dtype=np.int64)
    size_arr = np.asarray([b.states for b in space.blocks], dtype=np.int64)
    block_of_entry = np.repeat(np.arange(len(space.blocks)), size_arr)
    return _Tables(
        net,
        space,
        tuple(starts),
        off,
        tuple(obs),
        max(len(hid), 1),
        index,
        start_arr,
        size_arr,
        block_of_entry,
    )


def _full_from_free(tab: _Tables, w: Sequence) -> np.ndarray:
    if len(w) != tab.space.size:
        raise ValueError(
            f"parameter vector has {len(w)} entries, expected {tab.space.size}"
        )
    full = np.empty(tab.full_size, dtype=np.float64)
    for block, start in zip(tab.space.blocks, tab.full_starts):
        free = [float(w[block.start + k]) for k in range(block.states - 1)]
        full[start : start + block.states - 1] = free
        full[start + block.states - 1] = 1.0 - sum(free)
    return full


def _free_from_full(tab: _Tables, full: np.ndarray) -> Tuple[float, ...]:
    out: List[float] = []
    for block, start in zip(tab.space.blocks, tab.full_starts):
        out.extend(float(v) for v in full[start : start + block.states - 1])
    return tuple(out)


def _joint_rows(tab: _Tables, full: np.ndarray) -> np.ndarray:
    """P(x, h) for every observable state x and hidden completion h."""
    return full[tab.index].prod(axis=1).reshape(len(tab.obs_states), -1)


def _observable(tab: _Tables, full: np.ndarray) -> np.ndarray:
    return _joint_rows(tab, full).sum(axis=1)


def predicted_distribution(net: NetworkStructure, w: Sequence) -> List[float]:
    """Observable joint distribution at a (float) parameter vector."""
    tab = _build_tables(net)
    return [float(v) for v in _observable(tab, _full_from_free(tab, w))]


def loglik(net: NetworkStructure, w: Sequence, stats: SufficientStatistics) -> float:
    """Per-sample log-likelihood sum_x freq_x * ln theta_x(w).

    Multiply by the sample size for the data log-likelihood.  States with
    zero observed frequency contribute nothing, whatever theta does there.
    """
    tab = _build_tables(net)
    theta = _observable(tab, _full_from_free(tab, w))
    total = 0.0
    for f, t in zip(stats.frequencies, theta):
        if f == 0:
            continue
        if t <= 0.0:
            raise ValueError(
                "model assigns nonpositive probability to an observed state"
            )
        total += float(f) * math.log(t)
    return total


# ---------------------------------------------------------------------------
# EM


@dataclass(frozen=True)
class EMOptimum:
    """One restart's converged point."""

    loglik: float
    w: Tuple[float, ...]
    converged: bool
    iterations: int


@dataclass(frozen=True)
class MLResult:
    w_ml: Tuple[float, ...]
    loglik: float
    converged: bool
    restarts_used: int
    residual: float  # max_x |theta_x(w_ml) - freq_x|
    optima: Tuple[EMOptimum, ...]


def _random_full(tab: _Tables, rng: random.Random) -> np.ndarray:
    full = np.empty(tab.full_size, dtype=np.float64)
    for block, start in zip(tab.space.blocks, tab.full_starts):
        draws = [rng.random() + 0.05 for _ in range(block.states)]
        total = sum(draws)
        full[start : start + block.states] = [d / total for d in draws]
    return full


def _normalize_blocks(tab: _Tables, raw: np.ndarray) -> np.ndarray:
    sums = np.add.reduceat(raw, tab.start_arr)
    dead = sums <= 0.0
    if dead.any():
        raw = np.where(dead[tab.block_of_entry], 1.0, raw)
        sums = np.where(dead, tab.size_arr.astype(np.float64), sums)
    full = raw / sums[tab.block_of_entry]
    # floor keeps every iterate strictly interior so ln theta stays finite
    full = np.maximum(full, PARAM_FLOOR)
    return full / np.add.reduceat(full, tab.start_arr)[tab.block_of_entry]


def _em_single(
    tab: _Tables,
    freq: np.ndarray,
    seed: int,
    tol: float,
    max_iter: int,
) -> EMOptimum:
    rng = random.Random(seed)
    full = _normalize_blocks(tab, _random_full(tab, rng))
    n_nodes = tab.index.shape[1]
    prev = -math.inf
    gain_prev = math.inf
    ll = -math.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        rows = _joint_rows(tab, full)
        theta = rows.sum(axis=1)
        ll = float(freq @ np.log(theta))
        assert ll >= prev - 1e-9, "EM log-likelihood decreased"
        gain = ll - prev
        scale = tol * max(1.0, abs(ll))
        if gain <= 5e-16 * max(1.0, abs(ll)):
            # below float resolution; further iterations cannot register
            converged = True
            break
        if gain <= scale:
            # EM gains shrink geometrically near an optimum; estimate the
            # remaining climb by Aitken extrapolation so a slow rate close
            # to 1 cannot fake convergence while far from the top
            rate = gain / gain_prev if gain_prev > 0 else 0.0
            if rate < 1.0 and gain * rate / (1.0 - rate) <= scale:
                converged = True
                break
        gain_prev = gain
        prev = ll
        posterior = rows / theta[:, None]
        weights = (freq[:, None] * posterior).ravel()
        expected = np.bincount(
            tab.index.ravel(),
            weights=np.repeat(weights, n_nodes),
            minlength=tab.full_size,
        )
        full = _normalize_blocks(tab, expected)
    return EMOptimum(ll, _free_from_full(tab, full), converged, iterations)


_WORKER: Optional[Tuple[_Tables, np.ndarray, float, int]] = None


def _init_worker(tab: _Tables, freq: np.ndarray, tol: float, max_iter: int) -> None:
    global _WORKER
    _WORKER = (tab, freq, tol, max_iter)


def _run_restart(seed: int) -> EMOptimum:
    assert _WORKER is not None
    tab, freq, tol, max_iter = _WORKER
    return _em_single(tab, freq, seed, tol, max_iter)


def em_fit(
    net: NetworkStructure,
    stats: SufficientStatistics,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    jobs: int = 1,
) -> MLResult:
    """Maximum-likelihood fit by EM over random restarts.

    Each restart starts from a fresh random interior point with its own
    derived seed, so results are independent of ``jobs`` and of restart
    execution order; the best restart wins, ties broken by lowest
    restart index.
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    tab = _build_tables(net)
    freq = np.array([float(f) for f in stats.frequencies], dtype=np.float64)
    seeds = [derived_seed(seed, f"em:{r}") for r in range(restarts)]
    if jobs > 1:
        with multiprocessing.Pool(
            jobs, initializer=_init_worker, initargs=(tab, freq, tol, max_iter)
        ) as pool:
            optima = pool.map(_run_restart, seeds)
    else:
        optima = [_em_single(tab, freq, s, tol, max_iter) for s in seeds]
    best = max(range(restarts), key=lambda r: (optima[r].loglik, -r))
    w_ml = optima[best].w
    theta = _observable(tab, _full_from_free(tab, w_ml))
    residual = max(
        abs(float(t) - float(f)) for t, f in zip(theta, stats.frequencies)
    )
    return MLResult(
        w_ml,
        optima[best].loglik,
        optima[best].converged,
        restarts,
        residual,
        tuple(optima),
    )


# ---------------------------------------------------------------------------
# BIC


def bic_report(
    net: NetworkStructure,
    stats: SufficientStatistics,
    trials: int = 3,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    jobs: int = 1,
) -> Dict[str, object]:
    """BIC with the effective dimension in the penalty, as a report dict.

    The score decomposes exactly as N * loglik - (de / 2) * ln N; both
    addends are in the report so the total can be recomputed from it.
    """
    fit = em_fit(net, stats, restarts=restarts, seed=seed, jobs=jobs)
    dim = effective_dimension(net, seed=seed, trials=trials)
    n = stats.sample_size
    data_ll = n * fit.loglik
    penalty = -0.5 * dim.effective_dimension * math.log(n)
    return {
        "sample_size": n,
        "loglik": fit.loglik,
        "data_loglik": data_ll,
        "effective_dimension": dim.effective_dimension,
        "standard_dimension": dim.standard_dimension,
        "penalty": penalty,
        "score": data_ll + penalty,
        "converged": fit.converged,
        "residual": fit.residual,
    }


def bic_score(
    net: NetworkStructure,
    stats: SufficientStatistics,
    trials: int = 3,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    jobs: int = 1,
) -> float:
    """N * loglik(w_ml) - (de / 2) * ln N."""
    report = bic_report(
        net, stats, trials=trials, seed=seed, restarts=restarts, jobs=jobs
    )
    return float(report["score"])
