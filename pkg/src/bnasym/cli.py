"""Command-line front end.

Subcommands wrap the library modules one-to-one; every run prints a
single report (JSON or flat text) and exits 0 on success, 2 on bad
input, 3 when a computation cannot be completed.  regen-tables rebuilds
the two bundled reference tables from the fixture corpus and diffs them
against the expected values.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import __version__
from .algebra import SparsePoly, poly_parse
from .dimension import effective_dimension, search_degenerate
from .likelihood import (
    DEFAULT_RESTARTS,
    bic_report,
    load_statistics_file,
)
from .network import NetworkStructure, parse_network
from .rlct import DEFAULT_MAX_DEPTH, RlctCache, numeric_lambda_oracle, rlct
from .singular import (
    AsymptoticScore,
    UnresolvedScore,
    asymptotic_score,
    classify_statistics,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3


class InputError(Exception):
    """Bad file, bad syntax, bad argument values."""


class ComputeError(Exception):
    """The computation could not produce a result."""

    def __init__(self, message: str, payload: Optional[Mapping[str, object]] = None):
        super().__init__(message)
        self.payload = dict(payload or {})


def _fixture_dir() -> str:
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


def _read_file(path: str) -> str:
    try:
        with open(path, "r") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load_net(path: str) -> NetworkStructure:
    text = _read_file(path)
    try:
        return parse_network(text)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"bad network file {path}: {exc}") from exc


def _load_stats(path: str, net: NetworkStructure):
    _read_file(path)
    try:
        return load_statistics_file(path, net)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"bad statistics file {path}: {exc}") from exc


def _load_anchors(path: str) -> List[Dict[str, Fraction]]:
    text = _read_file(path)
    try:
        raw = json.loads(text)
        anchors = raw["anchors"] if isinstance(raw, dict) else raw
        out = []
        for a in anchors:
            out.append({k: Fraction(v) for k, v in a.items()})
        if not out:
            raise ValueError("no anchors listed")
        return out
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"bad anchor file {path}: {exc}") from exc


def _digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:12]


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, SparsePoly):
        from .algebra import poly_render

        return poly_render(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float):
        return value
    return value


def _flatten(obj, prefix: str, lines: List[str]) -> None:
    if isinstance(obj, dict):
        for k in obj:
            _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k), lines)
    elif isinstance(obj, list):
        if not obj:
            lines.append(f"{prefix}: []")
        for i, v in enumerate(obj):
            _flatten(v, f"{prefix}[{i}]", lines)
    else:
        lines.append(f"{prefix}: {obj}")


def _emit(report: Mapping[str, object], fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(report, sort_keys=True))
    else:
        lines: List[str] = []
        _flatten(dict(report), "", lines)
        print("\n".join(lines))


def _emit_error(message: str, code: int, fmt: str, payload=None) -> int:
    obj: Dict[str, object] = {"error": message, "exit_code": code}
    if payload:
        obj.update(_jsonable(payload))
    print(json.dumps(obj, sort_keys=True), file=sys.stderr)
    return code


def _report(command: str, ns, inputs: Mapping[str, str], result, t0: float):
    return {
        "command": command,
        "inputs": {p: _digest(p) for p in inputs},
        "seed": ns.seed,
        "version": __version__,
        "elapsed_ms": int((time.time() - t0) * 1000),
        "result": _jsonable(result),
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_dim(ns) -> Tuple[int, Mapping[str, object]]:
    net = _load_net(ns.network)
    rep = effective_dimension(
        net, seed=ns.seed, trials=ns.trials, decompose=not ns.no_decompose
    )
    result = {
        "de": rep.effective_dimension,
        "ds": rep.standard_dimension,
        "dc": rep.joint_dimension,
        "degenerate": rep.degenerate,
        "decomposed": rep.decomposed,
        "neighborhoods": [
            {
                "nodes": list(nb.nodes),
                "local_params": nb.local_param_count,
                "local_de": nb.local_effective_dimension,
                "drop": nb.drop,
            }
            for nb in rep.neighborhoods
        ],
    }
    return EXIT_OK, result


def cmd_search(ns) -> Tuple[int, Mapping[str, object]]:
    if ns.max_states < ns.min_states:
        raise InputError("--max-states must be at least --min-states")
    hidden_lo = ns.min_hidden
    hidden_hi = ns.max_hidden if ns.max_hidden is not None else ns.max_states
    report = search_degenerate(
        range(hidden_lo, hidden_hi + 1),
        [ns.features],
        range(ns.min_states, ns.max_states + 1),
        seed=ns.seed,
        trials=ns.trials,
        jobs=ns.jobs,
    )
    result = {
        "models_evaluated": len(report.models),
        "degenerate_count": len(report.degenerate_models),
        "degenerate": [
            {
                "model": f"{m.hidden_states}:"
                + ",".join(str(s) for s in m.feature_states),
                "de": m.effective_dimension,
                "ds": m.standard_dimension,
                "dc": m.joint_dimension,
            }
            for m in report.degenerate_models
        ],
    }
    return EXIT_OK, result


def cmd_classify(ns) -> Tuple[int, Mapping[str, object]]:
    net = _load_net(ns.network)
    stats = _load_stats(ns.statistics, net)
    cls = classify_statistics(
        net,
        stats,
        trials=ns.trials,
        seed=ns.seed,
        restarts=ns.restarts,
        jobs=ns.jobs,
    )
    result = {
        "class": cls.kind,
        "rank_at_ml": cls.rank_at_ml,
        "regular_rank": cls.regular_rank,
        "ml_dim": cls.ml_dim,
        "reliable": cls.reliable,
        "rank_exact": cls.rank_exact,
        "anchor": None if cls.anchor is None else [str(c) for c in cls.anchor],
    }
    return EXIT_OK, result


def cmd_asymscore(ns) -> Tuple[int, Mapping[str, object]]:
    net = _load_net(ns.network)
    stats = _load_stats(ns.statistics, net)
    anchors = _load_anchors(ns.anchor) if ns.anchor else None
    cls, score = asymptotic_score(
        net,
        stats,
        candidate_points=anchors,
        seed=ns.seed,
        restarts=ns.restarts,
        max_blowup_depth=ns.max_blowup_depth,
        jobs=ns.jobs,
    )
    base = {
        "class": cls.kind,
        "rank_at_ml": cls.rank_at_ml,
        "regular_rank": cls.regular_rank,
    }
    if isinstance(score, UnresolvedScore):
        payload = dict(base)
        payload.update(
            {
                "unresolved": True,
                "reason": score.reason,
                "anchors_tried": score.anchors_tried,
                "oracle": _jsonable(score.oracle) if score.oracle else None,
            }
        )
        raise ComputeError("no anchor produced a certified pole", payload)
    result = dict(base)
    result.update(
        {
            "lambda": str(score.lambda_),
            "m": score.m,
            "pole": str(score.pole),
            "formula": score.formula,
        }
    )
    result.update({k: _jsonable(v) for k, v in score.details.items()})
    return EXIT_OK, result


def cmd_rlct(ns) -> Tuple[int, Mapping[str, object]]:
    if bool(ns.poly) == bool(ns.poly_file):
        raise InputError("exactly one of --poly or --poly-file is required")
    text = ns.poly if ns.poly else _read_file(ns.poly_file)
    try:
        p = poly_parse(text)
    except ValueError as exc:
        raise InputError(f"bad polynomial: {exc}") from exc
    cache_path = os.environ.get("BNASYM_CACHE")
    cache = RlctCache(cache_path) if cache_path else None
    res = rlct(
        p,
        method=ns.method,
        max_blowup_depth=ns.max_blowup_depth,
        cache=cache,
        oracle=ns.oracle,
        oracle_seed=ns.seed,
    )
    result = {
        "pole": None if res.pole is None else str(res.pole),
        "multiplicity": res.multiplicity,
        "lambda": None if res.pole is None else str(-res.pole),
        "method": res.method,
        "certificate": _jsonable(dict(res.certificate)),
    }
    if not res.resolved:
        raise ComputeError("pole computation did not resolve", result)
    return EXIT_OK, result


def cmd_score(ns) -> Tuple[int, Mapping[str, object]]:
    net = _load_net(ns.network)
    stats = _load_stats(ns.statistics, net)
    rep = bic_report(
        net,
        stats,
        trials=ns.trials,
        seed=ns.seed,
        restarts=ns.restarts,
        jobs=ns.jobs,
    )
    return EXIT_OK, _jsonable(rep)


# ---------------------------------------------------------------------------
# reference tables

DIMENSION_ROWS: List[Tuple[str, int, int, int]] = [
    ("3:2,2,4", 14, 17, 15),
    ("4:2,3,5", 27, 31, 29),
    ("5:2,3,6", 34, 44, 35),
    ("5:2,4,6", 44, 49, 47),
    ("6:2,4,7", 53, 65, 55),
    ("6:2,5,7", 65, 71, 69),
    ("6:3,3,7", 59, 65, 62),
    ("4:3,3,3", 25, 27, 26),
    ("5:3,4,4", 43, 44, 47),
    ("7:3,5,5", 73, 76, 74),
    ("10:3,7,7", 145, 149, 146),
    ("3:2,2,2,2", 13, 14, 15),
    ("5:2,2,3,3", 33, 34, 35),
    ("6:2,2,2,7", 53, 59, 55),
]

SCORE_ROWS: List[Tuple[str, str, Optional[str], str, int]] = [
    # (label, statistics fixture, anchor fixture, lambda, m)
    ("nb1 regular", "nb1_regular.json", None, "1/2", 1),
    ("nb2 type1", "nb2_type1.json", "nb2_type1_anchor.json", "3/2", 1),
    ("nb2 type2", "nb2_type2.json", "nb2_type2_anchor.json", "3/2", 3),
    ("nb3 regular", "nb3_regular.json", None, "7/2", 1),
    ("nb3 type1", "nb3_type1.json", "nb3_type1_anchor.json", "5/2", 1),
    ("nb3 type2", "nb3_type2.json", "nb3_type2_anchor.json", "2", 1),
    ("nb4 regular", "nb4_regular.json", None, "9/2", 1),
    ("nb4 type1", "nb4_type1.json", "nb4_type1_anchor.json", "7/2", 1),
    ("nb4 type2", "nb4_type2.json", "nb4_type2_anchor.json", "5/2", 1),
    ("nb5 regular", "nb5_regular.json", None, "11/2", 1),
    ("nb5 type1", "nb5_type1.json", "nb5_type1_anchor.json", "9/2", 1),
]

POLY_ROWS: List[Tuple[str, str, int]] = [
    ("pairs_3.txt", "-3/4", 1),
    ("pairs_4.txt", "-1", 1),
    ("pairs_5.txt", "-5/4", 1),
    ("pairs_6.txt", "-3/2", 1),
]


def _fixture(name: str) -> str:
    path = os.path.join(_fixture_dir(), name)
    if not os.path.exists(path):
        raise InputError(f"missing fixture: {name}")
    return path


def _model_fixture_name(label: str) -> str:
    hidden, feats = label.split(":")
    return f"nb_{hidden}_{feats.replace(',', '')}.json"


def cmd_regen_tables(ns) -> Tuple[int, Mapping[str, object]]:
    mismatches: List[str] = []
    dim_rows = []
    for label, de, ds, dc in DIMENSION_ROWS:
        net = _load_net(_fixture(_model_fixture_name(label)))
        rep = effective_dimension(net, seed=ns.seed, trials=ns.trials)
        got = (rep.effective_dimension, rep.standard_dimension, rep.joint_dimension)
        ok = got == (de, ds, dc)
        if not ok:
            mismatches.append(
                f"dimensions {label}: got de={got[0]} ds={got[1]} dc={got[2]}, "
                f"expected de={de} ds={ds} dc={dc}"
            )
        dim_rows.append(
            {
                "model": label,
                "de": got[0],
                "ds": got[1],
                "dc": got[2],
                "expected": {"de": de, "ds": ds, "dc": dc},
                "match": ok,
            }
        )

    score_rows = []
    for label, stats_name, anchor_name, lam, m in SCORE_ROWS:
        net_name = f"nb{label.split()[0][2:]}.json"
        net = _load_net(_fixture(net_name))
        stats = _load_stats(_fixture(stats_name), net)
        anchors = _load_anchors(_fixture(anchor_name)) if anchor_name else None
        cls, score = asymptotic_score(
            net,
            stats,
            candidate_points=anchors,
            seed=ns.seed,
            restarts=ns.restarts,
            max_blowup_depth=ns.max_blowup_depth,
            jobs=ns.jobs,
        )
        if isinstance(score, UnresolvedScore):
            got_lam, got_m = None, None
            ok = False
            mismatches.append(f"scores {label}: unresolved ({score.reason})")
        else:
            got_lam, got_m = str(score.lambda_), score.m
            ok = Fraction(got_lam) == Fraction(lam) and got_m == m
            if not ok:
                mismatches.append(
                    f"scores {label}: got ({got_lam}, {got_m}), expected ({lam}, {m})"
                )
        score_rows.append(
            {
                "row": label,
                "class": cls.kind,
                "lambda": got_lam,
                "m": got_m,
                "expected": {"lambda": lam, "m": m},
                "match": ok,
            }
        )

    poly_rows = []
    for name, pole, m in POLY_ROWS:
        p = poly_parse(_read_file(_fixture(name)))
        res = rlct(p, max_blowup_depth=ns.max_blowup_depth)
        got = (None if res.pole is None else str(res.pole), res.multiplicity)
        ok = res.resolved and Fraction(got[0]) == Fraction(pole) and got[1] == m
        if not ok:
            mismatches.append(
                f"polynomials {name}: got {got}, expected ({pole}, {m})"
            )
        poly_rows.append(
            {
                "polynomial": name,
                "pole": got[0],
                "multiplicity": got[1],
                "expected": {"pole": pole, "multiplicity": m},
                "match": ok,
            }
        )

    result = {
        "dimensions": dim_rows,
        "scores": score_rows,
        "polynomials": poly_rows,
        "mismatches": mismatches,
        "ok": not mismatches,
    }
    return (EXIT_OK if not mismatches else 1), result


# ---------------------------------------------------------------------------
# argument plumbing


def _build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being
    # clobbered by the subparser's default when it re-parses.
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    shared.add_argument(
        "--format", choices=("json", "text"), default=argparse.SUPPRESS
    )
    shared.add_argument("--jobs", type=int, default=argparse.SUPPRESS)

    top = argparse.ArgumentParser(prog="bnasym", parents=[shared])
    sub = top.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("dim", parents=[shared], help="effective dimensionality")
    p.add_argument("network")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--no-decompose", action="store_true")
    p.set_defaults(func=cmd_dim)

    p = sub.add_parser("search", parents=[shared], help="scan a model grid")
    p.add_argument("--features", type=int, required=True)
    p.add_argument("--min-states", type=int, default=2)
    p.add_argument("--max-states", type=int, required=True)
    p.add_argument("--min-hidden", type=int, default=2)
    p.add_argument("--max-hidden", type=int, default=None)
    p.add_argument("--trials", type=int, default=3)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("classify", parents=[shared], help="regular or singular fit")
    p.add_argument("network")
    p.add_argument("statistics")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("asymscore", parents=[shared], help="asymptotic expansion")
    p.add_argument("network")
    p.add_argument("statistics")
    p.add_argument("--anchor", default=None)
    p.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    p.add_argument("--max-blowup-depth", type=int, default=DEFAULT_MAX_DEPTH)
    p.set_defaults(func=cmd_asymscore)

    p = sub.add_parser("rlct", parents=[shared], help="largest pole of a polynomial")
    p.add_argument("--poly", default=None)
    p.add_argument("--poly-file", default=None)
    p.add_argument(
        "--method",
        choices=("auto", "monomial", "newton", "blowup"),
        default="auto",
    )
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--max-blowup-depth", type=int, default=DEFAULT_MAX_DEPTH)
    p.set_defaults(func=cmd_rlct)

    p = sub.add_parser("score", parents=[shared], help="BIC with effective dimension")
    p.add_argument("network")
    p.add_argument("statistics")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("regen-tables", parents=[shared], help="rebuild reference tables")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    p.add_argument("--max-blowup-depth", type=int, default=DEFAULT_MAX_DEPTH)
    p.set_defaults(func=cmd_regen_tables)

    return top


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    seed = getattr(ns, "seed", None)
    ns.seed = 0 if seed is None else seed
    ns.format = getattr(ns, "format", None) or "text"
    ns.jobs = getattr(ns, "jobs", None) or 1
    t0 = time.time()
    try:
        inputs = [
            getattr(ns, name)
            for name in ("network", "statistics", "anchor", "poly_file")
            if getattr(ns, name, None)
        ]
        code, result = ns.func(ns)
        report = _report(ns.subcommand, ns, inputs, result, t0)
        _emit(report, ns.format)
        return code
    except InputError as exc:
        return _emit_error(str(exc), EXIT_INPUT, ns.format)
    except ComputeError as exc:
        return _emit_error(str(exc), EXIT_COMPUTE, ns.format, exc.payload)


if __name__ == "__main__":
    sys.exit(main())
