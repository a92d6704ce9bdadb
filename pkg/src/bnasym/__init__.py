"""Exact asymptotic model-selection scores for Bayesian networks with hidden variables.

The package computes two things, both in exact rational arithmetic:

* the effective dimensionality of a discrete Bayesian network with hidden
  nodes, via the exact rank of the parameter-to-joint-distribution Jacobian,
  with a Markov-neighborhood decomposition for large networks, and
* asymptotic marginal-likelihood coefficients (lambda, m) for singular
  statistics, via pole analysis of residual polynomials (monomial formula,
  Newton-polyhedron geometry, bounded coordinate blow-ups, and a numeric
  scaling oracle as a cross-check).

See the README for the CLI surface and file formats.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .algebra import (
    SparsePoly,
    make_poly,
    poly_parse,
    poly_render,
)
from .network import (
    NetworkStructure,
    load_network,
    naive_bayes_network,
    parse_network,
)
from .jacobian import (
    build_jacobian,
    evaluate_jacobian,
    rank_at_point,
    regular_rank,
)
from .dimension import (
    DimensionReport,
    SearchReport,
    effective_dimension,
    search_degenerate,
)
from .likelihood import (
    SufficientStatistics,
    bic_report,
    bic_score,
    em_fit,
    load_statistics,
    load_statistics_file,
    loglik,
)
from .rlct import PoleResult, RlctCache, numeric_lambda_oracle, rlct
from .singular import (
    AsymptoticScore,
    StatisticsClass,
    UnresolvedScore,
    asymptotic_score,
    classify_statistics,
    find_anchor_points,
    regular_score,
    residual_polynomial,
    singular_score,
)

__all__ = [
    "__version__",
    "SparsePoly",
    "make_poly",
    "poly_parse",
    "poly_render",
    "NetworkStructure",
    "load_network",
    "naive_bayes_network",
    "parse_network",
    "build_jacobian",
    "evaluate_jacobian",
    "rank_at_point",
    "regular_rank",
    "DimensionReport",
    "SearchReport",
    "effective_dimension",
    "search_degenerate",
    "SufficientStatistics",
    "bic_report",
    "bic_score",
    "em_fit",
    "load_statistics",
    "load_statistics_file",
    "loglik",
    "PoleResult",
    "RlctCache",
    "numeric_lambda_oracle",
    "rlct",
    "AsymptoticScore",
    "StatisticsClass",
    "UnresolvedScore",
    "asymptotic_score",
    "classify_statistics",
    "find_anchor_points",
    "regular_score",
    "residual_polynomial",
    "singular_score",
]
