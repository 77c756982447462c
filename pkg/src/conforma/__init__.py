"""Conformal invariants of spacelike hypersurfaces in Lorentzian space forms."""

from .ambient import AmbientForm, inner_s, space_form_residual
from .catalog import CatalogEntry, build_entry, oracle_eigenvalues, solve_inner_hypersurface
from .conformal import ConformalData, analyze, identity_suite, invariance_probe, invariants_at
from .dsl import ChartImmersion, format_chart, parse_chart, parse_expression
from .errors import ConformaError
from .isoparametric import Tolerances, Verdict, check, check_many, classify, sample_points, theorem1_crosscheck
from .shape import FundamentalForms, fundamental_forms, induced_metric, second_form, unit_normal

__all__ = [
    "AmbientForm", "CatalogEntry", "ChartImmersion", "ConformaError", "ConformalData",
    "FundamentalForms", "Tolerances", "Verdict", "analyze", "build_entry", "check",
    "check_many", "classify", "format_chart", "fundamental_forms", "identity_suite",
    "induced_metric", "inner_s", "invariance_probe", "invariants_at", "oracle_eigenvalues",
    "parse_chart", "parse_expression", "sample_points", "second_form",
    "solve_inner_hypersurface", "space_form_residual", "theorem1_crosscheck", "unit_normal",
]
