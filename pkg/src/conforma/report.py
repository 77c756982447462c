"""Run configuration, check execution and canonical JSON reports."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import catalog
from .conformal import IDENTITY_NAMES, analyze, boost, dilation, invariance_probe
from .dsl import ChartImmersion, parse_chart
from .errors import ConfigError, ConformaError
from .isoparametric import Tolerances, check_and_classify, sample_points, theorem1_crosscheck

SCHEMA = "conforma-report/1"
COMMANDS = ("check", "identities", "invariants", "catalog", "probe", "theorem1")
PROBE_TOL = 1e-8
ORACLE_TOL = 1e-8
INVARIANTS_CAP = 50
MIN_SURVIVORS = 0.75

# identities measured with one derivative beyond exact jet data
_FD_IDENTITIES = {"stru1", "codazzi_fd"}
_CATALOG_KEYS = ("n", "k", "p", "q", "a", "r", "lam")


# canonical JSON ------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj, indent: int) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_encode(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, 0) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        return format(obj, ".17g")
    return json.dumps(obj)


def canonical_json(obj) -> str:
    """Sorted keys, 17 significant digits, LF line endings, trailing newline."""
    return _encode(_plain(obj), 0) + "\n"


def source_hash(chart: ChartImmersion) -> str:
    return hashlib.sha256(chart.source.encode()).hexdigest()


# configuration -------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    chart_path: str | None = None
    family: str | None = None
    params: dict = field(default_factory=dict)
    lambdas: list = field(default_factory=lambda: [0.0])
    samples: int = 20
    seed: int = 42
    tolerances: Tolerances = field(default_factory=Tolerances)
    rho: float = 2.0
    angle: float = 0.4
    emit: bool = False

    @classmethod
    def from_mapping(cls, command: str, data: dict) -> "RunConfig":
        """Build from config-file style keys (flags use the same names)."""
        known = {"chart", "catalog", "family", "lambda", "samples", "seed", "tolerances",
                 "rho", "angle", "emit", *_CATALOG_KEYS}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        try:
            tol = Tolerances(**dict(data.get("tolerances") or {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        lambdas = data.get("lambda", [0.0])
        if isinstance(lambdas, str):
            lambdas = [s for s in lambdas.split(",") if s.strip()]
        elif not isinstance(lambdas, (list, tuple)):
            lambdas = [lambdas]
        try:
            lambdas = [float(v) for v in lambdas]
            samples = int(data.get("samples", 20))
            seed = int(data.get("seed", 42))
            rho = float(data.get("rho", 2.0))
            angle = float(data.get("angle", 0.4))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad numeric value: {exc}") from None
        if not lambdas and command in ("check", "theorem1"):
            raise ConfigError("lambda list must be nonempty")
        if samples < 1:
            raise ConfigError("samples must be positive", samples=samples)
        family = data.get("catalog") or data.get("family")
        chart = data.get("chart")
        if (family is None) == (chart is None):
            raise ConfigError("give exactly one of chart or catalog")
        if command == "catalog" and family is None:
            raise ConfigError("the catalog command needs a family")
        params = {k: data[k] for k in _CATALOG_KEYS if data.get(k) is not None}
        return cls(command, chart, family, params, lambdas, samples, seed, tol,
                   rho, angle, bool(data.get("emit", False)))

    def echo(self) -> dict:
        t = self.tolerances
        return {
            "command": self.command,
            "catalog": None if self.family is None else {"family": self.family,
                                                          "params": dict(self.params)},
            "lambda": list(self.lambdas),
            "samples": self.samples,
            "seed": self.seed,
            "tolerances": {"c_tol": t.c_tol, "spread_tol": t.spread_tol,
                           "identity_tol": t.identity_tol, "codazzi_tol": t.codazzi_tol,
                           "cluster_tol": t.cluster_tol},
        }


def load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}", path=path) from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", path=path)
    return data


def load_chart(config: RunConfig):
    """(chart, catalog entry or None)."""
    if config.family is not None:
        entry = catalog.build_entry(config.family, config.params)
        return entry.chart, entry
    try:
        text = Path(config.chart_path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read chart: {exc}", path=config.chart_path) from None
    return parse_chart(text), None


# checks --------------------------------------------------------------------

def _usable(chart, points):
    """Analyze with identities; re-raise the first point error if too few survive."""
    batch = analyze(chart, points, identities=True)
    if len(batch.valid) < MIN_SURVIVORS * len(points):
        first = next(e for e in batch.errors if e is not None)
        first.details.setdefault("survivors", len(batch.valid))
        raise first
    return batch


def _dropped_warning(batch) -> list:
    if not batch.dropped:
        return []
    kinds = sorted({type(e).__name__ for e in batch.errors if e is not None})
    return [{"kind": "dropped-points", "count": batch.dropped, "errors": kinds}]


def _identities(chart, config):
    points = sample_points(chart, config.samples, config.seed)
    batch = _usable(chart, points)
    tol = config.tolerances
    rows, ok = {}, True
    for name in IDENTITY_NAMES:
        values = np.asarray(batch.data.residuals[name], dtype=float)
        worst = float(np.nanmax(values))
        limit = tol.codazzi_tol if name in _FD_IDENTITIES else tol.identity_tol
        passed = worst < limit
        ok = ok and passed
        rows[name] = {"max": worst, "tolerance": limit, "pass": passed}
    return {"identities": rows, "points": len(batch.valid)}, ok, _dropped_warning(batch)


def _invariants(chart, config):
    points = sample_points(chart, min(config.samples, INVARIANTS_CAP), config.seed)
    batch = analyze(chart, points, identities=False)
    table = []
    for k, err in enumerate(batch.errors):
        if err is not None:
            table.append({"index": k, "point": points[k], "error": err.to_dict()})
    if batch.data is not None:
        d = batch.data
        for j, k in enumerate(batch.valid):
            row = {"index": int(k), "point": points[k], "tau": d.tau[j], "H": d.H[j],
                   "eig_A": d.eig_A[j], "eig_B": d.eig_B[j], "C": d.C[j], "kappa": d.kappa[j],
                   "eig_D": {repr(lam): np.linalg.eigvalsh(d.A[j] + lam * d.B[j])
                             for lam in config.lambdas}}
            table.append(row)
    table.sort(key=lambda r: r["index"])
    ok = batch.data is not None
    return {"points": table, "capped_at": INVARIANTS_CAP}, ok, _dropped_warning(batch)


def _check(chart, config):
    verdicts = check_and_classify(chart, config.lambdas, config.samples, config.seed,
                                  config.tolerances)
    ok = all(v.para_blaschke_isoparametric and v.conformal_isoparametric for v in verdicts)
    warnings = []
    if verdicts[0].dropped:
        warnings.append({"kind": "dropped-points", "count": verdicts[0].dropped})
    return {"verdicts": [v.to_dict() for v in verdicts]}, ok, warnings


def _theorem1(chart, config):
    out = theorem1_crosscheck(chart, config.lambdas, config.samples, config.seed,
                              config.tolerances)
    return {"theorem1": out}, out["implication_holds"], []


def _probe(chart, config):
    N = chart.N
    points = sample_points(chart, config.samples, config.seed)
    rows = {
        "dilation": {"rho": config.rho,
                     "drift": invariance_probe(chart, dilation(N, config.rho), points=points)},
        "boost": {"angle": config.angle,
                  "drift": invariance_probe(chart, boost(N, config.angle), points=points)},
    }
    for lam in config.lambdas:
        if lam != 0.0:
            rows[f"boost_lambda_{lam!r}"] = {
                "angle": config.angle, "lambda": lam,
                "drift": invariance_probe(chart, boost(N, config.angle), lam=lam, points=points)}
    ok = all(r["drift"] < PROBE_TOL for r in rows.values())
    return {"probe": rows, "tolerance": PROBE_TOL}, ok, []


def _catalog(chart, entry, config):
    points = sample_points(chart, config.samples, config.seed)
    batch = _usable(chart, points)
    d = batch.data
    out = {"family": entry.family, "params": entry.params,
           "blocks": [list(b) for b in entry.blocks], "notes": entry.notes}
    if entry.realization is not None:
        r = entry.realization
        out["realization"] = {"k": r.k, "p": r.p, "c1": r.c1, "c2": r.c2, "r": r.r,
                              "H": r.H, "R": r.R, "principal": list(r.principal)}
    comparison, ok = [], True
    for lam in config.lambdas:
        oracle = catalog.oracle_eigenvalues(entry, lam)
        err_A = float(np.abs(d.eig_A - oracle["eig_A"]).max())
        err_B = float(np.minimum(np.abs(d.eig_B - oracle["eig_B"]).max(axis=-1),
                                 np.abs(-d.eig_B[:, ::-1] - oracle["eig_B"]).max(axis=-1)).max())
        eig_plus = np.linalg.eigvalsh(d.A + lam * d.B)
        eig_minus = np.linalg.eigvalsh(d.A - lam * d.B)
        err_D = float(np.minimum(np.abs(eig_plus - oracle["eig_D"]).max(axis=-1),
                                 np.abs(eig_minus - oracle["eig_D"]).max(axis=-1)).max())
        c_max = float(np.abs(d.C).max())
        passed = max(err_A, err_B, err_D) < ORACLE_TOL and c_max < config.tolerances.c_tol
        ok = ok and passed
        comparison.append({"lambda": lam, "oracle_eig_A": oracle["eig_A"],
                           "oracle_eig_B": oracle["eig_B"], "oracle_eig_D": oracle["eig_D"],
                           "max_error_A": err_A, "max_error_B": err_B, "max_error_D": err_D,
                           "c_max": c_max, "pass": passed})
    out["oracle_comparison"] = comparison
    out["oracle_tolerance"] = ORACLE_TOL
    out["product_structure_residual"] = catalog.product_structure_residual(entry)
    warnings = _dropped_warning(batch)
    for note in entry.notes:
        warnings.append({"kind": note["kind"], "message": note["message"]})
    return {"catalog": out}, ok, warnings


def run(config: RunConfig) -> tuple[dict, int]:
    """Execute one command; returns (report, exit code 0 or 2).

    Library errors propagate as ConformaError; the CLI maps them to exit 1.
    """
    chart, entry = load_chart(config)
    if config.command == "catalog":
        result, ok, warnings = _catalog(chart, entry, config)
    elif config.command == "identities":
        result, ok, warnings = _identities(chart, config)
    elif config.command == "invariants":
        result, ok, warnings = _invariants(chart, config)
    elif config.command == "check":
        result, ok, warnings = _check(chart, config)
    elif config.command == "theorem1":
        result, ok, warnings = _theorem1(chart, config)
    else:
        result, ok, warnings = _probe(chart, config)
    if entry is not None and config.command != "catalog":
        warnings += [{"kind": n["kind"], "message": n["message"]} for n in entry.notes]
    report = {
        "schema_version": SCHEMA,
        "input": dict(config.echo(), chart_name=chart.name, chart_sha256=source_hash(chart),
                      ambient=chart.ambient.keyword, n=chart.n),
        "results": result,
        "warnings": warnings,
        "status": "pass" if ok else "fail",
    }
    return report, 0 if ok else 2


def error_report(exc: ConformaError) -> dict:
    return {"schema_version": SCHEMA, "error": exc.to_dict()}
