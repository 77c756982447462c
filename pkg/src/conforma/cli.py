"""Command-line front end: ``conforma <command> [flags]``."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, ConformaError
from .report import COMMANDS, RunConfig, canonical_json, error_report, load_chart, load_config_file, run

_HELP = {
    "check": "isoparametric verdicts and family classification per lambda",
    "identities": "residuals of the structure identities at sample points",
    "invariants": "per-point dump of the conformal invariants",
    "catalog": "build a catalog entry, compare against its closed forms or emit its chart",
    "probe": "drift of the invariants under a dilation and a Lorentz boost",
    "theorem1": "r_D > 2 implies constant B eigenvalues, over a lambda grid",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conforma", description="Conformal invariants of spacelike hypersurfaces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HELP[name], argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file with the same keys as the flags")
        p.add_argument("--chart", help="chart file in the immersion format")
        p.add_argument("--catalog", "--family", dest="catalog", help="catalog family ex1..ex6")
        for key in ("n", "k", "p", "q"):
            p.add_argument(f"--{key}", type=int)
        p.add_argument("--a", type=float)
        p.add_argument("--r", type=float)
        p.add_argument("--lam", type=float, help="construction lambda for ex5/ex6")
        p.add_argument("--lambda", dest="lambda", help="comma-separated lambda list")
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="write the report here instead of stdout")
        if name == "probe":
            p.add_argument("--rho", type=float)
            p.add_argument("--angle", type=float)
        if name == "catalog":
            p.add_argument("--emit", action="store_true", help="print the chart source only")
    return parser


def main(argv=None) -> int:
    try:
        args = vars(build_parser().parse_args(argv))
        command = args.pop("command")
        out = args.pop("out", None)
        data = load_config_file(args.pop("config")) if "config" in args else {}
        data.update(args)  # flags override the config file
        config = RunConfig.from_mapping(command, data)
        if config.emit:
            chart, _ = load_chart(config)
            text = chart.source
            code = 0
        else:
            report, code = run(config)
            text = canonical_json(report)
        if out:
            try:
                with open(out, "w", newline="\n") as fh:
                    fh.write(text)
            except OSError as exc:
                raise ConfigError(f"cannot write report: {exc}", path=out) from None
        else:
            sys.stdout.write(text)
        return code
    except ConformaError as exc:
        sys.stderr.write(canonical_json(error_report(exc)))
        return 1


if __name__ == "__main__":
    sys.exit(main())
