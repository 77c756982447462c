"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class ConformaError(Exception):
    """Base class. ``to_dict`` gives the structured form printed by the CLI."""

    kind = "ConformaError"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.kind, "message": self.message}
        for key, value in self.details.items():
            if hasattr(value, "tolist"):
                value = value.tolist()
            out[key] = value
        return out


class DegenerateEvaluation(ConformaError):
    kind = "DegenerateEvaluation"


class DSLSyntaxError(ConformaError):
    kind = "SyntaxError"

    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        msg = f"line {line}, col {col}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg, line=line, col=col, expected=expected, found=found)
        self.line = line
        self.col = col
        self.expected = expected


class UnboundName(ConformaError):
    kind = "UnboundName"

    def __init__(self, name: str, line: int | None = None, col: int | None = None):
        super().__init__(f"unbound name {name!r}", name=name, line=line, col=col)
        self.name = name


class ArityError(ConformaError):
    kind = "ArityError"

    def __init__(self, fn: str, got: int):
        super().__init__(f"{fn} takes exactly one argument, got {got}", fn=fn, got=got)
        self.fn = fn


class ChartError(ConformaError):
    """Chart file is syntactically fine but semantically inconsistent."""

    kind = "ChartError"


class NotSpacelike(ConformaError):
    kind = "NotSpacelike"


class DegenerateNormal(ConformaError):
    kind = "DegenerateNormal"


class UmbilicPoint(ConformaError):
    kind = "UmbilicPoint"


class ConstraintViolation(ConformaError):
    kind = "ConstraintViolation"

    def __init__(self, param: str, bound: str, value=None):
        super().__init__(f"parameter {param}={value!r} violates {bound}",
                         param=param, bound=bound, value=value)
        self.param = param
        self.bound = bound


class NoRealization(ConformaError):
    kind = "NoRealization"


class EmptyDomain(ConformaError):
    kind = "EmptyDomain"


class TooManyDegeneratePoints(ConformaError):
    kind = "TooManyDegeneratePoints"


class ConfigError(ConformaError):
    kind = "ConfigError"
