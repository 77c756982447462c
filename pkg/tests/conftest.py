import sys
import math

import numpy as np
import pytest

from conforma.catalog import build_entry
from conforma.dsl import parse_chart

PERTURBED_GRAPH = """\
chart perturbed_graph
ambient flat1 dim 4
vars u1 in [-0.4, 0.4], u2 in [-0.4, 0.4], u3 in [-0.4, 0.4]
x1 = u1^2 + 0.3*u2^3
x2 = u1
x3 = u2
x4 = u3
"""


def graph_chart(seed: int, n: int = 3):
    """Spacelike graph x = (f(u), u) with small random polynomial f."""
    rng = np.random.default_rng(seed)
    names = [f"u{i + 1}" for i in range(n)]
    c = rng.uniform(0.1, 0.3, size=6)
    f = (f"{c[0]:.6f}*u1^2 + {c[1]:.6f}*u1*u2 - {c[2]:.6f}*u2^2 + {c[3]:.6f}*u1^3"
         f" + {c[4]:.6f}*sin(u{n})*u2 + {c[5]:.6f}*cosh(u1)*u{n}^2")
    lines = [f"chart graph{seed}", f"ambient flat1 dim {n + 1}",
             "vars " + ", ".join(f"{v} in [-0.4, 0.4]" for v in names), f"x1 = {f}"]
    lines += [f"x{i + 2} = {v}" for i, v in enumerate(names)]
    return parse_chart("\n".join(lines) + "\n")


@pytest.fixture(scope="session")
def perturbed_graph():
    return parse_chart(PERTURBED_GRAPH)


@pytest.fixture(scope="session")
def ex1():
    return build_entry("ex1", n=3, k=1, a=1.5)


@pytest.fixture(scope="session")
def ex2():
    return build_entry("ex2", n=3, k=1, a=1.0)


@pytest.fixture(scope="session")
def ex4():
    return build_entry("ex4", n=3, p=1, q=1, a=math.sqrt(2.0))


@pytest.fixture(scope="session")
def ex6():
    return build_entry("ex6", n=4, k=3, r=2.0, lam=0.0)


# realized de Sitter instance: lambda is the one admissible value for (n, k, r) = (4, 3, 1)
EX5_LAMBDA = 0.7216878364870323


@pytest.fixture(scope="session")
def ex5():
    return build_entry("ex5", n=4, k=3, r=1.0, lam=EX5_LAMBDA)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
