import math

import numpy as np
import pytest

from nbdist.graph_core import Graph, complete_graph, cycle_graph, path_graph


@pytest.fixture
def triangle():
    return cycle_graph(3)


@pytest.fixture
def k4():
    return complete_graph(4)


@pytest.fixture
def p5():
    return path_graph(5)


def random_simple_graph(rng, n, p):
    iu, ju = np.triu_indices(n, 1)
    mask = rng.random(iu.size) < p
    return Graph.from_edges(n, zip(iu[mask], ju[mask]))


def exact_dnbd(f1, f2):
    """d-NBD by integrating the piecewise-constant difference cell by cell
    over the breakpoint grid of both step functions."""
    rs = sorted({0.0, 1.0, *map(float, f1.magnitudes), *map(float, f2.magnitudes)})
    ts = sorted({0.0, math.pi, *map(float, f1.arguments), *map(float, f2.arguments)})
    total = 0.0
    for a, b in zip(rs, rs[1:]):
        for c, d in zip(ts, ts[1:]):
            r, t = (a + b) / 2, (c + d) / 2
            total += (f1(r, t) - f2(r, t)) ** 2 * (b - a) * (d - c)
    return math.sqrt(total) / math.pi


def match_multisets(a, b, tol):
    """Greedy nearest matching; returns max pairing error or inf on size mismatch."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        return math.inf
    worst = 0.0
    for z in a:
        j = min(range(len(b)), key=lambda i: abs(b[i] - z))
        worst = max(worst, abs(b[j] - z))
        b.pop(j)
    return worst


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
