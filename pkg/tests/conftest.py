import numpy as np
import pytest
import scipy.sparse as sp

from hardygraph.graph import WeightedGraph

ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail=""):
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_graph(rng, n, killing=True, measure=True):
    """Connected graph: a random spanning tree plus extra edges, random weights.

    With ``killing`` at least one vertex carries ``c > 0`` so the spectrum is gapped.
    """
    edges = {}
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges[(u, v)] = rng.uniform(0.5, 2.0)
    for _ in range(int(rng.integers(0, 2 * n + 1))):
        u, v = sorted(int(x) for x in rng.choice(n, 2, replace=False)) if n > 1 else (0, 0)
        if u != v:
            edges[(u, v)] = rng.uniform(0.5, 2.0)
    if edges:
        ij = np.array(list(edges))
        w = np.array(list(edges.values()))
        b = sp.coo_matrix((np.r_[w, w], (np.r_[ij[:, 0], ij[:, 1]], np.r_[ij[:, 1], ij[:, 0]])), shape=(n, n))
    else:
        b = sp.csr_matrix((n, n))
    c = np.zeros(n)
    if killing:
        hit = rng.choice(n, size=max(1, n // 5), replace=False)
        c[hit] = rng.uniform(0.1, 2.0, hit.size)
    m = rng.uniform(0.5, 2.0, n) if measure else np.ones(n)
    return WeightedGraph(tuple(f"v{i}" for i in range(n)), b.tocsr(), c, m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
