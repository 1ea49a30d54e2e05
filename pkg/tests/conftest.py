import numpy as np
import pytest

from multispread import LayerGraph, MultilayerNetwork


def star(n_leaves, directed=False, weight=1.0):
    """Center 0 joined to leaves 1..n_leaves."""
    leaves = np.arange(1, n_leaves + 1)
    return LayerGraph.from_edges(n_leaves + 1, np.zeros(n_leaves, int), leaves, np.full(n_leaves, weight), directed)


def path(n, directed=True):
    return LayerGraph.from_edges(n, np.arange(n - 1), np.arange(1, n), directed=directed)


def net(*layers):
    return MultilayerNetwork(tuple(layers))


@pytest.fixture
def tmp_text(tmp_path):
    """Write ``text`` to a fresh file and return its path."""
    counter = iter(range(10**6))

    def write(text, name=None):
        p = tmp_path / (name or f"f{next(counter)}.txt")
        p.write_text(text)
        return p

    return write


# criterion number -> (passed, detail), filled by the acceptance suite
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
