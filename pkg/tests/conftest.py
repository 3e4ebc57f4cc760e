import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from pagerank_mixing.graph_gen import Digraph  # noqa: E402

ACCEPTANCE_LINES = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def complete3():
    return Digraph.from_adjacency([[1, 2], [0, 2], [0, 1]])


def random_small_digraph(rng, n, model):
    """Degree sequence with degrees in [2, 5] and a sampled graph."""
    from pagerank_mixing.degree_model import build_degree_sequence
    from pagerank_mixing.graph_gen import sample_graph

    out = rng.integers(2, 6, size=n)
    if model == "DCM":
        seq = build_degree_sequence(out, rng.permutation(out), "DCM")
    else:
        seq = build_degree_sequence(np.minimum(out, n), None, "OCM")
    return seq, sample_graph(seq, int(rng.integers(2**63)))
