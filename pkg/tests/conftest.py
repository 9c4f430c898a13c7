import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from detmpc.graph import Graph, build_graph

settings.register_profile("detmpc", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("detmpc")


@st.composite
def graphs(draw, min_nodes: int = 0, max_nodes: int = 10, min_edges: int = 0) -> Graph:
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, min_size=min(min_edges, len(pairs)))) if pairs else []
    return build_graph(chosen, n)


def nx_graph(G: nx.Graph) -> Graph:
    G = nx.convert_node_labels_to_integers(G)
    return build_graph(list(G.edges()), G.number_of_nodes())


@pytest.fixture
def small_named():
    return {
        "P4": nx_graph(nx.path_graph(4)),
        "C5": nx_graph(nx.cycle_graph(5)),
        "K4": nx_graph(nx.complete_graph(4)),
        "star5": nx_graph(nx.star_graph(5)),
        "grid": nx_graph(nx.grid_2d_graph(4, 4)),
    }


def seeded_rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    """One result line per acceptance criterion, echoed again in the terminal summary."""
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
