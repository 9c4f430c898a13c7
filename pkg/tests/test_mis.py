import itertools
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given

from detmpc.bench import generate_graph
from detmpc.config import RunConfig
from detmpc.graph import build_graph, class_thresholds, greedy_distance2_coloring, select_heavy_class
from detmpc.hashing import HashFamily
from detmpc.mis import (BoundedNeighborhoods, build_bounded_neighborhoods, find_round_is, is_objective,
                        maximal_independent_set, sparsify_nodes)
from detmpc.oracles import verify_mis

from conftest import graphs, nx_graph


def test_easy_case_jprime_is_j0():
    g = nx_graph(nx.cycle_graph(6))
    cfg = RunConfig(delta="1/2")
    sel = select_heavy_class(g, cfg.delta, "mis")
    out = sparsify_nodes(g, sel, cfg, cfg.new_cluster(), greedy_distance2_coloring(g))
    assert out.kept.tolist() == sel.seed_nodes.tolist() and not out.stages


def test_neighborhood_single_member():
    g = build_graph([(0, 1), (1, 2)], 3)
    cfg = RunConfig(delta="1/2")
    nb = build_bounded_neighborhoods(g, np.array([2]), np.array([1]), cfg, cfg.new_cluster())
    assert nb.of(0).tolist() == [2]


def test_neighborhood_truncates_to_lowest_ids():
    n = 300
    g = nx_graph(nx.star_graph(n - 1))
    cfg = RunConfig(delta="1/8")
    t4 = int(class_thresholds(n, cfg.delta)[4])
    nb = build_bounded_neighborhoods(g, np.arange(1, n), np.array([0]), cfg, cfg.new_cluster())
    assert nb.of(0).tolist() == list(range(1, t4 + 1))
    # truncated members all have degree 1, so the mass is t4 / 1 >= 1/2
    assert sum(Fraction(1, g.degree(int(u))) for u in nb.of(0)) >= Fraction(1, 2)
    assert nb.lemma_failures == []


def _family(labels):
    return HashFamily.for_domain(2, int(labels.max()) + 2, p=RunConfig().field_for(int(labels.max()) + 1))


def test_isolated_candidate_always_joins():
    g = build_graph([(0, 1)], 2)
    cfg = RunConfig()
    labels = greedy_distance2_coloring(g)
    nb = build_bounded_neighborhoods(g, np.array([1]), np.array([0]), cfg, cfg.new_cluster())
    obj = is_objective(g, np.array([1]), nb, labels, _family(labels))
    assert obj.winners(_family(labels).all_seeds())[:, 1].all()


@pytest.mark.parametrize("G", [nx.path_graph(2), nx.cycle_graph(5)])
def test_every_seed_gives_independent_set(G):
    g = nx_graph(G)
    cfg = RunConfig()
    labels = greedy_distance2_coloring(g)
    nodes = np.arange(g.n)
    nb = build_bounded_neighborhoods(g, nodes, nodes, cfg, cfg.new_cluster())
    win = is_objective(g, nodes, nb, labels, _family(labels)).winners(_family(labels).all_seeds())
    a, b = g.edges[:, 0], g.edges[:, 1]
    assert not (win[:, a] & win[:, b]).any()
    assert (win.sum(axis=1) >= 1).all()
    if g.n == 2:
        assert (win.sum(axis=1) == 1).all()


def test_edgeless():
    res = maximal_independent_set(build_graph([], 5))
    assert res.nodes.tolist() == [0, 1, 2, 3, 4] and res.iterations == 0


def test_star():
    g = nx_graph(nx.star_graph(5))
    got = maximal_independent_set(g).nodes.tolist()
    assert got in ([0], [1, 2, 3, 4, 5])


def _all_maximal_is(g):
    out = []
    for r in range(g.n + 1):
        for s in itertools.combinations(range(g.n), r):
            if verify_mis(g, list(s)).ok:
                out.append(list(s))
    return out


def test_c5_size_two():
    g = nx_graph(nx.cycle_graph(5))
    got = maximal_independent_set(g, RunConfig(delta="1/2")).nodes.tolist()
    assert len(got) == 2 and got in _all_maximal_is(g)


@given(graphs(max_nodes=14))
def test_mis_valid_and_certified(g):
    res = maximal_independent_set(g, RunConfig(delta="1/2"))
    assert verify_mis(g, res.nodes).ok
    assert all(c.holds for c in res.certificates)


def test_blowup_stage_mass_recomputed_exactly():
    g = generate_graph("blowup", {"n": 12, "p": 0.5, "t": 30}, 1)
    cfg = RunConfig(delta="1/8", space=1 << 14)
    sel = select_heavy_class(g, cfg.delta, "mis")
    assert sel.i > 4
    labels = greedy_distance2_coloring(g)
    out = sparsify_nodes(g, sel, cfg, cfg.new_cluster(), labels)
    assert len(out.stages) == sel.i - 4
    kept = np.zeros(g.n, dtype=bool)
    kept[out.kept] = True
    n, k, j = g.n, cfg.k, len(out.stages)
    c = (1 - cfg.zeta) * cfg.delta / 4
    below = [v for v in sel.B.tolist()
             if sum((Fraction(1, g.degree(u)) for u in g.neighbors(v).tolist() if kept[u]), Fraction(0)) ** k * n ** j
             < c ** k]
    assert below == [v for kind, v, _ in out.violations if kind == "ii"]
