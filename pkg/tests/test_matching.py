import dataclasses
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given

from detmpc.config import RunConfig
from detmpc.graph import build_graph, class_thresholds, select_heavy_class
from detmpc.hashing import HashFamily
from detmpc.matching import EdgeLabels, find_round_matching, matching_objective, maximal_matching, sparsify_edges
from detmpc.oracles import verify_matching

from conftest import graphs, nx_graph


def _labels(g):
    return EdgeLabels.of(g).lookup(g)


def test_easy_case_keeps_e0_and_charges_nothing():
    g = nx_graph(nx.complete_graph(4))
    cfg = RunConfig(delta="1/2")
    sel = select_heavy_class(g, cfg.delta, "matching")
    c = cfg.new_cluster()
    out = sparsify_edges(g, sel, cfg, c, _labels(g))
    assert out.kept.tolist() == sel.seed_edges.tolist() and out.stages == [] and c.rounds == 0


def test_star_sparsification_bounds_center_degree():
    n = 600
    g = nx_graph(nx.star_graph(n - 1))
    cfg = RunConfig(delta="1/8")
    sel = select_heavy_class(g, cfg.delta, "matching")
    assert sel.i > 4 and sel.B.tolist() == [0]
    out = sparsify_edges(g, sel, cfg, cfg.new_cluster(), _labels(g))
    assert len(out.stages) == sel.i - 4
    t4 = int(class_thresholds(n, cfg.delta)[4])
    dstar = np.bincount(g.edges[out.kept].ravel(), minlength=n)
    assert int(dstar[0]) <= 2 * t4 and len(out.kept) >= 1
    assert all(s.certificate.holds for s in out.stages)


def test_empty_seed_edges():
    g = build_graph([(0, 1)], 2)
    cfg = RunConfig(delta=1)
    sel = select_heavy_class(g, cfg.delta, "matching")
    empty = dataclasses.replace(sel, seed_edges=np.zeros(0, np.int64))
    out = sparsify_edges(g, empty, cfg, cfg.new_cluster(), _labels(g))
    assert out.kept.size == 0


def _every_seed_winners(g, estar):
    labels = _labels(g)
    fam = HashFamily.for_domain(2, int(labels.max()) + 2, p=RunConfig().field_for(int(labels.max()) + 1))
    obj = matching_objective(g, estar, np.arange(g.n), labels, fam)
    return obj.winners(fam.all_seeds())


def test_single_edge_always_selected():
    g = build_graph([(0, 1)], 2)
    cfg = RunConfig()
    cand = find_round_matching(g, np.array([0]), np.array([0, 1]), cfg, cfg.new_cluster(), _labels(g))
    assert cand.edges.tolist() == [0] and cand.matched.tolist() == [0, 1]
    assert _every_seed_winners(g, np.array([0])).all()


@pytest.mark.parametrize("G", [nx.path_graph(3), nx.complete_graph(3)])
def test_every_seed_selects_exactly_one_edge(G):
    g = nx_graph(G)
    win = _every_seed_winners(g, np.arange(g.m))
    assert (win.sum(axis=1) == 1).all()


@pytest.mark.parametrize("G, size", [(nx.path_graph(4), None), (nx.complete_graph(4), 2)])
def test_small_graphs(G, size):
    g = nx_graph(G)
    res = maximal_matching(g, RunConfig(delta="1/2"))
    assert verify_matching(g, res.matching).ok
    if size:
        assert len(res.matching) == size


def test_perfect_matching_input_one_iteration():
    g = build_graph(np.arange(10).reshape(-1, 2), 10)
    res = maximal_matching(g)
    assert res.iterations == 1 and len(res.matching) == 5


@given(graphs(max_nodes=14))
def test_matching_is_maximal_and_certified(g):
    res = maximal_matching(g, RunConfig(delta="1/2"))
    assert verify_matching(g, res.matching).ok
    assert all(c.holds for c in res.certificates)
    for row in res.metrics:
        assert 2 * row["edges_removed"] >= Fraction(row["achieved"])


def test_small_space_triggers_stages_and_respects_s():
    from detmpc.bench import generate_graph

    g = generate_graph("gnp", {"n": 400, "p": 0.05}, 3)
    cfg = RunConfig(delta="1/16", space=256)
    res = maximal_matching(g, cfg)
    assert verify_matching(g, res.matching).ok
    assert res.cluster.peak_load <= 256
    assert sum(r["stages"] for r in res.metrics) > 0
