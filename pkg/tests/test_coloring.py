import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from detmpc.bench import generate_graph
from detmpc.coloring import (PaletteMap, bin_counts, color_reduce, default_palettes, mis_reduction_color,
                             parse_palettes, update_palettes)
from detmpc.config import RunConfig
from detmpc.errors import InvalidParams, PaletteDeficit, PaletteTooSmall
from detmpc.graph import build_graph
from detmpc.oracles import verify_coloring

from conftest import graphs, nx_graph

DEEP = RunConfig(delta="1/32")


@st.composite
def list_instances(draw, max_nodes=12, shared=None):
    g = draw(graphs(max_nodes=max_nodes))
    universe = draw(st.integers(0, 6))
    share = draw(st.booleans()) if shared is None else shared
    pool = list(range(100, 100 + g.n + universe + 1))
    if share:
        row = pool[:int(g.degrees.max(initial=0)) + 1 + universe]
        return g, PaletteMap.uniform(g.n, row)
    rows = []
    for v in range(g.n):
        size = g.degree(v) + 1 + draw(st.integers(0, 2))
        rows.append(draw(st.permutations(pool)).__getitem__(slice(0, size)))
    return g, PaletteMap.of(rows)


def test_reduction_single_node():
    g = build_graph([], 1)
    assert mis_reduction_color(g, [[7]]).tolist() == [7]


def test_reduction_edge_uses_both():
    g = build_graph([(0, 1)], 2)
    col = mis_reduction_color(g, [[1, 2], [1, 2]])
    assert sorted(col.tolist()) == [1, 2]


def test_reduction_k4():
    g = nx_graph(nx.complete_graph(4))
    col = mis_reduction_color(g, PaletteMap.uniform(4, [1, 2, 3, 4]))
    assert sorted(col.tolist()) == [1, 2, 3, 4]


def test_palette_too_small():
    with pytest.raises(PaletteTooSmall):
        mis_reduction_color(build_graph([(0, 1)], 2), [[1], [1, 2]])
    with pytest.raises(PaletteTooSmall):
        color_reduce(build_graph([(0, 1)], 2), [[1], [1, 2]])


def test_low_degree_no_recursion():
    g = generate_graph("grid", {"rows": 4, "cols": 4})
    res = color_reduce(g, default_palettes(g), RunConfig(delta="1/8"))
    assert res.depth == 0 and len(res.trace) == 1 and res.trace[0]["V0"] == 16


def test_reserve_equal_bins_rejected():
    with pytest.raises(InvalidParams):
        RunConfig(color_bins=3, color_reserve=3)


def test_bin_defaults():
    assert bin_counts(1024, RunConfig(delta="1/10")) == (8, 2)
    assert bin_counts(10, RunConfig(delta="1/32")) == (3, 2)  # ceil(10^(1/32)) = 2 reserved, one more for V1


def test_blowup_two_levels():
    g = generate_graph("blowup", {"n": 6, "p": 0.6, "t": 4}, 2)
    pal = default_palettes(g)
    res = color_reduce(g, pal, DEEP)
    assert verify_coloring(g, pal, res.colors).ok
    assert res.depth >= 1


def test_update_palettes_examples():
    g = build_graph([(0, 1)], 2)
    pal = PaletteMap.of([[1, 2], [2, 3]])
    assert update_palettes(pal, np.array([-1, 2]), g)[0] == (1,)
    assert update_palettes(pal, np.array([-1, 3]), g)[0] == (1, 2)


@given(list_instances(), st.data())
def test_update_keeps_slack(inst, data):
    g, pal = inst
    colors = np.full(g.n, -1, dtype=np.int64)
    for v in range(g.n):
        if data.draw(st.booleans()):
            taken = set(colors[g.neighbors(v)].tolist())
            free = [c for c in pal[v] if c not in taken]
            colors[v] = free[0]
    upd = update_palettes(pal, colors, g)
    for v in np.flatnonzero(colors < 0).tolist():
        nb = g.neighbors(v)
        assert len(upd[v]) >= int((colors[nb] < 0).sum()) + 1


@given(list_instances())
def test_color_reduce_proper_and_within_palettes(inst):
    g, pal = inst
    res = color_reduce(g, pal, DEEP)
    assert verify_coloring(g, pal, res.colors).ok
    assert res.depth <= -(-DEEP.k // 2) + 1
    assert all(c.holds for c in res.certificates)
    for row in res.trace:
        if (row["V1"] or row["V2"]) and not row["fallback"]:
            assert row["max_degree_g1"] <= row["max_degree"] and row["max_degree_g2"] <= row["max_degree"]


def test_repairs_logged_and_strict_mode_raises():
    g = generate_graph("gnp", {"n": 16, "p": 0.5}, 0)
    cfg = RunConfig(delta="1/32", color_bins=4, color_reserve=1)
    pal = default_palettes(g)
    res = color_reduce(g, pal, cfg)
    assert res.repairs and verify_coloring(g, pal, res.colors).ok
    for depth, v, have, need in res.repairs:
        assert have <= need
    assert '"repairs"' in res.trace_json()
    with pytest.raises(PaletteDeficit):
        color_reduce(g, pal, cfg, repair=False)


def test_palette_text_round_trip():
    pal = PaletteMap.of([[3, 1], [], [9]])
    assert parse_palettes(pal.format(), 3) == pal
    assert parse_palettes("0: 1, 2\n# note\n2: 5\n", 3).lists == ((1, 2), (), (5,))


def test_no_progress_instance_falls_back_to_reduction():
    # at n = 2 every binning seed sends both endpoints to the reserve bins
    g = build_graph([(0, 1)], 2)
    pal = PaletteMap.uniform(2, [100, 101])
    res = color_reduce(g, pal, DEEP)
    assert verify_coloring(g, pal, res.colors).ok
    assert res.fallbacks and res.fallbacks[0][1] == "no progress"
    assert res.depth <= -(-DEEP.k // 2) + 1
