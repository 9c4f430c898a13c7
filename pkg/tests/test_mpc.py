import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from detmpc.errors import BallTooLarge, SpaceExceeded
from detmpc.mpc import ClusterState, MachineSpec, ball_rounds, bfs_ball

from conftest import graphs, nx_graph


def cluster(S=4, M=None):
    return ClusterState(MachineSpec(S, M))


def test_distribute_single_key_remainder():
    c = cluster(4)
    out = c.distribute_grouped(list(range(10)), [0] * 10, 4)
    assert [len(m) for m in out] == [4, 4, 2]
    assert c.rounds == 1


def test_distribute_two_keys_separate_machines():
    out = cluster(4).distribute_grouped(["a", "b", "c", "d"], [1, 2, 1, 2], 4)
    assert out == [["a", "c"], ["b", "d"]]


def test_distribute_chunk_over_space():
    with pytest.raises(SpaceExceeded):
        cluster(4).distribute_grouped([1, 2], [0, 0], 5)


@given(st.lists(st.integers(0, 4), max_size=60), st.integers(1, 6))
def test_distribute_groups_are_contiguous_with_one_remainder(keys, chunk):
    c = cluster(8)
    out = c.distribute_grouped(list(range(len(keys))), keys, chunk)
    owner = [keys[m[0]] for m in out]
    for key in set(keys):
        pos = [i for i, o in enumerate(owner) if o == key]
        assert pos == list(range(pos[0], pos[-1] + 1))
        short = [i for i in pos if len(out[i]) != chunk]
        assert len(short) <= 1
    assert sorted(i for m in out for i in m) == list(range(len(keys)))


def test_global_sort_examples():
    c = cluster(1)
    assert c.global_sort([3, 1, 2]) == [1, 2, 3]
    before = c.rounds
    assert c.global_sort([1, 2, 3]) == [1, 2, 3]
    assert c.rounds > before
    pairs = [(1, "x"), (0, "y"), (1, "z")]
    assert cluster(3).global_sort(pairs, key=lambda t: t[0]) == [(0, "y"), (1, "x"), (1, "z")]


@given(st.lists(st.tuples(st.integers(-5, 5), st.integers()), max_size=50))
def test_global_sort_matches_reference(items):
    assert cluster(7).global_sort(items, key=lambda t: t[0]) == sorted(items, key=lambda t: t[0])


def test_global_sort_space_limit():
    with pytest.raises(SpaceExceeded):
        cluster(2, 1).global_sort([3, 2, 1])


@pytest.mark.parametrize("vals, want", [([1, 2, 3], [1, 3, 6]), ([0, 0, 0], [0, 0, 0]), ([5], [5])])
def test_prefix_sums(vals, want):
    assert cluster().prefix_sums(vals) == want


def test_ball_on_path_middle():
    g = nx_graph(nx.path_graph(5))
    c = cluster(64)
    ball = c.collect_balls(g, 2, [2])[2]
    assert ball.nodes.tolist() == [0, 1, 2, 3, 4] and ball.graph.m == 4 and ball.words == 9
    assert c.rounds == ball_rounds(2) == 2


def test_ball_radius_zero():
    g = nx_graph(nx.complete_graph(4))
    ball = cluster(64).collect_balls(g, 0, [1])[1]
    assert ball.nodes.tolist() == [1] and ball.graph.m == 0


def test_ball_too_large():
    S = 6
    g = nx_graph(nx.complete_graph(S + 2))
    with pytest.raises(BallTooLarge):
        cluster(S).collect_balls(g, 1, [0])


@given(graphs(max_nodes=14), st.integers(0, 4), st.data())
def test_bfs_ball_matches_networkx(g, r, data):
    if g.n == 0:
        return
    v = data.draw(st.integers(0, g.n - 1))
    want = sorted(nx.single_source_shortest_path_length(g.to_networkx(), v, cutoff=r))
    assert bfs_ball(g, v, r).tolist() == want


def test_exchange_order_independent_of_dict_order():
    a = cluster(8).exchange({1: [(0, "b1")], 0: [(0, "a1"), (0, "a2")]})
    b = cluster(8).exchange({0: [(0, "a1"), (0, "a2")], 1: [(0, "b1")]})
    assert a == b == {0: ["a1", "a2", "b1"]}


def test_round_log_csv_and_loads():
    c = cluster(4)
    c.distribute_grouped(list(range(6)), [0] * 6, 4)
    lines = c.log_csv().splitlines()
    assert lines[0] == "round,primitive,max_load,messages"
    assert lines[1] == "1,distribute,4,6"
    assert c.peak_load == 4 and c.high_water == [4, 2]


def test_machine_spec_rejects_bad_sizes():
    with pytest.raises(ValueError):
        MachineSpec(0)
    with pytest.raises(ValueError):
        MachineSpec(4, 0)
