import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gidnc.channel import GecParams, LinkParams
from gidnc.graph import (
    Clique,
    CliqueSizeError,
    IdncGraph,
    VertexKind,
    base_weights,
    build_graph,
    connectivity_weights,
    exact_max_weight_clique,
    fve_filter,
    greedy_select,
    is_clique,
    sve_filter,
)
from gidnc.tracking import FrameSchedule, PacketState, SenderView

from oracles import brute_force_clique


def example_view():
    """F = [[1, 0, -1], [0, 1, x]]."""
    v = SenderView([[1, 1, 0], [1, 1, 1]], FrameSchedule.round_robin(2, 1, 2))
    v.record_attempt([(0, 1), (1, 0)], 1)
    v.record_attempt([(1, 2)], 2)
    v.apply_feedback(0, {1}, 3)
    v.apply_feedback(1, {0}, 3)
    v.record_attempt([(1, 2)], 4)
    v.close_frame_unheard(1, 2)
    return v


def labels(graph):
    return [v.label for v in graph.vertices]


def edges(graph):
    return set(graph.edge_list().splitlines())


def random_graph(rng, n_recv=4, n_pack=5, p_has=0.4, p_primary=0.7):
    primary = rng.random((n_recv, n_pack)) < p_primary
    v = SenderView(primary, FrameSchedule.round_robin(2, 1, n_recv))
    v.sfm[rng.random((n_recv, n_pack)) < p_has] = PacketState.HAS
    g = build_graph(v)
    return replace(g, w0=rng.random(len(g)))


def clique_value(graph, idx):
    return sum(graph.w0[k] for k in idx if graph.primary[k])


class TestBuild:
    def test_everything_held(self):
        v = SenderView(np.ones((2, 2), bool), FrameSchedule.round_robin(1, 1, 2))
        v.sfm[:] = PacketState.HAS
        assert len(build_graph(v)) == 0

    def test_example(self):
        v = example_view()
        assert v.sfm_text() == " 1  0 -1\n 0  1  x\n"
        g = build_graph(v)
        assert labels(g) == ["0:0", "0:2", "1:1", "1:2"]
        assert edges(g) == {"0:0 1:1", "0:2 1:2"}

    def test_same_receiver_never_joined(self):
        v = SenderView([[1, 1]], FrameSchedule.round_robin(1, 1, 1))
        g = build_graph(v)
        assert len(g) == 2 and g.edge_count == 0

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetric_irreflexive(self, seed):
        g = random_graph(np.random.default_rng(seed))
        assert (g.adjacency == g.adjacency.T).all()
        assert not g.adjacency.diagonal().any()
        assert g.degrees.sum() == 2 * g.edge_count

    @settings(max_examples=30)
    @given(st.integers(0, 2**32 - 1))
    def test_edge_rule(self, seed):
        rng = np.random.default_rng(seed)
        primary = rng.random((3, 4)) < 0.6
        v = SenderView(primary, FrameSchedule.round_robin(2, 1, 3))
        v.sfm[rng.random((3, 4)) < 0.4] = PacketState.HAS
        v.sfm[(v.sfm == PacketState.WANTED) & (rng.random((3, 4)) < 0.3)] = PacketState.UNCERTAIN
        g = build_graph(v)
        has = v.sfm == PacketState.HAS
        for a in range(len(g)):
            for b in range(len(g)):
                i, j, k, l = g.receiver[a], g.packet[a], g.receiver[b], g.packet[b]
                want = i != k and (j == l or (has[k, j] and has[i, l]))
                assert g.adjacency[a, b] == want


class TestWeights:
    def test_certain_never_attempted(self):
        v = SenderView([[1, 1]], FrameSchedule.round_robin(2, 1, 1))
        v.record_attempt([(0, 0)], 1)
        v.apply_feedback(0, {0}, 3)
        link = LinkParams.reciprocal(GecParams(0.2, 0.8))
        g = base_weights(build_graph(v), v, [link], 4)
        assert g.w0 == pytest.approx([0.8])

    def test_uncertain_product(self):
        v = SenderView([[1, 1]], FrameSchedule.round_robin(2, 1, 1))
        v.record_attempt([(0, 0)], 1)
        v.apply_feedback(0, set(), 3)
        v.record_attempt([(0, 1)], 4)
        link = LinkParams.reciprocal(GecParams(0.2, 0.8))
        g = base_weights(build_graph(v), v, [link], 5)
        # p = 0.2 everywhere on this memoryless channel; packet 1 tried once this frame
        assert g.w0 == pytest.approx([0.8, 0.8 * 0.2])

    def test_blind(self):
        v = example_view()
        links = [LinkParams.reciprocal(GecParams(0.1, 0.4)), LinkParams.reciprocal(GecParams(0.3, 0.3))]
        g = base_weights(build_graph(v), v, links, 7, blind=True)
        assert g.w0 == pytest.approx([0.8, 0.8, 0.5, 0.5])

    def test_isolated(self):
        g = IdncGraph(np.array([0]), np.array([0]), np.array([True]), np.zeros((1, 1), bool), np.array([0.7]))
        g = connectivity_weights(g)
        assert g.w == pytest.approx([0.0]) and g.wstar == pytest.approx([0.7])

    def test_path(self):
        adj = np.array([[False, True], [True, False]])
        g = connectivity_weights(IdncGraph(np.array([0, 1]), np.array([0, 0]), np.array([True, True]), adj,
                                           np.array([0.3, 0.6])))
        assert g.w == pytest.approx([0.6, 0.3])
        assert g.wstar[0] == pytest.approx((0.6 + 1) * 0.3)

    def test_triangle(self):
        adj = ~np.eye(3, dtype=bool)
        c = 0.45
        g = connectivity_weights(IdncGraph(np.arange(3), np.zeros(3, int), np.ones(3, bool), adj, np.full(3, c)))
        assert g.w == pytest.approx([4 * c / 3] * 3)

    @settings(max_examples=40)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
    def test_scaling(self, seed, scale):
        g = connectivity_weights(random_graph(np.random.default_rng(seed)))
        h = connectivity_weights(replace(g, w0=g.w0 * scale))
        assert h.w == pytest.approx(g.w * scale, rel=1e-9, abs=1e-12)

    def test_scaling_can_move_the_argmax(self):
        # w* = (w + 1) w0 is not homogeneous in w0, so the ranking is scale dependent
        adj = np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=bool)
        g = IdncGraph(np.arange(3), np.zeros(3, int), np.ones(3, bool), adj, np.array([1.0, 0.6, 1.0]))
        assert np.argmax(connectivity_weights(g).wstar) == 2
        small = connectivity_weights(replace(g, w0=g.w0 * 0.1))
        assert small.wstar[0] > small.wstar[1]


class TestSelection:
    def test_single_vertex(self):
        g = IdncGraph(np.array([0]), np.array([1]), np.array([True]), np.zeros((1, 1), bool), np.array([0.4]))
        assert [v.label for v in greedy_select(g).vertices] == ["0:1"]

    def test_empty(self):
        g = IdncGraph(np.zeros(0, int), np.zeros(0, int), np.zeros(0, bool), np.zeros((0, 0), bool))
        assert greedy_select(g) == Clique()
        assert exact_max_weight_clique(g).objective() == 0.0

    def test_example_picks_mutual_has_pair(self):
        g = build_graph(example_view())
        g = replace(g, w0=np.array([0.9, 0.2, 0.5, 0.3]))
        clique = greedy_select(g)
        assert [v.label for v in clique.vertices if v.kind is VertexKind.PRIMARY] == ["0:0", "1:1"]

    def test_exact_example(self):
        adj = np.zeros((3, 3), bool)
        adj[0, 1] = adj[1, 0] = True
        g = IdncGraph(np.arange(3), np.zeros(3, int), np.ones(3, bool), adj, np.array([0.9, 0.8, 0.85]))
        clique = exact_max_weight_clique(g)
        assert clique.indices == (0, 1)
        assert clique.objective() == pytest.approx(1.7)

    def test_exact_tie_lexicographic(self):
        g = IdncGraph(np.arange(3), np.zeros(3, int), np.ones(3, bool), np.zeros((3, 3), bool), np.full(3, 0.5))
        assert exact_max_weight_clique(g).indices == (0,)

    def test_size_guard(self):
        g = IdncGraph(np.arange(21), np.zeros(21, int), np.ones(21, bool), np.zeros((21, 21), bool), np.ones(21))
        with pytest.raises(CliqueSizeError):
            exact_max_weight_clique(g)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_exact_vs_greedy_vs_brute(self, seed):
        g = random_graph(np.random.default_rng(seed), n_recv=4, n_pack=3)
        prim = np.flatnonzero(g.primary)
        exact = exact_max_weight_clique(g)
        greedy = greedy_select(connectivity_weights(g))
        for c in (exact, greedy):
            assert is_clique(g, c.indices)
        assert clique_value(g, exact.indices) == pytest.approx(brute_force_clique(g.adjacency, g.w0, prim), abs=1e-12)
        assert clique_value(g, greedy.indices) <= clique_value(g, exact.indices) + 1e-12

    def test_single_maximal_clique_greedy_optimal(self):
        adj = ~np.eye(4, dtype=bool)
        g = IdncGraph(np.arange(4), np.zeros(4, int), np.ones(4, bool), adj, np.array([0.1, 0.5, 0.2, 0.9]))
        assert greedy_select(g).objective() == pytest.approx(exact_max_weight_clique(g).objective())

    def test_secondary_pass_adjacent_to_primary(self):
        g = random_graph(np.random.default_rng(5), n_recv=5, n_pack=6, p_primary=0.5)
        c = greedy_select(g)
        assert is_clique(g, c.indices)
        assert c.coded_packet == frozenset(v.packet for v in c.vertices)
        assert len({v.receiver for v in c.vertices}) == len(c)


class TestFilters:
    links = [LinkParams.reciprocal(GecParams(0.3, 0.7))] * 2

    def test_fve_identity(self):
        v = SenderView(np.ones((2, 2), bool), FrameSchedule.round_robin(1, 1, 2))
        g = build_graph(v)
        assert labels(fve_filter(g, v)) == labels(g)

    def test_fve_all_uncertain_receiver(self):
        v = SenderView(np.ones((2, 2), bool), FrameSchedule.round_robin(2, 1, 2))
        v.record_attempt([(0, 0)], 1)
        v.record_attempt([(0, 1)], 2)
        v.close_frame_unheard(0, 1)
        assert all(x.receiver == 1 for x in fve_filter(build_graph(v), v).vertices)

    def test_fve_example(self):
        v = example_view()
        g = fve_filter(build_graph(v), v)
        assert labels(g) == ["0:0", "0:2", "1:1"]
        assert edges(g) == {"0:0 1:1"}

    def test_fve_current_frame_attempts(self):
        v = SenderView(np.ones((1, 2), bool), FrameSchedule.round_robin(2, 1, 1))
        v.record_attempt([(0, 0)], 1)
        g = build_graph(v)
        assert labels(fve_filter(g, v)) == ["0:0", "0:1"]
        assert labels(fve_filter(g, v, t=2)) == ["0:1"]

    def test_sve_extremes(self):
        v = example_view()
        g = build_graph(v)
        rng = np.random.default_rng(0)
        always = [LinkParams.reciprocal(GecParams(1.0, 0.0))] * 2
        never = [LinkParams.reciprocal(GecParams(0.0, 1.0))] * 2
        assert labels(sve_filter(g, v, always, rng)) == labels(g)
        assert labels(sve_filter(g, v, never, rng)) == labels(fve_filter(g, v))

    def test_sve_frequency(self):
        v = example_view()
        g = build_graph(v)
        rng = np.random.default_rng(1)
        n = 10_000
        kept = sum(len(sve_filter(g, v, self.links, rng)) == 4 for _ in range(n))
        assert abs(kept / n - 0.3) <= 3 * math.sqrt(0.21 / n)

    def test_sve_memo_reuses_draw(self):
        v = example_view()
        g = build_graph(v)
        rng = np.random.default_rng(2)
        memo = {}
        first = labels(sve_filter(g, v, self.links, rng, memo=memo))
        assert all(labels(sve_filter(g, v, self.links, rng, memo=memo)) == first for _ in range(20))

    @settings(max_examples=30)
    @given(st.integers(0, 2**32 - 1))
    def test_fve_subgraph(self, seed):
        rng = np.random.default_rng(seed)
        v = SenderView(rng.random((3, 4)) < 0.7, FrameSchedule.round_robin(2, 1, 3))
        v.sfm[(v.sfm == PacketState.WANTED) & (rng.random((3, 4)) < 0.4)] = PacketState.UNCERTAIN
        g = build_graph(v)
        f = fve_filter(g, v)
        assert set(labels(f)) <= set(labels(g))
        for a, b in zip(*np.nonzero(f.adjacency)):
            assert g.adjacency[g.index(f.receiver[a], f.packet[a]), g.index(f.receiver[b], f.packet[b])]


def test_edge_list_format():
    g = build_graph(example_view())
    assert g.edge_list() == "0:0 1:1\n0:2 1:2\n"
