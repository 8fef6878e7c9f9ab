import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toolseq.embeddings import EmbeddingStore, top_k_semantic
from toolseq.errors import EmptyLibrary, InvalidArgument
from toolseq.graph import TransitionGraph, build_graph
from toolseq.stage1 import (
    RetrievalConfig,
    gs_hybrid_retrieve,
    position_bonus,
    weak_components,
)
from toolseq.trajectory import Trajectory, TrajectoryDataset


def store_with_sims(sims):
    """One-hot store whose similarity to the returned query equals `sims`."""
    dim = max(len(sims), 2)
    store = EmbeddingStore(dimension=dim)
    q = np.zeros(dim)
    for i, (tool, s) in enumerate(sorted(sims.items())):
        v = np.zeros(dim, dtype=np.float32)
        v[i] = 1.0
        store.vectors[tool] = v
        q[i] = s
    return store, q


def graph_with(edges, positions=None):
    nodes = {t for pair in edges for t in pair} | set(positions or {})
    g = TransitionGraph(
        nodes=nodes,
        edge_weights=dict(edges),
        position_mean=dict(positions or {}),
        position_count={t: 1 for t in (positions or {})},
    )
    g.reindex()
    return g


class TestConfig:
    def test_defaults(self):
        cfg = RetrievalConfig()
        assert (cfg.pool_multiplier, cfg.alpha, cfg.gamma) == (3, 0.5, 0.1)
        assert (cfg.max_bridges, cfg.bridge_path_limit) == (2, 3)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"pool_multiplier": 0},
            {"alpha": -0.1},
            {"alpha": 1.1},
            {"gamma": -1.0},
            {"max_bridges": -1},
            {"bridge_path_limit": 0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(InvalidArgument):
            RetrievalConfig(**kwargs)


class TestPositionBonus:
    def test_exact_match(self):
        g = graph_with({}, positions={"A": 0.0})
        assert position_bonus(g, "A", 0.0) == 1.0

    def test_opposite_end(self):
        g = graph_with({}, positions={"A": 0.0})
        assert position_bonus(g, "A", 1.0) == 0.0

    def test_unseen_tool(self):
        g = graph_with({})
        assert position_bonus(g, "A", 0.5) == 0.0

    def test_p_out_of_range(self):
        g = graph_with({}, positions={"A": 0.5})
        with pytest.raises(InvalidArgument):
            position_bonus(g, "A", 1.5)


class TestWeakComponents:
    def test_direction_ignored(self):
        g = graph_with({("A", "B"): 1.0, ("C", "B"): 1.0})
        comps = weak_components(g, ["A", "B", "C"])
        assert comps == [{"A", "B", "C"}]

    def test_split_components(self):
        g = graph_with({("A", "B"): 1.0, ("C", "D"): 1.0})
        comps = weak_components(g, ["A", "B", "C", "D"])
        assert {frozenset(c) for c in comps} == {
            frozenset({"A", "B"}),
            frozenset({"C", "D"}),
        }

    def test_members_outside_graph_are_singletons(self):
        g = graph_with({("A", "B"): 1.0})
        comps = weak_components(g, ["A", "B", "X"])
        assert {frozenset(c) for c in comps} == {
            frozenset({"A", "B"}),
            frozenset({"X"}),
        }


class TestGreedySequencing:
    def test_worked_example(self):
        # pool {A,B,C}, sims {A:.9,B:.1,C:.2}, w(A,B)=1 in-pool, alpha=.5,
        # gamma=0: step 1 takes A (top sim); step 2 scores B at
        # .5*1 + .5*.1 = .55 over C at .5*0 + .5*.2 = .10.
        store, q = store_with_sims({"A": 0.9, "B": 0.1, "C": 0.2})
        g = graph_with({("A", "B"): 1.0})
        cand = gs_hybrid_retrieve(
            g, store, q, 3, RetrievalConfig(alpha=0.5, gamma=0.0)
        )
        assert cand.tools == ["A", "B", "C"]
        assert cand.provisional == ["A", "B", "C"]

    def test_semantic_only_reduces_to_top_k(self):
        store, q = store_with_sims(
            {"A": 0.9, "B": 0.1, "C": 0.2, "D": 0.8, "E": 0.3}
        )
        g = graph_with({("A", "B"): 1.0, ("B", "C"): 1.0})
        cfg = RetrievalConfig(alpha=0.0, gamma=0.0, max_bridges=0)
        cand = gs_hybrid_retrieve(g, store, q, 3, cfg)
        expected = [t for t, _ in top_k_semantic(store, q, 3)]
        assert cand.tools == expected

    def test_reverse_only_edge_half_weight(self):
        # Only (B -> A) exists. From A, B gets alpha*w/2 on top of its sim.
        store, q = store_with_sims({"A": 0.9, "B": 0.30, "C": 0.38})
        g = graph_with({("B", "A"): 1.0})
        cfg = RetrievalConfig(alpha=0.5, gamma=0.0)
        cand = gs_hybrid_retrieve(g, store, q, 3, cfg)
        # B: .5*(1.0/2) + .5*.30 = .40 > C: .5*0 + .5*.38 = .19
        assert cand.tools == ["A", "B", "C"]

    def test_position_bonus_steers_choice(self):
        # Equal sims, no edges; the tool whose prior matches slot 1's
        # normalized position wins on the bonus alone.
        store, q = store_with_sims({"A": 0.9, "B": 0.5, "C": 0.5})
        g = graph_with({}, positions={"B": 1.0, "C": 0.5})
        cfg = RetrievalConfig(alpha=0.5, gamma=0.1)
        cand = gs_hybrid_retrieve(g, store, q, 3, cfg)
        # slot p = 1/2: bonus(C) = 1 - 0 = 1.0 > bonus(B) = 0.5
        assert cand.tools == ["A", "C", "B"]

    def test_k_eval_one_uses_p_zero(self):
        store, q = store_with_sims({"A": 0.9, "B": 0.5})
        g = graph_with({})
        cand = gs_hybrid_retrieve(g, store, q, 1)
        assert cand.tools == ["A"]
        assert cand.k_eval == 1


class TestPoolAndPadding:
    def test_k_pool_formula(self):
        # k=3, c=3 -> pool 9; with 5 tools the pool is the whole universe.
        sims = {f"t{i}": 0.9 - i * 0.1 for i in range(5)}
        store, q = store_with_sims(sims)
        g = graph_with({})
        cand = gs_hybrid_retrieve(g, store, q, 3)
        assert len(cand.tools) == 3

    def test_output_size_capped_by_universe(self):
        store, q = store_with_sims({"A": 0.9, "B": 0.5})
        g = graph_with({})
        cand = gs_hybrid_retrieve(g, store, q, 5)
        assert len(cand.tools) == 2

    def test_padding_fills_to_k_eval(self):
        # Universe is large; pool covers it, so output is exactly k.
        sims = {f"t{i:02d}": 1.0 - i * 0.05 for i in range(12)}
        store, q = store_with_sims(sims)
        g = graph_with({})
        cand = gs_hybrid_retrieve(g, store, q, 4)
        assert len(cand.tools) == 4
        assert len(set(cand.tools)) == 4

    def test_scores_cover_output(self):
        sims = {f"t{i}": 0.5 for i in range(6)}
        store, q = store_with_sims(sims)
        g = graph_with({})
        cand = gs_hybrid_retrieve(g, store, q, 4)
        assert set(cand.semantic_scores) == set(cand.tools)

    def test_k_zero_rejected(self):
        store, q = store_with_sims({"A": 0.9})
        with pytest.raises(InvalidArgument):
            gs_hybrid_retrieve(graph_with({}), store, q, 0)

    def test_empty_store_rejected(self):
        store = EmbeddingStore(dimension=4)
        with pytest.raises(EmptyLibrary):
            gs_hybrid_retrieve(graph_with({}), store, np.zeros(4), 3)


class TestBridging:
    # Pool layout shared by the insertion tests: k=3 at multiplier 1 pools
    # the top max(5, 3) = 5 tools {A,B,D,E,X}; C sits just below the cut
    # and is the interior of the only path joining components {A,B} and
    # {D,E}.
    SIMS = {"A": 0.9, "B": 0.85, "D": 0.8, "E": 0.75, "X": 0.7,
            "C": 0.65, "Y": 0.6}
    EDGES = {
        ("A", "B"): 0.5,
        ("B", "C"): 0.5,
        ("C", "D"): 1.0,
        ("D", "E"): 1.0,
    }

    def test_bridge_inserts_interior_tool(self):
        store, q = store_with_sims(self.SIMS)
        g = graph_with(self.EDGES)
        cfg = RetrievalConfig(pool_multiplier=1, alpha=0.5, gamma=0.0)
        cand = gs_hybrid_retrieve(g, store, q, 3, cfg)
        # greedy: A; then B at .5*.5 + .5*.85 = .675; then C at
        # .5*.5 + .5*.65 = .575 over D's 0 + .5*.8 = .40.
        assert cand.tools == ["A", "B", "C"]

    def test_no_bridging_when_disabled(self):
        store, q = store_with_sims(self.SIMS)
        g = graph_with(self.EDGES)
        cfg = RetrievalConfig(
            pool_multiplier=1, alpha=0.5, gamma=0.0, max_bridges=0
        )
        cand = gs_hybrid_retrieve(g, store, q, 3, cfg)
        assert "C" not in cand.tools

    def test_bridge_respects_budget(self):
        # Components {A,B} and {F}; the only connecting path needs 3
        # interior tools, over the 2-bridge budget, so nothing is added.
        sims = {"A": 0.9, "B": 0.85, "F": 0.8, "X": 0.75, "Y": 0.7,
                "c1": 0.1, "c2": 0.09, "c3": 0.08}
        store, q = store_with_sims(sims)
        g = graph_with(
            {
                ("A", "B"): 1.0,
                ("A", "c1"): 0.5,
                ("c1", "c2"): 1.0,
                ("c2", "c3"): 1.0,
                ("c3", "F"): 1.0,
            }
        )
        cfg = RetrievalConfig(
            pool_multiplier=1, alpha=0.0, gamma=0.0, bridge_path_limit=4
        )
        cand = gs_hybrid_retrieve(g, store, q, 3, cfg)
        assert cand.tools == ["A", "B", "F"]


class TestProperties:
    sims_strategy = st.dictionaries(
        st.sampled_from([f"t{i}" for i in range(10)]),
        st.floats(min_value=-1, max_value=1, allow_nan=False),
        min_size=1,
        max_size=10,
    )

    @given(sims_strategy, st.integers(min_value=1, max_value=12))
    @settings(max_examples=50)
    def test_output_size_and_uniqueness(self, sims, k):
        store, q = store_with_sims(sims)
        g = graph_with({})
        cand = gs_hybrid_retrieve(g, store, q, k)
        assert len(cand.tools) == min(k, len(sims))
        assert len(set(cand.tools)) == len(cand.tools)
        assert cand.k_eval == k

    @given(sims_strategy, st.integers(min_value=1, max_value=8))
    @settings(max_examples=50)
    def test_semantic_mode_oracle(self, sims, k):
        store, q = store_with_sims(sims)
        g = graph_with({})
        cfg = RetrievalConfig(alpha=0.0, gamma=0.0, max_bridges=0)
        cand = gs_hybrid_retrieve(g, store, q, k, cfg)
        expected = [t for t, _ in top_k_semantic(store, q, k)]
        assert cand.tools == expected

    @given(sims_strategy, st.integers(min_value=1, max_value=8))
    @settings(max_examples=30)
    def test_deterministic(self, sims, k):
        store, q = store_with_sims(sims)
        g = graph_with({})
        a = gs_hybrid_retrieve(g, store, q, k)
        b = gs_hybrid_retrieve(g, store, q, k)
        assert a.tools == b.tools


class TestOnMinedGraph:
    def test_candidates_from_real_corpus(self, basic_corpus):
        spec, train, test, labels, descriptions = basic_corpus
        from toolseq.embeddings import build_store

        g = build_graph(train)
        store = build_store(descriptions)
        tr = test.trajectories[0]
        cand = gs_hybrid_retrieve(g, store, store.encode_query(tr.query), 4)
        assert set(cand.tools) == set(tr.tools)
