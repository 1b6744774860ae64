import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spaceiv import catalog, identifiability
from spaceiv.errors import CyclicGraph, SizeGuard
from spaceiv.graph import (
    Y,
    CausalGraph,
    check_b_conditions,
    from_edge_labels,
    from_scm,
    inode,
    instrument_ancestors,
    label,
    marginalize,
    max_node_disjoint_paths,
    parse_label,
    random_coefficients,
    xnode,
)
from spaceiv.model import Scm

from .oracles import _disconnects, brute_force_path_packing, brute_force_vertex_cut, random_dag_graph


def edge_labels(g):
    return {(label(u), label(v)) for u, v in g.edges}


def test_labels_round_trip():
    for node in (inode(0), xnode(9), Y):
        assert parse_label(label(node)) == node
    assert label(xnode(9)) == "X10"
    with pytest.raises(ValueError):
        parse_label("Z3")


class TestConstruction:
    def test_from_three_node_model(self):
        g = from_scm(catalog.three_node_model())
        assert edge_labels(g) == {
            ("I1", "X1"), ("I2", "X1"), ("I2", "X2"), ("I2", "X3"), ("X1", "X2"), ("X2", "Y")
        }

    def test_tolerance_drops_tiny_coefficients(self):
        A = np.array([[1.0], [1e-12]])
        scm = Scm(B=np.zeros((2, 2)), A=A, beta_star=np.array([1.0, 0.0]))
        assert edge_labels(from_scm(scm, zero_tol=1e-9)) == {("I1", "X1"), ("X1", "Y")}

    def test_bipartite_without_predictor_edges(self):
        scm = Scm(B=np.zeros((3, 3)), A=np.eye(3), beta_star=np.array([0.0, 1.0, 0.0]))
        g = from_scm(scm)
        assert all(u[0] == "I" for u, v in g.edges if v != Y)

    def test_cycle_rejected(self):
        with pytest.raises(CyclicGraph):
            from_edge_labels(1, 2, [("I1", "X1"), ("X1", "X2"), ("X2", "X1")])

    def test_invalid_edges_rejected(self):
        with pytest.raises(ValueError):
            from_edge_labels(2, 1, [("X1", "I1")])
        with pytest.raises(ValueError):
            from_edge_labels(2, 1, [("I1", "I2")])
        with pytest.raises(ValueError):
            from_edge_labels(1, 1, [("Y", "X1")])

    def test_json_round_trip(self):
        g = catalog.channel_graph()
        back = CausalGraph.from_json(g.to_json())
        assert back.edges == g.edges
        assert back.to_dict()["pa_y"] == [1, 2]

    def test_dot_export(self):
        dot = catalog.three_node_graph().to_dot()
        assert dot.startswith("digraph")
        assert '"X2" -> "Y"' in dot


class TestAncestors:
    def test_channel_graph_sets_share_ancestors(self):
        g = catalog.channel_graph()
        assert instrument_ancestors(g, [2, 3]) == frozenset({0, 1, 2, 3})
        assert instrument_ancestors(g, [2, 3]) == instrument_ancestors(g, [0, 1])

    def test_few_instruments_graph(self):
        assert instrument_ancestors(catalog.few_instruments_graph(), [0, 4]) == frozenset({0, 1, 2})

    def test_isolated_predictor(self):
        g = from_edge_labels(1, 2, [("I1", "X1"), ("X1", "Y")])
        assert instrument_ancestors(g, [1]) == frozenset()


class TestMarginalize:
    def test_three_node_graph_onto_parent(self):
        gv = marginalize(catalog.three_node_graph(), [1])
        assert edge_labels(gv) == {("I1", "X2"), ("I2", "X2"), ("X2", "Y")}

    def test_chain_contraction(self):
        g = from_edge_labels(1, 2, [("I1", "X1"), ("X1", "X2"), ("X2", "Y")])
        assert edge_labels(marginalize(g, [1])) == {("I1", "X2"), ("X2", "Y")}

    def test_keeping_everything_is_identity(self):
        g = catalog.channel_graph()
        assert marginalize(g, range(g.d)).edges == g.edges

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), data=st.data())
    def test_idempotent_and_preserves_instrument_ancestry(self, seed, data):
        rng = np.random.default_rng(seed)
        m, d = int(rng.integers(1, 4)), int(rng.integers(1, 6))
        g = from_edge_labels(m, d, random_dag_graph(rng, m, d))
        V = data.draw(st.sets(st.integers(0, d - 1)))
        gv = marginalize(g, V)
        assert marginalize(gv, V).edges == gv.edges
        for r in range(1, len(V) + 1):
            S = sorted(V)[:r]
            assert instrument_ancestors(gv, S) == instrument_ancestors(g, S)


class TestDisjointPaths:
    def test_bottleneck_layer(self):
        g = catalog.channel_graph(four_parents=True)
        packing = max_node_disjoint_paths(g, range(4), range(4))
        assert packing.count == 3
        assert {label(u) for u in packing.cut} == {"X5", "X6", "X7"}

    def test_two_parents(self):
        assert max_node_disjoint_paths(catalog.channel_graph(), range(4), [0, 1]).count == 2
        assert max_node_disjoint_paths(catalog.few_instruments_graph(), range(3), [0, 1]).count == 2

    def test_empty_endpoints_rejected(self):
        with pytest.raises(ValueError):
            max_node_disjoint_paths(catalog.channel_graph(), [], [0])

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_menger_duality_against_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 4))
        d = int(rng.integers(1, 11 - m))
        g = from_edge_labels(m, d, random_dag_graph(rng, m, d))
        targets = sorted(rng.choice(d, size=int(rng.integers(1, d + 1)), replace=False).tolist())
        packing = max_node_disjoint_paths(g, range(m), targets)
        G = g.nx.subgraph([n for n in g.nx.nodes if n != Y])
        srcs, tgts = [inode(k) for k in range(m)], [xnode(j) for j in targets]
        assert packing.count == brute_force_vertex_cut(G, srcs, tgts)
        assert len(packing.cut) == packing.count
        assert _disconnects(G, srcs, tgts, packing.cut)
        if G.number_of_nodes() <= 7:
            assert packing.count == brute_force_path_packing(G, srcs, tgts)


class TestBConditions:
    def test_bottleneck_violates_path_condition(self):
        report = check_b_conditions(catalog.channel_graph(four_parents=True))
        assert not report.b1
        assert report.disjoint_paths == 3

    def test_channel_graph(self):
        report = check_b_conditions(catalog.channel_graph(), stop_at_first=False)
        assert report.b1 and report.disjoint_paths == 2
        entry = {e.S: e for e in report.b3_entries}[(2, 3)]
        assert entry.passes_ii and entry.cut_size >= 3

    def test_channel_graph_has_a_set_sharing_the_parent_image(self):
        # X1's only parent is X5, so {X2, X5} reaches exactly what {X1, X2}
        # reaches through at most two nodes
        report = check_b_conditions(catalog.channel_graph())
        assert not report.b3
        assert report.witness == (1, 4)
        A, B, beta = random_coefficients(catalog.channel_graph(), np.random.default_rng(0))
        C = Scm(B=B, A=A, beta_star=beta).total_effects()
        assert identifiability.same_image(identifiability.normalize_columns(C), (1, 4), (0, 1))

    def test_few_instruments_graph(self):
        report = check_b_conditions(catalog.few_instruments_graph())
        assert report.b1 and report.disjoint_paths == 2
        assert report.b3
        assert {e.S for e in report.b3_entries} == {(0, 4), (1, 2)}
        assert all(e.passes_ii for e in report.b3_entries)

    def test_removing_an_instrument_breaks_distinctness(self):
        g = catalog.three_node_graph().remove_instruments([1])
        report = check_b_conditions(g)
        assert not report.b3
        assert report.witness == (0,)

    def test_three_node_graph_satisfies_both(self):
        report = check_b_conditions(catalog.three_node_graph())
        assert report.b1 and report.b3

    def test_size_guard(self):
        edges = [("I1", f"X{j}") for j in range(1, 32)] + [(f"X{j}", "Y") for j in range(1, 6)]
        with pytest.raises(SizeGuard):
            check_b_conditions(from_edge_labels(1, 31, edges))

    def test_report_json(self):
        out = check_b_conditions(catalog.three_node_graph().remove_instruments([1])).to_dict()
        assert out["B3"] is False and out["witness"]["S"] == [1]

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_witness_shape(self, seed):
        rng = np.random.default_rng(seed)
        m, d = int(rng.integers(1, 4)), int(rng.integers(2, 7))
        g = from_edge_labels(m, d, random_dag_graph(rng, m, d))
        report = check_b_conditions(g)
        for e in report.b3_entries:
            assert len(e.S) == len(g.pa_y) and e.S != g.pa_y
        if report.witness is not None:
            assert len(report.witness) == len(g.pa_y) and report.witness != g.pa_y

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_graph_conditions_imply_rank_conditions(self, seed):
        rng = np.random.default_rng(seed)
        m, d = int(rng.integers(1, 5)), int(rng.integers(2, 7))
        g = from_edge_labels(m, d, random_dag_graph(rng, m, d, n_parents=int(rng.integers(1, 3))))
        report = check_b_conditions(g)
        if not (report.b1 and report.b3):
            return
        for _ in range(20):
            A, B, beta = random_coefficients(g, rng)
            scm = Scm(B=B, A=A, beta_star=beta)
            C = scm.total_effects()
            assert identifiability.check_a1(C, scm.parents)
            assert identifiability.check_a3(C, scm.parents)[0]
