import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from conftest import matrix_of
from sbcnkit.dataset import Attribute, Decision, Schema, load_and_binarize
from sbcnkit.primafacie import (pair_counts, prima_facie_graph, probability_raising_filter,
                                temporal_graph)
from sbcnkit.synth import sample_dag, sample_data


class TestTemporal:
    def test_two_levels_cross_arcs_only(self):
        schema = Schema((Attribute("a", 1), Attribute("b", 2)), Decision("b", "p", "q"))
        M = load_and_binarize(b"a,b\nx,p\ny,q\nx,q\n", schema)
        arcs = temporal_graph(M, schema).temporal_arcs()
        names = {(M.variables[u].attribute, M.variables[v].attribute) for u, v in arcs}
        assert len(arcs) == 4 and names == {("a", "b")}

    def test_shared_level_both_directions(self):
        schema = Schema((Attribute("a", 1), Attribute("c", 1), Attribute("b", 2)),
                        Decision("b", "p", "q"))
        M = load_and_binarize(b"a,c,b\nx,u,p\ny,v,q\n", schema)
        E = temporal_graph(M, schema).temporal
        ax, cu = M.index("a=x"), M.index("c=u")
        assert E[ax, cu] and E[cu, ax]

    def test_berkeley_order(self, berkeley_matrix):
        M = berkeley_matrix
        E = temporal_graph(M, M.schema).temporal
        dep = [i for i, v in enumerate(M.variables) if v.attribute == "Dep"]
        sex = [i for i, v in enumerate(M.variables) if v.attribute == "sex"]
        adm = [i for i, v in enumerate(M.variables) if v.attribute == "Admission"]
        assert not E[np.ix_(dep, sex)].any()
        assert not E[adm].any()


class TestRaising:
    def test_kept(self):
        M = matrix_of([[1, 1, 0, 0], [1, 0, 0, 0]])
        assert probability_raising_filter(temporal_graph(M), M).prima_facie[0, 1]

    def test_independent_removed(self):
        M = matrix_of([[1, 0, 1, 0], [1, 1, 0, 0]])
        assert not probability_raising_filter(temporal_graph(M), M).prima_facie[0, 1]

    def test_berkeley_direct_arc_is_prima_facie(self, berkeley_matrix):
        M = berkeley_matrix
        pf = prima_facie_graph(M, M.schema).prima_facie
        assert pf[M.index("sex=Female"), M.index("Admission=No")]

    def test_same_attribute_never_candidate(self, berkeley_matrix):
        M = berkeley_matrix
        pf = prima_facie_graph(M, M.schema).prima_facie
        same = M.var_attr[:, None] == M.var_attr[None, :]
        assert not (pf & same).any()

    def test_pair_counts_exact(self):
        rng = np.random.default_rng(3)
        data = (rng.random((5, 20_000)) < 0.4).astype(np.uint8)
        M = matrix_of(list(data))
        joint, _ = pair_counts(M)
        d = data.astype(np.int64)
        assert (joint == d @ d.T).all()

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.uint8, (6, 24), elements=st.integers(0, 1)),
           st.lists(st.integers(0, 2), min_size=6, max_size=6))
    def test_equivalent_to_positive_dependence(self, data, levels):
        keep = [i for i in range(6) if 0 < data[i].sum() < data.shape[1]]
        if len(keep) < 2:
            return
        data = data[keep]
        levels = [levels[i] for i in keep]
        M = matrix_of(list(data), levels)
        g = prima_facie_graph(M)
        s = data.shape[1]
        for u in range(len(keep)):
            for v in range(len(keep)):
                if u == v:
                    continue
                pu, pv = data[u].sum(), data[v].sum()
                puv = int((data[u] & data[v]).sum())
                dependent = puv * s > pu * pv
                assert g.prima_facie[u, v] == (g.temporal[u, v] and dependent)
                assert g.prima_facie[u, v] == (g.temporal[u, v]
                                               and oracles.raises(list(data[u]), list(data[v])))
                if g.prima_facie[u, v]:
                    assert levels[u] <= levels[v]

    def test_noiseless_truth_fully_retained(self):
        for seed in range(10):
            dag = sample_dag(8, 4, 0.3, seed)
            M = sample_data(dag, 2000, seed)
            pf = prima_facie_graph(M).prima_facie
            pos = {v.attribute: i for i, v in enumerate(M.variables)}
            for u, v in dag.arcs:
                a, b = dag.names[u], dag.names[v]
                if a in pos and b in pos:
                    assert pf[pos[a], pos[b]], (seed, a, b)
