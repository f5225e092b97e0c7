import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_sbcn
from sbcnkit.errors import UnreachableDecisionError, ValidationError
from sbcnkit.sbcn import Node, Sbcn
from sbcnkit.walker import (WalkConfig, WalkStream, _uniform_block, binomial_se,
                            explainable_fraction, group_score, group_scores_tsv, score_all,
                            simulate, walk_once)


def net(arcs, names=("v", "a", "b", "c")):
    """Named plain nodes followed by the two decisions."""
    nodes = [Node(n, n, "1", i) for i, n in enumerate(names)]
    nodes += [Node("neg", "d", "neg", 9, "delta_minus"), Node("pos", "d", "pos", 9, "delta_plus")]
    idx = {n.id: i for i, n in enumerate(nodes)}
    return Sbcn(tuple(nodes), {(idx[u], idx[v]): w for (u, v), w in arcs.items()},
                idx["neg"], idx["pos"])


CFG = WalkConfig(n_walks=4000, rng_seed=1)


class TestWalkOnce:
    def test_source_is_decision(self):
        g = net({("v", "neg"): 1.0})
        out = walk_once(g, "neg", np.random.default_rng(0))
        assert out.absorbed_at == g.delta_minus and out.final_segment_steps == 0

    def test_single_arc_chain(self):
        g = net({("v", "neg"): 0.4})
        for seed in range(5):
            out = walk_once(g, "v", np.random.default_rng(seed))
            assert out.absorbed_at == g.delta_minus and out.final_segment_steps == 1

    def test_restart_at_plain_sink(self):
        g = net({("v", "a"): 1.0, ("v", "neg"): 1.0})
        outs = [walk_once(g, "v", WalkStream(0, 0, i)) for i in range(200)]
        assert any(o.restarts for o in outs)
        assert all(o.absorbed_at == g.delta_minus for o in outs)
        assert all(o.final_segment_steps == 1 for o in outs)

    def test_no_path_is_nonterminating(self):
        g = net({("v", "a"): 1.0, ("b", "neg"): 1.0})
        out = walk_once(g, "v", np.random.default_rng(0), max_total_steps=50)
        assert not out.terminated

    def test_matches_vectorised_batch(self):
        g = random_sbcn(5, 10)
        b = simulate(g, 0, WalkConfig(n_walks=300, rng_seed=4))
        for i in range(300):
            out = walk_once(g, 0, WalkStream(4, 0, i))
            code = {g.delta_minus: 0, g.delta_plus: 1, None: -1}[out.absorbed_at]
            assert code == b.absorbed[i]
            assert out.final_segment_steps == b.seg_steps[i]

    def test_stream_blocks_match_advance(self):
        # row i of one big draw equals the advanced per-walk stream
        full = np.random.Generator(np.random.PCG64(np.random.SeedSequence([3, 2, 0]))).random(
            (10, 64))
        np.testing.assert_array_equal(_uniform_block(3, 2, 0, 4, 7), full[4:7])


class TestGroupScore:
    def test_closed_form_ratio(self):
        g = net({("v", "neg"): 0.3, ("v", "pos"): 0.1})
        sc = group_score(g, "v", CFG)
        assert abs(sc.ds_minus - 0.75) <= 3 * binomial_se(0.75, sc.n_effective)

    def test_complement(self):
        g = random_sbcn(2, 9)
        for name, sc in score_all(g, WalkConfig(n_walks=500)):
            if sc is not None:
                assert sc.ds_minus + sc.ds_plus == 1.0

    def test_diamond_against_linear_system(self):
        g = net({("v", "a"): 0.7, ("v", "b"): 0.2, ("a", "neg"): 0.9, ("a", "pos"): 0.3,
                 ("b", "neg"): 0.1, ("b", "pos"): 0.6, ("a", "c"): 0.4})
        sc = group_score(g, "v", WalkConfig(n_walks=20_000, rng_seed=3))
        p, q = oracles.absorption(g.m, g.arcs, g.delta_minus, g.delta_plus, 0)
        assert p + q == pytest.approx(1.0)
        assert abs(sc.ds_minus - p) <= 3 * binomial_se(p, sc.n_effective)

    def test_average_steps(self):
        g = net({("v", "a"): 1.0, ("a", "neg"): 1.0, ("v", "pos"): 1.0})
        sc = group_score(g, "v", CFG)
        assert sc.as_minus == 2.0 and sc.as_plus == 1.0

    def test_as_undefined_without_absorption(self):
        g = net({("v", "neg"): 1.0})
        sc = group_score(g, "v", CFG)
        assert sc.as_plus is None and sc.ds_minus == 1.0

    def test_unreachable(self):
        g = net({("v", "a"): 1.0, ("b", "neg"): 1.0})
        with pytest.raises(UnreachableDecisionError, match="v"):
            group_score(g, "v", CFG)

    def test_worker_count_irrelevant(self):
        g = random_sbcn(8, 12)
        one = group_score(g, 0, WalkConfig(n_walks=3000, rng_seed=5, workers=1))
        four = group_score(g, 0, WalkConfig(n_walks=3000, rng_seed=5, workers=4))
        assert one == four

    def test_tsv(self):
        g = net({("v", "neg"): 1.0})
        text = group_scores_tsv(score_all(g, WalkConfig(n_walks=10)))
        lines = text.splitlines()
        assert lines[0] == "node\tds_minus\tds_plus\tas_minus\tas_plus\tn\tnonterminating"
        assert lines[1].startswith("v\t1.000000\t0.000000\t1.000000\tNA\t10\t0")
        assert "a\tNA" in text

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 1000), st.sampled_from([0.5, 0.25]))
    def test_scaling_a_node_changes_nothing(self, seed, factor):
        g = random_sbcn(seed, 8, dangling=False)
        arcs = {k: (w * factor if k[0] == 0 else w) for k, w in g.arcs.items()}
        h = Sbcn(g.nodes, arcs, g.delta_minus, g.delta_plus)
        cfg = WalkConfig(n_walks=300, rng_seed=seed)
        assert group_score(g, 0, cfg).ds_minus == group_score(h, 0, cfg).ds_minus


class TestExplainable:
    def test_forced_passage(self):
        g = net({("v", "a"): 1.0, ("a", "neg"): 1.0})
        fe = explainable_fraction(g, "v", "a", CFG)
        assert fe.fed_minus == 1.0 and fe.fed_plus is None

    def test_bypass_fraction(self):
        g = net({("v", "a"): 1.0, ("v", "neg"): 1.0, ("a", "neg"): 1.0})
        fe = explainable_fraction(g, "v", "a", CFG)
        assert abs(fe.fed_minus - 0.5) <= 3 * binomial_se(0.5, fe.rw_minus)

    def test_only_final_segment_counts(self):
        # walks through b always die at a sink and restart, so b never explains
        g = net({("v", "b"): 1.0, ("v", "neg"): 1.0})
        fe = explainable_fraction(g, "v", "b", CFG)
        assert fe.fed_minus == 0.0

    def test_decision_cannot_be_intermediate(self):
        g = net({("v", "neg"): 1.0})
        with pytest.raises(ValidationError):
            explainable_fraction(g, "v", "neg", CFG)

    def test_berkeley_through_departments(self, berkeley_sbcn):
        deps = [n.id for n in berkeley_sbcn.nodes if n.attribute == "Dep"]
        fe = explainable_fraction(berkeley_sbcn, "sex=Female", deps, WalkConfig(rng_seed=7))
        assert fe.fed_minus == 1.0

    def test_cut_vertex(self):
        g = random_sbcn(1, 10, dangling=False)
        arcs = {(u, v): w for (u, v), w in g.arcs.items() if v != g.delta_minus}
        arcs[(g.delta_minus - 1, g.delta_minus)] = 1.0
        h = Sbcn(g.nodes, arcs, g.delta_minus, g.delta_plus)
        fe = explainable_fraction(h, 0, g.delta_minus - 1, WalkConfig(n_walks=2000))
        assert fe.fed_minus in (None, 1.0)
