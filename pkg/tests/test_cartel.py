import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minewatch import cartel
from minewatch.cartel import (
    CartelNetwork,
    PairWindowResult,
    build_network,
    count_cross_runs,
    count_pair_runs,
    run_pair_detection,
    to_dot,
)
from minewatch.detect import MinerWindowResult, Window

test_pairs = cartel.test_pairs
test_pairs.__test__ = False


def make_window(labels, wid=0):
    return Window(id=wid, coin="test", span="unit", sequence=tuple(labels))


def make_result(miner, window, blocks, h_hat=0.1, c=0, p=1.0, p_adj=1.0, flagged=False):
    return MinerWindowResult(miner=miner, window=window, blocks=blocks, h_hat=h_hat,
                             c=c, p=p, p_adj=p_adj, flagged=flagged)


class TestPairCounts:
    def test_alternating_all_success(self):
        assert count_pair_runs(make_window("ABAB"), "A", "B") == 3

    def test_no_adjacent_successes(self):
        assert count_pair_runs(make_window("ACBC"), "A", "B") == 0

    def test_same_miner_adjacency_included(self):
        assert count_pair_runs(make_window("AACBA"), "A", "B") == 2

    def test_cross_only_variant(self):
        assert count_cross_runs(make_window("AACBA"), "A", "B") == 1
        assert count_cross_runs(make_window("ABAB"), "A", "B") == 3

    def test_same_label_rejected(self):
        with pytest.raises(ValueError, match="differ"):
            count_pair_runs(make_window("AB"), "A", "A")
        with pytest.raises(ValueError, match="differ"):
            count_cross_runs(make_window("AB"), "A", "A")

    @given(st.lists(st.sampled_from("abcz"), min_size=2, max_size=50))
    @settings(max_examples=100, deadline=None)
    def test_symmetry_and_superadditivity(self, labels):
        from minewatch.detect import count_runs

        w = make_window(labels)
        assert count_pair_runs(w, "a", "b") == count_pair_runs(w, "b", "a")
        assert count_pair_runs(w, "a", "b") >= count_runs(w, "a") + count_runs(w, "b")
        assert count_cross_runs(w, "a", "b") == count_cross_runs(w, "b", "a")
        assert (
            count_pair_runs(w, "a", "b")
            == count_runs(w, "a") + count_runs(w, "b") + count_cross_runs(w, "a", "b")
        )


def alternating_pair_window(wid=0, seed=0, T=600):
    """Two miners alternating a joint block burst inside background noise."""
    rng = np.random.default_rng(seed)
    seq = [f"m{r}" for r in rng.integers(0, 12, size=T)]
    pos = 0
    toggle = 0
    while pos + 6 < len(seq):
        for k in range(4):  # plant alternating A/B bursts every ~40 blocks
            seq[pos + k] = "A" if (toggle + k) % 2 == 0 else "B"
        toggle += 1
        pos += 40
    return make_window(seq, wid=wid)


class TestTestPairs:
    def test_pair_flagged_individuals_clean(self):
        from minewatch.detect import test_window

        w = alternating_pair_window()
        individual = test_window(w)
        by_miner = {r.miner: r for r in individual}
        assert not by_miner["A"].flagged and not by_miner["B"].flagged
        pairs = test_pairs(w, individual)
        planted = [r for r in pairs if {r.a, r.b} == {"A", "B"}]
        assert len(planted) == 1 and planted[0].is_cartel

    def test_individually_selfish_member_vetoes(self):
        from minewatch.detect import test_window

        # one miner carries long solo streaks: individually significant
        rng = np.random.default_rng(5)
        seq = [f"m{r}" for r in rng.integers(0, 12, size=500)]
        for pos in range(0, 480, 40):
            for k in range(4):
                seq[pos + k] = "A"
        seq[1] = "B"  # keep B active with a handful of blocks
        for pos in range(20, 500, 97):
            seq[pos] = "B"
        w = make_window(seq)
        individual = test_window(w)
        by_miner = {r.miner: r for r in individual}
        assert by_miner["A"].flagged
        pairs = test_pairs(w, individual, min_blocks=1)
        planted = [r for r in pairs if {r.a, r.b} == {"A", "B"}]
        assert len(planted) == 1
        assert not planted[0].is_cartel  # pair may be significant, member is not clean

    def test_h_pair_is_merged_share(self):
        from minewatch.detect import test_window

        w = make_window("AABBCCAB" * 10)
        individual = test_window(w)
        pairs = test_pairs(w, individual, min_blocks=1)
        for r in pairs:
            merged = sum(1 for m in w.sequence if m in (r.a, r.b))
            assert r.h_pair == merged / w.T

    def test_min_blocks_prunes_candidates(self):
        from minewatch.detect import test_window

        w = make_window(["A"] * 30 + ["B"] * 30 + ["C", "A", "B"] * 2)
        individual = test_window(w)
        pairs_all = test_pairs(w, individual, min_blocks=1)
        pairs_pruned = test_pairs(w, individual, min_blocks=5)
        assert {frozenset((r.a, r.b)) for r in pairs_all} == {
            frozenset(p) for p in (("A", "B"), ("A", "C"), ("B", "C"))
        }
        assert {frozenset((r.a, r.b)) for r in pairs_pruned} == {frozenset(("A", "B"))}


class TestBuildNetwork:
    def _pair(self, a, b, window, is_cartel):
        return PairWindowResult(a=a, b=b, window=window, c_pair=0, c_cross=0,
                                h_pair=0.2, p=0.01, p_adj=0.01, is_cartel=is_cartel)

    def test_no_flags_empty_network(self):
        net = build_network([self._pair("a", "b", 0, False)], [])
        assert net.nodes == () and net.edges == ()

    def test_weight_counts_windows(self):
        pairs = [self._pair("a", "b", w, True) for w in range(3)]
        net = build_network(pairs, [make_result("a", 0, 10, h_hat=0.2),
                                    make_result("b", 0, 10, h_hat=0.4)])
        assert net.edges == (("a", "b", 3),)
        assert {n.miner: n.mean_power for n in net.nodes} == {"a": 0.2, "b": 0.4}

    def test_star_degrees(self):
        pairs = [self._pair("hub", "x", 0, True), self._pair("hub", "y", 1, True)]
        net = build_network(pairs, [])
        assert {n.miner: n.degree for n in net.nodes} == {"hub": 2, "x": 1, "y": 1}

    def test_rebuild_from_shuffled_input_identical(self):
        pairs = [self._pair("a", "b", w, True) for w in range(3)]
        pairs += [self._pair("b", "c", w, True) for w in range(2)]
        ind = [make_result("a", 0, 5), make_result("b", 0, 5), make_result("c", 0, 5)]
        net1 = build_network(pairs, ind)
        net2 = build_network(list(reversed(pairs)), list(reversed(ind)))
        assert net1 == net2

    def test_dot_output(self):
        pairs = [self._pair("a b", "c", 0, True)]
        net = build_network(pairs, [make_result("a b", 0, 5, h_hat=0.25)])
        dot = to_dot(net)
        assert dot.startswith("graph cartels {")
        assert '"a b" -- "c" [weight=1];' in dot
        assert dot.endswith("}\n")
        assert to_dot(CartelNetwork((), ())) == "graph cartels {\n}\n"


class TestRunPairDetection:
    def test_family_variants_same_candidates(self):
        from minewatch.detect import test_window

        windows = [alternating_pair_window(wid=i, seed=i) for i in range(3)]
        individual = []
        for w in windows:
            individual.extend(test_window(w))
        by_window = run_pair_detection(windows, individual, family="window")
        global_fam = run_pair_detection(windows, individual, family="global")
        assert {(r.window, r.a, r.b) for r in by_window} == {
            (r.window, r.a, r.b) for r in global_fam
        }
        raw_w = {(r.window, r.a, r.b): (r.p, r.c_pair) for r in by_window}
        raw_g = {(r.window, r.a, r.b): (r.p, r.c_pair) for r in global_fam}
        assert raw_w == raw_g

    def test_bad_family(self):
        with pytest.raises(ValueError, match="family"):
            run_pair_detection([], [], family="none")
