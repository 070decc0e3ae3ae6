"""Pairwise run tests for coordinated mining groups and the cartel network.

A pair of miners is tested by merging their labels into one success
indicator: a position succeeds when the block belongs to either member, and
the null power is the sum of the members' plug-in shares.  A pair counts as a
cartel in a window only when the pair is significant while neither member is
individually significant in that same window.  Flagged pairs accumulate into
a weighted network (edge weight = number of windows flagged).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .detect import MinerWindowResult, Window, bh_adjust
from .runstat import TestStatistic

__all__ = [
    "PairWindowResult",
    "CartelNode",
    "CartelNetwork",
    "count_pair_runs",
    "count_cross_runs",
    "test_pairs",
    "run_pair_detection",
    "build_network",
    "to_dot",
]


@dataclass(frozen=True)
class PairWindowResult:
    a: str
    b: str
    window: int
    c_pair: int   # merged-indicator run count (same-miner adjacencies included)
    c_cross: int  # strict cross-member adjacencies, reported for comparison only
    h_pair: float
    p: float
    p_adj: float
    is_cartel: bool


@dataclass(frozen=True)
class CartelNode:
    miner: str
    mean_power: float
    degree: int


@dataclass(frozen=True)
class CartelNetwork:
    nodes: tuple[CartelNode, ...]
    edges: tuple[tuple[str, str, int], ...]  # (a, b, weight), a < b


def count_pair_runs(window: Window, i: str, j: str) -> int:
    """Run count of the merged indicator for the unordered pair {i, j}.

    The null model is Bernoulli(h_i + h_j) on the merged indicator, so
    same-miner adjacencies (i,i and j,j) count as well as cross pairs.
    """
    if i == j:
        raise ValueError(f"pair members must differ, got {i!r} twice")
    seq = window.sequence
    pair = (i, j)
    return sum(
        1
        for t in range(len(seq) - 1)
        if seq[t] in pair and seq[t + 1] in pair
    )


def count_cross_runs(window: Window, i: str, j: str) -> int:
    """Adjacencies where the two blocks belong to different pair members."""
    if i == j:
        raise ValueError(f"pair members must differ, got {i!r} twice")
    seq = window.sequence
    return sum(
        1
        for t in range(len(seq) - 1)
        if {seq[t], seq[t + 1]} == {i, j}
    )


def _pair_counts(window: Window, pairs):
    """(c_pair, c_cross) per pair, via one integer encoding of the sequence."""
    labels = sorted(set(window.sequence))
    code = {m: i for i, m in enumerate(labels)}
    seq = np.fromiter((code[m] for m in window.sequence), dtype=np.int64,
                      count=window.T)
    left, right = seq[:-1], seq[1:]
    out = []
    for a, b in pairs:
        ca, cb = code[a], code[b]
        ia_l, ib_l = left == ca, left == cb
        ia_r, ib_r = right == ca, right == cb
        c_pair = int(((ia_l | ib_l) & (ia_r | ib_r)).sum())
        c_cross = int(((ia_l & ib_r) | (ib_l & ia_r)).sum())
        out.append((c_pair, c_cross))
    return out


def test_pairs(window: Window, individual, fdr: float = 0.05,
               min_blocks: int = 5) -> list[PairWindowResult]:
    """Test candidate pairs in one window; BH family = this window's pairs.

    Candidates are pairs whose members each mined at least min_blocks blocks
    (min_blocks=1 reproduces the exhaustive all-pairs behaviour).  The pair
    family is adjusted separately from the individual family; a pair is a
    cartel when its adjusted p is below fdr while both members' individual
    adjusted p-values are at or above fdr in the same window.
    """
    ind = {r.miner: r for r in individual if r.window == window.id}
    eligible = sorted(m for m, r in ind.items() if r.blocks >= min_blocks)
    candidates = list(combinations(eligible, 2))
    stats = []
    for (a, b), (c_pair, c_cross) in zip(candidates, _pair_counts(window, candidates)):
        h_pair = (ind[a].blocks + ind[b].blocks) / window.T
        stat = TestStatistic(c=c_pair, T=window.T, h=h_pair)
        stats.append((a, b, c_pair, c_cross, h_pair, stat.p_value()))
    adj = bh_adjust([s[5] for s in stats])
    results = []
    for (a, b, c_pair, c_cross, h_pair, p), p_adj in zip(stats, adj):
        is_cartel = (
            p_adj < fdr
            and ind[a].p_adj >= fdr
            and ind[b].p_adj >= fdr
        )
        results.append(
            PairWindowResult(
                a=a, b=b, window=window.id, c_pair=c_pair, c_cross=c_cross,
                h_pair=h_pair, p=p, p_adj=p_adj, is_cartel=is_cartel,
            )
        )
    return results


def run_pair_detection(windows, individual, fdr: float = 0.05,
                       min_blocks: int = 5, family: str = "window") -> list[PairWindowResult]:
    """Pair tests across all windows, with per-window or global BH families."""
    if family not in ("window", "global"):
        raise ValueError(f"family must be 'window' or 'global', got {family!r}")
    testable = [w for w in windows if w.T >= 2]
    if family == "window":
        results: list[PairWindowResult] = []
        for w in testable:
            results.extend(test_pairs(w, individual, fdr=fdr, min_blocks=min_blocks))
        return results
    # global: one family over every candidate pair in every window
    ind_by_window: dict[int, dict[str, MinerWindowResult]] = defaultdict(dict)
    for r in individual:
        ind_by_window[r.window][r.miner] = r
    pending = []
    for w in testable:
        ind = ind_by_window[w.id]
        eligible = sorted(m for m, r in ind.items() if r.blocks >= min_blocks)
        candidates = list(combinations(eligible, 2))
        for (a, b), (c_pair, c_cross) in zip(candidates, _pair_counts(w, candidates)):
            h_pair = (ind[a].blocks + ind[b].blocks) / w.T
            p = TestStatistic(c=c_pair, T=w.T, h=h_pair).p_value()
            pending.append((w, a, b, c_pair, c_cross, h_pair, p))
    adj = bh_adjust([item[6] for item in pending])
    results = []
    for (w, a, b, c_pair, c_cross, h_pair, p), p_adj in zip(pending, adj):
        ind = ind_by_window[w.id]
        results.append(
            PairWindowResult(
                a=a, b=b, window=w.id, c_pair=c_pair, c_cross=c_cross,
                h_pair=h_pair, p=p, p_adj=p_adj,
                is_cartel=(p_adj < fdr and ind[a].p_adj >= fdr and ind[b].p_adj >= fdr),
            )
        )
    return results


def build_network(pair_results, individual) -> CartelNetwork:
    """Aggregate flagged pairs into a weighted undirected network.

    Edge weight counts the windows in which the pair was a cartel; node size
    is the miner's mean plug-in power over all its active windows.
    """
    weights: dict[tuple[str, str], int] = defaultdict(int)
    for r in pair_results:
        if r.is_cartel:
            weights[tuple(sorted((r.a, r.b)))] += 1
    powers: dict[str, list[float]] = defaultdict(list)
    for r in individual:
        powers[r.miner].append(r.h_hat)
    degree: dict[str, int] = defaultdict(int)
    for a, b in weights:
        degree[a] += 1
        degree[b] += 1
    nodes = tuple(
        CartelNode(
            miner=m,
            mean_power=sum(powers[m]) / len(powers[m]) if powers[m] else 0.0,
            degree=degree[m],
        )
        for m in sorted(degree)
    )
    edges = tuple((a, b, weights[(a, b)]) for a, b in sorted(weights))
    return CartelNetwork(nodes=nodes, edges=edges)


def to_dot(network: CartelNetwork) -> str:
    """DOT-format dump of the cartel network for external renderers."""
    lines = ["graph cartels {"]
    for node in network.nodes:
        lines.append(f'  "{node.miner}" [power={node.mean_power:.6f}];')
    for a, b, w in network.edges:
        lines.append(f'  "{a}" -- "{b}" [weight={w}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
