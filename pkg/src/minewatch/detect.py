"""Per-window miner testing with false-discovery-rate control.

The block stream is split into windows (calendar intervals or fixed block
counts).  Within each window every active miner is tested: its block share is
the plug-in estimate of its power, its overlapping run count is compared to
the exact null tail, and the window's p-values are adjusted with the
Benjamini-Hochberg step-up procedure.  Windows are independent; runs never
straddle a window boundary.
"""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .runstat import TestStatistic

__all__ = [
    "BlockRecord",
    "Window",
    "WindowPolicy",
    "MinerWindowResult",
    "MinerSummary",
    "PowerBucketStat",
    "DetectionReport",
    "split_windows",
    "count_runs",
    "estimate_power",
    "bh_adjust",
    "test_window",
    "summarize_miners",
    "power_profile",
    "criterion_bars",
    "run_detection",
    "DEFAULT_POLICIES",
    "DEFAULT_POWER_BINS",
]

SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class BlockRecord:
    """One block: height, mined time (epoch seconds UTC) and miner label.

    ``miner`` is the effective attribution label used by the tests.  When the
    source file carried a named-pool tag, ``pool`` records it (and ``miner``
    equals it) while ``address`` keeps the raw miner column; blocks with
    ``pool=None`` are attributed to a raw address.
    """

    height: int
    timestamp: int
    miner: str
    pool: str | None = None
    address: str | None = None

    def __post_init__(self):
        if not self.miner:
            raise ValueError(f"block {self.height}: miner label is empty")


@dataclass(frozen=True)
class Window:
    """A contiguous segment of the block stream, tested as one family."""

    id: int
    coin: str
    span: str
    sequence: tuple[str, ...]

    @property
    def T(self) -> int:
        return len(self.sequence)


@dataclass(frozen=True)
class WindowPolicy:
    """Window policy: calendar (monthly/weekly/daily/days:N) or count:N."""

    kind: str
    n: int = 0

    _CALENDAR = ("monthly", "weekly", "daily", "days")

    def __post_init__(self):
        if self.kind not in self._CALENDAR + ("count",):
            raise ValueError(f"unknown window policy kind {self.kind!r}")
        if self.kind in ("days", "count") and self.n < 1:
            raise ValueError(f"policy {self.kind!r} needs n >= 1, got {self.n}")

    @classmethod
    def parse(cls, text: str) -> "WindowPolicy":
        """Parse 'monthly' | 'weekly' | 'daily' | 'days:N' | 'count:N'."""
        text = text.strip().lower()
        if ":" in text:
            kind, _, num = text.partition(":")
            try:
                return cls(kind, int(num))
            except ValueError as exc:
                raise ValueError(f"bad window policy {text!r}") from exc
        return cls(text)

    def __str__(self) -> str:
        return f"{self.kind}:{self.n}" if self.kind in ("days", "count") else self.kind


# per-coin defaults chosen so each window holds a similar number of blocks
DEFAULT_POLICIES = {
    "btc": WindowPolicy("monthly"),
    "bch": WindowPolicy("monthly"),
    "ltc": WindowPolicy("weekly"),
    "mona": WindowPolicy("days", 5),
    "eth": WindowPolicy("daily"),
}

DEFAULT_POWER_BINS = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 1.0)


@dataclass(frozen=True)
class MinerWindowResult:
    miner: str
    window: int
    blocks: int
    h_hat: float
    c: int
    p: float
    p_adj: float
    flagged: bool


@dataclass(frozen=True)
class MinerSummary:
    """Distribution of a miner's adjusted p-values over its active windows."""

    miner: str
    active_windows: int
    p_min: float
    p_q1: float
    p_median: float
    p_q3: float
    p_max: float
    flagged_fraction: float


@dataclass(frozen=True)
class PowerBucketStat:
    lo: float
    hi: float
    observations: int
    abnormal_fraction: float | None


@dataclass(frozen=True)
class DetectionReport:
    windows: tuple[Window, ...]
    results: tuple[MinerWindowResult, ...]
    notices: tuple[str, ...]


def _window_key(policy: WindowPolicy):
    if policy.kind == "monthly":
        def key(rec: BlockRecord) -> str:
            d = datetime.fromtimestamp(rec.timestamp, tz=timezone.utc)
            return f"{d.year:04d}-{d.month:02d}"
    elif policy.kind == "weekly":
        def key(rec: BlockRecord) -> str:
            d = datetime.fromtimestamp(rec.timestamp, tz=timezone.utc)
            iso = d.isocalendar()
            return f"{iso[0]:04d}-W{iso[1]:02d}"
    elif policy.kind == "daily":
        def key(rec: BlockRecord) -> str:
            d = datetime.fromtimestamp(rec.timestamp, tz=timezone.utc)
            return f"{d.year:04d}-{d.month:02d}-{d.day:02d}"
    elif policy.kind == "days":
        # fixed n-day buckets anchored at the UTC epoch
        def key(rec: BlockRecord) -> str:
            bucket = (rec.timestamp // SECONDS_PER_DAY) // policy.n
            start = datetime.fromtimestamp(bucket * policy.n * SECONDS_PER_DAY, tz=timezone.utc)
            return f"{start.year:04d}-{start.month:02d}-{start.day:02d}+{policy.n}d"
    else:
        raise ValueError(f"no calendar key for policy {policy}")
    return key


def split_windows(blocks, policy: WindowPolicy, coin: str = "") -> list[Window]:
    """Partition an ordered block stream into non-overlapping windows.

    Calendar policies assign by timestamp in UTC (month boundaries at the
    first of the month, 00:00:00); count:N slices by position.  Consecutive
    blocks with the same calendar key form one window, so the concatenation
    of the window sequences always reproduces the input stream.
    """
    blocks = list(blocks)
    for prev, cur in zip(blocks, blocks[1:]):
        if cur.height <= prev.height:
            raise ValueError(f"blocks are not sorted by height: height {cur.height} follows {prev.height}")
    windows: list[Window] = []
    if not blocks:
        return windows
    if policy.kind == "count":
        for i in range(0, len(blocks), policy.n):
            chunk = blocks[i : i + policy.n]
            windows.append(
                Window(
                    id=len(windows),
                    coin=coin,
                    span=f"count:{chunk[0].height}-{chunk[-1].height}",
                    sequence=tuple(b.miner for b in chunk),
                )
            )
        return windows
    key = _window_key(policy)
    for span, group in itertools.groupby(blocks, key=key):
        windows.append(
            Window(
                id=len(windows),
                coin=coin,
                span=span,
                sequence=tuple(b.miner for b in group),
            )
        )
    return windows


def count_runs(window: Window, miner: str) -> int:
    """Adjacent positions where both blocks carry the miner's label."""
    seq = window.sequence
    return sum(1 for t in range(len(seq) - 1) if seq[t] == miner and seq[t + 1] == miner)


def estimate_power(window: Window, miner: str) -> float:
    """Plug-in power estimate: the miner's share of the window's blocks."""
    if window.T == 0:
        return 0.0
    return window.sequence.count(miner) / window.T


def bh_adjust(pvalues) -> list[float]:
    """Benjamini-Hochberg adjusted p-values, in the input order.

    The raw step-up value for the k-th smallest of m p-values is p_k * m / k;
    monotonicity is enforced by suffix minima and results are capped at 1.
    Downstream, rejecting everything with an adjusted value below the target
    rate is exactly the BH rule (all k <= k*, the largest k below the rate).
    """
    ps = [float(p) for p in pvalues]
    for p in ps:
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"p-values must be in [0, 1], got {p!r}")
    m = len(ps)
    if m == 0:
        return []
    order = sorted(range(m), key=ps.__getitem__)
    adj = [0.0] * m
    running = 1.0
    for rank in range(m - 1, -1, -1):
        running = min(running, ps[order[rank]] * m / (rank + 1))
        adj[order[rank]] = running
    return adj


def _window_stats(window: Window) -> list[tuple[str, int, float, int, float]]:
    """Per-miner (label, blocks, h_hat, c, raw p) for one window."""
    counts = Counter(window.sequence)
    runs: Counter[str] = Counter()
    for a, b in zip(window.sequence, window.sequence[1:]):
        if a == b:
            runs[a] += 1
    stats = []
    for miner in sorted(counts):
        blocks = counts[miner]
        h_hat = blocks / window.T
        c = runs[miner]
        stat = TestStatistic(c=c, T=window.T, h=h_hat)
        stats.append((miner, blocks, h_hat, c, stat.p_value()))
    return stats


def test_window(window: Window, fdr: float = 0.05) -> list[MinerWindowResult]:
    """Test every active miner in one window; BH family = this window."""
    if window.T < 2:
        raise ValueError(f"window {window.id} has T={window.T} < 2")
    stats = _window_stats(window)
    adj = bh_adjust([s[4] for s in stats])
    return [
        MinerWindowResult(
            miner=miner,
            window=window.id,
            blocks=blocks,
            h_hat=h_hat,
            c=c,
            p=p,
            p_adj=a,
            flagged=a < fdr,
        )
        for (miner, blocks, h_hat, c, p), a in zip(stats, adj)
    ]


def run_detection(blocks, policy: WindowPolicy, fdr: float = 0.05,
                  family: str = "window", coin: str = "") -> DetectionReport:
    """Full pipeline: split, test each window, adjust within the chosen family.

    family='window' adjusts per window (default); family='global' pools every
    miner-window p-value into a single BH family.
    """
    if family not in ("window", "global"):
        raise ValueError(f"family must be 'window' or 'global', got {family!r}")
    windows = split_windows(blocks, policy, coin=coin)
    notices = []
    results: list[MinerWindowResult] = []
    if family == "window":
        for w in windows:
            if w.T < 2:
                notices.append(f"window {w.id} ({w.span}): skipped, T={w.T} < 2")
                continue
            results.extend(test_window(w, fdr=fdr))
    else:
        pending: list[tuple[Window, tuple]] = []
        for w in windows:
            if w.T < 2:
                notices.append(f"window {w.id} ({w.span}): skipped, T={w.T} < 2")
                continue
            for s in _window_stats(w):
                pending.append((w, s))
        adj = bh_adjust([s[4] for _, s in pending])
        for ((w, (miner, blocks, h_hat, c, p)), a) in zip(pending, adj):
            results.append(
                MinerWindowResult(
                    miner=miner, window=w.id, blocks=blocks, h_hat=h_hat,
                    c=c, p=p, p_adj=a, flagged=a < fdr,
                )
            )
    return DetectionReport(tuple(windows), tuple(results), tuple(notices))


def summarize_miners(results) -> list[MinerSummary]:
    """Quantiles of adjusted p-values per miner across its active windows.

    Quantiles interpolate linearly between order statistics at Hazen plotting
    positions ((k - 0.5) / n), so e.g. the first quartile of two values is the
    smaller one and their median is the midpoint.
    """
    by_miner: dict[str, list[MinerWindowResult]] = defaultdict(list)
    for r in results:
        by_miner[r.miner].append(r)
    summaries = []
    for miner in sorted(by_miner):
        rs = by_miner[miner]
        padj = np.array([r.p_adj for r in rs])
        q = np.percentile(padj, [0, 25, 50, 75, 100], method="hazen")
        summaries.append(
            MinerSummary(
                miner=miner,
                active_windows=len(rs),
                p_min=float(q[0]),
                p_q1=float(q[1]),
                p_median=float(q[2]),
                p_q3=float(q[3]),
                p_max=float(q[4]),
                flagged_fraction=sum(r.flagged for r in rs) / len(rs),
            )
        )
    return summaries


def power_profile(results, bin_edges=DEFAULT_POWER_BINS) -> list[PowerBucketStat]:
    """Abnormal fraction of miner-window observations per power bucket.

    Buckets are half-open [e_i, e_{i+1}); observations outside the edges are
    ignored; empty buckets report no fraction.
    """
    edges = [float(e) for e in bin_edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be strictly increasing")
    if edges[0] < 0.0 or edges[-1] > 1.0:
        raise ValueError("bin edges must lie within [0, 1]")
    buckets = [[0, 0] for _ in range(len(edges) - 1)]  # [observations, abnormal]
    for r in results:
        idx = np.searchsorted(edges, r.h_hat, side="right") - 1
        if 0 <= idx < len(buckets) and r.h_hat < edges[idx + 1]:
            buckets[idx][0] += 1
            buckets[idx][1] += int(r.flagged)
    return [
        PowerBucketStat(
            lo=edges[i],
            hi=edges[i + 1],
            observations=n,
            abnormal_fraction=(k / n) if n else None,
        )
        for i, (n, k) in enumerate(buckets)
    ]


_BARS = (
    ("min", "p_min", 0.0),
    ("q25", "p_q1", 0.25),
    ("median", "p_median", 0.50),
    ("q75", "p_q3", 0.75),
    ("max", "p_max", 1.0),
)


def criterion_bars(summaries, level: float = 0.05) -> list[dict]:
    """Fraction of miners abnormal under each quantile criterion.

    Two readings are reported per bar: the quantile reading (the named
    quantile of the miner's adjusted p-values is below `level`) and the
    flag-share reading (the miner was flagged in at least that share of its
    active windows).  The quantile reading is the headline.
    """
    summaries = list(summaries)
    n = len(summaries)
    rows = []
    for name, attr, share in _BARS:
        if n == 0:
            rows.append({"criterion": name, "fraction_quantile": None, "fraction_flagshare": None})
            continue
        quant = sum(getattr(s, attr) < level for s in summaries) / n
        if share == 0.0:
            flag = sum(s.flagged_fraction > 0.0 for s in summaries) / n
        else:
            flag = sum(s.flagged_fraction >= share for s in summaries) / n
        rows.append({"criterion": name, "fraction_quantile": quant, "fraction_flagshare": flag})
    return rows
