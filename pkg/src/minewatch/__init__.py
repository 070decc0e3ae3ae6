"""minewatch: selfish-mining and cartel forensics for PoW block data.

The detection core tests each miner's count of consecutively mined block
pairs against its exact null distribution, with Benjamini-Hochberg control of
the false discovery rate across miners, pairwise tests for coordinated
groups, UTXO address clustering to consolidate miner identities, and a
withholding-attack simulator for calibration.
"""

__version__ = "0.1.0"

from .cartel import (
    CartelNetwork,
    CartelNode,
    PairWindowResult,
    build_network,
    count_cross_runs,
    count_pair_runs,
    run_pair_detection,
    test_pairs,
    to_dot,
)
from .cluster import (
    AddressPartition,
    PoolTagMap,
    Transaction,
    cluster_transactions,
    h1_multi_input,
    h2_optimal_change,
    hp_peeling_chain,
    relabel_blocks,
    tag_unknown_miners,
    unknown_share,
)
from .detect import (
    BlockRecord,
    DetectionReport,
    MinerSummary,
    MinerWindowResult,
    PowerBucketStat,
    Window,
    WindowPolicy,
    bh_adjust,
    count_runs,
    criterion_bars,
    estimate_power,
    power_profile,
    run_detection,
    split_windows,
    summarize_miners,
    test_window,
)
from .runstat import (
    RunCountDistribution,
    TestStatistic,
    critical_count,
    enumerate_bruteforce,
    p_value,
    pmf_chain,
    pmf_ling,
    sample_runcount,
)
from .simkit import (
    SimResult,
    StrategyParams,
    simulate_cartel,
    simulate_honest,
    simulate_selfish,
)

__all__ = [name for name in dir() if not name.startswith("_")]
