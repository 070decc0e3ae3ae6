"""Command-line frontend for the detection pipeline.

Subcommands: dist, detect, cartel, cluster, simulate, report.  Every
subcommand is deterministic given its inputs, flags and seed.  Exit codes:
0 success, 1 runtime/I-O failure, 2 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import __version__
from . import cartel as cartelmod
from . import cluster as clustermod
from . import detect as detectmod
from . import io as iomod
from . import runstat, simkit

__all__ = ["main", "build_parser"]


def _kahan_tails(pmf):
    """tails[c] = P(X >= c) with compensated accumulation of the head."""
    tails = [1.0]
    head = 0.0
    comp = 0.0
    for x in range(len(pmf) - 1):
        y = float(pmf[x]) - comp
        t = head + y
        comp = (t - head) - y
        head = t
        tails.append(max(0.0, 1.0 - head))
    return tails


def cmd_dist(args) -> int:
    dist = runstat.pmf_chain(args.h, args.T)
    cstar = runstat.critical_count(args.h, args.T, args.alpha)
    tails = _kahan_tails(dist.pmf)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("x", "pmf", "tail"))
    for x, (p, t) in enumerate(zip(dist.pmf, tails)):
        writer.writerow((x, repr(float(p)), repr(float(t))))
    print(f"c*={cstar}")
    return 0


def _resolve_policy(args) -> detectmod.WindowPolicy:
    if args.policy:
        return detectmod.WindowPolicy.parse(args.policy)
    coin = (args.coin or "").lower()
    if coin in detectmod.DEFAULT_POLICIES:
        return detectmod.DEFAULT_POLICIES[coin]
    raise ValueError(
        f"no default window policy for coin {args.coin!r}; pass --policy "
        "(monthly | weekly | daily | days:N | count:N)"
    )


def _meta(args, command: str, policy=None) -> dict:
    meta = {
        "tool": "minewatch",
        "version": __version__,
        "command": command,
        "fdr": getattr(args, "fdr", None),
        "coin": getattr(args, "coin", "") or "",
    }
    if policy is not None:
        meta["policy"] = str(policy)
    if getattr(args, "family", None):
        meta["family"] = args.family
    if getattr(args, "min_blocks", None) is not None:
        meta["min_blocks"] = args.min_blocks
    return {k: v for k, v in meta.items() if v is not None}


def _check_fdr(fdr: float) -> float:
    if not (0.0 < fdr < 1.0):
        raise ValueError(f"--fdr must be in (0, 1), got {fdr}")
    return fdr


def _run_pipeline(args, with_pairs: bool):
    fdr = _check_fdr(args.fdr)
    policy = _resolve_policy(args)
    blocks = iomod.parse_blocks(args.input, args.format)
    report = detectmod.run_detection(blocks, policy, fdr=fdr,
                                     family=args.family, coin=args.coin or "")
    summaries = detectmod.summarize_miners(report.results)
    buckets = detectmod.power_profile(report.results)
    store = iomod.ResultStore(
        meta=_meta(args, "cartel" if with_pairs else "detect", policy),
        windows=list(report.windows),
        miner_results=list(report.results),
        summaries=summaries,
        power_buckets=buckets,
    )
    if with_pairs:
        store.pair_results = cartelmod.run_pair_detection(
            report.windows, report.results, fdr=fdr,
            min_blocks=args.min_blocks, family=args.family,
        )
        store.network = cartelmod.build_network(store.pair_results, report.results)
    iomod.write_results(store, args.out)
    if not args.quiet:
        for notice in report.notices:
            print(notice)
        by_window = {}
        for r in report.results:
            agg = by_window.setdefault(r.window, [0, 0])
            agg[0] += 1
            agg[1] += int(r.flagged)
        for w in report.windows:
            if w.id in by_window:
                tested, flagged = by_window[w.id]
                print(f"window {w.id} {w.span}: {flagged}/{tested} miners flagged")
        print("criterion bars (share of miners abnormal, by p_adj quantile / by flagged share):")
        for row in detectmod.criterion_bars(summaries, level=fdr):
            q = row["fraction_quantile"]
            f = row["fraction_flagshare"]
            qs = "n/a" if q is None else f"{q:.3f}"
            fs = "n/a" if f is None else f"{f:.3f}"
            print(f"  {row['criterion']:>6}: quantile={qs} flagshare={fs}")
        if with_pairs:
            n_flagged = sum(1 for p in store.pair_results if p.is_cartel)
            print(f"cartel pair-window flags: {n_flagged}; edges: {len(store.network.edges)}")
            for a, b, w in sorted(store.network.edges, key=lambda e: (-e[2], e[0], e[1]))[:10]:
                print(f"  {a} -- {b}: weight {w}")
    return 0


def cmd_detect(args) -> int:
    return _run_pipeline(args, with_pairs=False)


def cmd_cartel(args) -> int:
    return _run_pipeline(args, with_pairs=True)


def _read_pools_csv(path) -> dict[str, set]:
    known: dict[str, set] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"address", "pool"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: pools file needs columns address,pool")
        for row in reader:
            known.setdefault(row["pool"], set()).add(row["address"])
    return known


def cmd_cluster(args) -> int:
    txs = iomod.parse_transactions(args.input, args.format)
    heuristics = tuple(h for h in clustermod.HEURISTIC_ORDER if h not in (args.skip or ()))
    partition = clustermod.cluster_transactions(txs, heuristics=heuristics)
    known: dict[str, set] = {}
    if args.pools:
        for pool, addrs in _read_pools_csv(args.pools).items():
            known.setdefault(pool, set()).update(addrs)
    blocks = None
    if args.blocks:
        blocks = iomod.parse_blocks(args.blocks)
        for b in blocks:
            if b.pool is not None and b.address:
                known.setdefault(b.pool, set()).add(b.address)
    tags = clustermod.tag_unknown_miners(partition, known) if known else None
    store = iomod.ResultStore(
        meta=_meta(args, "cluster"),
        clusters=partition.clusters(),
        tags=tags,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extra = []
    if blocks is not None and tags is not None:
        before = clustermod.unknown_share(blocks)
        relabelled = clustermod.relabel_blocks(blocks, tags)
        after = clustermod.unknown_share(relabelled)
        with open(out / "unknown_share.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("share_before", "share_after"))
            w.writerow((repr(before), repr(after)))
        extra.append("unknown_share.csv")
        if args.relabel_out:
            Path(args.relabel_out).parent.mkdir(parents=True, exist_ok=True)
            iomod.write_blocks(relabelled, args.relabel_out)
        if not args.quiet:
            print(f"unknown block share: {before:.4f} -> {after:.4f}")
    iomod.write_results(store, out, extra_files=extra)
    if not args.quiet:
        n_multi = sum(1 for members in store.clusters.values() if len(members) > 1)
        print(f"clusters: {len(store.clusters)} ({n_multi} with >1 address)")
        if tags is not None:
            print(f"tagged addresses: {len(tags.tags)}; conflicts: {len(tags.conflicts)}")
            for addr, pools in sorted(tags.conflicts.items()):
                print(f"  conflict: {addr} touches pools {', '.join(pools)}")
    return 0


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def cmd_simulate(args) -> int:
    horizon = args.horizon
    if args.mode == "honest":
        if args.powers:
            powers = _parse_floats(args.powers)
        else:
            powers = [1.0 / args.honest] * args.honest
        labels = [f"miner-{i}" for i in range(len(powers))]
        seq = simkit.simulate_honest(powers, horizon, args.seed, labels=labels)
        stale = 0
        share = None
    elif args.mode == "selfish":
        params = simkit.StrategyParams(alpha_pow=args.alpha, gamma=args.gamma,
                                       horizon=horizon, seed=args.seed)
        honest = [f"honest-{i}" for i in range(args.honest)]
        result = simkit.simulate_selfish(params, attacker=args.attacker, honest_labels=honest)
        seq, stale, share = list(result.sequence), result.stale_count, result.realized_share
    else:  # cartel
        shares = _parse_floats(args.shares)
        if len(shares) != 2:
            raise ValueError(f"--shares needs two comma-separated values, got {args.shares!r}")
        members = [m.strip() for m in args.members.split(",")]
        if len(members) != 2:
            raise ValueError(f"--members needs two comma-separated labels, got {args.members!r}")
        honest = [f"honest-{i}" for i in range(args.honest)]
        result = simkit.simulate_cartel(members, shares, args.gamma, horizon,
                                        args.seed, honest_labels=honest)
        seq, stale, share = list(result.sequence), result.stale_count, result.realized_share
    records = [
        detectmod.BlockRecord(height=i + 1, timestamp=args.start + i * args.interval, miner=m)
        for i, m in enumerate(seq)
    ]
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    iomod.write_blocks(records, args.out, args.format)
    if not args.quiet:
        msg = f"wrote {len(records)} blocks to {args.out}"
        if share is not None:
            msg += f" (attacker share {share:.4f}, stale honest blocks {stale})"
        print(msg)
    return 0


def _read_csv_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args) -> int:
    res = Path(args.results)
    if not (res / "manifest.json").exists():
        raise ValueError(f"{res} does not look like a results directory (no manifest.json)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []

    miner_rows = _read_csv_rows(res / "miner_results.csv")
    with open(out / "power_stack.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("window", "miner", "share"))
        for row in sorted(miner_rows, key=lambda r: (int(r["window"]), r["miner"])):
            w.writerow((row["window"], row["miner"], row["h_hat"]))
    names.append("power_stack.csv")

    src_unknown = res / "unknown_share.csv"
    with open(out / "unknown_share.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("share_before", "share_after"))
        if src_unknown.exists():
            for row in _read_csv_rows(src_unknown):
                w.writerow((row["share_before"], row["share_after"]))
    names.append("unknown_share.csv")

    bucket_rows = _read_csv_rows(res / "power_profile.csv")
    with open(out / "power_buckets.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("lo", "hi", "observations", "abnormal_fraction"))
        for row in bucket_rows:
            w.writerow((row["lo"], row["hi"], row["observations"], row["abnormal_fraction"]))
    names.append("power_buckets.csv")

    edge_rows = _read_csv_rows(res / "cartel_edges.csv")
    with open(out / "cartel_edges.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("miner_a", "miner_b", "weight"))
        for row in sorted(edge_rows, key=lambda r: (-int(r["weight"]), r["miner_a"], r["miner_b"])):
            w.writerow((row["miner_a"], row["miner_b"], row["weight"]))
    names.append("cartel_edges.csv")

    iomod.write_manifest(out, names, {"tool": "minewatch", "version": __version__,
                                      "command": "report"})
    if not args.quiet:
        print(f"report tables written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minewatch",
        description="Detect selfish mining and mining cartels in PoW block attribution data.",
    )
    parser.add_argument("--version", action="version", version=f"minewatch {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("dist", help="dump the exact run-count pmf, tails and critical value")
    p.add_argument("--h", type=float, required=True, help="success probability (power share)")
    p.add_argument("--T", type=int, required=True, help="sequence length in blocks")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level for c*")
    p.set_defaults(func=cmd_dist)

    def common_pipeline_args(p):
        p.add_argument("--input", required=True, help="block file (csv or jsonl)")
        p.add_argument("--format", choices=("csv", "jsonl"), default=None)
        p.add_argument("--coin", default="", help="coin name (sets the default window policy)")
        p.add_argument("--policy", default=None,
                       help="monthly | weekly | daily | days:N | count:N")
        p.add_argument("--fdr", type=float, default=0.05, help="target false discovery rate")
        p.add_argument("--family", choices=("window", "global"), default="window",
                       help="BH correction family scope")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("detect", help="test every miner per window and flag abnormal ones")
    common_pipeline_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("cartel", help="detect plus pairwise cartel tests and network export")
    common_pipeline_args(p)
    p.add_argument("--min-blocks", type=int, default=5, dest="min_blocks",
                   help="per-member block floor for candidate pairs (1 = exhaustive)")
    p.set_defaults(func=cmd_cartel)

    p = sub.add_parser("cluster", help="cluster UTXO addresses and tag unknown miners")
    p.add_argument("--input", required=True, help="transaction file (csv or jsonl)")
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p.add_argument("--blocks", default=None, help="block file providing named-pool addresses")
    p.add_argument("--pools", default=None, help="csv of address,pool seeds")
    p.add_argument("--skip", action="append", choices=("H1", "H2", "Hp"),
                   help="heuristics to skip (e.g. Hp when spend links are absent)")
    p.add_argument("--relabel-out", default=None, dest="relabel_out",
                   help="write the block file with tagged addresses relabelled")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("simulate", help="generate honest / selfish / cartel block files")
    p.add_argument("--mode", choices=("honest", "selfish", "cartel"), required=True)
    p.add_argument("--alpha", type=float, default=0.3, help="attacker hash share (selfish)")
    p.add_argument("--gamma", type=float, default=0.5,
                   help="honest share mining the attacker branch during ties")
    p.add_argument("--shares", default="0.15,0.15", help="cartel member shares, comma separated")
    p.add_argument("--members", default="cartel-0,cartel-1", help="cartel member labels")
    p.add_argument("--attacker", default="selfish", help="attacker label (selfish mode)")
    p.add_argument("--honest", type=int, default=19, help="number of honest miners")
    p.add_argument("--powers", default=None, help="explicit power simplex (honest mode)")
    p.add_argument("--horizon", type=int, default=5000, help="canonical blocks to emit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", type=int, default=1_577_836_800, help="first block timestamp")
    p.add_argument("--interval", type=int, default=600, help="seconds between blocks")
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p.add_argument("--out", required=True, help="block file to write")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="join stored results into plot-ready tables")
    p.add_argument("--results", required=True, help="directory written by detect/cartel/cluster")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
