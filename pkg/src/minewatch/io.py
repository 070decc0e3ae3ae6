"""Parsing and persistence: block files, transaction files, result stores.

File formats are plain CSV (comma-separated, UTF-8, RFC-4180 quoting, LF line
endings) or JSON-lines; timestamps are always epoch seconds UTC.  Result
directories are written deterministically: fixed file set, sorted rows,
shortest-roundtrip float formatting, and a manifest with a content digest per
file, so identical stores produce byte-identical output.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cartel import CartelNetwork, PairWindowResult, to_dot
from .cluster import PoolTagMap
from .detect import (
    BlockRecord,
    MinerSummary,
    MinerWindowResult,
    PowerBucketStat,
    Window,
)

__all__ = [
    "parse_blocks",
    "write_blocks",
    "parse_transactions",
    "ResultStore",
    "write_results",
    "write_manifest",
    "RESULT_FILES",
]

BLOCK_FIELDS = ("height", "timestamp", "miner")

RESULT_FILES = (
    "windows.csv",
    "miner_results.csv",
    "miner_summary.csv",
    "power_profile.csv",
    "pair_results.csv",
    "cartel_edges.csv",
    "cartel_nodes.csv",
    "clusters.csv",
    "tags.csv",
    "cartel.dot",
)


def _detect_format(path, fmt: str | None) -> str:
    if fmt:
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"format must be 'csv' or 'jsonl', got {fmt!r}")
        return fmt
    suffix = Path(path).suffix.lower()
    return "jsonl" if suffix in (".jsonl", ".json", ".ndjson") else "csv"


def _make_block(raw: dict, line: int) -> BlockRecord:
    try:
        height = int(raw["height"])
        timestamp = int(raw["timestamp"])
        miner = str(raw["miner"]).strip()
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"line {line}: bad block record ({exc})") from None
    pool = raw.get("pool")
    pool = str(pool).strip() if pool not in (None, "") else None
    if not miner and not pool:
        raise ValueError(f"line {line}: miner label is empty")
    # a named-pool tag takes precedence as the attribution label
    return BlockRecord(height=height, timestamp=timestamp,
                       miner=pool if pool else miner, pool=pool, address=miner)


def parse_blocks(path, fmt: str | None = None) -> list[BlockRecord]:
    """Read and validate an ordered block file (CSV or JSON-lines)."""
    fmt = _detect_format(path, fmt)
    records: list[BlockRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not set(BLOCK_FIELDS) <= set(reader.fieldnames):
                raise ValueError(f"{path}: header must contain columns {BLOCK_FIELDS}")
            rows = enumerate(reader, start=2)
        else:
            rows = ((i, json.loads(line)) for i, line in enumerate(fh, start=1) if line.strip())
        for line, raw in rows:
            rec = _make_block(raw, line)
            if records:
                if rec.height == records[-1].height:
                    raise ValueError(f"line {line}: duplicate height {rec.height}")
                if rec.height < records[-1].height:
                    raise ValueError(f"line {line}: height {rec.height} not increasing")
            records.append(rec)
    return records


def write_blocks(records, path, fmt: str | None = None) -> None:
    """Write block records; the pool column appears only when used.

    The miner column holds the raw address when one is known; the effective
    label is reconstructed on parse via the pool-precedence rule.
    """
    fmt = _detect_format(path, fmt)
    records = list(records)
    has_pool = any(r.pool is not None for r in records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(BLOCK_FIELDS + (("pool",) if has_pool else ()))
            for r in records:
                row = [r.height, r.timestamp, r.address if r.address else r.miner]
                if has_pool:
                    row.append(r.pool if r.pool is not None else "")
                writer.writerow(row)
        else:
            for r in records:
                obj = {
                    "height": r.height,
                    "timestamp": r.timestamp,
                    "miner": r.address if r.address else r.miner,
                }
                if r.pool is not None:
                    obj["pool"] = r.pool
                fh.write(json.dumps(obj, sort_keys=True) + "\n")


def _parse_io_list(text: str, line: int):
    """'addr:amount;addr:amount' -> ((addr, amount), ...)."""
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split(";"):
        addr, sep, amount = part.rpartition(":")
        if not sep:
            raise ValueError(f"line {line}: bad address:amount entry {part!r}")
        out.append((addr, int(amount)))
    return tuple(out)


def parse_transactions(path, fmt: str | None = None):
    """Read a transaction file for clustering (CSV or JSON-lines).

    CSV columns: id, is_coinbase, inputs, outputs, optional spent_by with
    'addr:amount;...' packing and ';'-separated spender ids (empty = unspent).
    JSON-lines fields mirror the Transaction dataclass.
    """
    from .cluster import Transaction

    fmt = _detect_format(path, fmt)
    txs = []
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            reader = csv.DictReader(fh)
            for line, raw in enumerate(reader, start=2):
                try:
                    spent_raw = raw.get("spent_by", "")
                    spent = None
                    if spent_raw is not None and spent_raw.strip():
                        spent = tuple(s if s else None for s in spent_raw.split(";"))
                    txs.append(
                        Transaction(
                            id=raw["id"],
                            inputs=_parse_io_list(raw.get("inputs", ""), line),
                            outputs=_parse_io_list(raw.get("outputs", ""), line),
                            is_coinbase=raw.get("is_coinbase", "").strip().lower()
                            in ("1", "true", "yes"),
                            spent_by=spent,
                        )
                    )
                except (KeyError, ValueError) as exc:
                    raise ValueError(f"line {line}: bad transaction ({exc})") from None
        else:
            for line, text in enumerate(fh, start=1):
                if not text.strip():
                    continue
                raw = json.loads(text)
                spent = raw.get("spent_by")
                txs.append(
                    Transaction(
                        id=raw["id"],
                        inputs=tuple((a, int(v)) for a, v in raw.get("inputs", [])),
                        outputs=tuple((a, int(v)) for a, v in raw.get("outputs", [])),
                        is_coinbase=bool(raw.get("is_coinbase", False)),
                        spent_by=tuple(spent) if spent is not None else None,
                    )
                )
    return txs


@dataclass
class ResultStore:
    """Everything one pipeline run produced, ready for deterministic export."""

    meta: dict = field(default_factory=dict)
    windows: list[Window] = field(default_factory=list)
    miner_results: list[MinerWindowResult] = field(default_factory=list)
    summaries: list[MinerSummary] = field(default_factory=list)
    power_buckets: list[PowerBucketStat] = field(default_factory=list)
    pair_results: list[PairWindowResult] = field(default_factory=list)
    network: CartelNetwork = field(default_factory=lambda: CartelNetwork((), ()))
    clusters: dict = field(default_factory=dict)  # cluster id -> members
    tags: PoolTagMap | None = None


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_manifest(out_dir, names, meta: dict) -> dict:
    """Digest the named files in out_dir into manifest.json; returns it."""
    out = Path(out_dir)
    manifest = {"meta": dict(sorted(meta.items())), "files": {}}
    for name in names:
        data = (out / name).read_bytes()
        manifest["files"][name] = {
            "sha256": hashlib.sha256(data).hexdigest(),
            "bytes": len(data),
        }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def write_results(store: ResultStore, out_dir, extra_files=()) -> dict:
    """Write the fixed result file set plus manifest.json; returns the manifest.

    Rows are emitted in deterministic sorted order and the manifest carries a
    sha256 digest per file.  Nothing machine-specific (paths, wall-clock) is
    written, so equal stores yield byte-identical directories.  extra_files
    names already-written files in out_dir to include in the manifest.
    """
    known_ids = {w.id for w in store.windows}
    for r in list(store.miner_results) + list(store.pair_results):
        if r.window not in known_ids:
            raise ValueError(f"result references unknown window id {r.window}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    _write_csv(
        out / "windows.csv",
        ("window", "coin", "span", "T"),
        [(w.id, w.coin, w.span, w.T) for w in store.windows],
    )
    _write_csv(
        out / "miner_results.csv",
        ("window", "miner", "blocks", "h_hat", "c", "p", "p_adj", "flagged"),
        [
            (r.window, r.miner, r.blocks, r.h_hat, r.c, r.p, r.p_adj, r.flagged)
            for r in sorted(store.miner_results, key=lambda r: (r.window, r.miner))
        ],
    )
    _write_csv(
        out / "miner_summary.csv",
        ("miner", "active_windows", "p_adj_min", "p_adj_q1", "p_adj_median",
         "p_adj_q3", "p_adj_max", "flagged_fraction"),
        [
            (s.miner, s.active_windows, s.p_min, s.p_q1, s.p_median, s.p_q3,
             s.p_max, s.flagged_fraction)
            for s in sorted(store.summaries, key=lambda s: s.miner)
        ],
    )
    _write_csv(
        out / "power_profile.csv",
        ("lo", "hi", "observations", "abnormal_fraction"),
        [(b.lo, b.hi, b.observations, b.abnormal_fraction) for b in store.power_buckets],
    )
    _write_csv(
        out / "pair_results.csv",
        ("window", "miner_a", "miner_b", "c_pair", "c_cross", "h_pair", "p",
         "p_adj", "is_cartel"),
        [
            (r.window, r.a, r.b, r.c_pair, r.c_cross, r.h_pair, r.p, r.p_adj, r.is_cartel)
            for r in sorted(store.pair_results, key=lambda r: (r.window, r.a, r.b))
        ],
    )
    _write_csv(
        out / "cartel_edges.csv",
        ("miner_a", "miner_b", "weight"),
        list(store.network.edges),
    )
    _write_csv(
        out / "cartel_nodes.csv",
        ("miner", "mean_power", "degree"),
        [(n.miner, n.mean_power, n.degree) for n in store.network.nodes],
    )
    _write_csv(
        out / "clusters.csv",
        ("address", "cluster_id"),
        sorted(
            (addr, cid)
            for cid, members in store.clusters.items()
            for addr in members
        ),
    )
    tag_rows = []
    if store.tags is not None:
        tag_rows = [
            (addr, pool, heur) for addr, (pool, heur) in sorted(store.tags.tags.items())
        ]
    _write_csv(out / "tags.csv", ("address", "pool", "provenance"), tag_rows)
    (out / "cartel.dot").write_text(to_dot(store.network), encoding="utf-8")
    return write_manifest(out, RESULT_FILES + tuple(extra_files), store.meta)
