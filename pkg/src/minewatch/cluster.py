"""UTXO address clustering heuristics and pool tagging.

Three heuristics merge addresses into a union-find partition:

* H1 (multi-input): addresses spending in the same transaction share an owner.
* H2 (optimal change): an output strictly smaller than every input is change,
  but only when exactly one output qualifies (multiple candidates make the
  inference unsafe and union-find merges are irreversible).
* Hp (peeling chain): in a chain of 1-input/2-output transactions, the output
  that continues the chain is change; only interior chain members (those with
  a qualifying predecessor and successor) are merged.

Tagging assigns unlabelled addresses to named pools in priority order
H1 > H2 > Hp: an address is tagged when its cluster at that stage touches
addresses of exactly one pool.  Clusters touching two or more pools are
conflicts and stay untagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "Transaction",
    "AddressPartition",
    "PoolTagMap",
    "h1_multi_input",
    "h2_optimal_change",
    "hp_peeling_chain",
    "cluster_transactions",
    "tag_unknown_miners",
    "unknown_share",
    "relabel_blocks",
    "HEURISTIC_ORDER",
]

HEURISTIC_ORDER = ("H1", "H2", "Hp")


@dataclass(frozen=True)
class Transaction:
    """A UTXO transaction with (address, amount) inputs and outputs.

    Amounts are non-negative integers in base units.  ``spent_by`` optionally
    names, per output, the transaction that spends it (needed by Hp).
    """

    id: str
    inputs: tuple[tuple[str, int], ...]
    outputs: tuple[tuple[str, int], ...]
    is_coinbase: bool = False
    spent_by: tuple[str | None, ...] | None = None

    def __post_init__(self):
        if self.is_coinbase and self.inputs:
            raise ValueError(f"tx {self.id}: coinbase transactions have no spendable inputs")
        for addr, amount in self.inputs + self.outputs:
            if amount < 0:
                raise ValueError(f"tx {self.id}: negative amount for {addr}")
        if self.spent_by is not None and len(self.spent_by) != len(self.outputs):
            raise ValueError(f"tx {self.id}: spent_by length must match outputs")


class AddressPartition:
    """Union-find over address labels with per-merge heuristic provenance.

    Merges are monotone (clusters never split) and every merge request is
    logged with its heuristic tag, so the partition as of any heuristic-prefix
    stage can be replayed exactly.
    """

    def __init__(self):
        self._parent: dict[str, str] = {}
        self.merges: list[tuple[str, str, str]] = []

    def add(self, addr: str) -> None:
        if addr not in self._parent:
            self._parent[addr] = addr

    def find(self, addr: str) -> str:
        self.add(addr)
        root = addr
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[addr] != root:  # path compression
            self._parent[addr], addr = root, self._parent[addr]
        return root

    def union(self, a: str, b: str, heuristic: str) -> None:
        if heuristic not in HEURISTIC_ORDER:
            raise ValueError(f"unknown heuristic tag {heuristic!r}")
        self.merges.append((a, b, heuristic))
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # keep the lexicographically smaller root for deterministic clusters
        if rb < ra:
            ra, rb = rb, ra
        self._parent[rb] = ra

    def same(self, a: str, b: str) -> bool:
        return self.find(a) == self.find(b)

    @property
    def addresses(self) -> list[str]:
        return sorted(self._parent)

    def clusters(self) -> dict[str, tuple[str, ...]]:
        """Cluster id (smallest member) -> sorted members."""
        groups: dict[str, list[str]] = {}
        for addr in self._parent:
            groups.setdefault(self.find(addr), []).append(addr)
        return {min(members): tuple(sorted(members)) for members in groups.values()}

    def restricted(self, heuristics) -> "AddressPartition":
        """Replay only the merges of the given heuristics, in log order."""
        allowed = set(heuristics)
        sub = AddressPartition()
        for addr in self._parent:
            sub.add(addr)
        for a, b, tag in self.merges:
            if tag in allowed:
                sub.union(a, b, tag)
        return sub


@dataclass(frozen=True)
class PoolTagMap:
    """Address -> (pool, heuristic provenance), plus untagged and conflicts."""

    tags: dict[str, tuple[str, str]]
    unknown: tuple[str, ...]
    conflicts: dict[str, tuple[str, ...]] = field(default_factory=dict)


def h1_multi_input(txs, partition: AddressPartition) -> AddressPartition:
    """Merge all input addresses of every non-coinbase multi-input spend."""
    for tx in txs:
        if tx.is_coinbase:
            continue
        addrs = sorted({addr for addr, _ in tx.inputs})
        for other in addrs[1:]:
            partition.union(addrs[0], other, "H1")
        for addr in addrs:
            partition.add(addr)
    return partition


def h2_optimal_change(tx: Transaction) -> str | None:
    """The unique output strictly below every input amount, if any.

    Returns None for coinbase transactions, when no output qualifies, or when
    the candidate is ambiguous (two or more qualifying outputs).
    """
    if tx.is_coinbase or not tx.inputs or not tx.outputs:
        return None
    floor = min(amount for _, amount in tx.inputs)
    candidates = [addr for addr, amount in tx.outputs if amount < floor]
    if len(candidates) == 1:
        return candidates[0]
    return None


def _peel_shape(tx: Transaction) -> bool:
    return not tx.is_coinbase and len(tx.inputs) == 1 and len(tx.outputs) == 2


def hp_peeling_chain(txs, partition: AddressPartition) -> AddressPartition:
    """Merge the continuing change output of interior peeling-chain members.

    A member qualifies when it has the 1-input/2-output shape, is fed by a
    transaction of the same shape, and exactly one of its outputs is spent by
    a transaction of the same shape.  Without spend references nothing merges.
    """
    by_id = {tx.id: tx for tx in txs}
    fed_by_peel: set[str] = set()
    for tx in txs:
        if not _peel_shape(tx) or tx.spent_by is None:
            continue
        for spender in tx.spent_by:
            if spender is not None and spender in by_id and _peel_shape(by_id[spender]):
                fed_by_peel.add(spender)
    for tx in txs:
        if not _peel_shape(tx) or tx.id not in fed_by_peel or tx.spent_by is None:
            continue
        continuing = [
            addr
            for (addr, _), spender in zip(tx.outputs, tx.spent_by)
            if spender is not None and spender in by_id and _peel_shape(by_id[spender])
        ]
        if len(continuing) == 1:
            partition.union(tx.inputs[0][0], continuing[0], "Hp")
    return partition


def cluster_transactions(txs, heuristics=HEURISTIC_ORDER) -> AddressPartition:
    """Run the selected heuristics in priority order over a transaction set."""
    txs = list(txs)
    partition = AddressPartition()
    for tx in txs:  # register every address, merged or not
        for addr, _ in tx.inputs + tx.outputs:
            partition.add(addr)
    if "H1" in heuristics:
        h1_multi_input(txs, partition)
    if "H2" in heuristics:
        for tx in txs:
            change = h2_optimal_change(tx)
            if change is not None:
                partition.union(tx.inputs[0][0], change, "H2")
    if "Hp" in heuristics:
        hp_peeling_chain(txs, partition)
    return partition


def tag_unknown_miners(partition: AddressPartition, known: dict[str, set]) -> PoolTagMap:
    """Tag unlabelled addresses to named pools, priority H1 > H2 > Hp.

    ``known`` maps pool name -> set of addresses; the sets must be disjoint.
    Each pass re-derives the partition from the merges of that heuristic and
    all higher-priority ones.  A cluster touching exactly one pool tags its
    unlabelled members with that pool and the pass's provenance; a cluster
    touching several pools is a conflict and stays untagged.
    """
    owner: dict[str, str] = {}
    for pool, addrs in sorted(known.items()):
        for addr in addrs:
            if addr in owner:
                raise ValueError(f"address {addr} appears in pools {owner[addr]} and {pool}")
            owner[addr] = pool
    tags: dict[str, tuple[str, str]] = {}
    conflicts: dict[str, tuple[str, ...]] = {}
    universe = set(partition.addresses) | set(owner)
    for stage_end in range(len(HEURISTIC_ORDER)):
        heuristic = HEURISTIC_ORDER[stage_end]
        staged = partition.restricted(HEURISTIC_ORDER[: stage_end + 1])
        for addr in owner:
            staged.add(addr)
        groups: dict[str, list[str]] = {}
        for addr in universe:
            groups.setdefault(staged.find(addr), []).append(addr)
        for members in groups.values():
            pools = sorted({owner[m] for m in members if m in owner})
            if len(pools) != 1:
                if len(pools) > 1:
                    for m in members:
                        if m not in owner and m not in tags:
                            conflicts.setdefault(m, tuple(pools))
                continue
            pool = pools[0]
            for m in sorted(members):
                if m not in owner and m not in tags and m not in conflicts:
                    tags[m] = (pool, heuristic)
    unknown = tuple(sorted(a for a in universe if a not in owner and a not in tags))
    return PoolTagMap(tags=tags, unknown=unknown, conflicts=conflicts)


def unknown_share(blocks) -> float:
    """Share of blocks not attributed to a named pool."""
    blocks = list(blocks)
    if not blocks:
        return 0.0
    return sum(1 for b in blocks if b.pool is None) / len(blocks)


def relabel_blocks(blocks, tag_map: PoolTagMap):
    """Re-attribute address-labelled blocks whose address was tagged to a pool."""
    from .detect import BlockRecord

    out = []
    for b in blocks:
        addr = b.address if b.address else b.miner
        if b.pool is None and addr in tag_map.tags:
            pool, _ = tag_map.tags[addr]
            out.append(BlockRecord(height=b.height, timestamp=b.timestamp,
                                   miner=pool, pool=pool, address=addr))
        else:
            out.append(b)
    return out
