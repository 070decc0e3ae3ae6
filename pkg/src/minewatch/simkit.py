"""Generators for honest, selfish and cartel mining sequences.

The selfish strategy is the classic lead-state machine: the attacker
withholds found blocks on a private branch and reacts to honest blocks by
publishing.  At lead 1 a competing honest block triggers a published tie,
resolved by the next block (the attacker wins both with probability alpha;
an honest block on the attacker branch, probability gamma*(1-alpha), splits
the pair; otherwise the attacker block is orphaned).  At lead 2 an honest
block makes the attacker publish the whole private branch and win it; at
larger leads the attacker reveals one block and its lead shrinks by one.

Only the canonical chain attribution is emitted (what a ledger observer
sees); orphaned honest blocks are counted separately and never appear in the
sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "StrategyParams",
    "SimResult",
    "simulate_honest",
    "simulate_selfish",
    "simulate_cartel",
]


@dataclass(frozen=True)
class StrategyParams:
    """Attack parameters: hash share, tie-win fraction, run length, seed."""

    alpha_pow: float
    gamma: float
    horizon: int
    seed: int

    def __post_init__(self):
        if not (0.0 <= self.alpha_pow <= 1.0):
            raise ValueError(f"alpha_pow must be in [0, 1], got {self.alpha_pow}")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")


@dataclass(frozen=True)
class SimResult:
    """Canonical-chain attribution plus attack bookkeeping."""

    sequence: tuple[str, ...]
    realized_share: float  # attacker-side fraction of canonical blocks
    stale_count: int       # orphaned honest blocks


def simulate_honest(powers, T: int, seed: int, labels=None) -> list[str]:
    """I.i.d. block attribution from a power simplex; deterministic per seed."""
    powers = [float(p) for p in powers]
    if not powers or any(p < 0 for p in powers):
        raise ValueError("powers must be non-negative")
    if abs(math.fsum(powers) - 1.0) > 1e-12:
        raise ValueError(f"powers must sum to 1, got {math.fsum(powers)!r}")
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if labels is None:
        labels = [str(i) for i in range(len(powers))]
    if len(labels) != len(powers):
        raise ValueError("labels must match powers")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(powers)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(T), side="right")
    return [labels[i] for i in idx]


def _run_withholding(alpha: float, gamma: float, horizon: int, rng,
                     attacker_label, honest_label) -> tuple[list[str], int]:
    """Shared lead-state engine; label callables draw each side's block owner.

    The event loop stops once the canonical chain covers the horizon.  A fork
    with lead >= 2 is already guaranteed to win its private blocks, so it is
    finalized early once those blocks cover the remaining horizon (this also
    terminates alpha = 1, where no honest block ever arrives).
    """
    canonical: list[str] = []
    stale = 0
    private: list[str] = []  # withheld attacker blocks since the fork
    public = 0               # honest blocks since the fork (doomed at lead >= 2)
    tie = False
    max_events = 60 * horizon + 1000
    events = 0
    while len(canonical) < horizon and events < max_events:
        events += 1
        attacker_won = rng.random() < alpha
        if tie:
            # one attacker block and one honest block are published at equal height
            if attacker_won:
                canonical.append(private[0])
                canonical.append(attacker_label())
                stale += 1
            elif rng.random() < gamma:
                canonical.append(private[0])
                canonical.append(honest_label())
                stale += 1
            else:
                canonical.append(honest_label())
                canonical.append(honest_label())
            tie = False
            private = []
            public = 0
            continue
        if attacker_won:
            private.append(attacker_label())
            if len(private) - public >= 2 and len(canonical) + len(private) >= horizon:
                canonical.extend(private)
                stale += public
                private = []
                public = 0
                break
        elif not private:
            canonical.append(honest_label())
        else:
            lead = len(private) - public
            if lead == 1:
                tie = True
            elif lead == 2:
                canonical.extend(private)
                stale += public + 1
                private = []
                public = 0
            else:
                public += 1  # attacker reveals one block; lead shrinks by one
    if len(canonical) < horizon and len(private) > public:
        canonical.extend(private)
        stale += public
    return canonical[:horizon], stale


def simulate_selfish(params: StrategyParams, attacker: str = "selfish",
                     honest_labels=("honest-0",)) -> SimResult:
    """Run one selfish miner against an honest crowd of equal-power miners."""
    honest_labels = tuple(honest_labels)
    if not honest_labels and params.alpha_pow < 1.0:
        raise ValueError("at least one honest label is required when alpha_pow < 1")
    rng = np.random.default_rng(params.seed)

    def honest_label() -> str:
        return honest_labels[rng.integers(len(honest_labels))]

    seq, stale = _run_withholding(
        params.alpha_pow, params.gamma, params.horizon, rng,
        attacker_label=lambda: attacker, honest_label=honest_label,
    )
    share = sum(1 for m in seq if m == attacker) / params.horizon
    return SimResult(sequence=tuple(seq), realized_share=share, stale_count=stale)


def simulate_cartel(members, shares, gamma: float, horizon: int, seed: int,
                    honest_labels=("honest-0",)) -> SimResult:
    """Two coordinated miners jointly operating one private chain.

    The members withhold as a single attacker of power share_i + share_j.
    Blocks on the private chain are attributed by coordinated turn-taking
    (weighted round-robin by share): the members share block information and
    rotate extension duty, so each one's own-run statistics stay close to its
    honest expectation while the merged pair statistic is inflated.
    """
    members = tuple(members)
    shares = tuple(float(s) for s in shares)
    if len(members) != 2 or members[0] == members[1]:
        raise ValueError("members must be two distinct labels")
    if len(shares) != 2 or any(s < 0 for s in shares):
        raise ValueError("shares must be two non-negative probabilities")
    alpha = shares[0] + shares[1]
    if alpha > 1.0:
        raise ValueError(f"combined share must be <= 1, got {alpha}")
    honest_labels = tuple(honest_labels)
    if not honest_labels and alpha < 1.0:
        raise ValueError("at least one honest label is required")
    rng = np.random.default_rng(seed)

    if alpha > 0.0:
        weights = (shares[0] / alpha, shares[1] / alpha)
    else:
        weights = (0.5, 0.5)
    credit = [0.0, 0.0]

    def attacker_label() -> str:
        credit[0] += weights[0]
        credit[1] += weights[1]
        pick = 0 if credit[0] >= credit[1] else 1
        credit[pick] -= 1.0
        return members[pick]

    def honest_label() -> str:
        return honest_labels[rng.integers(len(honest_labels))]

    seq, stale = _run_withholding(alpha, gamma, horizon, rng,
                                  attacker_label=attacker_label,
                                  honest_label=honest_label)
    share = sum(1 for m in seq if m in members) / horizon
    return SimResult(sequence=tuple(seq), realized_share=share, stale_count=stale)
