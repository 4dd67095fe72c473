"""Mechanics of a single karma interaction.

Two agents meet, each holding an integer karma counter in [0, k_max], and bid
karma on who gets the resource. The higher *effective* bid (bid clamped to the
bidder's karma) wins; the loser is delayed and incurs its current urgency as
cost. The winner compensates the delayed agent with karma: the transfer is the
winner's effective bid, reduced so the receiver never exceeds k_max. Total
karma is conserved exactly and every karma value stays in [0, k_max].

All functions here are pure and accept either Python scalars or numpy arrays
(broadcasting elementwise), so the same code backs both the analytic solver
and the vectorized population simulator.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np

__all__ = [
    "GameSpec",
    "Outcome",
    "KarmaPair",
    "effective_message",
    "outcome_distribution",
    "karma_transition",
    "interaction_cost",
    "settle_interaction",
]


class Outcome(IntEnum):
    """Which of the two interacting agents is delayed (exactly one always is)."""

    FIRST = 0
    SECOND = 1


class KarmaPair(NamedTuple):
    k_first: int
    k_second: int


@dataclass(frozen=True)
class GameSpec:
    """Parameters of the karma game.

    Karma values and messages both live on the integer grid {0, ..., k_max}.
    Urgency is redrawn i.i.d. per interaction from `urgency_levels` with
    probabilities `urgency_probs`. `alpha` is the future-cost discount factor
    used by equilibrium computations (strictly below 1; the discounted-cost
    series degenerates at alpha=1).
    """

    k_max: int
    urgency_levels: tuple[float, ...]
    urgency_probs: tuple[float, ...]
    alpha: float

    def __post_init__(self):
        if not isinstance(self.k_max, (int, np.integer)) or self.k_max < 1:
            raise ValueError(f"k_max must be an integer >= 1, got {self.k_max!r}")
        levels = tuple(float(u) for u in self.urgency_levels)
        probs = tuple(float(p) for p in self.urgency_probs)
        object.__setattr__(self, "urgency_levels", levels)
        object.__setattr__(self, "urgency_probs", probs)
        object.__setattr__(self, "k_max", int(self.k_max))
        object.__setattr__(self, "alpha", float(self.alpha))
        if len(levels) == 0 or len(levels) != len(probs):
            raise ValueError("urgency_levels and urgency_probs must be non-empty and aligned")
        if levels[0] < 0 or any(a >= b for a, b in zip(levels, levels[1:])):
            raise ValueError(f"urgency_levels must be strictly increasing and >= 0, got {levels}")
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"urgency_probs must be nonnegative and sum to 1, got {probs}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")

    @property
    def n_karma(self) -> int:
        """Number of karma (and message) values: k_max + 1."""
        return self.k_max + 1

    @property
    def n_urgency(self) -> int:
        return len(self.urgency_levels)

    @property
    def max_urgency(self) -> float:
        return self.urgency_levels[-1]

    def urgency_index(self, u) -> int:
        """Index of urgency level `u`; rejects values not in the spec."""
        try:
            return self.urgency_levels.index(float(u))
        except ValueError:
            raise ValueError(f"unknown urgency level {u!r}; levels are {self.urgency_levels}") from None


def effective_message(m, k):
    """Clamp a bid to the bidder's karma: min(m, k). Elementwise on arrays."""
    m = np.asarray(m)
    k = np.asarray(k)
    if np.any(m < 0) or np.any(k < 0):
        raise ValueError("bids and karma must be nonnegative")
    out = np.minimum(m, k)
    return out[()] if out.ndim == 0 else out


def outcome_distribution(k_first, m_first, k_second, m_second):
    """Probability that each agent is delayed, given karmas and raw bids.

    The higher effective bid wins (is not delayed); equal effective bids are
    decided by a fair coin. Returns (P(first delayed), P(second delayed)),
    summing to 1 elementwise.
    """
    b1 = effective_message(m_first, k_first)
    b2 = effective_message(m_second, k_second)
    p_first = np.where(b1 > b2, 0.0, np.where(b1 < b2, 1.0, 0.5))
    p_first = p_first[()] if p_first.ndim == 0 else p_first
    return p_first, 1.0 - p_first


def karma_transition(pair, m_eff_first, m_eff_second, outcome, k_max):
    """Settle karma after an interaction with already-clamped bids.

    The non-delayed agent pays the delayed one t = min(winner's effective bid,
    k_max - delayed agent's karma). Pure integer arithmetic; conserves the
    karma sum exactly and keeps both values in [0, k_max].
    """
    k1 = np.asarray(pair[0])
    k2 = np.asarray(pair[1])
    b1 = np.asarray(m_eff_first)
    b2 = np.asarray(m_eff_second)
    if np.any(k1 < 0) or np.any(k2 < 0) or np.any(k1 > k_max) or np.any(k2 > k_max):
        raise ValueError(f"karma values must lie in [0, {k_max}]")
    if np.any(b1 > k1) or np.any(b2 > k2) or np.any(b1 < 0) or np.any(b2 < 0):
        raise ValueError("effective bids must be pre-clamped to [0, own karma]")
    first_delayed = np.asarray(outcome) == int(Outcome.FIRST)
    winner_bid = np.where(first_delayed, b2, b1)
    loser_karma = np.where(first_delayed, k1, k2)
    t = np.minimum(winner_bid, k_max - loser_karma)
    new_k1 = np.where(first_delayed, k1 + t, k1 - t)
    new_k2 = np.where(first_delayed, k2 - t, k2 + t)
    return KarmaPair(new_k1[()] if new_k1.ndim == 0 else new_k1,
                     new_k2[()] if new_k2.ndim == 0 else new_k2)


def interaction_cost(spec: GameSpec, outcome, urgency, viewpoint):
    """Cost of one interaction seen by `viewpoint`: its urgency if delayed, else 0."""
    u = np.asarray(urgency, dtype=float)
    known = np.isin(u, np.asarray(spec.urgency_levels, dtype=float))
    if not np.all(known):
        raise ValueError(f"unknown urgency level(s); levels are {spec.urgency_levels}")
    cost = np.where(np.asarray(outcome) == np.asarray(viewpoint), u, 0.0)
    return cost[()] if cost.ndim == 0 else cost


def settle_interaction(spec: GameSpec, k_first, k_second, m_first, m_second, coin):
    """Resolve whole interactions (vectorized): outcome, transfer, new karmas.

    `coin` is a uniform [0, 1) draw per interaction used only on effective-bid
    ties (coin < 0.5 delays the first agent). Returns
    (delayed, transfer, new_k_first, new_k_second) with `delayed` in {0, 1}.
    """
    b1 = effective_message(m_first, k_first)
    b2 = effective_message(m_second, k_second)
    tie_first = np.asarray(coin) < 0.5
    delayed = np.where(b1 > b2, int(Outcome.SECOND),
                       np.where(b1 < b2, int(Outcome.FIRST),
                                np.where(tie_first, int(Outcome.FIRST), int(Outcome.SECOND))))
    new_k1, new_k2 = karma_transition((k_first, k_second), b1, b2, delayed, spec.k_max)
    transfer = np.where(delayed == int(Outcome.FIRST), new_k1 - np.asarray(k_first),
                        new_k2 - np.asarray(k_second))
    return delayed, transfer, new_k1, new_k2
