"""Reference decision rules the equilibrium policies are measured against.

Two families:

* centralized rules that see both agents' private urgency (and accumulated
  cost) and pick who is delayed directly, with fair-coin tie breaking;
* karma bidding rules that only see the agent's own (urgency, karma) and
  produce a message, settled by the mechanics in `game`.

Everything is vectorized over interactions; `coin` arguments are uniform
[0, 1) draws supplied by the caller (one per interaction), so the rules stay
pure and simulations stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BUILTIN_POLICIES",
    "CENTRALIZED_POLICIES",
    "BIDDING_POLICIES",
    "PolicyKind",
    "centralized_urgency",
    "centralized_cost",
    "centralized_urgency_then_cost",
    "heuristic_message",
    "sample_equilibrium_message",
]

CENTRALIZED_POLICIES = (
    "centralized-urgency",
    "centralized-cost",
    "centralized-urgency-then-cost",
)
BIDDING_POLICIES = ("bid1-always", "bid1-if-urgent")
BUILTIN_POLICIES = ("baseline-random",) + BIDDING_POLICIES + CENTRALIZED_POLICIES
EQUILIBRIUM_KIND = "karma-equilibrium"


@dataclass(frozen=True)
class PolicyKind:
    """A named decision rule; carries the policy tensor for equilibrium kinds."""

    name: str
    policy: np.ndarray | None = None
    label: str | None = None

    def __post_init__(self):
        if self.name == EQUILIBRIUM_KIND:
            if self.policy is None:
                raise ValueError(f"{EQUILIBRIUM_KIND} requires a policy tensor")
        elif self.name not in BUILTIN_POLICIES:
            raise ValueError(f"unknown policy kind {self.name!r}; "
                             f"builtins are {BUILTIN_POLICIES + (EQUILIBRIUM_KIND,)}")
        elif self.policy is not None:
            raise ValueError(f"{self.name!r} does not take a policy tensor")
        if self.label is None:
            object.__setattr__(self, "label", self.name)

    @property
    def is_centralized(self) -> bool:
        return self.name in CENTRALIZED_POLICIES

    @property
    def bids_karma(self) -> bool:
        return self.name in BIDDING_POLICIES or self.name == EQUILIBRIUM_KIND


def _coin_pick(coin):
    """Fair tie coin: first agent delayed when coin < 0.5."""
    return np.where(np.asarray(coin) < 0.5, 0, 1)


def centralized_urgency(u_first, u_second, coin):
    """Delay the less urgent agent; fair coin on ties. Returns 0/1 (delayed)."""
    u1 = np.asarray(u_first, dtype=float)
    u2 = np.asarray(u_second, dtype=float)
    out = np.where(u1 < u2, 0, np.where(u1 > u2, 1, _coin_pick(coin)))
    return out[()] if out.ndim == 0 else out


def centralized_cost(a_first, a_second, u_first, u_second, coin):
    """Delay the agent with the smaller accumulated-plus-current cost a + u."""
    s1 = np.asarray(a_first, dtype=float) + np.asarray(u_first, dtype=float)
    s2 = np.asarray(a_second, dtype=float) + np.asarray(u_second, dtype=float)
    out = np.where(s1 < s2, 0, np.where(s1 > s2, 1, _coin_pick(coin)))
    return out[()] if out.ndim == 0 else out


def centralized_urgency_then_cost(u_first, u_second, a_first, a_second, coin):
    """Delay by lowest urgency; break urgency ties by lowest a + u, then coin."""
    u1 = np.asarray(u_first, dtype=float)
    u2 = np.asarray(u_second, dtype=float)
    tie = centralized_cost(a_first, a_second, u_first, u_second, coin)
    out = np.where(u1 < u2, 0, np.where(u1 > u2, 1, tie))
    return out[()] if out.ndim == 0 else out


def heuristic_message(kind: str, urgency, karma):
    """Messages for the fixed-bid heuristics, clamped into the legal range.

    bid1-always bids 1 regardless of urgency; bid1-if-urgent bids 1 only
    when the urgency is nonzero. An empty karma account clamps the bid to 0.
    """
    u = np.asarray(urgency, dtype=float)
    k = np.asarray(karma)
    if kind == "bid1-always":
        out = np.minimum(1, k)
    elif kind == "bid1-if-urgent":
        out = np.where(u > 0, np.minimum(1, k), 0)
    else:
        raise ValueError(f"not a bidding heuristic: {kind!r}")
    return out[()] if out.ndim == 0 else out


def sample_equilibrium_message(policy: np.ndarray, urgency_index, karma, rng_or_draw):
    """Draw message(s) from policy[urgency_index, karma] by inverse CDF.

    `rng_or_draw` is either a numpy Generator or pre-drawn uniforms of the
    same shape as `karma`. Sampled messages never exceed the karma level.
    """
    policy = np.asarray(policy, dtype=float)
    u_ix = np.asarray(urgency_index)
    k_ix = np.asarray(karma)
    if np.any(u_ix < 0) or np.any(u_ix >= policy.shape[0]) \
            or np.any(k_ix < 0) or np.any(k_ix >= policy.shape[1]):
        raise ValueError("urgency index or karma outside the policy domain")
    if isinstance(rng_or_draw, np.random.Generator):
        draw = rng_or_draw.random(k_ix.shape if k_ix.ndim else None)
    else:
        draw = rng_or_draw
    rows = policy[u_ix, k_ix]                       # (..., n_messages)
    cdf = np.cumsum(rows, axis=-1)
    m = (np.asarray(draw)[..., None] > cdf).sum(axis=-1)
    m = np.minimum(m, policy.shape[2] - 1)          # guard cdf rounding at 1.0
    out = np.minimum(m, k_ix)
    return out[()] if np.ndim(out) == 0 else out
