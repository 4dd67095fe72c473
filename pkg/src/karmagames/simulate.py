"""Population experiment: random pairwise encounters under a chosen policy.

Every epoch all agents redraw their urgency i.i.d., a set of disjoint pairs is
scheduled uniformly at random, and each pair is resolved by the configured
policy: centralized rules pick the delayed agent directly from private state,
karma rules bid and settle through the interaction mechanics. Accumulated
cost, karma and per-interaction records are tracked for the whole run.

Reproducibility contract: a run consumes a single numpy Generator seeded from
the config, with a fixed per-epoch draw order: (1) one vectorized urgency draw
for all agents in index order, (2) one permutation for pairing, (3) one
message-quantile draw per pair slot, (4) one tie coin per pair. Draws (3) are
consumed even by policies that ignore messages, so runs with different
policies at the same seed see identical urgencies and pairings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import GameSpec, settle_interaction
from .policies import PolicyKind, centralized_cost, centralized_urgency, \
    centralized_urgency_then_cost, heuristic_message, sample_equilibrium_message

__all__ = [
    "SimConfig",
    "SimTrace",
    "MetricsReport",
    "schedule_pairs",
    "run_simulation",
    "inefficiency",
    "unfairness",
    "w2_estimate",
]


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulation run."""

    spec: GameSpec
    policy: PolicyKind
    n_agents: int = 200
    epochs: int = 1000
    encounter_rate: float = 0.1   # expected interactions per agent per epoch
    seed: int = 0
    initial_karma: tuple[int, int] = (0, 12)   # uniform integer range lo..hi

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("need at least 2 agents to form a pair")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.encounter_rate <= 1.0:
            raise ValueError("encounter_rate must be in (0, 1]")
        if self.pairs_per_epoch < 1:
            raise ValueError("encounter_rate * n_agents / 2 must give at least one pair")
        lo, hi = self.initial_karma
        if not (0 <= lo <= hi <= self.spec.k_max):
            raise ValueError(f"initial karma range {self.initial_karma} outside [0, {self.spec.k_max}]")
        if self.policy.policy is not None:
            expect = (self.spec.n_urgency, self.spec.n_karma, self.spec.n_karma)
            if self.policy.policy.shape != expect:
                raise ValueError(f"policy tensor shape {self.policy.policy.shape} "
                                 f"does not match the game spec {expect}")

    @property
    def pairs_per_epoch(self) -> int:
        return int(self.n_agents * self.encounter_rate / 2)


@dataclass
class SimTrace:
    """Per-interaction records plus per-epoch aggregates for one run.

    Interaction columns are aligned arrays with one entry per interaction, in
    simulation order. `delayed` holds 0 when the first-listed agent was
    delayed, 1 for the second. `transfer` is the karma paid by the winner to
    the delayed agent (0 for centralized kinds and baseline-random, which
    never touch karma).
    """

    n_agents: int
    pairs_per_epoch: int
    epoch: np.ndarray
    first: np.ndarray
    second: np.ndarray
    u_first: np.ndarray
    u_second: np.ndarray
    m_first: np.ndarray
    m_second: np.ndarray
    delayed: np.ndarray
    transfer: np.ndarray
    cost_first: np.ndarray
    cost_second: np.ndarray
    k_first_after: np.ndarray
    k_second_after: np.ndarray
    final_karma: np.ndarray
    final_cost: np.ndarray
    interaction_counts: np.ndarray
    cost_variance_by_epoch: np.ndarray   # population variance after each epoch; [0] = start
    total_karma_by_epoch: np.ndarray

    @property
    def n_interactions(self) -> int:
        return len(self.epoch)

    @property
    def n_epochs(self) -> int:
        return len(self.cost_variance_by_epoch) - 1

    def interaction_rows(self):
        """Yield per-interaction tuples in the trace CSV column order."""
        for i in range(self.n_interactions):
            yield (self.epoch[i], self.first[i], self.second[i],
                   self.u_first[i], self.u_second[i],
                   self.m_first[i], self.m_second[i],
                   self.delayed[i], self.transfer[i],
                   self.cost_first[i], self.cost_second[i],
                   self.k_first_after[i], self.k_second_after[i])


TRACE_COLUMNS = ("epoch", "agent_i", "agent_j", "u_i", "u_j", "m_i", "m_j",
                 "delayed", "transfer", "cost_i", "cost_j", "k_i_after", "k_j_after")


@dataclass(frozen=True)
class MetricsReport:
    """Efficiency/fairness summary of a run (or a mean over runs)."""

    inefficiency: float       # average incurred cost per interaction
    unfairness: float         # population std of final accumulated costs
    w2_estimate: float        # trailing-window growth rate of cost variance
    metadata: dict = field(default_factory=dict)


def schedule_pairs(n_agents: int, pairs_per_epoch: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random disjoint pairs, shape (pairs_per_epoch, 2).

    Sampling without replacement within the epoch; every agent is equally
    likely to be included.
    """
    if 2 * pairs_per_epoch > n_agents:
        raise ValueError(f"cannot form {pairs_per_epoch} disjoint pairs from {n_agents} agents")
    perm = rng.permutation(n_agents)
    return perm[: 2 * pairs_per_epoch].reshape(pairs_per_epoch, 2)


def _sample_urgency(spec: GameSpec, draws: np.ndarray) -> np.ndarray:
    cum = np.cumsum(spec.urgency_probs)
    idx = np.searchsorted(cum, draws, side="right")
    return np.minimum(idx, spec.n_urgency - 1)


def run_simulation(config: SimConfig):
    """Run one full simulation; returns (SimTrace, MetricsReport)."""
    spec = config.spec
    kind = config.policy
    n = config.n_agents
    pairs = config.pairs_per_epoch
    rng = np.random.default_rng(config.seed)
    lo, hi = config.initial_karma
    karma = rng.integers(lo, hi + 1, size=n)
    acc_cost = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    levels = np.asarray(spec.urgency_levels)

    total = config.epochs * pairs
    col_i = np.zeros(total, dtype=np.int64)
    col_j = np.zeros(total, dtype=np.int64)
    col_epoch = np.zeros(total, dtype=np.int64)
    col_u1 = np.zeros(total)
    col_u2 = np.zeros(total)
    col_m1 = np.zeros(total, dtype=np.int64)
    col_m2 = np.zeros(total, dtype=np.int64)
    col_delayed = np.zeros(total, dtype=np.int64)
    col_transfer = np.zeros(total, dtype=np.int64)
    col_c1 = np.zeros(total)
    col_c2 = np.zeros(total)
    col_k1 = np.zeros(total, dtype=np.int64)
    col_k2 = np.zeros(total, dtype=np.int64)
    var_series = np.zeros(config.epochs + 1)
    karma_series = np.zeros(config.epochs + 1, dtype=np.int64)
    karma_series[0] = karma.sum()

    for t in range(config.epochs):
        u_idx = _sample_urgency(spec, rng.random(n))
        pairing = schedule_pairs(n, pairs, rng)
        m_draws = rng.random((pairs, 2))
        coins = rng.random(pairs)

        first, second = pairing[:, 0], pairing[:, 1]
        k1, k2 = karma[first], karma[second]
        u1_idx, u2_idx = u_idx[first], u_idx[second]
        u1, u2 = levels[u1_idx], levels[u2_idx]

        if kind.name == "baseline-random":
            delayed = np.where(coins < 0.5, 0, 1)
            m1 = m2 = transfer = np.zeros(pairs, dtype=np.int64)
        elif kind.name == "centralized-urgency":
            delayed = centralized_urgency(u1, u2, coins)
            m1 = m2 = transfer = np.zeros(pairs, dtype=np.int64)
        elif kind.name == "centralized-cost":
            delayed = centralized_cost(acc_cost[first], acc_cost[second], u1, u2, coins)
            m1 = m2 = transfer = np.zeros(pairs, dtype=np.int64)
        elif kind.name == "centralized-urgency-then-cost":
            delayed = centralized_urgency_then_cost(u1, u2, acc_cost[first], acc_cost[second], coins)
            m1 = m2 = transfer = np.zeros(pairs, dtype=np.int64)
        else:
            if kind.name == "karma-equilibrium":
                m1 = sample_equilibrium_message(kind.policy, u1_idx, k1, m_draws[:, 0])
                m2 = sample_equilibrium_message(kind.policy, u2_idx, k2, m_draws[:, 1])
            else:
                m1 = heuristic_message(kind.name, u1, k1)
                m2 = heuristic_message(kind.name, u2, k2)
            delayed, transfer, new_k1, new_k2 = settle_interaction(spec, k1, k2, m1, m2, coins)
            karma[first] = new_k1
            karma[second] = new_k2

        cost1 = np.where(delayed == 0, u1, 0.0)
        cost2 = np.where(delayed == 1, u2, 0.0)
        acc_cost[first] += cost1
        acc_cost[second] += cost2
        counts[first] += 1
        counts[second] += 1

        sl = slice(t * pairs, (t + 1) * pairs)
        col_epoch[sl] = t
        col_i[sl], col_j[sl] = first, second
        col_u1[sl], col_u2[sl] = u1, u2
        col_m1[sl], col_m2[sl] = m1, m2
        col_delayed[sl] = delayed
        col_transfer[sl] = transfer
        col_c1[sl], col_c2[sl] = cost1, cost2
        col_k1[sl], col_k2[sl] = karma[first], karma[second]
        var_series[t + 1] = acc_cost.var()
        karma_series[t + 1] = karma.sum()

    trace = SimTrace(
        n_agents=n, pairs_per_epoch=pairs, epoch=col_epoch,
        first=col_i, second=col_j, u_first=col_u1, u_second=col_u2,
        m_first=col_m1, m_second=col_m2, delayed=col_delayed,
        transfer=col_transfer, cost_first=col_c1, cost_second=col_c2,
        k_first_after=col_k1, k_second_after=col_k2,
        final_karma=karma, final_cost=acc_cost, interaction_counts=counts,
        cost_variance_by_epoch=var_series, total_karma_by_epoch=karma_series,
    )
    window = max(2, config.epochs // 2) if config.epochs >= 2 else None
    report = MetricsReport(
        inefficiency=inefficiency(trace),
        unfairness=unfairness(acc_cost),
        w2_estimate=w2_estimate(trace, window) if window else float("nan"),
        metadata={
            "policy": kind.label, "seed": config.seed, "n_agents": n,
            "epochs": config.epochs, "pairs_per_epoch": pairs,
            "interactions": trace.n_interactions, "w2_window": window,
        },
    )
    return trace, report


def inefficiency(trace: SimTrace) -> float:
    """Total incurred cost divided by the number of interactions."""
    if trace.n_interactions == 0:
        raise ValueError("trace contains no interactions")
    return float((trace.cost_first.sum() + trace.cost_second.sum()) / trace.n_interactions)


def unfairness(final_costs: np.ndarray) -> float:
    """Population standard deviation of the agents' accumulated costs."""
    final_costs = np.asarray(final_costs, dtype=float)
    if final_costs.size < 2:
        raise ValueError("need at least 2 agents")
    return float(final_costs.std())


def w2_estimate(trace: SimTrace, window: int) -> float:
    """Mean per-epoch growth of the cost variance over the trailing `window` epochs."""
    growth = np.diff(trace.cost_variance_by_epoch)
    if window < 2 or window > len(growth):
        raise ValueError(f"window must be in [2, {len(growth)}], got {window}")
    return float(growth[-window:].mean())
