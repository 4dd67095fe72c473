"""Single-agent best response against a frozen opponent population.

Independent check of the solver's rationality property: the lone agent faces
opponents whose karma follows `dist` and whose bids follow `opponent_policy`,
and solves its own Markov decision problem exactly by value iteration. The
interaction law is enumerated here term by term through the scalar functions
in `game`, on purpose: this module shares none of the solver's tensor
algebra, so agreement between the two is a meaningful test.
"""

from __future__ import annotations

import numpy as np

from .game import GameSpec, Outcome, karma_transition, outcome_distribution

__all__ = ["best_response_mdp"]


def _enumerate_interaction(spec: GameSpec, opponent_policy, dist):
    """Brute-force P(delayed) and next-karma law for every (own karma, own bid).

    Returns (p_delay[k, m], next_karma[k, m, k']) by summing over opponent
    karma, urgency, message and the two outcomes, one term at a time.
    """
    n = spec.n_karma
    p_delay = np.zeros((n, n))
    next_karma = np.zeros((n, n, n))
    for k in range(n):
        for m in range(k + 1):
            for k_j in range(n):
                if dist[k_j] == 0.0:
                    continue
                for u_j in range(spec.n_urgency):
                    for m_j in range(k_j + 1):
                        w = dist[k_j] * spec.urgency_probs[u_j] * opponent_policy[u_j, k_j, m_j]
                        if w == 0.0:
                            continue
                        p_lose, p_win = outcome_distribution(k, m, k_j, m_j)
                        # p_lose = P(we are delayed). Settle each outcome.
                        if p_lose > 0.0:
                            nk, _ = karma_transition((k, k_j), m, m_j, Outcome.FIRST, spec.k_max)
                            p_delay[k, m] += w * p_lose
                            next_karma[k, m, nk] += w * p_lose
                        if p_win > 0.0:
                            nk, _ = karma_transition((k, k_j), m, m_j, Outcome.SECOND, spec.k_max)
                            next_karma[k, m, nk] += w * p_win
    return p_delay, next_karma


def best_response_mdp(spec: GameSpec, opponent_policy, dist,
                      tol: float = 1e-10, max_sweeps: int = 100_000):
    """Optimal deterministic reply to a fixed (opponent_policy, dist) field.

    Value-iterates V(u, k) = min over m <= k of
        E[cost + alpha * theta(next karma)],   theta(k) = sum_u p_u V(u, k),
    to sup-norm `tol`, then returns (policy, theta) where `policy` is the
    greedy point-mass tensor (lowest message among minimizers) and `theta`
    the urgency-averaged value per karma level.
    """
    opponent_policy = np.asarray(opponent_policy, dtype=float)
    dist = np.asarray(dist, dtype=float)
    p_delay, next_karma = _enumerate_interaction(spec, opponent_policy, dist)
    n = spec.n_karma
    levels = np.asarray(spec.urgency_levels)
    probs = np.asarray(spec.urgency_probs)
    support = np.arange(n)[None, :] <= np.arange(n)[:, None]   # [k, m]

    theta = np.zeros(n)
    for _ in range(max_sweeps):
        q = levels[:, None, None] * p_delay[None, :, :] \
            + spec.alpha * (next_karma @ theta)[None, :, :]
        v = np.where(support[None, :, :], q, np.inf).min(axis=2)
        new_theta = probs @ v
        if np.max(np.abs(new_theta - theta)) <= tol:
            theta = new_theta
            break
        theta = new_theta
    q = levels[:, None, None] * p_delay[None, :, :] \
        + spec.alpha * (next_karma @ theta)[None, :, :]
    best = np.where(support[None, :, :], q, np.inf).argmin(axis=2)
    policy = np.zeros((spec.n_urgency, n, n))
    u_ix, k_ix = np.indices(best.shape)
    policy[u_ix, k_ix, best] = 1.0
    return policy, theta
