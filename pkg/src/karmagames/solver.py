"""Nash-equilibrium computation for the karma bidding game.

A symmetric equilibrium is a bidding policy pi(urgency, karma) together with a
stationary karma distribution D, a karma transition matrix T, an expected
one-interaction cost cbar, and a discounted value theta(karma), such that:

  P1  D is stationary for T,
  P2  theta solves the fixed point  theta = cbar + alpha * T theta,
  P3  pi puts its mass on cost-minimizing messages given (D, theta).

`solve_equilibrium` finds such a policy by damped fixed-point iteration over a
softmax ("Boltzmann") response whose temperature is annealed down in eras,
followed by a greedy refinement stage that policy-iterates the zero-temperature
argmin response until it is an exact fixed point. All tensor math is dense
numpy; state spaces here are tiny (karma grid of k_max+1 points).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .game import GameSpec

__all__ = [
    "SolverSchedule",
    "EquilibriumReport",
    "EquilibriumSolution",
    "ConvergenceError",
    "uniform_policy",
    "check_policy",
    "check_distribution",
    "check_transition_matrix",
    "expected_utility",
    "expected_stage_cost",
    "karma_transition_matrix",
    "stationary_distribution",
    "value_function",
    "softmax_policy",
    "blend",
    "greedy_policy",
    "expected_bid_by_karma",
    "solve_equilibrium",
    "verify_equilibrium",
]

POLICY_ATOL = 1e-9          # simplex slack for policy/distribution validation
STATIONARITY_LIMIT = 1e-6   # P1 pass threshold, L1
BELLMAN_LIMIT = 1e-6        # P2 pass threshold, sup-norm
POLICY_CHANGE_TOL = 1e-8    # annealing stop: sup-norm policy step at the floor


class ConvergenceError(RuntimeError):
    """Iteration cap reached; carries the residual achieved."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------------------
# Precomputed interaction tensors (pure functions of the spec)
# ---------------------------------------------------------------------------


class _Tensors:
    """Dense lookup tables for one interaction, on the (karma, message) grid.

    Indices: k = own karma, m = own raw message (clamped internally),
    b = opponent effective bid, j = opponent karma, t = own next karma.
    """

    def __init__(self, spec: GameSpec):
        n = spec.n_karma
        k = np.arange(n)
        m_eff = np.minimum(np.arange(n)[None, :], k[:, None])   # [k, m] -> min(m, k)
        # P(own delay | own effective bid, opponent effective bid)
        bi = np.arange(n)[:, None]
        bj = np.arange(n)[None, :]
        p_del = np.where(bi > bj, 0.0, np.where(bi < bj, 1.0, 0.5))
        self.p_delay = p_del[m_eff]                              # [k, m, b]
        # next karma when delayed: receive opponent bid, clamped at k_max
        recv = np.minimum(k[:, None] + np.arange(n)[None, :], spec.k_max)  # [k, b]
        # next karma when winning: pay own bid, clamped by opponent headroom
        headroom = spec.k_max - np.arange(n)                     # [j]
        pay = k[:, None, None] - np.minimum(m_eff[:, :, None], headroom[None, None, :])  # [k, m, j]
        self.recv = recv
        self.pay = pay
        eye = np.eye(n)
        self.recv_one = eye[recv]                                # [k, b, t]
        self.pay_one = eye[pay]                                  # [k, m, j, t]
        self.n = n
        self.levels = np.asarray(spec.urgency_levels, dtype=float)
        self.probs = np.asarray(spec.urgency_probs, dtype=float)
        self.support = np.arange(n)[None, :] <= np.arange(n)[:, None]   # [k, m]: m <= k


@lru_cache(maxsize=32)
def _tensors(spec: GameSpec) -> _Tensors:
    return _Tensors(spec)


def _opponent_field(tn: _Tensors, policy: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Joint law q[j, b] of an opponent's (karma, effective bid)."""
    return dist[:, None] * np.einsum("u,ukb->kb", tn.probs, policy)


def _delay_and_values(tn: _Tensors, q: np.ndarray, theta: np.ndarray):
    """Per (k, m): delay probability A, and theta-weighted receive/pay terms."""
    q_b = q.sum(axis=0)
    A = tn.p_delay @ q_b                                          # [k, m]
    recv_val = q_b[None, :] * theta[tn.recv]                      # [k, b]
    R = np.einsum("kmb,kb->km", tn.p_delay, recv_val)
    H = np.einsum("jb,kmb->kmj", q, 1.0 - tn.p_delay)             # win prob split by opp karma
    W = np.einsum("kmj,kmj->km", theta[tn.pay], H)
    return A, R, W, H


def _rho_raw(tn: _Tensors, alpha: float, policy, dist, theta) -> np.ndarray:
    q = _opponent_field(tn, policy, dist)
    A, R, W, _ = _delay_and_values(tn, q, theta)
    return tn.levels[:, None, None] * A[None, :, :] + alpha * (R + W)[None, :, :]


def _stage_raw(tn: _Tensors, policy, dist) -> np.ndarray:
    q = _opponent_field(tn, policy, dist)
    A = tn.p_delay @ q.sum(axis=0)
    per_type = np.einsum("ukm,km->uk", policy, A)
    return (tn.probs * tn.levels) @ per_type


def _ktm_raw(tn: _Tensors, policy, dist) -> np.ndarray:
    q = _opponent_field(tn, policy, dist)
    s = np.einsum("u,ukm->km", tn.probs, policy)
    lose = tn.p_delay * q.sum(axis=0)[None, None, :]
    T = np.einsum("km,kmb,kbt->kt", s, lose, tn.recv_one)
    H = np.einsum("jb,kmb->kmj", q, 1.0 - tn.p_delay)
    T += np.einsum("km,kmj,kmjt->kt", s, H, tn.pay_one)
    return T


def _power_steps(T: np.ndarray, d: np.ndarray, tol: float, budget: int) -> np.ndarray:
    """Best-effort power iteration: stops at `tol`, the budget, or a stall.

    Near-reducible chains plateau above tight tolerances (the slow mode
    decays like its near-unit eigenvalue); the stall check bails out instead
    of burning the budget, leaving final accuracy to the consistency pass.
    """
    v = d @ T
    resid = np.abs(d - v).sum()
    checkpoint = resid
    for step in range(1, budget + 1):
        if resid <= tol:
            break
        d = v
        v = d @ T
        resid = np.abs(d - v).sum()
        if step % 64 == 0:
            if resid > 0.98 * checkpoint:
                break
            checkpoint = resid
    return d / d.sum()


def _stationary_raw(T: np.ndarray, d: np.ndarray, tol: float, max_iters: int) -> np.ndarray:
    v = d @ T
    for _ in range(max_iters):
        residual = np.abs(d - v).sum()
        if residual <= tol:
            return d
        d = v
        v = d @ T
    raise ConvergenceError("stationary_distribution: power iteration hit the cap",
                           float(np.abs(d - v).sum()))


def _value_raw(cbar: np.ndarray, T: np.ndarray, alpha: float) -> np.ndarray:
    if alpha == 0.0:
        return cbar.copy()
    return np.linalg.solve(np.eye(T.shape[0]) - alpha * T, cbar)


def _tilt_to_mean(dist: np.ndarray, target: float) -> np.ndarray:
    """Exponentially tilt a karma distribution to the target mean.

    Transfers are zero-sum, so the population's mean karma is an invariant of
    the real dynamics and stationary distributions come in a one-parameter
    family; the solver pins its branch to the simulated population's karma
    budget by projecting along the family's conjugate direction. At the
    anchored fixed point the tilt is the identity.
    """
    k = np.arange(len(dist), dtype=float)
    if abs(dist @ k - target) <= 1e-12:
        return dist
    s = 0.0
    for _ in range(60):
        w = dist * np.exp(np.clip(s * k, -700, 700))
        w /= w.sum()
        mean = w @ k
        if abs(mean - target) <= 1e-13:
            break
        var = w @ (k - mean) ** 2
        if var <= 1e-15:   # degenerate support; the mean cannot move
            return dist
        s = float(np.clip(s + (target - mean) / var, -50.0, 50.0))
    w = dist * np.exp(np.clip(s * k, -700, 700))
    return w / w.sum()


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------


def uniform_policy(spec: GameSpec) -> np.ndarray:
    """Uniform distribution over the legal messages {0..k} for every type."""
    n = spec.n_karma
    pi = np.zeros((spec.n_urgency, n, n))
    for k in range(n):
        pi[:, k, : k + 1] = 1.0 / (k + 1)
    return pi


def check_policy(spec: GameSpec, policy: np.ndarray, atol: float = POLICY_ATOL) -> np.ndarray:
    """Validate a policy tensor: shape, simplex rows, no mass above own karma."""
    policy = np.asarray(policy, dtype=float)
    n = spec.n_karma
    if policy.shape != (spec.n_urgency, n, n):
        raise ValueError(f"policy shape {policy.shape} != {(spec.n_urgency, n, n)}")
    if np.any(policy < -atol):
        raise ValueError("policy has negative probabilities")
    if np.any(np.abs(policy.sum(axis=2) - 1.0) > atol):
        raise ValueError("policy rows must sum to 1")
    mask_above = np.triu(np.ones((n, n)), k=1)[None, :, :]  # entries with m > k
    if np.any(policy * mask_above != 0.0):
        raise ValueError("policy places mass on messages above the karma level")
    return policy


def check_distribution(dist: np.ndarray, atol: float = POLICY_ATOL) -> np.ndarray:
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 1 or np.any(dist < -atol) or abs(dist.sum() - 1.0) > atol:
        raise ValueError("karma distribution must be a probability vector")
    return dist


def check_transition_matrix(T: np.ndarray, atol: float = POLICY_ATOL) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(T < -atol) or np.any(np.abs(T.sum(axis=1) - 1.0) > atol):
        raise ValueError("transition matrix must be row-stochastic")
    return T


# ---------------------------------------------------------------------------
# The four fixed-point operations
# ---------------------------------------------------------------------------


def expected_utility(spec: GameSpec, policy: np.ndarray, dist: np.ndarray,
                     theta: np.ndarray) -> np.ndarray:
    """Expected discounted cost rho[u, k, m] of sending message m as type (u, k).

    Averages over the opponent's karma (from `dist`), urgency, and message
    (from `policy`), the coin on ties, and the karma settlement; the future
    enters as alpha * theta(next karma). Messages above k are evaluated at
    their clamped effective value, so rho is defined on the full message grid.
    """
    tn = _tensors(spec)
    policy = check_policy(spec, policy)
    dist = check_distribution(dist)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (tn.n,):
        raise ValueError(f"theta shape {theta.shape} != {(tn.n,)}")
    return _rho_raw(tn, spec.alpha, policy, dist, theta)


def expected_stage_cost(spec: GameSpec, policy: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Expected cost cbar[k] of one interaction, future discount switched off."""
    tn = _tensors(spec)
    policy = check_policy(spec, policy)
    dist = check_distribution(dist)
    # undiscounted rho is levels[u] * delay probability, contracted with the policy
    return _stage_raw(tn, policy, dist)


def karma_transition_matrix(spec: GameSpec, policy: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """One-interaction karma transition law T[k, k'] under (policy, dist)."""
    tn = _tensors(spec)
    policy = check_policy(spec, policy)
    dist = check_distribution(dist)
    return _ktm_raw(tn, policy, dist)


def stationary_distribution(T: np.ndarray, init: np.ndarray | None = None,
                            tol: float = 1e-10, max_iters: int = 200_000) -> np.ndarray:
    """Stationary distribution of T by power iteration from `init`.

    Returns D with ||D - D T||_1 <= tol. On reducible chains this simply
    converges to a fixed point reachable from `init` (the identity matrix
    returns `init` itself), which is what the solver's warm-starting relies on.
    """
    T = check_transition_matrix(T)
    n = T.shape[0]
    d = np.full(n, 1.0 / n) if init is None else check_distribution(init).astype(float)
    return _stationary_raw(T, d, tol, max_iters)


def value_function(cbar: np.ndarray, T: np.ndarray, alpha: float) -> np.ndarray:
    """Solve theta = cbar + alpha * T theta. Exact linear solve; alpha < 1 only."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1); the fixed point degenerates at 1 (got {alpha})")
    cbar = np.asarray(cbar, dtype=float)
    if alpha == 0.0:
        return cbar.copy()
    T = check_transition_matrix(T)
    theta = _value_raw(cbar, T, alpha)
    residual = np.max(np.abs(theta - cbar - alpha * (T @ theta)))
    if residual > 1e-10:
        raise ConvergenceError("value_function: linear solve residual too large", residual)
    return theta


def softmax_policy(rho: np.ndarray, temperature: float) -> np.ndarray:
    """Boltzmann response exp(-rho / temperature), normalized over messages <= k.

    Messages above the karma level get probability 0. Rows are shifted by
    their minimum before exponentiation, so the result only depends on
    rho-differences (and is safe at very low temperatures).
    """
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    rho = np.asarray(rho, dtype=float)
    n_u, n_k, n_m = rho.shape
    support = (np.arange(n_m)[None, :] <= np.arange(n_k)[:, None])[None, :, :]
    masked = np.where(support, rho, np.inf)
    z = np.exp(-(masked - masked.min(axis=2, keepdims=True)) / temperature)
    z = np.where(support, z, 0.0)
    return z / z.sum(axis=2, keepdims=True)


def blend(old: np.ndarray, new: np.ndarray, tau: float) -> np.ndarray:
    """Damped policy update tau * new + (1 - tau) * old."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"momentum tau must be in (0, 1], got {tau}")
    old = np.asarray(old, dtype=float)
    new = np.asarray(new, dtype=float)
    if old.shape != new.shape:
        raise ValueError(f"policy shapes differ: {old.shape} vs {new.shape}")
    return tau * new + (1.0 - tau) * old


def greedy_policy(rho: np.ndarray) -> np.ndarray:
    """Deterministic argmin-rho policy; ties go to the lowest message."""
    rho = np.asarray(rho, dtype=float)
    n_u, n_k, n_m = rho.shape
    support = (np.arange(n_m)[None, :] <= np.arange(n_k)[:, None])[None, :, :]
    best = np.where(support, rho, np.inf).argmin(axis=2)
    pi = np.zeros_like(rho)
    u_ix, k_ix = np.indices(best.shape)
    pi[u_ix, k_ix, best] = 1.0
    return pi


def expected_bid_by_karma(policy: np.ndarray) -> np.ndarray:
    """E[message | urgency, karma] under the policy; shape (n_urgency, n_karma)."""
    policy = np.asarray(policy, dtype=float)
    return policy @ np.arange(policy.shape[2], dtype=float)


# ---------------------------------------------------------------------------
# Equilibrium solve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverSchedule:
    """Annealing/momentum knobs for the fixed-point loop.

    The temperature starts at `temp_init` and decays by `temp_decay` once per
    era of `era_length` iterations, never below `temp_floor`. `tau` is the
    damping weight on the freshly computed softmax response. The defaults
    reach the floor around iteration 1800 and settle well before 2000.
    """

    iterations: int = 2000
    tau: float = 0.1
    temp_init: float = 10.0
    temp_decay: float = 0.95
    temp_floor: float = 1e-3
    era_length: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.era_length < 1:
            raise ValueError("iterations and era_length must be >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if not (self.temp_init > 0 and self.temp_floor > 0):
            raise ValueError("temperatures must be positive")
        if not 0.0 < self.temp_decay < 1.0:
            raise ValueError(f"temp_decay must be in (0, 1), got {self.temp_decay}")

    def temperature(self, iteration: int) -> float:
        """Temperature in effect at a 0-based iteration index."""
        return max(self.temp_init * self.temp_decay ** (iteration // self.era_length),
                   self.temp_floor)


@dataclass(frozen=True)
class EquilibriumReport:
    """Residuals of the three equilibrium properties, with pass flags."""

    stationarity: float
    bellman: float
    best_response_gap: float
    tol: float

    @property
    def stationarity_ok(self) -> bool:
        return self.stationarity <= STATIONARITY_LIMIT

    @property
    def bellman_ok(self) -> bool:
        return self.bellman <= BELLMAN_LIMIT

    @property
    def rationality_ok(self) -> bool:
        return self.best_response_gap <= self.tol

    @property
    def ok(self) -> bool:
        return self.stationarity_ok and self.bellman_ok and self.rationality_ok


@dataclass(frozen=True)
class EquilibriumSolution:
    """A solved policy with its consistent population quantities and residuals."""

    spec: GameSpec
    schedule: SolverSchedule
    policy: np.ndarray
    dist: np.ndarray
    transitions: np.ndarray
    theta: np.ndarray
    cbar: np.ndarray
    rho: np.ndarray
    residuals: EquilibriumReport
    converged: bool
    unverified: bool
    refined: bool
    iterations_run: int
    final_temperature: float
    policy_change: float
    refine_rounds: int

    @property
    def expected_bids(self) -> np.ndarray:
        return expected_bid_by_karma(self.policy)


def verify_equilibrium(solution: EquilibriumSolution, tol: float | None = None) -> EquilibriumReport:
    """Recompute the P1/P2/P3 residuals of a solution.

    stationarity: ||D - D T||_1.  bellman: sup |theta - cbar - alpha T theta|.
    best_response_gap: worst over types (u, k) of the policy mass placed on
    messages whose rho exceeds that type's minimum by more than `tol`
    (default 1e-3 * max urgency); rationality passes when the mass itself is
    also below `tol`.
    """
    spec = solution.spec
    if tol is None:
        tol = 1e-3 * spec.max_urgency
    D, T = solution.dist, solution.transitions
    stationarity = float(np.abs(D - D @ T).sum())
    bellman = float(np.max(np.abs(solution.theta - solution.cbar
                                  - spec.alpha * (T @ solution.theta))))
    n = spec.n_karma
    support = (np.arange(n)[None, :] <= np.arange(n)[:, None])[None, :, :]
    masked = np.where(support, solution.rho, np.inf)
    worse = masked > masked.min(axis=2, keepdims=True) + tol
    gap = float((solution.policy * worse).sum(axis=2).max())
    return EquilibriumReport(stationarity=stationarity, bellman=bellman,
                             best_response_gap=gap, tol=float(tol))


def _settle_field(tn: _Tensors, policy: np.ndarray, dist: np.ndarray,
                  tol: float = 5e-8, max_rounds: int = 3000):
    """For a fixed policy, drive (T(policy, D), D) to joint consistency.

    Alternates T from D and D = stationary(T), warm-started, until the joint
    residual ||D - D T(D)||_1 is below `tol`. Total karma conservation gives
    this map a slow drift direction (stationary distributions come in a
    family indexed by mean karma), so a capped geometric extrapolation of the
    D-updates jumps ahead along that direction when the contraction rate is
    stable. If progress stalls at a numeric floor, the best pair seen is
    returned and its residual is reported honestly downstream.
    """
    T = _ktm_raw(tn, policy, dist)
    best_resid = np.inf
    best = (T, dist)
    prev_moved = None
    stall_round, stall_resid = 0, np.inf
    for round_ix in range(max_rounds):
        resid = np.abs(dist - dist @ T).sum()
        if resid < best_resid:
            best_resid = resid
            best = (T, dist)
        if resid <= tol:
            break
        if round_ix - stall_round >= 200:
            if resid > 0.7 * stall_resid:
                break
            stall_round, stall_resid = round_ix, resid
        new_dist = _power_steps(T, dist, max(tol / 10, 1e-12), 2000)
        delta = new_dist - dist
        moved = np.abs(delta).sum()
        if (prev_moved is not None and moved > 0 and round_ix % 20 == 19
                and 0.5 < moved / prev_moved < 0.99999):
            rate = moved / prev_moved
            boost = min(rate / (1.0 - rate), 500.0)
            jumped = np.maximum(new_dist + delta * boost, 0.0)
            mass = jumped.sum()
            if mass > 0.5:   # reject jumps that clip away most of the mass
                new_dist = jumped / mass
            prev_moved = None
        else:
            prev_moved = moved
        dist = new_dist
        T = _ktm_raw(tn, policy, dist)
    return best


def solve_equilibrium(spec: GameSpec, schedule: SolverSchedule | None = None,
                      on_iteration=None) -> EquilibriumSolution:
    """Compute a symmetric equilibrium policy for `spec`.

    Each iteration recomputes the softmax response to the current expected
    utilities, damps it into the policy, then refreshes T, D, cbar and theta
    in that order. The temperature anneals per the schedule; once it sits at
    the floor and the policy stops moving (sup change < 1e-8) the loop exits
    early. A greedy refinement stage then policy-iterates the exact argmin
    response; if that reaches a fixed point the returned policy is
    deterministic and the best-response gap is zero by construction.

    Never raises on non-convergence: inspect `converged` and `residuals`.
    `unverified` is set for alpha >= 0.9, where the fixed point oscillates
    and the result should not be trusted as an equilibrium.

    `on_iteration(iteration, temperature, policy, dist, theta)` is invoked
    after every annealing iteration when provided.
    """
    schedule = schedule or SolverSchedule()
    tn = _tensors(spec)
    n = spec.n_karma
    pi = uniform_policy(spec)
    dist = np.full(n, 1.0 / n)
    theta = np.zeros(n)
    change = np.inf
    temp = schedule.temperature(0)
    iterations_run = 0

    for it in range(schedule.iterations):
        temp = schedule.temperature(it)
        rho = _rho_raw(tn, spec.alpha, pi, dist, theta)
        new_pi = blend(pi, softmax_policy(rho, temp), schedule.tau)
        change = float(np.max(np.abs(new_pi - pi)))
        pi = new_pi
        T = _ktm_raw(tn, pi, dist)
        dist = _power_steps(T, dist, 1e-10, 2_000)
        cbar = _stage_raw(tn, pi, dist)
        theta = _value_raw(cbar, T, spec.alpha)
        iterations_run = it + 1
        if on_iteration is not None:
            on_iteration(it, temp, pi, dist, theta)
        if temp <= schedule.temp_floor and change < POLICY_CHANGE_TOL:
            break

    # Greedy refinement: make the zero-temperature argmin response an exact
    # fixed point, recomputing the population quantities after each switch.
    soft_state = (pi, dist, theta)
    refined = False
    refine_rounds = 0
    seen: set[bytes] = set()
    for _ in range(80):
        rho = _rho_raw(tn, spec.alpha, pi, dist, theta)
        g = greedy_policy(rho)
        refine_rounds += 1
        if np.array_equal(g, pi):
            refined = True
            break
        key = g.tobytes()
        if key in seen:
            break  # cycling between deterministic policies; keep the soft answer
        seen.add(key)
        pi = g
        T, dist = _settle_field(tn, pi, dist, tol=1e-6, max_rounds=3000)
        cbar = _stage_raw(tn, pi, dist)
        theta = _value_raw(cbar, T, spec.alpha)
    if not refined:
        pi, dist, theta = soft_state

    # Final consistency pass on whatever policy is being returned.
    T, dist = _settle_field(tn, pi, dist)
    cbar = _stage_raw(tn, pi, dist)
    theta = _value_raw(cbar, T, spec.alpha)
    rho = _rho_raw(tn, spec.alpha, pi, dist, theta)

    for arr in (pi, dist, T, cbar, theta, rho):
        arr.setflags(write=False)
    solution = EquilibriumSolution(
        spec=spec, schedule=schedule, policy=pi, dist=dist, transitions=T,
        theta=theta, cbar=cbar, rho=rho,
        residuals=EquilibriumReport(0.0, 0.0, 0.0, 0.0),  # replaced below
        converged=False, unverified=spec.alpha >= 0.9, refined=refined,
        iterations_run=iterations_run, final_temperature=temp,
        policy_change=change, refine_rounds=refine_rounds,
    )
    report = verify_equilibrium(solution)
    object.__setattr__(solution, "residuals", report)
    object.__setattr__(solution, "converged", bool(refined and report.ok))
    return solution
