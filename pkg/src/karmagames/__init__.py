"""Karma-based resource allocation: equilibrium bidding policies and simulation.

Agents repeatedly meet in pairs and bid integer karma on who must wait; the
winner compensates the loser in karma. This package computes Nash-equilibrium
bidding policies for that game (annealed fixed-point solver plus a
best-response oracle), simulates populations under equilibrium, heuristic and
centralized policies, and measures the resulting efficiency/unfairness
trade-off.
"""

from .game import (GameSpec, KarmaPair, Outcome, effective_message,
                   interaction_cost, karma_transition, outcome_distribution,
                   settle_interaction)
from .solver import (ConvergenceError, EquilibriumReport, EquilibriumSolution,
                     SolverSchedule, blend, expected_bid_by_karma,
                     expected_stage_cost, expected_utility, greedy_policy,
                     karma_transition_matrix, softmax_policy,
                     solve_equilibrium, stationary_distribution, uniform_policy,
                     value_function, verify_equilibrium)
from .best_response import best_response_mdp
from .policies import (BUILTIN_POLICIES, PolicyKind, centralized_cost,
                       centralized_urgency, centralized_urgency_then_cost,
                       heuristic_message, sample_equilibrium_message)
from .simulate import (MetricsReport, SimConfig, SimTrace, inefficiency,
                       run_simulation, schedule_pairs, unfairness, w2_estimate)
from .documents import (PolicyDocument, SweepRow, document_from_solution,
                        document_to_policy_kind, load_policy_document,
                        save_policy_document, verify_document)

__version__ = "0.1.0"
