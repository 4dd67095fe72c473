"""On-disk formats: JSON policy documents and CSV metric/trace tables.

A policy document is a self-contained JSON file holding the game parameters
and the policy tensor, plus (for solved equilibria) the stationary
distribution, value function, stage cost, residuals and the solver schedule
that produced them. Decoding re-validates every invariant, and
encode-then-decode is an exact identity (floats survive JSON round-trips at
full precision).

CSV numbers are written with 9 significant digits; headers are fixed and
documented in the README.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .game import GameSpec
from .policies import PolicyKind
from .simulate import TRACE_COLUMNS, SimTrace
from .solver import (EquilibriumReport, EquilibriumSolution, SolverSchedule,
                     check_policy, expected_utility, karma_transition_matrix,
                     verify_equilibrium)

__all__ = [
    "SCHEMA_VERSION",
    "PolicyDocument",
    "SweepRow",
    "document_from_solution",
    "save_policy_document",
    "load_policy_document",
    "document_to_policy_kind",
    "verify_document",
    "write_trace_csv",
    "write_compare_csv",
    "write_sweep_csv",
    "SWEEP_COLUMNS",
    "COMPARE_COLUMNS",
]

SCHEMA_VERSION = 1


def _fmt(x) -> str:
    return format(float(x), ".9g")


@dataclass(frozen=True)
class PolicyDocument:
    """Deserialized policy file: game spec + policy, optional equilibrium data."""

    spec: GameSpec
    policy: np.ndarray
    equilibrium: dict | None = None   # dist/theta/cbar/residuals/schedule/flags

    @property
    def dist(self) -> np.ndarray | None:
        if self.equilibrium is None:
            return None
        return np.asarray(self.equilibrium["dist"])

    @property
    def theta(self) -> np.ndarray | None:
        if self.equilibrium is None:
            return None
        return np.asarray(self.equilibrium["theta"])


@dataclass(frozen=True)
class SweepRow:
    """One (alpha, policy-evaluation) row of a discount-factor sweep."""

    alpha: float
    inefficiency: float
    unfairness: float
    stationarity: float
    bellman: float
    best_response_gap: float
    converged: bool
    unverified: bool
    seeds: int


SWEEP_COLUMNS = ("alpha", "inefficiency", "unfairness", "stationarity",
                 "bellman", "best_response_gap", "converged", "unverified", "seeds")
COMPARE_COLUMNS = ("policy", "inefficiency", "unfairness")


def document_from_solution(solution: EquilibriumSolution) -> PolicyDocument:
    report = solution.residuals
    equilibrium = {
        "dist": solution.dist.tolist(),
        "theta": solution.theta.tolist(),
        "cbar": solution.cbar.tolist(),
        "residuals": {
            "stationarity": report.stationarity,
            "bellman": report.bellman,
            "best_response_gap": report.best_response_gap,
            "tol": report.tol,
        },
        "schedule": asdict(solution.schedule),
        "converged": solution.converged,
        "unverified": solution.unverified,
        "refined": solution.refined,
        "iterations_run": solution.iterations_run,
        "final_temperature": solution.final_temperature,
        "policy_change": solution.policy_change,
        "refine_rounds": solution.refine_rounds,
    }
    return PolicyDocument(spec=solution.spec, policy=np.asarray(solution.policy),
                          equilibrium=equilibrium)


def save_policy_document(doc: PolicyDocument, path) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "k_max": doc.spec.k_max,
        "urgency_levels": list(doc.spec.urgency_levels),
        "urgency_probs": list(doc.spec.urgency_probs),
        "alpha": doc.spec.alpha,
        "policy": np.asarray(doc.policy).tolist(),
    }
    if doc.equilibrium is not None:
        payload["equilibrium"] = doc.equilibrium
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_policy_document(path) -> PolicyDocument:
    """Read and fully re-validate a policy document."""
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r} in {path}")
    spec = GameSpec(k_max=payload["k_max"],
                    urgency_levels=tuple(payload["urgency_levels"]),
                    urgency_probs=tuple(payload["urgency_probs"]),
                    alpha=payload["alpha"])
    policy = check_policy(spec, np.asarray(payload["policy"], dtype=float))
    return PolicyDocument(spec=spec, policy=policy,
                          equilibrium=payload.get("equilibrium"))


def document_to_policy_kind(doc: PolicyDocument, label: str) -> PolicyKind:
    return PolicyKind(name="karma-equilibrium", policy=doc.policy, label=label)


def verify_document(doc: PolicyDocument, tol: float | None = None) -> EquilibriumReport:
    """Re-verify a stored equilibrium, recomputing T and rho from scratch."""
    if doc.equilibrium is None:
        raise ValueError("document carries no equilibrium data to verify")
    spec = doc.spec
    dist = np.asarray(doc.equilibrium["dist"], dtype=float)
    theta = np.asarray(doc.equilibrium["theta"], dtype=float)
    cbar = np.asarray(doc.equilibrium["cbar"], dtype=float)
    T = karma_transition_matrix(spec, doc.policy, dist)
    rho = expected_utility(spec, doc.policy, dist, theta)
    eq = doc.equilibrium
    shadow = EquilibriumSolution(
        spec=spec, schedule=SolverSchedule(**eq["schedule"]),
        policy=doc.policy, dist=dist, transitions=T, theta=theta, cbar=cbar,
        rho=rho, residuals=EquilibriumReport(0.0, 0.0, 0.0, 0.0),
        converged=bool(eq.get("converged", False)),
        unverified=bool(eq.get("unverified", False)),
        refined=bool(eq.get("refined", False)),
        iterations_run=int(eq.get("iterations_run", 0)),
        final_temperature=float(eq.get("final_temperature", 0.0)),
        policy_change=float(eq.get("policy_change", 0.0)),
        refine_rounds=int(eq.get("refine_rounds", 0)),
    )
    return verify_equilibrium(shadow, tol)


def write_trace_csv(trace: SimTrace, path) -> None:
    """One row per interaction; see TRACE_COLUMNS for the header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in trace.interaction_rows():
            writer.writerow([int(row[0]), int(row[1]), int(row[2]),
                             _fmt(row[3]), _fmt(row[4]), int(row[5]), int(row[6]),
                             int(row[7]), int(row[8]), _fmt(row[9]), _fmt(row[10]),
                             int(row[11]), int(row[12])])


def write_compare_csv(rows, path) -> None:
    """Rows of (policy label, inefficiency, unfairness); gnuplot-friendly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARE_COLUMNS)
        for label, ineff, unfair in rows:
            writer.writerow([label, _fmt(ineff), _fmt(unfair)])


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in sorted(rows, key=lambda r: r.alpha):
            writer.writerow([_fmt(row.alpha), _fmt(row.inefficiency), _fmt(row.unfairness),
                             _fmt(row.stationarity), _fmt(row.bellman),
                             _fmt(row.best_response_gap),
                             int(row.converged), int(row.unverified), row.seeds])
