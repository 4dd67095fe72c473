"""Command-line front end.

Subcommands: solve (compute an equilibrium policy document), simulate (run
the population experiment for a named policy or a document), sweep (solve and
evaluate a discount-factor grid), compare (evaluate several policies on
common seeds), verify (recheck a stored equilibrium's residuals).

Exit codes: 0 success, 1 validation error, 2 non-convergence / failed
verification. All randomness is controlled by --seed; identical invocations
write byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .documents import (PolicyDocument, SweepRow, document_from_solution,
                        document_to_policy_kind, load_policy_document,
                        save_policy_document, verify_document,
                        write_compare_csv, write_sweep_csv, write_trace_csv)
from .game import GameSpec
from .policies import BUILTIN_POLICIES, PolicyKind
from .simulate import SimConfig, run_simulation
from .solver import SolverSchedule, solve_equilibrium

ALPHA_ONE_MESSAGE = ("alpha=1.0 is outside the solvable range: the discounted-cost "
                     "series and the Bellman fixed point degenerate as alpha -> 1. "
                     "Solve with alpha < 1 (values >= 0.9 are flagged unverified).")


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; we reserve 2 for non-convergence
        raise CliError(message)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise CliError(f"expected comma-separated numbers, got {text!r}") from None


def _int_pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise CliError(f"expected lo,hi — got {text!r}")
    return int(parts[0]), int(parts[1])


def _add_game_flags(p):
    p.add_argument("--k-max", type=int, default=12, help="karma upper bound (default 12)")
    p.add_argument("--urgency", type=_floats, default=(0.0, 3.0),
                   help="comma-separated urgency levels (default 0,3)")
    p.add_argument("--p", type=_floats, default=(0.5, 0.5), dest="urgency_probs",
                   help="urgency probabilities (default 0.5,0.5)")


def _add_schedule_flags(p):
    d = SolverSchedule()
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--tau", type=float, default=d.tau, help="momentum weight on the new policy")
    p.add_argument("--temp-init", type=float, default=d.temp_init)
    p.add_argument("--temp-decay", type=float, default=d.temp_decay)
    p.add_argument("--temp-floor", type=float, default=d.temp_floor)
    p.add_argument("--era-length", type=int, default=d.era_length)


def _add_sim_flags(p):
    p.add_argument("--agents", type=int, default=200)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--rate", type=float, default=0.1,
                   help="expected interactions per agent per epoch (default 0.1)")
    p.add_argument("--init-karma", type=_int_pair, default=(0, 12),
                   help="uniform initial karma range lo,hi (default 0,12)")


def _schedule_from(args, seed) -> SolverSchedule:
    return SolverSchedule(iterations=args.iterations, tau=args.tau,
                          temp_init=args.temp_init, temp_decay=args.temp_decay,
                          temp_floor=args.temp_floor, era_length=args.era_length,
                          seed=seed)


def _spec_from(args, alpha: float) -> GameSpec:
    return GameSpec(k_max=args.k_max, urgency_levels=args.urgency,
                    urgency_probs=args.urgency_probs, alpha=alpha)


def _print_solution_summary(solution):
    r = solution.residuals
    flag = lambda ok: "pass" if ok else "FAIL"
    print(f"alpha={solution.spec.alpha:g}  iterations={solution.iterations_run}  "
          f"final_temperature={solution.final_temperature:.3g}  "
          f"refined={solution.refined}  converged={solution.converged}"
          + ("  [unverified: alpha >= 0.9]" if solution.unverified else ""))
    print(f"  stationarity      {r.stationarity:.3e}  [{flag(r.stationarity_ok)}]")
    print(f"  bellman           {r.bellman:.3e}  [{flag(r.bellman_ok)}]")
    print(f"  best-response gap {r.best_response_gap:.3e}  [{flag(r.rationality_ok)}]")
    print("expected bid per karma level:")
    bids = solution.expected_bids
    karma_header = "  ".join(f"{k:>5d}" for k in range(solution.spec.n_karma))
    print(f"  urgency \\ karma {karma_header}")
    for u, level in enumerate(solution.spec.urgency_levels):
        row = "  ".join(f"{bids[u, k]:>5.2f}" for k in range(solution.spec.n_karma))
        print(f"  {level:>14.3g}  {row}")


def cmd_solve(args) -> int:
    if args.alpha >= 1.0:
        raise CliError(ALPHA_ONE_MESSAGE)
    spec = _spec_from(args, args.alpha)
    solution = solve_equilibrium(spec, _schedule_from(args, args.seed))
    _print_solution_summary(solution)
    if args.out:
        save_policy_document(document_from_solution(solution), args.out)
        print(f"wrote {args.out}")
    return 0 if solution.converged else 2


def _resolve_policy(args, token: str, sim_spec: GameSpec) -> PolicyKind:
    """A policy token is a builtin name or a path to a policy document."""
    if token in BUILTIN_POLICIES:
        return PolicyKind(name=token)
    path = Path(token)
    if not path.exists():
        raise CliError(f"unknown policy {token!r}: not a builtin "
                       f"{BUILTIN_POLICIES} and no such file")
    doc = load_policy_document(path)
    if (doc.spec.k_max != sim_spec.k_max
            or doc.spec.urgency_levels != sim_spec.urgency_levels
            or doc.spec.urgency_probs != sim_spec.urgency_probs):
        raise CliError(f"document {token!r} was solved for k_max={doc.spec.k_max}, "
                       f"urgency={doc.spec.urgency_levels} p={doc.spec.urgency_probs}; "
                       "simulation flags disagree")
    return document_to_policy_kind(doc, label=path.stem)


def _mean_metrics(spec: GameSpec, kind: PolicyKind, args, seeds):
    reports = []
    for seed in seeds:
        config = SimConfig(spec=spec, policy=kind, n_agents=args.agents,
                           epochs=args.epochs, encounter_rate=args.rate,
                           seed=seed, initial_karma=args.init_karma)
        reports.append(run_simulation(config)[1])
    mean = lambda f: float(np.mean([getattr(rep, f) for rep in reports]))
    return mean("inefficiency"), mean("unfairness"), mean("w2_estimate"), reports


def cmd_simulate(args) -> int:
    spec = _spec_from(args, 0.0)
    kind = _resolve_policy(args, args.policy, spec)
    seeds = [args.seed + i for i in range(args.n_seeds)]
    ineff, unfair, w2, reports = _mean_metrics(spec, kind, args, seeds)
    payload = {
        "policy": kind.label,
        "seeds": seeds,
        "per_seed": [{"seed": rep.metadata["seed"],
                      "inefficiency": rep.inefficiency,
                      "unfairness": rep.unfairness,
                      "w2_estimate": rep.w2_estimate} for rep in reports],
        "mean": {"inefficiency": ineff, "unfairness": unfair, "w2_estimate": w2},
        "config": {"n_agents": args.agents, "epochs": args.epochs,
                   "encounter_rate": args.rate, "initial_karma": list(args.init_karma),
                   "k_max": spec.k_max, "urgency_levels": list(spec.urgency_levels),
                   "urgency_probs": list(spec.urgency_probs)},
    }
    print(f"{kind.label}: inefficiency={ineff:.6g} unfairness={unfair:.6g} "
          f"w2={w2:.6g} ({len(seeds)} seed{'s' if len(seeds) > 1 else ''})")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        print(f"wrote {args.out}")
    if args.trace:
        config = SimConfig(spec=spec, policy=kind, n_agents=args.agents,
                           epochs=args.epochs, encounter_rate=args.rate,
                           seed=seeds[0], initial_karma=args.init_karma)
        trace, _ = run_simulation(config)
        write_trace_csv(trace, args.trace)
        print(f"wrote {args.trace} (seed {seeds[0]})")
    return 0


def _parse_alpha_grid(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"grid must be start:stop:step, got {text!r}")
        start, stop, step = (float(x) for x in parts)
        if step <= 0:
            raise CliError("grid step must be positive")
        count = int(round((stop - start) / step))
        grid = [round(start + i * step, 10) for i in range(count + 1)]
    else:
        grid = [float(x) for x in text.split(",")]
    if any(a < 0 or a > 1 for a in grid):
        raise CliError("alpha grid must lie within [0, 1]")
    return grid


def _sweep_one(payload):
    """Worker for one alpha: solve, simulate over the seeds, build the row."""
    (alpha, spec_kwargs, schedule_kwargs, sim_kwargs, seeds) = payload
    spec = GameSpec(alpha=alpha, **spec_kwargs)
    solution = solve_equilibrium(spec, SolverSchedule(**schedule_kwargs))
    kind = PolicyKind(name="karma-equilibrium", policy=np.asarray(solution.policy),
                      label=f"karma-eq-alpha-{alpha:g}")
    ineffs, unfairs = [], []
    for seed in seeds:
        config = SimConfig(spec=spec, policy=kind, seed=seed, **sim_kwargs)
        _, rep = run_simulation(config)
        ineffs.append(rep.inefficiency)
        unfairs.append(rep.unfairness)
    r = solution.residuals
    row = SweepRow(alpha=alpha, inefficiency=float(np.mean(ineffs)),
                   unfairness=float(np.mean(unfairs)),
                   stationarity=r.stationarity, bellman=r.bellman,
                   best_response_gap=r.best_response_gap,
                   converged=solution.converged, unverified=solution.unverified,
                   seeds=len(seeds))
    return row, np.asarray(solution.policy)


def cmd_sweep(args) -> int:
    grid = _parse_alpha_grid(args.alphas)
    if any(a == 1.0 for a in grid) and not args.force_alpha_one:
        raise CliError(ALPHA_ONE_MESSAGE + "  (pass --force-alpha-one to evaluate "
                       "alpha=1.0 with the last verified policy)")
    solvable = [a for a in grid if a < 1.0]
    seeds = [args.seed + i for i in range(args.seeds)]
    spec_kwargs = dict(k_max=args.k_max, urgency_levels=args.urgency,
                       urgency_probs=args.urgency_probs)
    sim_kwargs = dict(n_agents=args.agents, epochs=args.epochs,
                      encounter_rate=args.rate, initial_karma=args.init_karma)
    schedule_kwargs = dict(iterations=args.iterations, tau=args.tau,
                           temp_init=args.temp_init, temp_decay=args.temp_decay,
                           temp_floor=args.temp_floor, era_length=args.era_length,
                           seed=args.seed)
    payloads = [(a, spec_kwargs, schedule_kwargs, sim_kwargs, seeds) for a in solvable]
    rows, policies = [], {}
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, payloads))
    else:
        results = [_sweep_one(p) for p in payloads]
    for row, policy in results:
        rows.append(row)
        policies[row.alpha] = policy
        status = "ok" if row.converged else ("unverified" if row.unverified else "NOT CONVERGED")
        print(f"alpha={row.alpha:<5g} inefficiency={row.inefficiency:.4f} "
              f"unfairness={row.unfairness:.4f} [{status}]")

    if any(a == 1.0 for a in grid):
        verified = [r.alpha for r in rows if r.converged and not r.unverified]
        if not verified:
            raise CliError("no verified alpha available to stand in for alpha=1.0")
        stand_in = max(verified)
        kind = PolicyKind(name="karma-equilibrium", policy=policies[stand_in],
                          label=f"karma-eq-alpha-1.0-via-{stand_in:g}")
        spec = GameSpec(alpha=stand_in, **spec_kwargs)
        ineffs, unfairs = [], []
        for seed in seeds:
            config = SimConfig(spec=spec, policy=kind, seed=seed, **sim_kwargs)
            _, rep = run_simulation(config)
            ineffs.append(rep.inefficiency)
            unfairs.append(rep.unfairness)
        rows.append(SweepRow(alpha=1.0, inefficiency=float(np.mean(ineffs)),
                             unfairness=float(np.mean(unfairs)),
                             stationarity=float("nan"), bellman=float("nan"),
                             best_response_gap=float("nan"), converged=False,
                             unverified=True, seeds=len(seeds)))
        print(f"alpha=1.0 simulated with the alpha={stand_in:g} policy [unverified]")

    write_sweep_csv(rows, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_compare(args) -> int:
    tokens = [t for t in args.policies.split(",") if t]
    if not tokens:
        raise CliError("no policies given; pass --policies name[,name...]")
    spec = _spec_from(args, 0.0)
    seeds = [args.seed + i for i in range(args.seeds)]
    rows = []
    for token in tokens:
        kind = _resolve_policy(args, token, spec)
        ineff, unfair, _, _ = _mean_metrics(spec, kind, args, seeds)
        rows.append((kind.label, ineff, unfair))
        print(f"{kind.label:<32s} inefficiency={ineff:.4f} unfairness={unfair:.4f}")
    if args.out:
        write_compare_csv(rows, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_verify(args) -> int:
    doc = load_policy_document(args.doc)
    report = verify_document(doc, args.tol)
    flag = lambda ok: "pass" if ok else "FAIL"
    print(f"stationarity      {report.stationarity:.3e}  [{flag(report.stationarity_ok)}]")
    print(f"bellman           {report.bellman:.3e}  [{flag(report.bellman_ok)}]")
    print(f"best-response gap {report.best_response_gap:.3e}  [{flag(report.rationality_ok)}]")
    return 0 if report.ok else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="karmagames",
                     description="Karma-game equilibrium solver and population simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[], help="solve an equilibrium and write a policy document")
    p.add_argument("--alpha", type=float, required=True)
    _add_game_flags(p)
    _add_schedule_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None, help="output policy document (JSON)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run the population experiment for one policy")
    p.add_argument("--policy", type=str, required=True,
                   help="builtin policy name or path to a policy document")
    _add_game_flags(p)
    _add_sim_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-seeds", type=int, default=1)
    p.add_argument("--out", type=str, default=None, help="metrics JSON path")
    p.add_argument("--trace", type=str, default=None, help="interaction trace CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="solve and evaluate a grid of discount factors")
    p.add_argument("--alphas", type=str, default="0:0.85:0.05",
                   help="start:stop:step or comma list (default 0:0.85:0.05)")
    _add_game_flags(p)
    _add_schedule_flags(p)
    _add_sim_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=5, help="simulation seeds per alpha")
    p.add_argument("--jobs", type=int, default=1, help="parallel solver processes")
    p.add_argument("--force-alpha-one", action="store_true",
                   help="evaluate alpha=1.0 using the last verified policy")
    p.add_argument("--out", type=str, required=True, help="sweep CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="evaluate several policies on common seeds")
    p.add_argument("--policies", type=str, default=",".join(BUILTIN_POLICIES),
                   help="comma list of builtin names and/or document paths")
    _add_game_flags(p)
    _add_sim_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--out", type=str, default=None, help="comparison CSV path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="recheck the residuals stored in a policy document")
    p.add_argument("--doc", type=str, required=True)
    p.add_argument("--tol", type=float, default=None,
                   help="rho slack for the rationality check (default 1e-3 * max urgency)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
