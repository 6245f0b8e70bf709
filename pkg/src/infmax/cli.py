"""Command-line entry point: ``infmax <command> GRAPH [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from . import adaptive, greedy, oracle, ris, saic
from .graph import EdgeListError, ProbabilityError, read_edge_list, write_label_table
from .mrt import SeedSchedule, estimate_rho, simulation_count
from .report import Report
from .rng import Streams, fresh_seed

log = logging.getLogger("infmax")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_CAP = 0, 2, 3, 4, 5


class InputError(Exception):
    pass


class Infeasible(Exception):
    pass


def _graph_args(p):
    p.add_argument("graph", help="edge list: 'u v [p]' per line, '#' comments")
    p.add_argument("--weighted-cascade", action="store_true",
                   help="p(u,v) = 1/indegree(v), ignoring listed probabilities")
    p.add_argument("--default-p", type=float, default=None,
                   help="probability for records without one")
    p.add_argument("--seed", type=int, default=None, help="master RNG seed (fresh if omitted)")
    p.add_argument("--threads", type=int, default=1, help="worker cap for candidate evaluation")
    p.add_argument("--report", default=None, help="write a JSONL report here")
    p.add_argument("--labels-out", default=None, help="write the id/label table here")
    p.add_argument("-v", "--verbose", action="store_true")


def _budget_args(p, rounds=True):
    if rounds:
        p.add_argument("--rounds", "-T", type=int, default=1, help="number of rounds T")
    p.add_argument("--budget", "--k", "-k", dest="budget", type=int, default=1,
                   help="seeds per round k")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--ell", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="infmax", description="Multi-round and preemptive influence maximization")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample one multi-round outcome per run")
    _graph_args(p)
    p.add_argument("--schedule", required=True, help="one line of seed labels per round, '-' for none")
    p.add_argument("--runs", type=int, default=1)

    p = sub.add_parser("mrim", help="non-adaptive multi-round seed selection")
    _graph_args(p)
    _budget_args(p)
    p.add_argument("--mode", choices=["within", "cross"], default="within")
    p.add_argument("--algo", choices=["greedy", "imm"], default="greedy")
    p.add_argument("--mc-samples", type=int, default=None,
                   help="simulations per evaluation (default: theorem formula)")
    p.add_argument("--t-squared", action="store_true", help="use the T^2 variant of the count")
    p.add_argument("--exact", action="store_true", help="exact enumeration evaluator")
    p.add_argument("--lazy", action="store_true", help="lazy (CELF) greedy")
    p.add_argument("--crn", action="store_true", help="common random numbers across candidates")
    p.add_argument("--eval-samples", type=int, default=10000)

    p = sub.add_parser("adaptive", help="adaptive multi-round seeding")
    _graph_args(p)
    _budget_args(p)
    p.add_argument("--algo", choices=["greedy", "imm"], default="imm")
    p.add_argument("--mc-samples", type=int, default=1000)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--incremental", action="store_true")
    p.add_argument("--trace", default=None, help="write per-round JSONL trace here")

    p = sub.add_parser("saic", help="self-activation problems (bim, bpim, pim)")
    _graph_args(p)
    _budget_args(p, rounds=False)
    p.add_argument("--problem", choices=["bim", "bpim", "pim"], required=True)
    p.add_argument("--q", type=float, default=None, help="uniform self-activation probability")
    p.add_argument("--q-case", type=int, choices=range(5), default=None)
    p.add_argument("--q-base", type=float, default=2.0, help="base bound c for --q-case")
    p.add_argument("--delay", default="exp:1", help="self-activation delay, exp:<rate> or const:<v>")
    p.add_argument("--edge-delay", default="exp:1", help="propagation delay")
    p.add_argument("--profile", default=None, help="key-value profile file (overrides q flags)")
    p.add_argument("--mc-samples", type=int, default=10000, help="samples for evaluating the answer")

    p = sub.add_parser("eval", help="Monte Carlo spread of a schedule")
    _graph_args(p)
    p.add_argument("--schedule", required=True)
    p.add_argument("--mc-samples", "--samples", dest="mc_samples", type=int, default=10000)

    p = sub.add_parser("oracle", help="exact spread or exhaustive optimum (small graphs)")
    _graph_args(p)
    p.add_argument("--schedule", default=None)
    p.add_argument("--rounds", "-T", type=int, default=1)
    p.add_argument("--budget", "--k", "-k", dest="budget", type=int, default=1)
    return ap


def _read_schedule(path, g) -> SeedSchedule:
    rounds = []
    try:
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                rounds.append([] if line == "-" else [g.node(x) for x in line.split()])
    except OSError as exc:
        raise InputError(f"cannot read schedule: {exc}") from exc
    except KeyError as exc:
        raise InputError(str(exc)) from exc
    return SeedSchedule(rounds)


def _labels(g, nodes):
    return [g.labels[v] for v in sorted(nodes)]


def _sched_labels(g, sched):
    return [_labels(g, r) for r in sched.rounds]


def _check_budget(g, k):
    if not 1 <= k <= g.n:
        raise Infeasible(f"budget k={k} is infeasible for a graph with {g.n} nodes")


def cmd_simulate(a, g, st, rep):
    from .mrt import simulate_schedule
    sched = _read_schedule(a.schedule, g)
    sizes = []
    for i in range(a.runs):
        out = simulate_schedule(g, sched, st.child(("run", i)).generator("simulate"))
        sizes.append(len(out))
        rep.add("outcome", run=i, activated=_labels(g, out))
    rep.add("result", runs=a.runs, mean_activated=float(np.mean(sizes)))


def cmd_mrim(a, g, st, rep):
    _check_budget(g, a.budget)
    T, k = a.rounds, a.budget
    if a.algo == "imm":
        sched, est, res = ris.imm_mrim(g, T, k, a.epsilon, a.ell, st.child("imm"), mode=a.mode)
        spread = estimate_rho(g, sched, a.eval_samples, st.child("eval"))
        rep.add("result", algorithm=f"imm-{a.mode}", seeds=_sched_labels(g, sched),
                spread=spread.mean, stderr=spread.stderr, eval_samples=spread.samples,
                rr_estimate=est, theta=res.params.theta, LB=res.params.LB)
        return
    if a.exact:
        ev = greedy.ExactEvaluator(g)
        R = None
    else:
        R = a.mc_samples or simulation_count(k, g.n, a.ell, T, a.epsilon, a.t_squared)
        ev = greedy.MCEvaluator(g, R, st.child("greedy"), crn=a.crn, threads=a.threads)
    solver = greedy.double_greedy if a.mode == "within" else greedy.global_greedy
    res = solver(g, T, k, ev, lazy=a.lazy)
    if a.exact:
        spread_mean, spread_se, n_eval = res.value, 0.0, 0
    else:
        est = estimate_rho(g, res.schedule, a.eval_samples, st.child("eval"))
        spread_mean, spread_se, n_eval = est.mean, est.stderr, est.samples
    rep.add("result", algorithm=("double-greedy" if a.mode == "within" else "global-greedy"),
            seeds=_sched_labels(g, res.schedule), spread=spread_mean, stderr=spread_se,
            eval_samples=n_eval, R=R, evaluations=res.evaluations)
    for p in res.picks:
        rep.add("pick", node=g.labels[p.node], round=p.round, gain=p.gain, zero_gain=p.zero_gain)


def cmd_adaptive(a, g, st, rep):
    _check_budget(g, a.budget)
    if a.algo == "greedy":
        pol = adaptive.AdaGreedyPolicy(a.mc_samples)
    else:
        pol = adaptive.AdaIMMPolicy(a.epsilon, a.ell, a.rounds, incremental=a.incremental)
    summ = adaptive.run_adaptive(g, pol, a.rounds, a.budget, a.trials, st.child("adaptive"))
    rep.add("result", algorithm=pol.name, f_avg=summ.mean, stderr=summ.stderr, trials=a.trials)
    for rec in adaptive.trace_records(summ):
        rec["seeds"] = [g.labels[v] for v in rec["seeds"]]
        rec["newly_activated"] = [g.labels[v] for v in rec["newly_activated"]]
        rep.add("trace", **rec)
    for rec in getattr(pol, "log", []):
        rep.add("sizing", **rec)
    if a.trace:
        with open(a.trace, "w", encoding="utf-8") as fh:
            adaptive.write_trace(summ, fh)


def _profile(a, g, st):
    if a.profile:
        try:
            with open(a.profile, encoding="utf-8") as fh:
                return saic.parse_profile(fh, g, st.child("profile"))
        except OSError as exc:
            raise InputError(f"cannot read profile: {exc}") from exc
    nd, ed = saic.DelayDist.parse(a.delay), saic.DelayDist.parse(a.edge_delay)
    if a.q_case is not None:
        q = saic.generate_q(a.q_case, a.q_base, g, st.child("profile"))
    else:
        q = np.full(g.n, 0.0 if a.q is None else a.q)
    base = saic.SelfActivationProfile.uniform(g.n, 0.0, nd)
    return saic.SelfActivationProfile(q, base.kind, base.param), saic.EdgeDelays.uniform(g.m, ed)


def cmd_saic(a, g, st, rep):
    _check_budget(g, a.budget)
    prof, ed = _profile(a, g, st)
    rng = st.child("solver")
    if a.problem == "bim":
        res = saic.imm_bim(g, prof, a.budget, a.epsilon, a.ell, rng)
        target = "sigma_b"
    elif a.problem == "bpim":
        res = saic.imm_bpim(g, prof, ed, a.budget, a.epsilon, a.ell, rng)
        target = "rho_b"
    else:
        res = saic.imm_pim(g, prof, ed, a.budget, a.epsilon, a.ell, rng)
        target = "rho"
    ev = saic.estimate_objective(g, prof, ed, target, res.seeds, a.mc_samples, st.child("eval"))
    rep.add("result", algorithm=f"imm-{a.problem}", seeds=_labels(g, res.seeds),
            ranked=[g.labels[v] for v in res.seeds], objective=target, spread=ev.mean,
            stderr=ev.stderr, eval_samples=ev.samples, rr_estimate=res.estimate,
            theta=res.theta, LB=res.LB, rr_samples=res.samples)
    for w in res.warnings:
        rep.add("warning", message=w)


def cmd_eval(a, g, st, rep):
    sched = _read_schedule(a.schedule, g)
    est = estimate_rho(g, sched, a.mc_samples, st.child("eval"))
    rep.add("result", seeds=_sched_labels(g, sched), spread=est.mean, stderr=est.stderr,
            samples=est.samples)


def cmd_oracle(a, g, st, rep):
    if a.schedule:
        sched = _read_schedule(a.schedule, g)
        rep.add("result", seeds=_sched_labels(g, sched), exact_spread=oracle.exact_rho_mrt(g, sched))
        return
    _check_budget(g, a.budget)
    val, sched = oracle.exhaustive_opt("mrim-wr", g, a.budget, a.rounds)
    rep.add("result", optimum=val, seeds=_sched_labels(g, sched))


COMMANDS = {"simulate": cmd_simulate, "mrim": cmd_mrim, "adaptive": cmd_adaptive,
            "saic": cmd_saic, "eval": cmd_eval, "oracle": cmd_oracle}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    seed = a.seed if a.seed is not None else fresh_seed()
    params = {k: v for k, v in vars(a).items()
              if k not in ("command", "report", "verbose", "labels_out", "seed")}
    rep = Report(a.command, params, seed)
    t0 = time.perf_counter()
    try:
        try:
            g = read_edge_list(a.graph, weighted_cascade=a.weighted_cascade, default_p=a.default_p)
        except OSError as exc:
            raise InputError(f"cannot read graph: {exc}") from exc
        rep.add("graph", n=g.n, m=g.m, duplicates_dropped=g.duplicates_dropped)
        if a.labels_out:
            write_label_table(g, a.labels_out)
        COMMANDS[a.command](a, g, Streams(seed), rep)
    except (InputError, EdgeListError, ProbabilityError) as exc:
        print(f"infmax: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (Infeasible,) as exc:
        print(f"infmax: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except oracle.EnumerationCapError as exc:
        print(f"infmax: enumeration cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:
        print(f"infmax: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rep.timing = {"wall_time_s": time.perf_counter() - t0}
    if a.report:
        rep.write(a.report)
    print(rep.summary())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
