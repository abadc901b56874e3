"""Command-line entry point tying the pipeline together, plus the batch
benchmark harness.

Exit codes (stable contract): 0 success, 1 usage or I/O failure, 2 infeasible
instance, 3 verification failure, 4 solver error.  The ``verify`` command
exits 0/1 on the verdict.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from ssltl.errors import SsltlError, SolverError
from ssltl.hoa import load_hoa
from ssltl.ilp import (
    IlpConfig,
    SolverConfig,
    build_program,
    default_solver_command,
    export_lp,
)
from ssltl.chain import limiting_distribution, lump_distribution, \
    product_state_partition
from ssltl.graph import accepting_mecs, mec_decomposition
from ssltl.model import GridSpec, generate_grid, load_model, load_spec, \
    save_model
from ssltl.product import build_product, induce_chain, load_policy, \
    save_policy
from ssltl.synthesis import synthesize
from ssltl.verify import verify_policy

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_UNVERIFIED = 3
EXIT_SOLVER = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _solver_config(args) -> SolverConfig:
    cmd = args.solver_cmd or default_solver_command()
    return SolverConfig(command=cmd, timeout=args.timeout)


def _ilp_config(args) -> IlpConfig:
    objective = {"reward": "expected_reward",
                 "feasibility": "feasibility"}[args.objective]
    return IlpConfig(epsilon=args.eps, acc_eps=args.acc_eps,
                     flow_ratio=args.flow_ratio, objective=objective)


def _add_solver_flags(p):
    p.add_argument("--solver-cmd", default=None,
                   help="command template with {lp} and {sol} placeholders "
                        "(default: $SSLTL_SOLVER_CMD, else auto-detect)")
    p.add_argument("--timeout", type=float, default=None,
                   help="solver wall-clock limit per invocation, seconds")
    p.add_argument("--eps", type=float, default=None,
                   help="flow strict-decrease increment (default: "
                        "min(1e-4, 1/(4 n)))")
    p.add_argument("--acc-eps", type=float, default=1e-4,
                   help="acceptance-mass threshold replacing strict > 0")
    p.add_argument("--flow-ratio", type=float, default=2.0,
                   help="denominator of the outgoing/incoming flow bound")
    p.add_argument("--objective", choices=("reward", "feasibility"),
                   default="reward")
    p.add_argument("--max-cut-rounds", type=int, default=64)
    p.add_argument("--keep-files", default=None, metavar="DIR",
                   help="keep LP and solution files in this directory")


def cmd_gen_grid(args) -> int:
    spec = GridSpec(width=args.size, height=args.size, seed=args.seed,
                    dynamics={"det": "deterministic",
                              "slip": "slip"}[args.dynamics],
                    slip_main=args.slip_p, reward_mode=args.rewards)
    save_model(generate_grid(spec), args.output)
    return EXIT_OK


def _load_instance(args):
    model = load_model(args.model)
    spec = load_spec(args.spec)
    dra = load_hoa(spec.dra_source)
    return model, spec, dra


def cmd_synth(args) -> int:
    model, spec, dra = _load_instance(args)
    result = synthesize(model, dra, spec, cfg=_ilp_config(args),
                        solver=_solver_config(args),
                        max_cut_rounds=args.max_cut_rounds,
                        keep_files=args.keep_files)
    record = {
        "model": args.model,
        "spec": args.spec,
        "status": result.status,
        "rounds": result.rounds,
        "solve_seconds": result.solve_seconds,
        "total_seconds": result.total_seconds,
        "objective": result.objective,
        "verified": result.status == "verified",
        "detail": result.detail,
        "report": result.report.to_json() if result.report else None,
    }
    if args.record:
        with open(args.record, "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=2)
            fh.write("\n")
    print(json.dumps({k: record[k] for k in
                      ("status", "rounds", "objective", "solve_seconds")}))
    if result.status == "verified":
        save_policy(result.policy, args.output)
        return EXIT_OK
    if result.status == "infeasible":
        return EXIT_INFEASIBLE
    if result.status == "unverified":
        return EXIT_UNVERIFIED
    return EXIT_SOLVER


def cmd_verify(args) -> int:
    model, spec, dra = _load_instance(args)
    policy = load_policy(args.policy)
    report = verify_policy(model, dra, spec, policy)
    text = json.dumps(report.to_json(), indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK if report.verdict else 1


def cmd_steady(args) -> int:
    model = load_model(args.model)
    dra = load_hoa(args.dra)
    policy = load_policy(args.policy)
    product = build_product(model, dra)
    chain = induce_chain(product, policy)
    dist = limiting_distribution(chain)
    lumped = lump_distribution(dist, product_state_partition(chain.states))
    doc = {
        "product": [{"s": s, "q": q, "p": p}
                    for (s, q), p in sorted(dist.items())],
        "aggregate": [{"s": s, "p": lumped.get(s, 0.0)}
                      for s in model.states],
    }
    text = json.dumps(doc, indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_export_lp(args) -> int:
    model, spec, dra = _load_instance(args)
    product = build_product(model, dra)
    amecs = accepting_mecs(mec_decomposition(product), dra)
    ilp = build_program(product, amecs, spec, _ilp_config(args))
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(export_lp(ilp))
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    instance: str
    size: int
    spec: str
    status: str
    seconds: float          # solver wall time
    total_seconds: float
    objective: Optional[float]
    verified: bool

    def csv_row(self):
        return [self.instance, self.size, self.spec, self.status,
                f"{self.seconds:.6f}",
                "" if self.objective is None else repr(self.objective),
                str(self.verified).lower()]


def _bench_one(task) -> RunRecord:
    size, seed, spec_path, solver_cmd, timeout, objective, dynamics = task
    from ssltl.model import load_spec as _load_spec

    spec = _load_spec(spec_path)
    dra = load_hoa(spec.dra_source)
    model = generate_grid(GridSpec(width=size, height=size, seed=seed,
                                   dynamics=dynamics))
    cfg = IlpConfig(objective=objective)
    solver = SolverConfig(command=solver_cmd, timeout=timeout)
    name = spec_path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    try:
        result = synthesize(model, dra, spec, cfg=cfg, solver=solver)
    except SsltlError as exc:
        return RunRecord(instance=f"{name}_{size}x{size}_seed{seed}",
                         size=size, spec=name, status="error", seconds=0.0,
                         total_seconds=0.0, objective=None, verified=False)
    return RunRecord(
        instance=f"{name}_{size}x{size}_seed{seed}", size=size, spec=name,
        status=result.status, seconds=result.solve_seconds,
        total_seconds=result.total_seconds, objective=result.objective,
        verified=result.status == "verified")


def cmd_bench(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",") if x]
    specs = [x for x in args.specs.split(",") if x]
    solver_cmd = args.solver_cmd or default_solver_command()
    objective = {"reward": "expected_reward",
                 "feasibility": "feasibility"}[args.objective]
    tasks = [(size, args.seed_base + i, spec_path, solver_cmd, args.timeout,
              objective, {"det": "deterministic", "slip": "slip"}[args.dynamics])
             for spec_path in specs for size in sizes
             for i in range(args.seeds)]

    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            records = list(pool.map(_bench_one, tasks))
    else:
        records = [_bench_one(t) for t in tasks]

    with open(args.output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "size", "spec", "status", "seconds",
                         "objective", "verified"])
        for rec in records:
            writer.writerow(rec.csv_row())
        for spec_path in specs:
            name = spec_path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
            for size in sizes:
                times = [r.seconds for r in records
                         if r.spec == name and r.size == size]
                if not times:
                    continue
                mean = statistics.fmean(times)
                sdev = statistics.stdev(times) if len(times) > 1 else 0.0
                writer.writerow(["summary", size, name, "mean",
                                 f"{mean:.6f}", "", ""])
                writer.writerow(["summary", size, name, "stddev",
                                 f"{sdev:.6f}", "", ""])
    failures = [r for r in records if r.status in ("error", "unverified")]
    print(f"{len(records)} runs, {len(failures)} failures -> {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssltl",
                     description="Deterministic policy synthesis for labeled "
                                 "MDPs under automaton plus steady-state "
                                 "objectives.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-grid", parents=[], help="generate a random "
                       "gridworld model file")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dynamics", choices=("det", "slip"), default="det")
    p.add_argument("--slip-p", type=float, default=0.8)
    p.add_argument("--rewards", choices=("bernoulli01", "zero"),
                   default="bernoulli01")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen_grid)

    p = sub.add_parser("synth", help="synthesize and verify a policy")
    p.add_argument("--model", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("-o", "--output", default="policy.json")
    p.add_argument("--record", default=None, help="write a JSON run record")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="verify a policy file independently")
    p.add_argument("--model", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("steady", help="limiting distributions of the "
                       "policy-induced product and aggregated chains")
    p.add_argument("--model", required=True)
    p.add_argument("--dra", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("export-lp", help="write the program in LP format")
    p.add_argument("--model", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("-o", "--output", required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("bench", help="run the gridworld benchmark suite")
    p.add_argument("--sizes", default="4", help="comma-separated grid sizes")
    p.add_argument("--specs", required=True,
                   help="comma-separated spec file paths")
    p.add_argument("--seeds", type=int, default=3,
                   help="instances per (spec, size)")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--dynamics", choices=("det", "slip"), default="det")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--objective", choices=("reward", "feasibility"),
                   default="reward")
    p.add_argument("--solver-cmd", default=None)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SolverError as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVER
    except (SsltlError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
