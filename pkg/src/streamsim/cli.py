"""Command-line entry points: trace generation, single runs, and policy comparison."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from . import engine, metrics, plots, workload
from .provisioner import PolicyKind
from .workload import ConfigError, TraceFormatError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

THREADS_ENV = "SMSE_SIM_THREADS"


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _atomic_write(path: Path, content: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(path):
    if path is None:
        return config_mod.ExperimentConfig()
    try:
        return config_mod.load(path)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}")
    except ConfigError as exc:
        raise CliError(str(exc))


def _policy(name: str) -> PolicyKind:
    try:
        return PolicyKind(name)
    except ValueError:
        known = ", ".join(p.value for p in PolicyKind)
        raise CliError(f"unknown policy {name!r} (known: {known})")


def _mix_seed(base: int, seed: int, level: int) -> int:
    return (base * 2654435761 + seed * 1000003 + level) % (2**63)


def _run_one(cfg, trace, policy: PolicyKind, seed: int, level: int):
    host = replace(cfg.host, rng_seed=_mix_seed(cfg.host.rng_seed, seed, level))
    result = engine.run(
        trace,
        host,
        cfg.repository,
        policy,
        cfg.make_estimator(),
        params=cfg.params,
        static_config=cfg.static_config() if policy is PolicyKind.STATIC_DURABLE else None,
    )
    report = metrics.summarize(
        result,
        trace,
        policy=policy.value,
        seed=seed,
        level=level,
        config_digest=cfg.digest(),
    )
    return result, report


def _plan_log_text(result) -> str:
    return "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in result.plan_log)


def _event_log_text(result) -> str:
    return "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in result.event_log)


def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    tasks = args.tasks if args.tasks is not None else cfg.levels[0]
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    try:
        wl = cfg.workload_config(tasks, seed)
        records = workload.generate_trace(wl)
    except ConfigError as exc:
        raise CliError(str(exc))
    out = Path(args.out)
    _atomic_write(out, "".join(r.to_json() + "\n" for r in records))
    print(f"wrote {len(records)} records to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.strict_paper_loop:
        cfg.params = replace(cfg.params, strict_paper_loop=True)
    policy = _policy(args.policy)
    try:
        trace = workload.load_trace(args.trace)
    except FileNotFoundError:
        raise CliError(f"trace file not found: {args.trace}")
    except TraceFormatError as exc:
        raise CliError(f"bad trace {args.trace}: {exc}")
    seed = args.seed if args.seed is not None else 0

    try:
        result, report = _run_one(cfg, trace, policy, seed, len(trace))
    except Exception as exc:
        raise CliError(f"simulation failed: {exc}", code=EXIT_RUNTIME)

    out = Path(args.out)
    buf = _report_csv_text([report])
    _atomic_write(out / "report.csv", buf)
    _atomic_write(out / "plan_log.jsonl", _plan_log_text(result))
    if args.event_log:
        _atomic_write(out / "event_log.jsonl", _event_log_text(result))
    print(
        f"{policy.value}: {report.level} tasks, makespan {report.makespan_s:.3f} s, "
        f"miss rate {report.deadline_miss_rate:.4f}"
    )
    return EXIT_OK


def _report_csv_text(reports) -> str:
    import io

    buf = io.StringIO()
    rows = sorted(reports, key=lambda r: (r.policy, r.level, r.seed))
    buf.write(",".join(metrics.REPORT_HEADER) + "\n")
    for rep in rows:
        buf.write(
            f"{rep.policy},{rep.level},{rep.seed},{rep.makespan_s!r},"
            f"{rep.deadline_miss_rate!r},{rep.total_start_overhead_s!r},"
            f"{rep.total_init_overhead_s!r}\n"
        )
    return buf.getvalue()


def _comparison_csv_text(rows) -> str:
    import io
    import math

    buf = io.StringIO()
    buf.write("policy,level,n_seeds,makespan_mean_s,ci95_half_width_s\n")
    for row in rows:
        half = "n/a" if math.isnan(row.ci95_half_width_s) else repr(row.ci95_half_width_s)
        buf.write(f"{row.policy},{row.level},{row.n_seeds},{row.makespan_mean_s!r},{half}\n")
    return buf.getvalue()


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    if args.strict_paper_loop:
        cfg.params = replace(cfg.params, strict_paper_loop=True)
    if len(cfg.policies) < 2:
        raise CliError("compare needs at least 2 policies in the config")
    if args.seed is not None:
        cfg.seeds = [args.seed]

    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        raise CliError(f"output directory {out} exists and is not empty")
    staging = Path(str(out) + ".partial")
    if staging.exists():
        raise CliError(f"stale staging directory {staging} from an interrupted run; remove it first")
    staging.mkdir(parents=True)

    try:
        traces = {}
        for level in cfg.levels:
            for seed in cfg.seeds:
                records = workload.generate_trace(cfg.workload_config(level, seed))
                traces[(level, seed)] = records
                _atomic_write(
                    staging / "traces" / f"level{level}_seed{seed}.jsonl",
                    "".join(r.to_json() + "\n" for r in records),
                )

        jobs = [
            (level, seed, policy)
            for level in cfg.levels
            for seed in cfg.seeds
            for policy in cfg.policies
        ]
        workers = max(1, int(os.environ.get(THREADS_ENV, "1")))

        def work(job):
            level, seed, policy = job
            return job, _run_one(cfg, traces[(level, seed)], policy, seed, level)

        results = {}
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for job, payload in pool.map(work, jobs):
                results[job] = payload

        reports = []
        for (level, seed, policy) in jobs:
            result, report = results[(level, seed, policy)]
            reports.append(report)
            _atomic_write(
                staging / "runs" / f"{policy.value}_l{level}_s{seed}_plan.jsonl",
                _plan_log_text(result),
            )
            if args.event_log:
                _atomic_write(
                    staging / "runs" / f"{policy.value}_l{level}_s{seed}_events.jsonl",
                    _event_log_text(result),
                )

        rows = metrics.compare(reports)
        _atomic_write(staging / "runs.csv", _report_csv_text(reports))
        _atomic_write(staging / "comparison.csv", _comparison_csv_text(rows))
        plots.render_makespan_figure(rows, staging / "makespan.png")
    except CliError:
        raise
    except Exception as exc:
        raise CliError(f"comparison failed: {exc}", code=EXIT_RUNTIME)

    if out.exists():
        out.rmdir()
    os.replace(staging, out)
    for row in rows:
        print(
            f"{row.policy:10s} level={row.level:5d} mean makespan {row.makespan_mean_s:.3f} s"
        )
    print(f"comparison written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamsim",
        description="Deterministic simulator for durable/ephemeral function-container provisioning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic workload trace")
    gen.add_argument("--config", help="experiment config JSON")
    gen.add_argument("--out", required=True, help="output trace path (JSON Lines)")
    gen.add_argument("--tasks", type=int, help="total task count (default: first level)")
    gen.add_argument("--seed", type=int, help="workload RNG seed")
    gen.set_defaults(func=cmd_generate)

    sim = sub.add_parser("simulate", help="run one policy over a trace")
    sim.add_argument("--config", help="experiment config JSON")
    sim.add_argument("--trace", required=True, help="input trace path")
    sim.add_argument("--policy", required=True, help="dynamic | static | ephemeral")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, help="host RNG seed")
    sim.add_argument("--strict-paper-loop", action="store_true",
                     help="disable the allocation fit-check (literal greedy loop)")
    sim.add_argument("--event-log", action="store_true", help="emit the full event log")
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser("compare", help="run all configured policies over shared traces")
    cmp_.add_argument("--config", help="experiment config JSON")
    cmp_.add_argument("--out", required=True, help="output directory")
    cmp_.add_argument("--seed", type=int, help="restrict to a single seed")
    cmp_.add_argument("--strict-paper-loop", action="store_true",
                      help="disable the allocation fit-check (literal greedy loop)")
    cmp_.add_argument("--event-log", action="store_true", help="emit per-run event logs")
    cmp_.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
