"""Command-line entry point: ``relayrates {rate,search,schedule,equiv,oracle}``.

Exit codes: 0 ok, 1 property failure, 2 validation error, 3 resource cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import rates, schedule as sch
from .infocalc import Evaluator
from .config import ConfigError, RunConfig, load_config, parse_config
from .model import ResourceCapError, ValidationError, check
from .properties import equivalence_suite, oracle_suite, replay
from .search import InfeasibleGridError, fmt, rank_strategies, ranking_rows

EXIT_OK, EXIT_PROPERTY, EXIT_VALIDATION, EXIT_CAP = 0, 1, 2, 3


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\r\n").writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _nodes(s) -> str:
    return " ".join(map(str, sorted(s)))


def _need(cfg: RunConfig, *sections):
    for s in sections:
        if getattr(cfg, "inputs" if s == "input" else s) is None:
            raise ConfigError(f"config.{s}", "required by this command")


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------


def cmd_rate(cfg: RunConfig, fmt_: str) -> tuple[str, int]:
    _need(cfg, "network", "assignment", "input")
    net, a, inputs, tol = cfg.network, cfg.assignment, cfg.inputs, cfg.tol
    check(net, a, inputs)
    ev = Evaluator(net, a, inputs)
    reports = [
        rates.unified_rate_thm1(net, a, inputs, tol=tol, evaluator=ev),
        rates.unified_rate_thm2(net, a, inputs, tol=tol, evaluator=ev),
    ]
    if a.df_set == net.relays:
        reports.append(rates.df_multilevel_rate(net, a, inputs, evaluator=ev))
    extra = {}
    if a.M == 0:
        reports.append(rates.cf_joint_rate(net, inputs, tol=tol, evaluator=ev))
        succ = rates.cf_successive_rate(net, inputs, tol=tol, evaluator=ev)
        if isinstance(succ, rates.Infeasible):
            extra["cfSuccessive"] = succ.to_dict()
        else:
            reports.append(succ)
    t3 = rates.verify_theorem3(net, a, inputs, tol=tol, evaluator=ev)
    loose = rates.decodable_sets(net, a, inputs, strict=False, tol=tol, evaluator=ev)
    if net.n == 1:
        extra["classic"] = rates.classic_single_relay_rates(net, a, inputs, evaluator=ev).to_dict()
    status = EXIT_OK if t3.ok else EXIT_PROPERTY

    if fmt_ == "json":
        out = {
            "schemaVersion": 1,
            "rate": reports[0].rate,
            "units": "bits/use",
            "reports": {r.method: r.to_dict() for r in reports},
            "nonStrictDecodableSets": {str(k): sorted(v) for k, v in loose.items()},
            "decodableSetCheck": t3.to_dict(),
            **extra,
        }
        return _json(out), status
    rows = [[
        "method", "level [index]", "node [index]", "decoding set [nodes]",
        "binding subset [nodes]", "value [bits/use]", "rate [bits/use]",
    ]]
    for r in reports:
        for c in r.per_node:
            rows.append([
                r.method, str(c.level), str(c.node), _nodes(c.decoding_set),
                _nodes(c.binding_subset), fmt(c.value), fmt(r.rate),
            ])
    return _csv(rows), status


def cmd_search(cfg: RunConfig, fmt_: str, threads: int) -> tuple[str, int]:
    _need(cfg, "network")
    ranked = rank_strategies(cfg.network, cfg.search, threads=threads)
    if fmt_ == "csv":
        return _csv(ranking_rows(ranked)), EXIT_OK
    out = [
        {
            "order": list(r.assignment.order),
            "dfSet": sorted(r.assignment.df_set),
            "rate": r.rate,
            "units": "bits/use",
            "parameters": r.result.params,
            "evaluated": r.result.evaluated,
            "infeasible": [{"parameters": p, "reason": why} for p, why in r.result.infeasible],
            "report": r.result.report.to_dict(),
        }
        for r in ranked
    ]
    return _json({"schemaVersion": 1, "ranking": out}), EXIT_OK


def cmd_schedule(cfg: RunConfig, fmt_: str) -> tuple[str, int, str]:
    _need(cfg, "schedule")
    sc = cfg.schedule
    s = sch.build_schedule(sc.variant, sc.M, sc.B, sc.L, cap=sc.block_cap)
    if sc.corrupt is not None:
        s = sch.move_event(s, *sc.corrupt)
    if cfg.network is not None and cfg.inputs is not None:
        s = sch.annotate_compression_rates(s, cfg.network, cfg.assignment, cfg.inputs)
    verdict = sch.verify_schedule(s)
    frac = sch.effective_rate_fraction(s)
    summary = {
        "verdict": verdict.verdict,
        "fraction": f"{frac.numerator}/{frac.denominator}",
        "fractionDecimal": float(frac),
        "violation": verdict.violation.to_dict() if verdict.violation else None,
        "compressionRates": {str(k): v for k, v in s.compression_rates.items()},
    }
    lines = [f"verdict: {summary['verdict']}", f"fraction: {summary['fraction']} ({fmt(float(frac))})"]
    if verdict.violation:
        v = verdict.violation
        lines.append(f"violation: {v.kind} at level {v.level}, block {v.block}, message {v.message}: {v.detail}")
    status = EXIT_OK if verdict.ok else EXIT_PROPERTY
    if fmt_ == "json":
        rows = sch.timeline_rows(s)
        body = _json({"schemaVersion": 1, **summary, "timeline": [dict(zip(rows[0], r)) for r in rows[1:]]})
    else:
        body = sch.timeline_csv(s)
    return body, status, "\n".join(lines) + "\n"


def _suite_output(report, fmt_: str, cfg: RunConfig) -> tuple[str, int]:
    status = EXIT_OK if report.ok else EXIT_PROPERTY
    if fmt_ == "json":
        return _json({"schemaVersion": 1, "seed": cfg.seed, "tol": cfg.tol, **report.to_dict()}), status
    rows = [["property", "passed [count]", "failed [count]", "worst discrepancy [bits/use]"]]
    for name, t in sorted(report.tallies.items()):
        rows.append([name, str(t.passed), str(t.failed), fmt(t.worst)])
    return _csv(rows), status


def cmd_equiv(cfg: RunConfig, fmt_: str) -> tuple[str, int]:
    e = cfg.equiv
    if e.replay is not None:
        report = replay(e.replay, cfg.tol)
    else:
        report = equivalence_suite(
            cfg.seed, e.discrete_instances, e.gaussian_instances,
            e.max_relays_discrete, e.max_relays_gaussian, e.components, cfg.tol,
        )
    return _suite_output(report, fmt_, cfg)


def cmd_oracle(cfg: RunConfig, fmt_: str) -> tuple[str, int]:
    o = cfg.oracle
    return _suite_output(oracle_suite(cfg.seed, o.pmfs, o.gaussian_models), fmt_, cfg)


# ----------------------------------------------------------------------------
# Driver
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relayrates", description="Achievable-rate calculator for D-F/C-F relay networks.")
    p.add_argument("command", choices=("rate", "search", "schedule", "equiv", "oracle"))
    p.add_argument("--config", help="JSON run configuration (schemaVersion 1)")
    p.add_argument("--out", default="-", help="output file ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="default: csv for *.csv outputs, else json")
    p.add_argument("--seed", type=int, help="seed for random instances (overrides config)")
    p.add_argument("--tol", type=float, help="numeric tolerance in bits (overrides config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for search")
    return p


def _load(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.command in ("equiv", "oracle"):
        cfg = parse_config({"schemaVersion": 1})
    else:
        raise ConfigError("--config", f"required for '{args.command}'")
    raw = dict(cfg.raw)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        raw["seed"] = args.seed
    if args.tol is not None:
        raw["tol"] = args.tol
    return parse_config(raw) if raw != cfg.raw else cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    if args.format is None:
        args.format = "csv" if args.out.lower().endswith(".csv") else "json"
    summary = ""
    try:
        cfg = _load(args)
        if args.command == "rate":
            body, status = cmd_rate(cfg, args.format)
        elif args.command == "search":
            body, status = cmd_search(cfg, args.format, args.threads)
        elif args.command == "schedule":
            body, status, summary = cmd_schedule(cfg, args.format)
        elif args.command == "equiv":
            body, status = cmd_equiv(cfg, args.format)
        else:
            body, status = cmd_oracle(cfg, args.format)
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except rates.UniquenessError as exc:
        print(f"property failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except (ConfigError, ValidationError, InfeasibleGridError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.out == "-":
        sys.stdout.write(body)
        if summary:
            sys.stderr.write(summary)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(body)
        sys.stdout.write(summary)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
