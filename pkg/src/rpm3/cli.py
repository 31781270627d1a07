"""Command-line entry point: ``rpm3 run|sweep|audit <config> [options]``.

Exit codes: 0 success, 2 invalid configuration, 3 decode corruption,
4 privacy violation.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import sys
from fractions import Fraction
from pathlib import Path

from rpm3.errors import ConfigurationError, CorruptionError, RPM3Error
from rpm3.master import RunMetrics, run_protocol
from rpm3.privacy import audit_run, uniformity_audit
from rpm3.scenario import read_config, scenario_from_dict
from rpm3.simnet import dump_trace

EXIT_OK, EXIT_CONFIG, EXIT_CORRUPT, EXIT_PRIVACY = 0, 2, 3, 4

CSV_COLUMNS = ["scenario", "seed", "n", "z", "m", "k", "c", "N", "epsilon", "rho", "rho_lemma1", "rho_I", "sim_time"]


def _num(x: Fraction | None) -> str:
    return "" if x is None else repr(float(x))


def csv_row(mt: RunMetrics) -> list:
    p = mt.params
    return [mt.scenario, mt.seed, p["n"], p["z"], p["m"], p["k"], mt.clusters, mt.N,
            _num(mt.epsilon), _num(mt.rho), _num(mt.rho_lemma1), _num(mt.rho_I), repr(mt.sim_time)]


def write_csv(path: Path, rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _frac(x: Fraction | None) -> str:
    if x is None:
        return "n/a"
    return f"{x.numerator}/{x.denominator} = {float(x):.6f}"


def summary(mt: RunMetrics) -> str:
    lines = [
        f"scenario     {mt.scenario} (seed {mt.seed})",
        f"decoded      {'C = A B verified' if mt.decoded_ok else 'MISMATCH'}",
        f"responses N  {mt.N}",
        f"rho          {_frac(mt.rho)}",
        f"rho_lemma1   {_frac(mt.rho_lemma1)}{'' if mt.lemma1_proportional else ' (clusters not proportional)'}",
        f"rho_I        {_frac(mt.rho_I)}",
        f"epsilon      {_frac(mt.epsilon)}",
        f"tau_u        {mt.tau}",
        f"sim time     {mt.sim_time:.6g}",
    ]
    for e in mt.interpolations:
        lines.append(f"  round {e['t']} cluster {e['u']}: h interpolated from {e['responses_used']} responses"
                     f" + {e['shared_used']} shared points, {e['d_u']} products")
    return "\n".join(lines)


def cmd_run(config: str, seed: int | None, out: Path, trace: bool) -> int:
    cfg, base = read_config(config)
    sc = scenario_from_dict(cfg, base)
    res = run_protocol(sc, seed, trace=trace)
    mt = res.metrics
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{sc.name}_seed{mt.seed}"
    write_json(out / f"{stem}.json", mt.to_dict())
    write_csv(out / f"{stem}.csv", [csv_row(mt)])
    if trace:
        dump_trace(res.trace, out / f"{stem}_trace.jsonl")
    print(summary(mt))
    return EXIT_OK


def _set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for key in keys[:-1]:
        node = node[int(key)] if isinstance(node, list) else node.setdefault(key, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def sweep_points(cfg: dict) -> list[dict]:
    """Expand ``grid`` (cartesian) and ``points`` (explicit) into override dicts."""
    grid = cfg.get("grid", {})
    keys = sorted(grid)
    combos = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    points = cfg.get("points") or [{}]
    return [{**p, **g} for p in points for g in combos]


def cmd_sweep(config: str, seeds: int | None, out: Path) -> int:
    cfg, base = read_config(config)
    if "base" not in cfg:
        raise ConfigurationError("sweep config needs a 'base' scenario")
    base_cfg = cfg["base"]
    if isinstance(base_cfg, str):
        local = base / base_cfg
        base_cfg, base = read_config(str(local) if local.exists() else base_cfg)
    n_seeds = seeds if seeds is not None else int(cfg.get("seeds", 1))
    overrides = sweep_points(cfg)
    cap = int(cfg.get("max_points", 5000))
    total = len(overrides) * n_seeds
    if total > cap:
        raise ConfigurationError(f"sweep has {total} runs, above the cap of {cap}")
    name = cfg.get("name", "sweep")
    first_seed = int(cfg.get("first_seed", base_cfg.get("seed", 0)))
    rows = []
    for ov in overrides:
        point = copy.deepcopy(base_cfg)
        for key, val in ov.items():
            _set_path(point, key, val)
        point.setdefault("name", name)
        sc = scenario_from_dict(point, base)
        for i in range(n_seeds):
            rows.append(csv_row(run_protocol(sc, first_seed + i).metrics))
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.csv"
    write_csv(path, rows)
    print(f"{len(rows)} runs written to {path}")
    return EXIT_OK


def cmd_audit(config: str, leak: bool, out: Path) -> int:
    cfg, base = read_config(config)
    name = cfg.get("name", "audit")
    uni = cfg.get("uniformity", {"q": 5, "z": 1, "n": 3})
    report = uniformity_audit(int(uni["q"]), int(uni["z"]), int(uni["n"]), leak=leak)
    rec_cfg = cfg.get("recovery")
    recovery = None
    if rec_cfg is not None:
        if isinstance(rec_cfg, str):
            rec_cfg, base = read_config(rec_cfg)
        sc = scenario_from_dict(rec_cfg, base)
        res = run_protocol(sc, record_shares=True)
        recovery = audit_run(res, sc.z)
    ok_uniform = report.max_tv == 0
    ok_recovery = recovery is None or recovery.ok
    out.mkdir(parents=True, exist_ok=True)
    doc = {"name": name, "uniformity": report.to_dict(), "passed": ok_uniform and ok_recovery}
    if recovery is not None:
        doc["recovery"] = {"scenario": sc.name, "z": sc.z, "n": sc.n, "checked": recovery.checked,
                           "failures": recovery.failures, "subsets": recovery.subsets}
    write_json(out / f"{name}{'_leak' if leak else ''}.json", doc)
    print(f"uniformity  q={report.q} z={report.z} d={report.d}: {report.subsets} colluding sets, "
          f"max TV distance {report.max_tv}")
    if recovery is not None:
        print(f"recovery    {recovery.checked} z-subsets checked, {len(recovery.failures)} failures")
    if not (ok_uniform and ok_recovery):
        print("PRIVACY VIOLATION", file=sys.stderr)
        return EXIT_PRIVACY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpm3", description="Rateless private matrix multiplication simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, help_ in (("run", "simulate one scenario"), ("sweep", "run a parameter grid"),
                       ("audit", "run the privacy checks")):
        p = sub.add_parser(cmd, help=help_)
        p.add_argument("config", help="config file path or bundled scenario name")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--seeds", type=int, default=None, help="seeds per sweep point")
        p.add_argument("--trace", action="store_true", help="dump the event trace as JSON lines")
        p.add_argument("--leak", action="store_true", help="audit a deliberately leaky encoding")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.seed, args.out, args.trace)
        if args.command == "sweep":
            return cmd_sweep(args.config, args.seeds, args.out)
        return cmd_audit(args.config, args.leak, args.out)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CorruptionError as exc:
        print(f"decode corruption: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except RPM3Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT


if __name__ == "__main__":
    sys.exit(main())
