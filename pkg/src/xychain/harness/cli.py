"""Command-line driver: ``xychain {run,sweep,ensemble,analyze,oracle-check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import SCHEMA_VERSION, ConfigError, build_config, load_config
from .report import build_report, ensemble_groups
from .runner import format_table, load_records, plan_runs, run_sweep


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="TOML experiment configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set model.n_sites=32 (repeatable)")
    p.add_argument("--out", type=Path, help="output directory (default: output.directory)")
    p.add_argument("-v", "--verbose", action="store_true")


def _runner(p: argparse.ArgumentParser):
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--resume", action="store_true", help="reuse finished runs in the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xychain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="ground state for a single parameter point")
    _common(p)
    _runner(p)
    p = sub.add_parser("sweep", help="scan the field amplitude and/or chain length")
    _common(p)
    _runner(p)
    p = sub.add_parser("ensemble", help="seeded disorder ensemble with averaged summary")
    _common(p)
    _runner(p)
    p = sub.add_parser("analyze", help="fit reports for a finished output directory")
    _common(p)
    p = sub.add_parser("oracle-check", help="TEBD against exact diagonalization for N <= 12")
    _common(p)
    p.add_argument("--sizes", type=int, nargs="+", help="chain lengths (default 6 8 10 12)")
    return parser


def _out_dir(args, config) -> Path:
    return args.out if args.out is not None else Path(config.output["directory"])


def cmd_run(args) -> int:
    config = load_config(args.config, args.overrides)
    runs = plan_runs(config)
    if len(runs) != 1:
        raise ConfigError(f"'run' needs a single parameter point, the config describes {len(runs)}; "
                          "use 'sweep' or 'ensemble'")
    return _execute(args, config)


def cmd_sweep(args) -> int:
    return _execute(args, load_config(args.config, args.overrides))


def _execute(args, config) -> int:
    out = _out_dir(args, config)
    rows = run_sweep(config, out, workers=args.workers, resume=args.resume)
    failed = [r["run_id"] for r in rows if r["error"]]
    print(f"{len(rows)} runs written to {out / 'results.csv'}")
    if failed:
        print(f"{len(failed)} runs failed: {', '.join(failed)}")
    return 0


ENSEMBLE_COLUMNS = ("schema_version", "n_sites", "sweep_value", "n_realizations",
                    "bulk_abs_m_perp", "bulk_abs_m_perp_stderr",
                    "bulk_signed_m_perp", "bulk_signed_m_perp_stderr")


def cmd_ensemble(args) -> int:
    config = load_config(args.config, args.overrides)
    if config.kind != "gaussian":
        raise ConfigError("model.field.kind: 'ensemble' needs a gaussian field")
    out = _out_dir(args, config)
    _execute(args, config)
    rows = []
    from ..analysis import disorder_average
    for (n, v), recs in sorted(ensemble_groups(load_records(out)).items()):
        s = disorder_average(recs).summary()
        rows.append({"schema_version": SCHEMA_VERSION, "n_sites": n, "sweep_value": v,
                     "n_realizations": s["n_realizations"],
                     **{k: s[k] for k in ENSEMBLE_COLUMNS[4:]}})
    (out / "ensemble.csv").write_text(format_table(rows, ENSEMBLE_COLUMNS))
    for r in rows:
        print(f"N={r['n_sites']} sigma={r['sweep_value']}: |m_perp| = {r['bulk_abs_m_perp']:.4f} "
              f"+- {r['bulk_abs_m_perp_stderr']:.4f} ({r['n_realizations']} realizations)")
    return 0


def cmd_analyze(args) -> int:
    if args.out is None and args.config is None:
        raise ConfigError("analyze needs --out DIR or --config")
    if args.out is not None:
        out = args.out
        stored = out / "config.json"
        if not stored.exists():
            raise ConfigError(f"{stored} not found; is {out} a sweep output directory?")
        meta = json.loads(stored.read_text())
        if meta.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"{stored}: schema version {meta.get('schema_version')} "
                              f"!= supported {SCHEMA_VERSION}")
        config = build_config(meta["config"], args.overrides)
    else:
        config = load_config(args.config, args.overrides)
        out = _out_dir(args, config)
    if not (out / "results.csv").exists():
        raise ConfigError(f"{out / 'results.csv'} not found")
    report = build_report(config, load_records(out))
    text = json.dumps(report, indent=2, sort_keys=True, default=repr) + "\n"
    (out / "fits.json").write_text(text)
    print(text, end="")
    return 0


def cmd_oracle(args) -> int:
    from .oracle import ORACLE_SIZES, check_case, format_results, oracle_cases
    from .runner import _engine_settings
    # the oracle builds its own fields; the kind only satisfies validation
    raw = {"model": {"field": {"kind": "staggered"}}, "engine": {"max_bond": 32}}
    config = load_config(args.config, args.overrides) if args.config else build_config(raw, args.overrides)
    schedule, policy = _engine_settings(config)
    e = config.engine
    results = []
    for n, spec in oracle_cases(tuple(args.sizes or ORACLE_SIZES)):
        results.append(check_case(n, spec, schedule, policy, float(config.model["axis_angle"]),
                                  float(e["bias_angle"]), int(e["init_seed"])))
        print(format_results(results[-1:]).splitlines()[1], flush=True)
    print(format_results(results))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "oracle.json").write_text(json.dumps(
            {"schema_version": SCHEMA_VERSION, "results": [r.to_dict() for r in results]},
            indent=2) + "\n")
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "ensemble": cmd_ensemble,
            "analyze": cmd_analyze, "oracle-check": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
