"""Sweep execution: plan runs, farm them out, write deterministic tables.

Every run writes ``profiles/<id>.json`` as soon as it finishes (atomically),
so an interrupted sweep restarted with ``resume=True`` recomputes only the
missing runs.  ``results.csv`` is always rebuilt from the profile files,
sorted by ``(n_sites, sweep_value, seed)``, which makes it independent of
worker count and completion order.  Wall times go to ``timings.csv``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from threadpoolctl import threadpool_limits

from ..analysis import ObservableRecord, UnfittableError, correlation_length, measure_record
from ..model import SpinChainModel
from ..mps import MatrixProductState, TruncationPolicy
from ..tebd import (EvolutionSchedule, RunDiagnostics, Stage, ground_state_search, initial_state,
                    load_checkpoint, save_checkpoint)
from .config import SCHEMA_VERSION, ExperimentConfig, build_config

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("schema_version", "run_id", "n_sites", "sweep_value", "seed", "energy",
                  "mean_m_parallel", "mean_m_perp", "mean_abs_m_perp", "mid_entropy", "xi",
                  "converged", "discarded_weight", "sweeps_used", "max_bond_reached",
                  "truncation_alarm", "error")


@dataclass(frozen=True)
class RunSpec:
    run_id: str
    n_sites: int
    sweep_index: int
    sweep_value: float | None
    seed_index: int
    seed: int

    def sort_key(self):
        v = -math.inf if self.sweep_value is None else self.sweep_value
        return (self.n_sites, v, self.seed)


def plan_runs(config: ExperimentConfig) -> list[RunSpec]:
    runs = []
    seeds = config.field_seeds()
    values = config.sweep_values()
    for n in config.chain_lengths():
        for vi, v in enumerate(values):
            for si, s in enumerate(seeds):
                runs.append(RunSpec(f"N{n}-p{vi:03d}-r{si:03d}", n, vi,
                                    None if v is None else float(v), si, s))
    return sorted(runs, key=RunSpec.sort_key)


def _engine_settings(config: ExperimentConfig):
    e = config.engine
    schedule = EvolutionSchedule(tuple(Stage(float(dt), int(n), float(tol)) for dt, n, tol in e["stages"]),
                                 check_every=e["check_every"])
    policy = TruncationPolicy(max_bond=e["max_bond"], cutoff=float(e["cutoff"]),
                              keep_degenerate=e["keep_degenerate"])
    return schedule, policy


def model_for(config: ExperimentConfig, run: RunSpec) -> SpinChainModel:
    spec = config.field_spec(run.sweep_value, run.seed)
    return SpinChainModel.from_spec(spec, run.n_sites, float(config.model["axis_angle"]))


def execute_run(config: ExperimentConfig, run: RunSpec, init: MatrixProductState | None = None):
    """One ground-state search plus measurements.

    Returns ``(profile, state)``; failures are captured in ``profile["error"]``.
    """
    start = time.perf_counter()
    profile = {"schema_version": SCHEMA_VERSION, "config_hash": config.physics_hash(),
               "run_id": run.run_id, "n_sites": run.n_sites, "sweep_value": run.sweep_value,
               "seed": run.seed, "record": None, "diagnostics": None, "xi": None, "error": ""}
    state = None
    try:
        with threadpool_limits(limits=1):
            model = model_for(config, run)
            schedule, policy = _engine_settings(config)
            e = config.engine
            if init is None:
                init = initial_state(model, float(e["bias_angle"]), int(e["init_seed"]))
            state, diag = ground_state_search(model, schedule, policy, init,
                                              alarm_threshold=float(e["alarm_threshold"]))
            record = measure_record(state, model, config.analysis["boundary_exclusion"],
                                    energy=diag.final_energy)
            if config.analysis["correlation_length"]:
                try:
                    profile["xi"] = correlation_length(state, model.axis_angle)
                except UnfittableError:
                    profile["xi"] = None
        profile["record"] = record.to_dict()
        profile["diagnostics"] = diag.to_dict()
    except Exception as exc:  # recorded in the row, never aborts a sweep
        log.exception("run %s failed", run.run_id)
        profile["error"] = f"{type(exc).__name__}: {exc}"
        state = None
    profile["wall_time"] = time.perf_counter() - start
    return profile, state


def _run_chain(config: ExperimentConfig, runs, states_dir=None, init_path=None):
    """Execute runs in order, warm-starting each from the previous one when configured.

    ``init_path`` names a state checkpoint that seeds the first run of a
    resumed warm-start chain.
    """
    warm = config.engine["warm_start"]
    prev = load_checkpoint(init_path)[0] if init_path is not None else None
    out = []
    for run in runs:
        profile, state = execute_run(config, run, prev if warm else None)
        if states_dir is not None and state is not None:
            save_checkpoint(Path(states_dir) / f"{run.run_id}.npz", state,
                            RunDiagnostics(**profile["diagnostics"]), model_for(config, run))
        out.append(profile)
        prev = state
    return out


def _chain_task(config_data, base_dir, runs, states_dir, init_path):
    """Process-pool entry point."""
    return _run_chain(build_config(config_data, base_dir=base_dir), runs, states_dir, init_path)


def _write_atomic(path: Path, text: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def result_row(profile: dict) -> dict:
    """Flatten a profile into a ResultRow."""
    row = {k: None for k in RESULT_COLUMNS}
    row.update(schema_version=profile["schema_version"], run_id=profile["run_id"],
               n_sites=profile["n_sites"], sweep_value=profile["sweep_value"],
               seed=profile["seed"], error=profile["error"], xi=profile["xi"])
    if profile["record"] is not None:
        rec = ObservableRecord.from_dict(profile["record"])
        diag = profile["diagnostics"]
        row.update(energy=float(rec.energy), mean_m_parallel=rec.mean_m_parallel,
                   mean_m_perp=rec.mean_m_perp, mean_abs_m_perp=rec.mean_abs_m_perp,
                   mid_entropy=rec.mid_entropy, converged=bool(diag["converged"]),
                   discarded_weight=float(diag["total_discarded_weight"]),
                   sweeps_used=int(diag["sweeps_used"]),
                   max_bond_reached=int(diag["max_bond_reached"]),
                   truncation_alarm=bool(diag["truncation_alarm"]))
    return row


def format_table(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def read_results(path) -> list[dict]:
    """Parse ``results.csv`` back into typed rows."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "schema_version" not in reader.fieldnames:
            raise ValueError(f"{path}: not a results table")
        rows = []
        for raw in reader:
            if int(raw["schema_version"]) != SCHEMA_VERSION:
                raise ValueError(f"{path}: schema version {raw['schema_version']} "
                                 f"!= supported {SCHEMA_VERSION}")
            row = {}
            for k, v in raw.items():
                if v == "":
                    row[k] = None
                elif k in ("run_id", "error"):
                    row[k] = v
                elif k in ("converged", "truncation_alarm"):
                    row[k] = v == "true"
                elif k in ("schema_version", "n_sites", "seed", "sweeps_used", "max_bond_reached"):
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows


def load_profile(path) -> dict:
    with open(path) as fh:
        profile = json.load(fh)
    if profile.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: schema version {profile.get('schema_version')} "
                         f"!= supported {SCHEMA_VERSION}")
    return profile


def run_sweep(config: ExperimentConfig, out_dir=None, workers: int = 1, resume: bool = False,
              runs: list[RunSpec] | None = None) -> list[dict]:
    """Execute all planned runs and write the output directory; returns the rows."""
    out = Path(out_dir if out_dir is not None else config.output["directory"])
    profiles_dir = out / "profiles"
    profiles_dir.mkdir(parents=True, exist_ok=True)
    warm = config.engine["warm_start"]
    states_dir = None
    if config.output["save_states"] or warm:
        states_dir = out / "states"
        states_dir.mkdir(exist_ok=True)
    _write_atomic(out / "config.json", json.dumps(
        {"schema_version": SCHEMA_VERSION, "config_hash": config.physics_hash(),
         "config": config.to_dict()}, indent=2, sort_keys=True, default=repr) + "\n")

    runs = plan_runs(config) if runs is None else runs
    chash = config.physics_hash()
    done = {}
    if resume:
        for run in runs:
            p = profiles_dir / f"{run.run_id}.json"
            if p.exists():
                try:
                    prof = load_profile(p)
                except (ValueError, json.JSONDecodeError):
                    continue
                if prof.get("config_hash") == chash:
                    done[run.run_id] = prof

    if warm:
        chains = {}
        for run in runs:
            chains.setdefault((run.n_sites, run.seed), []).append(run)
        tasks = []
        for chain in chains.values():
            chain = sorted(chain, key=RunSpec.sort_key)
            # resume a chain after its last finished run whose state was kept
            k = 0
            while k < len(chain) and chain[k].run_id in done and \
                    (states_dir / f"{chain[k].run_id}.npz").exists():
                k += 1
            for r in chain[k:]:
                done.pop(r.run_id, None)
            if k < len(chain):
                tasks.append((chain[k:], states_dir / f"{chain[k - 1].run_id}.npz" if k else None))
    else:
        tasks = [([r], None) for r in runs if r.run_id not in done]

    def record(profiles):
        for prof in profiles:
            _write_atomic(profiles_dir / f"{prof['run_id']}.json",
                          json.dumps(prof, sort_keys=True) + "\n")
            done[prof["run_id"]] = prof
            log.info("finished %s (%.1f s)%s", prof["run_id"], prof["wall_time"],
                     f" error: {prof['error']}" if prof["error"] else "")

    if workers <= 1 or len(tasks) <= 1:
        for chain, init_path in tasks:
            record(_run_chain(config, chain, states_dir, init_path))
    else:
        data = config.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_chain_task, data, str(config.base_dir), chain,
                                   None if states_dir is None else str(states_dir), init_path)
                       for chain, init_path in tasks]
            for fut in as_completed(futures):
                record(fut.result())

    profiles = [done[r.run_id] for r in sorted(runs, key=RunSpec.sort_key)]
    rows = [result_row(p) for p in profiles]
    _write_atomic(out / "results.csv", format_table(rows, RESULT_COLUMNS))
    _write_atomic(out / "timings.csv", format_table(
        [{"run_id": p["run_id"], "wall_time": p["wall_time"]} for p in profiles],
        ("run_id", "wall_time")))
    return rows


def load_records(out_dir) -> list[tuple[dict, ObservableRecord | None]]:
    """All (profile, record) pairs of an output directory, in table order."""
    out = Path(out_dir)
    rows = read_results(out / "results.csv")
    pairs = []
    for row in rows:
        prof = load_profile(out / "profiles" / f"{row['run_id']}.json")
        rec = None if prof["record"] is None else ObservableRecord.from_dict(prof["record"])
        pairs.append((prof, rec))
    return pairs
