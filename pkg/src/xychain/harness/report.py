"""Fit reports over a finished sweep directory (the ``analyze`` subcommand)."""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from ..analysis import (UnfittableError, detect_islands, disorder_average, fit_central_charge,
                        fit_power_law, kz_predictions, locate_onset, order_parameter_fit)
from .config import SCHEMA_VERSION, ExperimentConfig

REFERENCE = {
    "h_c": "2.915 +- 0.001",
    "beta": "0.125 +- 0.002",
    "central_charge": "0.53 +- 0.05",
    "island_size_exponent": "-0.369 (predicted -0.363)",
    "island_amplitude_exponent": "0.092 (predicted 0.089)",
    "disorder_maximum": "about 0.3 at sigma near 0.3",
}


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _attempt(fn):
    try:
        return fn()
    except UnfittableError as exc:
        return {"error": str(exc)}


def staggered_report(config: ExperimentConfig, pairs) -> dict:
    """Onset of the perpendicular order and the order-parameter exponent, per chain length."""
    a = config.analysis
    out = {}
    by_n = defaultdict(list)
    for prof, rec in pairs:
        if rec is not None:
            by_n[prof["n_sites"]].append((prof["sweep_value"], rec.mean_abs_m_perp))
    for n, pts in sorted(by_n.items()):
        pts.sort()
        h = np.array([p[0] for p in pts])
        m = np.array([p[1] for p in pts])
        entry = {"fields": h.tolist(), "mean_abs_m_perp": m.tolist()}
        onset = _attempt(lambda: locate_onset(h, m, a["onset_threshold"]))
        entry["onset"] = onset
        entry["beta_fit"] = _attempt(
            lambda: order_parameter_fit(h, m, a["h_c"], tuple(a["beta_window"])).to_dict())
        entry["beta_fit"]["h_c"] = a["h_c"]
        if isinstance(onset, float):
            fit = _attempt(lambda: order_parameter_fit(h, m, onset, tuple(a["beta_window"])).to_dict())
            fit["h_c"] = onset
            entry["beta_fit_at_onset"] = fit
        out[str(n)] = entry
    return out


def entropy_scaling_report(pairs) -> dict:
    """Central charge from S(N/2) against N (one field value, several chain lengths)
    and from S(N/2) against xi (one chain length, several fields)."""
    out = {}
    by_value = defaultdict(list)
    by_n = defaultdict(list)
    for prof, rec in pairs:
        if rec is None:
            continue
        by_value[prof["sweep_value"]].append((prof["n_sites"], rec.mid_entropy))
        if prof["xi"] is not None and prof["xi"] > 1:
            by_n[prof["n_sites"]].append((prof["xi"], rec.mid_entropy))
    for v, pts in sorted(by_value.items(), key=lambda kv: (kv[0] is None, kv[0])):
        if len({p[0] for p in pts}) >= 4:
            out.setdefault("entropy-vs-n", {})[repr(v)] = _attempt(
                lambda: fit_central_charge(sorted(pts), "entropy-vs-n").to_dict())
    for n, pts in sorted(by_n.items()):
        out.setdefault("entropy-vs-xi", {})[str(n)] = _attempt(
            lambda: fit_central_charge(sorted(pts), "entropy-vs-xi").to_dict())
    return out


def central_island(record, floor):
    """The detected island whose center lies closest to the chain middle."""
    islands = detect_islands(record, floor)
    if not islands:
        return None
    mid = (record.n_sites + 1) / 2
    return min(islands, key=lambda isl: abs(isl.center_index - mid))


def island_report(config: ExperimentConfig, pairs) -> dict:
    """Island size and amplitude against field amplitude, with the KZ predictions."""
    a = config.analysis
    kz = kz_predictions(a["nu"], a["inverse_delta"])
    out = {"kz_predictions": {"nu": kz.nu, "inverse_delta": kz.inverse_delta,
                              "size_exponent": -kz.predicted_size_exponent,
                              "amplitude_exponent": kz.predicted_amplitude_exponent}}
    by_n = defaultdict(list)
    for prof, rec in pairs:
        if rec is None:
            continue
        isl = central_island(rec, a["island_floor"])
        by_n[prof["n_sites"]].append((prof["sweep_value"], isl))
    for n, items in sorted(by_n.items()):
        items.sort(key=lambda t: t[0])
        rows = [{"amplitude": h, "center": isl.center_index, "size": isl.size,
                 "width": isl.width, "peak": isl.amplitude, "sign": isl.sign}
                for h, isl in items if isl is not None]
        h = np.array([r["amplitude"] for r in rows])
        entry = {"islands": rows,
                 "missing": [h0 for h0, isl in items if isl is None]}
        entry["size_fit"] = _attempt(lambda: fit_power_law(h, [r["size"] for r in rows]).to_dict())
        entry["width_fit"] = _attempt(lambda: fit_power_law(h, [r["width"] for r in rows]).to_dict())
        entry["amplitude_fit"] = _attempt(lambda: fit_power_law(h, [r["peak"] for r in rows]).to_dict())
        out[str(n)] = entry
    return out


def ensemble_groups(pairs):
    groups = defaultdict(list)
    for prof, rec in pairs:
        if rec is not None:
            groups[(prof["n_sites"], prof["sweep_value"])].append(rec)
    return groups


def ensemble_report(pairs) -> dict:
    """Disorder averages per (N, sigma) and the location of the maximum."""
    out = {}
    by_n = defaultdict(list)
    for (n, v), recs in sorted(ensemble_groups(pairs).items()):
        avg = disorder_average(recs)
        by_n[n].append((v, avg.summary()))
    for n, items in by_n.items():
        best = max(items, key=lambda t: t[1]["bulk_abs_m_perp"])
        last = items[-1]
        sep = None
        se = math.hypot(best[1]["bulk_abs_m_perp_stderr"], last[1]["bulk_abs_m_perp_stderr"])
        if se > 0:
            sep = (best[1]["bulk_abs_m_perp"] - last[1]["bulk_abs_m_perp"]) / se
        out[str(n)] = {"points": [{"sigma": v, **{k: _clean(x) for k, x in s.items()}} for v, s in items],
                       "argmax_sigma": best[0],
                       "max_bulk_abs_m_perp": best[1]["bulk_abs_m_perp"],
                       "interior_maximum": best[0] not in (items[0][0], items[-1][0]),
                       "separation_from_largest_sigma_in_stderr": _clean(sep)}
    return out


def build_report(config: ExperimentConfig, pairs) -> dict:
    report = {"schema_version": SCHEMA_VERSION, "config_hash": config.physics_hash(),
              "field_kind": config.kind, "reference_values": REFERENCE,
              "failed_runs": [p["run_id"] for p, r in pairs if r is None],
              "unconverged_runs": [p["run_id"] for p, r in pairs
                                   if r is not None and not p["diagnostics"]["converged"]]}
    if config.kind in ("staggered", "uniform"):
        report["order_parameter"] = staggered_report(config, pairs)
    report["entropy_scaling"] = entropy_scaling_report(pairs)
    if config.kind == "sinusoidal":
        report["islands"] = island_report(config, pairs)
    if config.kind == "gaussian":
        report["ensemble"] = ensemble_report(pairs)
    return report
