"""Assembly construction, batch analysis, and CSV/JSON emission.

Bridges the configuration layer to the analysis and simulation cores:
builds :class:`~reset_loopshaper.reset.ShapedOpenLoop` objects from parsed
configs, sweeps harmonic responses into tabular form, and runs the two
bundled case studies end to end. The ``RESET_LOOPSHAPER_THREADS``
environment variable caps the worker count used when a case study fans out
its independent simulations.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lti import (FrequencyGrid, RationalTransferFunction, log_grid, make_gain,
                  make_lead, make_lowpass, make_pid, make_pi2d,
                  make_shaping_filter, principal_angle, series)
from .reset import GeneralizedFore, ShapedOpenLoop
from .hosidf import BandwidthReport, find_bandwidth, open_loop_harmonic
from .bounds import FilterValidationReport, validate_filter
from .config import WorkbenchConfig
from .presets import PRESET_NAMES, case_study_preset
from .signals import Signal, preset_d1, preset_d2, preset_r2, sinusoid, step, zero
from .sim import (LoopConfig, SimTrace, TransientMetrics, simulate,
                  steady_state_error, step_metrics)

UNITY = RationalTransferFunction((1.0,), (1.0,))

# published reference improvements (percent) the case-2 summary is laid out
# against: tracking at 3/5/10/30/200 Hz, then the d1 and r2+d2 scenarios
CASE2_REFERENCE_IMPROVEMENT = {
    "3": 41.3, "5": 40.0, "10": 30.6, "30": 25.0, "200": 0.0,
    "d1": 40.0, "r2+d2": 37.5,
}


def build_plant(cfg: WorkbenchConfig) -> RationalTransferFunction:
    num, den = cfg.plant.coefficients()
    return RationalTransferFunction(num, den)


def build_system(cfg: WorkbenchConfig) -> ShapedOpenLoop:
    """Controller assembly described by a workbench config."""
    plant = build_plant(cfg)
    pid = cfg.pid
    shaping = UNITY
    if cfg.shaping is not None:
        shaping = make_shaping_filter(cfg.shaping.omega_zeta, cfg.shaping.omega_eta,
                                      cfg.shaping.omega_psi)
    if cfg.kind == "pid":
        c_alpha = series(make_pid(pid["k_p"], pid["omega_i"], pid["omega_d"],
                                  pid["omega_t"]), make_lowpass(pid["omega_f"]))
        return ShapedOpenLoop(reset=None, c_alpha=c_alpha, shaping=shaping, plant=plant)
    if cfg.kind == "pi2d":
        c_alpha = make_pi2d(pid["k_p"], pid["omega_i"], pid["omega_d"],
                            pid["omega_t"], pid["omega_f"])
        return ShapedOpenLoop(reset=None, c_alpha=c_alpha, shaping=shaping, plant=plant)
    rs = cfg.reset
    if cfg.kind == "pci_pid":
        element = GeneralizedFore.clegg(rs.gamma)
        branch_zero = RationalTransferFunction((rs.omega_r, 1.0), (1.0,))
        c_alpha = series(branch_zero,
                         make_pid(pid["k_p"], pid["omega_i"], pid["omega_d"],
                                  pid["omega_t"]),
                         make_lowpass(pid["omega_f"]))
        return ShapedOpenLoop(reset=element, c_alpha=c_alpha, shaping=shaping,
                              plant=plant, pre_gain=rs.k_r)
    if cfg.kind == "cglp_pid":
        element = GeneralizedFore.fore(rs.omega_r, rs.gamma)
        c_alpha = series(make_lead(rs.omega_dr, rs.omega_tr),
                         make_pid(pid["k_p"], pid["omega_i"], pid["omega_d"],
                                  pid["omega_t"]),
                         make_lowpass(pid["omega_f"]))
        return ShapedOpenLoop(reset=element, c_alpha=c_alpha, shaping=shaping,
                              plant=plant, pre_gain=rs.k_r)
    raise ValueError(f"unknown assembly kind {cfg.kind!r}")


def analysis_grid(cfg: WorkbenchConfig) -> FrequencyGrid:
    a = cfg.analysis
    return log_grid(a.f_min_hz, a.f_max_hz, a.points_per_decade)


def build_loop(cfg: WorkbenchConfig, reference: Signal = None,
               disturbance: Signal = None, noise: Signal = None,
               duration: float | None = None) -> LoopConfig:
    sim = cfg.simulation
    return LoopConfig(
        system=build_system(cfg),
        reference=reference or zero(),
        disturbance=disturbance or zero(),
        noise=noise or zero(),
        sample_step=sim.sample_step,
        duration=duration if duration is not None else sim.duration,
        quantizer_resolution=sim.quantizer,
        input_saturation=sim.saturation,
        store_every=sim.store_every,
    )


def max_workers() -> int:
    cap = os.environ.get("RESET_LOOPSHAPER_THREADS")
    if cap:
        try:
            return max(1, int(cap))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Tabular emission.
# ---------------------------------------------------------------------------

@dataclass
class BodeTable:
    grid: FrequencyGrid
    orders: tuple[int, ...]
    magnitude_db: dict[int, np.ndarray]
    phase_deg: dict[int, np.ndarray]
    bandwidth: BandwidthReport


def bode_table(sys: ShapedOpenLoop, grid: FrequencyGrid, orders=(1, 3)) -> BodeTable:
    mags, phases = {}, {}
    for n in orders:
        vals = open_loop_harmonic(sys, int(n), grid.omegas)
        with np.errstate(divide="ignore"):
            mags[int(n)] = 20.0 * np.log10(np.abs(vals))
        phases[int(n)] = np.degrees(principal_angle(vals))
    bw = find_bandwidth(sys, (grid.omegas[0], grid.omegas[-1]))
    return BodeTable(grid=grid, orders=tuple(int(n) for n in orders),
                     magnitude_db=mags, phase_deg=phases, bandwidth=bw)


def _open_csv(path):
    return open(path, "w", encoding="utf-8", newline="\n")


def write_bode_csv(table: BodeTable, path) -> None:
    with _open_csv(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["freq_hz"]
        for n in table.orders:
            header += [f"mag_db_n{n}", f"phase_deg_n{n}"]
        writer.writerow(header)
        for i, f in enumerate(table.grid.hertz):
            row = [f"{f:.10g}"]
            for n in table.orders:
                row += [f"{table.magnitude_db[n][i]:.10g}",
                        f"{table.phase_deg[n][i]:.10g}"]
            writer.writerow(row)


def bandwidth_json(report: BandwidthReport) -> dict:
    return {
        "omega_c_rad_s": report.omega_c,
        "bandwidth_hz": report.hz,
        "phase_margin_deg": report.phase_margin_deg,
        "gain_db_at_crossover": report.gain_db_at_crossover,
        "multiple_crossings": report.multiple_crossings,
    }


def write_bounds_csv(report: FilterValidationReport, path) -> None:
    """Per-frequency interval endpoints, candidate phase, pass/fail."""
    max_intervals = 4
    with _open_csv(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["freq_hz", "cs_phase_deg", "admissible"]
        for i in range(1, max_intervals + 1):
            header += [f"interval{i}_lo_deg", f"interval{i}_hi_deg"]
        writer.writerow(header)
        for i, w in enumerate(report.grid.omegas):
            intervals = report.bound_set.offband(w)
            row = [f"{w / (2 * math.pi):.10g}",
                   f"{math.degrees(report.cs_phase[i]):.10g}",
                   str(int(report.admissible[i]))]
            for j in range(max_intervals):
                if j < len(intervals) and not intervals[j].is_empty:
                    lo, hi = intervals[j].degrees()
                    row += [f"{lo:.6g}", f"{hi:.6g}"]
                else:
                    row += ["", ""]
            writer.writerow(row)


def bounds_summary_json(report: FilterValidationReport) -> dict:
    lo, hi = report.bound_set.at_bandwidth[1].degrees()
    return {
        "omega_c_rad_s": report.bound_set.omega_c,
        "bandwidth_hz": report.bound_set.omega_c / (2 * math.pi),
        "sigma": report.bound_set.sigma,
        "cs_phase_at_bandwidth_deg": math.degrees(report.bandwidth_phase),
        "bandwidth_interval_deg": [lo, hi],
        "bandwidth_ok": report.bandwidth_ok,
        "gain_cap": {
            "passed": report.gain_cap.passed,
            "delta_n": report.gain_cap.delta_n,
            "worst_freq_hz": report.gain_cap.worst_omega / (2 * math.pi),
            "worst_magnitude": report.gain_cap.worst_magnitude,
        },
        "violations": [
            {"freq_hz": v.omega / (2 * math.pi),
             "cs_phase_deg": math.degrees(v.cs_phase),
             "nearest_interval_deg": v.nearest_interval}
            for v in report.violations
        ],
        "passed": report.passed,
    }


def write_trace_csv(trace: SimTrace, path) -> None:
    marks = trace.reset_marks()
    with _open_csv(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "r", "e", "es", "v", "u", "y", "reset"])
        for i in range(len(trace.time)):
            writer.writerow([
                f"{trace.time[i]:.10g}", f"{trace.r[i]:.10g}", f"{trace.e[i]:.10g}",
                f"{trace.es[i]:.10g}", f"{trace.v[i]:.10g}", f"{trace.u[i]:.10g}",
                f"{trace.y[i]:.10g}", str(int(marks[i]))])


def metrics_json(metrics: TransientMetrics | None, einf: float | None) -> dict:
    out: dict = {}
    if metrics is not None:
        out["transient"] = {
            "overshoot_pct": metrics.overshoot_pct,
            "settling_time_s": metrics.settling_time,
            "steady_state_error_inf": metrics.steady_state_error_inf,
            "settled": metrics.settled,
        }
    if einf is not None:
        out["steady_state_error_inf"] = einf
    return out


# ---------------------------------------------------------------------------
# Case-study pipelines.
# ---------------------------------------------------------------------------

def _run_tracking(cfg: WorkbenchConfig, freq_hz: float, amplitude: float,
                  periods: int = 12, settle: float = 0.6) -> float:
    duration = settle + (periods + 0.5) / freq_hz
    store = 1 if freq_hz >= 50.0 else 2
    loop = build_loop(cfg, reference=sinusoid(amplitude, freq_hz), duration=duration)
    loop.store_every = store
    trace = simulate(loop)
    discard = settle / duration
    return steady_state_error(trace, discard_fraction=discard,
                              fundamental_hz=freq_hz, min_periods=periods)


def _run_scenario(cfg: WorkbenchConfig, reference: Signal, disturbance: Signal,
                  fundamental_hz: float, periods: int = 10,
                  settle: float = 0.6) -> float:
    duration = settle + (periods + 0.5) / fundamental_hz
    loop = build_loop(cfg, reference=reference, disturbance=disturbance,
                      duration=duration)
    loop.store_every = 2
    trace = simulate(loop)
    discard = settle / duration
    return steady_state_error(trace, discard_fraction=discard,
                              fundamental_hz=fundamental_hz, min_periods=periods)


def _run_step(cfg: WorkbenchConfig, amplitude: float = 1e-5,
              duration: float = 1.0) -> TransientMetrics:
    loop = build_loop(cfg, reference=step(0.0, amplitude), duration=duration)
    trace = simulate(loop)
    return step_metrics(trace, amplitude)


def run_case_study(case: str, outdir, tracking_freqs=(3.0, 5.0, 10.0, 30.0, 200.0),
                   amplitude: float = 1e-5) -> dict:
    """Full pipeline for ``case1`` or ``case2``; writes files, returns summary."""
    os.makedirs(outdir, exist_ok=True)
    if case == "case1":
        names = ("case1_pi2d", "case1_pci_pid", "case1_shaped")
    elif case == "case2":
        names = ("case2_pid", "case2_cglp", "case2_shaped_cglp")
    else:
        raise KeyError(f"unknown case study {case!r}; choose case1 or case2")
    configs = {name: case_study_preset(name) for name in names}
    systems = {name: build_system(cfg) for name, cfg in configs.items()}

    summary: dict = {"case": case, "controllers": {},
                     "topology_note": (
                         "pci_pid assemblies use a reconstructed block wiring; "
                         "whole-loop figures inherit that reconstruction")}
    for name, sys_ in systems.items():
        grid = analysis_grid(configs[name])
        orders = (1,) if sys_.reset is None else (1, 3)
        table = bode_table(sys_, grid, orders=orders)
        write_bode_csv(table, os.path.join(outdir, f"bode_{name}.csv"))
        entry = {"bandwidth": bandwidth_json(table.bandwidth)}
        if sys_.reset is not None and configs[name].shaping is not None:
            report = validate_filter(sys_, configs[name].analysis.sigma, grid=grid,
                                     delta_n=configs[name].analysis.delta_n)
            with open(os.path.join(outdir, f"bounds_{name}.json"), "w",
                      encoding="utf-8") as fh:
                json.dump(bounds_summary_json(report), fh, indent=2)
            write_bounds_csv(report, os.path.join(outdir, f"bounds_{name}.csv"))
            entry["bounds_passed"] = report.passed
        summary["controllers"][name] = entry

    workers = max_workers()
    if case == "case1":
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {name: pool.submit(_run_step, configs[name]) for name in names}
            metrics = {name: fut.result() for name, fut in futures.items()}
        overshoots = {name: m.overshoot_pct for name, m in metrics.items()}
        summary["step_overshoot_pct"] = overshoots
        summary["overshoot_ordering_ok"] = (
            overshoots["case1_shaped"] < overshoots["case1_pci_pid"]
            < overshoots["case1_pi2d"])
        summary["shaped_overshoot_below_2pct"] = overshoots["case1_shaped"] < 2.0
        return _write_summary(summary, outdir)

    # case 2: tracking sweep plus the two disturbance scenarios
    jobs = []
    for name in names:
        for f in tracking_freqs:
            jobs.append((name, str(int(f)) if float(f).is_integer() else str(f),
                         "tracking", f))
        jobs.append((name, "d1", "scenario_d1", None))
        jobs.append((name, "r2+d2", "scenario_r2d2", None))

    def run_job(job):
        name, label, kind, freq = job
        if kind == "tracking":
            return _run_tracking(configs[name], freq, amplitude)
        if kind == "scenario_d1":
            return _run_scenario(configs[name], zero(), preset_d1(), 5.0)
        return _run_scenario(configs[name], preset_r2(), preset_d2(), 1.0)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_job, jobs))
    errors: dict[str, dict[str, float]] = {name: {} for name in names}
    for (name, label, _, _), value in zip(jobs, results):
        errors[name][label] = value

    improvements = {}
    orderings = {}
    for label in errors[names[1]]:
        unshaped = errors["case2_cglp"][label]
        shaped = errors["case2_shaped_cglp"][label]
        improvements[label] = 100.0 * (unshaped - shaped) / unshaped
        orderings[label] = shaped < unshaped
    summary["steady_state_error_inf_m"] = errors
    summary["improvement_pct_shaped_vs_cglp"] = improvements
    summary["reference_improvement_pct"] = CASE2_REFERENCE_IMPROVEMENT
    summary["ordering_shaped_better"] = orderings
    return _write_summary(summary, outdir)


def _write_summary(summary: dict, outdir) -> dict:
    with open(os.path.join(outdir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    # flat companion table for spreadsheet use
    rows: list[list[str]] = []
    if "steady_state_error_inf_m" in summary:
        labels = list(next(iter(summary["steady_state_error_inf_m"].values())))
        rows.append(["controller"] + labels)
        for name, vals in summary["steady_state_error_inf_m"].items():
            rows.append([name] + [f"{vals[l]:.6g}" for l in labels])
        rows.append(["improvement_pct"] + [
            f"{summary['improvement_pct_shaped_vs_cglp'][l]:.4g}" for l in labels])
        rows.append(["reference_improvement_pct"] + [
            f"{summary['reference_improvement_pct'][l]:.4g}" for l in labels])
    elif "step_overshoot_pct" in summary:
        rows.append(["controller", "overshoot_pct"])
        for name, val in summary["step_overshoot_pct"].items():
            rows.append([name, f"{val:.6g}"])
    with _open_csv(os.path.join(outdir, "summary.csv")) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)
    return summary
