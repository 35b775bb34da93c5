"""Automated shaping-filter design: phase-lead targeting and gain transfer.

The first procedure picks a lead/lag-plus-low-pass shaping filter whose
phase at the loop bandwidth buys a requested first-harmonic phase lead
while keeping the off-bandwidth phase inside the admissible bound set. The
second procedure spends a designed phase lead on low-frequency gain by
re-tuning the element's flow pole and reset fraction until the lead is used
up, rescaling the branch gain to hold the high-frequency loop gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .lti import (FrequencyGrid, GainCapResult, RationalTransferFunction,
                  check_gain_cap, eval_response, log_grid, make_shaping_filter,
                  principal_angle)
from .reset import GeneralizedFore, ShapedOpenLoop
from .bounds import BoundViolation, FilterValidationReport, validate_filter
from .hosidf import (BandwidthReport, find_bandwidth, max_phase_lead,
                     open_loop_harmonic, phase_lead)


class InfeasibleTargetError(ValueError):
    """Requested phase lead exceeds the achievable maximum."""

    def __init__(self, target_deg: float, max_deg: float):
        self.target_deg = target_deg
        self.max_deg = max_deg
        super().__init__(
            f"target lead {target_deg:.2f} deg exceeds the achievable maximum "
            f"{max_deg:.2f} deg for this element")


@dataclass(frozen=True)
class DesignResult:
    """Outcome of the phase-lead design iteration."""

    omega_zeta: float
    omega_eta: float
    omega_psi: float
    achieved_lead: float            # radians
    target_lead: float              # radians
    cs_phase_at_bandwidth: float    # radians
    omega_c: float
    iterations: int
    bound_violations: tuple[BoundViolation, ...]
    gain_cap: GainCapResult
    validation: FilterValidationReport

    @property
    def filter(self) -> RationalTransferFunction:
        return make_shaping_filter(self.omega_zeta, self.omega_eta, self.omega_psi)

    @property
    def achieved_lead_deg(self) -> float:
        return math.degrees(self.achieved_lead)


def _solve_cs_target(el: GeneralizedFore, omega_c: float, phi_d: float,
                     tol: float) -> tuple[float, int]:
    """Filter phase at the bandwidth that yields lead ``phi_d`` (radians).

    The lead is zero at a zero filter phase and grows to its supremum inside
    the admissible interval; bisection runs on that rising branch.
    """
    ml = max_phase_lead(el, omega_c)
    if phi_d > ml.lead_sup + 1e-12:
        raise InfeasibleTargetError(math.degrees(phi_d), math.degrees(ml.lead_sup))
    lo, hi = 0.0, ml.cs_angle_at_sup
    iterations = 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        iterations += 1
        if phase_lead(el, mid, omega_c) < phi_d:
            lo = mid
        else:
            hi = mid
        if abs(phase_lead(el, 0.5 * (lo + hi), omega_c) - phi_d) < tol:
            break
    return 0.5 * (lo + hi), iterations


def _filter_phase(omega_zeta: float, omega_eta: float, omega_psi: float,
                  omega: float) -> float:
    return (math.atan(omega / omega_zeta) - math.atan(omega / omega_eta)
            - math.atan(omega / omega_psi))


def design_phase_lead(sys: ShapedOpenLoop, phi_d: float, sigma: float = 0.1,
                      delta_n: float = 1.5,
                      grid: FrequencyGrid | None = None,
                      tol: float = math.radians(0.05)) -> DesignResult:
    """Design a shaping filter giving phase lead ``phi_d`` (radians) at crossover.

    Starts from the assembly without a filter (any present filter is
    ignored), resolves the bandwidth, translates the lead target into a
    filter-phase target there, and then grows the lead ratio
    ``omega_eta/omega_zeta`` geometrically until the target phase is
    reachable, placing ``omega_zeta`` by bisection on the descending branch.
    The low-pass corner sits at ``max(20 * omega_c, 1.33 * omega_eta)`` --
    the most aggressive roll-off that costs under three degrees at the
    crossover. The gain cap and bound set are evaluated on the result and
    reported as data.
    """
    if not phi_d > 0.0:
        raise ValueError("target lead must be positive")
    if sys.reset is None:
        raise ValueError("assembly has no reset element to shape")
    bare = replace(sys, shaping=RationalTransferFunction((1.0,), (1.0,)))
    if grid is None:
        grid = log_grid(1.0, 1000.0)
    report = find_bandwidth(bare, (grid.omegas[0], grid.omegas[-1]))
    omega_c = report.omega_c
    el = sys.reset

    phi_target, iterations = _solve_cs_target(el, omega_c, phi_d, tol=tol / 4.0)

    ratio = 1.1
    result = None
    while ratio < 1e3:
        iterations += 1
        # peak of the lead section alone sits at the geometric mean corner
        omega_zeta_peak = omega_c / math.sqrt(ratio)
        omega_psi_of = lambda oz: max(20.0 * omega_c, 1.33 * ratio * oz)
        peak_phase = _filter_phase(omega_zeta_peak, ratio * omega_zeta_peak,
                                   omega_psi_of(omega_zeta_peak), omega_c)
        if peak_phase >= phi_target + math.radians(0.05):
            # bisect omega_zeta on [peak location, far above] where the
            # crossover phase decreases monotonically
            lo, hi = omega_zeta_peak, 1e6 * omega_c
            for _ in range(200):
                mid = math.sqrt(lo * hi)
                phi_mid = _filter_phase(mid, ratio * mid, omega_psi_of(mid), omega_c)
                if phi_mid > phi_target:
                    lo = mid
                else:
                    hi = mid
            omega_zeta = math.sqrt(lo * hi)
            result = (omega_zeta, ratio * omega_zeta, omega_psi_of(omega_zeta))
            break
        ratio *= 1.15
    if result is None:
        ml = max_phase_lead(el, omega_c)
        raise InfeasibleTargetError(math.degrees(phi_d), math.degrees(ml.lead_sup))

    omega_zeta, omega_eta, omega_psi = result
    cs = make_shaping_filter(omega_zeta, omega_eta, omega_psi)
    shaped = replace(sys, shaping=cs)
    validation = validate_filter(shaped, sigma, grid=grid, delta_n=delta_n)
    phi_c = float(principal_angle(eval_response(cs, validation.bound_set.omega_c)))
    achieved = phase_lead(el, phi_c, validation.bound_set.omega_c)
    return DesignResult(
        omega_zeta=omega_zeta, omega_eta=omega_eta, omega_psi=omega_psi,
        achieved_lead=achieved, target_lead=phi_d, cs_phase_at_bandwidth=phi_c,
        omega_c=validation.bound_set.omega_c, iterations=iterations,
        bound_violations=validation.violations, gain_cap=validation.gain_cap,
        validation=validation,
    )


# ---------------------------------------------------------------------------
# Gain-transfer procedure.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainTransferResult:
    """Outcome of trading phase lead for low-frequency gain."""

    system: ShapedOpenLoop
    start_system: ShapedOpenLoop
    final_lead: float               # radians, at the re-solved bandwidth
    start_lead: float
    bandwidth: BandwidthReport
    start_bandwidth: BandwidthReport
    low_freq_gain_db_delta: float   # mean |L_1| change over the low band
    iterations: int
    changed: bool
    trail: tuple[tuple[float, float, float], ...]  # (omega_alpha, gamma, pre_gain)


def _lead_at_bandwidth(sys: ShapedOpenLoop, bracket) -> tuple[float, BandwidthReport]:
    report = find_bandwidth(sys, bracket)
    phi_c = float(principal_angle(eval_response(sys.shaping, report.omega_c)))
    return phase_lead(sys.reset, phi_c, report.omega_c), report


def design_gain_transfer(sys: ShapedOpenLoop, grid: FrequencyGrid | None = None,
                         lead_tol: float = math.radians(0.05),
                         high_band_tol_db: float = 0.5,
                         line_points: int = 40,
                         max_rounds: int = 12) -> GainTransferResult:
    """Spend the shaped assembly's phase lead on low-frequency gain.

    Coordinate descent over (omega_alpha, gamma) maximizes the mean dB gain
    of ``|L_1|`` over ``[0.05, 0.5] * omega_c`` subject to the lead staying
    nonnegative and the gain above ``2 * omega_c`` staying within
    ``high_band_tol_db`` of the start (enforced by rescaling the branch gain
    at a high-frequency anchor). Stops when the lead is used up (within
    ``lead_tol``) or no coordinate move improves the objective. A start
    without positive lead is returned unchanged.
    """
    if sys.reset is None:
        raise ValueError("assembly has no reset element")
    if grid is None:
        grid = log_grid(1.0, 1000.0)
    bracket = (grid.omegas[0], grid.omegas[-1])
    start_lead, start_report = _lead_at_bandwidth(sys, bracket)
    wc0 = start_report.omega_c
    low_band = np.logspace(math.log10(0.05 * wc0), math.log10(0.5 * wc0), 30)
    high_band = np.logspace(math.log10(2.0 * wc0), math.log10(20.0 * wc0), 30)
    anchor = 4.0 * wc0
    ref_low = 20.0 * np.log10(np.abs(open_loop_harmonic(sys, 1, low_band)))
    ref_high = 20.0 * np.log10(np.abs(open_loop_harmonic(sys, 1, high_band)))
    ref_anchor = abs(open_loop_harmonic(sys, 1, anchor))

    if start_lead <= lead_tol:
        return GainTransferResult(
            system=sys, start_system=sys, final_lead=start_lead,
            start_lead=start_lead, bandwidth=start_report,
            start_bandwidth=start_report, low_freq_gain_db_delta=0.0,
            iterations=0, changed=False,
            trail=((sys.reset.omega_alpha, sys.reset.gamma, sys.pre_gain),))

    def rebuild(omega_alpha: float, gamma: float) -> ShapedOpenLoop | None:
        el0 = sys.reset
        omega_beta = omega_alpha if el0.omega_alpha > 0.0 else el0.omega_beta
        try:
            el = GeneralizedFore(omega_alpha, max(omega_beta, 1e-9), gamma)
        except ValueError:
            return None
        cand = replace(sys, reset=el)
        # re-anchor the branch gain so the high-frequency loop gain holds
        mag = abs(open_loop_harmonic(cand, 1, anchor))
        if mag == 0.0:
            return None
        return replace(cand, pre_gain=sys.pre_gain * ref_anchor / mag)

    def evaluate(cand: ShapedOpenLoop):
        try:
            lead, report = _lead_at_bandwidth(cand, bracket)
        except Exception:
            return None
        if lead < -lead_tol:
            return None
        high = 20.0 * np.log10(np.abs(open_loop_harmonic(cand, 1, high_band)))
        if np.max(np.abs(high - ref_high)) > high_band_tol_db:
            return None
        low = 20.0 * np.log10(np.abs(open_loop_harmonic(cand, 1, low_band)))
        return float(np.mean(low - ref_low)), lead, report

    current = sys
    cur_alpha, cur_gamma = sys.reset.omega_alpha, sys.reset.gamma
    cur_obj, cur_lead, cur_report = 0.0, start_lead, start_report
    trail = [(cur_alpha, cur_gamma, sys.pre_gain)]
    iterations = 0
    for _ in range(max_rounds):
        improved = False
        for coord in ("gamma", "omega_alpha"):
            if cur_lead <= lead_tol:
                break
            if coord == "gamma":
                lo, hi = max(-0.95, cur_gamma - 0.5), min(0.95, cur_gamma + 0.5)
                values = np.linspace(lo, hi, line_points)
                candidates = ((cur_alpha, g) for g in values)
            else:
                if cur_alpha == 0.0:
                    continue  # the Clegg case tunes through gamma only
                lo, hi = cur_alpha / 1.6, cur_alpha * 1.6
                values = np.geomspace(lo, hi, line_points)
                candidates = ((a, cur_gamma) for a in values)
            best = (cur_obj, cur_alpha, cur_gamma, cur_lead, cur_report, current)
            for a, g in candidates:
                iterations += 1
                cand = rebuild(a, g)
                if cand is None:
                    continue
                scored = evaluate(cand)
                if scored is None:
                    continue
                obj, lead, report = scored
                if obj > best[0] + 1e-6:
                    best = (obj, a, g, lead, report, cand)
            if best[0] > cur_obj + 1e-6:
                cur_obj, cur_alpha, cur_gamma, cur_lead, cur_report, current = best
                trail.append((cur_alpha, cur_gamma, current.pre_gain))
                improved = True
        if not improved or cur_lead <= lead_tol:
            break
    return GainTransferResult(
        system=current, start_system=sys, final_lead=cur_lead,
        start_lead=start_lead, bandwidth=cur_report, start_bandwidth=start_report,
        low_freq_gain_db_delta=cur_obj, iterations=iterations,
        changed=current is not sys, trail=tuple(trail))
