"""Admissible phase intervals for the shaping filter and filter validation.

Two families of constraints govern the filter phase. At the loop bandwidth
the phase must lie inside an open interval that guarantees first-harmonic
phase lead; away from the bandwidth it must keep the gain-variation factor

    kappa_alpha(w) = |cos(phi) + sin(phi) * w_alpha / w|

inside ``(1 - sigma, 1 + sigma)`` so the harmonic magnitudes stay close to
the unshaped element's. The admissible angle sets are unions of arccos
intervals: three (eta) for the Clegg case and four (beta) when the flow pole
is nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lti import (FrequencyGrid, GainCapResult, RationalTransferFunction,
                  check_gain_cap, eval_response, log_grid, principal_angle)
from .reset import GeneralizedFore, ShapedOpenLoop
from .hosidf import find_bandwidth, max_shaping_phase

TWO_PI = 2.0 * math.pi


def _principal(angle: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


@dataclass(frozen=True)
class AngleInterval:
    """Interval of principal angles; bounds in radians, open by default."""

    lower: float
    upper: float
    closed_lower: bool = False
    closed_upper: bool = False
    saturated: bool = False

    def contains(self, angle: float) -> bool:
        lo_ok = angle >= self.lower if self.closed_lower else angle > self.lower
        hi_ok = angle <= self.upper if self.closed_upper else angle < self.upper
        return lo_ok and hi_ok

    @property
    def is_empty(self) -> bool:
        if self.lower < self.upper:
            return False
        return not (self.lower == self.upper and self.closed_lower and self.closed_upper)

    def degrees(self) -> tuple[float, float]:
        return math.degrees(self.lower), math.degrees(self.upper)


def _split_principal(lower: float, upper: float, saturated: bool = False) -> list[AngleInterval]:
    """Map an open interval onto (-pi, pi], splitting if it straddles +pi."""
    if upper <= lower:
        return []
    width = upper - lower
    if width >= TWO_PI:
        return [AngleInterval(-math.pi, math.pi, False, True, saturated)]
    lo = _principal(lower)
    hi = lo + width
    if hi <= math.pi:
        return [AngleInterval(lo, hi, saturated=saturated)]
    return [
        AngleInterval(lo, math.pi, closed_upper=True, saturated=saturated),
        AngleInterval(-math.pi, hi - TWO_PI, closed_lower=True, saturated=saturated),
    ]


def lemma1_interval(el: GeneralizedFore, omega_c: float) -> tuple[AngleInterval, AngleInterval]:
    """Admissible filter phase at the bandwidth: the k = -1 and k = 0 branches.

    Each branch is the open interval ``(k pi, k pi + upper)`` with ``upper``
    the closed-form endpoint of :func:`~reset_loopshaper.hosidf.max_shaping_phase`.
    """
    upper = max_shaping_phase(el, omega_c)
    return (
        AngleInterval(-math.pi, -math.pi + upper),
        AngleInterval(0.0, upper),
    )


def theorem1_bounds(sigma: float) -> tuple[AngleInterval, AngleInterval, AngleInterval]:
    """Off-bandwidth admissible phase set for the Clegg case: eta1, eta2, eta3.

    eta1 = (-arccos(1-sigma), arccos(1-sigma)),
    eta2 = (arccos(-1+sigma), pi], eta3 = [-pi, -arccos(-1+sigma)).
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma must lie in (0, 1)")
    a1 = math.acos(1.0 - sigma)
    a2 = math.acos(-1.0 + sigma)
    return (
        AngleInterval(-a1, a1),
        AngleInterval(a2, math.pi, closed_upper=True),
        AngleInterval(-math.pi, -a2, closed_lower=True),
    )


@dataclass(frozen=True)
class BetaBounds:
    """Off-bandwidth admissible set for a nonzero flow pole at one frequency.

    ``intervals`` lists the principal-value pieces of beta1..beta4 in that
    order (an interval that straddles +pi contributes two pieces).
    ``saturated`` records that the upper arccos argument exceeded 1 -- the
    gain factor cannot reach ``1 + sigma`` there, so that endpoint collapses
    onto the center angle ``arctan(w_alpha / w)`` instead of erroring.
    """

    intervals: tuple[AngleInterval, ...]
    theta_alpha: float
    saturated: bool = False
    empty: bool = False

    def contains(self, angle: float) -> bool:
        return any(iv.contains(angle) for iv in self.intervals)


def theorem2_bounds(el: GeneralizedFore, sigma: float, omega: float) -> BetaBounds:
    """beta1..beta4 intervals at ``omega`` for an element with ``w_alpha > 0``.

    With ``t_a = w_alpha / w``, ``c = arctan(t_a)`` and
    ``t_g = (1-sigma)/sqrt(1+t_a^2)``, ``t_e = (1+sigma)/sqrt(1+t_a^2)``:

        beta1 = (c - arccos(t_g), c - arccos(t_e))
        beta2 = (c - arccos(-t_e), c - arccos(-t_g))
        beta3 = beta1 + pi, beta4 = beta2 + pi

    reduced to principal values. ``arccos`` arguments above 1 saturate the
    corresponding endpoint at ``c`` (flagged); an out-of-range lower argument
    would make the set empty and is flagged likewise.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma must lie in (0, 1)")
    if not omega > 0.0:
        raise ValueError("omega must be > 0")
    if el.omega_alpha <= 0.0:
        raise ValueError("theorem2_bounds requires omega_alpha > 0")
    t_a = el.omega_alpha / omega
    c = math.atan(t_a)
    scale = math.sqrt(1.0 + t_a * t_a)
    t_gamma = (1.0 - sigma) / scale
    t_eta = (1.0 + sigma) / scale
    if t_gamma > 1.0:
        # Unreachable for sigma in (0,1); kept as a defensive flag.
        return BetaBounds(intervals=(), theta_alpha=t_a, saturated=False, empty=True)
    a_gamma = math.acos(t_gamma)
    saturated = t_eta > 1.0
    a_eta = 0.0 if saturated else math.acos(t_eta)
    pieces: list[AngleInterval] = []
    pieces += _split_principal(c - a_gamma, c - a_eta, saturated)            # beta1
    pieces += _split_principal(c - (math.pi - a_eta), c - (math.pi - a_gamma),
                               saturated)                                    # beta2
    pieces += _split_principal(c + (math.pi - a_gamma), c + (math.pi - a_eta),
                               saturated)                                    # beta3
    pieces += _split_principal(c + a_eta, c + a_gamma, saturated)            # beta4
    return BetaBounds(intervals=tuple(pieces), theta_alpha=t_a, saturated=saturated)


def kappa_alpha(el: GeneralizedFore, cs_phase: float, omega: float) -> float:
    """Gain-variation factor ``|cos(phi) + sin(phi) * w_alpha / w|``."""
    if not omega > 0.0:
        raise ValueError("omega must be > 0")
    phi = float(cs_phase)
    return abs(math.cos(phi) + math.sin(phi) * el.omega_alpha / omega)


def kappa_alpha_rewritten(el: GeneralizedFore, cs_phase: float, omega: float) -> float:
    """Equivalent form ``sqrt(1 + t_a^2) |cos(phi - arctan(t_a))|``."""
    if not omega > 0.0:
        raise ValueError("omega must be > 0")
    t_a = el.omega_alpha / omega
    return math.sqrt(1.0 + t_a * t_a) * abs(math.cos(float(cs_phase) - math.atan(t_a)))


def offband_admissible(el: GeneralizedFore, sigma: float, cs_phase: float,
                       omega: float) -> bool:
    """Membership of a principal angle in the off-bandwidth admissible set."""
    angle = _principal(float(cs_phase))
    if el.omega_alpha == 0.0:
        return any(iv.contains(angle) for iv in theorem1_bounds(sigma))
    return theorem2_bounds(el, sigma, omega).contains(angle)


# ---------------------------------------------------------------------------
# Whole-filter validation against the bound set.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundViolation:
    omega: float
    cs_phase: float
    nearest_interval: tuple[float, float] | None


@dataclass(frozen=True)
class PhaseBoundSet:
    """Bound data for one assembly: bandwidth interval plus off-band sets."""

    element: GeneralizedFore
    omega_c: float
    sigma: float
    at_bandwidth: tuple[AngleInterval, AngleInterval]

    def offband(self, omega: float):
        if self.element.omega_alpha == 0.0:
            return theorem1_bounds(self.sigma)
        return theorem2_bounds(self.element, self.sigma, omega).intervals


@dataclass(frozen=True)
class FilterValidationReport:
    bound_set: PhaseBoundSet
    grid: FrequencyGrid
    cs_phase: np.ndarray
    admissible: np.ndarray
    bandwidth_phase: float
    bandwidth_ok: bool
    gain_cap: GainCapResult
    violations: tuple[BoundViolation, ...]

    @property
    def passed(self) -> bool:
        return self.bandwidth_ok and not self.violations and self.gain_cap.passed


def _nearest_interval(intervals, angle: float):
    best = None
    best_dist = math.inf
    for iv in intervals:
        if iv.is_empty:
            continue
        dist = 0.0 if iv.contains(angle) else min(abs(angle - iv.lower), abs(angle - iv.upper))
        if dist < best_dist:
            best, best_dist = iv, dist
    return None if best is None else best.degrees()


def validate_filter(sys: ShapedOpenLoop, sigma: float,
                    grid: FrequencyGrid | None = None,
                    delta_n: float = 1.5,
                    bracket: tuple[float, float] | None = None) -> FilterValidationReport:
    """Check a candidate shaping filter against every bound.

    Resolves the loop bandwidth first, then tests the filter phase at the
    bandwidth against the lead interval and at every other grid point against
    the off-bandwidth set, and finally runs the high-frequency gain cap.
    Violations are reported as data; only a missing bandwidth raises.
    """
    if sys.reset is None:
        raise ValueError("assembly has no reset element to shape")
    if grid is None:
        grid = log_grid(1.0, 1000.0)
    if bracket is None:
        bracket = (grid.omegas[0], grid.omegas[-1])
    report = find_bandwidth(sys, bracket)
    omega_c = report.omega_c
    el = sys.reset
    bound_set = PhaseBoundSet(element=el, omega_c=omega_c, sigma=sigma,
                              at_bandwidth=lemma1_interval(el, omega_c))
    phases = principal_angle(eval_response(sys.shaping, grid.omegas))
    admissible = np.empty(len(grid), dtype=bool)
    violations: list[BoundViolation] = []
    for i, (w, phi) in enumerate(zip(grid.omegas, phases)):
        if w == omega_c:
            ok = any(iv.contains(phi) for iv in bound_set.at_bandwidth)
            intervals = bound_set.at_bandwidth
        else:
            ok = offband_admissible(el, sigma, phi, w)
            intervals = bound_set.offband(w)
        admissible[i] = ok
        if not ok:
            violations.append(BoundViolation(float(w), float(phi),
                                             _nearest_interval(intervals, _principal(phi))))
    phi_c = float(principal_angle(eval_response(sys.shaping, omega_c)))
    bandwidth_ok = any(iv.contains(phi_c) for iv in bound_set.at_bandwidth)
    cap = check_gain_cap(sys.shaping, omega_c, delta_n)
    return FilterValidationReport(
        bound_set=bound_set, grid=grid, cs_phase=phases, admissible=admissible,
        bandwidth_phase=phi_c, bandwidth_ok=bandwidth_ok, gain_cap=cap,
        violations=tuple(violations),
    )
