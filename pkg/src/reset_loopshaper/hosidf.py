"""Higher-order sinusoidal-input describing functions of the shaped element.

For a generalized first-order reset element driven by ``e = |E| sin(w t)``
with trigger ``e_s`` phase-shifted by the shaping filter, the n-th harmonic
gain is

    C_1(w)      = (Psi(w) + 1) * w_beta / (w_alpha + j w)
    C_n(w)      = Psi(w) * w_beta / (w_alpha + j n w) * exp(j (n-1) phi),  odd n > 1
    C_n(w)      = 0,                                                      even n

with intermediates

    Lambda(w) = w^2 + w_alpha^2
    Theta(w)  = exp(-pi w_alpha / w)
    Omega(w)  = (1 - gamma) (1 + Theta) / (1 + gamma Theta)
    alpha(w)  = exp(j phi) [w cos(phi) + w_alpha sin(phi)]
    Psi(w)    = 2 j w Omega alpha / (pi Lambda)

where ``phi`` is the principal phase of the shaping filter at ``w``. Only
that phase enters; the filter magnitude never does, and shifting ``phi`` by
any multiple of pi leaves every harmonic unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lti import FrequencyGrid, eval_response, principal_angle
from .reset import GeneralizedFore, ShapedOpenLoop


@dataclass(frozen=True)
class HosidfIntermediates:
    """Per-frequency intermediates of the harmonic formula (see module docs)."""

    lam: np.ndarray
    theta: np.ndarray
    omega_factor: np.ndarray
    alpha: np.ndarray
    psi: np.ndarray


def hosidf_intermediates(el: GeneralizedFore, cs_phase, omega) -> HosidfIntermediates:
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("omega must be > 0")
    phi = np.asarray(cs_phase, dtype=float)
    lam = w ** 2 + el.omega_alpha ** 2
    theta = np.exp(-np.pi * el.omega_alpha / w)
    om = (1.0 - el.gamma) * (1.0 + theta) / (1.0 + el.gamma * theta)
    alpha = np.exp(1j * phi) * (w * np.cos(phi) + el.omega_alpha * np.sin(phi))
    psi = 2j * w * om * alpha / (np.pi * lam)
    return HosidfIntermediates(lam=lam, theta=theta, omega_factor=om, alpha=alpha, psi=psi)


def hosidf(el: GeneralizedFore, cs_phase, n: int, omega):
    """n-th harmonic describing function ``C_n(omega)`` of the shaped element.

    ``cs_phase`` is the principal shaping-filter phase at ``omega`` (radians;
    scalar or broadcastable array). Even orders return exactly zero.
    """
    if n < 1 or n != int(n):
        raise ValueError("harmonic order must be a positive integer")
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("omega must be > 0")
    if n % 2 == 0:
        out = np.zeros(np.broadcast(w, np.asarray(cs_phase)).shape, dtype=complex)
        return out if np.ndim(omega) or np.ndim(cs_phase) else complex(out)
    inter = hosidf_intermediates(el, cs_phase, omega)
    if n == 1:
        val = (inter.psi + 1.0) * el.omega_beta / (el.omega_alpha + 1j * w)
    else:
        phi = np.asarray(cs_phase, dtype=float)
        val = (inter.psi * el.omega_beta / (el.omega_alpha + 1j * n * w)
               * np.exp(1j * (n - 1) * phi))
    return val if np.ndim(omega) or np.ndim(cs_phase) else complex(val)


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Harmonic values over a frequency grid, odd orders only.

    Even orders are identically zero and are therefore not stored.
    """

    grid: FrequencyGrid
    orders: tuple[int, ...]
    values: dict[int, np.ndarray]

    def __post_init__(self):
        for n in self.orders:
            if n % 2 == 0:
                raise ValueError("spectrum stores odd orders only")
            if len(self.values[n]) != len(self.grid):
                raise ValueError("value arrays must match the grid")


def shaping_phase(sys: ShapedOpenLoop, omega):
    """Principal phase of the shaping filter along ``omega``."""
    return principal_angle(eval_response(sys.shaping, omega))


def element_spectrum(sys: ShapedOpenLoop, grid: FrequencyGrid,
                     orders=(1, 3)) -> HarmonicSpectrum:
    """Element-level ``C_n`` over a grid (includes the branch pre-gain)."""
    if sys.reset is None:
        raise ValueError("assembly has no reset element")
    w = grid.omegas
    phi = shaping_phase(sys, w)
    values = {int(n): sys.pre_gain * hosidf(sys.reset, phi, int(n), w) for n in orders}
    return HarmonicSpectrum(grid=grid, orders=tuple(int(n) for n in orders), values=values)


def open_loop_harmonic(sys: ShapedOpenLoop, n: int, omega):
    """Open-loop harmonic ``L_n(w) = C_n(w) C_alpha(n w) P(n w)``.

    The LTI blocks are evaluated at the harmonic frequency ``n*w``; the
    branch pre-gain multiplies through. For a linear assembly (no reset
    element) the fundamental is the plain LTI loop and higher orders vanish.
    """
    w = np.asarray(omega, dtype=float)
    lti_part = eval_response(sys.c_alpha, n * w) * eval_response(sys.plant, n * w)
    if sys.reset is None:
        cn = np.ones_like(w, dtype=complex) if n == 1 else np.zeros_like(w, dtype=complex)
    else:
        phi = shaping_phase(sys, w)
        cn = hosidf(sys.reset, phi, n, w)
    val = sys.pre_gain * cn * lti_part
    return val if np.ndim(omega) else complex(val)


def spectrum(sys: ShapedOpenLoop, grid: FrequencyGrid, orders=(1, 3)) -> HarmonicSpectrum:
    """Open-loop harmonics ``L_n`` over a grid."""
    values = {int(n): open_loop_harmonic(sys, int(n), grid.omegas) for n in orders}
    return HarmonicSpectrum(grid=grid, orders=tuple(int(n) for n in orders), values=values)


# ---------------------------------------------------------------------------
# Bandwidth and phase-lead accounting.
# ---------------------------------------------------------------------------

class BracketingError(ValueError):
    """|L_1| does not cross 0 dB inside the supplied bracket."""


@dataclass(frozen=True)
class BandwidthReport:
    omega_c: float
    phase_margin_deg: float
    gain_db_at_crossover: float
    multiple_crossings: bool = False

    @property
    def hz(self) -> float:
        return self.omega_c / (2.0 * math.pi)


def find_bandwidth(sys: ShapedOpenLoop, bracket: tuple[float, float],
                   scan_points: int = 600, rel_tol: float = 1e-9) -> BandwidthReport:
    """Locate the 0 dB crossover of ``|L_1|`` by scan + bisection.

    Scans the bracket on a log grid to find sign changes of ``log|L_1|``; the
    lowest crossing is refined by bisection to ``rel_tol`` relative accuracy.
    A bracket without a crossing raises :class:`BracketingError`; several
    crossings set the ``multiple_crossings`` flag.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0.0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")

    def gain_log(w):
        return np.log10(np.abs(open_loop_harmonic(sys, 1, w)))

    ws = np.logspace(math.log10(lo), math.log10(hi), scan_points)
    g = gain_log(ws)
    signs = np.sign(g)
    crossings = np.nonzero(signs[:-1] * signs[1:] < 0.0)[0]
    exact = np.nonzero(g == 0.0)[0]
    n_crossings = len(crossings) + len(exact)
    if n_crossings == 0:
        raise BracketingError(
            f"|L_1| does not reach 0 dB inside [{lo:.4g}, {hi:.4g}] rad/s")
    if len(exact) and (not len(crossings) or exact[0] <= crossings[0]):
        wc = float(ws[exact[0]])
    else:
        a, b = float(ws[crossings[0]]), float(ws[crossings[0] + 1])
        ga = gain_log(a)
        while (b - a) > rel_tol * a:
            mid = math.sqrt(a * b)
            gm = gain_log(mid)
            if gm == 0.0:
                a = b = mid
                break
            if (gm > 0.0) == (ga > 0.0):
                a, ga = mid, gm
            else:
                b = mid
        wc = math.sqrt(a * b)
    l1 = open_loop_harmonic(sys, 1, wc)
    pm = math.degrees(principal_angle(l1)) + 180.0
    return BandwidthReport(
        omega_c=wc,
        phase_margin_deg=pm,
        gain_db_at_crossover=20.0 * math.log10(abs(l1)),
        multiple_crossings=n_crossings > 1,
    )


def phase_at_bandwidth(el: GeneralizedFore, cs_phase_at_wc: float, omega_c: float) -> float:
    """Principal phase of the first harmonic at the crossover, radians.

    Computed as the argument of the complex ``C_1`` value, which is
    quadrant-correct everywhere; the closed-form arctangent expressions are
    available separately as a cross-check (they share a tangent but can sit
    on the wrong branch near their singularities).
    """
    if not omega_c > 0.0:
        raise ValueError("omega_c must be > 0")
    return float(principal_angle(hosidf(el, cs_phase_at_wc, 1, omega_c)))


def phase_at_bandwidth_reference(el: GeneralizedFore, cs_phase_at_wc: float,
                                 omega_c: float) -> float:
    """Closed-form first-harmonic phase (principal arctangent branch).

    Valid modulo pi; agrees exactly with :func:`phase_at_bandwidth` whenever
    the underlying complex value lies in the right half-plane.
    """
    phi = float(cs_phase_at_wc)
    wc = float(omega_c)
    gam = el.gamma
    if el.omega_alpha == 0.0:
        num = math.sin(2 * phi) - math.pi * (1 + gam) / (2 * (1 - gam))
        den = math.cos(2 * phi) + 1.0
        if den == 0.0:
            return math.copysign(math.pi / 2, num)
        return math.atan(num / den)
    inter = hosidf_intermediates(el, phi, wc)
    kappa_zeta = wc * float(inter.omega_factor) / (math.pi * float(inter.lam))
    kappa_gamma = (wc * math.cos(2 * phi) + el.omega_alpha * math.sin(2 * phi) + wc)
    denom = 1.0 / (kappa_gamma * kappa_zeta) - math.tan(phi)
    phi_alpha = math.atan(1.0 / denom) if denom != 0.0 else math.pi / 2
    return phi_alpha - math.atan(wc / el.omega_alpha)


def unshaped_phase(el: GeneralizedFore, omega_c: float) -> float:
    """First-harmonic phase with no shaping filter (``C_s = 1``), radians."""
    return phase_at_bandwidth(el, 0.0, omega_c)


def unshaped_phase_reference(el: GeneralizedFore, omega_c: float) -> float:
    """Closed form of the unshaped phase, for cross-checks.

    ``arctan(-pi (1+gamma) / (4 (1-gamma)))`` for the Clegg case, otherwise
    ``arctan(2 w_c kappa_zeta) - arctan(w_c / w_alpha)``.
    """
    wc = float(omega_c)
    if el.omega_alpha == 0.0:
        return math.atan(-math.pi * (1 + el.gamma) / (4 * (1 - el.gamma)))
    inter = hosidf_intermediates(el, 0.0, wc)
    kappa_zeta = wc * float(inter.omega_factor) / (math.pi * float(inter.lam))
    return math.atan(2 * wc * kappa_zeta) - math.atan(wc / el.omega_alpha)


def phase_lead(el: GeneralizedFore, cs_phase_at_wc: float, omega_c: float) -> float:
    """Phase gained by the shaping filter at crossover, radians.

    Difference between the shaped and unshaped first-harmonic phases at the
    same frequency; zero when the filter phase is zero there.
    """
    return (phase_at_bandwidth(el, cs_phase_at_wc, omega_c)
            - unshaped_phase(el, omega_c))


def max_shaping_phase(el: GeneralizedFore, omega_c: float) -> float:
    """Upper endpoint of the admissible filter phase at crossover, radians.

    ``pi/2 - arctan(pi (1+gamma) / (4 (1-gamma)))`` for the Clegg case and
    ``pi/2 - arctan(w_c / w_alpha)`` otherwise.
    """
    if not omega_c > 0.0:
        raise ValueError("omega_c must be > 0")
    if el.omega_alpha == 0.0:
        return math.pi / 2 - math.atan(math.pi * (1 + el.gamma) / (4 * (1 - el.gamma)))
    return math.pi / 2 - math.atan(omega_c / el.omega_alpha)


@dataclass(frozen=True)
class MaxLeadResult:
    """Largest admissible filter phase at crossover and the lead it buys.

    ``cs_angle_bound`` is the closed-form endpoint angle; ``lead_at_bound``
    evaluates the phase lead exactly there. For elements with a nonzero flow
    pole the lead is largest at the endpoint, but for the Clegg case the lead
    returns to zero at both ends of the admissible interval, so the usable
    maximum ``lead_sup`` (attained at ``cs_angle_at_sup``) is located
    numerically inside the open interval.
    """

    cs_angle_bound: float
    lead_at_bound: float
    lead_sup: float
    cs_angle_at_sup: float


def max_phase_lead(el: GeneralizedFore, omega_c: float) -> MaxLeadResult:
    """Endpoint angle plus the supremum of the achievable phase lead."""
    bound = max_shaping_phase(el, omega_c)
    lead_at_bound = phase_lead(el, bound, omega_c)
    angles = np.linspace(0.0, bound, 4001)[1:-1]
    leads = np.array([phase_lead(el, a, omega_c) for a in angles])
    k = int(np.argmax(leads))
    # Golden-section refinement around the grid maximum.
    lo = angles[max(k - 1, 0)]
    hi = angles[min(k + 1, len(angles) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = phase_lead(el, c, omega_c)
    fd = phase_lead(el, d, omega_c)
    for _ in range(80):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = phase_lead(el, c, omega_c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = phase_lead(el, d, omega_c)
    best_angle = (a + b) / 2.0
    best = phase_lead(el, best_angle, omega_c)
    if lead_at_bound >= best:
        best, best_angle = lead_at_bound, bound
    return MaxLeadResult(cs_angle_bound=bound, lead_at_bound=lead_at_bound,
                         lead_sup=best, cs_angle_at_sup=best_angle)
