"""Rational transfer functions and state-space tooling for the LTI loop blocks.

Coefficient vectors are stored in ascending powers of the Laplace variable
``s`` and are plain real floats; composition is exact polynomial arithmetic
(no pole/zero cancellation is ever performed, so a composed loop keeps the
structure of its physical blocks). Corner frequencies are in rad/s
throughout; frequency *ranges* at user-facing interfaces are in Hz and are
converted before they reach this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import expm


class PoleOnAxisError(ValueError):
    """Evaluation hit a pole on the imaginary axis."""

    def __init__(self, omega: float):
        self.omega = omega
        super().__init__(f"transfer function has a pole at s = j*{omega:.6g} rad/s")


def principal_angle(z) -> np.ndarray | float:
    """Argument of ``z`` as a principal angle in (-pi, pi]."""
    ang = np.angle(z)
    # arctan2 may return -pi for boundary values; fold onto the +pi branch.
    ang = np.where(ang <= -np.pi, np.pi, ang)
    return ang if np.ndim(ang) else float(ang)


def unwrap_phase(phase_rad: np.ndarray) -> np.ndarray:
    """Unwrap a principal-valued phase sequence (plotting helper only).

    The analysis core always works with principal angles; call this on
    emitted data when a continuous phase curve is wanted.
    """
    return np.unwrap(np.asarray(phase_rad, dtype=float))


def _trimmed(coeffs) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class RationalTransferFunction:
    """Real-coefficient rational function ``num(s)/den(s)``.

    ``num`` and ``den`` are ascending-power coefficient tuples. The
    denominator must be non-empty with a nonzero leading (highest-order)
    coefficient, and every coefficient must be finite.
    """

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __init__(self, num, den):
        num = _trimmed(num)
        den = tuple(float(x) for x in den)
        if len(den) == 0:
            raise ValueError("denominator must be non-empty")
        if den[-1] == 0.0:
            raise ValueError("leading denominator coefficient must be nonzero")
        for c in num + den:
            if not math.isfinite(c):
                raise ValueError("coefficients must be finite")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def num_degree(self) -> int:
        return len(self.num) - 1

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    @property
    def is_proper(self) -> bool:
        return self.num_degree <= self.den_degree

    @property
    def is_strictly_proper(self) -> bool:
        return self.num_degree < self.den_degree

    def __call__(self, s):
        """Evaluate at a complex point (or array) ``s``; no pole checks."""
        return npoly.polyval(s, self.num) / npoly.polyval(s, self.den)

    def __mul__(self, other: "RationalTransferFunction") -> "RationalTransferFunction":
        return series(self, other)

    def poles(self) -> np.ndarray:
        return npoly.polyroots(self.den)

    def zeros(self) -> np.ndarray:
        if self.num_degree == 0:
            return np.array([])
        return npoly.polyroots(self.num)

    def dc_gain(self) -> float:
        if self.den[0] == 0.0:
            raise PoleOnAxisError(0.0)
        return self.num[0] / self.den[0]

    def is_hurwitz(self, allow_origin: bool = False) -> bool:
        """True iff all poles have negative real part.

        ``allow_origin`` tolerates poles at s = 0 (integrator action), which
        the loop compensators of this toolkit routinely carry.
        """
        poles = self.poles()
        if allow_origin:
            poles = poles[np.abs(poles) > 1e-12 * max(1.0, np.max(np.abs(poles)))]
        return bool(np.all(poles.real < 0.0))


UNITY = RationalTransferFunction((1.0,), (1.0,))


def eval_response(tf: RationalTransferFunction, omega: float):
    """Frequency response ``num(j*omega)/den(j*omega)`` at ``omega`` >= 0 rad/s.

    Raises :class:`PoleOnAxisError` when the denominator vanishes at
    ``j*omega``. Accepts scalar or array ``omega``.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("omega must be >= 0")
    s = 1j * w
    den_val = npoly.polyval(s, tf.den)
    bad = den_val == 0.0
    if np.any(bad):
        raise PoleOnAxisError(float(np.atleast_1d(w)[np.argmax(np.atleast_1d(bad))]))
    resp = npoly.polyval(s, tf.num) / den_val
    return resp if np.ndim(omega) else complex(resp)


def series(*tfs: RationalTransferFunction) -> RationalTransferFunction:
    """Cascade of transfer functions: product of numerators and denominators."""
    num = np.array([1.0])
    den = np.array([1.0])
    for tf in tfs:
        num = np.convolve(num, tf.num)
        den = np.convolve(den, tf.den)
    return RationalTransferFunction(num, den)


# ---------------------------------------------------------------------------
# Builders for the named loop blocks.
# ---------------------------------------------------------------------------

def _require_positive(**corners: float) -> None:
    for name, value in corners.items():
        if not (value > 0.0) or not math.isfinite(value):
            raise ValueError(f"{name} must be a positive finite frequency, got {value!r}")


def make_gain(k: float) -> RationalTransferFunction:
    return RationalTransferFunction((float(k),), (1.0,))


def make_lowpass(omega_corner: float) -> RationalTransferFunction:
    """First-order low-pass ``1 / (s/omega_corner + 1)``."""
    _require_positive(omega_corner=omega_corner)
    return RationalTransferFunction((1.0,), (1.0, 1.0 / omega_corner))


def make_lead(omega_zero: float, omega_pole: float) -> RationalTransferFunction:
    """Lead/lag section ``(s/omega_zero + 1) / (s/omega_pole + 1)``."""
    _require_positive(omega_zero=omega_zero, omega_pole=omega_pole)
    return RationalTransferFunction((1.0, 1.0 / omega_zero), (1.0, 1.0 / omega_pole))


def make_pid(k_p: float, omega_i: float, omega_d: float, omega_t: float) -> RationalTransferFunction:
    """Series-form PID ``k_p * (s+omega_i)/s * (s/omega_d+1)/(s/omega_t+1)``.

    Parameters
    ----------
    k_p : float
        Proportional gain.
    omega_i : float
        Integrator corner (zero of the PI factor), rad/s.
    omega_d, omega_t : float
        Lead zero and taming pole of the derivative factor, rad/s.
    """
    _require_positive(omega_i=omega_i, omega_d=omega_d, omega_t=omega_t)
    pi = RationalTransferFunction((omega_i, 1.0), (0.0, 1.0))
    return series(make_gain(k_p), pi, make_lead(omega_d, omega_t))


def make_pi2d(k_p: float, omega_i: float, omega_d: float, omega_t: float,
              omega_f: float) -> RationalTransferFunction:
    """``k_p * ((s+omega_i)/s)**2 * (s/omega_d+1)/(s/omega_t+1) * 1/(s/omega_f+1)``.

    Double-integrator PID with an output low-pass; the linear benchmark
    controller of the first case study.
    """
    _require_positive(omega_i=omega_i, omega_d=omega_d, omega_t=omega_t, omega_f=omega_f)
    pi = RationalTransferFunction((omega_i, 1.0), (0.0, 1.0))
    return series(make_gain(k_p), pi, pi, make_lead(omega_d, omega_t), make_lowpass(omega_f))


def make_shaping_filter(omega_zeta: float, omega_eta: float,
                        omega_psi: float) -> RationalTransferFunction:
    """Lead shaping filter ``(s/omega_zeta+1)/(s/omega_eta+1) * 1/(s/omega_psi+1)``.

    ``omega_psi`` must lie above ``omega_eta`` so the low-pass only trims the
    high-frequency tail of the lead section.
    """
    _require_positive(omega_zeta=omega_zeta, omega_eta=omega_eta, omega_psi=omega_psi)
    if not omega_psi > omega_eta:
        raise ValueError(
            f"omega_psi must exceed omega_eta (got omega_psi={omega_psi!r} <= "
            f"omega_eta={omega_eta!r})")
    return series(make_lead(omega_zeta, omega_eta), make_lowpass(omega_psi))


# ---------------------------------------------------------------------------
# Frequency grids and the high-frequency gain cap.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing grid of positive angular frequencies (rad/s)."""

    points: tuple[float, ...]

    def __init__(self, points):
        pts = tuple(float(p) for p in points)
        arr = np.asarray(pts)
        if len(pts) == 0:
            raise ValueError("grid must be non-empty")
        if not np.all(np.isfinite(arr)) or not np.all(arr > 0.0):
            raise ValueError("grid points must be finite and > 0")
        if not np.all(np.diff(arr) > 0.0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def omegas(self) -> np.ndarray:
        return np.asarray(self.points)

    @property
    def hertz(self) -> np.ndarray:
        return self.omegas / (2.0 * np.pi)


def log_grid(f_min_hz: float, f_max_hz: float, points_per_decade: int = 200) -> FrequencyGrid:
    """Logarithmic grid between two Hz endpoints, default 200 points/decade."""
    _require_positive(f_min_hz=f_min_hz, f_max_hz=f_max_hz)
    if not f_max_hz > f_min_hz:
        raise ValueError("f_max_hz must exceed f_min_hz")
    decades = math.log10(f_max_hz / f_min_hz)
    n = max(2, int(round(decades * points_per_decade)) + 1)
    freqs = np.logspace(math.log10(f_min_hz), math.log10(f_max_hz), n)
    return FrequencyGrid(2.0 * np.pi * freqs)


@dataclass(frozen=True)
class GainCapResult:
    passed: bool
    worst_omega: float
    worst_magnitude: float
    delta_n: float

    def __bool__(self) -> bool:
        return self.passed


def check_gain_cap(cs: RationalTransferFunction, omega_c: float, delta_n: float,
                   points_per_decade: int = 200) -> GainCapResult:
    """Check ``|C_s(omega)| < delta_n`` on a log grid over [omega_c, 1000*omega_c].

    Returns the verdict together with the worst-offending frequency, so a
    failed cap pinpoints where the shaping filter amplifies noise.
    """
    _require_positive(omega_c=omega_c)
    if not 1.0 < delta_n < 2.0:
        raise ValueError("delta_n must lie in (1, 2)")
    n = 3 * points_per_decade + 1
    omegas = np.logspace(math.log10(omega_c), math.log10(1000.0 * omega_c), n)
    mags = np.abs(eval_response(cs, omegas))
    worst = int(np.argmax(mags))
    return GainCapResult(bool(mags[worst] < delta_n), float(omegas[worst]),
                         float(mags[worst]), float(delta_n))


# ---------------------------------------------------------------------------
# State-space realization (controllable canonical form).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateSpaceRealization:
    """SISO realization ``(A, B, C, D)`` of a proper transfer function."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def response(self, omega) -> np.ndarray:
        """Evaluate ``C (j*omega*I - A)^-1 B + D`` (scalar or array omega)."""
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        out = np.empty(w.shape, dtype=complex)
        eye = np.eye(self.order)
        for i, wi in enumerate(w):
            out[i] = (self.c @ np.linalg.solve(1j * wi * eye - self.a, self.b))[0, 0] + self.d
        return out if np.ndim(omega) else complex(out[0])


def realize(tf: RationalTransferFunction) -> StateSpaceRealization:
    """Controllable-canonical realization of a proper transfer function."""
    if not tf.is_proper:
        raise ValueError("cannot realize an improper transfer function")
    n = tf.den_degree
    lead = tf.den[-1]
    den = np.asarray(tf.den, dtype=float) / lead
    num = np.zeros(n + 1)
    num[:len(tf.num)] = np.asarray(tf.num, dtype=float) / lead
    d = num[n]
    if n == 0:
        return StateSpaceRealization(np.zeros((0, 0)), np.zeros((0, 1)),
                                     np.zeros((1, 0)), float(d))
    a = np.zeros((n, n))
    a[:-1, 1:] = np.eye(n - 1)
    a[-1, :] = -den[:n]
    b = np.zeros((n, 1))
    b[-1, 0] = 1.0
    c = (num[:n] - d * den[:n]).reshape(1, n)
    return StateSpaceRealization(a, b, c, float(d))


def discretize(ss: StateSpaceRealization, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization via the augmented matrix exponential."""
    n = ss.order
    m = ss.b.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = ss.a
    aug[:n, n:] = ss.b
    phi = expm(aug * dt)
    return phi[:n, :n], phi[:n, n:]
