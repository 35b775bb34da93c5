"""Hybrid time-domain simulation of the closed reset-control loop.

Between reset events the whole loop (shaping filter, reset element flow,
compensator, plant) is one LTI system; it is discretized once with an exact
matrix exponential and stepped at a fixed rate with zero-order-hold inputs
sampled at mid-step. Reset events are detected from sign changes of the
sampled trigger signal, localized inside the step by linear interpolation,
and applied by advancing the state exactly to the crossing, scaling the
element state by gamma, and integrating the step remainder.

Optional measurement quantization and actuator saturation enter as held
per-step corrections on the noise and disturbance channels, which keeps the
exact-exponential update valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .lti import RationalTransferFunction, StateSpaceRealization, make_gain, realize, series
from .reset import GeneralizedFore, ShapedOpenLoop, open_loop_stability, to_reset_element
from .signals import Signal, zero

_DIVERGENCE_LIMIT = 1e12
_MAX_EVENTS_PER_STEP = 8

# trace row layout
_ROWS = ("r", "e", "es", "v", "u", "d", "n", "y")
_R, _E, _ES, _V, _U, _D, _N, _Y = range(8)


class SimulationDiverged(RuntimeError):
    """A state left the admissible range; carries the blow-up time."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(f"simulation diverged at t = {time:.6g} s")


@dataclass
class LoopConfig:
    """One closed-loop simulation run.

    ``enable_resets=False`` freezes the jump map, which reduces the loop to
    its base-linear dynamics on the identical integration path.
    ``quantizer_resolution`` emulates an incremental encoder on the measured
    output; ``input_saturation`` clamps the actuator command symmetrically.
    Both are off by default.
    """

    system: ShapedOpenLoop
    reference: Signal = field(default_factory=zero)
    disturbance: Signal = field(default_factory=zero)
    noise: Signal = field(default_factory=zero)
    sample_step: float = 1e-5
    duration: float = 1.0
    enable_resets: bool = True
    quantizer_resolution: float = 0.0
    input_saturation: float = 0.0
    store_every: int = 1
    check_element_stability: bool = True

    def __post_init__(self):
        if not self.sample_step > 0.0:
            raise ValueError("sample_step must be > 0")
        if not self.duration > self.sample_step:
            raise ValueError("duration must exceed one sample step")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")


@dataclass
class SimTrace:
    """Densely sampled loop signals plus the located reset instants."""

    time: np.ndarray
    r: np.ndarray
    e: np.ndarray
    es: np.ndarray
    v: np.ndarray
    u: np.ndarray
    d: np.ndarray
    n: np.ndarray
    y: np.ndarray
    reset_instants: np.ndarray
    sample_step: float
    chatter_warnings: int = 0

    def signal(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def reset_marks(self) -> np.ndarray:
        """0/1 column marking the stored sample right after each reset."""
        marks = np.zeros(len(self.time), dtype=int)
        if len(self.reset_instants):
            idx = np.searchsorted(self.time, self.reset_instants)
            idx = np.clip(idx, 0, len(marks) - 1)
            marks[idx] = 1
        return marks


# ---------------------------------------------------------------------------
# Loop assembly.
# ---------------------------------------------------------------------------

def _is_zero_tf(tf: RationalTransferFunction) -> bool:
    return all(c == 0.0 for c in tf.num)


@dataclass
class _LoopMatrices:
    a: np.ndarray
    b: np.ndarray          # columns r, d, n
    c_out: np.ndarray      # 8 output rows
    d_out: np.ndarray
    jump_index: int        # -1 when no reset element
    gamma: float


def assemble_loop(sys: ShapedOpenLoop) -> _LoopMatrices:
    """Combined state-space of the closed loop with inputs (r, d, n)."""
    plant = sys.plant
    if not (plant.is_strictly_proper or _is_zero_tf(plant)):
        raise ValueError("plant must be strictly proper for a well-posed loop")
    ss_s = realize(sys.shaping)
    ss_a = realize(series(make_gain(sys.pre_gain), sys.c_alpha))
    ss_p = realize(plant)
    el = to_reset_element(sys.reset) if sys.reset is not None else None

    n_s, n_a, n_p = ss_s.order, ss_a.order, ss_p.order
    n_r = el.order if el is not None else 0
    s0, r0, a0, p0 = 0, n_s, n_s + n_r, n_s + n_r + n_a
    nx = n_s + n_r + n_a + n_p

    cp = ss_p.c.reshape(-1)
    a = np.zeros((nx, nx))
    b = np.zeros((nx, 3))

    def put(block, r_slice, c_slice):
        a[r_slice, c_slice] += block

    # shaping filter driven by e = r - y - n
    if n_s:
        put(ss_s.a, slice(s0, r0), slice(s0, r0))
        if n_p:
            put(-ss_s.b @ cp[None, :], slice(s0, r0), slice(p0, nx))
        b[s0:r0, 0] += ss_s.b[:, 0]
        b[s0:r0, 2] -= ss_s.b[:, 0]

    if el is not None:
        put(el.a_r, slice(r0, a0), slice(r0, a0))
        if n_p:
            put(-el.b_r @ cp[None, :], slice(r0, a0), slice(p0, nx))
        b[r0:a0, 0] += el.b_r[:, 0]
        b[r0:a0, 2] -= el.b_r[:, 0]
        # compensator driven by v = c_r x_r + d_r e
        if n_a:
            put(ss_a.a, slice(a0, p0), slice(a0, p0))
            put(ss_a.b @ el.c_r, slice(a0, p0), slice(r0, a0))
            if el.d_r:
                if n_p:
                    put(-el.d_r * ss_a.b @ cp[None, :], slice(a0, p0), slice(p0, nx))
                b[a0:p0, 0] += el.d_r * ss_a.b[:, 0]
                b[a0:p0, 2] -= el.d_r * ss_a.b[:, 0]
    else:
        # linear assembly: compensator driven by v = e
        if n_a:
            put(ss_a.a, slice(a0, p0), slice(a0, p0))
            if n_p:
                put(-ss_a.b @ cp[None, :], slice(a0, p0), slice(p0, nx))
            b[a0:p0, 0] += ss_a.b[:, 0]
            b[a0:p0, 2] -= ss_a.b[:, 0]

    # plant driven by u + d, u = C_a x_a + D_a v
    if n_p:
        put(ss_p.a, slice(p0, nx), slice(p0, nx))
        if n_a:
            put(ss_p.b @ ss_a.c, slice(p0, nx), slice(a0, p0))
        b[p0:nx, 1] += ss_p.b[:, 0]
        if el is not None:
            put(ss_a.d * ss_p.b @ el.c_r, slice(p0, nx), slice(r0, a0))
            if el.d_r:
                put(-ss_a.d * el.d_r * ss_p.b @ cp[None, :], slice(p0, nx), slice(p0, nx))
                b[p0:nx, 0] += ss_a.d * el.d_r * ss_p.b[:, 0]
                b[p0:nx, 2] -= ss_a.d * el.d_r * ss_p.b[:, 0]
        else:
            put(-ss_a.d * ss_p.b @ cp[None, :], slice(p0, nx), slice(p0, nx))
            b[p0:nx, 0] += ss_a.d * ss_p.b[:, 0]
            b[p0:nx, 2] -= ss_a.d * ss_p.b[:, 0]

    c_out = np.zeros((8, nx))
    d_out = np.zeros((8, 3))
    d_out[_R, 0] = 1.0
    d_out[_D, 1] = 1.0
    d_out[_N, 2] = 1.0
    if n_p:
        c_out[_Y, p0:nx] = cp
        c_out[_E, p0:nx] = -cp
    d_out[_E, 0] = 1.0
    d_out[_E, 2] = -1.0
    # trigger e_s through the shaping filter
    if n_s:
        c_out[_ES, s0:r0] = ss_s.c[0]
    c_out[_ES] += ss_s.d * c_out[_E]
    d_out[_ES] = ss_s.d * d_out[_E]
    # reset-branch output v
    if el is not None:
        c_out[_V, r0:a0] = el.c_r[0]
        c_out[_V] += el.d_r * c_out[_E]
        d_out[_V] += el.d_r * d_out[_E]
    else:
        c_out[_V] = c_out[_E]
        d_out[_V] = d_out[_E]
    # actuator command u
    if n_a:
        c_out[_U, a0:p0] = ss_a.c[0]
    c_out[_U] += ss_a.d * c_out[_V]
    d_out[_U] += ss_a.d * d_out[_V]

    return _LoopMatrices(a=a, b=b, c_out=c_out, d_out=d_out,
                         jump_index=r0 if el is not None else -1,
                         gamma=el.gamma if el is not None else 1.0)


def _discretize_pair(a: np.ndarray, b: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    nx, nu = a.shape[0], b.shape[1]
    aug = np.zeros((nx + nu, nx + nu))
    aug[:nx, :nx] = a
    aug[:nx, nx:] = b
    phi = expm(aug * dt)
    return np.ascontiguousarray(phi[:nx, :nx]), np.ascontiguousarray(phi[:nx, nx:])


# ---------------------------------------------------------------------------
# Fixed-step kernel (numba-compiled when available).
# ---------------------------------------------------------------------------

def _kernel_py(ad, bd, c_out, d_out, x, x_prev, w_mid, w_exact, w_used, out,
               k_begin, n_steps, prev_es0, detect_from, quant, sat, jump_on):
    nx = ad.shape[0]
    prev_es = prev_es0
    scratch = np.empty(nx)
    for k in range(k_begin, n_steps):
        # measured output and quantizer correction
        y = 0.0
        for j in range(nx):
            y += c_out[_Y, j] * x[j]
        qc = 0.0
        if quant > 0.0:
            qc = math.floor(y / quant + 0.5) * quant - y
        wr = w_exact[k, 0]
        wd = w_exact[k, 1]
        wn = w_exact[k, 2] + qc
        vals = np.empty(8)
        for row in range(8):
            acc = d_out[row, 0] * wr + d_out[row, 1] * wd + d_out[row, 2] * wn
            for j in range(nx):
                acc += c_out[row, j] * x[j]
            vals[row] = acc
        vals[_D] = w_exact[k, 1]
        vals[_N] = w_exact[k, 2]
        sc = 0.0
        if sat > 0.0:
            u_raw = vals[_U]
            if u_raw > sat:
                vals[_U] = sat
                sc = sat - u_raw
            elif u_raw < -sat:
                vals[_U] = -sat
                sc = -sat - u_raw
        for row in range(8):
            out[row, k] = vals[row]
        big = 0.0
        for j in range(nx):
            if abs(x[j]) > big:
                big = abs(x[j])
        if big > _DIVERGENCE_LIMIT:
            return k, 2, prev_es
        es = vals[_ES]
        if jump_on and k > detect_from:
            if (prev_es > 0.0 and es <= 0.0) or (prev_es < 0.0 and es >= 0.0):
                return k, 1, prev_es
        prev_es = es
        if k == n_steps - 1:
            break
        w_used[0] = w_mid[k, 0]
        w_used[1] = w_mid[k, 1] + sc
        w_used[2] = w_mid[k, 2] + qc
        for j in range(nx):
            x_prev[j] = x[j]
            acc = bd[j, 0] * w_used[0] + bd[j, 1] * w_used[1] + bd[j, 2] * w_used[2]
            for m in range(nx):
                acc += ad[j, m] * x[m]
            scratch[j] = acc
        for j in range(nx):
            x[j] = scratch[j]
    return n_steps - 1, 0, prev_es


try:  # pragma: no cover - exercised implicitly by every simulation test
    from numba import njit as _njit

    _kernel = _njit(cache=True, nogil=True)(_kernel_py)
except ImportError:  # pragma: no cover
    _kernel = _kernel_py


def _outputs_at(mats: _LoopMatrices, x: np.ndarray, w: np.ndarray,
                quant: float, sat: float) -> np.ndarray:
    """Python-side replica of the kernel's per-sample output computation."""
    y = float(mats.c_out[_Y] @ x)
    qc = 0.0
    if quant > 0.0:
        qc = math.floor(y / quant + 0.5) * quant - y
    w_eff = np.array([w[0], w[1], w[2] + qc])
    vals = mats.c_out @ x + mats.d_out @ w_eff
    vals[_D], vals[_N] = w[1], w[2]
    if sat > 0.0:
        vals[_U] = min(max(vals[_U], -sat), sat)
    return vals


def simulate(cfg: LoopConfig) -> SimTrace:
    """Run the hybrid loop; raises :class:`SimulationDiverged` on blow-up.

    The reset jump is applied at zero crossings of the trigger samples,
    localized by linear interpolation inside the step. Consecutive crossings
    within one step are replayed up to a small cap and counted as chatter.
    """
    sys = cfg.system
    if sys.reset is not None and cfg.check_element_stability:
        if not open_loop_stability(sys.reset):
            raise ValueError("reset element fails the open-loop stability test")
    mats = assemble_loop(sys)
    h = cfg.sample_step
    n_steps = int(round(cfg.duration / h)) + 1
    t = np.arange(n_steps) * h
    ad, bd = _discretize_pair(mats.a, mats.b, h)

    w_exact = np.column_stack([
        cfg.reference.sample(t), cfg.disturbance.sample(t), cfg.noise.sample(t)])
    # mid-step hold for deterministic signals; sampled noise is held as-is
    t_mid = t + 0.5 * h
    w_mid = np.column_stack([
        cfg.reference.sample(t_mid), cfg.disturbance.sample(t_mid),
        w_exact[:, 2] if cfg.noise.kind == "noise" else cfg.noise.sample(t_mid)])

    nx = mats.a.shape[0]
    x = np.zeros(nx)
    x_prev = np.zeros(nx)
    w_used = np.zeros(3)
    out = np.zeros((8, n_steps))
    jump_on = cfg.enable_resets and mats.jump_index >= 0

    reset_instants: list[float] = []
    chatter = 0
    prev_es = 0.0
    detect_from = 0
    k = 0
    while True:
        stop_k, reason, prev_es = _kernel(
            ad, bd, mats.c_out, mats.d_out, x, x_prev, w_mid, w_exact, w_used, out,
            k, n_steps, prev_es, detect_from, cfg.quantizer_resolution,
            cfg.input_saturation, jump_on)
        if reason == 0:
            break
        if reason == 2:
            raise SimulationDiverged(float(t[stop_k]))
        # reset event between samples stop_k-1 and stop_k
        k_ev = stop_k
        es_a = out[_ES, k_ev - 1]
        es_b = out[_ES, k_ev]
        tau = h if es_a == es_b else h * es_a / (es_a - es_b)
        tau = min(max(tau, 0.0), h)
        if tau < 1e-12 * h:
            tau = 0.0
        elif h - tau < 1e-12 * h:
            tau = h
        sign_before = 1.0 if es_a > 0.0 else -1.0
        x_work = x_prev.copy()
        w_hold = w_used.copy().reshape(3, 1)
        t_off = 0.0
        events_here = 0
        while True:
            ad_t, bd_t = _discretize_pair(mats.a, mats.b, tau - t_off)
            x_star = ad_t @ x_work + (bd_t @ w_hold)[:, 0]
            x_star[mats.jump_index] *= mats.gamma
            reset_instants.append(float(t[k_ev - 1] + tau))
            events_here += 1
            ad_r, bd_r = _discretize_pair(mats.a, mats.b, h - tau)
            x_new = ad_r @ x_star + (bd_r @ w_hold)[:, 0]
            vals = _outputs_at(mats, x_new, w_exact[k_ev],
                               cfg.quantizer_resolution, cfg.input_saturation)
            es_new = vals[_ES]
            crossed_back = (es_new != 0.0) and ((es_new > 0.0) == (sign_before > 0.0))
            if crossed_back and events_here < _MAX_EVENTS_PER_STEP and tau < h:
                # trigger re-crossed zero inside the remainder; replay from the
                # midpoint of what is left of the step
                chatter += 1
                x_work = x_star
                t_off = tau
                tau = tau + 0.5 * (h - tau)
                continue
            x[:] = x_new
            out[:, k_ev] = vals
            break
        prev_es = 0.0
        detect_from = k_ev
        k = k_ev

    sl = slice(None, None, cfg.store_every)
    return SimTrace(
        time=t[sl].copy(), r=out[_R, sl].copy(), e=out[_E, sl].copy(),
        es=out[_ES, sl].copy(), v=out[_V, sl].copy(), u=out[_U, sl].copy(),
        d=out[_D, sl].copy(), n=out[_N, sl].copy(), y=out[_Y, sl].copy(),
        reset_instants=np.asarray(reset_instants),
        sample_step=h * cfg.store_every, chatter_warnings=chatter,
    )


# ---------------------------------------------------------------------------
# Trace metrics.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransientMetrics:
    overshoot_pct: float
    settling_time: float
    steady_state_error_inf: float
    settled: bool


def step_metrics(trace: SimTrace, step_size: float, band: float = 0.02) -> TransientMetrics:
    """Overshoot, 2 %% settling time and final error for a step reference."""
    if step_size == 0.0:
        raise ValueError("step_size must be nonzero")
    y = trace.y / step_size
    overshoot = max(0.0, float(np.max(y)) - 1.0) * 100.0
    outside = np.abs(y - 1.0) > band
    if outside[-1]:
        settled = False
        settling = float(trace.time[-1])
    else:
        settled = True
        last_out = np.nonzero(outside)[0]
        settling = float(trace.time[last_out[-1] + 1]) if len(last_out) else 0.0
    tail = trace.e[int(0.8 * len(trace.e)):]
    return TransientMetrics(overshoot_pct=overshoot, settling_time=settling,
                            steady_state_error_inf=float(np.max(np.abs(tail))),
                            settled=settled)


def steady_state_error(trace: SimTrace, discard_fraction: float = 0.5,
                       fundamental_hz: float | None = None,
                       min_periods: int = 10) -> float:
    """Max |e| over the retained tail of a periodically driven trace."""
    if not 0.0 <= discard_fraction < 1.0:
        raise ValueError("discard_fraction must lie in [0, 1)")
    start = int(math.ceil(discard_fraction * len(trace.e)))
    window = trace.time[-1] - trace.time[start]
    if fundamental_hz:
        if window * fundamental_hz < min_periods:
            raise ValueError(
                f"retained window holds {window * fundamental_hz:.2f} periods; "
                f"need at least {min_periods}")
    return float(np.max(np.abs(trace.e[start:])))


def extract_harmonics(trace: SimTrace, base_omega: float, orders,
                      discard_fraction: float = 0.5, signal: str = "v",
                      reference: str = "e") -> dict[int, complex]:
    """Empirical harmonic gains from a steady-state trace.

    Projects the chosen output onto sin/cos at multiples of ``base_omega``
    over the last whole number of base periods, then normalizes by the
    fundamental phasor of the reference signal (sine convention: a phasor V
    means the component ``Im(V exp(j n w t))``). Raises when the retained
    window is shorter than one full period.
    """
    if not base_omega > 0.0:
        raise ValueError("base_omega must be > 0")
    period = 2.0 * math.pi / base_omega
    start = int(math.ceil(discard_fraction * len(trace.time)))
    span = trace.time[-1] - trace.time[start]
    n_periods = int(math.floor(span / period + 1e-9))
    if n_periods < 1:
        raise ValueError("retained window does not contain one full base period")
    n_samples = int(round(n_periods * period / trace.sample_step))
    if n_samples >= len(trace.time):
        n_samples = len(trace.time) - 1
    sl = slice(len(trace.time) - n_samples - 1, len(trace.time))
    t = trace.time[sl]
    width = t[-1] - t[0]

    def phasor(x: np.ndarray, n: int) -> complex:
        arg = n * base_omega * t
        a = 2.0 / width * np.trapz(x * np.cos(arg), t)
        b = 2.0 / width * np.trapz(x * np.sin(arg), t)
        return complex(b, a)

    v = trace.signal(signal)[sl]
    e = trace.signal(reference)[sl]
    ref = phasor(e, 1)
    mag_e = abs(ref)
    if mag_e == 0.0:
        raise ValueError("reference signal has no fundamental component")
    # shift time so the reference reads as a pure |E| sin(w t)
    phase_e = math.atan2(ref.imag, ref.real)
    out: dict[int, complex] = {}
    for n in orders:
        n = int(n)
        vn = phasor(v, n)
        out[n] = vn * np.exp(-1j * n * phase_e) / mag_e
    return out
