"""Deterministic signal generators for references, disturbances, and noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Signal:
    """Sampled waveform generator.

    ``kind`` selects the waveform; ``params`` hold its constants. The
    ``fundamental_hz`` of periodic signals drives window selection for
    steady-state measures; aperiodic signals report ``None``.
    """

    kind: str
    params: tuple = ()

    def sample(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "step":
            t0, amplitude = self.params
            return np.where(t >= t0, amplitude, 0.0)
        if self.kind == "multisine":
            out = np.zeros_like(t)
            for amplitude, freq_hz, phase in self.params:
                out += amplitude * np.sin(2.0 * math.pi * freq_hz * t + phase)
            return out
        if self.kind == "noise":
            amplitude, seed = self.params
            rng = np.random.default_rng(int(seed))
            return amplitude * rng.standard_normal(t.shape)
        raise ValueError(f"unknown signal kind {self.kind!r}")

    @property
    def fundamental_hz(self) -> float | None:
        if self.kind != "multisine":
            return None
        freqs = [f for _, f, _ in self.params]
        # Fundamental of a rational multisine: gcd on a millihertz lattice.
        mhz = [round(f * 1000) for f in freqs]
        g = 0
        for m in mhz:
            g = math.gcd(g, m)
        return g / 1000.0 if g else None

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "step":
            return self.params[1] == 0.0
        if self.kind == "multisine":
            return all(a == 0.0 for a, _, _ in self.params)
        return False


def zero() -> Signal:
    return Signal("zero")


def step(t0: float = 0.0, amplitude: float = 1.0) -> Signal:
    return Signal("step", (float(t0), float(amplitude)))


def sinusoid(amplitude: float, freq_hz: float, phase: float = 0.0) -> Signal:
    return Signal("multisine", ((float(amplitude), float(freq_hz), float(phase)),))


def multisine(components) -> Signal:
    """Sum of sines from an iterable of (amplitude, freq_hz, phase) triples."""
    comps = tuple((float(a), float(f), float(p)) for a, f, p in components)
    return Signal("multisine", comps)


def white_noise(amplitude: float, seed: int = 0) -> Signal:
    """Gaussian sample noise with a fixed seed (deterministic per trace length)."""
    return Signal("noise", (float(amplitude), int(seed)))


def preset_d1() -> Signal:
    """Bundled disturbance mix: 1e-8 * (75 sin(10 pi t) + 7.5 sin(20 pi t) + 1.5 sin(40 pi t)) m."""
    return multisine([(75.0e-8, 5.0, 0.0), (7.5e-8, 10.0, 0.0), (1.5e-8, 20.0, 0.0)])


def preset_d2() -> Signal:
    """Bundled disturbance mix: 1e-8 * (19.1 sin(2 pi t) + 1.8 sin(4 pi t) + 3.3 sin(16 pi t)) m."""
    return multisine([(19.1e-8, 1.0, 0.0), (1.8e-8, 2.0, 0.0), (3.3e-8, 8.0, 0.0)])


def preset_r2() -> Signal:
    """Bundled reference: 7.5e-7 sin(10 pi t) m (5 Hz)."""
    return sinusoid(7.5e-7, 5.0)
