"""Reset elements: hybrid flow/jump structure and open-loop stability test.

The generalized first-order element has flow matrices ``A_R = -omega_alpha``,
``B_R = omega_beta``, ``C_R = 1``, ``D_R = 0`` and a jump that scales the
first state by ``gamma`` whenever the trigger signal crosses zero. Setting
``omega_alpha = 0, omega_beta = 1`` gives the generalized Clegg integrator;
``omega_alpha = omega_beta > 0`` gives the first-order reset element (a reset
low-pass filter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .lti import RationalTransferFunction


@dataclass(frozen=True)
class GeneralizedFore:
    """First-order reset element parameters.

    omega_alpha >= 0 is the flow pole (rad/s), omega_beta > 0 the input gain
    (rad/s), gamma in (-1, 1) the state fraction retained at a reset.
    """

    omega_alpha: float
    omega_beta: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.omega_alpha) and self.omega_alpha >= 0.0):
            raise ValueError(f"omega_alpha must be >= 0, got {self.omega_alpha!r}")
        if not (math.isfinite(self.omega_beta) and self.omega_beta > 0.0):
            raise ValueError(f"omega_beta must be > 0, got {self.omega_beta!r}")
        if not (math.isfinite(self.gamma) and -1.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie strictly inside (-1, 1), got {self.gamma!r}")

    @property
    def is_clegg(self) -> bool:
        return self.omega_alpha == 0.0

    @staticmethod
    def clegg(gamma: float = 0.0) -> "GeneralizedFore":
        """Generalized Clegg integrator; gamma = 0 is the classical one."""
        return GeneralizedFore(0.0, 1.0, gamma)

    @staticmethod
    def fore(omega_r: float, gamma: float) -> "GeneralizedFore":
        """Reset low-pass with unity DC gain: pole and input gain at omega_r."""
        if not omega_r > 0.0:
            raise ValueError("omega_r must be > 0")
        return GeneralizedFore(omega_r, omega_r, gamma)


def build_generalized_fore(omega_alpha: float, omega_beta: float,
                           gamma: float) -> GeneralizedFore:
    """Validated constructor mirroring :class:`GeneralizedFore`."""
    return GeneralizedFore(omega_alpha, omega_beta, gamma)


@dataclass(frozen=True)
class ResetElement:
    """Explicit hybrid matrices of a reset controller.

    Only the leading ``reset_dim`` states jump; the jump map is
    ``diag(gamma * I_reset_dim, I_rest)``. First-order elements carry exactly
    one state, so ``reset_dim`` is 1 there.
    """

    a_r: np.ndarray
    b_r: np.ndarray
    c_r: np.ndarray
    d_r: float
    gamma: float
    reset_dim: int = 1

    def __post_init__(self):
        n = self.a_r.shape[0]
        if self.a_r.shape != (n, n) or self.b_r.shape != (n, 1) or self.c_r.shape != (1, n):
            raise ValueError("inconsistent state-space dimensions")
        if not -1.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie strictly inside (-1, 1)")
        if not 1 <= self.reset_dim <= max(n, 1):
            raise ValueError("reset_dim out of range")

    @property
    def order(self) -> int:
        return self.a_r.shape[0]

    def jump_matrix(self) -> np.ndarray:
        diag = np.ones(self.order)
        diag[: self.reset_dim] = self.gamma
        return np.diag(diag)


def to_reset_element(el: GeneralizedFore) -> ResetElement:
    return ResetElement(
        a_r=np.array([[-el.omega_alpha]]),
        b_r=np.array([[el.omega_beta]]),
        c_r=np.array([[1.0]]),
        d_r=0.0,
        gamma=el.gamma,
        reset_dim=1,
    )


def base_linear(el: GeneralizedFore) -> RationalTransferFunction:
    """Base-linear controller ``omega_beta / (s + omega_alpha)``.

    Depends on the flow matrices only, never on gamma.
    """
    return RationalTransferFunction((el.omega_beta,), (el.omega_alpha, 1.0))


_DEFAULT_DELTAS = tuple(np.logspace(-5, 0, 50))


def open_loop_stability(el: ResetElement | GeneralizedFore,
                        delta_probe=_DEFAULT_DELTAS) -> bool:
    """Periodic-stability test: spectral radius of ``A_rho exp(A_R d) < 1``.

    Probes a grid of inter-reset durations ``d``; for the scalar generalized
    element the analytic bound ``|gamma| * exp(-omega_alpha d) < 1`` holds for
    every d > 0 whenever |gamma| < 1 and omega_alpha >= 0, which the probe
    cross-checks.
    """
    if isinstance(el, GeneralizedFore):
        el = to_reset_element(el)
    deltas = tuple(float(d) for d in delta_probe)
    if not deltas:
        raise ValueError("delta probe list must be non-empty")
    if any(d <= 0.0 for d in deltas):
        raise ValueError("probe durations must be positive")
    a_rho = el.jump_matrix()
    if el.order == 1:
        # Scalar case is exact: radius = |gamma| e^{a_r d} <= |gamma| < 1.
        a = el.a_r[0, 0]
        if a <= 0.0 and abs(el.gamma) < 1.0:
            analytic = True
        else:
            analytic = all(abs(el.gamma) * math.exp(a * d) < 1.0 for d in deltas)
        if not analytic:
            return False
    for d in deltas:
        radius = np.max(np.abs(np.linalg.eigvals(a_rho @ expm(el.a_r * d))))
        if not radius < 1.0:
            return False
    return True


@dataclass(frozen=True)
class ShapedOpenLoop:
    """Open-loop assembly: reset element, LTI compensator, shaping filter, plant.

    ``reset=None`` degrades to a purely linear loop (the forward path is just
    ``pre_gain * c_alpha``). ``pre_gain`` is the scalar gain on the reset
    branch (the k_r of the case studies). The shaping filter must be strictly
    stable; the compensator may carry integrators (poles at the origin) but
    no unstable poles.
    """

    reset: GeneralizedFore | None
    c_alpha: RationalTransferFunction
    shaping: RationalTransferFunction = field(default=RationalTransferFunction((1.0,), (1.0,)))
    plant: RationalTransferFunction = field(default=RationalTransferFunction((1.0,), (1.0,)))
    pre_gain: float = 1.0

    def __post_init__(self):
        if not self.shaping.is_hurwitz(allow_origin=False):
            raise ValueError("shaping filter must be Hurwitz")
        if not self.c_alpha.is_hurwitz(allow_origin=True):
            raise ValueError("compensator must have no poles in the open right half-plane")
        if not (math.isfinite(self.pre_gain)):
            raise ValueError("pre_gain must be finite")

    def base_linear_forward(self) -> RationalTransferFunction:
        """LTI forward path with the reset element replaced by its base-linear."""
        from .lti import make_gain, series
        blocks = [make_gain(self.pre_gain), self.c_alpha]
        if self.reset is not None:
            blocks.insert(1, base_linear(self.reset))
        return series(*blocks)
