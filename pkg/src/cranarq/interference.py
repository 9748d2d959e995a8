"""Two-state on-off interference chain parameterized by rate and burstiness."""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChainError, InfeasibleParameterError, InvalidParameterError


@dataclass(frozen=True)
class InterferenceModel:
    """Psi(k) in {0, 1}; interference power is ``i_power * Psi(k)`` (linear)."""

    p01: float
    p10: float
    i_power: float = 0.0

    def __post_init__(self):
        for name in ("p01", "p10"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must be a probability, got {v!r}")
        if not self.i_power >= 0.0:
            raise InvalidParameterError(f"i_power must be >= 0, got {self.i_power!r}")

    @property
    def transition(self) -> np.ndarray:
        return np.array([[1.0 - self.p01, self.p01],
                         [self.p10, 1.0 - self.p10]])

    def stationary(self) -> np.ndarray:
        s = self.p01 + self.p10
        if s == 0:
            raise DegenerateChainError("p01 = p10 = 0: interference chain is reducible")
        return np.array([self.p10 / s, self.p01 / s])


def from_rate_burstiness(e: float, b: float, i_power: float = 0.0) -> InterferenceModel:
    """Invert E = p01 / (p01 + p10), B = 1 / p10."""
    if math.isnan(e) or math.isnan(b):
        raise InvalidParameterError("rate and burstiness must be numbers")
    if e <= 0.0 or e >= 1.0:
        raise DegenerateChainError(
            f"interference rate {e!r} makes the chain constant; set i_power = 0 instead")
    if b < 1.0:
        raise InvalidParameterError(f"burstiness must be >= 1, got {b!r}")
    # read inputs as the decimals they print as and round once, so that
    # (0.6, 6) gives exactly p01 = 0.25
    fe, fb = Fraction(repr(float(e))), Fraction(repr(float(b)))
    p10 = float(1 / fb)
    p01 = float(fe / ((1 - fe) * fb))
    if p01 > 1.0:
        raise InfeasibleParameterError(
            f"(E={e}, B={b}) needs p01 = {p01:.6g} > 1; lower E or raise B")
    return InterferenceModel(p01=p01, p10=p10, i_power=float(i_power))


def rate_burstiness(m: InterferenceModel) -> tuple[float, float]:
    """Return (E, B) of an on-off chain."""
    if m.p10 == 0.0:
        raise DegenerateChainError("p10 = 0: state 1 is absorbing, burstiness is infinite")
    return m.p01 / (m.p01 + m.p10), 1.0 / m.p10
