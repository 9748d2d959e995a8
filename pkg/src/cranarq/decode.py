"""Threshold decoding at the base station (SINR) and the control unit (SNR)."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


class EdgePolicy(str, enum.Enum):
    # A bin straddling a gain threshold fails (conservative) or succeeds.
    CONSERVATIVE = "conservative"
    OPTIMISTIC = "optimistic"


@dataclass(frozen=True)
class LinkBudget:
    """Linear-scale link parameters.

    ``quant_noise`` is an additive CU noise term, zero by default.
    """

    p_tx: float
    sigma2: float
    gamma: float
    i_power: float = 0.0
    quant_noise: float = 0.0

    def __post_init__(self):
        for name in ("p_tx", "sigma2"):
            v = getattr(self, name)
            if not v > 0 or math.isinf(v):
                raise InvalidParameterError(f"{name} must be positive and finite, got {v!r}")
        # gamma = 0 is the always-decode limit (g0 = g1 = 0)
        if not self.gamma >= 0 or math.isinf(self.gamma):
            raise InvalidParameterError(f"gamma must be >= 0 and finite, got {self.gamma!r}")
        if not self.i_power >= 0 or not self.quant_noise >= 0:
            raise InvalidParameterError("i_power and quant_noise must be >= 0")

    @classmethod
    def from_db(cls, p_db: float, sigma2: float, gamma_db: float, sir_db: float | None):
        """``sir_db=None`` (or +inf) means no interference."""
        p_tx = db_to_linear(p_db)
        if sir_db is None or sir_db == math.inf:
            i_power = 0.0
        else:
            i_power = p_tx / db_to_linear(sir_db)
        return cls(p_tx=p_tx, sigma2=sigma2, gamma=db_to_linear(gamma_db), i_power=i_power)


@dataclass(frozen=True)
class DecodeOutcome:
    bs_ok: bool
    cu_ok: bool

    def __post_init__(self):
        if self.bs_ok and not self.cu_ok:
            raise InvalidParameterError("BS success implies CU success")


FAIL = DecodeOutcome(False, False)
CU_ONLY = DecodeOutcome(False, True)
BOTH = DecodeOutcome(True, True)
OUTCOMES = (FAIL, CU_ONLY, BOTH)


def gain_thresholds(lb: LinkBudget) -> tuple[float, float]:
    """Gain thresholds (g0, g1) without and with interference."""
    g0 = lb.gamma * (lb.sigma2 + lb.quant_noise) / lb.p_tx
    g1 = lb.gamma * (lb.sigma2 + lb.i_power) / lb.p_tx
    return g0, max(g0, g1)


def threshold_index(edges: np.ndarray, g: float,
                    policy: EdgePolicy = EdgePolicy.CONSERVATIVE) -> int:
    """Number of bins (counted from the bottom) that fail for gain threshold g.

    Bins are 1-based, so bin i decodes iff i > returned index. A threshold
    equal to an edge leaves the bin above it fully decodable, and g <= 0 gives
    the sentinel 0 (everything decodes).
    """
    policy = EdgePolicy(policy)
    if policy is EdgePolicy.CONSERVATIVE:
        # bin i decodes iff its lower edge >= g
        return int(np.searchsorted(edges[:-1], g, side="left"))
    # bin i decodes iff its upper edge > g
    return int(np.searchsorted(edges[1:], g, side="right"))


def threshold_indices(cm, g0: float, g1: float,
                      policy: EdgePolicy = EdgePolicy.CONSERVATIVE) -> tuple[int, int]:
    if g0 > g1:
        raise InvalidParameterError("g0 must not exceed g1")
    return threshold_index(cm.edges, g0, policy), threshold_index(cm.edges, g1, policy)


def decode(h_idx: int, psi: int, h0: int, h1: int) -> DecodeOutcome:
    cu_ok = h_idx > h0
    bs_ok = h_idx > (h1 if psi else h0)
    return DecodeOutcome(bs_ok, cu_ok)


def decode_table(q: int, h0: int, h1: int) -> np.ndarray:
    """Outcome class (index into ``OUTCOMES``) for every (bin-1, psi)."""
    table = np.empty((q, 2), dtype=np.int8)
    for h in range(1, q + 1):
        for psi in (0, 1):
            table[h - 1, psi] = OUTCOMES.index(decode(h, psi, h0, h1))
    return table
