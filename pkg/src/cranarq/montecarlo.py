"""Slot-by-slot simulation of the same sender automaton.

Two drivers: one samples the quantized channel from the FSMC kernel (the
empirical counterpart of the analytic chain), the other runs the continuous
correlated Rayleigh gain process and applies the gain thresholds directly.
Both estimate throughput and efficiency with non-overlapping batch means.

Random streams come from numpy's PCG64 seeded by a SeedSequence built from
the user seed and a SHA-256 digest of the configuration, so a run is
reproducible bit for bit and parallel sweeps do not share streams.
"""
from __future__ import annotations

import bisect
import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from . import arq
from .arq import ProtocolConfig
from .decode import OUTCOMES, EdgePolicy, LinkBudget, decode_table, gain_thresholds, threshold_indices
from .errors import InternalInvariantError, InvalidParameterError
from .fading import ChannelModel, _check_rho
from .interference import InterferenceModel

DEFAULT_SLOTS = 10**6
DEFAULT_WARMUP = 10**4
DEFAULT_BATCHES = 50


@dataclass(frozen=True)
class SimEstimate:
    throughput_mean: float
    throughput_stderr: float
    efficiency_mean: float | None
    efficiency_stderr: float | None
    slots: int
    warmup: int
    seed: int


def config_digest(*parts) -> list[int]:
    h = hashlib.sha256(repr(parts).encode()).digest()
    return [int.from_bytes(h[i:i + 4], "little") for i in range(0, 16, 4)]


def make_rng(seed: int, *parts) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *config_digest(*parts)])
    return np.random.Generator(np.random.PCG64(ss))


def _check_budget(slots, warmup, batches):
    if slots < 1 or warmup < 0 or slots < 10 * warmup:
        raise InvalidParameterError(
            f"need slots >= 10 * warmup and slots >= 1, got slots={slots}, warmup={warmup}")
    if batches < 30 or slots < batches:
        raise InvalidParameterError(f"need at least 30 batches and one slot per batch, got {batches}")


def sample_markov_path(P: np.ndarray, n: int, u: np.ndarray, start: int = 0) -> np.ndarray:
    """Path x[0..n-1] of a finite chain with x[0] = start, driven by uniforms u."""
    cum = [np.cumsum(row).tolist() for row in P]
    for c in cum:
        c[-1] = 1.0 + 1e-12
    path = np.empty(n, dtype=np.int64)
    x = start
    for k in range(n):
        path[k] = x
        x = bisect.bisect_right(cum[x], u[k])
    return path


class _Automaton:
    """Memoized ``arq.step`` over interned states."""

    def __init__(self, cfg: ProtocolConfig):
        self.cfg = cfg
        self.states = [arq.initial_state(cfg)]
        self.index = {self.states[0]: 0}
        self.succ = [[None] * 6]

    def next(self, i: int, cls: int, arrival: int):
        slot = cls * 2 + arrival
        r = self.succ[i][slot]
        if r is None:
            nxt, rew = arq.step(self.states[i], self.cfg, OUTCOMES[cls], bool(arrival))
            j = self.index.get(nxt)
            if j is None:
                j = self.index[nxt] = len(self.states)
                self.states.append(nxt)
                self.succ.append([None] * 6)
            r = self.succ[i][slot] = (j, rew.delivered, rew.transmitted)
        return r


def run_protocol(cfg: ProtocolConfig, classes: np.ndarray, arrivals: np.ndarray,
                 audit: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Drive the automaton with per-slot outcome classes and arrivals.

    Returns per-slot delivered and transmitted indicators. With ``audit``
    every slot checks the packet accounting identity: packets admitted minus
    packets delivered equals the unaccepted entries still in the window, so
    no packet is ever delivered twice or lost from the window.
    """
    auto = _Automaton(cfg)
    n = len(classes)
    d_out = bytearray(n)
    t_out = bytearray(n)
    cls_l = classes.tolist()
    arr_l = arrivals.tolist()
    i = 0
    admitted = delivered = 0
    for k in range(n):
        prev = i
        i, d, t = auto.next(i, cls_l[k], arr_l[k])
        d_out[k] = d
        t_out[k] = t
        if audit:
            admitted += _admits(auto.states[prev], cfg)
            delivered += d
            pending = sum(1 for e in auto.states[i].window if not e.accepted)
            if admitted - delivered != pending:
                raise InternalInvariantError(
                    f"slot {k}: {admitted} admitted, {delivered} delivered, {pending} pending")
    return (np.frombuffer(bytes(d_out), dtype=np.uint8),
            np.frombuffer(bytes(t_out), dtype=np.uint8))


def _admits(phi, cfg) -> bool:
    window = arq._feedback_phase(phi, cfg)
    pos = arq._next_to_send(window, phi.buffer, cfg)
    return pos is not None and pos == len(window)


def batch_means(delivered: np.ndarray, transmitted: np.ndarray, batches: int):
    n = len(delivered) - len(delivered) % batches
    d = delivered[:n].reshape(batches, -1).sum(axis=1, dtype=np.int64)
    t = transmitted[:n].reshape(batches, -1).sum(axis=1, dtype=np.int64)
    size = n // batches
    thr_b = d / size
    thr = float(delivered.sum(dtype=np.int64)) / len(delivered)
    thr_se = float(thr_b.std(ddof=1) / math.sqrt(batches))
    t_tot = int(transmitted.sum(dtype=np.int64))
    if t_tot == 0:
        return thr, thr_se, None, None
    eff = float(delivered.sum(dtype=np.int64)) / t_tot
    if np.all(t > 0):
        eff_se = float((d / t).std(ddof=1) / math.sqrt(batches))
    else:
        # ratio-estimator (delta method) standard error
        tbar = t.mean()
        eff_se = float(np.sqrt(((d - eff * t) ** 2).sum() / (batches - 1) / batches) / tbar)
    return thr, thr_se, eff, eff_se


def _finish(cfg, classes, arrivals, warmup, slots, batches, seed, audit):
    d, t = run_protocol(cfg, classes, arrivals, audit=audit)
    thr, thr_se, eff, eff_se = batch_means(d[warmup:], t[warmup:], batches)
    return SimEstimate(thr, thr_se, eff, eff_se, slots, warmup, int(seed))


def simulate_chain_sampled(cm: ChannelModel, im: InterferenceModel, lb: LinkBudget,
                           cfg: ProtocolConfig, seed: int = 0, slots: int = DEFAULT_SLOTS,
                           warmup: int = DEFAULT_WARMUP, batches: int = DEFAULT_BATCHES,
                           edge_policy: EdgePolicy = EdgePolicy.CONSERVATIVE,
                           audit: bool = False) -> SimEstimate:
    """Sample the FSMC, the interference chain and arrivals; drive ``arq.step``."""
    _check_budget(slots, warmup, batches)
    rng = make_rng(seed, "fsmc", cm.q, cm.rho, im, lb, cfg, str(edge_policy))
    n = warmup + slots
    u = rng.random((3, n))
    h = sample_markov_path(cm.transition, n, u[0], start=0)
    psi = sample_markov_path(im.transition, n, u[1], start=0)
    arrivals = (u[2] < cfg.alpha).astype(np.int8)
    g0, g1 = gain_thresholds(lb)
    h0, h1 = threshold_indices(cm, g0, g1, edge_policy)
    classes = decode_table(cm.q, h0, h1)[h, psi]
    return _finish(cfg, classes, arrivals, warmup, slots, batches, seed, audit)


def correlated_gains(rho: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary power-gain path from g[k+1] = sqrt(rho) g[k] + sqrt(1-rho) w[k]."""
    _check_rho(rho)
    w = (rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)) / math.sqrt(2.0)
    a, b = math.sqrt(rho), math.sqrt(1.0 - rho)
    # w[0] plays g[-1] so that g[0] is already CN(0, 1)
    g, _ = signal.lfilter([b], [1.0, -a], w[1:], zi=[a * w[0]])
    return np.abs(g) ** 2


def simulate_continuous(rho: float, im: InterferenceModel, lb: LinkBudget, cfg: ProtocolConfig,
                        seed: int = 0, slots: int = DEFAULT_SLOTS, warmup: int = DEFAULT_WARMUP,
                        batches: int = DEFAULT_BATCHES, audit: bool = False) -> SimEstimate:
    """Unquantized reference: thresholds g0/g1 applied to the exact gain process."""
    _check_budget(slots, warmup, batches)
    rng = make_rng(seed, "continuous", rho, im, lb, cfg)
    n = warmup + slots
    gains = correlated_gains(rho, n, rng)
    u = rng.random((2, n))
    psi = sample_markov_path(im.transition, n, u[0], start=0)
    arrivals = (u[1] < cfg.alpha).astype(np.int8)
    g0, g1 = gain_thresholds(lb)
    cu_ok = gains > g0
    bs_ok = np.where(psi == 1, gains > g1, cu_ok)
    # class index into OUTCOMES: FAIL, CU_ONLY, BOTH
    classes = cu_ok.astype(np.int8) + bs_ok.astype(np.int8)
    return _finish(cfg, classes, arrivals, warmup, slots, batches, seed, audit)
