"""Quantized correlated Rayleigh fading as a finite-state Markov channel.

The power gain h(k) is unit-mean exponential. Consecutive gains come from a
complex Gaussian AR(1) pair with complex correlation sqrt(rho), so ``rho`` is
the correlation coefficient of the *power* gains. The gain axis is cut into
``q`` equal-probability bins and the bin-to-bin transition matrix is obtained
by integrating the bivariate exponential density over each pair of bins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .errors import InvalidParameterError, NumericFailureError

DEFAULT_TOL = 1e-8


def _check_rho(rho: float) -> None:
    if not (0.0 <= rho < 1.0) or math.isnan(rho):
        raise InvalidParameterError(f"rho must lie in [0, 1), got {rho!r}")


def exp_bin_edges(q: int) -> np.ndarray:
    """Edges of ``q`` bins holding 1/q of the unit-mean exponential mass each.

    >>> exp_bin_edges(2)
    array([0.        , 0.69314718,        inf])
    """
    if int(q) != q or q < 1:
        raise InvalidParameterError(f"q must be a positive integer, got {q!r}")
    q = int(q)
    i = np.arange(q + 1, dtype=float)
    with np.errstate(divide="ignore"):
        edges = -np.log1p(-i / q)
    edges[0] = 0.0
    edges[q] = np.inf
    return edges


def bivariate_exp_density(x, y, rho: float):
    """Joint density of two unit-mean exponential gains with power correlation rho.

    f(x, y) = exp(-(x + y) / (1 - rho)) * I0(2 sqrt(rho x y) / (1 - rho)) / (1 - rho)

    Evaluated through the exponentially scaled Bessel function so large
    arguments do not overflow. Accepts scalars or broadcastable arrays.
    """
    _check_rho(rho)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise InvalidParameterError("gains must be nonnegative")
    s = 1.0 - rho
    z = 2.0 * np.sqrt(rho * x * y) / s
    out = np.exp(z - (x + y) / s) * special.i0e(z) / s
    return out if out.ndim else float(out)


def sample_gain_pair(rho: float, rng: np.random.Generator, size=None):
    """Draw correlated power-gain pairs ``(h1, h2)``.

    h1 = |g1|^2, h2 = |sqrt(rho) g1 + sqrt(1 - rho) w|^2 with g1, w i.i.d.
    CN(0, 1). Each marginal is unit-mean exponential and corr(h1, h2) = rho.
    """
    _check_rho(rho)
    shape = () if size is None else size
    g1 = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    g2 = math.sqrt(rho) * g1 + math.sqrt(1.0 - rho) * w
    h1, h2 = np.abs(g1) ** 2, np.abs(g2) ** 2
    if size is None:
        return float(h1), float(h2)
    return h1, h2


def conditional_bin_masses(x: float, edges: np.ndarray, rho: float) -> np.ndarray:
    """P(next gain in each bin | current gain = x).

    Given the current gain x, 2 h' / (1 - rho) is noncentral chi-square with
    2 degrees of freedom and noncentrality 2 rho x / (1 - rho). This is the
    exact inner integral of the bivariate density over each destination bin.
    """
    s = 1.0 - rho
    cdf = stats.ncx2.cdf(2.0 * edges / s, 2, 2.0 * rho * x / s)
    cdf[-1] = 1.0
    return np.diff(cdf)


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Q-state Markov channel; bins are indexed 1..q outside this class."""

    q: int
    rho: float
    edges: np.ndarray
    transition: np.ndarray

    def bin_index(self, gain):
        """1-based bin of a gain (array or scalar); an edge value opens its upper bin."""
        idx = np.searchsorted(self.edges, gain, side="right")
        return np.clip(idx, 1, self.q)

    def stationary(self) -> np.ndarray:
        return np.full(self.q, 1.0 / self.q)


def build_fsmc(q: int, rho: float, tol: float = DEFAULT_TOL) -> ChannelModel:
    """Build the equal-probability FSMC for correlation ``rho``.

    Entry (h, h') equals q times the joint mass of bin h x bin h'. The outer
    integral over bin h is adaptive (``quad_vec``, max-norm) to absolute
    accuracy ``tol`` per entry; the top bin is truncated where the remaining
    exponential tail falls below tol/10. Rows are then renormalized and the
    correction is required to stay within q * tol.
    """
    edges = exp_bin_edges(q)
    _check_rho(rho)
    if not tol > 0:
        raise InvalidParameterError(f"tol must be positive, got {tol!r}")
    q = int(q)
    if q == 1:
        return ChannelModel(1, float(rho), edges, np.ones((1, 1)))
    if rho == 0.0:
        return ChannelModel(q, 0.0, edges, np.full((q, q), 1.0 / q))

    x_max = -math.log(tol / 10.0)
    P = np.empty((q, q))
    for h in range(q):
        lo = edges[h]
        hi = min(edges[h + 1], max(x_max, lo + 1.0))

        def integrand(x):
            return math.exp(-x) * conditional_bin_masses(x, edges, rho)

        res = integrate.quad_vec(integrand, lo, hi, epsabs=tol / q, epsrel=0.0,
                                 norm="max", limit=2000, full_output=True)
        val, err, info = res
        if not info.success or err > tol / q:
            bad = int(np.argmax(np.abs(val)))
            raise NumericFailureError(
                f"FSMC quadrature did not converge for bin pair ({h + 1}, {bad + 1}), "
                f"error estimate {err:.3g}")
        row = q * val
        correction = abs(row.sum() - 1.0)
        if correction > q * tol:
            raise NumericFailureError(
                f"row {h + 1} of the FSMC kernel is off by {correction:.3g} (> q*tol)")
        P[h] = row / row.sum()
    np.clip(P, 0.0, 1.0, out=P)
    P /= P.sum(axis=1, keepdims=True)
    return ChannelModel(q, float(rho), edges, P)
