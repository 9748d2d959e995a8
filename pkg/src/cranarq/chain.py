"""Product Markov chain over (channel bin, interference bit, protocol state).

The kernel factors as p_h(h'|h) * p_psi(psi'|psi) * p_phi(phi'|h, psi, phi):
the protocol moves deterministically given the slot's decode outcome (a
function of h and psi) and the Bernoulli(alpha) arrival. Rewards (packets
delivered, packets transmitted) are attached to the source state.
"""
from __future__ import annotations

import functools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from . import arq
from .arq import ProtocolConfig, ProtocolState
from .decode import OUTCOMES, EdgePolicy, LinkBudget, decode_table, gain_thresholds, threshold_indices
from .errors import CapacityError, ConvergenceError, InternalInvariantError, ModelError
from .fading import ChannelModel
from .interference import InterferenceModel

log = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 10**6
DIRECT_SOLVE_LIMIT = 2000


class SystemState(NamedTuple):
    h_idx: int  # 1..q
    psi: int
    phi: ProtocolState


@dataclass(frozen=True)
class ProtocolTable:
    """Tabulated automaton: successor index and rewards per (state, outcome class)."""

    states: list
    successor: np.ndarray  # (n, len(OUTCOMES), 2) -> index, -1 where unexplored
    delivered: np.ndarray  # (n, len(OUTCOMES))
    transmitted: np.ndarray  # (n,)


@functools.lru_cache(maxsize=64)
def protocol_table(cfg: ProtocolConfig, classes: tuple, arrivals: tuple,
                   cap: int = DEFAULT_STATE_CAP) -> ProtocolTable:
    """Enumerate protocol states reachable under the given outcome classes and
    arrival values, in BFS order from the empty state."""
    s0 = arq.initial_state(cfg)
    index = {s0: 0}
    states = [s0]
    succ_rows, deliv_rows, tx = [], [], []
    i = 0
    while i < len(states):
        phi = states[i]
        i += 1
        succ = np.full((len(OUTCOMES), 2), -1, dtype=np.int64)
        deliv = np.zeros(len(OUTCOMES), dtype=np.int8)
        t = int(arq.transmits(phi, cfg))
        for c in classes:
            rewards = set()
            for a in arrivals:
                nxt, rew = arq.step(phi, cfg, OUTCOMES[c], bool(a))
                rewards.add(rew)
                j = index.get(nxt)
                if j is None:
                    j = index[nxt] = len(states)
                    states.append(nxt)
                    if len(states) > cap:
                        raise CapacityError(
                            f"protocol state space exceeds cap {cap}", cap=cap, reached=len(states))
                succ[c, a] = j
            if len(rewards) != 1:
                raise InternalInvariantError(f"reward depends on the arrival in state {phi!r}")
            (rew,) = rewards
            if rew.transmitted != t or rew.delivered > rew.transmitted:
                raise InternalInvariantError(f"inconsistent reward {rew} in state {phi!r}")
            deliv[c] = rew.delivered
        succ_rows.append(succ)
        deliv_rows.append(deliv)
        tx.append(t)
    return ProtocolTable(states, np.array(succ_rows), np.array(deliv_rows),
                         np.array(tx, dtype=np.int8))


@dataclass(eq=False)
class Chain:
    cfg: ProtocolConfig
    q: int
    h_idx: np.ndarray  # 1-based channel bin of every state
    psi: np.ndarray
    phi_idx: np.ndarray  # index into table.states
    table: ProtocolTable
    kernel: sp.csr_matrix
    c_thr: np.ndarray
    c_tx: np.ndarray
    recurrent: np.ndarray  # sorted state indices of the bottom SCC
    n_scc: int
    thresholds: tuple = ()
    build_ms: float = 0.0
    _period: int | None = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.h_idx)

    def state(self, i: int) -> SystemState:
        return SystemState(int(self.h_idx[i]), int(self.psi[i]),
                           self.table.states[self.phi_idx[i]])

    @property
    def states(self) -> list:
        return [self.state(i) for i in range(self.n_states)]

    def key(self, i: int) -> bytes:
        return bytes((int(self.h_idx[i]), int(self.psi[i]))) + arq.state_key(
            self.table.states[self.phi_idx[i]])

    def period(self) -> int:
        if self._period is None:
            self._period = _period(self.kernel[self.recurrent][:, self.recurrent])
        return self._period


def _bfs_product(cm, im, dtab, table, arrivals, cap):
    """Layered BFS over product states; returns arrays in discovery order."""
    q = cm.q
    n_phi = len(table.states)
    Ph, Ppsi = cm.transition, im.transition
    h_next = [np.flatnonzero(Ph[h] > 0) for h in range(q)]
    psi_next = [np.flatnonzero(Ppsi[s] > 0) for s in range(2)]

    def flat(h, s, f):
        return (h * 2 + s) * n_phi + f

    visited = np.zeros(q * 2 * n_phi, dtype=bool)
    start = flat(0, 0, 0)
    visited[start] = True
    order = [np.array([start])]
    frontier = order[0]
    total = 1
    while frontier.size:
        h, rest = np.divmod(frontier, 2 * n_phi)
        s, f = np.divmod(rest, n_phi)
        cls = dtab[h, s]
        # group by (h, psi) so the successor fan-out is a fixed grid
        key = h * 2 + s
        order_idx = np.argsort(key, kind="stable")
        cuts = np.flatnonzero(np.diff(key[order_idx])) + 1
        per_state = []
        for grp in np.split(order_idx, cuts):
            hh, ss = int(h[grp[0]]), int(s[grp[0]])
            nh, ns = h_next[hh], psi_next[ss]
            cols = []
            for a in arrivals:
                fn = table.successor[f[grp], cls[grp], a]
                cols.append((((nh[:, None] * 2 + ns[None, :])[None] * n_phi)
                             + fn[:, None, None]).reshape(len(grp), -1))
            per_state.append((grp, np.concatenate(cols, axis=1)))
        # restore frontier order so discovery order is true BFS order
        width = max(c.shape[1] for _, c in per_state)
        cand = np.full((frontier.size, width), -1, dtype=np.int64)
        for grp, c in per_state:
            cand[grp, :c.shape[1]] = c
        flat_c = cand.ravel()
        flat_c = flat_c[flat_c >= 0]
        uniq, first = np.unique(flat_c, return_index=True)
        new = uniq[~visited[uniq]]
        new_first = first[~visited[uniq]]
        new = new[np.argsort(new_first, kind="stable")]
        visited[new] = True
        total += new.size
        if total > cap:
            raise CapacityError(f"product state space exceeds cap {cap}", cap=cap, reached=total)
        if new.size:
            order.append(new)
        frontier = new
    flat_all = np.concatenate(order)
    h, rest = np.divmod(flat_all, 2 * n_phi)
    s, f = np.divmod(rest, n_phi)
    return flat_all, h, s, f


def build_chain(cm: ChannelModel, im: InterferenceModel, lb: LinkBudget, cfg: ProtocolConfig,
                cap: int = DEFAULT_STATE_CAP,
                edge_policy: EdgePolicy = EdgePolicy.CONSERVATIVE) -> Chain:
    """Enumerate the reachable product chain from (h=1, psi=0, empty protocol state)."""
    t0 = time.perf_counter()
    g0, g1 = gain_thresholds(lb)
    h0, h1 = threshold_indices(cm, g0, g1, edge_policy)
    dtab = decode_table(cm.q, h0, h1)
    classes = tuple(sorted(set(dtab.ravel().tolist())))
    arrivals = tuple(a for a, p in ((0, 1.0 - cfg.alpha), (1, cfg.alpha)) if p > 0)
    table = protocol_table(cfg, classes, arrivals, cap)

    flat_all, h, s, f = _bfs_product(cm, im, dtab, table, arrivals, cap)
    n = flat_all.size
    n_phi = len(table.states)
    lookup = np.full(cm.q * 2 * n_phi, -1, dtype=np.int64)
    lookup[flat_all] = np.arange(n)

    cls = dtab[h, s]
    Ph, Ppsi = cm.transition, im.transition
    p_arr = {0: 1.0 - cfg.alpha, 1: cfg.alpha}
    rows, cols, vals = [], [], []
    hs = np.arange(cm.q)
    for a in arrivals:
        fn = table.successor[f, cls, a]
        for s2 in range(2):
            w = Ppsi[s, s2] * p_arr[a]
            # (n, q) block of successors (h', s2, fn)
            tgt = lookup[((hs[None, :] * 2 + s2) * n_phi) + fn[:, None]]
            prob = Ph[h] * w[:, None]
            mask = prob > 0
            if np.any(tgt[mask] < 0):
                raise InternalInvariantError("successor missing from the enumerated state set")
            r = np.broadcast_to(np.arange(n)[:, None], tgt.shape)
            rows.append(r[mask])
            cols.append(tgt[mask])
            vals.append(prob[mask])
    kernel = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(n, n))
    kernel.sum_duplicates()
    rowsum = np.asarray(kernel.sum(axis=1)).ravel()
    if np.max(np.abs(rowsum - 1.0)) > 1e-12:
        raise InternalInvariantError(f"kernel rows off by {np.max(np.abs(rowsum - 1.0)):.3g}")

    c_thr = table.delivered[f, cls].astype(float)
    c_tx = table.transmitted[f].astype(float)
    recurrent, n_scc = bottom_scc(kernel)
    chain = Chain(cfg=cfg, q=cm.q, h_idx=h + 1, psi=s, phi_idx=f, table=table, kernel=kernel,
                  c_thr=c_thr, c_tx=c_tx, recurrent=recurrent, n_scc=n_scc,
                  thresholds=(h0, h1), build_ms=1e3 * (time.perf_counter() - t0))
    log.debug("built chain: %d states (%d protocol), %d recurrent", n, n_phi, recurrent.size)
    return chain


def bottom_scc(kernel: sp.spmatrix) -> tuple[np.ndarray, int]:
    """Indices of the unique closed communicating class, and the SCC count."""
    n_scc, labels = csgraph.connected_components(kernel, directed=True, connection="strong")
    coo = kernel.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_ = np.zeros(n_scc, dtype=bool)
    open_[labels[coo.row[leaving]]] = True
    bottoms = np.flatnonzero(~open_)
    if bottoms.size != 1:
        raise ModelError(f"chain has {bottoms.size} closed classes; the stationary "
                         "distribution depends on the initial state")
    return np.flatnonzero(labels == bottoms[0]), n_scc


def _period(P: sp.csr_matrix) -> int:
    """Period of an irreducible kernel (gcd of cycle lengths via BFS levels)."""
    n = P.shape[0]
    if n == 0:
        return 1
    level = csgraph.breadth_first_order(P, 0, directed=True, return_predecessors=False)
    dist = np.full(n, -1, dtype=np.int64)
    dist[0] = 0
    indptr, indices = P.indptr, P.indices
    for u in level:
        du = dist[u]
        nbrs = indices[indptr[u]:indptr[u + 1]]
        unset = nbrs[dist[nbrs] < 0]
        dist[unset] = du + 1
    coo = P.tocoo()
    diffs = np.abs(dist[coo.row] + 1 - dist[coo.col])
    return int(np.gcd.reduce(diffs)) if diffs.size else 1


@dataclass(frozen=True)
class StationaryResult:
    pi: np.ndarray
    residual: float
    iterations: int
    method: str


def residual_l1(P: sp.spmatrix, pi: np.ndarray) -> float:
    return float(np.abs(P.T @ pi - pi).sum())


def _direct(P: sp.csr_matrix) -> np.ndarray:
    n = P.shape[0]
    A = (P.T - sp.identity(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[n - 1] = 1.0
    x = spsolve(A.tocsc(), b)
    x = np.clip(np.real(x), 0.0, None)
    return x / x.sum()


def _power(P: sp.csr_matrix, tol: float, max_iters: int, lazy: float,
           x0: np.ndarray | None = None, renorm_every: int = 16) -> tuple[np.ndarray, int, float]:
    n = P.shape[0]
    PT = P.T.tocsr()
    x = np.full(n, 1.0 / n) if x0 is None else x0.copy()
    res = math.inf
    for it in range(1, max_iters + 1):
        y = PT @ x
        if lazy:
            y = (1.0 - lazy) * y + lazy * x
        if it % renorm_every == 0:
            y /= y.sum()
            res = residual_l1(P, y)
            if res <= tol:
                return y, it, res
        x = y
    x /= x.sum()
    return x, max_iters, residual_l1(P, x)


def solve_kernel(P: sp.spmatrix, tol: float = 1e-12, max_iters: int = 200_000,
                 method: str = "auto", lazy: float | None = None) -> StationaryResult:
    """Stationary vector of an irreducible stochastic matrix.

    ``method`` is "direct" (sparse LU of the balance equations), "power", or
    "auto" (direct up to ``DIRECT_SOLVE_LIMIT`` states). Power iteration runs
    the lazy walk (1 - lazy) P + lazy I, which has the same stationary vector.
    The default weight 0.5 matters here: the delta-slot feedback timing makes
    many chains nearly periodic, with eigenvalues of modulus 1 - 1e-5 spread
    around the unit circle, and averaging with the identity pulls them inward.
    """
    P = sp.csr_matrix(P)
    if method == "auto":
        method = "direct" if P.shape[0] <= DIRECT_SOLVE_LIMIT else "power"
    if method == "direct":
        x = _direct(P)
        iters = 0
        res = residual_l1(P, x)
        if res > tol:
            # polish rounding left by the factorization
            x, iters, res = _power(P, tol, max_iters, 0.0, x0=x, renorm_every=1)
    elif method == "power":
        if lazy is None:
            lazy = 0.5
        x, iters, res = _power(P, tol, max_iters, lazy)
    else:
        raise ValueError(f"unknown method {method!r}")
    if res > tol:
        raise ConvergenceError(f"stationary solve stopped at residual {res:.3g} after "
                               f"{iters} iterations", residual=res, iterations=iters)
    return StationaryResult(pi=x, residual=res, iterations=iters, method=method)


def stationary_distribution(chain: Chain, tol: float = 1e-12, max_iters: int = 200_000,
                            method: str = "auto", lazy: float | None = None) -> StationaryResult:
    """Stationary vector over all states, supported on the recurrent class."""
    R = chain.recurrent
    st = solve_kernel(chain.kernel[R][:, R], tol, max_iters, method, lazy)
    pi = np.zeros(chain.n_states)
    pi[R] = st.pi
    return StationaryResult(pi=pi, residual=st.residual, iterations=st.iterations,
                            method=st.method)


@dataclass(frozen=True)
class Metrics:
    throughput: float
    efficiency: float | None
    tx_fraction: float


def metrics(chain: Chain, st: StationaryResult) -> Metrics:
    thr = float(st.pi @ chain.c_thr)
    tx = float(st.pi @ chain.c_tx)
    eff = thr / tx if tx > 0 else None
    return Metrics(throughput=thr, efficiency=eff, tx_fraction=tx)


def solve(cm, im, lb, cfg, **kw) -> tuple[Chain, StationaryResult, Metrics]:
    chain = build_chain(cm, im, lb, cfg, **kw)
    st = stationary_distribution(chain)
    return chain, st, metrics(chain, st)


def dump_chain(chain: Chain, out) -> None:
    """Write the chain as text: one line per state with its canonical key
    (hex: bin, psi, protocol key), rewards, and sparse row ``col:prob``."""
    out.write("# index key c_thr c_tx row\n")
    K = chain.kernel
    for i in range(chain.n_states):
        lo, hi = K.indptr[i], K.indptr[i + 1]
        row = " ".join(f"{j}:{v:.17g}" for j, v in zip(K.indices[lo:hi], K.data[lo:hi]))
        out.write(f"{i} {chain.key(i).hex()} {int(chain.c_thr[i])} {int(chain.c_tx[i])} {row}\n")
