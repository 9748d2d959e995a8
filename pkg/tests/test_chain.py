import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from cranarq import chain
from cranarq.arq import ProtocolConfig
from cranarq.config import ExperimentConfig
from cranarq.decode import LinkBudget
from cranarq.errors import CapacityError, ModelError
from cranarq.fading import build_fsmc
from cranarq.interference import from_rate_burstiness

from helpers import ALWAYS, NEVER, QUIET, solve_pc

DEFAULTS = ExperimentConfig()


def default_chain(protocol, architecture, **kw):
    cfg = DEFAULTS.replace(protocol=protocol, architecture=architecture, **kw)
    return chain.build_chain(cfg.channel(), cfg.interference(), cfg.link_budget(),
                             cfg.protocol_config())


def test_two_state_kernel():
    P = from_rate_burstiness(0.6, 6).transition
    st_ = chain.solve_kernel(P)
    np.testing.assert_allclose(st_.pi, [0.4, 0.6], atol=1e-14)


def test_single_state():
    assert chain.solve_kernel(np.ones((1, 1))).pi.tolist() == [1.0]


@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_doubly_stochastic_uniform(n, seed):
    rng = np.random.default_rng(seed)
    perms = [np.eye(n)[rng.permutation(n)] for _ in range(3)]
    w = rng.dirichlet(np.ones(3))
    P = sum(a * m for a, m in zip(w, perms)) * 0.9 + 0.1 * np.roll(np.eye(n), 1, axis=1)
    for method in ("direct", "power"):
        pi = chain.solve_kernel(P, method=method).pi
        np.testing.assert_allclose(pi, 1 / n, atol=1e-11)


def test_periodic_kernel_power_uses_lazy_walk():
    P = np.roll(np.eye(5), 1, axis=1)
    assert chain._period(sp.csr_matrix(P)) == 5
    st_ = chain.solve_kernel(P, method="power")
    np.testing.assert_allclose(st_.pi, 0.2, atol=1e-12)


def test_two_closed_classes_rejected():
    with pytest.raises(ModelError):
        chain.bottom_scc(sp.csr_matrix(np.eye(2)))


def test_small_hand_enumerated_chain():
    ch, st_, m = solve_pc(ProtocolConfig("sw", "conventional"))
    phis = {s.phi for s in ch.states}
    assert phis == {(0, ()), (1, ())}
    assert ch.n_states <= 4


def test_closed_forms():
    _, _, m = solve_pc(ProtocolConfig("sw", "conventional", alpha=0.5))
    assert m.throughput == pytest.approx(0.5, abs=1e-12)
    assert m.efficiency == pytest.approx(1.0, abs=1e-12)
    _, _, m = solve_pc(ProtocolConfig("sw", "cran", delta=5, alpha=1.0))
    assert m.throughput == pytest.approx(0.2, abs=1e-12)
    assert m.efficiency == pytest.approx(1.0, abs=1e-12)
    _, _, m = solve_pc(ProtocolConfig("gbn", "cran", delta=3), lb=NEVER)
    assert m.throughput == 0.0 and m.efficiency == 0.0 and m.tx_fraction > 0


@pytest.mark.parametrize("g", [0.2, 0.5, 1.5])
def test_iid_channel_saturated_sw(g):
    # rho = 0, alpha = 1: success probability is the mass of bins above g
    q = 8
    lb = LinkBudget(p_tx=1.0, sigma2=1.0, gamma=g)
    _, _, m = solve_pc(ProtocolConfig("sw", "conventional", alpha=1.0), lb=lb, q=q)
    e = build_fsmc(q, 0.0).edges
    k = int(np.searchsorted(e[:-1], g, side="left"))
    assert m.throughput == pytest.approx((q - k) / q, abs=1e-12)


def test_no_zero_entries_and_rows_sum_to_one():
    ch = default_chain("gbn", "hybrid")
    assert np.all(ch.kernel.data > 0)
    np.testing.assert_allclose(np.asarray(ch.kernel.sum(axis=1)).ravel(), 1.0, atol=1e-12)


def test_gbn_cran_golden_state_count():
    ch = default_chain("gbn", "cran")
    assert ch.n_states == 1472
    assert ch.recurrent.size > 0


@pytest.mark.parametrize("proto", ["sw", "gbn", "sr"])
@pytest.mark.parametrize("arch", ["cran", "hybrid"])
def test_lumping_is_exact(proto, arch):
    base = ExperimentConfig(protocol=proto, architecture=arch, delta=3, q=4)
    pcs = [base.protocol_config()]
    pcs.append(ProtocolConfig(pcs[0].protocol, pcs[0].architecture, delta=3, lump=False))
    out = []
    for pc in pcs:
        ch = chain.build_chain(base.channel(), base.interference(), base.link_budget(), pc)
        out.append((ch.n_states, chain.metrics(ch, chain.stationary_distribution(ch))))
    (n1, m1), (n2, m2) = out
    assert n1 <= n2
    assert m1.throughput == pytest.approx(m2.throughput, abs=1e-10)
    assert m1.tx_fraction == pytest.approx(m2.tx_fraction, abs=1e-10)


def test_direct_and_power_agree():
    ch = default_chain("sr", "hybrid")
    a = chain.stationary_distribution(ch, method="direct")
    b = chain.stationary_distribution(ch, method="power")
    assert np.abs(a.pi - b.pi).sum() <= 1e-10
    for s in (a, b):
        assert s.residual <= 1e-12
        assert s.pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_capacity_error():
    with pytest.raises(CapacityError) as info:
        solve_pc(ProtocolConfig("sr", "cran", delta=4), q=4, rho=0.3, lb=LinkBudget(1, 1, 1),
                 cap=50)
    assert info.value.cap == 50


def test_keys_injective_and_dump():
    ch = default_chain("gbn", "hybrid", delta=3)
    keys = [ch.key(i) for i in range(ch.n_states)]
    assert len(set(keys)) == len(keys)
    buf = io.StringIO()
    chain.dump_chain(ch, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == ch.n_states + 1
    i, key, thr, tx, *row = lines[5].split()
    assert bytes.fromhex(key) == ch.key(int(i))
    probs = sum(float(c.split(":")[1]) for c in row)
    assert probs == pytest.approx(1.0, abs=1e-12)


def test_build_is_deterministic():
    a, b = default_chain("sr", "cran"), default_chain("sr", "cran")
    assert [a.key(i) for i in range(a.n_states)] == [b.key(i) for i in range(b.n_states)]
    assert (a.kernel != b.kernel).nnz == 0
