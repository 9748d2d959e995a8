from cranarq import chain
from cranarq.arq import ProtocolConfig
from cranarq.config import ExperimentConfig, run_point
from cranarq.decode import LinkBudget
from cranarq.fading import build_fsmc
from cranarq.interference import from_rate_burstiness

ALWAYS = LinkBudget(p_tx=1.0, sigma2=1.0, gamma=0.0)  # every bin decodes
NEVER = LinkBudget(p_tx=1.0, sigma2=1.0, gamma=1e12)  # no bin decodes
QUIET = from_rate_burstiness(0.5, 2.0, 0.0)

COMBOS = [(a, p) for a in ("conventional", "cran", "hybrid") for p in ("sw", "gbn", "sr")]


def point(**kw):
    return run_point(ExperimentConfig(**kw))


def solve_pc(pc: ProtocolConfig, lb=ALWAYS, q=1, rho=0.0, im=QUIET, **kw):
    ch = chain.build_chain(build_fsmc(q, rho), im, lb, pc, **kw)
    st = chain.stationary_distribution(ch)
    return ch, st, chain.metrics(ch, st)
