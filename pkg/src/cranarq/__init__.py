"""Markov-chain and Monte Carlo analysis of ARQ over conventional, C-RAN and hybrid C-RAN uplinks."""
from .arq import Architecture, Protocol, ProtocolConfig
from .chain import build_chain, metrics, solve, stationary_distribution
from .config import ExperimentConfig, parse_config, run_point, run_simulate, run_sweep
from .decode import EdgePolicy, LinkBudget
from .fading import build_fsmc
from .interference import from_rate_burstiness, rate_burstiness

__all__ = [
    "Architecture", "Protocol", "ProtocolConfig", "build_chain", "metrics", "solve",
    "stationary_distribution", "ExperimentConfig", "parse_config", "run_point", "run_simulate",
    "run_sweep", "EdgePolicy", "LinkBudget", "build_fsmc", "from_rate_burstiness",
    "rate_burstiness",
]
