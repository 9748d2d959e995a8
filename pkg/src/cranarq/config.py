"""Experiment configuration, single-point solves and parameter sweeps."""
from __future__ import annotations

import dataclasses
import functools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from importlib import resources

from . import chain as chain_mod
from . import montecarlo
from .arq import Architecture, Protocol, ProtocolConfig
from .decode import EdgePolicy, LinkBudget
from .errors import ConfigError
from .fading import build_fsmc
from .interference import from_rate_burstiness

ENV_PREFIX = "CRANARQ_"

CSV_COLUMNS = ("architecture", "protocol", "sir_db", "delta", "window", "throughput",
               "efficiency", "tx_fraction", "states", "residual", "solve_ms")
SIM_COLUMNS = CSV_COLUMNS + ("throughput_stderr", "efficiency_stderr", "slots", "seed")
SWEEP_AXES = ("sir_db", "delta")


@dataclass(frozen=True)
class ExperimentConfig:
    """One operating point. dB fields stay in dB here; models get linear values.

    ``window`` defaults to ``delta`` (W = delta) and does not apply to
    stop-and-wait, whose window is always 1. ``sir_db = None`` means no
    interference.
    """

    protocol: str = "sw"
    architecture: str = "conventional"
    q: int = 8
    rho: float = 0.3
    p_db: float = 30.0
    sigma2: float = 1.0
    gamma_db: float = 10.0
    sir_db: float | None = 10.0
    e_int: float = 0.6
    b_int: float = 6.0
    alpha: float = 0.5
    b_max: int = 1
    delta: int = 5
    window: int | None = None
    seed: int | None = None
    mc_slots: int = montecarlo.DEFAULT_SLOTS
    mc_warmup: int = montecarlo.DEFAULT_WARMUP
    edge_policy: str = "conservative"
    window_mode: str = "outstanding"
    fsmc_tol: float = 1e-8
    solver_tol: float = 1e-12
    state_cap: int = chain_mod.DEFAULT_STATE_CAP

    def __post_init__(self):
        try:
            Protocol(self.protocol)
            Architecture(self.architecture)
            EdgePolicy(self.edge_policy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.architecture != "conventional" and not (isinstance(self.delta, int) and self.delta >= 1):
            raise ConfigError(f"delta must be an integer >= 1 for {self.architecture}: CU feedback "
                              f"arrives after \u0394 \u2265 1 time slots (got {self.delta!r})")
        # surface every model-level feasibility error at parse time
        self.protocol_config()
        self.interference()

    def protocol_config(self) -> ProtocolConfig:
        window = None if self.protocol == "sw" else self.window
        return ProtocolConfig(self.protocol, self.architecture, delta=self.delta, window=window,
                              b_max=self.b_max, alpha=self.alpha, window_mode=self.window_mode)

    def link_budget(self) -> LinkBudget:
        return LinkBudget.from_db(self.p_db, self.sigma2, self.gamma_db, self.sir_db)

    def interference(self):
        return from_rate_burstiness(self.e_int, self.b_int, self.link_budget().i_power)

    def channel(self):
        return _channel(self.q, self.rho, self.fsmc_tol)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@functools.lru_cache(maxsize=32)
def _channel(q, rho, tol):
    return build_fsmc(q, rho, tol)


def _coerce(name: str, value):
    if name == "sir_db" and (value is None or value in ("inf", "none", "null")):
        return None
    ftype = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    if value is None:
        return None
    if "int" in ftype and "float" not in ftype:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, str):
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if "float" in ftype:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be a number, got {value!r}") from None
    return str(value)


def from_mapping(doc: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown configuration field(s): {', '.join(unknown)}")
    values = {k: _coerce(k, v) for k, v in doc.items()}
    if base is None:
        return ExperimentConfig(**values)
    return base.replace(**values)


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse a JSON object of configuration fields; missing fields take defaults."""
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed configuration document: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a JSON object")
    return from_mapping(doc, base)


def env_overrides(environ=None) -> dict:
    """Fields set through ``CRANARQ_<FIELD>`` variables (values parsed as JSON when possible)."""
    environ = os.environ if environ is None else environ
    out = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX) or key == ENV_PREFIX + "PARALLEL":
            continue
        name = key[len(ENV_PREFIX):].lower()
        try:
            out[name] = json.loads(raw)
        except json.JSONDecodeError:
            out[name] = raw
    return out


def preset_names() -> list[str]:
    files = resources.files("cranarq").joinpath("presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


def load_preset(name: str) -> ExperimentConfig:
    path = resources.files("cranarq").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return parse_config(path.read_text())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return repr(v)
        return f"{v:.12g}"
    return str(v)


def format_row(row: dict, columns=CSV_COLUMNS) -> str:
    return ",".join(_fmt(row[c]) for c in columns)


def run_point(cfg: ExperimentConfig) -> dict:
    t0 = time.perf_counter()
    ch = chain_mod.build_chain(cfg.channel(), cfg.interference(), cfg.link_budget(),
                               cfg.protocol_config(), cap=cfg.state_cap,
                               edge_policy=EdgePolicy(cfg.edge_policy))
    st = chain_mod.stationary_distribution(ch, tol=cfg.solver_tol)
    m = chain_mod.metrics(ch, st)
    pc = ch.cfg
    return {
        "architecture": pc.architecture.value, "protocol": pc.protocol.value,
        "sir_db": cfg.sir_db, "delta": cfg.delta, "window": pc.window,
        "throughput": m.throughput, "efficiency": m.efficiency, "tx_fraction": m.tx_fraction,
        "states": ch.n_states, "residual": st.residual,
        "solve_ms": round(1e3 * (time.perf_counter() - t0), 1),
    }


def sweep_configs(cfg: ExperimentConfig, axis: str, values, combos=None) -> list[ExperimentConfig]:
    """Value-major list of configs; ``combos`` is a list of (architecture, protocol)."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    combos = combos or [(cfg.architecture, cfg.protocol)]
    out = []
    for v in values:
        for arch, proto in combos:
            out.append(from_mapping({axis: v, "architecture": arch, "protocol": proto}, cfg))
    return out


def run_sweep(cfg: ExperimentConfig, axis: str, values, combos=None, parallel: int = 1) -> list[dict]:
    cfgs = sweep_configs(cfg, axis, values, combos)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(run_point, cfgs))
    return [run_point(c) for c in cfgs]


def run_simulate(cfg: ExperimentConfig, continuous: bool = False) -> dict:
    seed = 0 if cfg.seed is None else cfg.seed
    row = run_point(cfg)
    if continuous:
        est = montecarlo.simulate_continuous(cfg.rho, cfg.interference(), cfg.link_budget(),
                                             cfg.protocol_config(), seed=seed,
                                             slots=cfg.mc_slots, warmup=cfg.mc_warmup)
    else:
        est = montecarlo.simulate_chain_sampled(cfg.channel(), cfg.interference(),
                                                cfg.link_budget(), cfg.protocol_config(),
                                                seed=seed, slots=cfg.mc_slots,
                                                warmup=cfg.mc_warmup,
                                                edge_policy=EdgePolicy(cfg.edge_policy))
    row.update(throughput=est.throughput_mean, efficiency=est.efficiency_mean,
               throughput_stderr=est.throughput_stderr, efficiency_stderr=est.efficiency_stderr,
               slots=est.slots, seed=est.seed)
    return row
