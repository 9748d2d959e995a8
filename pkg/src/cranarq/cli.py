"""Command line: ``cranarq {solve,sweep,simulate,chain-info}``."""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys

import numpy as np

from . import chain as chain_mod
from . import config as C
from .decode import EdgePolicy
from .errors import CranArqError, exit_code_for

ALL_COMBOS = [(a, p) for a in ("conventional", "cran", "hybrid") for p in ("sw", "gbn", "sr")]


def _values(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if ".." in tok:
            lo, hi = tok.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif tok:
            out.append(float(tok) if any(c in tok for c in ".eE") else int(tok))
    return out


def _combos(args, cfg) -> list:
    archs = args.architectures.split(",") if args.architectures else None
    protos = args.protocols.split(",") if args.protocols else None
    if archs is None and protos is None:
        return [(cfg.architecture, cfg.protocol)]
    archs = archs or [cfg.architecture]
    protos = protos or [cfg.protocol]
    return [(a, p) for a in archs for p in protos]


def load_config(args) -> C.ExperimentConfig:
    cfg = C.load_preset(args.preset) if args.preset else C.ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            cfg = C.parse_config(fh.read(), cfg)
    cfg = C.from_mapping(C.env_overrides(), cfg)
    if getattr(args, "set", None):
        cfg = C.from_mapping(dict(_kv(s) for s in args.set), cfg)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _kv(text: str):
    import json
    key, _, raw = text.partition("=")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _write_rows(rows, columns, out, timing=True):
    with (open(out, "w", newline="") if out and out != "-" else contextlib.nullcontext(sys.stdout)) as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            if not timing:
                r = dict(r, solve_ms=None)
            fh.write(C.format_row(r, columns) + "\n")


def cmd_solve(args):
    cfg = load_config(args)
    _write_rows([C.run_point(cfg)], C.CSV_COLUMNS, args.out, not args.no_timing)


def cmd_sweep(args):
    cfg = load_config(args)
    parallel = args.parallel or int(os.environ.get(C.ENV_PREFIX + "PARALLEL", "1"))
    rows = C.run_sweep(cfg, args.axis, _values(args.values), _combos(args, cfg), parallel)
    _write_rows(rows, C.CSV_COLUMNS, args.out, not args.no_timing)


def cmd_simulate(args):
    cfg = load_config(args)
    _write_rows([C.run_simulate(cfg, continuous=args.continuous)], C.SIM_COLUMNS, args.out,
                not args.no_timing)


def cmd_chain_info(args):
    cfg = load_config(args)
    ch = chain_mod.build_chain(cfg.channel(), cfg.interference(), cfg.link_budget(),
                               cfg.protocol_config(), cap=cfg.state_cap,
                               edge_policy=EdgePolicy(cfg.edge_policy))
    st = chain_mod.stationary_distribution(ch, tol=cfg.solver_tol)
    h0, h1 = ch.thresholds
    lines = [
        f"states {ch.n_states}",
        f"protocol_states {len(ch.table.states)}",
        f"recurrent_states {len(ch.recurrent)}",
        f"scc {ch.n_scc}",
        f"period {ch.period()}",
        f"thresholds h0={h0} h1={h1}",
        f"c_thr_total {int(np.sum(ch.c_thr))}",
        f"c_tx_total {int(np.sum(ch.c_tx))}",
        f"residual {st.residual:.3e} ({st.method}, {st.iterations} iterations)",
    ]
    print("\n".join(lines))
    if args.dump:
        with open(args.dump, "w") as fh:
            chain_mod.dump_chain(ch, fh)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cranarq", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--preset", choices=C.preset_names())
        sp.add_argument("--set", action="append", metavar="FIELD=VALUE",
                        help="override one configuration field (repeatable)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="-", help="CSV path, '-' for stdout")
        sp.add_argument("--no-timing", action="store_true",
                        help="leave solve_ms empty so output is byte-reproducible")

    s = sub.add_parser("solve", help="solve one operating point")
    common(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", help="solve a grid along sir_db or delta")
    common(s)
    s.add_argument("--axis", required=True, choices=C.SWEEP_AXES)
    s.add_argument("--values", required=True, help="comma list, ranges as lo..hi")
    s.add_argument("--protocols", help="comma list of sw,gbn,sr")
    s.add_argument("--architectures", help="comma list of conventional,cran,hybrid")
    s.add_argument("--all", dest="all_combos", action="store_true",
                   help="all nine architecture/protocol combinations")
    s.add_argument("--parallel", type=int, default=0)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("simulate", help="Monte Carlo estimate next to the analytic point")
    common(s)
    s.add_argument("--continuous", action="store_true",
                   help="simulate the unquantized gain process instead of the FSMC")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("chain-info", help="state count, SCCs and reward totals")
    common(s)
    s.add_argument("--dump", help="write the full chain in text form")
    s.set_defaults(func=cmd_chain_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "all_combos", False):
        args.architectures = "conventional,cran,hybrid"
        args.protocols = "sw,gbn,sr"
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CranArqError, ValueError, OSError) as exc:
        print(f"cranarq: error: {exc}", file=sys.stderr)
        code = exit_code_for(exc)
        # bad user input that never reached a model is a configuration error
        return 2 if code == 1 and isinstance(exc, (ValueError, OSError)) else code
    return 0
