"""Throughput and efficiency against SIR for all nine architecture/protocol pairs.

Runs both the caption (delta=2) and body-text (delta=5) parameter sets and
writes one CSV per preset.
"""
import argparse
import pathlib

from cranarq import config as C

COMBOS = [(a, p) for a in ("conventional", "cran", "hybrid") for p in ("sw", "gbn", "sr")]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results"))
    ap.add_argument("--values", default="-10,-5,0,5,10,15,20,25,30,35,40")
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    values = [float(v) for v in args.values.split(",")]
    for preset in ("fig34_caption", "fig34_text"):
        rows = C.run_sweep(C.load_preset(preset), "sir_db", values, COMBOS, args.parallel)
        path = args.out / f"{preset}_sir.csv"
        with path.open("w") as fh:
            fh.write(",".join(C.CSV_COLUMNS) + "\n")
            fh.writelines(C.format_row(r) + "\n" for r in rows)
        print(f"{path}: {len(rows)} rows")
        for arch, proto in COMBOS:
            thr = [r["throughput"] for r in rows if (r["architecture"], r["protocol"]) == (arch, proto)]
            print(f"  {arch:12s} {proto:3s} " + " ".join(f"{t:.4f}" for t in thr))


if __name__ == "__main__":
    main()
