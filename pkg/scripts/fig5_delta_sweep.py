"""Throughput against fronthaul latency delta = 1..10 at SIR = 10 dB, W = delta."""
import argparse
import pathlib

from cranarq import config as C

COMBOS = [(a, p) for a in ("cran", "hybrid") for p in ("sw", "gbn", "sr")]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results"))
    ap.add_argument("--max-delta", type=int, default=10)
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    base = C.load_preset("fig5")
    deltas = list(range(1, args.max_delta + 1))
    rows = C.run_sweep(base, "delta", deltas, COMBOS, args.parallel)
    conv = C.run_point(base.replace(architecture="conventional"))
    path = args.out / "fig5_delta.csv"
    with path.open("w") as fh:
        fh.write(",".join(C.CSV_COLUMNS) + "\n")
        fh.writelines(C.format_row(r) + "\n" for r in rows + [conv])
    print(f"{path}: {len(rows) + 1} rows")
    print(f"  conventional (any delta) {conv['throughput']:.4f}")
    for arch, proto in COMBOS:
        thr = [r["throughput"] for r in rows if (r["architecture"], r["protocol"]) == (arch, proto)]
        print(f"  {arch:6s} {proto:3s} " + " ".join(f"{t:.4f}" for t in thr))


if __name__ == "__main__":
    main()
