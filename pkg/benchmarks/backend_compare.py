"""Compare the jitted and pure-numpy backends on the benchmark CLI.

Runs `sbtensor bench` once per backend in a subprocess (the backend is
fixed at import time by SBTENSOR_BACKEND) and merges the two CSVs into one
table with a leading `backend` column.

    python3 benchmarks/backend_compare.py --case 1.3 --sizes 32 64 128 \
        --out backends.csv
"""
import argparse
import csv
import os
import subprocess
import sys
import tempfile


def run_bench(backend, args):
    env = dict(os.environ, SBTENSOR_BACKEND=backend)
    with tempfile.NamedTemporaryFile(suffix=".csv", delete=False) as tmp:
        path = tmp.name
    cmd = [sys.executable, "-m", "sbtensor.cli", "bench",
           "--case", args.case,
           "--order-a", str(args.order_a), "--order-b", str(args.order_b),
           "--sizes", *map(str, args.sizes),
           "--strategies", args.strategies,
           "--reps", str(args.reps), "--seed", str(args.seed),
           "--csv", path]
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        raise SystemExit(f"bench failed under {backend}:\n{proc.stderr}")
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    os.unlink(path)
    for row in rows:
        row["backend"] = backend
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--case", default="1.3")
    parser.add_argument("--order-a", type=int, default=2)
    parser.add_argument("--order-b", type=int, default=3)
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[16, 32, 64])
    parser.add_argument("--strategies", default="batched,conventional")
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--backends", nargs="+",
                        default=["numba", "numpy"])
    parser.add_argument("--out", default="backend_compare.csv")
    args = parser.parse_args(argv)

    rows = []
    for backend in args.backends:
        rows.extend(run_bench(backend, args))
    fields = ["backend"] + [k for k in rows[0] if k != "backend"]
    with open(args.out, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(",".join(str(row[k]) for k in fields))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
