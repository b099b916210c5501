"""Command-line front end.

Subcommands: plan, contract, cases, bench, tucker.  Exit codes: 0 success,
1 file I/O error, 2 parse/plan/extent error, 3 verification failure.

Expression grammar:

    C[<labels>] = <alpha>? A[<labels>] * B[<labels>] (+ <beta> C[<labels>])?

Labels are single lowercase letters; omitted alpha defaults to 1, an omitted
beta term to beta = 0.
"""
from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time
from dataclasses import asdict

import numpy as np

from . import dtns
from .layout import DenseTensor, Layout
from .notation import ContractionError, ContractionSpec, parse_contraction
from .planner import (PlanError, enumerate_cases, execute_plan, find_case,
                      plan_batched_gemv, plan_single_mode, render_plan,
                      resolved_kernel_args)
from .reference import EvalCounters, contract_conventional, contract_naive
from .tucker import hooi, tucker_reconstruct

EXIT_OK = 0
EXIT_IO = 1
EXIT_PARSE = 2
EXIT_VERIFY = 3


class _Splitmix64:
    """Seeded 64-bit PRNG; uniform doubles in [-1, 1]."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return 2.0 * ((self.next_u64() >> 11) * 2.0 ** -53) - 1.0

    def fill(self, buf: np.ndarray) -> None:
        for i in range(buf.size):
            buf[i] = self.uniform()


def random_tensor(layout: Layout, rng: _Splitmix64) -> DenseTensor:
    t = DenseTensor.zeros(layout)
    rng.fill(t.data)
    return t


def _parse_dims(text: str) -> dict[str, int]:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        label, _, value = part.partition("=")
        label = label.strip()
        if not value or len(label) != 1 or not label.islower():
            raise ValueError(f"bad dims entry {part!r}; expected label=extent")
        out[label] = int(value)
        if out[label] < 1:
            raise ValueError(f"extent for {label!r} must be positive")
    return out


def _layouts_for(spec: ContractionSpec, ext: dict[str, int]):
    missing = (set(spec.labels_a) | set(spec.labels_b)) - set(ext)
    if missing:
        raise ValueError(f"--dims missing labels: {sorted(missing)}")
    la = Layout.packed([ext[l] for l in spec.labels_a])
    lb = Layout.packed([ext[l] for l in spec.labels_b])
    lc = Layout.packed([ext[l] for l in spec.labels_c] or [1])
    return la, lb, lc


def _max_rel_err(got: DenseTensor, want: DenseTensor) -> float:
    denom = float(np.max(np.abs(want.data)))
    if denom == 0.0:
        return float(np.max(np.abs(got.data)))
    return float(np.max(np.abs(got.data - want.data)) / denom)


# ---------------------------------------------------------------------------


def cmd_plan(args) -> int:
    try:
        spec = parse_contraction(args.expr)
        ext = _parse_dims(args.dims)
        la, lb, lc = _layouts_for(spec, ext)
        plan = plan_single_mode(spec, la, lb, lc)
    except (ContractionError, PlanError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    print(f"strategy: {plan.strategy}")
    print(render_plan(plan))
    ka = resolved_kernel_args(plan, alpha=spec.alpha, beta=spec.beta)
    if ka is not None:
        print("kernel args:")
        for key, value in asdict(ka).items():
            print(f"  {key} = {value}")
    return EXIT_OK


def _run_strategy(strategy, spec, a, b, alpha, beta, c, threads):
    counters = EvalCounters()
    if strategy in ("auto", "batched", "extended"):
        plan = plan_single_mode(spec, a.layout, b.layout, c.layout)
        if strategy == "extended" and plan.strategy != "extended-batched":
            raise PlanError(f"extended strategy does not apply: plan is "
                            f"{plan.strategy}")
        t0 = time.perf_counter()
        execute_plan(plan, a, b, alpha, beta, c, threads=threads,
                     counters=counters)
        counters.elapsed = time.perf_counter() - t0
    elif strategy == "conventional":
        counters = contract_conventional(spec, a, b, alpha, beta, c,
                                         policy="opt")
    elif strategy == "batched-gemv":
        plan = plan_batched_gemv(spec, a.layout, b.layout, c.layout)
        t0 = time.perf_counter()
        execute_plan(plan, a, b, alpha, beta, c, counters=counters)
        counters.elapsed = time.perf_counter() - t0
    elif strategy == "naive":
        t0 = time.perf_counter()
        contract_naive(spec, a, b, alpha, beta, c)
        counters.elapsed = time.perf_counter() - t0
    else:
        raise PlanError(f"unknown strategy {strategy!r}")
    return counters


def cmd_contract(args) -> int:
    try:
        spec = parse_contraction(args.expr)
    except ContractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        a = dtns.load(args.a)
        b = dtns.load(args.b)
        c_init = dtns.load(args.c_in) if args.c_in else None
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except dtns.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    alpha = args.alpha if args.alpha is not None else spec.alpha
    beta = args.beta if args.beta is not None else spec.beta
    try:
        ext = {}
        for labels, t in ((spec.labels_a, a), (spec.labels_b, b)):
            if len(labels) != t.layout.order:
                raise PlanError(f"operand order {t.layout.order} does not "
                                f"match {len(labels)} labels")
            for lab, d in zip(labels, t.layout.dims):
                if ext.setdefault(lab, d) != d:
                    raise PlanError(f"extent mismatch for label {lab!r}")
        lc = Layout.packed([ext[l] for l in spec.labels_c] or [1])
        if c_init is not None:
            if c_init.layout != lc:
                raise PlanError("provided C has the wrong extents")
            c = c_init
        else:
            c = DenseTensor.zeros(lc)
        _run_strategy(args.strategy, spec, a, b, alpha, beta, c, args.threads)
    except (PlanError, ContractionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    if args.verify:
        # c was mutated in place; reload the beta term for the oracle run
        cref = dtns.load(args.c_in) if c_init is not None else DenseTensor.zeros(lc)
        contract_naive(spec, a, b, alpha, beta, cref)
        err = _max_rel_err(c, cref)
        print(f"max relative error vs naive: {err:.3e}")
        if err > 1e-12:
            print("error: verification failed", file=sys.stderr)
            return EXIT_VERIFY
    try:
        dtns.dump(c, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_cases(args) -> int:
    try:
        cases = enumerate_cases(args.order_a, args.order_b)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    rng = _Splitmix64(args.seed)
    failures = 0
    for case in cases:
        line = (f"{case.case_id:6s} C[{''.join(case.labels_c)}] = "
                f"A[{''.join(case.labels_a)}] B[{''.join(case.labels_b)}]  "
                f"{case.classification}")
        if args.verify:
            spec = ContractionSpec(case.labels_a, case.labels_b, case.labels_c)
            ext = {l: args.dim for l in set(case.labels_a) | set(case.labels_b)}
            la, lb, lc = _layouts_for(spec, ext)
            a = random_tensor(la, rng)
            b = random_tensor(lb, rng)
            c = DenseTensor.zeros(lc)
            cref = DenseTensor.zeros(lc)
            plan = plan_single_mode(spec, la, lb, lc)
            execute_plan(plan, a, b, 1.0, 0.0, c, threads=args.threads)
            contract_naive(spec, a, b, 1.0, 0.0, cref)
            err = _max_rel_err(c, cref)
            line += f"  err={err:.3e}"
            if err > 1e-12:
                failures += 1
                line += "  FAIL"
        print(line)
    counts = {}
    for case in cases:
        counts[case.classification] = counts.get(case.classification, 0) + 1
    print(f"total {len(cases)}  " +
          "  ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    if failures:
        print(f"error: {failures} cases failed verification", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


BENCH_COLUMNS = ("case", "strategy", "m", "n", "p", "k", "reps", "median_s",
                 "transposes", "bytes_copied", "max_rel_err")


def cmd_bench(args) -> int:
    try:
        case = find_case(args.order_a, args.order_b, args.case)
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    sizes = sorted(args.sizes)
    strategies = args.strategies.split(",")
    rng = _Splitmix64(args.seed)
    spec = ContractionSpec(case.labels_a, case.labels_b, case.labels_c)
    rows = []
    for size in sizes:
        ext = {l: size for l in set(case.labels_a) | set(case.labels_b)}
        la, lb, lc = _layouts_for(spec, ext)
        a = random_tensor(la, rng)
        b = random_tensor(lb, rng)
        cref = None
        if args.verify:
            cref = DenseTensor.zeros(lc)
            contract_naive(spec, a, b, 1.0, 0.0, cref)
        for strategy in strategies:
            row = {"case": case.case_id, "strategy": strategy,
                   "m": ext.get("m", 1), "n": ext.get("n", 1),
                   "p": ext.get("p", 1), "k": ext.get("k", 1),
                   "reps": args.reps}
            try:
                c = DenseTensor.zeros(lc)
                _run_strategy(strategy, spec, a, b, 1.0, 0.0, c, args.threads)
                times = []
                counters = None
                for _ in range(args.reps):
                    c = DenseTensor.zeros(lc)
                    counters = _run_strategy(strategy, spec, a, b, 1.0, 0.0, c,
                                             args.threads)
                    times.append(counters.elapsed)
                row["median_s"] = f"{statistics.median(times):.6e}"
                row["transposes"] = counters.transpositions
                row["bytes_copied"] = counters.bytes_copied
                if cref is not None:
                    row["max_rel_err"] = f"{_max_rel_err(c, cref):.3e}"
                else:
                    row["max_rel_err"] = ""
            except PlanError:
                # strategy does not apply to this case: mark and keep going
                row.update(median_s="", transposes="", bytes_copied="",
                           max_rel_err="skipped")
            rows.append(row)
    try:
        with open(args.csv, "w", newline="", encoding="ascii") as f:
            writer = csv.DictWriter(f, fieldnames=BENCH_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for row in rows:
        print(",".join(str(row[c]) for c in BENCH_COLUMNS))
    return EXIT_OK


def cmd_tucker(args) -> int:
    try:
        t = dtns.load(args.input)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except dtns.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    ranks = tuple(args.ranks)
    try:
        model = hooi(t, ranks, max_iters=args.iters)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    prefix = args.out_prefix
    try:
        dtns.dump(model.core, f"{prefix}_G.dtns")
        for name, u in zip("ABCDEFGH", model.factors):
            dtns.dump(DenseTensor.from_array(u), f"{prefix}_{name}.dtns")
        with open(f"{prefix}_fit.csv", "w", newline="", encoding="ascii") as f:
            writer = csv.writer(f)
            writer.writerow(["iter", "relative_error"])
            for i, fit in enumerate(model.fit_history, start=1):
                writer.writerow([i, f"{1.0 - fit:.17g}"])
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    rec = tucker_reconstruct(model)
    err = _max_rel_err(rec, t)
    print(f"iterations: {model.iterations}")
    print(f"final relative error: {1.0 - model.fit_history[-1]:.6e}")
    print(f"reconstruction max relative error: {err:.6e}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbtensor",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--verify", action="store_true")

    p = sub.add_parser("plan", help="print the evaluation plan for an expression")
    p.add_argument("expr")
    p.add_argument("--dims", required=True, help="label=extent,... for all labels")
    common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("contract", help="evaluate a contraction on DTNS1 files")
    p.add_argument("expr")
    p.add_argument("--a", required=True, help="DTNS1 file for A")
    p.add_argument("--b", required=True, help="DTNS1 file for B")
    p.add_argument("--c-in", default=None, help="DTNS1 file for the beta term")
    p.add_argument("--out", required=True, help="output DTNS1 file")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--strategy", default="auto",
                   choices=["auto", "batched", "extended", "conventional",
                            "batched-gemv", "naive"])
    common(p)
    p.set_defaults(func=cmd_contract)

    p = sub.add_parser("cases", help="enumerate single-mode contraction cases")
    p.add_argument("order_a", type=int)
    p.add_argument("order_b", type=int)
    p.add_argument("--dim", type=int, default=6, help="extent used with --verify")
    common(p)
    p.set_defaults(func=cmd_cases)

    p = sub.add_parser("bench", help="time evaluation strategies, write CSV")
    p.add_argument("--case", required=True, help="case id, e.g. 1.3")
    p.add_argument("--order-a", type=int, default=2)
    p.add_argument("--order-b", type=int, default=3)
    p.add_argument("--sizes", type=int, nargs="+", required=True)
    p.add_argument("--strategies", default="batched,conventional")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--csv", required=True)
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tucker", help="Tucker decomposition of a DTNS1 tensor")
    p.add_argument("input")
    p.add_argument("--ranks", type=int, nargs="+", required=True)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--out-prefix", required=True)
    common(p)
    p.set_defaults(func=cmd_tucker)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
