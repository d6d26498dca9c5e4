#!/usr/bin/env python3
"""Chain a solved size recurrence into a dependent cost recurrence.

The size recurrence (bench/size.rec) is solved and verified first; its
closed form is then inlined into the cost recurrence (bench/cost.rec),
whose own closed form contains a variable exponent: the guess stage finds
it exactly, the verifier reports unsupported-operator, and pointwise
evaluation over 0..10 confirms it against 2^(x+1) - 1.

    python scripts/chain_size_cost.py [--seed 0]
"""
import argparse
import sys

from recsolve.checker import resolve_solver
from recsolve.cli import bench_path
from recsolve.parser import parse_recurrence
from recsolve.pipeline import SolveConfig, solve
from recsolve.recurrence import Value, eval_fun, inline_function
from recsolve.recurrence import eval_closed_form


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    cfg = SolveConfig(seed=args.seed, solver=resolve_solver())

    size = parse_recurrence(bench_path("size").read_text())
    size_report = solve(size, cfg, name="size")
    print(f"size: {size_report.closed_form.to_text()}  "
          f"score={size_report.score} verdict={size_report.verdict}")
    if size_report.verdict != "verified":
        print("size recurrence did not verify; aborting", file=sys.stderr)
        return 1

    cost = parse_recurrence(bench_path("cost").read_text())
    chained = inline_function(cost, "s", size_report.closed_form)
    cost_report = solve(chained, cfg, name="cost")
    print(f"cost: {cost_report.closed_form.to_text()}  "
          f"score={cost_report.score} verdict={cost_report.verdict}"
          f" ({cost_report.verdict_reason})")

    ok = True
    for x in range(11):
        expected = 2 ** (x + 1) - 1
        out = eval_fun(chained, (x,))
        got = out.value if isinstance(out, Value) else out
        cf_val = eval_closed_form(cost_report.closed_form, (x,))
        mark = "ok" if got == expected == cf_val else "MISMATCH"
        if mark != "ok":
            ok = False
        print(f"  x={x:2d}  recurrence={got}  closed_form={cf_val}  "
              f"expected={expected}  {mark}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
