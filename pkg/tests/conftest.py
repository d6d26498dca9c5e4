import itertools
import os
from fractions import Fraction

import pytest

from recsolve.checker import SolverConfig, SolverProcessFailure, resolve_solver
from recsolve.expr import constraint_free_vars, eval_constraint
from recsolve.parser import parse_recurrence

BENCH_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "recsolve", "bench")


def load_bench(name: str):
    with open(os.path.join(BENCH_DIR, f"{name}.rec"), "r", encoding="utf-8") as fh:
        return parse_recurrence(fh.read())


def bench_sidecar(name: str) -> dict:
    import json

    with open(os.path.join(BENCH_DIR, f"{name}.expected.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def solver() -> SolverConfig:
    try:
        return resolve_solver()
    except SolverProcessFailure:
        pytest.skip("no SMT solver available (set RECSOLVE_SOLVER or install z3)")


def grid_points(constraint, arg_names, lo=0, hi=12):
    """All integer tuples in the box satisfying the constraint: the
    brute-force domain used by sweep oracles."""
    out = []
    for p in itertools.product(range(lo, hi + 1), repeat=len(arg_names)):
        env = {n: Fraction(v) for n, v in zip(arg_names, p)}
        if eval_constraint(constraint, env):
            out.append(p)
    return out


def brute_entails(hyp, concl, lo=-4, hi=16):
    """Entailment by enumeration over a small integer box; an independent
    stand-in for the SMT-backed domain checker in unit tests."""
    names = sorted(constraint_free_vars(hyp) | constraint_free_vars(concl))
    for p in itertools.product(range(lo, hi + 1), repeat=len(names)):
        env = {n: Fraction(v) for n, v in zip(names, p)}
        if eval_constraint(hyp, env) and not eval_constraint(concl, env):
            return False
    return True
