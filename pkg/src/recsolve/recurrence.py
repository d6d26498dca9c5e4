"""Recurrence definitions and their deterministic evaluation semantics.

Evaluation follows the first-matching-guard order of the cases (a nested
if-then-else).  The production evaluator is iterative with memoization on
concrete argument tuples, so deeply recursive or non-terminating
definitions hit the configured limits instead of exhausting the Python
stack; a naive recursive evaluator is kept as an independent oracle.
"""
from __future__ import annotations

import math
import sys
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .expr import (
    Add, Call, Ceil, ClosedForm, Const, Constraint, Div, Expr, Floor, Ite,
    Log2Ceil, Max, Min, Mul, Not, Pow, Sub, Var, ceil_log2, conj,
    constraint_free_vars, constraint_to_text, contains_calls, disj,
    eval_constraint, eval_expr, exact_div, exact_pow, free_vars, to_text,
)


class RecurrenceError(Exception):
    pass


class ArityMismatch(RecurrenceError):
    pass


class PreconditionNotCovering(RecurrenceError):
    """The precondition does not entail the disjunction of case guards."""


class GuardFallthroughError(RecurrenceError):
    def __init__(self, point):
        super().__init__(f"no guard matched at {point}")
        self.point = point


class UnknownFunction(RecurrenceError):
    pass


@dataclass(frozen=True)
class Case:
    body: Expr
    guard: Constraint


@dataclass(frozen=True)
class RecurrenceDef:
    name: str
    arg_names: tuple
    precondition: Constraint
    cases: tuple

    def __post_init__(self):
        object.__setattr__(self, "arg_names", tuple(self.arg_names))
        object.__setattr__(self, "cases", tuple(self.cases))
        self._validate()

    @property
    def arity(self) -> int:
        return len(self.arg_names)

    def _validate(self):
        declared = set(self.arg_names)
        rec, closed = False, False
        arities = {self.name: self.arity}
        for i, case in enumerate(self.cases):
            if contains_calls(case.body, self.name):
                rec = True
            else:
                closed = True
            loose = (free_vars(case.body) | constraint_free_vars(case.guard)) - declared
            if loose:
                raise RecurrenceError(
                    f"case {i + 1} uses variables {sorted(loose)} that are not arguments")
            _check_call_arities(case.body, arities)
        loose = constraint_free_vars(self.precondition) - declared
        if loose:
            raise RecurrenceError(f"precondition uses non-argument variables {sorted(loose)}")
        if not rec:
            raise RecurrenceError("no case contains a recursive call")
        if not closed:
            raise RecurrenceError("no case is in closed form")

    def recursive_cases(self) -> list:
        return [c for c in self.cases if contains_calls(c.body, self.name)]

    def base_cases(self) -> list:
        return [c for c in self.cases if not contains_calls(c.body, self.name)]

    def recursive_region(self) -> Constraint:
        """Precondition restricted by the negations of the base-case guards."""
        return conj([self.precondition]
                    + [Not(c.guard) for c in self.base_cases()])

    def guard_disjunction(self) -> Constraint:
        return disj([c.guard for c in self.cases])

    def to_text(self) -> str:
        head = f"def {self.name}({', '.join(self.arg_names)});"
        pre = f"pre {constraint_to_text(self.precondition)};"
        cases = [f"{self.name}({', '.join(self.arg_names)}) = {to_text(c.body)}"
                 f" if {constraint_to_text(c.guard)};" for c in self.cases]
        return "\n".join([head, pre] + cases)


def _check_call_arities(e: Expr, arities: dict):
    if isinstance(e, Call):
        seen = arities.setdefault(e.fname, len(e.args))
        if seen != len(e.args):
            raise ArityMismatch(
                f"{e.fname} called with {len(e.args)} arguments, expected {seen}")
        for a in e.args:
            _check_call_arities(a, arities)
        return
    from .expr import children
    for ch in children(e):
        _check_call_arities(ch, arities)


def foreign_names(rdef: RecurrenceDef) -> set:
    """Function symbols other than the recurrence itself used in the bodies."""
    names: set = set()

    def walk(e: Expr):
        if isinstance(e, Call):
            if e.fname != rdef.name:
                names.add(e.fname)
            for a in e.args:
                walk(a)
            return
        from .expr import children
        for ch in children(e):
            walk(ch)

    for case in rdef.cases:
        walk(case.body)
    return names


def validate_coverage(rdef: RecurrenceDef, entails: Callable[[Constraint, Constraint], bool]):
    """Check the load-time well-formedness condition that the precondition
    entails the disjunction of case guards, via the given entailment oracle."""
    if not entails(rdef.precondition, rdef.guard_disjunction()):
        raise PreconditionNotCovering(
            f"precondition of {rdef.name} does not entail the guard disjunction")


def inline_function(rdef: RecurrenceDef, fname: str, cf: ClosedForm) -> RecurrenceDef:
    """Replace every call to a foreign function by a closed form (used to
    chain a solved size recurrence into a dependent cost recurrence)."""

    def walk(e: Expr) -> Expr:
        if isinstance(e, Call):
            args = tuple(walk(a) for a in e.args)
            if e.fname == fname:
                return cf.instantiate(args)
            return Call(e.fname, args)
        if isinstance(e, (Const, Var)):
            return e
        if isinstance(e, (Add, Sub, Mul, Div, Max, Min)):
            return type(e)(walk(e.lhs), walk(e.rhs))
        if isinstance(e, Pow):
            return Pow(walk(e.base), walk(e.exponent))
        if isinstance(e, (Floor, Ceil, Log2Ceil)):
            return type(e)(walk(e.arg))
        if isinstance(e, Ite):
            return Ite(e.cond, walk(e.then), walk(e.other))
        raise TypeError(f"unknown expression node {e!r}")

    cases = tuple(Case(walk(c.body), c.guard) for c in rdef.cases)
    return RecurrenceDef(rdef.name, rdef.arg_names, rdef.precondition, cases)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalLimits:
    max_depth: int = 10_000
    max_steps: int = 1_000_000
    timeout_ms: int = 5_000

    def __post_init__(self):
        if self.max_depth <= 0 or self.max_steps <= 0 or self.timeout_ms <= 0:
            raise ValueError("evaluation limits must be strictly positive")


@dataclass(frozen=True)
class EvalOutcome:
    pass


@dataclass(frozen=True)
class Value(EvalOutcome):
    value: Fraction


@dataclass(frozen=True)
class LimitExceeded(EvalOutcome):
    limit: str  # depth | steps | timeout


@dataclass(frozen=True)
class GuardFallthrough(EvalOutcome):
    point: tuple


def _apply_binary(e: Expr, lhs, rhs):
    if isinstance(e, Add):
        return lhs + rhs
    if isinstance(e, Sub):
        return lhs - rhs
    if isinstance(e, Mul):
        return lhs * rhs
    if isinstance(e, Div):
        return exact_div(lhs, rhs)
    return max(lhs, rhs) if isinstance(e, Max) else min(lhs, rhs)


def _apply_unary(e: Expr, v):
    if isinstance(e, Log2Ceil):
        return ceil_log2(v)
    if isinstance(v, int):
        return v
    return math.floor(v) if isinstance(e, Floor) else math.ceil(v)


def _canon(v):
    """Normalize to int when integral (ints and Fractions hash alike, so
    memo keys stay consistent either way)."""
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else v
    return int(v)


class _NeedCall(Exception):
    def __init__(self, args: tuple):
        self.args_tuple = args


class _Fallthrough(Exception):
    def __init__(self, point: tuple):
        self.point = point


class _Evaluator:
    """Single-use evaluation context: memo table plus step accounting."""

    def __init__(self, rdef: RecurrenceDef, limits: EvalLimits):
        self.rdef = rdef
        self.limits = limits
        self.memo: dict = {}
        self.steps = 0
        self.deadline = time.monotonic() + limits.timeout_ms / 1000.0

    def run(self, point: tuple) -> EvalOutcome:
        pending = [point]
        while pending:
            if len(pending) > self.limits.max_depth:
                return LimitExceeded("depth")
            if self.steps > self.limits.max_steps:
                return LimitExceeded("steps")
            if time.monotonic() > self.deadline:
                return LimitExceeded("timeout")
            top = pending[-1]
            if top in self.memo:
                pending.pop()
                continue
            try:
                self.memo[top] = self._eval_call_once(top)
                pending.pop()
            except _NeedCall as need:
                pending.append(need.args_tuple)
            except _Fallthrough as fall:
                return GuardFallthrough(fall.point)
        return Value(self.memo[point])

    def _eval_call_once(self, args: tuple) -> Fraction:
        env = dict(zip(self.rdef.arg_names, args))
        for case in self.rdef.cases:
            self.steps += 1
            if eval_constraint(case.guard, env):
                return self._eval_body(case.body, env)
        raise _Fallthrough(args)

    def _eval_body(self, e: Expr, env: dict) -> Fraction:
        self.steps += 1
        if isinstance(e, Call):
            if e.fname != self.rdef.name:
                raise UnknownFunction(e.fname)
            key = tuple(self._eval_body(a, env) for a in e.args)
            try:
                return self.memo[key]
            except KeyError:
                raise _NeedCall(key) from None
        if isinstance(e, (Add, Sub, Mul, Div, Max, Min)):
            lhs = self._eval_body(e.lhs, env)
            rhs = self._eval_body(e.rhs, env)
            return _apply_binary(e, lhs, rhs)
        if isinstance(e, Pow):
            return exact_pow(self._eval_body(e.base, env),
                             self._eval_body(e.exponent, env))
        if isinstance(e, (Floor, Ceil, Log2Ceil)):
            return _apply_unary(e, self._eval_body(e.arg, env))
        if isinstance(e, Ite):
            # guard constraints are call-free, so direct evaluation is safe
            branch = e.then if eval_constraint(e.cond, env) else e.other
            return self._eval_body(branch, env)
        return eval_expr(e, env)


def eval_fun(rdef: RecurrenceDef, point: Sequence, limits: EvalLimits = EvalLimits()) -> EvalOutcome:
    """Evaluate the recurrence at a concrete input, memoized on argument
    tuples, within the given limits."""
    key = tuple(_canon(x) for x in point)
    if len(key) != rdef.arity:
        raise ArityMismatch(f"{rdef.name} expects {rdef.arity} arguments, got {len(key)}")
    return _Evaluator(rdef, limits).run(key)


def eval_fun_naive(rdef: RecurrenceDef, point: Sequence,
                   limits: EvalLimits = EvalLimits()) -> EvalOutcome:
    """Reference evaluator without memoization, used as a test oracle.
    Recursion is direct, so keep the limits small."""
    deadline = time.monotonic() + limits.timeout_ms / 1000.0
    steps = [0]

    class _Limit(Exception):
        def __init__(self, which):
            self.which = which

    def ev_body(e: Expr, env: dict, depth: int) -> Fraction:
        steps[0] += 1
        if steps[0] > limits.max_steps:
            raise _Limit("steps")
        if isinstance(e, Call):
            if e.fname != rdef.name:
                raise UnknownFunction(e.fname)
            args = tuple(ev_body(a, env, depth) for a in e.args)
            return ev_call(args, depth + 1)
        if isinstance(e, (Add, Sub, Mul, Div, Max, Min)):
            lhs = ev_body(e.lhs, env, depth)
            rhs = ev_body(e.rhs, env, depth)
            return _apply_binary(e, lhs, rhs)
        if isinstance(e, Pow):
            return exact_pow(ev_body(e.base, env, depth),
                             ev_body(e.exponent, env, depth))
        if isinstance(e, (Floor, Ceil, Log2Ceil)):
            return _apply_unary(e, ev_body(e.arg, env, depth))
        if isinstance(e, Ite):
            branch = e.then if eval_constraint(e.cond, env) else e.other
            return ev_body(branch, env, depth)
        return eval_expr(e, env)

    def ev_call(args: tuple, depth: int) -> Fraction:
        if depth > limits.max_depth:
            raise _Limit("depth")
        if time.monotonic() > deadline:
            raise _Limit("timeout")
        env = dict(zip(rdef.arg_names, args))
        for case in rdef.cases:
            if eval_constraint(case.guard, env):
                return ev_body(case.body, env, depth)
        raise _Fallthrough(args)

    def run() -> EvalOutcome:
        key = tuple(_canon(x) for x in point)
        try:
            return Value(ev_call(key, 1))
        except _Limit as lim:
            return LimitExceeded(lim.which)
        except _Fallthrough as fall:
            return GuardFallthrough(fall.point)

    # direct recursion needs roughly ten Python frames per call level; give
    # the interpreter room to reach max_depth before Python's own limit
    return _run_with_deep_stack(run, limits.max_depth * 10 + 2000)


def _run_with_deep_stack(fn, frames: int):
    if frames <= sys.getrecursionlimit():
        return fn()
    box: dict = {}

    def target():
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(frames)
        try:
            box["out"] = fn()
        except BaseException as err:  # surfaced to the caller below
            box["err"] = err
        finally:
            sys.setrecursionlimit(old)

    old_stack = threading.stack_size()
    threading.stack_size(512 * 1024 * 1024)
    try:
        worker = threading.Thread(target=target)
        worker.start()
        worker.join()
    finally:
        threading.stack_size(old_stack)
    if "err" in box:
        raise box["err"]
    return box["out"]


def eval_closed_form(cf: ClosedForm, point: Sequence):
    """Evaluate the first matching piece of a closed form, exactly."""
    key = tuple(_canon(x) for x in point)
    if len(key) != len(cf.arg_names):
        raise ArityMismatch(f"closed form expects {len(cf.arg_names)} arguments, got {len(key)}")
    env = dict(zip(cf.arg_names, key))
    for piece in cf.pieces:
        if eval_constraint(piece.guard, env):
            return eval_expr(piece.expr, env)
    raise GuardFallthroughError(key)


def load_recurrence(path) -> RecurrenceDef:
    from .parser import parse_recurrence

    with open(path, "r", encoding="utf-8") as fh:
        return parse_recurrence(fh.read())
