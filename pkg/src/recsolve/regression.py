"""The guess stage: sparse linear regression over the base-function
dictionary, followed by coefficient rationalization.

The pipeline is Lasso with a cross-validated penalty, epsilon-pruning of
weak terms, an ordinary least-squares refit on the survivors, and exact
rationalization of the float coefficients so the verification stage can
reason over integers.

The Lasso objective, on features standardized to zero mean and unit
variance with an unpenalized intercept, is

    (1 / 2n) * sum_i (y_i - b0 - sum_j x_ij b_j)^2 + lambda * sum_j |b_j|

minimized by cyclic coordinate descent with soft-thresholding.  With this
scaling the all-zero solution is optimal exactly when
lambda >= max_j |<x_j, y - mean(y)>| / n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .expr import (
    Add, ClosedForm, Const, Constraint, Expr, Mul, Piece, eval_expr, simplify,
)
from .recurrence import EvalLimits, RecurrenceDef
from .sampling import (
    BaseFunctionSet, LikelyNonterminating, SampleConfig, build_training_set,
    sample_train_test,
)


class RegressionError(Exception):
    pass


class DegenerateDesign(RegressionError):
    pass


class AllTermsPruned(RegressionError):
    """Every coefficient fell below epsilon; the candidate degenerates to a
    constant (still a legal candidate)."""

    def __init__(self, intercept: float):
        super().__init__("all base functions pruned")
        self.intercept = intercept


def lambda_grid(count: int = 100, lo: float = 0.001, hi: float = 1.0) -> tuple:
    if count < 1 or lo <= 0 or hi < lo:
        raise ValueError("bad lambda grid")
    if count == 1:
        return (lo,)
    return tuple(lo + (hi - lo) * i / (count - 1) for i in range(count))


@dataclass(frozen=True)
class RegressionConfig:
    lambdas: tuple = field(default_factory=lambda_grid)
    folds: int = 2
    epsilon: float = 0.05
    max_denominator: int = 64
    tol: float = 1e-8
    max_sweeps: int = 100_000
    cv_seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("k-fold cross-validation needs k >= 2")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not self.lambdas or any(l <= 0 for l in self.lambdas):
            raise ValueError("lambda grid must be non-empty and positive")
        if self.max_denominator < 1:
            raise ValueError("max_denominator must be at least 1")


@dataclass
class FitResult:
    coefficients: list        # exact rationals, aligned with surviving_names
    intercept: Fraction
    surviving_names: list
    score: float              # R^2 on the held-out test set, clamped to [0, 1]
    raw_score: float
    selected_lambda: float
    rationalization_delta: float


# ---------------------------------------------------------------------------
# Lasso by cyclic coordinate descent
# ---------------------------------------------------------------------------

def _standardize(x: np.ndarray):
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    keep = np.where(std > 0)[0]
    xs = (x[:, keep] - mean[keep]) / std[keep]
    return xs, mean, std, keep


def _cd_loops(corr, b, lam, beta, const_term, tol, max_sweeps):
    """Cyclic coordinate descent with soft-thresholding on the
    standardized problem, expressed through corr = Xs'Xs/n and b = Xs'yc/n.
    Between full sweeps, iteration is restricted to the active (nonzero)
    coordinates.  Returns (monotone, worst_increase): the per-sweep
    objective const_term - b'beta + beta'corr beta/2 + lam*|beta|_1 must
    never increase."""
    q = b.shape[0]
    cb = corr @ beta
    obj = const_term - float(b @ beta) + 0.5 * float(beta @ cb) \
        + lam * float(np.abs(beta).sum())
    monotone = True
    worst = 0.0
    sweeps = 0
    full = True
    while sweeps < max_sweeps:
        sweeps += 1
        max_delta = 0.0
        for j in range(q):
            if not full and beta[j] == 0.0:
                continue
            rho = b[j] - cb[j] + beta[j]  # unit-variance columns: corr_jj = 1
            new = abs(rho) - lam
            new = new if new > 0.0 else 0.0
            if rho < 0.0:
                new = -new
            delta = new - beta[j]
            if delta != 0.0:
                for k in range(q):
                    cb[k] += corr[k, j] * delta
                beta[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        new_obj = const_term - float(b @ beta) + 0.5 * float(beta @ cb) \
            + lam * float(np.abs(beta).sum())
        # tolerance scales with const_term: the objective is a difference of
        # terms of that magnitude, so cancellation noise grows with it
        if new_obj > obj + 1e-9 * max(1.0, abs(obj), const_term):
            monotone = False
            worst = max(worst, new_obj - obj)
        obj = new_obj
        if max_delta < tol:
            if full:
                break
            full = True  # verify optimality over the inactive coordinates
        else:
            full = False
    return monotone, worst


try:  # compiled kernel; the pure-Python loops above are the fallback
    from numba import njit as _njit

    _cd_loops_fast = _njit(cache=True)(_cd_loops)
except ImportError:  # pragma: no cover
    _cd_loops_fast = _cd_loops


def _cd_solve(corr: np.ndarray, b: np.ndarray, lam: float, beta: np.ndarray,
              const_term: float, tol: float, max_sweeps: int) -> np.ndarray:
    monotone, worst = _cd_loops_fast(
        np.ascontiguousarray(corr), np.ascontiguousarray(b), float(lam),
        beta, float(const_term), float(tol), int(max_sweeps))
    assert monotone, f"coordinate descent increased the objective by {worst}"
    return beta


def lasso_fit(x: np.ndarray, y: np.ndarray, lam: float,
              tol: float = 1e-8, max_sweeps: int = 100_000):
    """Minimize the penalized least-squares objective at one lambda.

    Returns (beta, intercept, dropped) on the original feature scale;
    `dropped` lists indices of constant columns removed before the fit.
    """
    n, p = x.shape
    if n < 2:
        raise DegenerateDesign("need at least two rows")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    xs, mean, std, keep = _standardize(x)
    dropped = [j for j in range(p) if j not in set(keep.tolist())]
    y_mean = float(y.mean())
    yc = y - y_mean
    q = xs.shape[1]
    corr = (xs.T @ xs) / n
    b = (xs.T @ yc) / n
    const_term = float(yc @ yc) / (2 * n)
    beta = _cd_solve(corr, b, lam, np.zeros(q), const_term, tol, max_sweeps)
    full = np.zeros(p)
    full[keep] = beta / std[keep]
    intercept = y_mean - float(full[keep] @ mean[keep])
    return full, intercept, dropped


def lambda_max(x: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which the Lasso solution is identically zero."""
    xs, _, _, _ = _standardize(x)
    if xs.shape[1] == 0:
        return 0.0
    yc = y - y.mean()
    return float(np.abs(xs.T @ yc).max()) / x.shape[0]


def _lasso_path(x: np.ndarray, y: np.ndarray, lambdas_desc: Sequence[float],
                tol: float, max_sweeps: int) -> dict:
    """Fit the whole descending lambda path with warm starts.  Returns
    {lambda: (beta, intercept)} on the original feature scale."""
    n, p = x.shape
    xs, mean, std, keep = _standardize(x)
    y_mean = float(y.mean())
    yc = y - y_mean
    q = xs.shape[1]
    corr = (xs.T @ xs) / n
    b = (xs.T @ yc) / n
    const_term = float(yc @ yc) / (2 * n)
    beta = np.zeros(q)
    out = {}
    for lam in lambdas_desc:
        beta = _cd_solve(corr, b, lam, beta, const_term, tol, max_sweeps)
        full = np.zeros(p)
        full[keep] = beta / std[keep]
        intercept = y_mean - float(full[keep] @ mean[keep])
        out[lam] = (full, intercept)
    return out


def cv_lasso_regression(x: np.ndarray, y: np.ndarray, lambdas: Sequence[float],
                        folds: int, cv_seed: int = 0,
                        tol: float = 1e-8, max_sweeps: int = 100_000):
    """Select lambda by k-fold cross-validation on mean squared validation
    error (ties broken towards the larger lambda), then refit on all rows.

    Returns (beta, intercept, selected_lambda)."""
    n = x.shape[0]
    if n < folds:
        raise DegenerateDesign(f"{n} rows cannot be split into {folds} folds")
    import random

    order = list(range(n))
    random.Random(cv_seed).shuffle(order)
    fold_of = {row: i % folds for i, row in enumerate(order)}
    masks = [np.array([fold_of[r] == f for r in range(n)]) for f in range(folds)]

    grid = sorted(set(lambdas))
    desc = list(reversed(grid))
    cv_err = {lam: [] for lam in grid}
    for mask in masks:
        if mask.all() or (~mask).all():
            continue
        path = _lasso_path(x[~mask], y[~mask], desc, tol, max_sweeps)
        for lam, (beta, b0) in path.items():
            pred = x[mask] @ beta + b0
            cv_err[lam].append(float(((y[mask] - pred) ** 2).mean()))

    best_lam, best_err = None, math.inf
    for lam in grid:  # ascending, so ties resolve to the larger lambda
        err = float(np.mean(cv_err[lam]))
        if err <= best_err:
            best_err, best_lam = err, lam
    # refit on all rows: warm-started path down to the selected lambda
    full_path = _lasso_path(x, y, [l for l in desc if l >= best_lam], tol, max_sweeps)
    beta, b0 = full_path[best_lam]
    return beta, b0, best_lam


def remove_terms(names: Sequence[str], x: np.ndarray, beta: np.ndarray,
                 intercept: float, epsilon: float):
    """Drop base functions whose |coefficient| < epsilon, with their columns.

    Returns (surviving indices, pruned names, pruned matrix)."""
    if len(names) != len(beta):
        raise ValueError("coefficient vector does not match the term list")
    keep = [j for j in range(len(beta)) if abs(beta[j]) >= epsilon]
    if not keep:
        raise AllTermsPruned(intercept)
    return keep, [names[j] for j in keep], x[:, keep]


def linear_regression(x_train: np.ndarray, y_train: np.ndarray,
                      x_test: np.ndarray, y_test: np.ndarray):
    """Ordinary least squares via the normal equations (ridge fallback at
    machine-epsilon scale on singular designs).  The score is R^2 on the
    held-out test rows, clamped to [0, 1] (raw value also returned)."""
    n, p = x_train.shape
    if n <= p:
        raise DegenerateDesign(f"{n} rows for {p} surviving columns")
    a = np.hstack([np.ones((n, 1)), x_train])
    gram = a.T @ a
    rhs = a.T @ y_train
    try:
        w = np.linalg.solve(gram, rhs)
        ok = np.allclose(gram @ w, rhs, rtol=1e-8, atol=1e-8 * max(1.0, float(np.abs(rhs).max())))
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        scale = float(np.trace(gram)) / gram.shape[0]
        ridge = gram + np.eye(gram.shape[0]) * np.finfo(float).eps * max(1.0, scale)
        w = np.linalg.solve(ridge, rhs)
    intercept, beta = float(w[0]), w[1:]

    a_test = np.hstack([np.ones((x_test.shape[0], 1)), x_test])
    pred = a_test @ w
    ss_res = float(((y_test - pred) ** 2).sum())
    ss_tot = float(((y_test - y_test.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raw = 1.0 if ss_res <= 1e-12 * max(1.0, float(np.abs(y_test).max())) else 0.0
    else:
        raw = 1.0 - ss_res / ss_tot
    return beta, intercept, min(max(raw, 0.0), 1.0), raw


def rationalize(beta: Sequence[float], intercept: float, max_denominator: int):
    """Snap coefficients to the nearest rationals with bounded denominator.

    Returns (rational coefficients, rational intercept, max rounding delta)."""
    if max_denominator < 1:
        raise ValueError("max_denominator must be at least 1")
    out = [Fraction(float(b)).limit_denominator(max_denominator) for b in beta]
    b0 = Fraction(float(intercept)).limit_denominator(max_denominator)
    deltas = [abs(float(r) - float(b)) for r, b in zip(out, beta)]
    deltas.append(abs(float(b0) - float(intercept)))
    return out, b0, max(deltas)


# ---------------------------------------------------------------------------
# End-to-end guess
# ---------------------------------------------------------------------------

@dataclass
class GuessResult:
    closed_form: ClosedForm
    fit: FitResult
    exact_fit: bool           # rationalized candidate reproduces the test set exactly
    region: Constraint
    train_rows: int
    test_rows: int
    dropped_inputs: int
    dropped_columns: list


def assemble_candidate(coefficients: Sequence[Fraction], intercept: Fraction,
                       exprs: Sequence[Expr]) -> Expr:
    out: Expr = Const(intercept)
    for coef, term in zip(coefficients, exprs):
        if coef == 0:
            continue
        out = Add(out, Mul(Const(coef), term))
    return simplify(out)


def guess(rdef: RecurrenceDef, base_set: BaseFunctionSet, reg_cfg: RegressionConfig,
          sample_cfg: SampleConfig, limits: EvalLimits = EvalLimits()) -> GuessResult:
    """Run the full guess stage against the recursive region of the
    recurrence and assemble a piecewise candidate: the fitted expression on
    the recursive region plus the non-recursive cases copied verbatim."""
    region = rdef.recursive_region()
    train_pts, test_pts = sample_train_test(region, rdef.arity, sample_cfg,
                                            arg_names=rdef.arg_names)
    ts = build_training_set(rdef, base_set, list(train_pts) + list(test_pts), limits)
    train_set, test_set = set(train_pts), set(test_pts)
    train_idx = [i for i, p in enumerate(ts.inputs) if p in train_set]
    test_idx = [i for i, p in enumerate(ts.inputs) if p in test_set]
    if len(train_idx) < max(2, reg_cfg.folds) or not test_idx:
        raise LikelyNonterminating(len(ts.inputs), ts.dropped_inputs)

    x_all, y_all = ts.to_arrays()
    x_train, y_train = x_all[train_idx], y_all[train_idx]
    x_test, y_test = x_all[test_idx], y_all[test_idx]

    beta_cv, b0_cv, lam = cv_lasso_regression(
        x_train, y_train, reg_cfg.lambdas, reg_cfg.folds, reg_cfg.cv_seed,
        reg_cfg.tol, reg_cfg.max_sweeps)
    try:
        keep, kept_names, x_train_kept = remove_terms(
            ts.columns, x_train, beta_cv, b0_cv, reg_cfg.epsilon)
        x_test_kept = x_test[:, keep]
    except AllTermsPruned:
        keep, kept_names = [], []
        x_train_kept = x_train[:, []]
        x_test_kept = x_test[:, []]

    beta, intercept, score, raw = linear_regression(
        x_train_kept, y_train, x_test_kept, y_test)
    coefs, b0, delta = rationalize(beta, intercept, reg_cfg.max_denominator)

    kept_exprs = [ts.column_exprs[j] for j in keep]
    candidate = assemble_candidate(coefs, b0, kept_exprs)

    exact = _rescore_exact(candidate, rdef.arg_names,
                           [ts.inputs[i] for i in test_idx],
                           [ts.values[i] for i in test_idx])
    pieces = [Piece(candidate, region)]
    pieces += [Piece(c.body, c.guard) for c in rdef.base_cases()]
    cf = ClosedForm(rdef.arg_names, rdef.precondition, tuple(pieces),
                    provenance="regression")
    fit = FitResult(coefs, b0, kept_names, score, raw, lam, delta)
    return GuessResult(cf, fit, exact, region, len(train_idx), len(test_idx),
                       ts.dropped_inputs, ts.dropped_columns)


def _rescore_exact(candidate: Expr, arg_names: Sequence[str],
                   inputs: Sequence, values: Sequence) -> bool:
    for point, expected in zip(inputs, values):
        if eval_expr(candidate, dict(zip(arg_names, point))) != expected:
            return False
    return True
