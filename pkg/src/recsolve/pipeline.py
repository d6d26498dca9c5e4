"""End-to-end orchestration: guess, gate on the score, check, retry.

A candidate goes to the verifier only when the regression is exact (R^2
of 1 and an exact rational re-score on the held-out test set); otherwise
the report carries the candidate as an approximation, clearly labelled
possibly unsafe.  A refuted candidate earns one retry with a fresh seed
and twice the sample budget.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

from .checker import (
    CheckVerdict, Refuted, SolverConfig, SolverProcessFailure, Unknown,
    Verified, check_solution, make_domain_checker,
)
from .expr import ClosedForm, constraint_to_text, to_text
from .recurrence import EvalLimits, RecurrenceDef, validate_coverage
from .regression import GuessResult, RegressionConfig, RegressionError, guess
from .sampling import SampleConfig, SamplingError, default_base_set


@dataclass(frozen=True)
class SolveConfig:
    seed: int = 0
    sample: SampleConfig = field(default_factory=SampleConfig)
    regression: RegressionConfig = field(default_factory=RegressionConfig)
    limits: EvalLimits = field(default_factory=EvalLimits)
    solver: SolverConfig | None = None
    emit_dir: str | None = None
    check_coverage: bool = True

    def seeded(self) -> "SolveConfig":
        return replace(self, sample=replace(self.sample, seed=self.seed),
                       regression=replace(self.regression, cv_seed=self.seed))


APPROXIMATION_NOTE = "approximation, possibly unsafe"


@dataclass
class SolveReport:
    name: str
    recurrence: str
    closed_form: ClosedForm | None
    score: float | None
    raw_score: float | None
    exact_fit: bool | None
    verdict: str                  # verified | refuted | unknown | skipped
    verdict_reason: str = ""
    counterexample: dict | None = None
    error: str | None = None
    note: str = ""
    retried: bool = False
    timings_ms: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    verdict_from_checker: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.verdict not in ("verified", "refuted", "unknown", "skipped"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "verified" and not self.verdict_from_checker:
            raise ValueError("a verified verdict must come from the checker")

    def exit_status(self) -> int:
        if self.verdict == "verified":
            return 0
        if self.verdict == "skipped" and self.closed_form is not None \
                and self.verdict_reason == "score-below-threshold":
            return 2
        return 3

    def to_json_dict(self, with_timings: bool = True) -> dict:
        out = {
            "name": self.name,
            "recurrence": self.recurrence,
            "closed_form": self.closed_form.to_text() if self.closed_form else None,
            "closed_form_pieces": (
                [[to_text(p.expr), constraint_to_text(p.guard)]
                 for p in self.closed_form.pieces] if self.closed_form else None),
            "score": self.score,
            "raw_score": self.raw_score,
            "exact_fit": self.exact_fit,
            "verdict": self.verdict,
            "verdict_reason": self.verdict_reason,
            "counterexample": self.counterexample,
            "error": self.error,
            "note": self.note,
            "retried": self.retried,
            "config": self.config,
        }
        if with_timings:
            out["timings_ms"] = self.timings_ms
        return out


def _verdict_fields(verdict: CheckVerdict) -> tuple:
    if isinstance(verdict, Verified):
        return "verified", "", None
    if isinstance(verdict, Refuted):
        ce = {
            "point": [int(v) for v in verdict.counterexample],
            "recurrence_value": str(verdict.recurrence_value),
            "candidate_value": str(verdict.candidate_value),
        }
        return "refuted", "", ce
    if isinstance(verdict, Unknown):
        return "unknown", verdict.reason, None
    raise TypeError(f"unknown verdict {verdict!r}")


def _config_snapshot(cfg: SolveConfig) -> dict:
    lams = cfg.regression.lambdas
    return {
        "seed": cfg.seed,
        "n_train": cfg.sample.n_train,
        "n_test": cfg.sample.n_test,
        "bounds": list(cfg.sample.bounds),
        "folds": cfg.regression.folds,
        "lambda_count": len(lams),
        "lambda_lo": min(lams),
        "lambda_hi": max(lams),
        "epsilon": cfg.regression.epsilon,
        "max_denominator": cfg.regression.max_denominator,
        "max_depth": cfg.limits.max_depth,
        "max_steps": cfg.limits.max_steps,
        "eval_timeout_ms": cfg.limits.timeout_ms,
        "solver": list(cfg.solver.argv) if cfg.solver else None,
        "solver_timeout_ms": cfg.solver.timeout_ms if cfg.solver else None,
    }


def solve(rdef: RecurrenceDef, cfg: SolveConfig, name: str | None = None) -> SolveReport:
    """Run the full pipeline on one recurrence and report every outcome
    (including stage errors) in a structured, reproducible record."""
    cfg = cfg.seeded()
    t_start = time.monotonic()
    timings: dict = {}
    report = SolveReport(
        name=name or rdef.name, recurrence=rdef.to_text(), closed_form=None,
        score=None, raw_score=None, exact_fit=None, verdict="skipped",
        config=_config_snapshot(cfg))

    t0 = time.monotonic()
    if cfg.check_coverage and cfg.solver is not None:
        try:
            validate_coverage(rdef, make_domain_checker(cfg.solver))
        except Exception as err:
            report.error = f"{type(err).__name__}: {err}"
            report.verdict_reason = "validation-failed"
            timings["validate"] = (time.monotonic() - t0) * 1000
            timings["total"] = (time.monotonic() - t_start) * 1000
            report.timings_ms = timings
            return report
    timings["validate"] = (time.monotonic() - t0) * 1000

    result, verdict = _guess_and_check(rdef, cfg, timings, report)
    if result is not None:
        report.closed_form = result.closed_form
        report.score = result.fit.score
        report.raw_score = result.fit.raw_score
        report.exact_fit = result.exact_fit
    if verdict is not None:
        report.verdict_from_checker = isinstance(verdict, Verified)
        report.verdict, report.verdict_reason, report.counterexample = \
            _verdict_fields(verdict)
    timings["total"] = (time.monotonic() - t_start) * 1000
    report.timings_ms = timings
    report.validate()
    return report


def _guess_and_check(rdef: RecurrenceDef, cfg: SolveConfig, timings: dict,
                     report: SolveReport):
    base_set = default_base_set(rdef.arity, rdef.arg_names)

    def run_guess(sample_cfg: SampleConfig) -> GuessResult:
        return guess(rdef, base_set, cfg.regression, sample_cfg, cfg.limits)

    t0 = time.monotonic()
    try:
        result = run_guess(cfg.sample)
    except (SamplingError, RegressionError) as err:
        timings["guess"] = (time.monotonic() - t0) * 1000
        report.error = f"{type(err).__name__}: {err}"
        report.verdict_reason = _reason_for(err)
        return None, None
    timings["guess"] = (time.monotonic() - t0) * 1000

    if not result.exact_fit:
        report.verdict_reason = "score-below-threshold"
        report.note = APPROXIMATION_NOTE
        return result, None
    if cfg.solver is None:
        report.verdict_reason = "solver-unavailable"
        report.note = APPROXIMATION_NOTE
        return result, None

    t0 = time.monotonic()
    try:
        verdict = check_solution(rdef, result.closed_form, cfg.solver,
                                 cfg.limits, cfg.emit_dir, report.name)
    except SolverProcessFailure as err:
        timings["check"] = (time.monotonic() - t0) * 1000
        report.error = f"SolverProcessFailure: {err}"
        report.verdict_reason = "checker-error"
        return result, None
    timings["check"] = (time.monotonic() - t0) * 1000

    if isinstance(verdict, Refuted):
        # one deterministic retry: fresh seed, doubled sample budget
        report.retried = True
        retry_sample = replace(cfg.sample, seed=cfg.sample.seed + 1,
                               n_train=cfg.sample.n_train * 2,
                               n_test=cfg.sample.n_test * 2)
        t0 = time.monotonic()
        try:
            result = run_guess(retry_sample)
        except (SamplingError, RegressionError) as err:
            timings["retry_guess"] = (time.monotonic() - t0) * 1000
            report.error = f"{type(err).__name__}: {err}"
            report.verdict_reason = _reason_for(err)
            return None, None
        timings["retry_guess"] = (time.monotonic() - t0) * 1000
        if not result.exact_fit:
            report.verdict_reason = "score-below-threshold"
            report.note = APPROXIMATION_NOTE
            return result, None
        t0 = time.monotonic()
        verdict = check_solution(rdef, result.closed_form, cfg.solver,
                                 cfg.limits, cfg.emit_dir, report.name + "-retry")
        timings["retry_check"] = (time.monotonic() - t0) * 1000
    return result, verdict


def _reason_for(err: Exception) -> str:
    name = type(err).__name__
    return {
        "LikelyNonterminating": "likely-nonterminating",
        "SamplingExhausted": "sampling-exhausted",
        "DegenerateDesign": "degenerate-design",
        "AllTermsPruned": "all-terms-pruned",
    }.get(name, "guess-error")
