import json

import pytest

from recsolve.pipeline import APPROXIMATION_NOTE, SolveConfig, SolveReport, solve
from recsolve.recurrence import Value, eval_fun
from recsolve.recurrence import eval_closed_form

from conftest import grid_points, load_bench


def config(solver, seed=0):
    return SolveConfig(seed=seed, solver=solver)


class TestSolve:
    def test_nested_end_to_end(self, solver):
        report = solve(load_bench("nested"), config(solver))
        assert report.verdict == "verified"
        assert report.score == 1.0
        assert report.exact_fit
        assert report.closed_form is not None
        assert "total" in report.timings_ms

    def test_merge_is_piecewise_verified(self, solver):
        report = solve(load_bench("merge"), config(solver))
        assert report.verdict == "verified"
        assert len(report.closed_form.pieces) == 2

    def test_nonterminating_reports_guess_failure(self, solver):
        report = solve(load_bench("nonterm"), config(solver))
        assert report.verdict == "skipped"
        assert report.verdict_reason == "likely-nonterminating"
        assert report.closed_form is None
        assert "LikelyNonterminating" in report.error

    def test_fib_is_an_unverified_approximation(self, solver):
        report = solve(load_bench("fib"), config(solver))
        assert report.verdict == "skipped"
        assert report.verdict_reason == "score-below-threshold"
        assert report.note == APPROXIMATION_NOTE
        assert report.closed_form is not None  # the approximation is reported
        assert report.score is not None and report.score < 1.0 or not report.exact_fit

    def test_without_solver_candidates_are_not_verified(self):
        report = solve(load_bench("nested"), SolveConfig(solver=None))
        assert report.verdict == "skipped"
        assert report.verdict_reason == "solver-unavailable"
        assert report.closed_form is not None

    def test_timings_sum_close_to_total(self, solver):
        report = solve(load_bench("div"), config(solver))
        parts = sum(v for k, v in report.timings_ms.items() if k != "total")
        assert parts <= report.timings_ms["total"]
        assert parts >= 0.95 * report.timings_ms["total"]

    def test_reproducible_from_snapshot(self, solver):
        a = solve(load_bench("div"), config(solver, seed=3))
        b = solve(load_bench("div"), config(solver, seed=3))
        assert a.closed_form == b.closed_form
        assert a.verdict == b.verdict
        assert a.config == b.config

    def test_verified_candidates_match_recurrence_on_grid(self, solver):
        rdef = load_bench("open-zip")
        report = solve(rdef, config(solver))
        assert report.verdict == "verified"
        for p in grid_points(rdef.precondition, rdef.arg_names, 0, 10):
            out = eval_fun(rdef, p)
            assert isinstance(out, Value)
            assert eval_closed_form(report.closed_form, p) == out.value


class TestReport:
    def test_verdict_vocabulary_enforced(self):
        with pytest.raises(ValueError):
            SolveReport(name="x", recurrence="", closed_form=None, score=None,
                        raw_score=None, exact_fit=None, verdict="proved")

    def test_json_round_trip(self, solver):
        report = solve(load_bench("nested"), config(solver))
        doc = report.to_json_dict()
        again = json.loads(json.dumps(doc, sort_keys=True))
        assert again == doc

    def test_exit_statuses(self, solver):
        assert solve(load_bench("nested"), config(solver)).exit_status() == 0
        assert solve(load_bench("fib"), config(solver)).exit_status() == 2
        assert solve(load_bench("nonterm"), config(solver)).exit_status() == 3
