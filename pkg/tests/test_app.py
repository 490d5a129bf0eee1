import json

import pytest
from sqlalchemy import func

import app
from database import CheckResult, Run, SolverResult, get_session, init_database
from scenario_runner import RunReport
from settings import EXIT_CHECK_FAILURE, EXIT_CONFIG_ERROR, EXIT_NUMERIC_FAILURE, EXIT_PASS, IDENTITY_IDS, MODEL_NAMES


@pytest.fixture
def scenario_file(tmp_path, circle_scenario):
    path = tmp_path / "circle.ini"
    path.write_text(circle_scenario(), encoding="utf-8")
    return path


class TestVerify:
    def test_passing_run(self, scenario_file, tmp_path):
        out = tmp_path / "reports" / "run.csv"
        assert app.main(["verify", "--scenario", str(scenario_file), "--format", "csv", "--out", str(out)]) == EXIT_PASS
        assert len(out.read_text(encoding="utf-8").splitlines()) == 3

    def test_failing_check(self, tmp_path, circle_scenario):
        path = tmp_path / "wrong.ini"
        path.write_text(circle_scenario("-2"), encoding="utf-8")
        out = tmp_path / "wrong.json"
        assert app.main(["verify", "--scenario", str(path), "--out", str(out)]) == EXIT_CHECK_FAILURE
        assert json.loads(out.read_text(encoding="utf-8"))["pass"] is False

    def test_malformed_scenario(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[model]\nname = circle\n[checks]\nidentities = bianchi\n", encoding="utf-8")
        assert app.main(["verify", "--scenario", str(path)]) == EXIT_CONFIG_ERROR

    def test_missing_scenario(self, tmp_path):
        assert app.main(["verify", "--scenario", str(tmp_path / "absent.ini")]) == EXIT_CONFIG_ERROR

    def test_timing_is_opt_in(self, scenario_file, tmp_path):
        out = tmp_path / "timed.json"
        app.main(["verify", "--scenario", str(scenario_file), "--timing", "--out", str(out)])
        assert json.loads(out.read_text(encoding="utf-8"))["wall_ms"] > 0.0


class TestSolve:
    def test_solver_only(self, scenario_file, tmp_path):
        out = tmp_path / "solve.json"
        assert app.main(["solve", "--scenario", str(scenario_file), "--out", str(out)]) == EXIT_PASS
        doc = json.loads(out.read_text(encoding="utf-8"))
        assert doc["checks"] == []
        assert doc["solver"]["task"] == "eigen"

    def test_needs_a_solver_section(self, tmp_path):
        path = tmp_path / "plain.ini"
        path.write_text("[model]\nname = circle\n", encoding="utf-8")
        assert app.main(["solve", "--scenario", str(path)]) == EXIT_CONFIG_ERROR

    def test_shipped_probe_by_name(self, tmp_path):
        out = tmp_path / "probe.json"
        assert app.main(["probe", "--scenario", "interval-degenerate", "--out", str(out)]) == EXIT_PASS
        assert json.loads(out.read_text(encoding="utf-8"))["solver"]["hypothesis"] == "control"


class TestLedger:
    def test_run_is_archived(self, scenario_file, tmp_path):
        ledger = tmp_path / "ledger" / "runs.db"
        app.main(["verify", "--scenario", str(scenario_file), "--out", str(tmp_path / "r.json"),
                  "--ledger", str(ledger)])
        session = get_session(init_database(str(ledger)))
        try:
            run = session.query(Run).one()
            assert run.scenario_name == "circle-check"
            assert run.passed
            assert [c.identity_id for c in sorted(run.checks, key=lambda c: c.position)] == ["drift-forms", "eigen-relation"]
            assert session.query(func.count(SolverResult.id)).scalar() == 1
            assert session.query(func.count(CheckResult.id)).scalar() == 2
        finally:
            session.close()


def test_list_registries(capsys):
    assert app.main(["list", "--format", "json"]) == EXIT_PASS
    data = json.loads(capsys.readouterr().out)
    assert data["identities"] == IDENTITY_IDS
    assert data["models"] == MODEL_NAMES
    assert "gaussian-example" in data["scenarios"]


@pytest.mark.parametrize("report, code", [
    (RunReport(scenario={}), EXIT_PASS),
    (RunReport(scenario={}, solver={"pass": False}), EXIT_CHECK_FAILURE),
    (RunReport(scenario={}, numeric_failure="metric not positive-definite"), EXIT_NUMERIC_FAILURE),
])
def test_exit_codes(report, code):
    assert app.exit_code(report) == code
