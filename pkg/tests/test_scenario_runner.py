import math

import pytest

from exceptions import UnknownIdentifierError
from reporting import report_text
from scenario_loader import load_scenario, parse_scenario, shipped_scenarios
from scenario_runner import run

OU_INTERVAL = """
[scenario]
name = ou-interval

[model]
name = interval
lower = -4
upper = 4

[density]
preset = gaussian

[solver]
task = eigen
basis = interval-dirichlet
family = legendre
size = {size}
count = {count}
"""

GAUSSIAN_KERNEL = """
[scenario]
name = gaussian-kernel

[model]
name = gaussian-chart
dim = 2

[density]
preset = gaussian

[solver]
task = kernel-search
basis = hermite-chart
size = 5
expected_kernel_dim = 2
expected_span = {span}
"""


class TestEigenTask:
    def test_resolved_spectrum_matches_the_dense_oracle(self):
        solver = run(parse_scenario(OU_INTERVAL.format(size=40, count=5))).solver
        assert len(solver["oracle_eigenvalues"]) == 5
        assert solver["oracle_gap"] < 1e-5
        assert solver["pass"]

    def test_under_resolved_basis_fails(self):
        report = run(parse_scenario(OU_INTERVAL.format(size=4, count=4)))
        assert report.solver["oracle_gap"] > 1e-3
        assert not report.solver["pass"]
        assert not report.passed
        assert "dense oracle gap" in report_text(report)

    def test_oracle_tolerance_can_be_relaxed(self):
        text = OU_INTERVAL.format(size=4, count=4) + "\n[tolerances]\noracle = 0.1\n"
        assert run(parse_scenario(text)).solver["pass"]


class TestKernelTask:
    def test_coordinate_span_is_recovered(self):
        report = run(parse_scenario(GAUSSIAN_KERNEL.format(span="He1,0 He0,1")))
        assert report.solver["kernel_dim"] == 2
        assert report.solver["max_principal_angle"] < 1e-6
        assert report.passed
        assert "max principal angle to He1,0 He0,1" in report_text(report)

    def test_wrong_span_of_the_right_dimension_fails(self):
        report = run(parse_scenario(GAUSSIAN_KERNEL.format(span="He2,0 He0,2")))
        assert report.solver["kernel_dim"] == 2
        assert report.solver["max_principal_angle"] > 1.0
        assert not report.passed

    def test_unknown_label_is_a_scenario_error(self):
        with pytest.raises(UnknownIdentifierError):
            run(parse_scenario(GAUSSIAN_KERNEL.format(span="He9,9")))


@pytest.fixture(scope="module")
def cookbook_reports():
    return {path.stem: run(load_scenario(path)) for path in shipped_scenarios()}


@pytest.mark.parametrize("name", [path.stem for path in shipped_scenarios()])
def test_shipped_scenario_passes(cookbook_reports, name):
    report = cookbook_reports[name]
    failing = [c.identity_id for c in report.checks if not c.passed]
    assert report.numeric_failure is None
    assert not failing, failing
    assert report.passed


@pytest.mark.parametrize("name", [path.stem for path in shipped_scenarios()])
def test_fd_paths_converge_at_second_order(cookbook_reports, name):
    for check in cookbook_reports[name].checks:
        if check.fd_path and check.convergence_order is not None:
            assert check.convergence_order >= 1.5, (check.identity_id, check.convergence_order)


def test_interval_ladder_stays_above_its_floor(cookbook_reports):
    solver = cookbook_reports["interval-probe"].solver
    assert [level["size"] for level in solver["levels"]] == [32, 64, 128]
    assert min(level["min_singular_value"] for level in solver["levels"]) >= 3.0
    assert solver["levels"][-1]["min_singular_value"] == pytest.approx(math.sqrt(math.pi ** 2 + 0.25), rel=1e-6)


def test_hemisphere_control_finds_its_kernel_element(cookbook_reports):
    solver = cookbook_reports["hemisphere-control"].solver
    assert solver["witness_residual"] < 1e-6
