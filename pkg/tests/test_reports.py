from heavy_ball import HBParams, ParamsChange, RunStatus, Trajectory
from recurrence import SecondOrderRecurrence, characteristic_roots, peak_time
from reports import (
    get_peak_template,
    get_run_template,
    render_lines,
    render_selftest_report,
    summary_context,
)
from selftest import CheckResult


def test_peak_header_with_report():
    rec = SecondOrderRecurrence.from_double_root(0.6, 0.0, 1.0)
    lines = render_lines(get_peak_template(), rec=rec, roots=characteristic_roots(rec), stable=True,
                         peak=1.5, k_peak=2, report=peak_time(0.6))
    assert lines[0].startswith("recurrence a1=")
    assert "stable=true" in lines
    assert "peak=1.5 k_peak=2" in lines
    assert lines[-1].startswith("k_continuous=")
    assert "k_ceiling=3" in lines[-1]


def test_peak_header_without_report():
    rec = SecondOrderRecurrence(a1=0.9, a2=-0.2)
    lines = render_lines(get_peak_template(), rec=rec, roots=characteristic_roots(rec), stable=True,
                         peak=1.0, k_peak=1, report=None)
    assert len(lines) == 4
    assert all(line.strip() for line in lines)


def test_run_header_lists_parameter_changes():
    traj = Trajectory(status=RunStatus.CONVERGED)
    traj.params_history.append(ParamsChange(k=0, params=HBParams(0.5, 0.25), L_estimate=1.0))
    traj.params_history.append(ParamsChange(k=7, params=HBParams(0.25, 0.5), L_estimate=2.0))
    context = summary_context(traj, name="demo", command="adaptive", problem="diagonal-quadratic", dim=3,
                              doublings=1, iterations=12)
    lines = render_lines(get_run_template(), **context)
    assert lines[0] == "experiment=demo command=adaptive status=converged"
    assert lines[1] == "problem=diagonal-quadratic dim=3"
    assert lines[2] == "params k=0 alpha=0.5 beta=0.25 L_estimate=1"
    assert lines[3] == "params k=7 alpha=0.25 beta=0.5 L_estimate=2"
    assert lines[4] == "doublings=1 iterations=12"


def test_run_header_without_estimate():
    traj = Trajectory()
    traj.params_history.append(ParamsChange(k=0, params=HBParams(0.5, 0.25), L_estimate=None))
    lines = render_lines(get_run_template(), **summary_context(traj, name="x", command="run",
                                                              problem="nonconvex-pl", dim=1))
    assert lines[2] == "params k=0 alpha=0.5 beta=0.25"
    assert len(lines) == 3


def test_selftest_report():
    checks = [CheckResult("envelope", True, "", 0.5), CheckResult("rate", False, "V_3 too large", 1.25)]
    report = render_selftest_report(checks)
    lines = report.splitlines()
    assert lines[0] == "SELFTEST: 1/2 checks passed"
    assert lines[1] == "[PASS] envelope (0.50 s)"
    assert lines[2] == "[FAIL] rate (1.25 s)"
    assert lines[3].strip() == "V_3 too large"
