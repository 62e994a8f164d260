import os

import numpy as np
import pytest

from config import EXIT_BUDGET_EXHAUSTED, EXIT_DIVERGED, EXIT_OK, EXIT_UNSTABLE
from csv_export import comment_lines, parse_csv
from experiment_config import InitSpec, MethodSpec, ProblemSpec, load_config, parse_config
from experiment_runner import ExperimentRunner, build_problem, initial_pair, resolve_params, run_command
from heavy_ball import optimal_params
from lyapunov import theorem2_beta_bound, theorem3_beta_bound
from objective import CallableObjective, DiagonalQuadratic, NonconvexPLObjective
from restart import count_doublings
from selftest import default_recipes_dir
from utils import ConfigError

QUADRATIC = """
[problem]
kind = "diagonal-quadratic"
mu = 1.0
L = 100.0
dim = 5
spectrum = "geometric"
"""


def experiment(body, problem=QUADRATIC):
    return parse_config(problem + body)


# --- building blocks ---

def test_build_problem_variants():
    assert isinstance(build_problem(ProblemSpec(kind="nonconvex-pl"), 0), NonconvexPLObjective)
    explicit = build_problem(ProblemSpec(kind="diagonal-quadratic", eigenvalues=(1.0, 10.0)), 0)
    np.testing.assert_array_equal(explicit.eigenvalues, [1.0, 10.0])
    spec = ProblemSpec(kind="diagonal-quadratic", mu=1.0, L=1e5, dim=20)
    a, b = build_problem(spec, 0), build_problem(spec, 1)
    assert not np.array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.eigenvalues, build_problem(spec, 0).eigenvalues)


def test_resolve_params_rules():
    obj = DiagonalQuadratic.from_spectrum(1.0, 100.0, 5, rule="geometric")
    assert resolve_params(MethodSpec(), obj) == optimal_params(1.0, 100.0)
    explicit = resolve_params(MethodSpec(params="explicit", alpha=0.01, beta=0.2), obj)
    assert (explicit.alpha, explicit.beta) == (0.01, 0.2)
    feasible = resolve_params(MethodSpec(params="theorem2-feasible"), obj)
    assert feasible.alpha == pytest.approx(0.005)
    assert feasible.beta == pytest.approx(0.9 * theorem2_beta_bound(0.005, 100.0))
    rate = resolve_params(MethodSpec(params="theorem3-feasible", beta_fraction=1.0), obj)
    assert rate.beta == pytest.approx(theorem3_beta_bound(0.005, 100.0, 1.0))


def test_resolve_params_needs_constants():
    no_l = CallableObjective(lambda x: float(x @ x), lambda x: 2.0 * x, dim=1, f_star=0.0)
    with pytest.raises(ConfigError):
        resolve_params(MethodSpec(), no_l)
    no_mu = CallableObjective(lambda x: float(x @ x), lambda x: 2.0 * x, dim=1, f_star=0.0, L_hint=2.0)
    with pytest.raises(ConfigError):
        resolve_params(MethodSpec(params="theorem3-feasible"), no_mu)


def test_initial_pairs():
    obj = DiagonalQuadratic([1.0, 2.0, 3.0])
    x0, x1 = initial_pair(InitSpec(standard_from=(1.0, 2.0, 3.0)), obj)
    np.testing.assert_array_equal(x0, x1)
    x0, x1 = initial_pair(InitSpec(x0=(1.0, 0.0, 0.0), x1=(0.0, 1.0, 0.0)), obj)
    np.testing.assert_array_equal(x1, [0.0, 1.0, 0.0])
    x0, x1 = initial_pair(InitSpec(named="zeros-ones"), obj)
    np.testing.assert_array_equal(x0, np.zeros(3))
    np.testing.assert_array_equal(x1, np.ones(3))
    x0, x1 = initial_pair(InitSpec(named="worst-case-e1"), obj)
    np.testing.assert_array_equal(x0, [-1.0, 0.0, 0.0])
    with pytest.raises(ConfigError):
        initial_pair(None, obj)


# --- peak ---

def test_peak_command_stable():
    result = run_command("peak", parse_config("[recurrence]\nrho = 0.6\nK = 40\n"))
    assert result.exit_code == EXIT_OK
    rows = parse_csv(result.text)
    assert len(rows) == 41
    assert max(r["x_k"] for r in rows) == pytest.approx(1.2)
    header = comment_lines(result.text)
    assert "stable=true" in header
    assert any("k_star=2" in line for line in header)


def test_peak_command_unstable_still_writes_csv():
    result = run_command("peak", parse_config("[recurrence]\na1 = 2.2\na2 = -1.21\nK = 20\n"))
    assert result.exit_code == EXIT_UNSTABLE
    assert result.status == "unstable"
    assert len(parse_csv(result.text)) == 21
    assert "stable=false" in comment_lines(result.text)


def test_peak_command_needs_a_recurrence():
    with pytest.raises(ConfigError):
        run_command("peak", parse_config(QUADRATIC))


# --- run ---

def test_run_command_fixed_horizon():
    cfg = experiment('[init]\nnamed = "ones-ones"\n[run]\nmax_iters = 50\n'
                     '[outputs]\nfields = ["k", "x_norm", "f", "x1", "x2", "x3", "x4", "x5"]\n')
    result = run_command("run", cfg)
    assert result.exit_code == EXIT_OK
    assert result.status == "fixed"
    rows = parse_csv(result.text)
    assert len(rows) == 51
    assert rows[0]["x1"] == 1.0
    assert any("status=fixed" in line for line in comment_lines(result.text))


def test_run_command_budget_exhausted():
    cfg = experiment('[init]\nnamed = "ones-ones"\n[run]\nmax_iters = 10\ngrad_tol = 1e-12\n')
    result = run_command("run", cfg)
    assert result.exit_code == EXIT_BUDGET_EXHAUSTED
    assert result.status == "max_iters"


def test_run_command_divergence_keeps_partial_output():
    cfg = experiment('[method]\nparams = "explicit"\nalpha = 0.03\nbeta = 0.0\n'
                     '[init]\nnamed = "ones-ones"\n[run]\nmax_iters = 500\n')
    result = run_command("run", cfg)
    assert result.exit_code == EXIT_DIVERGED
    assert result.status == "diverged"
    rows = parse_csv(result.text)
    assert 0 < len(rows) < 501
    assert all(r["V"] is None for r in rows)


def test_run_command_with_restarts_records_lyapunov():
    cfg = experiment('[method]\nparams = "theorem2-feasible"\n[init]\nnamed = "ones-ones"\n'
                     '[run]\nmax_iters = 100\n[restart]\npolicy = "fixed:20"\n'
                     '[outputs]\nfields = ["k", "V", "event"]\n')
    result = run_command("run", cfg)
    rows = parse_csv(result.text)
    assert [r["k"] for r in rows if r["event"] == "restart"] == [20, 40, 60, 80, 100]
    assert all(r["V"] is not None for r in rows[1:])


def test_run_command_with_restarts_stops_at_gradient_tolerance():
    body = ('[method]\nparams = "theorem2-feasible"\n[init]\nnamed = "ones-ones"\n'
            '[run]\nmax_iters = 20000\ngrad_tol = 1e-9\n[restart]\npolicy = "function"\n'
            '[outputs]\nfields = ["k", "grad_norm"]\n')
    result = run_command("run", experiment(body))
    assert result.exit_code == EXIT_OK
    assert result.status == "converged"
    assert parse_csv(result.text)[-1]["grad_norm"] <= 1e-9


def test_run_command_with_restarts_reports_budget_exhaustion():
    body = ('[method]\nparams = "theorem2-feasible"\n[init]\nnamed = "ones-ones"\n'
            '[run]\nmax_iters = 5\ngrad_tol = 1e-9\n[restart]\npolicy = "function"\n')
    result = run_command("run", experiment(body))
    assert result.exit_code == EXIT_BUDGET_EXHAUSTED
    assert result.status == "max_iters"


def test_run_command_needs_problem_and_init():
    with pytest.raises(ConfigError):
        run_command("run", parse_config(""))
    with pytest.raises(ConfigError):
        run_command("run", experiment(""))


def test_run_command_is_deterministic():
    body = '[init]\nnamed = "worst-case-en"\n[run]\nmax_iters = 80\n'
    problem = '[problem]\nkind = "diagonal-quadratic"\nmu = 1.0\nL = 1e4\ndim = 6\n'
    first = run_command("run", experiment(body, problem))
    second = run_command("run", experiment(body, problem))
    assert first.text == second.text


# --- adaptive ---

def test_adaptive_command():
    cfg = experiment('[method]\nL0 = 3.125\n[init]\nnamed = "ones-ones"\n[run]\nmax_iters = 10000\n'
                     '[outputs]\nfields = ["k", "f", "V", "event", "L_estimate"]\n')
    result = run_command("adaptive", cfg)
    assert result.exit_code == EXIT_OK
    assert result.status == "converged"
    rows = parse_csv(result.text)
    assert any(r["event"] == "L-doubled" for r in rows)
    assert any(line.startswith("doublings=") for line in comment_lines(result.text))


def test_adaptive_recipe_with_large_condition_number():
    result = run_command("adaptive", load_config(os.path.join(default_recipes_dir(), "adaptive_large_kappa.toml")))
    assert result.exit_code == EXIT_OK
    assert result.status == "converged"
    assert 10 <= count_doublings(result.trajectory) <= 11


def test_adaptive_command_needs_l0():
    with pytest.raises(ConfigError) as e:
        run_command("adaptive", experiment('[init]\nnamed = "ones-ones"\n'))
    assert e.value.field == "method.L0"


# --- compare ---

def test_compare_command():
    cfg = experiment('[method]\nparams = "theorem2-feasible"\n[init]\nnamed = "ones-ones"\n'
                     '[run]\nmax_iters = 5000\n[restart]\npolicies = ["none", "gradient"]\n')
    result = run_command("compare", cfg)
    assert result.exit_code == EXIT_OK
    assert [r.policy for r in result.rows] == ["gradient", "none"]
    assert [r["policy"] for r in parse_csv(result.text)] == ["gradient", "none"]


def test_compare_command_from_an_l_estimate():
    cfg = experiment('[method]\nL0 = 100.0\n[init]\nnamed = "ones-ones"\n'
                     '[run]\nmax_iters = 5000\n[restart]\npolicies = ["gradient"]\n')
    result = run_command("compare", cfg)
    assert result.exit_code == EXIT_OK
    assert [r.policy for r in result.rows] == ["adaptive", "gradient"]
    assert any(line.startswith("L0=") for line in comment_lines(result.text))


def test_compare_command_budget_exhausted():
    cfg = experiment('[method]\nparams = "theorem2-feasible"\n[init]\nnamed = "ones-ones"\n'
                     '[run]\nmax_iters = 5\n[restart]\npolicies = ["none"]\n')
    assert run_command("compare", cfg).exit_code == EXIT_BUDGET_EXHAUSTED


def test_compare_command_divergence_wins():
    cfg = experiment('[method]\nparams = "explicit"\nalpha = 0.03\nbeta = 0.0\n[init]\nnamed = "ones-ones"\n'
                     '[run]\nmax_iters = 500\n[restart]\npolicies = ["none", "function"]\n')
    result = run_command("compare", cfg)
    assert result.exit_code == EXIT_DIVERGED
    assert result.status == "diverged"


def test_unknown_command():
    with pytest.raises(ValueError):
        run_command("plot", parse_config(""))


def test_runner_keeps_config():
    cfg = parse_config("")
    runner = ExperimentRunner(cfg)
    assert runner.config is cfg
    assert not hasattr(runner, "logger")
