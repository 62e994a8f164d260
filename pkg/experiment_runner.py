"""
Experiment processing module for the Heavy Ball lab.
This module turns a validated ExperimentConfig into problems, parameters and
initial points, runs the requested command and serializes the result.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from config import (
    COMMANDS,
    DEFAULT_GRAD_TOL,
    EXIT_BUDGET_EXHAUSTED,
    EXIT_DIVERGED,
    EXIT_OK,
    EXIT_UNSTABLE,
)
from csv_export import format_value, recurrence_to_csv, summary_to_csv, trajectory_to_csv
from experiment_config import ExperimentConfig, InitSpec, MethodSpec, ProblemSpec
from heavy_ball import (
    HBParams,
    RunStatus,
    Trajectory,
    optimal_params,
    run,
    run_to_tolerance,
    standard_init,
    worst_case_initial_pair,
)
from lyapunov import LyapunovConfig, theorem2_beta_bound, theorem3_beta_bound
from objective import DiagonalQuadratic, NonconvexPLObjective, Objective
from recurrence import (
    EqualRoots,
    SecondOrderRecurrence,
    characteristic_roots,
    is_stable,
    iterate,
    max_root_modulus,
    peak_time,
    solution_peak,
)
from reports import get_peak_template, get_run_template, render_lines, summary_context
from restart import (
    NoRestart,
    PolicySummary,
    adaptive_run,
    compare_policies,
    count_doublings,
    parse_policy,
    run_with_policy,
    select_params,
)
from utils import ConfigError, DivergenceError

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    """Serialized output of one command and the exit code it maps to."""
    text: str
    exit_code: int
    status: str
    trajectory: Optional[Trajectory] = None
    rows: Optional[List[PolicySummary]] = None


def build_problem(spec: ProblemSpec, seed: int) -> Objective:
    if spec.kind == "nonconvex-pl":
        return NonconvexPLObjective()
    if spec.eigenvalues is not None:
        return DiagonalQuadratic(spec.eigenvalues)
    return DiagonalQuadratic.from_spectrum(spec.mu, spec.L, spec.dim, rule=spec.spectrum, seed=seed)


def resolve_params(method: MethodSpec, obj: Objective) -> HBParams:
    """
    Heavy Ball parameters from a method rule.

    The feasible rules take alpha = alpha_fraction / L and beta as
    beta_fraction times the largest momentum of the corresponding region.
    """
    if method.params == "explicit":
        return HBParams(alpha=method.alpha, beta=method.beta)
    L, mu = obj.L_hint, obj.mu_hint
    if L is None:
        raise ConfigError("the problem declares no Lipschitz constant", "method.params")
    if method.params == "optimal":
        return optimal_params(mu, L)
    alpha = method.alpha_fraction / L
    if method.params == "theorem2-feasible":
        return HBParams(alpha=alpha, beta=method.beta_fraction * theorem2_beta_bound(alpha, L))
    if mu is None:
        raise ConfigError("theorem3-feasible needs a problem with known mu", "method.params")
    return HBParams(alpha=alpha, beta=method.beta_fraction * theorem3_beta_bound(alpha, L, mu))


def initial_pair(init: Optional[InitSpec], obj: Objective) -> Tuple[np.ndarray, np.ndarray]:
    if init is None:
        raise ConfigError("is required for this command", "init")
    if init.style == "standard":
        return standard_init(init.standard_from)
    if init.style == "pair":
        return np.array(init.x0, dtype=np.float64), np.array(init.x1, dtype=np.float64)
    if init.named == "worst-case-e1":
        return worst_case_initial_pair(obj.dim, "e1")
    if init.named == "worst-case-en":
        return worst_case_initial_pair(obj.dim, "en")
    ones = np.ones(obj.dim)
    if init.named == "zeros-ones":
        return np.zeros(obj.dim), ones
    return ones, ones.copy()


def _exit_code(status: RunStatus) -> int:
    return EXIT_BUDGET_EXHAUSTED if status == RunStatus.MAX_ITERS else EXIT_OK


class ExperimentRunner:
    """Runs the harness commands for one experiment definition."""

    def __init__(self, config: ExperimentConfig):
        self.config = config

    def _require_problem(self) -> Objective:
        if self.config.problem is None:
            raise ConfigError("is required for this command", "problem")
        return build_problem(self.config.problem, self.config.seed)

    def _header(self, command: str, obj: Objective, traj: Trajectory, status: str, **extra) -> List[str]:
        context = summary_context(traj, name=self.config.name, command=command,
                                  problem=self.config.problem.kind, dim=obj.dim)
        context["status"] = status
        context.update(extra)
        return render_lines(get_run_template(), **context)

    def run_peak(self) -> CommandResult:
        """Iterate a scalar recurrence and report its peak."""
        spec = self.config.recurrence
        if spec is None:
            raise ConfigError("is required for the peak command", "recurrence")
        if spec.rho is not None:
            rec = SecondOrderRecurrence.from_double_root(spec.rho, spec.x0, spec.x1)
        else:
            rec = SecondOrderRecurrence(spec.a1, spec.a2, spec.x0, spec.x1)
        roots = characteristic_roots(rec)
        stable = is_stable(rec)
        report = None
        if spec.rho is not None:
            report = peak_time(spec.rho)
        elif isinstance(roots, EqualRoots) and 0.0 < roots.rho < 1.0:
            report = peak_time(roots.rho)
        values = iterate(rec, spec.K)
        peak, k_peak = solution_peak(rec, spec.K)
        comments = render_lines(get_peak_template(), rec=rec, roots=roots, stable=stable,
                                peak=peak, k_peak=k_peak, report=report)
        if not stable:
            logger.warning(f"Recurrence a1={rec.a1}, a2={rec.a2} is not stable "
                           f"(largest root modulus {max_root_modulus(rec):.6g})")
        return CommandResult(
            text=recurrence_to_csv(values, comments),
            exit_code=EXIT_OK if stable else EXIT_UNSTABLE,
            status="stable" if stable else "unstable",
        )

    def run_trajectory(self) -> CommandResult:
        """Run Heavy Ball with the configured parameters, init and restart policy."""
        obj = self._require_problem()
        params = resolve_params(self.config.method, obj)
        x0, x1 = initial_pair(self.config.init, obj)
        policy = parse_policy(self.config.policy)
        run_spec = self.config.run

        lyapunov = None
        if obj.L_hint is not None and params.alpha * obj.L_hint < 1.0:
            lyapunov = LyapunovConfig.for_objective(obj, params)
        elif "V" in self.config.outputs.fields:
            logger.info("alpha >= 1/L: the V column stays empty")
        logger.info(f"Running {self.config.name}: alpha={params.alpha:.6g}, beta={params.beta:.6g}, "
                    f"policy={policy.name}")

        try:
            if not isinstance(policy, NoRestart):
                traj = run_with_policy(obj, x0, x1, params, policy, run_spec.max_iters,
                                       grad_tol=run_spec.grad_tol, lyapunov=lyapunov)
            elif run_spec.grad_tol is not None:
                traj = run_to_tolerance(obj, x0, x1, params, run_spec.max_iters, run_spec.grad_tol, lyapunov)
            else:
                traj = run(obj, x0, x1, params, run_spec.max_iters, lyapunov)
            status, exit_code = traj.status.value, _exit_code(traj.status)
        except DivergenceError as e:
            logger.error(f"Run {self.config.name} diverged: {e}")
            traj, status, exit_code = e.trajectory, "diverged", EXIT_DIVERGED

        comments = self._header("run", obj, traj, status)
        return CommandResult(
            text=trajectory_to_csv(traj, self.config.outputs.fields, comments),
            exit_code=exit_code,
            status=status,
            trajectory=traj,
        )

    def run_adaptive(self) -> CommandResult:
        """Run the adaptive method from the configured L0."""
        obj = self._require_problem()
        method = self.config.method
        if method.L0 is None:
            raise ConfigError("is required for the adaptive command", "method.L0")
        x0, x1 = initial_pair(self.config.init, obj)
        grad_tol = self.config.run.grad_tol or DEFAULT_GRAD_TOL

        try:
            traj = adaptive_run(obj, x0, method.L0, eps=method.eps, max_iters=self.config.run.max_iters,
                                grad_tol=grad_tol, x1=x1, alpha_fraction=method.alpha_fraction,
                                beta_fraction=method.beta_fraction)
            status, exit_code = traj.status.value, _exit_code(traj.status)
        except DivergenceError as e:
            logger.error(f"Adaptive run {self.config.name} diverged: {e}")
            traj, status, exit_code = e.trajectory, "diverged", EXIT_DIVERGED

        comments = self._header("adaptive", obj, traj, status,
                                doublings=count_doublings(traj), iterations=len(traj) - 1)
        return CommandResult(
            text=trajectory_to_csv(traj, self.config.outputs.fields, comments),
            exit_code=exit_code,
            status=status,
            trajectory=traj,
        )

    def run_compare(self) -> CommandResult:
        """Compare restart policies from the same start."""
        obj = self._require_problem()
        method = self.config.method
        x0, x1 = initial_pair(self.config.init, obj)
        names = self.config.policies or (self.config.policy,)
        policies = [parse_policy(name) for name in names]

        # an L0 puts the adaptive method into the comparison
        if method.L0 is not None:
            params = select_params(method.L0)
            target = method.L0
            extra = [f"L0={format_value(method.L0)}"]
        else:
            params = target = resolve_params(method, obj)
            extra = []
        rows = compare_policies(obj, x0, x1, target, policies, self.config.run.max_iters)
        if any(row.status == "diverged" for row in rows):
            exit_code, status = EXIT_DIVERGED, "diverged"
        elif any(row.iterations_to_tol is None for row in rows):
            exit_code, status = EXIT_BUDGET_EXHAUSTED, "max_iters"
        else:
            exit_code, status = EXIT_OK, "converged"
        for row in rows:
            logger.info(f"{row.policy}: iterations={row.iterations_to_tol}, restarts={row.restarts}")

        comments = [f"experiment={self.config.name} command=compare status={status}",
                    f"alpha={format_value(params.alpha)} beta={format_value(params.beta)}"] + extra
        return CommandResult(
            text=summary_to_csv(rows, comments),
            exit_code=exit_code,
            status=status,
            rows=rows,
        )


def run_command(command: str, config: ExperimentConfig) -> CommandResult:
    """
    Dispatch a harness command.

    Raises:
        ValueError: On an unknown command
    """
    runner = ExperimentRunner(config)
    handlers = {
        "peak": runner.run_peak,
        "run": runner.run_trajectory,
        "adaptive": runner.run_adaptive,
        "compare": runner.run_compare,
    }
    if command not in handlers:
        raise ValueError(f"Unknown command '{command}', expected one of {COMMANDS}")
    return handlers[command]()
