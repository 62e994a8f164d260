"""
Acceptance suite for the Heavy Ball lab.
This module runs the numerical acceptance checks and the checked-in experiment
recipes, and renders a pass/fail report.
"""
import logging
import os
import re
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config import (
    CLOSED_FORM_DRAWS,
    COORDINATE_FIELD_PATTERN,
    DEFAULT_GRAD_TOL,
    ENERGY_SUP_SLACK,
    ETA_RATIO_BAND,
    EXIT_CONFIG_ERROR,
    EXIT_DIVERGED,
    MIN_SIGN_CHANGES,
    MODAL_MATCH_TOLERANCE,
    MONOTONE_TRIALS,
    PEAK_MATCH_TOLERANCE,
    RATE_TOLERANCE,
    RATE_TRIALS,
    RECIPES_DIR,
    SELFTEST_SEED,
)
from csv_export import check_trajectory_rows, parse_csv
from experiment_config import load_config
from experiment_runner import run_command
from heavy_ball import (
    HBParams,
    RunStatus,
    coordinate_trace,
    count_sign_changes,
    max_norm,
    modal_closed_form,
    optimal_params,
    peak_lower_bound,
    run,
    run_standard,
    worst_case_initial_pair,
)
from lyapunov import (
    ContinuousState,
    LyapunovConfig,
    energy_order_check,
    first_monotonicity_violation,
    rate_bound,
    simulate_continuous,
    theorem2_beta_bound,
    theorem3_beta_bound,
)
from objective import DiagonalQuadratic, NonconvexPLObjective, Objective
from recurrence import (
    SecondOrderRecurrence,
    peak_scan_bound,
    peak_time,
    solution_peak,
    worst_case_peak_envelope,
)
from reports import render_selftest_report
from restart import accepted_v_monotone, adaptive_run, count_doublings

logger = logging.getLogger(__name__)

CheckOutcome = Tuple[bool, str]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def default_recipes_dir() -> str:
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), RECIPES_DIR)


def check_envelope_exactness() -> CheckOutcome:
    """The (-1, 1) solution of a double root peaks exactly on the envelope."""
    for rho in (0.3, 0.6, 0.9, 0.99):
        report = peak_time(rho)
        rec = SecondOrderRecurrence.from_double_root(rho, -1.0, 1.0)
        peak, _ = solution_peak(rec, peak_scan_bound(rho))
        envelope = worst_case_peak_envelope(rho, report.k_star)
        if abs(peak - envelope) > PEAK_MATCH_TOLERANCE * envelope:
            return False, f"rho={rho}: iterated peak {peak!r} differs from envelope {envelope!r}"
    report = peak_time(0.6)
    if report.k_star != 2 or abs(report.peak - 1.56) > PEAK_MATCH_TOLERANCE:
        return False, f"rho=0.6 peaks at k={report.k_star} with {report.peak!r}, expected k=2 and 1.56"
    return True, "envelope matched for rho in {0.3, 0.6, 0.9, 0.99}; rho=0.6 peaks at k=2"


def check_eta_asymptotic() -> CheckOutcome:
    lo, hi = ETA_RATIO_BAND
    ratios = []
    for rho in (0.999, 0.9999):
        report = peak_time(rho)
        ratio = report.peak / report.eta_asymptotic
        ratios.append(f"{ratio:.4f}")
        if not lo <= ratio <= hi:
            return False, f"rho={rho}: peak / asymptote = {ratio:.6f} outside [{lo}, {hi}]"
    return True, f"ratios {', '.join(ratios)}"


def check_peak_ordering() -> CheckOutcome:
    """Real roots above a double root peak higher, real roots below it peak lower."""
    K = 200
    equal, _ = solution_peak(SecondOrderRecurrence.from_double_root(0.6, 0.0, 1.0), K)
    above, _ = solution_peak(SecondOrderRecurrence.from_real_roots(0.7, 0.8, 0.0, 1.0), K)
    below, _ = solution_peak(SecondOrderRecurrence.from_real_roots(0.4, 0.5, 0.0, 1.0), K)
    detail = f"peaks (0.7, 0.8)={above:.6g}, double 0.6={equal:.6g}, (0.4, 0.5)={below:.6g}"
    return above >= equal >= below, detail


def check_peak_lower_bound() -> CheckOutcome:
    """Optimal tuning reaches sqrt(kappa) / (2e) from both worst-case starts."""
    for L in (1e2, 1e3, 1e4):
        obj = DiagonalQuadratic.from_spectrum(1.0, L, 10, rule="geometric")
        params = optimal_params(obj.mu, obj.L)
        bound = peak_lower_bound(obj.kappa)

        x0, x1 = worst_case_initial_pair(obj.dim, "e1")
        peak = max_norm(run(obj, x0, x1, params, 500))
        if peak < bound:
            return False, f"L={L:g}, start -e1/e1: max norm {peak:.6g} below {bound:.6g}"

        x0, x1 = worst_case_initial_pair(obj.dim, "en")
        traj = run(obj, x0, x1, params, 500)
        peak = max_norm(traj)
        if peak < bound:
            return False, f"L={L:g}, start e_n/e_n: max norm {peak:.6g} below {bound:.6g}"
        flips = count_sign_changes(coordinate_trace(traj, -1)[:201])
        if flips < MIN_SIGN_CHANGES:
            return False, f"L={L:g}: coordinate n changed sign {flips} times in 200 iterations"
    return True, f"bound held for L in {{1e2, 1e3, 1e4}} (sqrt(1e4)/(2e) = {peak_lower_bound(1e4):.3f})"


def check_modal_closed_form(seed: int = SELFTEST_SEED) -> CheckOutcome:
    """Closed forms of the three modal regimes agree with the iteration."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(CLOSED_FORM_DRAWS):
        mu = 10.0 ** rng.uniform(-1.0, 1.0)
        L = mu * 10.0 ** rng.uniform(1.0, 4.0)
        if i % 3 == 0:
            lam = mu + (L - mu) * rng.uniform(0.05, 0.95)
        elif i % 3 == 1:
            lam = mu
        else:
            lam = L
        obj = DiagonalQuadratic([mu, lam, L])
        x0 = rng.uniform(-1.0, 1.0, 3)
        x1 = rng.uniform(-1.0, 1.0, 3)
        xs = run(obj, x0, x1, optimal_params(mu, L), 500).xs
        for j, eig in enumerate(obj.eigenvalues):
            closed = np.array([modal_closed_form(float(eig), mu, L, x0[j], x1[j], k) for k in range(xs.shape[0])])
            err = float(np.max(np.abs(closed - xs[:, j])))
            scale = max(1.0, float(np.max(np.abs(xs[:, j]))))
            worst = max(worst, err / scale)
            if err > MODAL_MATCH_TOLERANCE * scale:
                return False, f"draw {i}: lambda={eig:.6g} in [{mu:.6g}, {L:.6g}] off by {err:.3e}"
    return True, f"{CLOSED_FORM_DRAWS} draws, worst scaled error {worst:.3e}"


def _v_trace(obj: Objective, x0, x1, params: HBParams, cfg: LyapunovConfig, K: int) -> np.ndarray:
    return run(obj, x0, x1, params, K, lyapunov=cfg).V_values


def check_lyapunov_monotone(seed: int = SELFTEST_SEED) -> CheckOutcome:
    """V never rises for random parameters in the monotone region, on quadratics and the PL test function."""
    rng = np.random.default_rng(seed)
    pl = NonconvexPLObjective()
    for trial in range(MONOTONE_TRIALS):
        if trial % 4 == 0:
            obj: Objective = pl
            x0, x1 = rng.uniform(-5.0, 5.0, 1), rng.uniform(-5.0, 5.0, 1)
        else:
            obj = DiagonalQuadratic.from_spectrum(1.0, 10.0 ** rng.uniform(0.0, 5.0), 5, seed=trial)
            x0, x1 = rng.uniform(-1.0, 1.0, 5), rng.uniform(-1.0, 1.0, 5)
        L = obj.L_hint
        alpha = rng.uniform(0.01, 0.99) / L
        beta = rng.uniform(0.0, 1.0) * theorem2_beta_bound(alpha, L)
        cfg = LyapunovConfig(alpha=alpha, beta=beta, L=L, f_star=obj.f_star)
        V = _v_trace(obj, x0, x1, HBParams(alpha, beta), cfg, 100)
        # V_0 uses x_{-1} = x_0 and is not part of the pair sequence
        k = first_monotonicity_violation(V[1:])
        if k is not None:
            return False, f"trial {trial}: V rises at k={k + 1} (alpha*L={alpha * L:.4f}, beta={beta:.4f})"

    # Optimal tuning on an ill-conditioned quadratic lets f rise; monotone-region tuning keeps V falling
    obj = DiagonalQuadratic.from_spectrum(1.0, 1e4, 4, rule="geometric")
    start = np.array([0.0, 0.0, 0.0, 1.0])
    f_opt = run_standard(obj, start, optimal_params(obj.mu, obj.L), 200).f_values
    if not np.any(np.diff(f_opt) > 0):
        return False, "f decreased monotonically under optimal parameters"
    alpha = 0.5 / obj.L
    params = HBParams(alpha, 0.9 * theorem2_beta_bound(alpha, obj.L))
    V = run_standard(obj, start, params, 200, LyapunovConfig.for_objective(obj, params)).V_values
    if first_monotonicity_violation(V) is not None:
        return False, "V rose under monotone-region parameters"
    return True, f"{MONOTONE_TRIALS} trials monotone; optimal tuning lets f rise"


def _rate_holds(V: np.ndarray, alpha: float, mu: float) -> Optional[int]:
    for k in range(1, len(V)):
        if V[k] > rate_bound(V[1], alpha, mu, k - 1) * (1.0 + RATE_TOLERANCE):
            return k
    return None


def check_lyapunov_rate(seed: int = SELFTEST_SEED) -> CheckOutcome:
    """V decays at least like (1 - alpha mu)^k under the linear-rate region."""
    rng = np.random.default_rng(seed)
    pl = NonconvexPLObjective()
    for trial in range(RATE_TRIALS):
        if trial % 3 == 0:
            obj: Objective = pl
            mu = pl.mu_certified
            x0, x1 = rng.uniform(-2.0, 2.0, 1), rng.uniform(-2.0, 2.0, 1)
            alpha = rng.uniform(0.1, 0.9) / pl.L_hint
        else:
            obj = DiagonalQuadratic.from_spectrum(1.0, 10.0 ** rng.uniform(1.0, 3.0), 5, seed=trial)
            mu = obj.mu_hint
            x0, x1 = rng.uniform(-1.0, 1.0, 5), rng.uniform(-1.0, 1.0, 5)
            alpha = rng.uniform(0.05, 0.95) / obj.L_hint
        L = obj.L_hint
        beta = rng.uniform(0.0, 1.0) * theorem3_beta_bound(alpha, L, mu)
        cfg = LyapunovConfig(alpha=alpha, beta=beta, L=L, mu=mu, f_star=obj.f_star)
        params = HBParams(alpha, beta)

        k = _rate_holds(_v_trace(obj, x0, x1, params, cfg, 300), alpha, mu)
        if k is not None:
            return False, f"trial {trial}: V_{k} exceeds the linear rate bound"

        # From x1 = x0 the pair term vanishes and V_1 = f(x0) - f*
        f = run_standard(obj, x0, params, 300).f_values - obj.f_star
        for k in range(1, len(f)):
            if f[k] > rate_bound(f[0], alpha, mu, k - 1) * (1.0 + RATE_TOLERANCE):
                return False, f"trial {trial}: f(x_{k}) - f* exceeds the rate bound from x1 = x0"
    return True, f"{RATE_TRIALS} trials within (1 - alpha mu)^k (PL constant {pl.mu_certified:.6g})"


def check_continuous_energy() -> CheckOutcome:
    obj = DiagonalQuadratic([1.0])
    state0 = ContinuousState(x=np.array([1.0]), y=np.array([0.0]), a=1.0, b=1.0)
    report = energy_order_check(obj, state0, 0.1, 20.0)
    if not report.passed:
        return False, (f"worst increase {report.worst_increase:.3e} vs tolerance {report.tolerance:.3e}, "
                       f"halving ratio {report.halving_ratio:.2f}")
    samples = simulate_continuous(obj, state0, 0.1, 20.0)
    f0 = obj.eval(state0.x)
    sup_f = max(obj.eval(s.state.x) for s in samples)
    if sup_f > f0 + ENERGY_SUP_SLACK:
        return False, f"f rose to {sup_f:.6g} above f(x0) = {f0:.6g}"
    return True, f"C={report.constant:.3e}, halving ratio {report.halving_ratio:.2f}"


def check_adaptive_doubling() -> CheckOutcome:
    """The adaptive method recovers from an underestimated L with few doublings."""
    obj = DiagonalQuadratic.from_spectrum(1.0, 100.0, 5, rule="geometric")
    x0 = np.ones(obj.dim)
    parts = []
    for m in (0, 5, 10):
        traj = adaptive_run(obj, x0, obj.L / 2 ** m, grad_tol=DEFAULT_GRAD_TOL)
        doublings = count_doublings(traj)
        if doublings > m + 1:
            return False, f"m={m}: {doublings} doublings"
        if traj.status != RunStatus.CONVERGED:
            return False, f"m={m}: stopped with status {traj.status.value}"
        if not accepted_v_monotone(traj):
            return False, f"m={m}: accepted V sequence rises"
        parts.append(f"m={m}: {doublings} doublings, {len(traj) - 1} iterations")
    return True, "; ".join(parts)


def _coordinate_fields(fields: Sequence[str], dim: Optional[int]) -> Optional[List[str]]:
    coords = [name for name in fields if re.match(COORDINATE_FIELD_PATTERN, name)]
    return coords if dim and len(coords) == dim else None


def check_recipes(recipes_dir: Optional[str] = None) -> CheckOutcome:
    """Every checked-in recipe runs and reproduces byte-identical CSV."""
    recipes_dir = recipes_dir or default_recipes_dir()
    paths = sorted(os.path.join(recipes_dir, name) for name in os.listdir(recipes_dir) if name.endswith(".toml"))
    if not paths:
        return False, f"no recipes found in {recipes_dir}"
    for path in paths:
        name = os.path.basename(path)
        config = load_config(path)
        if config.command is None:
            return False, f"{name} does not declare a command"
        first = run_command(config.command, config)
        second = run_command(config.command, load_config(path))
        if first.text != second.text:
            return False, f"{name}: repeated runs differ"
        if first.exit_code in (EXIT_CONFIG_ERROR, EXIT_DIVERGED):
            return False, f"{name}: exit code {first.exit_code} ({first.status})"
        if config.command != "compare":
            dim = config.problem.dimension if config.problem else None
            check_trajectory_rows(parse_csv(first.text), _coordinate_fields(config.outputs.fields, dim))
    return True, f"{len(paths)} recipes reproduced"


CHECKS: List[Tuple[str, Callable[[], CheckOutcome]]] = [
    ("envelope exactness", check_envelope_exactness),
    ("peak asymptote", check_eta_asymptotic),
    ("peak ordering", check_peak_ordering),
    ("peak lower bound", check_peak_lower_bound),
    ("modal closed forms", check_modal_closed_form),
    ("lyapunov monotonicity", check_lyapunov_monotone),
    ("lyapunov linear rate", check_lyapunov_rate),
    ("continuous energy", check_continuous_energy),
    ("adaptive doubling", check_adaptive_doubling),
]


def run_check(name: str, check: Callable[[], CheckOutcome]) -> CheckResult:
    """Run one check; an exception counts as a failure."""
    start = time.perf_counter()
    try:
        passed, detail = check()
    except Exception as e:
        logger.exception(f"Check '{name}' raised")
        passed, detail = False, f"{type(e).__name__}: {e}"
    seconds = time.perf_counter() - start
    logger.info(f"{'PASS' if passed else 'FAIL'} {name} in {seconds:.2f} s")
    return CheckResult(name=name, passed=passed, detail=detail, seconds=seconds)


def run_selftest(recipes_dir: Optional[str] = None) -> Tuple[List[CheckResult], str]:
    """
    Run every acceptance check and the recipe reproduction.

    Args:
        recipes_dir: Directory of recipe files, defaults to the checked-in recipes

    Returns:
        Tuple of (check results, rendered report)
    """
    results = [run_check(name, check) for name, check in CHECKS]
    results.append(run_check("recipe reproduction", lambda: check_recipes(recipes_dir)))
    return results, render_selftest_report(results)
