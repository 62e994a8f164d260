"""
Restart policies and the adaptive Heavy Ball method with L-doubling.

A restart clears the momentum memory: the pair (x_k, x_{k-1}) becomes
(x_k, x_k), so the next step is a plain gradient step. The adaptive method
keeps an estimate of L, derives (alpha, beta) from it inside the monotone-V
region and doubles it whenever the Lyapunov function or the relaxed descent
lemma shows the estimate is too small.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from config import (
    ACCEPT_SLACK,
    ADAPTIVE_ROW,
    ALPHA_FRACTION,
    BETA_FRACTION,
    COMPARE_TOL,
    DEFAULT_EPS,
    DEFAULT_GRAD_TOL,
    DEFAULT_MAX_ITERS,
    MAX_DOUBLINGS,
    MAX_WORKERS,
)
from heavy_ball import (
    HBParams,
    ParamsChange,
    RunStatus,
    Trajectory,
    TrajectoryEvent,
    is_divergent,
    make_record,
    step_unchecked,
)
from lyapunov import LyapunovConfig, lyapunov_value
from objective import Objective
from utils import AdaptiveAbort, DivergenceError, as_vector, check_dimension

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoRestart:
    @property
    def name(self) -> str:
        return "none"


@dataclass(frozen=True)
class FixedInterval:
    """Restart every period iterations."""
    period: int

    def __post_init__(self):
        if self.period < 2:
            raise ValueError(f"Restart period must be at least 2, got {self.period}")

    @property
    def name(self) -> str:
        return f"fixed:{self.period}"


@dataclass(frozen=True)
class FunctionScheme:
    """Restart when f(x_k) > f(x_{k-1})."""

    @property
    def name(self) -> str:
        return "function"


@dataclass(frozen=True)
class GradientScheme:
    """Restart when grad f(x_{k-1})^T (x_k - x_{k-1}) > 0."""

    @property
    def name(self) -> str:
        return "gradient"


@dataclass(frozen=True)
class LyapunovScheme:
    """Restart when V_k > V_{k-1}."""

    @property
    def name(self) -> str:
        return "lyapunov"


RestartPolicy = Union[NoRestart, FixedInterval, FunctionScheme, GradientScheme, LyapunovScheme]

_NAMED_POLICIES = {
    "none": NoRestart,
    "function": FunctionScheme,
    "gradient": GradientScheme,
    "lyapunov": LyapunovScheme,
}


def parse_policy(text: str) -> RestartPolicy:
    """
    Parse "none", "function", "gradient", "lyapunov" or "fixed:<period>".

    Raises:
        ValueError: On an unknown name or a bad period
    """
    name = text.strip().lower()
    if name in _NAMED_POLICIES:
        return _NAMED_POLICIES[name]()
    if name.startswith("fixed:"):
        period = name.split(":", 1)[1]
        try:
            return FixedInterval(int(period))
        except ValueError as e:
            raise ValueError(f"Invalid fixed restart period '{period}': {e}") from e
    raise ValueError(f"Unknown restart policy '{text}'")


def should_restart(policy: RestartPolicy, obj: Objective, x_k, x_prev,
                   V_k: Optional[float] = None, V_prev: Optional[float] = None, k: int = 0) -> bool:
    """
    Evaluate the restart predicate of a policy.

    Args:
        policy: Restart policy
        obj: Objective
        x_k: Newest iterate
        x_prev: Previous iterate
        V_k: Lyapunov value at (x_k, x_prev), needed by LyapunovScheme
        V_prev: Lyapunov value one step earlier, needed by LyapunovScheme
        k: Iteration index of x_k

    Raises:
        ValueError: If LyapunovScheme is missing V values
    """
    if isinstance(policy, NoRestart):
        return False
    if isinstance(policy, FixedInterval):
        return k % policy.period == 0
    if isinstance(policy, FunctionScheme):
        return obj.eval(x_k) > obj.eval(x_prev)
    if isinstance(policy, GradientScheme):
        return float(np.dot(obj.grad(x_prev), x_k - x_prev)) > 0.0
    if isinstance(policy, LyapunovScheme):
        if V_k is None or V_prev is None:
            raise ValueError("The Lyapunov scheme needs V_k and V_prev")
        return V_k > V_prev
    raise TypeError(f"Unknown restart policy {policy!r}")


def apply_restart(x_curr, x_prev):
    """Clear the momentum memory: (x_curr, x_prev) -> (x_curr, x_curr)."""
    x_curr = as_vector(x_curr, "x_curr")
    return x_curr.copy(), x_curr.copy()


def descent_check_eps(obj: Objective, x_k, x_prev, L: float, eps: float) -> bool:
    """
    Relaxed descent lemma
    f(x_k) <= f(x_prev) + <grad f(x_prev), x_k - x_prev> + L/2 ||x_k - x_prev||^2 + eps/2.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x_k = as_vector(x_k, "x_k")
    x_prev = as_vector(x_prev, "x_prev")
    f_prev, g_prev = obj.eval_and_grad(x_prev)
    d = x_k - x_prev
    bound = f_prev + float(np.dot(g_prev, d)) + 0.5 * L * float(np.dot(d, d)) + 0.5 * eps
    return obj.eval(x_k) <= bound


def select_params(L_estimate: float, alpha_fraction: float = ALPHA_FRACTION,
                  beta_fraction: float = BETA_FRACTION) -> HBParams:
    """
    alpha = alpha_fraction / L, beta = beta_fraction sqrt(1 - alpha L).

    The defaults give the centre of the step interval (0, 1/L) and 90% of
    the largest momentum that keeps V_k monotone.
    """
    if not L_estimate > 0:
        raise ValueError(f"L estimate must be positive, got {L_estimate}")
    if not 0.0 < alpha_fraction < 1.0:
        raise ValueError(f"alpha_fraction must lie in (0, 1), got {alpha_fraction}")
    if not 0.0 <= beta_fraction <= 1.0:
        raise ValueError(f"beta_fraction must lie in [0, 1], got {beta_fraction}")
    alpha = alpha_fraction / L_estimate
    return HBParams(alpha=alpha, beta=beta_fraction * math.sqrt(1.0 - alpha * L_estimate))


def _prepare_pair(obj: Objective, x0, x1):
    x0 = as_vector(x0, "x0")
    x1 = x0.copy() if x1 is None else as_vector(x1, "x1")
    check_dimension(x0, obj.dim, "x0")
    check_dimension(x1, obj.dim, "x1")
    return x0, x1


def run_with_policy(obj: Objective, x0, x1, params: HBParams, policy: RestartPolicy, K: int,
                    f_tol: Optional[float] = None, grad_tol: Optional[float] = None,
                    lyapunov: Optional[LyapunovConfig] = None) -> Trajectory:
    """
    Heavy Ball with a restart policy.

    A restart is applied after x_k is accepted: the record of x_k carries the
    restart event and the next step starts from (x_k, x_k). V is recorded
    with the given config, or with one built from obj whenever alpha < 1/L.

    Args:
        obj: Objective
        x0: Iterate 0
        x1: Iterate 1, defaults to x0
        params: Step size and momentum
        policy: Restart policy
        K: Index of the last iterate
        f_tol: Stop once f(x_k) - f* <= f_tol (needs a known f*)
        grad_tol: Stop once ||grad f(x_k)|| <= grad_tol
        lyapunov: Config for V_k, also used by the Lyapunov scheme

    Returns:
        Trajectory; with a tolerance its status is converged or max_iters,
        otherwise fixed

    Raises:
        RangeError: If the Lyapunov scheme is used with alpha >= 1/L
        DivergenceError: If the iterates blow up
    """
    x0, x1 = _prepare_pair(obj, x0, x1)
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    if f_tol is not None and obj.f_star is None:
        raise ValueError("f_tol needs a known optimal value f*")

    cfg = lyapunov
    if cfg is None and (isinstance(policy, LyapunovScheme)
                        or (obj.L_hint is not None and params.alpha * obj.L_hint < 1.0)):
        cfg = LyapunovConfig.for_objective(obj, params)
    if obj.L_hint is not None and params.alpha * obj.L_hint >= 2.0 and not isinstance(policy, NoRestart):
        logger.warning(f"alpha*L = {params.alpha * obj.L_hint:.3g} >= 2: gradient steps after a restart expand the top mode")

    traj = Trajectory()
    traj.params_history.append(ParamsChange(k=0, params=params, L_estimate=obj.L_hint))
    traj.append(make_record(obj, 0, x0, None, params, cfg))
    traj.append(make_record(obj, 1, x1, x0, params, cfg))

    def reached(record) -> bool:
        if f_tol is not None and record.f - obj.f_star <= f_tol:
            return True
        return grad_tol is not None and record.grad_norm <= grad_tol

    x_prev, x_curr = x0, x1
    V_curr = traj.final.V
    for k in range(2, K + 1):
        if reached(traj.final):
            traj.status = RunStatus.CONVERGED
            return traj
        x_next = step_unchecked(obj, x_curr, x_prev, params)
        if is_divergent(x_next):
            raise DivergenceError(f"Heavy Ball with {policy.name} restarts diverged", k - 1, traj)
        V_next = None if cfg is None else lyapunov_value(obj, x_next, x_curr, cfg)
        fire = should_restart(policy, obj, x_next, x_curr, V_next, V_curr, k)
        event = TrajectoryEvent.RESTART if fire else TrajectoryEvent.NONE
        record = make_record(obj, k, x_next, x_curr, params, None, event)
        record.V = V_next
        traj.append(record)
        if fire:
            logger.debug(f"{policy.name} restart at k={k}")
            x_curr, x_prev = apply_restart(x_next, x_curr)
            V_curr = None if cfg is None else lyapunov_value(obj, x_curr, x_prev, cfg)
        else:
            x_prev, x_curr = x_curr, x_next
            V_curr = V_next

    if f_tol is not None or grad_tol is not None:
        traj.status = RunStatus.CONVERGED if reached(traj.final) else RunStatus.MAX_ITERS
    return traj


@dataclass
class AdaptiveState:
    """
    Working state of the adaptive method.

    L_estimate is always L0 * 2^doublings and params come from select_params.
    """
    L0: float
    params: HBParams
    x_curr: np.ndarray
    x_prev: np.ndarray
    k: int = 1
    doublings: int = 0
    alpha_fraction: float = ALPHA_FRACTION
    beta_fraction: float = BETA_FRACTION

    @property
    def L_estimate(self) -> float:
        return self.L0 * 2.0 ** self.doublings

    def double(self) -> None:
        self.doublings += 1
        if self.doublings > MAX_DOUBLINGS:
            raise AdaptiveAbort(f"L estimate doubled more than {MAX_DOUBLINGS} times (L0={self.L0})")
        self.params = select_params(self.L_estimate, self.alpha_fraction, self.beta_fraction)
        logger.info(f"Doubled L estimate to {self.L_estimate:.6g} at k={self.k}")


def _lyapunov_config(obj: Objective, state: AdaptiveState) -> LyapunovConfig:
    return LyapunovConfig.for_objective(obj, state.params, L=state.L_estimate)


def adaptive_run(obj: Objective, x0, L0: float, eps: float = DEFAULT_EPS,
                 max_iters: int = DEFAULT_MAX_ITERS, grad_tol: float = DEFAULT_GRAD_TOL,
                 x1=None, alpha_fraction: float = ALPHA_FRACTION,
                 beta_fraction: float = BETA_FRACTION) -> Trajectory:
    """
    Adaptive Heavy Ball with L-doubling.

    Each candidate step from (x_k, x_{k-1}) is tested: if V rises by more
    than max(eps/2, ACCEPT_SLACK |V_k|) or the eps-relaxed descent lemma
    fails for the current estimate, L is doubled, (alpha, beta) re-derived,
    the candidate discarded and the step recomputed from the same pair.

    Args:
        obj: Objective
        x0: Starting point
        L0: Initial estimate of L
        eps: Slack of the relaxed tests
        max_iters: Largest iterate index
        grad_tol: Stop once ||grad f(x_k)|| <= grad_tol
        x1: Second iterate, defaults to x0 (gradient first step)
        alpha_fraction: Step as a fraction of 1/L
        beta_fraction: Momentum as a fraction of sqrt(1 - alpha L)

    Returns:
        Trajectory of accepted iterates with L-doubled events and params_history

    Raises:
        AdaptiveAbort: After more than MAX_DOUBLINGS doublings
        DivergenceError: If an iterate is non-finite
    """
    if not L0 > 0:
        raise ValueError(f"L0 must be positive, got {L0}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be at least 1, got {max_iters}")
    x0, x1 = _prepare_pair(obj, x0, x1)

    state = AdaptiveState(
        L0=L0,
        params=select_params(L0, alpha_fraction, beta_fraction),
        x_curr=x1,
        x_prev=x0,
        alpha_fraction=alpha_fraction,
        beta_fraction=beta_fraction,
    )
    cfg = _lyapunov_config(obj, state)
    traj = Trajectory()
    traj.append(make_record(obj, 0, x0, None, state.params, cfg, L_estimate=L0))
    traj.append(make_record(obj, 1, x1, x0, state.params, cfg, L_estimate=L0))
    V_curr = traj.final.V
    traj.params_history.append(ParamsChange(k=0, params=state.params, L_estimate=L0, V_rescored=traj.records[0].V))
    if not math.isfinite(V_curr):
        raise DivergenceError("Initial pair has a non-finite Lyapunov value", 0, traj)

    pending = TrajectoryEvent.NONE
    while True:
        if traj.final.grad_norm <= grad_tol:
            traj.status = RunStatus.CONVERGED
            break
        if state.k >= max_iters:
            traj.status = RunStatus.MAX_ITERS
            break

        x_next = step_unchecked(obj, state.x_curr, state.x_prev, state.params)
        if is_divergent(x_next):
            # an exploding candidate is the clearest sign of a small L estimate
            V_next, rejected = math.inf, True
        else:
            V_next = lyapunov_value(obj, x_next, state.x_curr, cfg)
            slack = max(0.5 * eps, ACCEPT_SLACK * abs(V_curr))
            rejected = not math.isfinite(V_next) or V_next > V_curr + slack or not descent_check_eps(
                obj, x_next, state.x_curr, state.L_estimate, eps)

        if rejected:
            state.double()
            cfg = _lyapunov_config(obj, state)
            V_curr = lyapunov_value(obj, state.x_curr, state.x_prev, cfg)
            traj.params_history.append(ParamsChange(
                k=state.k + 1, params=state.params, L_estimate=state.L_estimate, V_rescored=V_curr))
            pending = TrajectoryEvent.L_DOUBLED
            continue

        state.k += 1
        traj.append(make_record(obj, state.k, x_next, state.x_curr, state.params, None, pending,
                                L_estimate=state.L_estimate))
        traj.final.V = V_next
        state.x_prev, state.x_curr = state.x_curr, x_next
        V_curr = V_next
        pending = TrajectoryEvent.NONE

    logger.info(f"Adaptive run finished with status {traj.status.value} after {state.k} iterations "
                f"and {state.doublings} doublings (L estimate {state.L_estimate:.6g})")
    return traj


def count_doublings(traj: Trajectory) -> int:
    """Number of L-doublings, several at the same iterate counted separately."""
    return max(0, len(traj.params_history) - 1)


def accepted_v_monotone(traj: Trajectory, slack: float = ACCEPT_SLACK) -> bool:
    """
    Check that V never rises between accepted iterates under the same parameters.

    Across an L-doubling the reference is the V of the current pair rescored
    under the new parameters, as stored in params_history.
    """
    values = traj.V_values
    if len(values) < 2 or np.isnan(values[0]):
        return True
    tol = slack * max(1.0, float(values[0]))
    rescored = {}
    for change in traj.params_history[1:]:
        if change.V_rescored is not None:
            rescored[change.k] = change.V_rescored
    for k in range(2, len(values)):
        reference = rescored.get(k, values[k - 1])
        if values[k] > reference + tol:
            logger.debug(f"Accepted V rises at k={k}: {values[k]} > {reference}")
            return False
    return True


@dataclass
class PolicySummary:
    """One row of a policy comparison."""
    policy: str
    iterations_to_tol: Optional[int]
    restarts: int
    final_f: float
    status: str = RunStatus.MAX_ITERS.value


def iterations_to_tolerance(traj: Trajectory, f_star: float, f_tol: float) -> Optional[int]:
    for record in traj.records:
        if record.f - f_star <= f_tol:
            return record.k
    return None


def _summarize(obj: Objective, x0, x1, params: HBParams, policy: RestartPolicy, K: int,
               f_tol: float) -> PolicySummary:
    try:
        traj = run_with_policy(obj, x0, x1, params, policy, K, f_tol=f_tol)
        status = traj.status.value
    except DivergenceError as e:
        logger.warning(f"Policy {policy.name} diverged: {e}")
        traj = e.trajectory
        status = "diverged"
    return PolicySummary(
        policy=policy.name,
        iterations_to_tol=iterations_to_tolerance(traj, obj.f_star, f_tol),
        restarts=traj.count_events(TrajectoryEvent.RESTART),
        final_f=traj.final.f,
        status=status,
    )


def _summarize_adaptive(obj: Objective, x0, x1, L0: float, K: int, f_tol: float) -> PolicySummary:
    try:
        traj = adaptive_run(obj, x0, L0, max_iters=K, x1=x1)
        status = None
    except (DivergenceError, AdaptiveAbort) as e:
        logger.warning(f"Adaptive method diverged: {e}")
        traj = getattr(e, "trajectory", None)
        status = "diverged"
    if traj is None:
        return PolicySummary(policy=ADAPTIVE_ROW, iterations_to_tol=None, restarts=0,
                             final_f=math.nan, status="diverged")
    k_tol = iterations_to_tolerance(traj, obj.f_star, f_tol)
    if status is None:
        status = (RunStatus.CONVERGED if k_tol is not None else RunStatus.MAX_ITERS).value
    return PolicySummary(
        policy=ADAPTIVE_ROW,
        iterations_to_tol=k_tol,
        restarts=count_doublings(traj),
        final_f=traj.final.f,
        status=status,
    )


def compare_policies(obj: Objective, x0, x1, params_or_L0: Union[HBParams, float],
                     policies: Sequence[RestartPolicy], K: int, f_tol: float = COMPARE_TOL,
                     max_workers: int = MAX_WORKERS) -> List[PolicySummary]:
    """
    Run every policy from the same start and summarize.

    With an L estimate instead of parameters, the policies use
    select_params(L0) and the adaptive method joins as an extra row whose
    restarts column counts its L-doublings. Runs are independent and execute
    concurrently; rows come back sorted by policy name.

    Raises:
        ValueError: If there is nothing to compare or f* is unknown
    """
    adaptive = not isinstance(params_or_L0, HBParams)
    if not policies and not adaptive:
        raise ValueError("At least one restart policy is required")
    if obj.f_star is None:
        raise ValueError("Policy comparison needs a known optimal value f*")
    x0, x1 = _prepare_pair(obj, x0, x1)
    params = select_params(float(params_or_L0)) if adaptive else params_or_L0
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(_summarize, obj, x0, x1, params, p, K, f_tol) for p in policies]
        if adaptive:
            futures.append(executor.submit(_summarize_adaptive, obj, x0, x1, float(params_or_L0), K, f_tol))
        rows = [f.result() for f in futures]
    return sorted(rows, key=lambda row: row.policy)
