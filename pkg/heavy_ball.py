"""
The Heavy Ball method x_{k+1} = x_k - alpha grad f(x_k) + beta (x_k - x_{k-1}).

Covers the optimal and convergent parameterizations, trajectory recording,
the per-coordinate (modal) analysis on diagonal quadratics and the worst-case
peak bound sqrt(kappa) / (2e).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import DEFAULT_GRAD_TOL, DIVERGENCE_NORM, MODAL_BOUNDARY_FRACTION
from lyapunov import LyapunovConfig, lyapunov_value
from objective import DiagonalQuadratic, Objective
from recurrence import (
    RootClassification,
    SecondOrderRecurrence,
    characteristic_roots,
    equal_roots_value,
)
from utils import DivergenceError, as_vector, check_dimension, int_power

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HBParams:
    """Step size alpha > 0 and momentum beta >= 0."""
    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be nonnegative, got {self.beta}")


class TrajectoryEvent(str, Enum):
    NONE = "none"
    RESTART = "restart"
    L_DOUBLED = "L-doubled"


class RunStatus(str, Enum):
    FIXED = "fixed"           # ran the requested number of steps
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"


@dataclass
class TrajectoryRecord:
    k: int
    x: np.ndarray
    f: float
    x_norm: float
    grad_norm: float
    V: Optional[float] = None
    event: TrajectoryEvent = TrajectoryEvent.NONE
    alpha: Optional[float] = None
    beta: Optional[float] = None
    L_estimate: Optional[float] = None


@dataclass
class ParamsChange:
    """Parameters in force from iteration k on, with V of the current pair rescored under them."""
    k: int
    params: HBParams
    L_estimate: Optional[float]
    V_rescored: Optional[float] = None


@dataclass
class Trajectory:
    records: List[TrajectoryRecord] = field(default_factory=list)
    params_history: List[ParamsChange] = field(default_factory=list)
    status: RunStatus = RunStatus.FIXED

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: TrajectoryRecord) -> None:
        expected = len(self.records)
        if record.k != expected:
            raise ValueError(f"Trajectory indices must be contiguous: expected {expected}, got {record.k}")
        self.records.append(record)

    @property
    def xs(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    def column(self, name: str) -> List:
        return [getattr(r, name) for r in self.records]

    @property
    def f_values(self) -> np.ndarray:
        return np.array(self.column("f"))

    @property
    def norms(self) -> np.ndarray:
        return np.array(self.column("x_norm"))

    @property
    def V_values(self) -> np.ndarray:
        return np.array([np.nan if v is None else v for v in self.column("V")])

    def count_events(self, event: TrajectoryEvent) -> int:
        return sum(1 for r in self.records if r.event == event)

    @property
    def final(self) -> TrajectoryRecord:
        return self.records[-1]


def optimal_params(mu: float, L: float) -> HBParams:
    """
    Fastest-rate parameters on quadratics with spectrum in [mu, L].

    alpha = 4 / (sqrt(L) + sqrt(mu))^2, beta = q^2 with
    q = (sqrt(L) - sqrt(mu)) / (sqrt(L) + sqrt(mu)).

    Raises:
        ValueError: Unless 0 < mu <= L
    """
    if not 0 < mu <= L:
        raise ValueError(f"Need 0 < mu <= L, got mu={mu}, L={L}")
    s_l, s_m = math.sqrt(L), math.sqrt(mu)
    alpha = 4.0 / (s_l + s_m) ** 2
    beta = ((s_l - s_m) / (s_l + s_m)) ** 2
    return HBParams(alpha=alpha, beta=beta)


def convergence_rate(mu: float, L: float) -> float:
    """q = (sqrt(L) - sqrt(mu)) / (sqrt(L) + sqrt(mu))."""
    if not 0 < mu <= L:
        raise ValueError(f"Need 0 < mu <= L, got mu={mu}, L={L}")
    s_l, s_m = math.sqrt(L), math.sqrt(mu)
    return (s_l - s_m) / (s_l + s_m)


def in_convergence_region(params: Union[HBParams, Tuple[float, float]], L: float) -> bool:
    """
    0 <= beta < 1 and 0 < alpha < 2 (1 + beta) / L.

    Accepts a raw (alpha, beta) pair so that points outside the valid
    parameter set can be checked.
    """
    alpha, beta = (params.alpha, params.beta) if isinstance(params, HBParams) else params
    return 0.0 <= beta < 1.0 and 0.0 < alpha < 2.0 * (1.0 + beta) / L


def step(obj: Objective, x_k, x_prev, params: HBParams) -> np.ndarray:
    """
    One Heavy Ball step.

    Raises:
        ValueError: On dimension mismatch
    """
    x_k = as_vector(x_k, "x_k")
    x_prev = as_vector(x_prev, "x_prev")
    check_dimension(x_k, obj.dim, "x_k")
    check_dimension(x_prev, obj.dim, "x_prev")
    return step_unchecked(obj, x_k, x_prev, params)


def step_unchecked(obj: Objective, x_k: np.ndarray, x_prev: np.ndarray, params: HBParams) -> np.ndarray:
    return x_k - params.alpha * obj.grad(x_k) + params.beta * (x_k - x_prev)


def standard_init(x0) -> Tuple[np.ndarray, np.ndarray]:
    """Traditional start x1 = x0: the first step is a plain gradient step."""
    x0 = as_vector(x0, "x0")
    return x0, x0.copy()


def worst_case_initial_pair(dim: int, which: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Initial pairs producing the largest peaks with optimal parameters.

    Args:
        dim: Problem dimension (eigenvalues sorted ascending)
        which: "e1" for x0 = -e1, x1 = e1; "en" for x0 = x1 = e_n

    Returns:
        Tuple (x0, x1)
    """
    if which == "e1":
        x1 = np.zeros(dim)
        x1[0] = 1.0
        return -x1, x1
    if which == "en":
        x0 = np.zeros(dim)
        x0[-1] = 1.0
        return x0, x0.copy()
    raise ValueError(f"Unknown worst-case pair '{which}', expected 'e1' or 'en'")


def is_divergent(x: np.ndarray) -> bool:
    return not np.all(np.isfinite(x)) or float(np.linalg.norm(x)) > DIVERGENCE_NORM


def make_record(obj: Objective, k: int, x: np.ndarray, x_prev: Optional[np.ndarray],
                params: Optional[HBParams] = None, lyapunov: Optional[LyapunovConfig] = None,
                event: TrajectoryEvent = TrajectoryEvent.NONE,
                L_estimate: Optional[float] = None) -> TrajectoryRecord:
    """Evaluate the recorded quantities for iterate k."""
    f, g = obj.eval_and_grad(x)
    V = None
    if lyapunov is not None:
        V = lyapunov_value(obj, x, x if x_prev is None else x_prev, lyapunov)
    return TrajectoryRecord(
        k=k,
        x=x,
        f=f,
        x_norm=float(np.linalg.norm(x)),
        grad_norm=float(np.linalg.norm(g)),
        V=V,
        event=event,
        alpha=None if params is None else params.alpha,
        beta=None if params is None else params.beta,
        L_estimate=L_estimate,
    )


def _run(obj: Objective, x0, x1, params: HBParams, max_steps: int,
         grad_tol: Optional[float], lyapunov: Optional[LyapunovConfig]) -> Trajectory:
    x0 = as_vector(x0, "x0")
    x1 = as_vector(x1, "x1")
    check_dimension(x0, obj.dim, "x0")
    check_dimension(x1, obj.dim, "x1")
    if max_steps < 1:
        raise ValueError(f"K must be at least 1, got {max_steps}")

    L_estimate = None if lyapunov is None else lyapunov.L
    traj = Trajectory()
    traj.params_history.append(ParamsChange(k=0, params=params, L_estimate=L_estimate))
    traj.append(make_record(obj, 0, x0, None, params, lyapunov, L_estimate=L_estimate))
    if is_divergent(x1):
        raise DivergenceError("Initial iterate x1 is not finite", 0, traj)
    traj.append(make_record(obj, 1, x1, x0, params, lyapunov, L_estimate=L_estimate))

    x_prev, x_curr = x0, x1
    for k in range(2, max_steps + 1):
        if grad_tol is not None and traj.final.grad_norm <= grad_tol:
            traj.status = RunStatus.CONVERGED
            logger.debug(f"Converged at k={k - 1}")
            return traj
        x_next = step_unchecked(obj, x_curr, x_prev, params)
        if is_divergent(x_next):
            logger.warning(f"Heavy Ball diverged at k={k} with alpha={params.alpha}, beta={params.beta}")
            raise DivergenceError("Heavy Ball iterates diverged", k - 1, traj)
        traj.append(make_record(obj, k, x_next, x_curr, params, lyapunov, L_estimate=L_estimate))
        x_prev, x_curr = x_curr, x_next

    if grad_tol is not None:
        converged = traj.final.grad_norm <= grad_tol
        traj.status = RunStatus.CONVERGED if converged else RunStatus.MAX_ITERS
    return traj


def run(obj: Objective, x0, x1, params: HBParams, K: int,
        lyapunov: Optional[LyapunovConfig] = None) -> Trajectory:
    """
    Run K - 1 Heavy Ball steps from the pair (x0, x1).

    Args:
        obj: Objective to minimize
        x0: Iterate 0
        x1: Iterate 1
        params: Step size and momentum
        K: Index of the last iterate, K >= 1
        lyapunov: When given, V_k is recorded for every iterate

    Returns:
        Trajectory with K + 1 records

    Raises:
        DivergenceError: If an iterate is non-finite or exceeds DIVERGENCE_NORM
    """
    return _run(obj, x0, x1, params, K, None, lyapunov)


def run_standard(obj: Objective, x0, params: HBParams, K: int,
                 lyapunov: Optional[LyapunovConfig] = None) -> Trajectory:
    """run() from the standard initialization x1 = x0."""
    x0, x1 = standard_init(x0)
    return run(obj, x0, x1, params, K, lyapunov)


def run_to_tolerance(obj: Objective, x0, x1, params: HBParams, max_iters: int,
                     grad_tol: float = DEFAULT_GRAD_TOL,
                     lyapunov: Optional[LyapunovConfig] = None) -> Trajectory:
    """Run until ||grad f(x_k)|| <= grad_tol or max_iters; the status records which."""
    return _run(obj, x0, x1, params, max_iters, grad_tol, lyapunov)


@dataclass(frozen=True)
class ModalRoots:
    """Root classification of every eigen-coordinate under optimal parameters."""
    eigenvalues: Tuple[float, ...]
    roots: Tuple[RootClassification, ...]


def modal_recurrence(lam: float, params: HBParams, xi0: float = 0.0, xi1: float = 1.0) -> SecondOrderRecurrence:
    """Scalar recurrence followed by the coordinate with eigenvalue lam."""
    return SecondOrderRecurrence(a1=1.0 - params.alpha * lam + params.beta, a2=-params.beta, x0=xi0, x1=xi1)


def modal_roots(lam: float, mu: float, L: float) -> RootClassification:
    """
    Roots of rho^2 - (1 - alpha lam + beta) rho + beta under optimal parameters.

    Equal{q} at lam = mu, Equal{-q} at lam = L, a complex pair of modulus q inside.

    Raises:
        ValueError: If lam lies outside [mu, L]
    """
    if not mu <= lam <= L:
        raise ValueError(f"Eigenvalue {lam} outside [{mu}, {L}]")
    return characteristic_roots(modal_recurrence(lam, optimal_params(mu, L)))


def modal_decomposition(quadratic: DiagonalQuadratic) -> ModalRoots:
    mu, L = quadratic.mu, quadratic.L
    lams = tuple(float(v) for v in quadratic.eigenvalues)
    return ModalRoots(eigenvalues=lams, roots=tuple(modal_roots(v, mu, L) for v in lams))


def modal_closed_form(lam: float, mu: float, L: float, xi0: float, xi1: float, k: int) -> float:
    """
    Closed form of one eigen-coordinate under optimal parameters.

    Inside (mu, L) the solution is [C1 cos(omega k) + C2 sin(omega k)] q^k with
    cos(omega) = (L + mu - 2 lam) / (L - mu) and
    sin(omega) = 2 sqrt(lam - mu) sqrt(L - lam) / (L - mu). Within
    MODAL_BOUNDARY_FRACTION * (L - mu) of an endpoint the double-root form
    with rho = q (near mu) or rho = -q (near L) is used instead.
    """
    if not mu <= lam <= L:
        raise ValueError(f"Eigenvalue {lam} outside [{mu}, {L}]")
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    q = convergence_rate(mu, L)
    width = L - mu
    if lam - mu <= MODAL_BOUNDARY_FRACTION * width:
        return equal_roots_value(q, xi0, xi1, k)
    if L - lam <= MODAL_BOUNDARY_FRACTION * width:
        return equal_roots_value(-q, xi0, xi1, k)

    root_prod = math.sqrt(lam - mu) * math.sqrt(L - lam)
    cos_w = (L + mu - 2.0 * lam) / width
    sin_w = 2.0 * root_prod / width
    omega = math.atan2(sin_w, cos_w)
    c1 = xi0
    c2 = (xi1 * (math.sqrt(L) + math.sqrt(mu)) ** 2 - xi0 * (L + mu - 2.0 * lam)) / (2.0 * root_prod)
    return (c1 * math.cos(omega * k) + c2 * math.sin(omega * k)) * int_power(q, k)


def peak_lower_bound(kappa: float) -> float:
    """Worst-case peak sqrt(kappa) / (2e) of the optimally tuned method."""
    if kappa < 1:
        raise ValueError(f"kappa must be at least 1, got {kappa}")
    return math.sqrt(kappa) / (2.0 * math.e)


def count_sign_changes(values: Iterable[float]) -> int:
    """Number of strict sign flips in a sequence, zeros skipped."""
    signs = [v > 0 for v in values if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def max_norm(traj: Trajectory) -> float:
    return float(np.max(traj.norms))


def coordinate_trace(traj: Trajectory, index: int) -> np.ndarray:
    return traj.xs[:, index]


def run_sweep(obj: Objective, x0, x1, params_list: Sequence[HBParams], K: int,
              max_workers: Optional[int] = None) -> List[Trajectory]:
    """Independent runs for several parameter pairs, returned in input order."""
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(lambda p: run(obj, x0, x1, p, K), params_list))
