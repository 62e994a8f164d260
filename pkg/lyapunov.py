"""
Lyapunov functions for the Heavy Ball method.

Discrete side: V_k = f(x_k) - f* + (1 - alpha L) / (2 alpha) ||x_k - x_{k-1}||^2,
its monotonicity region and its linear rate under the PL condition.

Continuous side: the damped oscillator x'' + a x' + b grad f(x) = 0 with total
energy f(x) + ||x'||^2 / (2b), integrated by fixed-step RK4.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import DT_FRICTION, DT_GAIN, MONOTONE_TOLERANCE
from objective import Objective
from utils import DivergenceError, RangeError, as_vector, check_dimension, int_power

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LyapunovConfig:
    """
    Parameters of V_k.

    Attributes:
        alpha: Step size, 0 < alpha < 1/L
        beta: Momentum, beta >= 0
        L: Lipschitz constant (or estimate) of the gradient
        mu: PL / strong convexity constant, if known
        f_star: Optimal value used in V
        shifted: True when f* was unknown and 0 was used instead
    """
    alpha: float
    beta: float
    L: float
    mu: Optional[float] = None
    f_star: float = 0.0
    shifted: bool = False

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.alpha * self.L >= 1.0:
            raise RangeError(f"V_k needs alpha < 1/L, got alpha*L = {self.alpha * self.L}")
        if self.mu is not None and not 0 < self.mu <= self.L:
            raise ValueError(f"Need 0 < mu <= L, got mu={self.mu}, L={self.L}")

    @property
    def gamma(self) -> float:
        """Weight (1 - alpha L) / (2 alpha) of the distance term."""
        return (1.0 - self.alpha * self.L) / (2.0 * self.alpha)

    @classmethod
    def for_objective(cls, obj: Objective, params, L: Optional[float] = None) -> "LyapunovConfig":
        """
        Build a config for obj with the given Heavy Ball parameters.

        Args:
            obj: Objective supplying f*, L and mu where known
            params: Object with alpha and beta attributes
            L: Override for obj.L_hint

        Raises:
            ValueError: If no L is available
        """
        L = obj.L_hint if L is None else L
        if L is None:
            raise ValueError("A Lipschitz constant is needed to build V_k")
        mu = obj.mu_hint
        if mu is not None and mu > L:
            mu = None
        shifted = obj.f_star is None
        if shifted:
            logger.debug("f* unknown, using shifted Lyapunov function with f* = 0")
        return cls(
            alpha=params.alpha,
            beta=params.beta,
            L=L,
            mu=mu,
            f_star=0.0 if shifted else obj.f_star,
            shifted=shifted,
        )


def lyapunov_value(obj: Objective, x_k, x_prev, cfg: LyapunovConfig) -> float:
    """V_k = f(x_k) - f* + gamma ||x_k - x_prev||^2."""
    x_k = as_vector(x_k, "x_k")
    x_prev = as_vector(x_prev, "x_prev")
    check_dimension(x_k, obj.dim, "x_k")
    check_dimension(x_prev, obj.dim, "x_prev")
    d = x_k - x_prev
    return obj.eval(x_k) - cfg.f_star + cfg.gamma * float(np.dot(d, d))


def theorem2_region(alpha: float, beta: float, L: float) -> bool:
    """0 < alpha < 1/L and 0 <= beta <= sqrt(1 - alpha L): V_k is non-increasing."""
    if not (alpha > 0 and alpha * L < 1.0):
        return False
    return 0.0 <= beta <= math.sqrt(1.0 - alpha * L)


def theorem3_region(alpha: float, beta: float, L: float, mu: float) -> bool:
    """
    0 < alpha < 1/L and 0 <= beta <= sqrt((1 - alpha L)(1 - alpha mu)): V_k decays linearly.

    Raises:
        ValueError: Unless 0 < mu <= L
    """
    if not 0 < mu <= L:
        raise ValueError(f"Need 0 < mu <= L, got mu={mu}, L={L}")
    if not (alpha > 0 and alpha * L < 1.0):
        return False
    return 0.0 <= beta <= math.sqrt((1.0 - alpha * L) * (1.0 - alpha * mu))


def theorem2_beta_bound(alpha: float, L: float) -> float:
    return math.sqrt(1.0 - alpha * L)


def theorem3_beta_bound(alpha: float, L: float, mu: float) -> float:
    return math.sqrt((1.0 - alpha * L) * (1.0 - alpha * mu))


def rate_bound(V0: float, alpha: float, mu: float, k: int) -> float:
    """
    V0 (1 - alpha mu)^k.

    Raises:
        RangeError: Unless 0 < alpha mu < 1
    """
    if not 0.0 < alpha * mu < 1.0:
        raise RangeError(f"Need 0 < alpha*mu < 1, got {alpha * mu}")
    if V0 < 0:
        raise ValueError(f"V0 must be nonnegative, got {V0}")
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    return V0 * int_power(1.0 - alpha * mu, k)


def objective_upper_bound(obj: Objective, x0, x1, cfg: LyapunovConfig) -> float:
    """Bound f(x0) - f* + gamma ||x1 - x0||^2 on every f(x_k) - f* of a monotone-V run."""
    x0 = as_vector(x0, "x0")
    x1 = as_vector(x1, "x1")
    check_dimension(x0, obj.dim, "x0")
    check_dimension(x1, obj.dim, "x1")
    d = x1 - x0
    return obj.eval(x0) - cfg.f_star + cfg.gamma * float(np.dot(d, d))


def lyapunov_sequence(obj: Objective, iterates, cfg: LyapunovConfig) -> np.ndarray:
    """
    V along a sequence of iterates.

    Args:
        obj: Objective
        iterates: Trajectory (anything with an xs array) or an array of iterates, one per row
        cfg: Lyapunov parameters

    Returns:
        Array of V_k; V_0 uses x_{-1} = x_0 and equals f(x_0) - f*
    """
    xs = np.asarray(getattr(iterates, "xs", iterates), dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise ValueError("Need a non-empty sequence of iterates")
    values = np.empty(xs.shape[0])
    values[0] = lyapunov_value(obj, xs[0], xs[0], cfg)
    for k in range(1, xs.shape[0]):
        values[k] = lyapunov_value(obj, xs[k], xs[k - 1], cfg)
    return values


def first_monotonicity_violation(values: Sequence[float], rel_tol: float = MONOTONE_TOLERANCE) -> Optional[int]:
    """Index of the first V_k > V_{k-1} + rel_tol max(1, V_0), or None."""
    if len(values) == 0:
        return None
    tol = rel_tol * max(1.0, float(values[0]))
    for k in range(1, len(values)):
        if values[k] > values[k - 1] + tol:
            return k
    return None


# Continuous time


@dataclass(frozen=True, eq=False)
class ContinuousState:
    """Position x, velocity y, friction a and gradient gain b."""
    x: np.ndarray
    y: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        x = as_vector(self.x, "x")
        y = as_vector(self.y, "y")
        check_dimension(y, x.shape[0], "y")
        if not self.a > 0:
            raise ValueError(f"Friction a must be positive, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"Gain b must be positive, got {self.b}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class ContinuousSample:
    t: float
    state: ContinuousState
    energy: float


@dataclass(frozen=True)
class EnergyOrderReport:
    """
    Outcome of the step-halving check on the energy along a continuous path.

    halving_ratio compares the energy error of the dt and dt/2 runs against
    the dt/4 run; fourth-order accuracy gives about 17.
    """
    dt: float
    constant: float
    tolerance: float
    worst_increase: float
    halving_ratio: float

    @property
    def passed(self) -> bool:
        return self.worst_increase <= self.tolerance and self.halving_ratio >= 8.0


def continuous_energy(obj: Objective, state: ContinuousState) -> float:
    """f(x) + ||y||^2 / (2b)."""
    return obj.eval(state.x) + float(np.dot(state.y, state.y)) / (2.0 * state.b)


def continuous_dt_max(a: float, b: float, L: float) -> float:
    """Largest accepted step min(0.1 / a, 0.5 / sqrt(b L))."""
    return min(DT_FRICTION / a, DT_GAIN / math.sqrt(b * L))


def _step_count(dt: float, T: float) -> int:
    ratio = T / dt
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return max(1, int(nearest))
    return math.ceil(ratio)


def _rk4_step(obj: Objective, x: np.ndarray, y: np.ndarray, a: float, b: float,
              dt: float) -> Tuple[np.ndarray, np.ndarray]:
    def rhs(px, py):
        return py, -a * py - b * obj.grad(px)

    k1x, k1y = rhs(x, y)
    k2x, k2y = rhs(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y)
    k3x, k3y = rhs(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y)
    k4x, k4y = rhs(x + dt * k3x, y + dt * k3y)
    x_new = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    y_new = y + (dt / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return x_new, y_new


def _integrate(obj: Objective, state0: ContinuousState, dt: float, n_steps: int) -> List[ContinuousSample]:
    a, b = state0.a, state0.b
    x, y = state0.x, state0.y
    samples = [ContinuousSample(0.0, state0, continuous_energy(obj, state0))]
    for j in range(1, n_steps + 1):
        x, y = _rk4_step(obj, x, y, a, b, dt)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DivergenceError("Continuous simulation produced a non-finite state", j - 1, samples)
        state = ContinuousState(x=x, y=y, a=a, b=b)
        samples.append(ContinuousSample(j * dt, state, continuous_energy(obj, state)))
    return samples


def _check_step(obj: Objective, state0: ContinuousState, dt: float, T: float) -> None:
    check_dimension(state0.x, obj.dim, "x")
    if obj.L_hint is None:
        raise ValueError("simulate_continuous needs an objective with L_hint")
    if not (dt > 0 and T > 0):
        raise ValueError(f"dt and T must be positive, got dt={dt}, T={T}")
    dt_max = continuous_dt_max(state0.a, state0.b, obj.L_hint)
    if dt > dt_max:
        raise RangeError(f"dt={dt} exceeds the stability bound {dt_max}")


def simulate_continuous(obj: Objective, state0: ContinuousState, dt: float, T: float) -> List[ContinuousSample]:
    """
    Integrate x' = y, y' = -a y - b grad f(x) on [0, T] with classical RK4.

    Args:
        obj: Objective with a declared L_hint
        state0: Initial state with the friction a and gain b
        dt: Fixed step, at most min(0.1 / a, 0.5 / sqrt(b L))
        T: Horizon

    Returns:
        Samples (t, state, energy) for every step, t = 0 included

    Raises:
        RangeError: If dt exceeds the stability bound
        DivergenceError: If the state becomes non-finite
    """
    _check_step(obj, state0, dt, T)
    n_steps = _step_count(dt, T)
    logger.debug(f"Simulating {n_steps} RK4 steps of size {dt}")
    return _integrate(obj, state0, dt, n_steps)


def energy_increments(samples: Sequence[ContinuousSample]) -> np.ndarray:
    energies = np.array([s.energy for s in samples])
    return np.diff(energies)


def energy_order_check(obj: Objective, state0: ContinuousState, dt: float, T: float) -> EnergyOrderReport:
    """
    Fit the per-step energy tolerance C dt^4 by halving the step.

    The path is integrated with dt, dt/2 and dt/4. Taking dt/4 as reference,
    e1 = max |E_dt - E_ref| and e2 = max |E_dt/2 - E_ref| at shared times give
    C = e1 / (dt^4 (1 - 4^-4)) and the halving ratio e1 / e2.
    """
    _check_step(obj, state0, dt, T)
    n = _step_count(dt, T)
    coarse = np.array([s.energy for s in _integrate(obj, state0, dt, n)])
    half = np.array([s.energy for s in _integrate(obj, state0, dt / 2.0, 2 * n)])
    fine = np.array([s.energy for s in _integrate(obj, state0, dt / 4.0, 4 * n)])

    e1 = float(np.max(np.abs(coarse - fine[::4])))
    e2 = float(np.max(np.abs(half - fine[::2])))
    constant = e1 / (dt ** 4 * (1.0 - 4.0 ** -4))
    ratio = math.inf if e2 == 0.0 else e1 / e2
    increments = np.diff(coarse)
    worst = max(0.0, float(np.max(increments)))
    report = EnergyOrderReport(
        dt=dt,
        constant=constant,
        tolerance=constant * dt ** 4,
        worst_increase=worst,
        halving_ratio=ratio,
    )
    logger.info(f"Energy order check: C={constant:.3e}, worst increase={worst:.3e}, ratio={ratio:.2f}")
    return report
