"""
Objective functions: value, gradient, optimum and curvature constants.

Built-ins are centered so that the minimizer is the origin and f* = 0.
"""
import abc
import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np

from config import (
    FD_STEP_SCALE,
    PL_GAP_FLOOR,
    PL_GRID_HI,
    PL_GRID_LO,
    PL_GRID_POINTS,
    SPECTRUM_RULES,
)
from utils import as_vector, check_dimension

logger = logging.getLogger(__name__)


class Objective(abc.ABC):
    """
    Behavior contract shared by every objective.

    Attributes:
        dim: Dimension of the domain
        f_star: Known optimal value, or None
        L_hint: Declared Lipschitz constant of the gradient, or None
        mu_hint: Declared strong convexity / PL constant, or None
    """

    dim: int
    f_star: Optional[float] = None
    L_hint: Optional[float] = None
    mu_hint: Optional[float] = None

    @abc.abstractmethod
    def eval(self, x: np.ndarray) -> float:
        """Objective value at x."""

    @abc.abstractmethod
    def grad(self, x: np.ndarray) -> np.ndarray:
        """Gradient at x."""

    @property
    def minimizer(self) -> Optional[np.ndarray]:
        return None

    def eval_and_grad(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        return self.eval(x), self.grad(x)

    def eval_and_grad_batch(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Values and derivatives of a one-dimensional objective on a grid.

        Subclasses override this with a vectorized version.
        """
        values = np.empty_like(points)
        derivs = np.empty_like(points)
        for i, p in enumerate(points):
            f, g = self.eval_and_grad(np.array([p]))
            values[i], derivs[i] = f, g[0]
        return values, derivs


class DiagonalQuadratic(Objective):
    """f(x) = 1/2 sum_i lambda_i x_i^2 with all lambda_i > 0."""

    def __init__(self, eigenvalues):
        lam = as_vector(eigenvalues, "eigenvalues")
        if lam.size == 0:
            raise ValueError("At least one eigenvalue is required")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("Eigenvalues must be finite and positive")
        self.eigenvalues = lam
        self.dim = lam.size
        self.f_star = 0.0
        self.L_hint = float(lam.max())
        self.mu_hint = float(lam.min())

    @classmethod
    def from_spectrum(cls, mu: float, L: float, dim: int, rule: str = "log-uniform",
                      seed: int = 0) -> "DiagonalQuadratic":
        """
        Generate a spectrum between mu and L including both endpoints.

        Args:
            mu: Smallest eigenvalue
            L: Largest eigenvalue
            dim: Number of eigenvalues
            rule: "log-uniform" (seeded random draws) or "geometric" (evenly spaced logs)
            seed: Seed for the log-uniform draws

        Returns:
            DiagonalQuadratic with sorted eigenvalues
        """
        if rule not in SPECTRUM_RULES:
            raise ValueError(f"Unknown spectrum rule '{rule}', expected one of {SPECTRUM_RULES}")
        if not 0 < mu <= L:
            raise ValueError(f"Need 0 < mu <= L, got mu={mu}, L={L}")
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        if dim == 1:
            if mu != L:
                raise ValueError("A one-dimensional spectrum needs mu == L")
            return cls([mu])
        if rule == "geometric":
            lam = np.geomspace(mu, L, dim)
        else:
            rng = np.random.default_rng(seed)
            interior = np.exp(rng.uniform(math.log(mu), math.log(L), dim - 2))
            lam = np.sort(np.concatenate(([mu], interior, [L])))
        lam[0], lam[-1] = mu, L
        return cls(lam)

    @property
    def mu(self) -> float:
        return self.mu_hint

    @property
    def L(self) -> float:
        return self.L_hint

    @property
    def kappa(self) -> float:
        return self.L / self.mu

    @property
    def minimizer(self) -> np.ndarray:
        return np.zeros(self.dim)

    def eval(self, x: np.ndarray) -> float:
        return 0.5 * float(np.sum(self.eigenvalues * x * x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.eigenvalues * x

    def eval_and_grad_batch(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        lam = self.eigenvalues[0]
        return 0.5 * lam * points * points, lam * points


class NonconvexPLObjective(Objective):
    """
    f(x) = x^2 + 3 sin^2(x) on the real line.

    Nonconvex (f'' = 2 + 6 cos 2x changes sign) yet its only stationary point
    is the global minimum at 0, so it satisfies the PL inequality with a
    constant certified numerically on a grid.
    """

    def __init__(self, lo: float = PL_GRID_LO, hi: float = PL_GRID_HI,
                 n_grid: int = PL_GRID_POINTS):
        self.dim = 1
        self.f_star = 0.0
        self.L_hint = 8.0  # max |f''|
        self.L_certified = 8.0
        self._grid = (lo, hi, n_grid)
        self._mu_certified: Optional[float] = None

    @property
    def mu_certified(self) -> float:
        if self._mu_certified is None:
            self._mu_certified = certify_pl_constant(self, *self._grid)
            logger.info(f"Certified PL constant {self._mu_certified:.6g} on {self._grid}")
        return self._mu_certified

    @property
    def mu_hint(self) -> float:
        return self.mu_certified

    @property
    def minimizer(self) -> np.ndarray:
        return np.zeros(1)

    def eval(self, x: np.ndarray) -> float:
        s = math.sin(x[0])
        return x[0] * x[0] + 3.0 * s * s

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.array([2.0 * x[0] + 3.0 * math.sin(2.0 * x[0])])

    def second_derivative(self, points: np.ndarray) -> np.ndarray:
        return 2.0 + 6.0 * np.cos(2.0 * points)

    def eval_and_grad_batch(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        s = np.sin(points)
        return points * points + 3.0 * s * s, 2.0 * points + 3.0 * np.sin(2.0 * points)


class CallableObjective(Objective):
    """User-supplied objective given by value and gradient callables."""

    def __init__(self, func: Callable[[np.ndarray], float], gradient: Callable[[np.ndarray], np.ndarray],
                 dim: int, f_star: Optional[float] = None, L_hint: Optional[float] = None,
                 mu_hint: Optional[float] = None, minimizer=None):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self._func = func
        self._gradient = gradient
        self.dim = dim
        self.f_star = f_star
        self.L_hint = L_hint
        self.mu_hint = mu_hint
        self._minimizer = None if minimizer is None else as_vector(minimizer, "minimizer")

    @property
    def minimizer(self) -> Optional[np.ndarray]:
        return self._minimizer

    def eval(self, x: np.ndarray) -> float:
        return float(self._func(x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return as_vector(self._gradient(x), "gradient")


def eval_and_grad(obj: Objective, x) -> Tuple[float, np.ndarray]:
    """
    Value and gradient at x from one code path.

    Raises:
        ValueError: If x has the wrong dimension
    """
    x = as_vector(x)
    check_dimension(x, obj.dim)
    return obj.eval_and_grad(x)


def pl_ratio(obj: Objective, x) -> float:
    """
    ||grad f(x)||^2 / (2 (f(x) - f*)).

    Raises:
        ValueError: If f* is unknown or f(x) does not exceed it
    """
    if obj.f_star is None:
        raise ValueError("pl_ratio needs a known optimal value f*")
    f, g = eval_and_grad(obj, x)
    gap = f - obj.f_star
    if gap <= 0:
        raise ValueError("pl_ratio is undefined at points with f(x) = f*")
    return float(np.dot(g, g)) / (2.0 * gap)


def certify_pl_constant(obj: Objective, lo: float, hi: float, n_grid: int) -> float:
    """
    Smallest PL ratio over a uniform grid on [lo, hi].

    Points with f(x) - f* below PL_GAP_FLOOR are skipped.

    Raises:
        ValueError: For multi-dimensional objectives, unknown f*, or an empty grid
    """
    if obj.dim != 1:
        raise ValueError("PL certification works on one-dimensional objectives")
    if obj.f_star is None:
        raise ValueError("PL certification needs a known optimal value f*")
    if n_grid < 1:
        raise ValueError(f"n_grid must be positive, got {n_grid}")
    points = np.linspace(lo, hi, n_grid)
    values, derivs = obj.eval_and_grad_batch(points)
    gaps = values - obj.f_star
    mask = gaps >= PL_GAP_FLOOR
    if not np.any(mask):
        raise ValueError("No grid point has f(x) - f* above the floor")
    ratios = derivs[mask] ** 2 / (2.0 * gaps[mask])
    return float(ratios.min())


def finite_difference_step(x: np.ndarray) -> float:
    return FD_STEP_SCALE * max(1.0, float(np.max(np.abs(x))))


def gradient_check(obj: Objective, x, h: Optional[float] = None) -> float:
    """
    Largest relative error between grad and central differences.

    Args:
        obj: Objective to check
        x: Point of evaluation
        h: Difference step, defaults to FD_STEP_SCALE * max(1, ||x||_inf)

    Returns:
        max_i |g_i - d_i| / max(1, |d_i|) with d_i the central difference
    """
    x = as_vector(x)
    check_dimension(x, obj.dim)
    if h is None:
        h = finite_difference_step(x)
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    g = obj.grad(x)
    worst = 0.0
    for i in range(obj.dim):
        e = np.zeros(obj.dim)
        e[i] = h
        d = (obj.eval(x + e) - obj.eval(x - e)) / (2.0 * h)
        worst = max(worst, abs(g[i] - d) / max(1.0, abs(d)))
    return worst
