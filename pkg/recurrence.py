"""
Second-order linear difference equations x_k = a1 x_{k-1} + a2 x_{k-2}.

This module iterates the recurrence, classifies the roots of its characteristic
polynomial p(lambda) = lambda^2 - a1 lambda - a2, evaluates the closed-form
solutions for each root regime and measures the peak effect: the transient
growth of a stable solution above its initial magnitude.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from config import (
    DISC_TOLERANCE,
    JURY_TOLERANCE,
    PEAK_SCAN_FACTOR,
    PEAK_SCAN_MIN,
)
from utils import ConsistencyError, RangeError, int_power

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EqualRoots:
    """Double root rho of the characteristic polynomial."""
    rho: float

    @property
    def max_modulus(self) -> float:
        return abs(self.rho)

    def coefficients(self) -> Tuple[float, float]:
        return 2.0 * self.rho, -self.rho * self.rho


@dataclass(frozen=True)
class RealDistinctRoots:
    """Two distinct real roots, lambda1 <= lambda2."""
    lambda1: float
    lambda2: float

    @property
    def max_modulus(self) -> float:
        return max(abs(self.lambda1), abs(self.lambda2))

    def coefficients(self) -> Tuple[float, float]:
        return self.lambda1 + self.lambda2, -self.lambda1 * self.lambda2


@dataclass(frozen=True)
class ComplexPairRoots:
    """Conjugate pair modulus * exp(+-i angle) with angle in (0, pi)."""
    modulus: float
    angle: float

    @property
    def max_modulus(self) -> float:
        return self.modulus

    def coefficients(self) -> Tuple[float, float]:
        return 2.0 * self.modulus * math.cos(self.angle), -self.modulus * self.modulus


RootClassification = Union[EqualRoots, RealDistinctRoots, ComplexPairRoots]


@dataclass(frozen=True)
class SecondOrderRecurrence:
    """Coefficients and initial pair of x_k = a1 x_{k-1} + a2 x_{k-2}."""
    a1: float
    a2: float
    x0: float = 0.0
    x1: float = 1.0

    @classmethod
    def from_double_root(cls, rho: float, x0: float = 0.0, x1: float = 1.0) -> "SecondOrderRecurrence":
        a1, a2 = EqualRoots(rho).coefficients()
        return cls(a1, a2, x0, x1)

    @classmethod
    def from_real_roots(cls, lambda1: float, lambda2: float,
                        x0: float = 0.0, x1: float = 1.0) -> "SecondOrderRecurrence":
        a1, a2 = RealDistinctRoots(lambda1, lambda2).coefficients()
        return cls(a1, a2, x0, x1)

    @classmethod
    def from_complex_roots(cls, modulus: float, angle: float,
                           x0: float = 0.0, x1: float = 1.0) -> "SecondOrderRecurrence":
        a1, a2 = ComplexPairRoots(modulus, angle).coefficients()
        return cls(a1, a2, x0, x1)


@dataclass(frozen=True)
class PeakReport:
    """
    Location and size of the worst-case peak for a double root rho.

    k_continuous is the stationary point of the envelope, k_star the true
    discrete maximizer (k >= 2), peak the envelope value at k_star.
    """
    rho: float
    k_continuous: float
    k_star: int
    peak: float
    eta_asymptotic: float
    k_ceiling: int


def iterate(rec: SecondOrderRecurrence, K: int) -> np.ndarray:
    """
    Iterate the recurrence and return x_0 ... x_K.

    Args:
        rec: Recurrence with its initial pair
        K: Index of the last element, K >= 1

    Returns:
        Array of K + 1 values

    Raises:
        ValueError: If K < 1
    """
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    values = [float(rec.x0), float(rec.x1)]
    a1, a2 = float(rec.a1), float(rec.a2)
    for _ in range(2, K + 1):
        values.append(a1 * values[-1] + a2 * values[-2])
    return np.array(values, dtype=np.float64)


def characteristic_roots(rec: SecondOrderRecurrence) -> RootClassification:
    """
    Classify the roots of lambda^2 - a1 lambda - a2.

    Equal roots are declared when the discriminant vanishes up to a
    scale-relative tolerance; distinct real roots use the cancellation-free
    product form for the smaller-magnitude root.
    """
    a1, a2 = float(rec.a1), float(rec.a2)
    disc = a1 * a1 + 4.0 * a2
    tau = DISC_TOLERANCE * max(1.0, a1 * a1, abs(a2))

    if abs(disc) <= tau:
        return EqualRoots(rho=a1 / 2.0)

    if disc > 0:
        s = math.sqrt(disc)
        big = (a1 + math.copysign(s, a1)) / 2.0
        # roots multiply to -a2
        small = -a2 / big
        lo, hi = sorted((big, small))
        return RealDistinctRoots(lambda1=lo, lambda2=hi)

    modulus = math.sqrt(-a2)
    angle = math.atan2(math.sqrt(-disc) / 2.0, a1 / 2.0)
    return ComplexPairRoots(modulus=modulus, angle=angle)


def max_root_modulus(rec: SecondOrderRecurrence) -> float:
    """Largest |lambda| over the numerical roots of lambda^2 - a1 lambda - a2."""
    return float(np.max(np.abs(np.roots([1.0, -float(rec.a1), -float(rec.a2)]))))


def is_stable(rec: SecondOrderRecurrence) -> bool:
    """
    True iff both roots lie strictly inside the unit disk.

    The verdict comes from the Jury conditions |a2| < 1 and |a1| < 1 - a2,
    which act on the coefficients and so see root pairs that the equal-roots
    tolerance of characteristic_roots merges. The numerical root moduli
    serve as a cross-check.

    Raises:
        ConsistencyError: If the two verdicts disagree away from the boundary
    """
    a1, a2 = float(rec.a1), float(rec.a2)
    jury_margin = min(1.0 - abs(a2), 1.0 - a2 - abs(a1))
    root_margin = 1.0 - max_root_modulus(rec)
    by_jury = jury_margin > 0
    by_roots = root_margin > 0
    if by_roots != by_jury and min(abs(root_margin), abs(jury_margin)) > JURY_TOLERANCE:
        raise ConsistencyError(
            f"Stability verdicts disagree for a1={rec.a1}, a2={rec.a2}: "
            f"roots margin {root_margin}, Jury margin {jury_margin}"
        )
    return by_jury


def _check_unit_interval(rho: float) -> None:
    if not 0.0 < rho < 1.0:
        raise RangeError(f"rho must lie in (0, 1), got {rho}")


def _check_index(k: int) -> None:
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")


def equal_roots_value(rho: float, x0: float, x1: float, k: int) -> float:
    """x_k = x1 k rho^(k-1) - x0 (k-1) rho^k for any real double root."""
    _check_index(k)
    if k == 0:
        return float(x0)
    if k == 1:
        return float(x1)
    return x1 * k * int_power(rho, k - 1) - x0 * (k - 1) * int_power(rho, k)


def closed_form_equal_roots(rho: float, x0: float, x1: float, k: int) -> float:
    """
    Closed-form solution for a double root rho in (0, 1).

    Raises:
        RangeError: If rho is outside (0, 1)
    """
    _check_unit_interval(rho)
    return equal_roots_value(rho, x0, x1, k)


def closed_form_real_roots(lambda1: float, lambda2: float, x0: float, x1: float, k: int) -> float:
    """
    Closed-form solution c1 lambda1^k + c2 lambda2^k for distinct real roots.

    Raises:
        ValueError: If the roots coincide
    """
    _check_index(k)
    if lambda1 == lambda2:
        raise ValueError("Roots coincide; use closed_form_equal_roots")
    c2 = (x1 - lambda1 * x0) / (lambda2 - lambda1)
    c1 = x0 - c2
    return c1 * int_power(lambda1, k) + c2 * int_power(lambda2, k)


def closed_form_complex(modulus: float, angle: float, x0: float, x1: float, k: int) -> float:
    """
    Closed-form solution [C1 cos(k angle) + C2 sin(k angle)] modulus^k.

    Raises:
        RangeError: If modulus is outside (0, 1) or angle outside (0, pi)
    """
    _check_index(k)
    if not 0.0 < modulus < 1.0:
        raise RangeError(f"modulus must lie in (0, 1), got {modulus}")
    if not 0.0 < angle < math.pi:
        raise RangeError(f"angle must lie in (0, pi), got {angle}; the roots are real")
    c1 = x0
    c2 = (x1 - modulus * math.cos(angle) * x0) / (modulus * math.sin(angle))
    return (c1 * math.cos(k * angle) + c2 * math.sin(k * angle)) * int_power(modulus, k)


def worst_case_peak_envelope(rho: float, k: int) -> float:
    """
    Largest |x_k| over initial pairs in the unit box: k rho^(k-1) + (k-1) rho^k.

    Attained by the pair (x0, x1) = (-1, 1).
    """
    _check_unit_interval(rho)
    if k < 2:
        raise ValueError(f"The envelope is defined for k >= 2, got {k}")
    return k * int_power(rho, k - 1) + (k - 1) * int_power(rho, k)


def peak_scan_bound(rho: float) -> int:
    return max(PEAK_SCAN_MIN, math.ceil(PEAK_SCAN_FACTOR / (1.0 - rho)))


def eta_asymptotic(rho: float) -> float:
    """Asymptotic peak 2 / (e (1 - rho)) valid as rho -> 1."""
    _check_unit_interval(rho)
    return 2.0 / (math.e * (1.0 - rho))


def peak_time(rho: float) -> PeakReport:
    """
    Locate the worst-case peak for a double root rho.

    The stationary point of the envelope is compared on its two integer
    neighbours and then confirmed by a scan over k = 2 ... K_scan. The bare
    ceiling of the stationary point is reported separately as k_ceiling; it
    can miss the discrete maximum (rho = 0.6 peaks at k = 2, not 3).
    """
    _check_unit_interval(rho)
    log_rho = math.log(rho)
    k_continuous = (rho * log_rho - rho - 1.0) / (log_rho * (1.0 + rho))

    candidates = sorted({max(2, math.floor(k_continuous)), max(2, math.ceil(k_continuous))})
    k_star = max(candidates, key=lambda k: (worst_case_peak_envelope(rho, k), -k))
    best = worst_case_peak_envelope(rho, k_star)

    for k in range(2, peak_scan_bound(rho) + 1):
        value = worst_case_peak_envelope(rho, k)
        if value > best:
            logger.warning(f"Scan moved the peak for rho={rho} from k={k_star} to k={k}")
            k_star, best = k, value

    return PeakReport(
        rho=rho,
        k_continuous=k_continuous,
        k_star=k_star,
        peak=worst_case_peak_envelope(rho, k_star),
        eta_asymptotic=eta_asymptotic(rho),
        k_ceiling=max(2, math.ceil(k_continuous)),
    )


def solution_peak(rec: SecondOrderRecurrence, K: int) -> Tuple[float, int]:
    """
    Peak eta = max_{2 <= k <= K} |x_k| of a concrete solution.

    Returns:
        Tuple of (peak value, first index attaining it)
    """
    if K < 2:
        raise ValueError(f"K must be at least 2, got {K}")
    tail = np.abs(iterate(rec, K)[2:])
    idx = int(np.argmax(tail))
    return float(tail[idx]), idx + 2


def unit_box_normalize(x0: float, x1: float) -> Tuple[float, float, float]:
    """
    Scale an initial pair into the unit box ||(x0, x1)||_inf <= 1.

    Returns:
        Tuple of (x0', x1', scale) with x = scale * x'; scale is 1 when the
        pair already lies in the box
    """
    scale = max(abs(x0), abs(x1), 1.0)
    return x0 / scale, x1 / scale, scale


def has_peak_effect(rec: SecondOrderRecurrence, K: int) -> bool:
    """True when the normalized solution rises above 1 for some 2 <= k <= K."""
    x0, x1, _ = unit_box_normalize(rec.x0, rec.x1)
    peak, _ = solution_peak(SecondOrderRecurrence(rec.a1, rec.a2, x0, x1), K)
    return peak > 1.0


def sweep_peaks(rhos: List[float], max_workers: Optional[int] = None) -> List[PeakReport]:
    """Peak reports for several roots, computed concurrently and returned in input order."""
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(peak_time, rhos))
