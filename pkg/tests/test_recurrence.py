import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from recurrence import (
    ComplexPairRoots,
    EqualRoots,
    RealDistinctRoots,
    SecondOrderRecurrence,
    characteristic_roots,
    closed_form_complex,
    closed_form_equal_roots,
    closed_form_real_roots,
    eta_asymptotic,
    has_peak_effect,
    is_stable,
    iterate,
    max_root_modulus,
    peak_scan_bound,
    peak_time,
    solution_peak,
    sweep_peaks,
    unit_box_normalize,
    worst_case_peak_envelope,
)
from utils import RangeError

unit = st.floats(min_value=-1.0, max_value=1.0)

stable_recurrences = st.one_of(
    st.builds(SecondOrderRecurrence.from_double_root, st.floats(min_value=0.05, max_value=0.9), unit, unit),
    st.builds(
        lambda l1, gap, x0, x1: SecondOrderRecurrence.from_real_roots(l1, l1 + gap, x0, x1),
        st.floats(min_value=-0.9, max_value=0.8), st.floats(min_value=0.05, max_value=0.1), unit, unit,
    ),
    st.builds(SecondOrderRecurrence.from_complex_roots,
              st.floats(min_value=0.05, max_value=0.9), st.floats(min_value=0.1, max_value=3.0), unit, unit),
)


# --- iterate ---

def test_iterate_double_root_example():
    rec = SecondOrderRecurrence(a1=1.2, a2=-0.36, x0=0.0, x1=1.0)
    np.testing.assert_allclose(iterate(rec, 2), [0.0, 1.0, 1.2])


def test_iterate_returns_k_plus_one_values():
    rec = SecondOrderRecurrence.from_real_roots(0.4, 0.5)
    assert iterate(rec, 40).shape == (41,)


def test_iterate_rejects_short_horizon():
    with pytest.raises(ValueError):
        iterate(SecondOrderRecurrence(1.0, 0.0), 0)


# --- characteristic_roots ---

def test_double_root_is_classified_as_equal():
    roots = characteristic_roots(SecondOrderRecurrence.from_double_root(0.6))
    assert isinstance(roots, EqualRoots)
    assert roots.rho == pytest.approx(0.6)


def test_real_roots_are_sorted():
    roots = characteristic_roots(SecondOrderRecurrence(a1=1.5, a2=-0.56))
    assert isinstance(roots, RealDistinctRoots)
    assert roots.lambda1 == pytest.approx(0.7)
    assert roots.lambda2 == pytest.approx(0.8)


def test_complex_pair():
    roots = characteristic_roots(SecondOrderRecurrence(a1=1.0, a2=-0.5))
    assert isinstance(roots, ComplexPairRoots)
    assert roots.modulus == pytest.approx(math.sqrt(0.5))
    assert roots.angle == pytest.approx(math.pi / 4)


def test_coefficients_rebuild_the_recurrence():
    roots = characteristic_roots(SecondOrderRecurrence(a1=1.0, a2=-0.5))
    a1, a2 = roots.coefficients()
    assert a1 == pytest.approx(1.0)
    assert a2 == pytest.approx(-0.5)


@given(st.floats(min_value=0.01, max_value=0.99))
def test_double_root_round_trip(rho):
    roots = characteristic_roots(SecondOrderRecurrence.from_double_root(rho))
    assert isinstance(roots, EqualRoots)
    assert roots.rho == pytest.approx(rho, rel=1e-12)


# --- is_stable ---

def test_stable_double_root():
    assert is_stable(SecondOrderRecurrence(a1=1.2, a2=-0.36)) is True


def test_unstable_double_root():
    assert is_stable(SecondOrderRecurrence.from_double_root(1.1)) is False


@given(st.floats(min_value=-0.95, max_value=0.95), st.floats(min_value=-0.95, max_value=0.95))
def test_real_roots_inside_the_disk_are_stable(l1, l2):
    assert is_stable(SecondOrderRecurrence.from_real_roots(l1, l2)) is True


@given(st.floats(min_value=1.05, max_value=2.0), st.floats(min_value=0.1, max_value=3.0))
def test_complex_roots_outside_the_disk_are_unstable(modulus, angle):
    assert is_stable(SecondOrderRecurrence.from_complex_roots(modulus, angle)) is False


def test_root_pair_straddling_the_unit_circle_is_unstable():
    # roots 0.999994 and 1.000004 fall inside the equal-roots tolerance
    rec = SecondOrderRecurrence(a1=1.9999979999999997, a2=-0.9999979999759998)
    assert isinstance(characteristic_roots(rec), EqualRoots)
    assert max_root_modulus(rec) > 1.0
    assert is_stable(rec) is False


@pytest.mark.parametrize("center", [1.0, -1.0])
@pytest.mark.parametrize("half_gap", [5e-6, 1e-5])
def test_close_roots_across_the_circle_are_unstable(center, half_gap):
    rec = SecondOrderRecurrence.from_real_roots(center - half_gap, center + half_gap)
    assert is_stable(rec) is False


@given(st.floats(min_value=-1.5, max_value=1.5), st.floats(min_value=-1.5, max_value=1.5))
def test_stability_matches_root_moduli(l1, l2):
    assume(abs(abs(l1) - 1.0) > 1e-6 and abs(abs(l2) - 1.0) > 1e-6)
    rec = SecondOrderRecurrence.from_real_roots(l1, l2)
    assert is_stable(rec) == (max(abs(l1), abs(l2)) < 1.0)


@settings(max_examples=50, deadline=None)
@given(stable_recurrences)
def test_stable_recurrences_decay(rec):
    assert is_stable(rec) is True
    assert abs(iterate(rec, 400)[-1]) < 1e-6


# --- closed forms ---

@pytest.mark.parametrize("rec, closed", [
    (SecondOrderRecurrence.from_double_root(0.6, 0.0, 1.0),
     lambda k: closed_form_equal_roots(0.6, 0.0, 1.0, k)),
    (SecondOrderRecurrence.from_real_roots(0.7, 0.8, 0.0, 1.0),
     lambda k: closed_form_real_roots(0.7, 0.8, 0.0, 1.0, k)),
    (SecondOrderRecurrence.from_complex_roots(0.9, 0.7, -0.5, 1.0),
     lambda k: closed_form_complex(0.9, 0.7, -0.5, 1.0, k)),
])
def test_closed_forms_match_iteration(rec, closed):
    values = iterate(rec, 60)
    expected = np.array([closed(k) for k in range(61)])
    np.testing.assert_allclose(values, expected, rtol=1e-10, atol=1e-12)


def assert_matches_iteration(rec, closed, K=80):
    values = iterate(rec, K)
    expected = np.array([closed(k) for k in range(K + 1)])
    scale = max(1.0, float(np.max(np.abs(values))))
    np.testing.assert_allclose(expected, values, rtol=0, atol=1e-9 * scale)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.98), unit, unit)
def test_equal_roots_closed_form_on_random_instances(rho, x0, x1):
    assert_matches_iteration(SecondOrderRecurrence.from_double_root(rho, x0, x1),
                             lambda k: closed_form_equal_roots(rho, x0, x1, k))


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-0.95, max_value=0.9), st.floats(min_value=0.05, max_value=0.5), unit, unit)
def test_real_roots_closed_form_on_random_instances(l1, gap, x0, x1):
    l2 = l1 + gap
    assert_matches_iteration(SecondOrderRecurrence.from_real_roots(l1, l2, x0, x1),
                             lambda k: closed_form_real_roots(l1, l2, x0, x1, k))


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.98), st.floats(min_value=0.1, max_value=3.0), unit, unit)
def test_complex_closed_form_on_random_instances(modulus, angle, x0, x1):
    assert_matches_iteration(SecondOrderRecurrence.from_complex_roots(modulus, angle, x0, x1),
                             lambda k: closed_form_complex(modulus, angle, x0, x1, k))


def test_real_roots_example_value():
    assert closed_form_real_roots(0.7, 0.8, 0.0, 1.0, 2) == pytest.approx(1.5)


def test_closed_form_regime_errors():
    with pytest.raises(RangeError):
        closed_form_equal_roots(1.0, 0.0, 1.0, 3)
    with pytest.raises(ValueError):
        closed_form_real_roots(0.5, 0.5, 0.0, 1.0, 3)
    with pytest.raises(RangeError):
        closed_form_complex(0.5, 0.0, 0.0, 1.0, 3)
    with pytest.raises(ValueError):
        closed_form_real_roots(0.4, 0.5, 0.0, 1.0, -1)


# --- peaks ---

def test_envelope_at_rho_06():
    assert worst_case_peak_envelope(0.6, 2) == pytest.approx(1.56)
    with pytest.raises(ValueError):
        worst_case_peak_envelope(0.6, 1)


def test_peak_time_rho_06_peaks_at_two():
    report = peak_time(0.6)
    assert report.k_star == 2
    assert report.k_ceiling == 3
    assert report.peak == pytest.approx(1.56, abs=1e-12)
    assert 2.0 < report.k_continuous < 3.0


def test_peak_time_rho_09_peaks_at_ten():
    report = peak_time(0.9)
    assert report.k_star == 10
    assert report.peak == pytest.approx(worst_case_peak_envelope(0.9, 10))


def test_peak_time_dominates_a_wide_scan():
    for rho in np.linspace(0.01, 0.99, 100):
        rho = float(rho)
        report = peak_time(rho)
        scan = max(worst_case_peak_envelope(rho, k) for k in range(2, 4 * peak_scan_bound(rho) + 1))
        assert scan <= report.peak


@pytest.mark.parametrize("rho", [0.0, 1.0, -0.5, 1.5])
def test_peak_time_rejects_rho_outside_unit_interval(rho):
    with pytest.raises(RangeError):
        peak_time(rho)


def test_eta_asymptotic():
    assert eta_asymptotic(0.9) == pytest.approx(2.0 / (math.e * 0.1))


def test_peak_approaches_the_asymptote():
    report = peak_time(0.999)
    assert 0.95 <= report.peak / report.eta_asymptotic <= 1.05


def test_solution_peak_from_zero_one():
    peak, k = solution_peak(SecondOrderRecurrence.from_double_root(0.6, 0.0, 1.0), 40)
    assert peak == pytest.approx(1.2)
    assert k == 2


def test_solution_peak_needs_two_steps():
    with pytest.raises(ValueError):
        solution_peak(SecondOrderRecurrence.from_double_root(0.6), 1)


def test_peak_ordering_against_double_root():
    equal, _ = solution_peak(SecondOrderRecurrence.from_double_root(0.6, 0.0, 1.0), 200)
    above, _ = solution_peak(SecondOrderRecurrence.from_real_roots(0.7, 0.8, 0.0, 1.0), 200)
    below, _ = solution_peak(SecondOrderRecurrence.from_real_roots(0.4, 0.5, 0.0, 1.0), 200)
    assert above >= equal >= below


def test_has_peak_effect():
    assert has_peak_effect(SecondOrderRecurrence.from_double_root(0.6, 0.0, 1.0), 40) is True
    assert has_peak_effect(SecondOrderRecurrence(a1=0.9, a2=-0.2, x0=0.0, x1=1.0), 40) is False


def test_unit_box_normalize():
    assert unit_box_normalize(2.0, -4.0) == (0.5, -1.0, 4.0)
    assert unit_box_normalize(0.5, 0.2) == (0.5, 0.2, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.95))
def test_envelope_dominates_unit_box_solutions(rho):
    report = peak_time(rho)
    for x0, x1 in [(-1.0, 1.0), (1.0, 1.0), (0.0, 1.0), (1.0, -0.3)]:
        peak, _ = solution_peak(SecondOrderRecurrence.from_double_root(rho, x0, x1), 200)
        assert peak <= report.peak * (1.0 + 1e-12)


def test_sweep_peaks_keeps_input_order():
    reports = sweep_peaks([0.9, 0.3, 0.6], max_workers=2)
    assert [r.rho for r in reports] == [0.9, 0.3, 0.6]
