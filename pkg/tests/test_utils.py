import numpy as np
import pytest

from utils import (
    AdaptiveAbort,
    ConfigError,
    ConsistencyError,
    DivergenceError,
    LabError,
    RangeError,
    as_vector,
    check_dimension,
    int_power,
)


def test_error_hierarchy():
    assert issubclass(RangeError, ValueError) and issubclass(RangeError, LabError)
    assert issubclass(ConfigError, ValueError)
    assert issubclass(ConsistencyError, RuntimeError)
    assert issubclass(AdaptiveAbort, LabError)


def test_config_error_names_field():
    error = ConfigError("must be positive", "run.max_iters")
    assert error.field == "run.max_iters"
    assert str(error) == "run.max_iters: must be positive"
    assert str(ConfigError("plain")) == "plain"


def test_divergence_error_carries_partial_state():
    error = DivergenceError("blew up", 7, trajectory="partial")
    assert error.last_finite_index == 7
    assert error.trajectory == "partial"
    assert "last finite index 7" in str(error)


@pytest.mark.parametrize("base, k", [(0.6, 0), (0.6, 5), (-1.1, 3), (0.99, 64), (0.99, 500), (-0.9, 101)])
def test_int_power(base, k):
    assert int_power(base, k) == pytest.approx(base ** k, rel=1e-12)


def test_int_power_edge_cases():
    assert int_power(0.0, 200) == 0.0
    with pytest.raises(ValueError):
        int_power(2.0, -1)


def test_as_vector():
    np.testing.assert_array_equal(as_vector(3), [3.0])
    assert as_vector([1, 2]).dtype == np.float64
    with pytest.raises(ValueError):
        as_vector([[1.0, 2.0]])


def test_check_dimension():
    check_dimension(np.zeros(3), 3)
    with pytest.raises(ValueError, match="expected 2"):
        check_dimension(np.zeros(3), 2)
