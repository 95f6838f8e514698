"""Input checks shared by the bound, optimizer and k-NN modules."""

import math
import numbers


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise DomainError(f"{name} must be >= 1, got {value}")
    return int(value)


def check_nonnegative_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return int(value)


def check_real(value, name, low=None, high=None, low_open=False, high_open=False):
    """Return ``value`` as a float after checking it lies in the given interval."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise DomainError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if math.isnan(value):
        raise DomainError(f"{name} must not be NaN")
    if low is not None and (value < low or (low_open and value == low)):
        raise DomainError(f"{name}={value} is below its allowed range")
    if high is not None and (value > high or (high_open and value == high)):
        raise DomainError(f"{name}={value} is above its allowed range")
    return value


def check_delta(delta, name="delta"):
    return check_real(delta, name, 0.0, 1.0, low_open=True)


def check_rate(rate, name="rate"):
    return check_real(rate, name, 0.0, 1.0)
