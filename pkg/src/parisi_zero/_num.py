"""Cancellation-free pieces of the log terms that show up everywhere."""

from __future__ import annotations

import math

import numpy as np

LOG_FLOOR = 1e-300


class DomainError(ValueError):
    """A log or square root argument left its domain."""


def safe_log(x: float) -> float:
    if not x > LOG_FLOOR:
        raise DomainError(f"log argument {x!r} is not > {LOG_FLOOR}")
    return math.log(x)


def safe_log1p(x: float) -> float:
    if not 1.0 + x > LOG_FLOOR or x <= -1.0:
        raise DomainError(f"log1p argument {x!r} is not > -1")
    return math.log1p(x)


def log1p_over(y):
    """log(1 + y) / y, equal to 1 at y = 0."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-5
    ys = np.where(small, 1.0, y)
    out = np.where(small, 1.0 - y / 2 + y * y / 3 - y**3 / 4, np.log1p(ys) / ys)
    return out if out.ndim else float(out)


def log1p_rem(y):
    """(y - log(1 + y)) / y**2, equal to 1/2 at y = 0."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-3
    ys = np.where(small, 1.0, y)
    series = 0.5 - y / 3 + y**2 / 4 - y**3 / 5 + y**4 / 6 - y**5 / 7
    out = np.where(small, series, (ys - np.log1p(ys)) / (ys * ys))
    return out if out.ndim else float(out)


def bracket_term(z):
    """(1 + z)/z^2 log(1 + z) - 1/z, continuous at z = 0 with value 1/2.

    Decreases from 1/2 to 0 on (0, inf). Rewritten as
    1 - (1 + z) * log1p_rem(z) to avoid cancellation.
    """
    z = np.asarray(z, dtype=float)
    out = 1.0 - (1.0 + z) * log1p_rem(z)
    return out if out.ndim else float(out)


def bracket_term_deriv_factor(z):
    """(2 + z)/z^3 log(1 + z) - 2/z^2, the positive factor in dz2/dq."""
    z = float(z)
    if abs(z) < 1e-3:
        return 1.0 / 6 - z / 6 + 3 * z * z / 20
    return (2 + z) / z**3 * math.log1p(z) - 2 / z**2
