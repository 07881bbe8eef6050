"""Utility functions, absolute risk aversion, and certainty equivalents."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "UtilitySpec",
    "UtilityError",
    "exponential_utility",
    "custom_utility",
    "utility_value",
    "marginal_utility",
    "absolute_risk_aversion",
    "certainty_equivalent",
]

_DEFAULT_WEALTH_GRID = np.linspace(-10.0, 10.0, 201)


class UtilityError(ValueError):
    """Raised when a utility specification violates its regularity bounds."""


@dataclass
class UtilitySpec:
    """A von Neumann-Morgenstern utility.

    ``kind`` is either ``"exponential"`` (constant absolute risk aversion
    ``risk_aversion``) or ``"custom"``, in which case the value function and
    its first two derivatives must be supplied along with ``ara_bounds``,
    the open interval that must contain -U''/U' on the validation grid.
    """

    kind: str = "exponential"
    risk_aversion: float = 1.0
    value_fn: Optional[Callable] = None
    deriv_fn: Optional[Callable] = None
    second_deriv_fn: Optional[Callable] = None
    ara_bounds: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.kind == "exponential":
            if not self.risk_aversion > 0:
                raise UtilityError("risk_aversion must be positive")
            if self.ara_bounds is None:
                c = self.risk_aversion
                self.ara_bounds = (0.5 * c, 2.0 * c)
        elif self.kind == "custom":
            if None in (self.value_fn, self.deriv_fn, self.second_deriv_fn):
                raise UtilityError("custom utility needs value_fn, deriv_fn, second_deriv_fn")
            if self.ara_bounds is None:
                raise UtilityError("custom utility needs ara_bounds")
        else:
            raise UtilityError(f"unknown utility kind {self.kind!r}")


def exponential_utility(risk_aversion: float) -> UtilitySpec:
    """U(x) = -exp(-c x) with constant absolute risk aversion c."""
    return UtilitySpec(kind="exponential", risk_aversion=float(risk_aversion))


def custom_utility(value_fn, deriv_fn, second_deriv_fn, ara_bounds,
                   wealth_grid: Optional[np.ndarray] = None) -> UtilitySpec:
    """Build and validate a custom utility.

    Checks U' > 0, U'' < 0 and c1 < -U''/U' < c2 on ``wealth_grid``
    (default: 201 points on [-10, 10]); raises :class:`UtilityError` on
    violation.
    """
    spec = UtilitySpec(kind="custom", value_fn=value_fn, deriv_fn=deriv_fn,
                       second_deriv_fn=second_deriv_fn, ara_bounds=tuple(ara_bounds))
    grid = _DEFAULT_WEALTH_GRID if wealth_grid is None else np.asarray(wealth_grid, dtype=float)
    u1 = np.asarray(spec.deriv_fn(grid), dtype=float)
    u2 = np.asarray(spec.second_deriv_fn(grid), dtype=float)
    if np.any(u1 <= 0):
        raise UtilityError("marginal utility must be strictly positive on the validation grid")
    if np.any(u2 >= 0):
        raise UtilityError("utility must be strictly concave on the validation grid")
    ara = -u2 / u1
    c1, c2 = spec.ara_bounds
    if not (0 < c1 < c2):
        raise UtilityError("ara_bounds must satisfy 0 < c1 < c2")
    if np.any(ara <= c1) or np.any(ara >= c2):
        bad = grid[(ara <= c1) | (ara >= c2)][0]
        raise UtilityError(
            f"absolute risk aversion leaves ({c1}, {c2}) at wealth {bad:.4g}")
    return spec


def utility_value(spec: UtilitySpec, x):
    """U(x); vectorised over x."""
    if spec.kind == "exponential":
        return -np.exp(-spec.risk_aversion * np.asarray(x, dtype=float))
    return spec.value_fn(x)


def marginal_utility(spec: UtilitySpec, x):
    if spec.kind == "exponential":
        c = spec.risk_aversion
        return c * np.exp(-c * np.asarray(x, dtype=float))
    return spec.deriv_fn(x)


def absolute_risk_aversion(spec: UtilitySpec, x: float) -> float:
    """-U''(x)/U'(x) at wealth x."""
    if spec.kind == "exponential":
        return spec.risk_aversion
    return -float(spec.second_deriv_fn(x)) / float(spec.deriv_fn(x))


def certainty_equivalent(spec: UtilitySpec, expected_utility: float) -> float:
    """Wealth whose utility equals ``expected_utility``.

    Exponential utilities invert in closed form; custom utilities use a
    bracketing root-find to 1e-12 relative tolerance.  Raises ``ValueError``
    if ``expected_utility`` is outside the range of U.
    """
    eu = float(expected_utility)
    if spec.kind == "exponential":
        if eu >= 0:
            raise ValueError("expected utility outside the range of -exp(-c x)")
        return -math.log(-eu) / spec.risk_aversion
    lo, hi = -1.0, 1.0
    for _ in range(200):
        if float(utility_value(spec, lo)) <= eu:
            break
        lo *= 2.0
    else:
        raise ValueError("expected utility below the range of U")
    for _ in range(200):
        if float(utility_value(spec, hi)) >= eu:
            break
        hi *= 2.0
    else:
        raise ValueError("expected utility above the range of U")
    return brentq(lambda x: float(utility_value(spec, x)) - eu, lo, hi,
                  xtol=1e-15, rtol=1e-12)
