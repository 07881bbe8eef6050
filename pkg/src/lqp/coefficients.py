"""Deterministic time-varying model coefficients.

Volatility, spread factor and order-flow rates are deterministic functions
of time on [0, horizon].  Three forms are supported, matching the config
file schema: constants, piecewise-constant tables, and the U-shape
``base + curvature * (2 t / horizon - 1)**2`` often used for intraday
order-flow profiles.  Arbitrary callables are accepted wherever a
coefficient is expected, at the cost of exact supremum computation
(a dense sampling fallback is used for those).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "Coefficient",
    "Constant",
    "PiecewiseConstant",
    "UShape",
    "as_coefficient",
    "constant_value",
    "is_constant",
    "sup_on",
    "coefficient_from_spec",
]


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self.value
        return np.full(t.shape, self.value)


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step function: value ``values[i]`` on [times[i], times[i+1])."""

    times: tuple
    values: tuple

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("times and values must be equal-length, nonempty")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", tuple(float(x) for x in self.times))
        object.__setattr__(self, "values", tuple(float(x) for x in self.values))

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        out = np.asarray(self.values)[idx]
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class UShape:
    """Parabolic intraday profile ``base + curvature * (2 t / horizon - 1)**2``."""

    base: float
    curvature: float
    horizon: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x = 2.0 * t / self.horizon - 1.0
        out = self.base + self.curvature * x * x
        return float(out) if out.ndim == 0 else out


Coefficient = Union[Constant, PiecewiseConstant, UShape, Callable]

_SUP_SAMPLES = 4097


def as_coefficient(value) -> Coefficient:
    """Coerce a number or callable into a coefficient function."""
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Constant(float(value))
    if callable(value):
        return value
    raise TypeError(f"cannot interpret {value!r} as a coefficient")


def is_constant(fn: Coefficient) -> bool:
    return isinstance(fn, Constant)


def constant_value(fn: Coefficient) -> float:
    if not isinstance(fn, Constant):
        raise ValueError("coefficient is not declared constant")
    return fn.value


def sup_on(fn: Coefficient, horizon: float) -> float:
    """Upper bound of ``fn`` on [0, horizon].

    Exact for the built-in coefficient forms; a dense-sampling bound with a
    small safety factor is used for arbitrary callables (thinning clips the
    acceptance ratio at one, so a slight undershoot stays correct).
    """
    if isinstance(fn, Constant):
        return fn.value
    if isinstance(fn, PiecewiseConstant):
        return max(fn.values)
    if isinstance(fn, UShape):
        return max(fn(0.0), fn(0.5 * horizon), fn(horizon))
    t = np.linspace(0.0, horizon, _SUP_SAMPLES)
    return float(np.max(np.asarray(fn(t)))) * (1.0 + 1e-9)


def coefficient_from_spec(spec, horizon: float) -> Coefficient:
    """Build a coefficient from a config-file entry.

    Accepted entries: a bare number, ``{"kind": "piecewise", "times": [...],
    "values": [...]}``, or ``{"kind": "ushape", "base": a, "curvature": b}``.
    """
    if isinstance(spec, (int, float)):
        return Constant(float(spec))
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "constant":
            return Constant(float(spec["value"]))
        if kind == "piecewise":
            return PiecewiseConstant(tuple(spec["times"]), tuple(spec["values"]))
        if kind == "ushape":
            return UShape(float(spec["base"]), float(spec["curvature"]), horizon)
        raise ValueError(f"unknown coefficient kind {kind!r}")
    raise ValueError(f"cannot parse coefficient spec {spec!r}")
