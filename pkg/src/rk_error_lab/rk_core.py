"""Explicit Runge-Kutta methods as Butcher tableaus, plus single-step evaluation.

A method is described by its stage matrix ``a``, weights ``b``, abscissae
``c``, stage count ``m`` and classical order ``z``.  One step of the method
applied to ``y' = f(x, y)`` is

    k_p = f(x + c_p h, y + h * sum_{q < p} a_pq k_q)       p = 1..m
    y_next = y + h * sum_p b_p k_p

Only explicit methods are supported: ``a`` must be strictly lower
triangular, so the stages can be evaluated in index order.  States are flat
float64 vectors; scalar problems use length-1 vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ButcherTableau",
    "MethodPair",
    "RHSFunction",
    "ExplicitnessViolation",
    "ConsistencyViolation",
    "DimensionMismatch",
    "NonFiniteStage",
    "UnknownPair",
    "validate_tableau",
    "increment_function",
    "rk_step",
    "kutta3",
    "classic_rk4",
    "builtin_pair",
    "pair_names",
]

RHSFunction = Callable[[float, np.ndarray], np.ndarray]

#: tolerance on the weight sum and the row-sum convention
CONSISTENCY_TOL = 1e-12


class ExplicitnessViolation(ValueError):
    """Stage matrix has a nonzero entry on or above the diagonal (implicit method)."""


class ConsistencyViolation(ValueError):
    """Weights do not sum to one, or abscissae do not match the stage row sums."""


class DimensionMismatch(ValueError):
    """Coefficient array shapes disagree with the declared stage count."""


class NonFiniteStage(ArithmeticError):
    """A stage derivative evaluated to NaN or infinity."""


class UnknownPair(KeyError):
    """Requested method pair is not in the registry."""


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficients of one explicit Runge-Kutta method.

    Attributes
    ----------
    name : str
        Label used in registries and traces.
    m : int
        Number of stages.
    a : ndarray, shape (m, m)
        Stage matrix; strictly lower triangular for explicit methods.
    b : ndarray, shape (m,)
        Quadrature weights; must sum to 1.
    c : ndarray, shape (m,)
        Abscissae; by convention each equals the corresponding row sum of ``a``.
    z : int
        Classical order of the method.
    """

    name: str
    m: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    z: int

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))


@dataclass(frozen=True, eq=False)
class MethodPair:
    """A lower-order and a higher-order tableau used together for local extrapolation.

    The order gap ``r = higher.z - lower.z`` must be at least 1.
    """

    lower: ButcherTableau
    higher: ButcherTableau

    def __post_init__(self):
        if self.higher.z <= self.lower.z:
            raise ValueError(
                f"higher-order method must outrank the lower one: "
                f"got z={self.lower.z} and z={self.higher.z}"
            )

    @property
    def r(self) -> int:
        """Order gap between the two methods."""
        return self.higher.z - self.lower.z


def validate_tableau(
    t: ButcherTableau, *, allow_nonstandard_abscissae: bool = False
) -> ButcherTableau:
    """Check the tableau invariants and return the tableau unchanged.

    Raises
    ------
    DimensionMismatch
        If the array shapes disagree with ``m``, or ``m``/``z`` are < 1.
    ExplicitnessViolation
        If any entry on or above the diagonal of ``a`` is nonzero.
    ConsistencyViolation
        If the weights do not sum to 1 within ``CONSISTENCY_TOL``, or an
        abscissa differs from its stage row sum by more than that (the
        row-sum check can be disabled with ``allow_nonstandard_abscissae``).
    """
    if t.m < 1 or t.z < 1:
        raise DimensionMismatch(f"{t.name}: stage count and order must be >= 1")
    if t.a.shape != (t.m, t.m):
        raise DimensionMismatch(f"{t.name}: a has shape {t.a.shape}, expected {(t.m, t.m)}")
    if t.b.shape != (t.m,):
        raise DimensionMismatch(f"{t.name}: b has shape {t.b.shape}, expected {(t.m,)}")
    if t.c.shape != (t.m,):
        raise DimensionMismatch(f"{t.name}: c has shape {t.c.shape}, expected {(t.m,)}")

    # indices p <= q (1-based) are the diagonal and above in 0-based terms
    upper = np.triu(t.a)
    if np.any(upper != 0.0):
        p, q = np.argwhere(upper != 0.0)[0]
        raise ExplicitnessViolation(
            f"{t.name}: a[{p + 1}][{q + 1}] = {t.a[p, q]} makes the method implicit"
        )

    weight_sum = float(np.sum(t.b))
    if abs(weight_sum - 1.0) > CONSISTENCY_TOL:
        raise ConsistencyViolation(f"{t.name}: weights sum to {weight_sum!r}, not 1")

    if not allow_nonstandard_abscissae:
        row_sums = t.a.sum(axis=1)
        bad = np.abs(row_sums - t.c) > CONSISTENCY_TOL
        if np.any(bad):
            p = int(np.argwhere(bad)[0][0])
            raise ConsistencyViolation(
                f"{t.name}: c[{p + 1}] = {t.c[p]} but row sum is {row_sums[p]}"
            )
    return t


def increment_function(
    t: ButcherTableau, f: RHSFunction, x: float, y: np.ndarray, h: float
) -> np.ndarray:
    """Weighted stage sum ``sum_p b_p k_p`` for one step of size ``h`` from ``(x, y)``.

    Stages are evaluated strictly in ascending index order.  The result has
    the shape of ``y``; the step itself is ``y + h * increment``.

    Raises
    ------
    NonFiniteStage
        If any stage derivative contains NaN or infinity.
    """
    if h <= 0.0:
        raise ValueError(f"stepsize must be positive, got {h}")
    y = np.asarray(y, dtype=float)
    k = np.empty((t.m,) + y.shape, dtype=float)
    for p in range(t.m):
        y_stage = y + h * (t.a[p, :p] @ k[:p])
        k[p] = f(x + t.c[p] * h, y_stage)
        if not np.all(np.isfinite(k[p])):
            raise NonFiniteStage(f"{t.name}: stage {p + 1} is not finite at x={x}, h={h}")
    return t.b @ k


def rk_step(
    t: ButcherTableau, f: RHSFunction, x: float, y: np.ndarray, h: float
) -> np.ndarray:
    """Advance ``y`` by one step of size ``h``: ``y + h * increment_function(...)``."""
    y = np.asarray(y, dtype=float)
    return y + h * increment_function(t, f, x, y, h)


def kutta3() -> ButcherTableau:
    """Kutta's three-stage third-order method."""
    return validate_tableau(
        ButcherTableau(
            name="rk3",
            m=3,
            a=[[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [-1.0, 2.0, 0.0]],
            b=[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            c=[0.0, 0.5, 1.0],
            z=3,
        )
    )


def classic_rk4() -> ButcherTableau:
    """The classical four-stage fourth-order method."""
    return validate_tableau(
        ButcherTableau(
            name="rk4",
            m=4,
            a=[
                [0.0, 0.0, 0.0, 0.0],
                [0.5, 0.0, 0.0, 0.0],
                [0.0, 0.5, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            b=[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            c=[0.0, 0.5, 0.5, 1.0],
            z=4,
        )
    )


_PAIRS: dict[str, Callable[[], MethodPair]] = {
    "rk3_rk4": lambda: MethodPair(lower=kutta3(), higher=classic_rk4()),
}


def builtin_pair(name: str) -> MethodPair:
    """Look up a method pair by registry name (currently ``rk3_rk4``)."""
    try:
        factory = _PAIRS[name]
    except KeyError:
        raise UnknownPair(f"unknown method pair {name!r}; known: {sorted(_PAIRS)}") from None
    return factory()


def pair_names() -> list[str]:
    return sorted(_PAIRS)
