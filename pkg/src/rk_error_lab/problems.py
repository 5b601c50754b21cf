"""Initial-value problems with exact solutions, and a high-accuracy fallback oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .rk_core import RHSFunction, classic_rk4, rk_step

__all__ = [
    "IVProblem",
    "UnknownProblem",
    "OracleDivergence",
    "builtin",
    "problem_names",
    "reference_solution",
    "GROWTH_RATE",
]

#: rate of the slow exponential benchmark: the solution grows from 1 to
#: exactly 1000 over [0, 100], so absolute error control stays meaningful.
GROWTH_RATE = math.log(1000.0) / 100.0


class UnknownProblem(KeyError):
    """Requested problem is not in the registry."""


class OracleDivergence(RuntimeError):
    """Step-halving reference solve failed to converge."""


@dataclass(frozen=True)
class IVProblem:
    """One initial-value problem ``y' = f(x, y)``, ``y(x0) = y0`` on ``[x0, x_end]``.

    ``exact``, when given, maps an abscissa to the true solution vector and
    must agree with ``y0`` at ``x0``.  Right-hand sides must be pure
    functions of ``(x, y)``.
    """

    name: str
    f: RHSFunction
    x0: float
    y0: np.ndarray
    x_end: float
    exact: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        object.__setattr__(self, "y0", np.atleast_1d(np.asarray(self.y0, dtype=float)))
        if not self.x_end > self.x0:
            raise ValueError(f"{self.name}: x_end={self.x_end} must exceed x0={self.x0}")
        if self.exact is not None:
            y_start = np.atleast_1d(np.asarray(self.exact(self.x0), dtype=float))
            err = float(np.max(np.abs(y_start - self.y0)))
            if err > 1e-14 * (1.0 + float(np.max(np.abs(self.y0)))):
                raise ValueError(f"{self.name}: exact({self.x0}) disagrees with y0 by {err}")

    def with_x_end(self, x_end: float) -> "IVProblem":
        return replace(self, x_end=x_end)


def _paper_exponential() -> IVProblem:
    return IVProblem(
        name="paper_exponential",
        f=lambda x, y: GROWTH_RATE * y,
        x0=0.0,
        y0=[1.0],
        x_end=100.0,
        exact=lambda x: np.array([math.exp(GROWTH_RATE * x)]),
    )


def _decay() -> IVProblem:
    return IVProblem(
        name="decay",
        f=lambda x, y: -y,
        x0=0.0,
        y0=[1.0],
        x_end=10.0,
        exact=lambda x: np.array([math.exp(-x)]),
    )


def _riccati_simple() -> IVProblem:
    return IVProblem(
        name="riccati_simple",
        f=lambda x, y: -y * y,
        x0=0.0,
        y0=[1.0],
        x_end=5.0,
        exact=lambda x: np.array([1.0 / (1.0 + x)]),
    )


_PROBLEMS: dict[str, Callable[[], IVProblem]] = {
    "paper_exponential": _paper_exponential,
    "decay": _decay,
    "riccati_simple": _riccati_simple,
}


def builtin(name: str) -> IVProblem:
    """Look up a registered problem by name."""
    try:
        factory = _PROBLEMS[name]
    except KeyError:
        raise UnknownProblem(f"unknown problem {name!r}; known: {sorted(_PROBLEMS)}") from None
    return factory()


def problem_names() -> list[str]:
    return sorted(_PROBLEMS)


def _fixed_step_rk4(p: IVProblem, x: float, n: int) -> np.ndarray:
    t = classic_rk4()
    h = (x - p.x0) / n
    w = np.array(p.y0, dtype=float)
    for j in range(n):
        w = rk_step(t, p.f, p.x0 + j * h, w, h)
    return w


def reference_solution(
    p: IVProblem, x: float, tol: float = 1e-13, *, max_halvings: int = 24
) -> np.ndarray:
    """True solution at ``x``: the registered exact function when present,
    otherwise a fixed-step solve refined by step halving.

    The fallback halves the step until two successive refinements agree to
    within ``tol`` (max norm) and returns the finer one.

    Raises
    ------
    OracleDivergence
        If the refinements do not settle within ``max_halvings`` halvings.
    """
    if tol < 1e-13:
        raise ValueError(f"tol={tol} is below the supported accuracy of 1e-13")
    span = p.x_end - p.x0
    if not (p.x0 - 1e-12 * span <= x <= p.x_end + 1e-12 * span):
        raise ValueError(f"x={x} outside [{p.x0}, {p.x_end}]")
    if p.exact is not None:
        return np.atleast_1d(np.asarray(p.exact(x), dtype=float))
    if x == p.x0:
        return np.array(p.y0, dtype=float)

    n = 8
    coarse = _fixed_step_rk4(p, x, n)
    for _ in range(max_halvings):
        n *= 2
        fine = _fixed_step_rk4(p, x, n)
        if float(np.max(np.abs(fine - coarse))) <= tol:
            return fine
        coarse = fine
    raise OracleDivergence(
        f"{p.name}: reference solve at x={x} did not converge to {tol} "
        f"within {max_halvings} halvings"
    )
