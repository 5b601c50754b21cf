"""Local and global error measurement for Runge-Kutta steps.

The quantities recorded per accepted step follow the standard one-step error
accounting.  With ``F`` the increment function of the lower-order method and
``y(.)`` the true solution:

* local error of a step launched from the true value:
  ``eps = [y(x) + h F(x, y(x))] - y(x + h)``, which scales like
  ``beta * h**(z+1)`` for a method of order ``z``;
* error-coefficient estimate from a lower/higher pair started at the same
  input: ``beta ~= (w_lower - w_higher) / h**(z+1)``;
* global error ``delta = w - y(x)``, which obeys the exact recursion
  ``delta_next = eps_next + alpha * delta`` where the propagation factor
  ``alpha`` contracts the input error through one lower-order step.

The propagation term ``alpha * delta`` is never formed from a derivative of
``F``; it is computed through the identity
``delta + h * [F(x, y + delta) - F(x, y)]``, which is exact and keeps the
recursion closed to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .problems import IVProblem, reference_solution
from .rk_core import ButcherTableau, RHSFunction, increment_function, rk_step

__all__ = [
    "StepRecord",
    "BetaTracker",
    "ConditionCheck",
    "StepUnderflow",
    "DegenerateFit",
    "local_error_exact",
    "estimate_beta",
    "alpha_propagation_term",
    "mean_beta_higher",
    "condition_check",
    "sigma_bound",
    "find_crossing",
    "empirical_order",
    "inf_norm",
]


class StepUnderflow(ArithmeticError):
    """``h**(z+1)`` underflowed to zero; the error coefficient is undefined."""


class DegenerateFit(RuntimeError):
    """Sampled errors sit at roundoff level; an order fit would be meaningless."""


def inf_norm(v) -> float:
    """Max-norm used for every scalar magnitude derived from a state vector."""
    return float(np.max(np.abs(np.asarray(v, dtype=float))))


@dataclass(frozen=True, eq=False)
class StepRecord:
    """Diagnostics for one accepted step from ``x - h`` to ``x``.

    Oracle-based fields (``eps_lower``, ``delta_*``, ``alpha_term``,
    ``cond_rhs``, ``cond_holds``) are ``None`` when the problem carries no
    exact solution.  ``beta_lower`` and ``cond_lhs`` come from the
    controller's own pair estimate and are always present.
    """

    i: int                     # 1-based accepted-step index
    x: float                   # abscissa after the step
    h: float                   # stepsize used
    rejects: int               # rejected trials before this acceptance
    w_lower: np.ndarray        # lower-order result, launched from the propagated state
    w_higher: np.ndarray       # higher-order result (the propagated solution)
    eps_lower: Optional[np.ndarray]     # lower-order local error from exact input
    beta_lower: np.ndarray              # pair estimate (w_lower - w_higher) / h**(z+1)
    delta_lower: Optional[np.ndarray]   # w_lower - y(x)
    delta_higher: Optional[np.ndarray]  # w_higher - y(x)
    alpha_term: Optional[np.ndarray]    # propagated-error term of the recursion
    cond_lhs: float                     # |beta_lower| * h**(z+1)
    cond_rhs: Optional[float]           # i * mean|beta_higher| * h**(z+2)
    cond_holds: Optional[bool]          # cond_lhs > cond_rhs (with zero-rhs convention)
    bound: float                        # (sigma**(z+1) + sigma**(z+r+1)) * delta
    clamped: bool                       # stepsize shortened to land on x_end


@dataclass(frozen=True, eq=False)
class BetaTracker:
    """Running mean of the higher-order method's error-coefficient magnitudes."""

    count: int = 0
    mean_abs: float = 0.0
    last: Optional[np.ndarray] = None

    def pushed(self, sample: np.ndarray) -> "BetaTracker":
        """Return a new tracker with one more sample folded into the mean."""
        sample = np.atleast_1d(np.asarray(sample, dtype=float))
        n = self.count + 1
        mean = self.mean_abs + (inf_norm(sample) - self.mean_abs) / n
        return BetaTracker(count=n, mean_abs=mean, last=sample)


class ConditionCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool
    m_ratio: float


def local_error_exact(
    t: ButcherTableau, p: IVProblem, x: float, h: float, tol: float = 1e-13
) -> np.ndarray:
    """Local error of one step of ``t`` launched from the true solution at ``x``.

    Returns ``[y(x) + h F(x, y(x))] - y(x + h)`` with ``y`` taken from
    ``reference_solution``.
    """
    y_x = reference_solution(p, x, tol)
    y_xh = reference_solution(p, x + h, tol)
    return (y_x + h * increment_function(t, p.f, x, y_x, h)) - y_xh


def estimate_beta(w_lower, w_higher, h: float, z: int) -> np.ndarray:
    """Error-coefficient estimate ``(w_lower - w_higher) / h**(z+1)``, componentwise.

    Both inputs must come from steps of the same size ``h`` started at the
    same state.  Callers that need a scalar take the max norm.
    """
    hp = h ** (z + 1)
    if hp == 0.0:
        raise StepUnderflow(f"h**(z+1) underflowed for h={h}, z={z}")
    return (np.asarray(w_lower, dtype=float) - np.asarray(w_higher, dtype=float)) / hp


def alpha_propagation_term(
    t_lower: ButcherTableau,
    f: RHSFunction,
    x: float,
    y_exact: np.ndarray,
    w_higher: np.ndarray,
    h: float,
) -> np.ndarray:
    """Propagated-error term of the global-error recursion, computed exactly.

    With input error ``d = w_higher - y_exact``, returns
    ``d + h * [F(x, w_higher) - F(x, y_exact)]`` for the lower method's
    increment ``F``.  By the mean-value construction this equals the
    contraction-factor-times-input-error term of the recursion without ever
    forming a derivative of ``F``.
    """
    y_exact = np.asarray(y_exact, dtype=float)
    w_higher = np.asarray(w_higher, dtype=float)
    d = w_higher - y_exact
    return d + h * (
        increment_function(t_lower, f, x, w_higher, h)
        - increment_function(t_lower, f, x, y_exact, h)
    )


def mean_beta_higher(
    tracker: BetaTracker,
    t_higher: ButcherTableau,
    p: IVProblem,
    x: float,
    h: float,
    tol: float = 1e-13,
) -> BetaTracker:
    """Fold the higher-order method's error coefficient at ``(x, h)`` into the mean.

    The sample is ``eps_higher / h**(z_higher + 1)`` with ``eps_higher``
    measured from exact input, i.e. the higher-order analogue of the
    lower-order coefficient the controller works with.
    """
    eps_hi = local_error_exact(t_higher, p, x, h, tol)
    hp = h ** (t_higher.z + 1)
    if hp == 0.0:
        raise StepUnderflow(f"h**(z+1) underflowed for h={h}, z={t_higher.z}")
    return tracker.pushed(eps_hi / hp)


def condition_check(
    i: int, beta_lower, tracker: BetaTracker, h: float, z: int
) -> ConditionCheck:
    """Compare this step's local-error size against the accumulated higher-order errors.

    ``lhs = |beta_lower| * h**(z+1)`` and ``rhs = i * mean|beta_higher| *
    h**(z+2)``.  While ``lhs > rhs`` the accumulated higher-order error is
    still dominated by the controlled local error.  ``m_ratio`` is
    ``lhs / (mean|beta_higher| * h**(z+2))``, so the check holds exactly
    while ``i < m_ratio``; with an empty mean the ratio is infinite and the
    check holds by convention.
    """
    lhs = inf_norm(beta_lower) * h ** (z + 1)
    denom = tracker.mean_abs * h ** (z + 2)
    rhs = i * denom
    m_ratio = lhs / denom if denom > 0.0 else math.inf
    holds = lhs > rhs if rhs > 0.0 else True
    return ConditionCheck(lhs=lhs, rhs=rhs, holds=holds, m_ratio=m_ratio)


def sigma_bound(sigma: float, z: int, r: int, delta: float) -> float:
    """Tolerance-relative ceiling ``(sigma**(z+1) + sigma**(z+r+1)) * delta``.

    This is the level the propagated global error is expected to respect for
    as long as the accumulation condition holds; its coefficient drops below
    1 only for small enough safety factors and high enough orders.
    """
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"sigma must be in (0, 1], got {sigma}")
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if z < 1 or r < 1:
        raise ValueError(f"orders must satisfy z >= 1, r >= 1, got z={z}, r={r}")
    return (sigma ** (z + 1) + sigma ** (z + r + 1)) * delta


def find_crossing(
    records: Sequence[StepRecord], delta: float
) -> Optional[tuple[int, float]]:
    """First accepted step whose measured global error exceeds ``delta`` (strictly).

    Returns ``(step index, abscissa)`` or ``None``.  Records without oracle
    diagnostics are skipped.
    """
    if not records:
        raise ValueError("records must be nonempty")
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    for rec in records:
        if rec.delta_lower is not None and inf_norm(rec.delta_lower) > delta:
            return rec.i, rec.x
    return None


def _global_error_fixed_steps(t: ButcherTableau, p: IVProblem, h: float, tol: float):
    span = p.x_end - p.x0
    n = max(1, round(span / h))
    h_eff = span / n
    w = np.array(p.y0, dtype=float)
    for j in range(n):
        w = rk_step(t, p.f, p.x0 + j * h_eff, w, h_eff)
    err = w - reference_solution(p, p.x_end, tol)
    return h_eff, err


def empirical_order(
    t: ButcherTableau,
    p: IVProblem,
    mode: str,
    h_set: Sequence[float],
    tol: float = 1e-13,
) -> float:
    """Least-squares slope of log error against log stepsize.

    ``mode='local'`` samples the one-step error at ``x0`` (expected slope
    ``z + 1``); ``mode='global'`` samples the error at ``x_end`` of a
    fixed-step integration (expected slope ``z``).  For the global mode each
    requested ``h`` is snapped to the nearest exact divisor of the interval.

    Raises
    ------
    DegenerateFit
        If any sampled error is within 100 ulp of the reference scale,
        i.e. the stepsizes are too small for a meaningful fit.
    """
    if mode not in ("local", "global"):
        raise ValueError(f"mode must be 'local' or 'global', got {mode!r}")
    hs = [float(h) for h in h_set]
    if len(hs) < 4 or len(set(hs)) != len(hs) or any(h <= 0 for h in hs):
        raise ValueError("h_set needs at least 4 distinct positive stepsizes")

    log_h, log_err = [], []
    for h in hs:
        if mode == "local":
            w = rk_step(t, p.f, p.x0, p.y0, h)
            y_ref = reference_solution(p, p.x0 + h, tol)
            err = w - y_ref
            h_used = h
        else:
            h_used, err = _global_error_fixed_steps(t, p, h, tol)
            y_ref = reference_solution(p, p.x_end, tol)
        scale = max(1.0, inf_norm(y_ref))
        err_norm = inf_norm(err)
        if err_norm < 100.0 * np.finfo(float).eps * scale:
            raise DegenerateFit(
                f"{t.name} on {p.name}: error {err_norm} at h={h} is at roundoff level"
            )
        log_h.append(math.log(h_used))
        log_err.append(math.log(err_norm))
    slope, _ = np.polyfit(log_h, log_err, 1)
    return float(slope)
