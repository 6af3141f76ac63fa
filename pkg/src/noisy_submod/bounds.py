"""Closed-form sample budgets, confidence radii and gap functions.

All logarithms are natural. Sample counts are ceiled at the outermost level.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .core import DomainError

logger = logging.getLogger(__name__)


def h_alpha(kappa: int, alpha: float) -> float:
    """ln(kappa/alpha)/alpha, the round-count proxy used by every union bound."""
    if kappa < 1 or not 0 < alpha < 1:
        raise DomainError(f"h_alpha needs kappa>=1 and alpha in (0,1), got {kappa}, {alpha}")
    ratio = kappa / alpha
    if ratio <= 1:
        raise DomainError(f"kappa/alpha={ratio} <= 1")
    return math.log(ratio) / alpha


def rounds_upper(kappa: int, alpha: float) -> int:
    """Maximum number of threshold rounds before ``w <= alpha*d/kappa``."""
    return math.ceil(math.log(kappa / alpha) / math.log(1.0 / (1.0 - alpha)))


def n1_budget(n: int, delta: float, epsilon: float, range_r: float) -> int:
    """Samples per singleton in the max-singleton estimation phase."""
    return math.ceil(range_r**2 * math.log(6 * n / delta) / (2 * epsilon**2))


def n2_budget(n: int, delta: float, epsilon: float, range_r: float, kappa: int, alpha: float) -> int:
    """Hard cap on samples for one confident-sample decision."""
    h = h_alpha(kappa, alpha)
    return math.ceil(range_r**2 * math.log(6 * n * h / delta) / (2 * epsilon**2))


def anytime_radius(t, count: float, delta: float, range_r: float):
    """R*sqrt(ln(12*count*t^2/delta)/(2t)); ``t`` may be an array.

    ``count`` is the number of estimates the union bound spans.
    """
    t = np.asarray(t, dtype=float) if not np.isscalar(t) else float(t)
    return range_r * np.sqrt(np.log(12.0 * count * t * t / delta) / (2.0 * t))


def confidence_radius(t, n: int, delta: float, range_r: float, kappa: int, alpha: float):
    return anytime_radius(t, n * h_alpha(kappa, alpha), delta, range_r)


def gap_phi(w: float, gain: float, epsilon: float) -> float:
    return (epsilon + abs(w - gain)) / 2.0


def theorem1_left(phi: float, n: int, delta: float, range_r: float, kappa: int, alpha: float) -> float:
    """Gap-dependent branch of the per-call sample bound, before ceiling."""
    if phi <= 0:
        raise DomainError(f"phi must be positive, got {phi}")
    h = h_alpha(kappa, alpha)
    r2 = range_r**2
    return (2 * r2 / phi**2) * math.log(4 * r2 * math.sqrt(3 * n * h / delta) / phi**2)


def theorem1_call_bound(
    phi: float, n: int, delta: float, range_r: float, kappa: int, alpha: float, epsilon: float
) -> int:
    """Upper bound on samples one confident-sample call needs at gap ``phi``.

    The gap branch is clamped below at one sample; it can go non-positive
    for very large gaps, where the log(x)/x threshold argument no longer applies.
    """
    left = theorem1_left(phi, n, delta, range_r, kappa, alpha)
    n2 = n2_budget(n, delta, epsilon, range_r, kappa, alpha)
    left_ceil = math.ceil(left)
    if left_ceil < 1:
        logger.debug("gap branch %.3g clamped to 1 sample (phi=%g)", left, phi)
        left_ceil = 1
    return min(left_ceil, n2)


def hoeffding_tail(N: int, t: float, range_r: float) -> float:
    """2*exp(-2*N*t^2/R^2): tail bound on |mean - mu| >= t for N samples."""
    if N < 1 or t <= 0 or range_r <= 0:
        raise DomainError(f"hoeffding_tail needs N>=1, t>0, R>0; got {N}, {t}, {range_r}")
    return 2.0 * math.exp(-2.0 * N * t * t / range_r**2)


def logx_over_x_threshold(a: float) -> float:
    """x0 = (2/a) ln(2/a); ln(x)/x <= a holds for every x >= x0 (x >= 2)."""
    if not 0 < a <= math.log(2):
        raise DomainError(f"a must lie in (0, ln 2], got {a}")
    return (2.0 / a) * math.log(2.0 / a)


def all_bounds(n: int, kappa: int, epsilon: float, delta: float, alpha: float, range_r: float) -> dict:
    """Every config-level quantity, keyed for the ``bounds`` CLI."""
    return {
        "n": n,
        "kappa": kappa,
        "epsilon": epsilon,
        "delta": delta,
        "alpha": alpha,
        "R": range_r,
        "h_alpha": h_alpha(kappa, alpha),
        "rounds_upper": rounds_upper(kappa, alpha),
        "N1": n1_budget(n, delta, epsilon, range_r),
        "N2": n2_budget(n, delta, epsilon, range_r, kappa, alpha),
        "max_cs_calls": n * rounds_upper(kappa, alpha),
        "C_1": float(confidence_radius(1, n, delta, range_r, kappa, alpha)),
        "C_N2": float(confidence_radius(n2_budget(n, delta, epsilon, range_r, kappa, alpha),
                                        n, delta, range_r, kappa, alpha)),
        "call_bound_at_threshold": theorem1_call_bound(epsilon / 2, n, delta, range_r, kappa, alpha, epsilon),
    }
