"""
Special functions and quadrature used by the hitting-time model.
"""

import logging
import math
from collections.abc import Callable

from errors import InvalidInputError, NumericFailureError

logger = logging.getLogger(__name__)

# Below this argument the recurrence lifts x before the asymptotic series is used.
DIGAMMA_LIFT = 6.0

# Bernoulli-number coefficients B_2k / (2k) of the asymptotic series, k = 1..7.
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

SMALL_PRODUCT = 1e-8


def digamma(x: float) -> float:
    """
    The digamma function psi_0(x) for x > 0.

    Lifts x to at least 6 with psi(x) = psi(x + 1) - 1/x, then applies
    psi(x) ~ ln x - 1/(2x) - sum B_2k / (2k x^2k). Absolute error is below 1e-10.

    Args:
        x: A positive real

    Returns:
        psi_0(x)
    """
    if not x > 0.0 or math.isinf(x):
        raise InvalidInputError(f"digamma is only defined here for finite x > 0, got {x}")

    shift = 0.0
    while x < DIGAMMA_LIFT:
        shift -= 1.0 / x
        x += 1.0

    inv_sq = 1.0 / (x * x)
    tail = 0.0
    for coefficient in reversed(_DIGAMMA_SERIES):
        tail = (tail + coefficient) * inv_sq
    return shift + math.log(x) - 0.5 / x - tail


def complement_of_power(p: float, exponent: int) -> float:
    """
    1 - (1 - p)^exponent without cancellation.

    For p * exponent below 1e-8 the binomial expansion is summed directly;
    otherwise -expm1(exponent * log1p(-p)) is used.

    Args:
        p: A probability in [0, 1]
        exponent: A non-negative integer

    Returns:
        The complement, in [0, 1]
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"probability must lie in [0, 1], got {p}")
    if exponent == 0 or p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    if p * exponent < SMALL_PRODUCT:
        # exponent*p - C(e,2) p^2 + C(e,3) p^3; the next term is below 1e-32 relative
        term = exponent * p
        total = term
        for k in (2, 3):
            term *= -(exponent - k + 1) * p / k
            total += term
        return total
    return -math.expm1(exponent * math.log1p(-p))


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = 1e-8,
    max_depth: int = 40,
) -> float:
    """
    Integrate ``f`` over [a, b] by adaptive Simpson refinement.

    Each panel is split until its Richardson error estimate falls below its
    share of ``rel_tol`` times the coarse estimate of the whole integral.

    Args:
        f: Integrand
        a: Lower bound
        b: Upper bound
        rel_tol: Relative tolerance
        max_depth: Refinement cap per panel

    Returns:
        The integral

    Raises:
        NumericFailureError: If a panel reaches ``max_depth`` without meeting
            its tolerance, or the integrand is not finite
    """
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_simpson(f, b, a, rel_tol, max_depth)

    def simpson(fa: float, fm: float, fb: float, width: float) -> float:
        return width / 6.0 * (fa + 4.0 * fm + fb)

    fa, fm, fb = f(a), f((a + b) / 2.0), f(b)
    whole = simpson(fa, fm, fb, b - a)
    if not math.isfinite(whole):
        raise NumericFailureError(f"integrand is not finite on [{a}, {b}]")
    abs_tol = rel_tol * max(abs(whole), math.ulp(1.0))
    panels = 0

    def refine(lo: float, hi: float, flo: float, fmid: float, fhi: float, estimate: float, tol: float, depth: int) -> float:
        nonlocal panels
        panels += 1
        mid = (lo + hi) / 2.0
        fl = f((lo + mid) / 2.0)
        fr = f((mid + hi) / 2.0)
        left = simpson(flo, fl, fmid, mid - lo)
        right = simpson(fmid, fr, fhi, hi - mid)
        error = (left + right - estimate) / 15.0
        if not math.isfinite(error):
            raise NumericFailureError(f"integrand is not finite on [{lo}, {hi}]")
        if abs(error) <= tol:
            return left + right + error
        if depth >= max_depth:
            raise NumericFailureError(f"quadrature did not converge on [{lo}, {hi}] after {max_depth} refinements")
        return refine(lo, mid, flo, fl, fmid, left, tol / 2.0, depth + 1) + refine(
            mid, hi, fmid, fr, fhi, right, tol / 2.0, depth + 1
        )

    result = refine(a, b, fa, fm, fb, whole, abs_tol, 0)
    logger.debug(f"adaptive_simpson on [{a}, {b}] used {panels} panels")
    return result
