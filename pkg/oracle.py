"""
High-precision re-evaluation of the exact model with mpmath.

Used to back up floating-point results when a value is checked against
published figures, and by the test suite as an independent oracle.
"""

import logging

import mpmath

from theory import ModelParams

logger = logging.getLogger(__name__)

DEFAULT_DIGITS = 50


def p_success_level_mp(kappa_done: int, l: int, params: ModelParams, dps: int = DEFAULT_DIGITS) -> mpmath.mpf:
    """1 - (1/mu) sum_alpha (1 - P_sel(alpha) P_swap)^(lambda/2) at ``dps`` digits."""
    layout = params.layout
    with mpmath.workdps(dps):
        n, M, mu = mpmath.mpf(layout.n), mpmath.mpf(layout.M), mpmath.mpf(params.mu)
        swap = (M - 2 * l) * (n + kappa_done * M + 2 * l) / (2 * n**2)
        fail = mpmath.fsum(
            (1 - (alpha * (2 * mu - alpha)) ** 2 / mu**4 * swap) ** params.pairs for alpha in range(1, params.mu + 1)
        )
        return 1 - fail / mu


def exact_expected_time_mp(params: ModelParams, dps: int = DEFAULT_DIGITS, first_kappa: int = 0) -> mpmath.mpf:
    """
    Exact expected hitting time at ``dps`` digits.

    Args:
        params: Model parameters
        dps: Working precision in decimal digits
        first_kappa: 0 for kappa = 0..K-1, 1 for kappa = 1..K

    Returns:
        The expectation as an mpf
    """
    layout = params.layout
    with mpmath.workdps(dps):
        total = mpmath.fsum(
            1 / p_success_level_mp(kappa, level, params, dps)
            for kappa in range(first_kappa, first_kappa + layout.K)
            for level in range(layout.M // 2)
        )
    logger.debug(f"High-precision exact time for {params}: {mpmath.nstr(total, 20)}")
    return total


def digamma_mp(x: float, dps: int = DEFAULT_DIGITS) -> mpmath.mpf:
    with mpmath.workdps(dps):
        return mpmath.digamma(mpmath.mpf(x))
