"""
Expected first hitting time of the (mu+lambda) EA with 1-Bit-Swap on Royal Roads.

The model follows one active bin at a time. ``kappa_done`` bins are already
complete and ``l`` of the active bin's initial M/2 zeros have been turned into
ones. Elite counts alpha are uniform on 1..mu, and an improvement needs a pair
of elite parents (P_sel) whose swap moves a 0 of the active bin to a 1 (P_swap).

Three results are provided:

- exact: sum of geometric waiting times over every (bin, level) stage
- approximate: exponential/Taylor/midpoint chain ending in a digamma closed form
- asymptotic: the scale n^2 log(1 + KM/(M + n)) / M
"""

import logging
import math
from dataclasses import dataclass
from enum import StrEnum

from errors import (
    ApproximationDomainError,
    DegenerateParameterError,
    DivergentExpectationError,
    InvalidInputError,
)
from numerics import adaptive_simpson, complement_of_power, digamma
from royal_road import RoyalRoadLayout

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    layout: RoyalRoadLayout
    mu: int
    lam: int

    def __post_init__(self) -> None:
        if self.mu < 1:
            raise InvalidInputError("mu must be at least 1")
        if self.lam < 2:
            raise InvalidInputError("lambda must be at least 2")
        if self.lam % 2 != 0:
            raise InvalidInputError("lambda must be even")

    @property
    def pairs(self) -> int:
        return self.lam // 2


@dataclass(frozen=True)
class LevelState:
    """Progress of the model: completed bins and improvements in the active bin."""

    kappa_done: int
    l: int  # noqa: E741


@dataclass(frozen=True)
class TheoryReport:
    exact: float
    approx: float
    asymptotic_scale: float
    approx_available: bool = True
    mu_equals_lambda: bool = True
    clamp_events: int = 0


class BinIndexConvention(StrEnum):
    """Which bin index enters P_swap: completed bins 0..K-1, or 1..K."""

    COMPLETED = "completed"
    ONE_BASED = "one_based"


@dataclass
class ClampTally:
    """Counts how often an approximate failure probability left [0, 1]."""

    count: int = 0

    def record(self, raw: float) -> None:
        self.count += 1
        logger.debug(f"Clamped approximate failure probability {raw} into [0, 1]")


def _check_state(state: LevelState, params: ModelParams) -> None:
    layout = params.layout
    if not 0 <= state.kappa_done <= layout.K - 1:
        raise InvalidInputError(f"kappa_done must lie in 0..{layout.K - 1}, got {state.kappa_done}")
    if not 0 <= state.l <= layout.M // 2:
        raise InvalidInputError(f"l must lie in 0..{layout.M // 2}, got {state.l}")


def _require_approximation_domain(params: ModelParams) -> None:
    if params.mu < 2:
        raise ApproximationDomainError("approximation requires mu >= 2")
    if params.layout.M < 4:
        raise ApproximationDomainError("approximation requires M >= 4")


def p_sel(alpha: int, mu: int) -> float:
    """
    Probability that one tournament-built pair consists of two elite parents.

    Args:
        alpha: Number of elite members, 1..mu
        mu: Population size

    Returns:
        (alpha (2 mu - alpha))^2 / mu^4
    """
    if not 1 <= alpha <= mu:
        raise InvalidInputError(f"alpha must lie in 1..{mu}, got {alpha}")
    return (alpha * (2 * mu - alpha)) ** 2 / mu**4


def _swap_probability(layout: RoyalRoadLayout, kappa: int, l: int) -> float:
    n, M = layout.n, layout.M
    return (M - 2 * l) * (n + kappa * M + 2 * l) / (2 * n * n)


def p_swap(state: LevelState, params: ModelParams) -> float:
    """
    Probability that swapping between two elite parents adds a one to the active bin.

    A zero of the active bin must be picked in one parent and a one in the other:
    (M - 2l)(n + kappa_done M + 2l) / (2 n^2).
    """
    _check_state(state, params)
    return _swap_probability(params.layout, state.kappa_done, state.l)


def _success_probability(params: ModelParams, swap: float) -> float:
    total = sum(complement_of_power(p_sel(alpha, params.mu) * swap, params.pairs) for alpha in range(1, params.mu + 1))
    return total / params.mu


def p_fail_level(state: LevelState, params: ModelParams) -> float:
    """
    Probability that a generation brings no improvement at this level.

    Averages (1 - P_sel(alpha) P_swap)^(lambda/2) over alpha uniform on 1..mu.
    """
    swap = p_swap(state, params)
    total = sum((1.0 - p_sel(alpha, params.mu) * swap) ** params.pairs for alpha in range(1, params.mu + 1))
    return total / params.mu


def p_success_level(state: LevelState, params: ModelParams) -> float:
    """
    Probability that a generation improves the active bin, i.e. 1 - p_fail_level.

    Computed term by term with a cancellation-free complement.
    """
    return _success_probability(params, p_swap(state, params))


def _bin_time(params: ModelParams, kappa: int) -> float:
    total = 0.0
    for level in range(params.layout.M // 2):
        success = _success_probability(params, _swap_probability(params.layout, kappa, level))
        if success <= 0.0:
            raise DivergentExpectationError(f"zero success probability at kappa={kappa}, l={level}")
        total += 1.0 / success
    return total


def bin_expected_time_exact(kappa_done: int, params: ModelParams) -> float:
    """
    Expected generations to complete the active bin once ``kappa_done`` bins are done.

    Sum of the geometric means 1 / p_success_level over l = 0..M/2 - 1.
    """
    _check_state(LevelState(kappa_done, 0), params)
    return _bin_time(params, kappa_done)


def exact_expected_time(
    params: ModelParams,
    convention: BinIndexConvention = BinIndexConvention.COMPLETED,
) -> float:
    """
    Expected first hitting time summed over all K bin stages.

    Args:
        params: Model parameters
        convention: COMPLETED evaluates P_swap with kappa = 0..K-1; ONE_BASED
            with kappa = 1..K

    Returns:
        Expected number of generations
    """
    offset = 0 if convention is BinIndexConvention.COMPLETED else 1
    return sum(_bin_time(params, kappa + offset) for kappa in range(params.layout.K))


def gamma_factor(state: LevelState, params: ModelParams) -> float:
    """gamma = 4 mu^4 n^2 / (lambda (M - 2l)(n + kappa_done M + 2l))."""
    _check_state(state, params)
    layout = params.layout
    width = layout.M - 2 * state.l
    if width == 0:
        raise DegenerateParameterError("gamma is undefined at l = M/2")
    return 4 * params.mu**4 * layout.n**2 / (params.lam * width * (layout.n + state.kappa_done * layout.M + 2 * state.l))


def i1_approx(mu: int, gamma: float) -> float:
    """
    First-order Taylor value of the integral of exp(-(alpha(2mu - alpha))^2 / gamma) over [1, mu].

    e^{-(2mu-1)^2/gamma} (mu - 1) [1 - 2(2mu-1)(mu-1)^2 / gamma]
    """
    if mu < 1:
        raise InvalidInputError("mu must be at least 1")
    if not gamma > 0.0:
        raise InvalidInputError(f"gamma must be positive, got {gamma}")
    c = (2 * mu - 1) ** 2
    return math.exp(-c / gamma) * (mu - 1) * (1.0 - 2 * (2 * mu - 1) * (mu - 1) ** 2 / gamma)


def i1_quadrature(mu: int, gamma: float, rel_tol: float = 1e-10) -> float:
    """Numerical value of the integral that ``i1_approx`` expands."""
    if mu < 1:
        raise InvalidInputError("mu must be at least 1")
    if not gamma > 0.0:
        raise InvalidInputError(f"gamma must be positive, got {gamma}")
    return adaptive_simpson(lambda a: math.exp(-((a * (2 * mu - a)) ** 2) / gamma), 1.0, float(mu), rel_tol)


def p_fail_exponential(state: LevelState, params: ModelParams) -> float:
    """Failure probability with every (1 - x)^(lambda/2) replaced by exp(-lambda x / 2)."""
    gamma = gamma_factor(state, params)
    mu = params.mu
    return sum(math.exp(-((alpha * (2 * mu - alpha)) ** 2) / gamma) for alpha in range(1, mu + 1)) / mu


def p_fail_approx(state: LevelState, params: ModelParams, tally: ClampTally | None = None) -> float:
    """
    Approximate failure probability i1_approx(mu, gamma) / mu, clamped into [0, 1].

    Args:
        state: Model state, l < M/2
        params: Model parameters, mu >= 2
        tally: Optional counter of clamping events

    Returns:
        The clamped approximation
    """
    if params.mu < 2:
        raise ApproximationDomainError("approximation requires mu >= 2")
    raw = i1_approx(params.mu, gamma_factor(state, params)) / params.mu
    clamped = min(1.0, max(0.0, raw))
    if clamped != raw and tally is not None:
        tally.record(raw)
    return clamped


def approximation_clamps(params: ModelParams) -> int:
    """Number of level states below M/2 at which ``p_fail_approx`` had to clamp."""
    layout = params.layout
    tally = ClampTally()
    for kappa in range(layout.K):
        for l in range(layout.M // 2):  # noqa: E741
            p_fail_approx(LevelState(kappa, l), params, tally)
    return tally.count


def _taylor_stage_time(gamma: float, mu: int) -> float:
    """gamma / (gamma - gamma e^{-c/gamma} + D e^{-c/gamma}) written without cancellation."""
    c = (2 * mu - 1) ** 2
    d = 2 * (2 * mu - 1) * (mu - 1) ** 2
    decay = math.exp(-c / gamma)
    return 1.0 / (-math.expm1(-c / gamma) + decay * d / gamma)


def bin_time_taylor_sum(kappa_done: int, params: ModelParams) -> float:
    """Expected bin time from the Taylor-approximated success probability, summed over l."""
    _require_approximation_domain(params)
    return sum(
        _taylor_stage_time(gamma_factor(LevelState(kappa_done, level), params), params.mu)
        for level in range(params.layout.M // 2)
    )


def rescaled_gamma(l: float, kappa_done: int, params: ModelParams) -> float:
    """
    gamma on the unit interval: level l in [0, 1] stands for (M/2 - 1) l improvements.

    4 mu^4 n^2 / (lambda (M - (M - 2) l)(n + kappa_done M + (M - 2) l))
    """
    layout = params.layout
    M, n = layout.M, layout.n
    return 4 * params.mu**4 * n**2 / (params.lam * (M - (M - 2) * l) * (n + kappa_done * M + (M - 2) * l))


def i2_integrand(l: float, kappa_done: int, params: ModelParams) -> float:
    return _taylor_stage_time(rescaled_gamma(l, kappa_done, params), params.mu)


def i2_quadrature(kappa_done: int, params: ModelParams, rel_tol: float = 1e-8) -> float:
    """
    Integral over l in [0, 1] of the rescaled per-level expected time.

    Raises:
        NumericFailureError: If adaptive refinement does not converge
    """
    _require_approximation_domain(params)
    _check_state(LevelState(kappa_done, 0), params)
    return adaptive_simpson(lambda l: i2_integrand(l, kappa_done, params), 0.0, 1.0, rel_tol)


def _closed_form_terms(kappa_done: int, params: ModelParams) -> tuple[float, float, float, float]:
    layout = params.layout
    M, n, mu = layout.M, layout.n, params.mu
    if M == 2:
        raise DegenerateParameterError("the bin-time prefactor M/2 - 1 vanishes at M = 2")
    _require_approximation_domain(params)
    _check_state(LevelState(kappa_done, 0), params)
    sigma2 = M / 2 + n + kappa_done * M - 1
    g = 4 * mu**4 * n**2 / (params.lam * (M / 2 + 1) * sigma2)
    c = (2 * mu - 1) ** 2
    d = 2 * (2 * mu - 1) * (mu - 1) ** 2
    return M / 2 - 1, g, c, d


def bin_time_closed_form(kappa_done: int, params: ModelParams) -> float:
    """
    Closed-form expected bin time: (M/2 - 1) times the rescaled integrand at l = 1/2.

    With sigma_2 = M/2 + n + kappa_done M - 1 and
    sigma_1 = exp(lambda (2mu-1)^2 (M/2+1) sigma_2 / (4 mu^4 n^2)).
    """
    prefactor, g, c, d = _closed_form_terms(kappa_done, params)
    inv_sigma1 = math.exp(-c / g)
    return prefactor * g / (d * inv_sigma1 - g * math.expm1(-c / g))


def bin_time_closed_form_limit(kappa_done: int, params: ModelParams) -> float:
    """``bin_time_closed_form`` with sigma_1 -> 1."""
    prefactor, g, _, d = _closed_form_terms(kappa_done, params)
    return prefactor * g / d


def _approx_prefactor(params: ModelParams) -> float:
    _require_approximation_domain(params)
    layout = params.layout
    M, n, mu = layout.M, layout.n, params.mu
    return 2 * mu**4 * n**2 * (M - 2) / (params.lam * M * (M + 2) * (2 * mu - 1) * (mu - 1) ** 2)


def _harmonic_offset(layout: RoyalRoadLayout) -> float:
    return layout.M / 2 + layout.n - 1


def approx_expected_time(params: ModelParams) -> float:
    """
    Approximate expected hitting time via the digamma closed form.

    Sum over kappa = 0..K-1 of M / (a + kappa M), a = M/2 + n - 1, telescoped to
    psi(a/M + K) - psi(a/M).
    """
    prefactor = _approx_prefactor(params)
    layout = params.layout
    start = _harmonic_offset(layout) / layout.M
    return prefactor * (digamma(start + layout.K) - digamma(start))


def approx_expected_time_direct(params: ModelParams) -> float:
    """``approx_expected_time`` by summing the K terms directly."""
    prefactor = _approx_prefactor(params)
    layout = params.layout
    a = _harmonic_offset(layout)
    return prefactor * sum(layout.M / (a + kappa * layout.M) for kappa in range(layout.K))


def approx_expected_time_log(params: ModelParams) -> float:
    """``approx_expected_time`` with the digamma difference replaced by log(1 + 2KM / (M + 2n))."""
    prefactor = _approx_prefactor(params)
    layout = params.layout
    return prefactor * math.log1p(2 * layout.K * layout.M / (layout.M + 2 * layout.n))


def asymptotic_scale(layout: RoyalRoadLayout) -> float:
    """n^2 log(1 + KM / (M + n)) / M, the order of the expected hitting time."""
    n, K, M = layout.n, layout.K, layout.M
    return n**2 * math.log1p(K * M / (M + n)) / M


def theory_report(params: ModelParams) -> TheoryReport:
    """Exact, approximate and asymptotic values for one parameter set."""
    exact = exact_expected_time(params)
    try:
        approx = approx_expected_time(params)
        available = True
        clamps = approximation_clamps(params)
    except ApproximationDomainError as e:
        logger.debug(f"Approximation unavailable for {params}: {e}")
        approx = math.nan
        available = False
        clamps = 0
    return TheoryReport(
        exact=exact,
        approx=approx,
        asymptotic_scale=asymptotic_scale(params.layout),
        approx_available=available,
        mu_equals_lambda=params.mu == params.lam,
        clamp_events=clamps,
    )


@dataclass(frozen=True)
class ConventionEvidence:
    completed: float
    one_based: float
    reference: float

    @property
    def completed_departure(self) -> float:
        return abs(self.completed - self.reference) / self.reference

    @property
    def one_based_departure(self) -> float:
        return abs(self.one_based - self.reference) / self.reference


def convention_evidence(params: ModelParams, reference: float) -> ConventionEvidence:
    """Exact expectation under both bin-index conventions, against a reference value."""
    return ConventionEvidence(
        completed=exact_expected_time(params, BinIndexConvention.COMPLETED),
        one_based=exact_expected_time(params, BinIndexConvention.ONE_BASED),
        reference=reference,
    )


@dataclass(frozen=True)
class ApproximationDeviations:
    closed_form_vs_i2: float
    i1_vs_quadrature: float


def approximation_deviations(params: ModelParams) -> ApproximationDeviations:
    """
    Largest relative deviations along the approximation chain for one parameter set.

    Returns:
        max over bins of |closed form - (M/2 - 1) I2| / ((M/2 - 1) I2), and
        max over bins and levels of |i1_approx - i1_quadrature| / i1_quadrature
    """
    _require_approximation_domain(params)
    layout = params.layout
    closed = 0.0
    i1 = 0.0
    for kappa in range(layout.K):
        reference = (layout.M / 2 - 1) * i2_quadrature(kappa, params)
        closed = max(closed, abs(bin_time_closed_form(kappa, params) - reference) / reference)
        for level in range(layout.M // 2):
            gamma = gamma_factor(LevelState(kappa, level), params)
            quad = i1_quadrature(params.mu, gamma)
            i1 = max(i1, abs(i1_approx(params.mu, gamma) - quad) / quad)
    return ApproximationDeviations(closed_form_vs_i2=closed, i1_vs_quadrature=i1)
