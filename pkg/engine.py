"""
The (mu+lambda) elitist EA with the 1-Bit-Swap operator on Royal Roads.

One generation is: build lambda/2 parent pairs by binary tournament, swap one
uniformly chosen bit of each parent with the other, then keep the elites and
fill the remaining slots with the best offspring.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import numpy.typing as npt

from errors import InvalidInputError
from royal_road import (
    FitnessValue,
    Genome,
    RoyalRoadLayout,
    half_ones_init,
    random_init,
    rr_fitness_batch,
)

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


class InitPolicy(StrEnum):
    HALF_ONES = "half_ones"
    RANDOM = "random"


@dataclass(frozen=True)
class EAConfig:
    """Parameters of a single run."""

    mu: int
    lam: int
    max_generations: int
    init_policy: InitPolicy = InitPolicy.HALF_ONES
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mu < 1:
            raise InvalidInputError("mu must be at least 1")
        if self.lam < 2:
            raise InvalidInputError("lambda must be at least 2")
        if self.lam % 2 != 0:
            raise InvalidInputError("lambda must be even")
        if self.max_generations < 1:
            raise InvalidInputError("max_generations must be at least 1")
        if not 0 <= self.seed <= SEED_MASK:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")


@dataclass
class Population:
    """
    The ``mu`` current members and their cached Royal Roads fitness.

    ``members`` is a ``(mu, n)`` uint8 matrix; ``fitness[i]`` is always the
    fitness of ``members[i]``.
    """

    members: npt.NDArray[np.uint8]
    fitness: npt.NDArray[np.int64]

    @classmethod
    def from_members(cls, members: npt.ArrayLike, layout: RoyalRoadLayout) -> "Population":
        matrix = np.array(members, dtype=np.uint8, ndmin=2)
        if matrix.shape[1] != layout.n:
            raise InvalidInputError(f"member length {matrix.shape[1]} does not match n={layout.n}")
        return cls(members=matrix, fitness=rr_fitness_batch(matrix, layout))

    @property
    def size(self) -> int:
        return self.members.shape[0]

    @property
    def best_fitness(self) -> FitnessValue:
        return int(self.fitness.max())

    @property
    def elite_count(self) -> int:
        """Members tied at the current best fitness."""
        return int(np.count_nonzero(self.fitness == self.fitness.max()))


@dataclass
class RunResult:
    """
    Outcome of one run.

    ``best_fitness_trace[t]`` is the best fitness after ``t`` generations; the
    run stops at its first hit, so the trace ends there.
    """

    hit_generation: int | None
    best_fitness_trace: list[FitnessValue] = field(default_factory=list)
    elite_count_trace: list[int] = field(default_factory=list)

    @property
    def final_best(self) -> FitnessValue:
        return self.best_fitness_trace[-1]

    @property
    def hit(self) -> bool:
        return self.hit_generation is not None


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """
    Counter-based generator for ``seed``, optionally keyed by child indices.

    Args:
        seed: 64-bit master seed
        spawn_key: Child indices, e.g. (row_index, replicate)

    Returns:
        A Philox-backed numpy Generator
    """
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(spawn_key))
    return np.random.Generator(np.random.Philox(sequence))


def tournament_indices(
    fitness: npt.NDArray[np.int64],
    count: int,
    rng: np.random.Generator,
) -> npt.NDArray[np.intp]:
    """
    Run ``count`` independent binary tournaments over ``fitness``.

    Each tournament draws two indices uniformly with replacement and keeps the
    strictly fitter one; ties go to a fair coin.
    """
    draws = np.asarray(rng.integers(0, fitness.shape[0], size=(count, 2)))
    coins = np.asarray(rng.random(count)) < 0.5
    first, second = draws[:, 0], draws[:, 1]
    f_first, f_second = fitness[first], fitness[second]
    take_first = (f_first > f_second) | ((f_first == f_second) & coins)
    return np.where(take_first, first, second)


def tournament_pick(pop: Population, rng: np.random.Generator) -> int:
    """Index of the winner of one binary tournament."""
    return int(tournament_indices(pop.fitness, 1, rng)[0])


def build_pool(
    pop: Population,
    lam: int,
    rng: np.random.Generator,
) -> list[tuple[Genome, Genome]]:
    """
    Select ``lam/2`` parent pairs by tournament.

    Args:
        pop: The current population
        lam: Pool size; must be even
        rng: Source of randomness

    Returns:
        Parent pairs; every parent is a copy, so recombining them never
        touches the population
    """
    if lam % 2 != 0:
        raise InvalidInputError("lambda must be even")
    first, second = _select_parents(pop, lam, rng)
    return list(zip(first, second))


def _select_parents(
    pop: Population,
    lam: int,
    rng: np.random.Generator,
) -> tuple[npt.NDArray[np.uint8], npt.NDArray[np.uint8]]:
    winners = tournament_indices(pop.fitness, lam, rng)
    parents = pop.members[winners]  # fancy indexing copies
    return parents[0::2], parents[1::2]


def _swap_rows(
    first: npt.NDArray[np.uint8],
    second: npt.NDArray[np.uint8],
    rng: np.random.Generator,
) -> None:
    """Exchange one uniformly chosen bit between row r of ``first`` and row r of ``second``, in place."""
    pairs, n = first.shape
    rows = np.arange(pairs)
    i = np.asarray(rng.integers(0, n, size=pairs))
    j = np.asarray(rng.integers(0, n, size=pairs))
    held = first[rows, i].copy()
    first[rows, i] = second[rows, j]
    second[rows, j] = held


def one_bit_swap(pair: tuple[Genome, Genome], rng: np.random.Generator) -> tuple[Genome, Genome]:
    """
    Swap the value at a random position of parent 1 with a random position of parent 2.

    Args:
        pair: The two parents (left untouched)
        rng: Source of randomness; position in parent 1 is drawn first

    Returns:
        The two offspring
    """
    first = np.array(pair[0], dtype=np.uint8, ndmin=2)
    second = np.array(pair[1], dtype=np.uint8, ndmin=2)
    _swap_rows(first, second, rng)
    return first[0], second[0]


def replacement(
    pop: Population,
    pool: Sequence[Genome] | npt.NDArray[np.uint8],
    layout: RoyalRoadLayout,
) -> Population:
    """
    Keep the elites, then fill the remaining slots from the pool.

    With B the current best fitness, candidates are ranked in four tiers:

    1. offspring with fitness >= B, so neutral offspring can move the
       population along a plateau
    2. members at B (the elites), in index order
    3. the remaining offspring
    4. the remaining members, used only when the pool runs out

    Within a tier, higher fitness first and pool (or index) order on ties.
    The first ``mu`` survive.

    Args:
        pop: The current population
        pool: The offspring, non-empty
        layout: The problem geometry

    Returns:
        The next population, with best fitness >= B
    """
    if len(pool) == 0:
        raise InvalidInputError("offspring pool must not be empty")
    offspring = np.array(pool, dtype=np.uint8, ndmin=2)
    offspring_fitness = rr_fitness_batch(offspring, layout)
    best = pop.fitness.max()

    candidates = np.concatenate([offspring, pop.members])
    fitness = np.concatenate([offspring_fitness, pop.fitness])
    tier = np.concatenate([np.where(offspring_fitness >= best, 0, 2), np.where(pop.fitness == best, 1, 3)])
    # lexsort: last key is primary
    order = np.lexsort((np.arange(len(fitness)), -fitness, tier))[: pop.size]
    return Population(members=candidates[order], fitness=fitness[order])


def initial_population(
    layout: RoyalRoadLayout,
    mu: int,
    policy: InitPolicy,
    rng: np.random.Generator,
) -> Population:
    init = half_ones_init if policy is InitPolicy.HALF_ONES else random_init
    return Population.from_members([init(layout, rng) for _ in range(mu)], layout)


def generation(
    pop: Population,
    config: EAConfig,
    layout: RoyalRoadLayout,
    rng: np.random.Generator,
) -> Population:
    """One generation: tournament pool, 1-Bit-Swap on every pair, replacement."""
    first, second = _select_parents(pop, config.lam, rng)
    _swap_rows(first, second, rng)
    offspring = np.empty((config.lam, layout.n), dtype=np.uint8)
    offspring[0::2] = first
    offspring[1::2] = second
    return replacement(pop, offspring, layout)


def run(
    config: EAConfig,
    layout: RoyalRoadLayout,
    *,
    rng: np.random.Generator | None = None,
    initial: Population | None = None,
) -> RunResult:
    """
    Iterate generations until the optimum appears or the budget is spent.

    Args:
        config: Run parameters; ``config.seed`` seeds the run unless ``rng`` is given
        layout: The problem geometry
        rng: Optional generator overriding the seed
        initial: Optional initial population overriding ``config.init_policy``

    Returns:
        The first hitting time (0 if the initial population already holds the
        optimum) and per-generation traces
    """
    if rng is None:
        rng = make_rng(config.seed)
    pop = initial if initial is not None else initial_population(layout, config.mu, config.init_policy, rng)
    if pop.size != config.mu:
        raise InvalidInputError(f"initial population has {pop.size} members, expected mu={config.mu}")

    result = RunResult(hit_generation=None)
    for t in range(config.max_generations + 1):
        if t > 0:
            pop = generation(pop, config, layout, rng)
        result.best_fitness_trace.append(pop.best_fitness)
        result.elite_count_trace.append(pop.elite_count)
        if pop.best_fitness == layout.optimum:
            result.hit_generation = t
            break

    logger.debug(f"Run seed={config.seed} mu={config.mu} lambda={config.lam} hit={result.hit_generation}")
    return result
