"""
Royal Roads problem geometry, genomes, fitness and initialization policies.

A genome is a one-dimensional ``uint8`` array of 0/1 values. Bin ``b`` (0-based)
occupies the global positions ``[b * M, (b + 1) * M)``.
"""

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from errors import InvalidInputError

logger = logging.getLogger(__name__)


type Genome = npt.NDArray[np.uint8]
type FitnessValue = int


@dataclass(frozen=True)
class RoyalRoadLayout:
    """A string of ``n`` bits split into ``K`` consecutive bins of ``M`` bits."""

    n: int
    K: int
    M: int

    def __post_init__(self) -> None:
        if self.K < 1:
            raise InvalidInputError("K must be at least 1")
        if self.M < 2 or self.M % 2 != 0:
            raise InvalidInputError("M must be even and at least 2")
        if self.n != self.K * self.M:
            raise InvalidInputError(f"n must equal K * M ({self.K} * {self.M} = {self.K * self.M}), got {self.n}")

    @classmethod
    def from_bins(cls, K: int, M: int) -> "RoyalRoadLayout":
        return cls(n=K * M, K=K, M=M)

    @property
    def optimum(self) -> FitnessValue:
        """Fitness of the all-ones string."""
        return self.n


def genome_from_string(bits: str) -> Genome:
    """
    Build a genome from a string of '0' and '1' characters.

    Args:
        bits: The bit string, e.g. "1010"

    Returns:
        The genome as a uint8 array
    """
    if any(c not in "01" for c in bits):
        raise InvalidInputError(f"genome string may only contain 0 and 1, got {bits!r}")
    return np.fromiter((c == "1" for c in bits), dtype=np.uint8, count=len(bits))


def genome_to_string(genome: Genome) -> str:
    return "".join("1" if b else "0" for b in genome)


def validate_genome(genome: Genome, layout: RoyalRoadLayout) -> None:
    """
    Check that a genome is a binary sequence of length ``layout.n``.

    Raises:
        InvalidInputError: On a length mismatch or a non-binary value
    """
    if genome.ndim != 1 or genome.shape[0] != layout.n:
        raise InvalidInputError(f"genome length {genome.shape[-1] if genome.ndim else 0} does not match n={layout.n}")
    if genome.size and genome.max() > 1:
        raise InvalidInputError("genome values must be 0 or 1")


def bin_ones(genome: Genome, layout: RoyalRoadLayout) -> npt.NDArray[np.int64]:
    """Number of 1-bits in each of the ``K`` bins."""
    validate_genome(genome, layout)
    return genome.reshape(layout.K, layout.M).sum(axis=1, dtype=np.int64)


def rr_fitness(genome: Genome, layout: RoyalRoadLayout) -> FitnessValue:
    """
    Royal Roads fitness: ``M`` for every bin whose bits are all 1.

    Args:
        genome: The genome to evaluate
        layout: The problem geometry

    Returns:
        ``M`` times the number of complete bins
    """
    validate_genome(genome, layout)
    complete = genome.reshape(layout.K, layout.M).all(axis=1)
    return int(complete.sum()) * layout.M


def rr_fitness_batch(members: npt.NDArray[np.uint8], layout: RoyalRoadLayout) -> npt.NDArray[np.int64]:
    """
    Royal Roads fitness of every row of a ``(count, n)`` genome matrix.

    Rows are not validated; callers own well-formed matrices.
    """
    complete = members.reshape(members.shape[0], layout.K, layout.M).all(axis=2)
    return complete.sum(axis=1, dtype=np.int64) * layout.M


def onemax(genome: Genome) -> int:
    """Count of 1-bits (the auxiliary progress function)."""
    return int(np.count_nonzero(genome))


def half_ones_init(layout: RoyalRoadLayout, rng: np.random.Generator) -> Genome:
    """
    Genome whose every bin holds exactly ``M/2`` ones at uniformly random positions.

    Args:
        layout: The problem geometry
        rng: Source of randomness

    Returns:
        A genome with Royal Roads fitness 0 whenever M >= 2
    """
    if layout.M % 2 != 0:
        raise InvalidInputError("half-ones initialization requires an even M")
    bins = np.zeros((layout.K, layout.M), dtype=np.uint8)
    bins[:, : layout.M // 2] = 1
    return rng.permuted(bins, axis=1).reshape(layout.n)


def random_init(layout: RoyalRoadLayout, rng: np.random.Generator) -> Genome:
    """Genome whose bits are independently 1 with probability 1/2."""
    return np.asarray(rng.integers(0, 2, size=layout.n), dtype=np.uint8)
