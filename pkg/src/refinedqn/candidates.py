"""
Candidate sets and the agent state built from them
"""
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Set

import numpy as np

from errors import ConfigError, EpisodeStateError
from synthdomains import Segment


@dataclass(frozen=True, eq=False)
class AgentState:
    """
    d_f x N_c matrix; column n is the embedding of member n, zero once removed
    """
    matrix: np.ndarray
    removed: FrozenSet[int]
    
    @property
    def num_candidates(self) -> int:
        return self.matrix.shape[1]
    
    def flat(self) -> np.ndarray:
        return self.matrix.reshape(-1)
    
    def valid_mask(self) -> np.ndarray:
        mask = np.ones(self.num_candidates, dtype=bool)
        mask[list(self.removed)] = False
        return mask


@dataclass(eq=False)
class CandidateSet:
    """
    N_c segments of one domain seen through one modality
    
    ``positions`` index the members inside the half-batch they came from;
    ``embeddings`` holds one row per member (N_c x d_f).
    """
    members: List[Segment]
    positions: np.ndarray
    embeddings: Optional[np.ndarray] = None
    removed: Set[int] = field(default_factory=set)
    
    def __post_init__(self):
        if len(self.positions) != len(self.members):
            raise ConfigError("candidate positions do not match members")
        if self.embeddings is not None and self.embeddings.shape[0] != len(self.members):
            raise ConfigError("candidate embeddings do not match members")
    
    @property
    def size(self) -> int:
        return len(self.members)
    
    def valid_mask(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[list(self.removed)] = False
        return mask
    
    def remove(self, index: int):
        if not 0 <= index < self.size:
            raise EpisodeStateError(f"action {index} out of range [0, {self.size})")
        if index in self.removed:
            raise EpisodeStateError(f"member {index} already removed")
        self.removed.add(index)
    
    def state(self) -> AgentState:
        if self.embeddings is None:
            raise EpisodeStateError("candidate set has no embeddings to build a state from")
        matrix = self.embeddings.T.copy()
        matrix[:, list(self.removed)] = 0.0
        return AgentState(matrix=matrix, removed=frozenset(self.removed))


def partition_batch(
    segments: Sequence[Segment],
    num_candidates: int,
    rng: Optional[np.random.Generator] = None,
    embeddings: Optional[np.ndarray] = None,
) -> List[CandidateSet]:
    """
    Split a half-batch into |half-batch| / N_c disjoint candidate sets
    
    Args:
        segments: Half-batch of one domain
        num_candidates: N_c
        rng: Shuffles the assignment when given
        embeddings: Optional n x d_f rows aligned with ``segments``
        
    Raises:
        ConfigError: size not divisible by N_c
    """
    n = len(segments)
    if num_candidates < 1 or n % num_candidates != 0:
        raise ConfigError(f"half-batch of {n} is not divisible into candidate sets of {num_candidates}")
    if embeddings is not None and embeddings.shape[0] != n:
        raise ConfigError(f"{embeddings.shape[0]} embeddings for {n} segments")
    
    order = rng.permutation(n) if rng is not None else np.arange(n)
    sets = []
    for start in range(0, n, num_candidates):
        positions = order[start:start + num_candidates]
        sets.append(CandidateSet(
            members=[segments[i] for i in positions],
            positions=positions,
            embeddings=None if embeddings is None else embeddings[positions],
        ))
    return sets
