"""
Experience replay for the selection agents
"""
from collections import deque
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from errors import ConfigError
from refinedqn.candidates import AgentState


DEFAULT_REPLAY_CAPACITY = 2000


@dataclass(eq=False)
class Transition:
    """
    (S_e, a_e, r_e, S_e+1, terminal) plus what the reward was computed from
    
    ``embedding`` and ``logit`` snapshot the removed member and the
    discriminator output at reward time, so the reward can be recomputed.
    """
    state: AgentState
    action: int
    reward: float
    next_state: AgentState
    terminal: bool
    segment_id: int = -1
    embedding: Optional[np.ndarray] = None
    logit: float = float("nan")
    relevance: float = float("nan")


class ReplayBuffer:
    """Bounded FIFO pool with uniform sampling"""
    
    def __init__(self, capacity: int = DEFAULT_REPLAY_CAPACITY):
        if capacity < 1:
            raise ConfigError(f"replay capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.buffer = deque(maxlen=capacity)
    
    def push(self, transition: Transition):
        self.buffer.append(transition)
    
    def extend(self, transitions: List[Transition]):
        self.buffer.extend(transitions)
    
    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        """
        Draw up to ``batch_size`` distinct transitions uniformly
        
        Returns:
            min(batch_size, len(self)) transitions
        """
        size = min(batch_size, len(self.buffer))
        if size == 0:
            return []
        picks = rng.choice(len(self.buffer), size=size, replace=False)
        return [self.buffer[i] for i in picks]
    
    def __len__(self) -> int:
        return len(self.buffer)
    
    def __iter__(self):
        return iter(self.buffer)
