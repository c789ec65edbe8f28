"""
SelectionAgent - Abstract base class for instance-selection agents
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import ConfigError
from refinedqn.candidates import AgentState
from refinedqn.episode import epsilon_greedy
from refinedqn.replay import DEFAULT_REPLAY_CAPACITY, ReplayBuffer
from synthdomains import Domain


@dataclass(frozen=True, order=True)
class AgentId:
    """S-agent or T-agent of one modality"""
    domain: Domain
    modality: int
    
    def __post_init__(self):
        if self.modality < 0:
            raise ConfigError(f"modality index must be >= 0, got {self.modality}")
    
    @property
    def label(self) -> str:
        prefix = "S" if self.domain == Domain.SOURCE else "T"
        return f"{prefix}{self.modality}"
    
    def __str__(self):
        return self.label


class SelectionAgent(ABC):
    """
    Abstract base class for agents that pick members to remove
    
    Every agent owns a replay buffer; learning agents also own a network.
    """
    
    def __init__(self, agent_id: AgentId, num_candidates: int, replay_capacity: int = DEFAULT_REPLAY_CAPACITY):
        """
        Initialize agent
        
        Args:
            agent_id: Domain and modality this agent refines
            num_candidates: N_c, width of the action space
            replay_capacity: Size of the FIFO replay pool
        """
        self.agent_id = agent_id
        self.num_candidates = num_candidates
        self.replay = ReplayBuffer(replay_capacity)
    
    @abstractmethod
    def q_values(self, state: AgentState) -> np.ndarray:
        """
        Score every action of ``state``
        
        Returns:
            Array of N_c scores
        """
        raise NotImplementedError("Subclasses must implement q_values method")
    
    @abstractmethod
    def update(self, batch_size: int, gamma: float, rng: np.random.Generator) -> Optional[float]:
        """
        Learn from a replay minibatch
        
        Returns:
            L_q for this update, None when nothing was learned
        """
        raise NotImplementedError("Subclasses must implement update method")
    
    def select_action(self, state: AgentState, epsilon: float, rng: np.random.Generator) -> int:
        return epsilon_greedy(self.q_values(state), state.valid_mask(), epsilon, rng)
    
    def get_agent_name(self) -> str:
        return f"{self.__class__.__name__}[{self.agent_id}]"
