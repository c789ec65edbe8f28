"""
RandomAgent - uniform selection, no learning
"""
from typing import Optional

import numpy as np

from refinedqn.agents.base import SelectionAgent
from refinedqn.candidates import AgentState
from refinedqn.episode import epsilon_greedy


class RandomAgent(SelectionAgent):
    """Picks a uniformly random valid member regardless of epsilon"""
    
    def q_values(self, state: AgentState) -> np.ndarray:
        return np.zeros(state.num_candidates)
    
    def select_action(self, state: AgentState, epsilon: float, rng: np.random.Generator) -> int:
        return epsilon_greedy(self.q_values(state), state.valid_mask(), 1.0, rng)
    
    def update(self, batch_size: int, gamma: float, rng: np.random.Generator) -> Optional[float]:
        return None
