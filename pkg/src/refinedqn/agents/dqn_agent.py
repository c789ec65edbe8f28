"""
DQNAgent - Q-learning selection agent with experience replay
"""
from typing import Optional, Tuple

import numpy as np

from diffcore import DEFAULT_LEAKY_SLOPE, Adam
from refinedqn.agents.base import AgentId, SelectionAgent
from refinedqn.candidates import AgentState
from refinedqn.episode import dqn_update
from refinedqn.qnetwork import QNetwork
from refinedqn.replay import DEFAULT_REPLAY_CAPACITY


class DQNAgent(SelectionAgent):
    """Agent with its own QNetwork, Adam optimizer and replay pool"""
    
    def __init__(
        self,
        agent_id: AgentId,
        embed_dim: int,
        num_candidates: int,
        rng: np.random.Generator,
        hidden_dim: int = 128,
        lr: float = 1e-3,
        replay_capacity: int = DEFAULT_REPLAY_CAPACITY,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-7,
        leaky_slope: float = DEFAULT_LEAKY_SLOPE,
    ):
        super().__init__(agent_id, num_candidates, replay_capacity)
        self.qnet = QNetwork(
            embed_dim,
            num_candidates,
            rng,
            hidden_dim=hidden_dim,
            leaky_slope=leaky_slope,
            name=f"agent.{agent_id.label}",
        )
        self.optimizer = Adam(self.qnet.parameters(), lr=lr, betas=betas, eps=eps, weight_decay=weight_decay)
    
    def q_values(self, state: AgentState) -> np.ndarray:
        return self.qnet.q_values(state)
    
    def update(self, batch_size: int, gamma: float, rng: np.random.Generator) -> Optional[float]:
        minibatch = self.replay.sample(batch_size, rng)
        return dqn_update(self.qnet, self.optimizer, minibatch, gamma)
