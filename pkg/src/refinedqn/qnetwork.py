"""
QNetwork - flattened agent state to one q-value per candidate
"""
from typing import List

import numpy as np

from diffcore import DEFAULT_LEAKY_SLOPE, Tensor, leaky_relu, no_tape
from modelcore.layers import Linear
from refinedqn.candidates import AgentState


class QNetwork:
    """d_f * N_c -> hidden -> N_c with LeakyReLU on the hidden layer"""
    
    def __init__(
        self,
        embed_dim: int,
        num_candidates: int,
        rng: np.random.Generator,
        hidden_dim: int = 128,
        leaky_slope: float = DEFAULT_LEAKY_SLOPE,
        name: str = "qnet",
    ):
        self.embed_dim = embed_dim
        self.num_candidates = num_candidates
        self.leaky_slope = leaky_slope
        self.fc1 = Linear(embed_dim * num_candidates, hidden_dim, rng, f"{name}.fc1")
        self.fc2 = Linear(hidden_dim, num_candidates, rng, f"{name}.fc2")
    
    def __call__(self, states: Tensor) -> Tensor:
        """Q-values for a batch of flattened states (n x d_f*N_c -> n x N_c)"""
        return self.fc2(leaky_relu(self.fc1(states), self.leaky_slope))
    
    def q_values(self, state: AgentState) -> np.ndarray:
        with no_tape():
            return self(Tensor(state.flat())).data[0]
    
    def parameters(self) -> List[Tensor]:
        return self.fc1.parameters() + self.fc2.parameters()
