"""
AgentRegistry - the S-agent and T-agent of every modality
"""
from typing import Dict, Iterable, Iterator, List, Mapping, Optional

import numpy as np

from errors import ConfigError
from refinedqn.agents import AgentId, DQNAgent, RandomAgent, SelectionAgent
from refinedqn.replay import DEFAULT_REPLAY_CAPACITY
from synthdomains import Domain


AGENT_KINDS = ("dqn", "random")


def all_agent_ids(num_modalities: int) -> List[AgentId]:
    """The 2K agent ids in canonical order (modality-major, source first)"""
    return [AgentId(domain, k) for k in range(num_modalities) for domain in (Domain.SOURCE, Domain.TARGET)]


class AgentRegistry:
    """Maps AgentId to the agent refining that domain/modality"""
    
    def __init__(self):
        self._agents: Dict[AgentId, SelectionAgent] = {}
    
    def register(self, agent: SelectionAgent):
        """
        Register an agent under its own id
        
        Args:
            agent: Agent to register; replaces any agent with the same id
        """
        self._agents[agent.agent_id] = agent
    
    def get(self, agent_id: AgentId) -> Optional[SelectionAgent]:
        return self._agents.get(agent_id)
    
    def __contains__(self, agent_id: AgentId) -> bool:
        return agent_id in self._agents
    
    def __len__(self) -> int:
        return len(self._agents)
    
    def __iter__(self) -> Iterator[SelectionAgent]:
        for agent_id in sorted(self._agents):
            yield self._agents[agent_id]
    
    def ids(self) -> List[AgentId]:
        return sorted(self._agents)


def build_registry(
    num_modalities: int,
    embed_dim: int,
    num_candidates: int,
    seed: int,
    enabled: Optional[Iterable[AgentId]] = None,
    kind: str = "dqn",
    **agent_options,
) -> AgentRegistry:
    """
    Create agents for the enabled ids
    
    Each of the 2K ids gets its own initialisation stream whether or not it is
    enabled, so toggling one agent never changes another agent's weights.
    
    Args:
        num_modalities: K
        embed_dim: d_f
        num_candidates: N_c
        seed: Run seed
        enabled: Ids to create (all 2K when None)
        kind: "dqn" or "random"
        agent_options: Extra DQNAgent keyword arguments
    """
    if kind not in AGENT_KINDS:
        raise ConfigError(f"unknown agent kind '{kind}', expected one of {AGENT_KINDS}")
    ids = all_agent_ids(num_modalities)
    wanted = set(ids if enabled is None else enabled)
    unknown = wanted - set(ids)
    if unknown:
        raise ConfigError(f"agent ids outside the model: {sorted(str(a) for a in unknown)}")
    
    streams = np.random.SeedSequence([seed, 0xA6E]).spawn(len(ids))
    registry = AgentRegistry()
    for agent_id, stream in zip(ids, streams):
        if agent_id not in wanted:
            continue
        if kind == "random":
            agent = RandomAgent(agent_id, num_candidates, agent_options.get("replay_capacity", DEFAULT_REPLAY_CAPACITY))
        else:
            agent = DQNAgent(agent_id, embed_dim, num_candidates, np.random.default_rng(stream), **agent_options)
        registry.register(agent)
    return registry


def total_dqn_loss(losses: Mapping[AgentId, Optional[float]]) -> float:
    """L_dqn: sum of per-agent L_q, skipping agents that did not update"""
    return float(sum(loss for loss in losses.values() if loss is not None))
