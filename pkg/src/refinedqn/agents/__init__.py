"""Selection agents"""
from refinedqn.agents.base import AgentId, SelectionAgent
from refinedqn.agents.dqn_agent import DQNAgent
from refinedqn.agents.random_agent import RandomAgent

__all__ = ["AgentId", "SelectionAgent", "DQNAgent", "RandomAgent"]
