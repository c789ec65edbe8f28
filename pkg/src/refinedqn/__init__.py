"""Instance refinement: per-domain, per-modality selection agents"""
from refinedqn.candidates import AgentState, CandidateSet, partition_batch
from refinedqn.replay import DEFAULT_REPLAY_CAPACITY, ReplayBuffer, Transition
from refinedqn.qnetwork import QNetwork
from refinedqn.reward import (
    LogitScorer,
    relevance,
    relevance_from_logit,
    reward,
    reward_from_logit,
    reward_from_relevance,
)
from refinedqn.episode import dqn_update, epsilon_greedy, greedy_action, run_episode, select_action, td_target
from refinedqn.agents import AgentId, DQNAgent, RandomAgent, SelectionAgent
from refinedqn.registry import AGENT_KINDS, AgentRegistry, all_agent_ids, build_registry, total_dqn_loss
from refinedqn.refiner import (
    REWARD_TIMINGS,
    AgentUpdateReport,
    InstanceRefiner,
    MaskDumpRow,
    SelectionCounts,
    refine_halfbatch,
)

__all__ = [
    "AgentState",
    "CandidateSet",
    "partition_batch",
    "DEFAULT_REPLAY_CAPACITY",
    "ReplayBuffer",
    "Transition",
    "QNetwork",
    "LogitScorer",
    "relevance",
    "relevance_from_logit",
    "reward",
    "reward_from_logit",
    "reward_from_relevance",
    "dqn_update",
    "epsilon_greedy",
    "greedy_action",
    "run_episode",
    "select_action",
    "td_target",
    "AgentId",
    "DQNAgent",
    "RandomAgent",
    "SelectionAgent",
    "AGENT_KINDS",
    "AgentRegistry",
    "all_agent_ids",
    "build_registry",
    "total_dqn_loss",
    "REWARD_TIMINGS",
    "AgentUpdateReport",
    "InstanceRefiner",
    "MaskDumpRow",
    "SelectionCounts",
    "refine_halfbatch",
]
