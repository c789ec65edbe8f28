"""
InstanceRefiner - runs the agents over a mixed batch and trains them
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError
from refinedqn.agents import AgentId, SelectionAgent
from refinedqn.candidates import partition_batch
from refinedqn.episode import run_episode
from refinedqn.registry import AgentRegistry, all_agent_ids, total_dqn_loss
from refinedqn.replay import Transition
from refinedqn.reward import LogitScorer, relevance_from_logit, reward_from_relevance
from synthdomains import Domain, Segment
from utils.logger import get_logger

logger = get_logger()


REWARD_TIMINGS = ("before_update", "after_update")

# step, modality, domain, segment_id, removed_flag, relevance, reward
MaskDumpRow = Tuple[int, int, str, int, int, float, float]


@dataclass(eq=False)
class _PendingEpisodes:
    step: int
    agent_id: AgentId
    segments: List[Segment]
    logits: Optional[np.ndarray]
    keep: np.ndarray
    transitions: List[Transition]


@dataclass
class SelectionCounts:
    """Running removed / negative tallies for one agent"""
    removed: int = 0
    removed_negative: int = 0
    negative_seen: int = 0
    
    @property
    def precision(self) -> Optional[float]:
        return self.removed_negative / self.removed if self.removed else None
    
    @property
    def recall(self) -> Optional[float]:
        return self.removed_negative / self.negative_seen if self.negative_seen else None


@dataclass
class AgentUpdateReport:
    """What one round of agent updates produced"""
    losses: Dict[AgentId, Optional[float]] = field(default_factory=dict)
    mean_rewards: Dict[AgentId, float] = field(default_factory=dict)
    dump_rows: List[MaskDumpRow] = field(default_factory=list)
    
    @property
    def total_loss(self) -> float:
        return total_dqn_loss(self.losses)


def refine_halfbatch(
    agent: Optional[SelectionAgent],
    segments: Sequence[Segment],
    embeddings: np.ndarray,
    domain: Domain,
    num_candidates: int,
    terminal_steps: int,
    epsilon: float,
    tau: float,
    scorer: LogitScorer,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, List[Transition]]:
    """
    Keep-mask over one domain's half-batch for one modality
    
    Returns:
        (mask with exactly (n / N_c) * E False entries, transitions); an absent
        agent keeps everything and records nothing
    """
    keep = np.ones(len(segments), dtype=bool)
    if agent is None:
        return keep, []
    
    transitions: List[Transition] = []
    for cset in partition_batch(segments, num_candidates, rng, embeddings):
        _, episode = run_episode(agent, cset, terminal_steps, epsilon, rng, scorer, domain, tau)
        keep[cset.positions[sorted(cset.removed)]] = False
        transitions.extend(episode)
    return keep, transitions


class InstanceRefiner:
    """
    Owns the agent registry, per-agent random streams, the epsilon schedule
    and the reward timing
    """
    
    def __init__(
        self,
        registry: AgentRegistry,
        num_modalities: int,
        num_candidates: int = 5,
        terminal_steps: int = 1,
        epsilon: float = 0.5,
        epsilon_final: Optional[float] = None,
        decay_steps: int = 0,
        tau_source: float = 0.5,
        tau_target: float = 0.5,
        gamma: float = 0.9,
        dqn_batch_size: int = 32,
        reward_timing: str = "before_update",
        seed: int = 0,
        record_masks: bool = False,
    ):
        if terminal_steps >= num_candidates:
            raise ConfigError(f"terminal_E ({terminal_steps}) must be < N_c ({num_candidates})")
        if reward_timing not in REWARD_TIMINGS:
            raise ConfigError(f"reward_timing must be one of {REWARD_TIMINGS}, got '{reward_timing}'")
        
        self.registry = registry
        self.num_modalities = num_modalities
        self.num_candidates = num_candidates
        self.terminal_steps = terminal_steps
        self.epsilon = epsilon
        self.epsilon_final = epsilon_final
        self.decay_steps = decay_steps
        self.taus = {Domain.SOURCE: tau_source, Domain.TARGET: tau_target}
        self.gamma = gamma
        self.dqn_batch_size = dqn_batch_size
        self.reward_timing = reward_timing
        self.record_masks = record_masks
        
        ids = all_agent_ids(num_modalities)
        streams = np.random.SeedSequence([seed, 0x5E1]).spawn(len(ids))
        self._rngs = {agent_id: np.random.default_rng(s) for agent_id, s in zip(ids, streams)}
        self._pending: List[_PendingEpisodes] = []
        self.counts: Dict[AgentId, SelectionCounts] = {agent_id: SelectionCounts() for agent_id in registry.ids()}
    
    @property
    def active(self) -> bool:
        return len(self.registry) > 0
    
    def epsilon_at(self, step: int) -> float:
        """Constant epsilon, or linear decay to ``epsilon_final`` over ``decay_steps``"""
        if self.epsilon_final is None or self.decay_steps <= 0:
            return self.epsilon
        frac = min(max(step, 0) / self.decay_steps, 1.0)
        return self.epsilon + frac * (self.epsilon_final - self.epsilon)
    
    def refine_halfbatch(
        self,
        segments: Sequence[Segment],
        embeddings: np.ndarray,
        domain: Domain,
        modality: int,
        scorer: LogitScorer,
        step: int = 0,
    ) -> np.ndarray:
        """Keep-mask for one domain half and one modality; all-keep without an agent"""
        agent_id = AgentId(domain, modality)
        agent = self.registry.get(agent_id)
        keep, transitions = refine_halfbatch(
            agent,
            segments,
            embeddings,
            domain,
            self.num_candidates,
            self.terminal_steps,
            self.epsilon_at(step),
            self.taus[domain],
            scorer,
            self._rngs[agent_id],
        )
        if agent is not None:
            logits = scorer(embeddings) if self.record_masks else None
            self._pending.append(_PendingEpisodes(step, agent_id, list(segments), logits, keep, transitions))
            counts = self.counts[agent_id]
            negative = np.array([s.is_negative for s in segments], dtype=bool)
            counts.removed += int(np.sum(~keep))
            counts.removed_negative += int(np.sum(~keep & negative))
            counts.negative_seen += int(np.sum(negative))
        return keep
    
    def refine(
        self,
        source: Sequence[Segment],
        target: Sequence[Segment],
        source_embeddings: Sequence[np.ndarray],
        target_embeddings: Sequence[np.ndarray],
        scorers: Sequence[LogitScorer],
        step: int = 0,
    ) -> List[np.ndarray]:
        """
        Per-modality keep-masks over the concatenated [source; target] batch
        
        Modality k only ever sees modality-k embeddings, scorer and agents.
        """
        masks = []
        for k in range(self.num_modalities):
            keep_source = self.refine_halfbatch(source, source_embeddings[k], Domain.SOURCE, k, scorers[k], step)
            keep_target = self.refine_halfbatch(target, target_embeddings[k], Domain.TARGET, k, scorers[k], step)
            masks.append(np.concatenate([keep_source, keep_target]))
        return masks
    
    def _rescore(self, pending: _PendingEpisodes, scorer: LogitScorer):
        tau = self.taus[pending.agent_id.domain]
        for transition in pending.transitions:
            transition.logit = float(scorer(transition.embedding.reshape(1, -1))[0])
            transition.relevance = relevance_from_logit(transition.logit, pending.agent_id.domain)
            transition.reward = reward_from_relevance(transition.relevance, tau)
    
    def _dump_rows(self, pending: _PendingEpisodes) -> List[MaskDumpRow]:
        agent_id = pending.agent_id
        by_segment = {t.segment_id: t for t in pending.transitions}
        rows = []
        for segment, logit, kept in zip(pending.segments, pending.logits, pending.keep):
            transition = by_segment.get(segment.id)
            if transition is not None:
                relevance, reward = transition.relevance, transition.reward
            else:
                relevance, reward = relevance_from_logit(float(logit), agent_id.domain), float("nan")
            rows.append((pending.step, agent_id.modality, agent_id.domain.value, segment.id, int(not kept), relevance, reward))
        return rows
    
    def update_agents(self, scorers: Optional[Sequence[LogitScorer]] = None) -> AgentUpdateReport:
        """
        Finish the pending episodes of this step and run one DQN update per agent
        
        Args:
            scorers: Current discriminators, needed for after-update rescoring
        """
        if self.reward_timing == "after_update" and scorers is None:
            raise ConfigError("after_update reward timing needs the updated discriminators")
        
        report = AgentUpdateReport()
        rewards: Dict[AgentId, List[float]] = {}
        for pending in self._pending:
            scorer = None if scorers is None else scorers[pending.agent_id.modality]
            if self.reward_timing == "after_update":
                self._rescore(pending, scorer)
            rewards.setdefault(pending.agent_id, []).extend(t.reward for t in pending.transitions)
            if pending.logits is not None:
                report.dump_rows.extend(self._dump_rows(pending))
        self._pending = []
        
        for agent in self.registry:
            report.losses[agent.agent_id] = agent.update(self.dqn_batch_size, self.gamma, self._rngs[agent.agent_id])
        report.mean_rewards = {agent_id: float(np.mean(values)) for agent_id, values in rewards.items() if values}
        logger.debug(f"Agent update: L_dqn={report.total_loss:.6f}")
        return report
    
    def selection_summary(self) -> Dict[AgentId, SelectionCounts]:
        return dict(self.counts)
    
    def reset_counts(self):
        self.counts = {agent_id: SelectionCounts() for agent_id in self.registry.ids()}
