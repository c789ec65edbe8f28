"""
Episode mechanics: action selection, refinement episodes, TD targets, DQN steps
"""
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np

from diffcore import Tape, Tensor, gather, mean_squared_error, no_tape
from errors import ConfigError, EpisodeStateError
from refinedqn.candidates import AgentState, CandidateSet
from refinedqn.qnetwork import QNetwork
from refinedqn.replay import Transition
from refinedqn.reward import LogitScorer, relevance_from_logit, reward_from_relevance
from synthdomains import Domain
from utils.logger import get_logger

if TYPE_CHECKING:
    from refinedqn.agents.base import SelectionAgent

logger = get_logger()


def greedy_action(q_values: np.ndarray, valid: np.ndarray) -> int:
    """Argmax over valid actions; ties go to the lowest index"""
    if not np.any(valid):
        raise EpisodeStateError("no valid action left")
    masked = np.where(valid, q_values, -np.inf)
    return int(np.argmax(masked))


def epsilon_greedy(q_values: np.ndarray, valid: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """
    Greedy when a uniform draw is >= epsilon, otherwise a uniform valid action
    
    Raises:
        EpisodeStateError: every member is already removed
    """
    candidates = np.flatnonzero(valid)
    if candidates.size == 0:
        raise EpisodeStateError("all members removed, nothing to select")
    if rng.random() >= epsilon:
        return greedy_action(q_values, valid)
    return int(rng.choice(candidates))


def select_action(agent: "SelectionAgent", state: AgentState, epsilon: float, rng: np.random.Generator) -> int:
    return agent.select_action(state, epsilon, rng)


def run_episode(
    agent: "SelectionAgent",
    cset: CandidateSet,
    terminal_steps: int,
    epsilon: float,
    rng: np.random.Generator,
    scorer: LogitScorer,
    domain: Domain,
    tau: float,
) -> Tuple[CandidateSet, List[Transition]]:
    """
    Remove ``terminal_steps`` members from ``cset`` one action at a time
    
    Each removal is rewarded from the removed member's embedding; the
    transitions are also pushed into the agent's replay buffer.
    
    Args:
        agent: Agent choosing the removals
        cset: Candidate set with embeddings; modified in place
        terminal_steps: E, number of removals (E < N_c)
        epsilon: Exploration probability
        rng: Random stream of this agent
        scorer: Discriminator logits for embeddings
        domain: Domain of the members
        tau: Relevance threshold for this domain
        
    Raises:
        ConfigError: E >= N_c
    """
    if terminal_steps >= cset.size or terminal_steps < 0:
        raise ConfigError(f"terminal step count {terminal_steps} must be in [0, {cset.size})")
    
    transitions: List[Transition] = []
    state = cset.state()
    for e in range(1, terminal_steps + 1):
        action = agent.select_action(state, epsilon, rng)
        cset.remove(action)
        next_state = cset.state()
        
        embedding = cset.embeddings[action].copy()
        logit = float(scorer(embedding.reshape(1, -1))[0])
        delta = relevance_from_logit(logit, domain)
        transitions.append(Transition(
            state=state,
            action=action,
            reward=reward_from_relevance(delta, tau),
            next_state=next_state,
            terminal=(e == terminal_steps),
            segment_id=cset.members[action].id,
            embedding=embedding,
            logit=logit,
            relevance=delta,
        ))
        state = next_state
    
    agent.replay.extend(transitions)
    return cset, transitions


def td_target(transition: Transition, gamma: float, qnet: QNetwork) -> float:
    """
    r for terminal transitions, r + gamma * max over valid Q(next_state) otherwise
    """
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    if transition.terminal or gamma == 0.0:
        return float(transition.reward)
    q_next = qnet.q_values(transition.next_state)
    best = q_next[greedy_action(q_next, transition.next_state.valid_mask())]
    return float(transition.reward + gamma * best)


def dqn_update(
    qnet: QNetwork,
    optimizer,
    minibatch: Sequence[Transition],
    gamma: float,
    lr: Optional[float] = None,
) -> Optional[float]:
    """
    One Adam step on mean (y - Q(S, a))^2 with y held constant
    
    Returns:
        L_q, or None when the minibatch is empty
    """
    if not minibatch:
        logger.warning("DQN update skipped: replay buffer is empty")
        return None
    if lr is not None:
        optimizer.set_lr(lr)
    
    with no_tape():
        targets = np.array([td_target(t, gamma, qnet) for t in minibatch])
    states = np.stack([t.state.flat() for t in minibatch])
    actions = [t.action for t in minibatch]
    
    optimizer.zero_grad()
    with Tape() as tape:
        predicted = gather(qnet(Tensor.wrap(states)), actions)
        loss = mean_squared_error(predicted, targets)
    tape.backward(loss)
    optimizer.step()
    return loss.item()
