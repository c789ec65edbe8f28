import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from diffcore import stable_sigmoid
from errors import ConfigError, EpisodeStateError
from refinedqn import (
    AgentId,
    AgentState,
    CandidateSet,
    DQNAgent,
    InstanceRefiner,
    RandomAgent,
    ReplayBuffer,
    Transition,
    build_registry,
    dqn_update,
    epsilon_greedy,
    partition_batch,
    relevance_from_logit,
    reward_from_logit,
    reward_from_relevance,
    run_episode,
    td_target,
    total_dqn_loss,
)
from synthdomains import Domain, Segment


# chi-square critical value, 4 degrees of freedom, p = 0.01
CHI2_CRIT_DF4 = 13.277


def make_segments(n, domain=Domain.SOURCE, first_id=0, negative_every=0):
    return [
        Segment(
            id=first_id + i,
            features=(np.zeros(2),),
            domain=domain,
            is_negative=bool(negative_every and i % negative_every == 0),
        )
        for i in range(n)
    ]


def linear_scorer(weights):
    return lambda embeddings: np.asarray(embeddings) @ weights


def dummy_transition(i, terminal=True):
    state = AgentState(matrix=np.zeros((2, 3)), removed=frozenset())
    return Transition(state=state, action=i % 3, reward=1.0, next_state=state, terminal=terminal, segment_id=i)


class TestPartition:
    """Test cases for partition_batch"""
    
    def test_forty_by_five(self):
        sets = partition_batch(make_segments(40), 5)
        assert len(sets) == 8
        assert all(s.size == 5 for s in sets)
    
    def test_single_set(self):
        segments = make_segments(5)
        sets = partition_batch(segments, 5)
        assert len(sets) == 1
        assert [s.id for s in sets[0].members] == [s.id for s in segments]
    
    @given(num_sets=st.integers(1, 12), num_candidates=st.integers(1, 7), seed=st.integers(0, 2**16))
    @settings(max_examples=40, deadline=None)
    def test_partition_covers_batch(self, num_sets, num_candidates, seed):
        """Test the union of members is the half-batch with no duplicates"""
        segments = make_segments(num_sets * num_candidates)
        sets = partition_batch(segments, num_candidates, np.random.default_rng(seed))
        ids = [m.id for s in sets for m in s.members]
        assert sorted(ids) == [s.id for s in segments]
        positions = np.concatenate([s.positions for s in sets])
        assert sorted(positions.tolist()) == list(range(len(segments)))
    
    def test_indivisible(self):
        with pytest.raises(ConfigError):
            partition_batch(make_segments(42), 5)
    
    def test_embeddings_follow_members(self):
        embeddings = np.arange(20, dtype=np.float64).reshape(10, 2)
        for cset in partition_batch(make_segments(10), 5, np.random.default_rng(3), embeddings):
            assert np.array_equal(cset.embeddings, embeddings[cset.positions])


class TestCandidateSet:
    """Test cases for CandidateSet and AgentState"""
    
    def _cset(self):
        embeddings = np.arange(1, 16, dtype=np.float64).reshape(5, 3)
        return CandidateSet(members=make_segments(5), positions=np.arange(5), embeddings=embeddings)
    
    def test_state_shape_constant(self):
        cset = self._cset()
        before = cset.state()
        cset.remove(2)
        after = cset.state()
        assert before.matrix.shape == after.matrix.shape == (3, 5)
    
    def test_removed_columns_zeroed(self):
        cset = self._cset()
        cset.remove(1)
        cset.remove(4)
        state = cset.state()
        zero_columns = {n for n in range(5) if not np.any(state.matrix[:, n])}
        assert zero_columns == {1, 4}
        assert list(state.valid_mask()) == [True, False, True, True, False]
    
    def test_remove_twice(self):
        cset = self._cset()
        cset.remove(0)
        with pytest.raises(EpisodeStateError):
            cset.remove(0)
    
    def test_remove_out_of_range(self):
        with pytest.raises(EpisodeStateError):
            self._cset().remove(5)


class TestSelectAction:
    """Test cases for epsilon-greedy action selection"""
    
    def test_greedy_argmax(self):
        q = np.array([0.1, 0.9, 0.3, 0.2, 0.0])
        assert epsilon_greedy(q, np.ones(5, dtype=bool), 0.0, np.random.default_rng(0)) == 1
    
    def test_ties_pick_lowest(self):
        assert epsilon_greedy(np.zeros(5), np.ones(5, dtype=bool), 0.0, np.random.default_rng(0)) == 0
    
    def test_removed_never_chosen(self):
        q = np.array([0.1, 0.9, 0.3, 0.2, 0.0])
        valid = np.array([True, False, True, True, True])
        rng = np.random.default_rng(1)
        assert epsilon_greedy(q, valid, 0.0, rng) == 2
        picks = {epsilon_greedy(q, valid, 1.0, rng) for _ in range(200)}
        assert picks == {0, 2, 3, 4}
    
    def test_uniform_when_exploring(self):
        """Test epsilon 1 gives uniform actions by a chi-square check"""
        rng = np.random.default_rng(2024)
        q = np.array([5.0, 0.0, 0.0, 0.0, 0.0])
        draws = [epsilon_greedy(q, np.ones(5, dtype=bool), 1.0, rng) for _ in range(10_000)]
        observed = np.bincount(draws, minlength=5)
        expected = 10_000 / 5
        chi2 = float(np.sum((observed - expected) ** 2 / expected))
        assert chi2 < CHI2_CRIT_DF4
    
    def test_all_removed(self):
        with pytest.raises(EpisodeStateError):
            epsilon_greedy(np.zeros(3), np.zeros(3, dtype=bool), 0.5, np.random.default_rng(0))


class TestReward:
    """Test cases for relevance and the thresholded reward"""
    
    def test_relevance_examples(self):
        assert relevance_from_logit(0.0, Domain.SOURCE) == 0.5
        assert relevance_from_logit(0.0, Domain.TARGET) == 0.5
        assert relevance_from_logit(4.0, Domain.TARGET) == pytest.approx(0.018, abs=5e-4)
    
    def test_reward_examples(self):
        assert reward_from_relevance(0.3, 0.5) == 1.0
        assert reward_from_relevance(0.5, 0.5) == -1.0
        assert reward_from_relevance(0.9, 0.5) == -1.0
    
    def test_reward_oracle(self):
        """Test 1000 random (logit, domain, tau) triples against a direct evaluation"""
        rng = np.random.default_rng(7)
        for _ in range(1000):
            logit = float(rng.normal(0.0, 6.0))
            domain = Domain.SOURCE if rng.random() < 0.5 else Domain.TARGET
            tau = float(rng.random())
            if logit >= 0:
                sigma = 1.0 / (1.0 + math.exp(-logit))
            else:
                sigma = math.exp(logit) / (1.0 + math.exp(logit))
            delta = sigma if domain == Domain.SOURCE else 1.0 - sigma
            expected = 1.0 if delta < tau else -1.0
            assert reward_from_logit(logit, domain, tau) == expected
    
    def test_extreme_logits_finite(self):
        values = stable_sigmoid(np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(values))
        assert relevance_from_logit(1000.0, Domain.TARGET) == 0.0


class TestRunEpisode:
    """Test cases for refinement episodes"""
    
    def _cset(self, n, rng):
        return CandidateSet(members=make_segments(n), positions=np.arange(n), embeddings=rng.normal(size=(n, 3)))
    
    @pytest.mark.parametrize("num_candidates,terminal_steps", [(5, 1), (5, 2), (6, 3)])
    def test_episode_mechanics(self, num_candidates, terminal_steps):
        """Test removals, terminal flags and state chaining over 100 seeded episodes"""
        agent = RandomAgent(AgentId(Domain.SOURCE, 0), num_candidates)
        scorer = linear_scorer(np.array([1.0, -0.5, 0.2]))
        for seed in range(100):
            rng = np.random.default_rng(seed)
            cset, transitions = run_episode(
                agent, self._cset(num_candidates, rng), terminal_steps, 0.5, rng, scorer, Domain.SOURCE, 0.5
            )
            assert len(cset.removed) == terminal_steps
            assert len(transitions) == terminal_steps
            assert [t.terminal for t in transitions] == [False] * (terminal_steps - 1) + [True]
            for first, second in zip(transitions, transitions[1:]):
                assert np.array_equal(first.next_state.matrix, second.state.matrix)
            assert {t.action for t in transitions} == cset.removed
        assert len(agent.replay) == min(100 * terminal_steps, agent.replay.capacity)
    
    def test_zero_steps(self):
        agent = RandomAgent(AgentId(Domain.TARGET, 0), 5)
        rng = np.random.default_rng(0)
        cset, transitions = run_episode(agent, self._cset(5, rng), 0, 0.5, rng, linear_scorer(np.ones(3)), Domain.TARGET, 0.5)
        assert transitions == []
        assert cset.removed == set()
    
    def test_too_many_steps(self):
        agent = RandomAgent(AgentId(Domain.SOURCE, 0), 5)
        rng = np.random.default_rng(0)
        with pytest.raises(ConfigError):
            run_episode(agent, self._cset(5, rng), 5, 0.5, rng, linear_scorer(np.ones(3)), Domain.SOURCE, 0.5)
    
    def test_reward_matches_snapshot(self):
        """Test every stored reward is reproduced from its stored embedding"""
        agent = RandomAgent(AgentId(Domain.TARGET, 0), 5)
        scorer = linear_scorer(np.array([2.0, -1.0, 0.5]))
        rng = np.random.default_rng(11)
        for _ in range(50):
            run_episode(agent, self._cset(5, rng), 2, 0.5, rng, scorer, Domain.TARGET, 0.5)
        for t in agent.replay:
            assert t.logit == float(scorer(t.embedding.reshape(1, -1))[0])
            assert t.reward == reward_from_logit(t.logit, Domain.TARGET, 0.5)


class StubQNetwork:
    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
    
    def q_values(self, state):
        return self.values


class TestTdTarget:
    """Test cases for td_target"""
    
    def _transition(self, reward, terminal):
        state = AgentState(matrix=np.zeros((2, 3)), removed=frozenset())
        next_state = AgentState(matrix=np.zeros((2, 3)), removed=frozenset({0}))
        return Transition(state=state, action=0, reward=reward, next_state=next_state, terminal=terminal)
    
    def test_terminal(self):
        assert td_target(self._transition(1.0, True), 0.9, StubQNetwork([3.0, 3.0, 3.0])) == 1.0
    
    def test_bootstrap_skips_removed(self):
        """Test -1 + 0.9 * 0.5 with the removed member's larger value masked out"""
        y = td_target(self._transition(-1.0, False), 0.9, StubQNetwork([0.9, 0.5, 0.2]))
        assert y == pytest.approx(-0.55)
    
    def test_myopic(self):
        assert td_target(self._transition(-1.0, False), 0.0, StubQNetwork([5.0, 5.0, 5.0])) == -1.0
    
    def test_gamma_out_of_range(self):
        with pytest.raises(ConfigError):
            td_target(self._transition(1.0, True), 1.5, StubQNetwork([0.0, 0.0, 0.0]))


class TestReplayBuffer:
    """Test cases for ReplayBuffer"""
    
    def test_fifo_eviction(self):
        buffer = ReplayBuffer(capacity=10)
        for i in range(13):
            buffer.push(dummy_transition(i))
        assert len(buffer) == 10
        assert [t.segment_id for t in buffer] == list(range(3, 13))
    
    def test_sample_distinct(self):
        buffer = ReplayBuffer(capacity=50)
        buffer.extend([dummy_transition(i) for i in range(20)])
        sample = buffer.sample(32, np.random.default_rng(0))
        assert len(sample) == 20
        assert len({t.segment_id for t in sample}) == 20
    
    def test_sample_empty(self):
        assert ReplayBuffer(5).sample(4, np.random.default_rng(0)) == []
    
    def test_bad_capacity(self):
        with pytest.raises(ConfigError):
            ReplayBuffer(0)


class TestDqnUpdate:
    """Test cases for dqn_update and DQNAgent"""
    
    def _agent(self, seed=0):
        return DQNAgent(AgentId(Domain.SOURCE, 0), embed_dim=2, num_candidates=3, rng=np.random.default_rng(seed), hidden_dim=8, lr=0.01)
    
    def test_empty_minibatch(self):
        agent = self._agent()
        assert dqn_update(agent.qnet, agent.optimizer, [], 0.9) is None
        assert agent.update(32, 0.9, np.random.default_rng(0)) is None
    
    def test_loss_decreases(self):
        """Test repeated updates on a fixed minibatch reduce L_q"""
        agent = self._agent()
        rng = np.random.default_rng(5)
        batch = []
        for i in range(12):
            state = AgentState(matrix=rng.normal(size=(2, 3)), removed=frozenset())
            batch.append(Transition(state=state, action=i % 3, reward=1.0 if i % 3 == 0 else -1.0, next_state=state, terminal=True))
        first = dqn_update(agent.qnet, agent.optimizer, batch, 0.9)
        for _ in range(100):
            last = dqn_update(agent.qnet, agent.optimizer, batch, 0.9)
        assert last < first
    
    def test_lr_override(self):
        agent = self._agent()
        dqn_update(agent.qnet, agent.optimizer, [dummy_transition(0)], 0.9, lr=0.123)
        assert agent.optimizer.lr == 0.123
    
    def test_total_loss_skips_none(self):
        a, b = AgentId(Domain.SOURCE, 0), AgentId(Domain.TARGET, 0)
        assert total_dqn_loss({a: 0.25, b: None}) == 0.25


class TestRegistry:
    """Test cases for build_registry"""
    
    def test_all_agents(self):
        registry = build_registry(2, embed_dim=4, num_candidates=5, seed=0, hidden_dim=8)
        assert len(registry) == 4
        assert [a.agent_id.label for a in registry] == ["S0", "S1", "T0", "T1"]
    
    def test_toggle_keeps_other_weights(self):
        """Test disabling one agent leaves the others' initial weights unchanged"""
        full = build_registry(2, embed_dim=4, num_candidates=5, seed=3, hidden_dim=8)
        partial = build_registry(2, 4, 5, 3, enabled=[AgentId(Domain.TARGET, 1)], hidden_dim=8)
        assert len(partial) == 1
        kept = partial.get(AgentId(Domain.TARGET, 1))
        reference = full.get(AgentId(Domain.TARGET, 1))
        for p, q in zip(kept.qnet.parameters(), reference.qnet.parameters()):
            assert np.array_equal(p.data, q.data)
    
    def test_random_kind(self):
        registry = build_registry(1, 4, 5, 0, kind="random")
        assert all(isinstance(a, RandomAgent) for a in registry)
    
    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            build_registry(1, 4, 5, 0, kind="greedy")
    
    def test_unknown_id(self):
        with pytest.raises(ConfigError):
            build_registry(1, 4, 5, 0, enabled=[AgentId(Domain.SOURCE, 3)])


class TestInstanceRefiner:
    """Test cases for InstanceRefiner"""
    
    def _inputs(self, seed=0, dim=4):
        rng = np.random.default_rng(seed)
        source = make_segments(40, Domain.SOURCE, 0, negative_every=5)
        target = make_segments(40, Domain.TARGET, 40, negative_every=5)
        src_emb = [rng.normal(size=(40, dim)) for _ in range(2)]
        tgt_emb = [rng.normal(size=(40, dim)) for _ in range(2)]
        scorers = [linear_scorer(rng.normal(size=dim)) for _ in range(2)]
        return source, target, src_emb, tgt_emb, scorers
    
    def _refiner(self, seed=0, **kwargs):
        registry = build_registry(2, embed_dim=4, num_candidates=5, seed=seed, hidden_dim=8)
        return InstanceRefiner(registry, 2, seed=seed, **kwargs)
    
    def test_refined_sizes(self):
        """Test 40 segments per domain keep 32 in every modality"""
        source, target, src_emb, tgt_emb, scorers = self._inputs()
        masks = self._refiner().refine(source, target, src_emb, tgt_emb, scorers)
        assert len(masks) == 2
        for mask in masks:
            assert mask.shape == (80,)
            assert mask[:40].sum() == 32
            assert mask[40:].sum() == 32
    
    def test_modalities_independent(self):
        """Test perturbing modality 1 leaves the modality 0 mask unchanged"""
        source, target, src_emb, tgt_emb, scorers = self._inputs()
        masks = self._refiner(seed=4).refine(source, target, src_emb, tgt_emb, scorers)
        
        perturbed_src = [src_emb[0], src_emb[1] + 3.0]
        perturbed_tgt = [tgt_emb[0], -tgt_emb[1]]
        perturbed_scorers = [scorers[0], linear_scorer(np.ones(4))]
        other = self._refiner(seed=4).refine(source, target, perturbed_src, perturbed_tgt, perturbed_scorers)
        assert np.array_equal(masks[0], other[0])
    
    def test_absent_agent_keeps_all(self):
        source, target, src_emb, tgt_emb, scorers = self._inputs()
        registry = build_registry(2, 4, 5, 0, enabled=[AgentId(Domain.SOURCE, 0)], hidden_dim=8)
        masks = InstanceRefiner(registry, 2).refine(source, target, src_emb, tgt_emb, scorers)
        assert masks[0][:40].sum() == 32
        assert masks[0][40:].all()
        assert masks[1].all()
    
    def test_update_agents(self):
        source, target, src_emb, tgt_emb, scorers = self._inputs()
        refiner = self._refiner(record_masks=True)
        refiner.refine(source, target, src_emb, tgt_emb, scorers, step=3)
        report = refiner.update_agents(scorers)
        assert set(report.losses) == set(refiner.registry.ids())
        assert all(loss is not None for loss in report.losses.values())
        assert len(report.dump_rows) == 4 * 40
        assert sum(row[4] for row in report.dump_rows) == 4 * 8
        assert {row[0] for row in report.dump_rows} == {3}
        assert all(math.isnan(row[6]) for row in report.dump_rows if row[4] == 0)
    
    def test_after_update_needs_scorers(self):
        refiner = self._refiner(reward_timing="after_update")
        with pytest.raises(ConfigError):
            refiner.update_agents()
    
    def test_after_update_rescores(self):
        """Test after-update timing recomputes rewards with the new discriminator"""
        source, target, src_emb, tgt_emb, scorers = self._inputs()
        refiner = self._refiner(reward_timing="after_update")
        refiner.refine(source, target, src_emb, tgt_emb, scorers)
        flipped = [linear_scorer(np.full(4, 50.0)), linear_scorer(np.full(4, 50.0))]
        refiner.update_agents(flipped)
        for agent in refiner.registry:
            for t in agent.replay:
                assert t.logit == float(flipped[agent.agent_id.modality](t.embedding.reshape(1, -1))[0])
                assert t.reward == reward_from_logit(t.logit, agent.agent_id.domain, 0.5)
    
    def test_selection_counts(self):
        source, target, src_emb, tgt_emb, scorers = self._inputs()
        refiner = self._refiner()
        refiner.refine(source, target, src_emb, tgt_emb, scorers)
        for counts in refiner.selection_summary().values():
            assert counts.removed == 8
            assert counts.negative_seen == 8
            assert 0.0 <= counts.precision <= 1.0
        refiner.reset_counts()
        assert all(c.removed == 0 for c in refiner.selection_summary().values())
    
    def test_epsilon_schedule(self):
        refiner = self._refiner(epsilon=0.5, epsilon_final=0.1, decay_steps=10)
        assert refiner.epsilon_at(0) == 0.5
        assert refiner.epsilon_at(5) == pytest.approx(0.3)
        assert refiner.epsilon_at(50) == pytest.approx(0.1)
        assert self._refiner().epsilon_at(1000) == 0.5
    
    def test_bad_terminal_steps(self):
        with pytest.raises(ConfigError):
            self._refiner(terminal_steps=5)
