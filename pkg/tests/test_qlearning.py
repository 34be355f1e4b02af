import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtdma.qlearning import (
    MacState,
    QLearningAgent,
    QTable,
    update_q,
    REWARD_DEFER,
    REWARD_DROP,
    REWARD_SUCCESS,
)
from qtdma.timebase import ScenarioConfig

CFG = ScenarioConfig()


def make_agent(**overrides) -> QLearningAgent:
    return QLearningAgent(node=0, cfg=ScenarioConfig(**overrides))


class TestUpdateQ:
    def test_first_success_from_zero(self):
        q = QTable.zeros(16)
        update_q(q, MacState.FRESH, 5, 10, MacState.TRANSMITTED, alpha=0.2, gamma=0.99)
        assert q.values[MacState.FRESH][5] == pytest.approx(2.0, abs=1e-12)

    def test_defer_after_success(self):
        q = QTable.zeros(16)
        q.values[MacState.FRESH][5] = 2.0
        q.values[MacState.DEFERRED][3] = 2.0
        update_q(q, MacState.FRESH, 5, -10, MacState.DEFERRED, alpha=0.2, gamma=0.99)
        # 2 + 0.2 * (-10 + 0.99 * 2 - 2)
        assert q.values[MacState.FRESH][5] == pytest.approx(-0.004, abs=1e-12)

    def test_full_overwrite_limit(self):
        q = QTable.zeros(16)
        q.values[MacState.FRESH][2] = 123.0
        update_q(q, MacState.FRESH, 2, -20, MacState.FRESH, alpha=1.0, gamma=0.0)
        assert q.values[MacState.FRESH][2] == -20.0

    @given(
        s=st.sampled_from(list(MacState)),
        a=st.integers(0, 15),
        s_next=st.sampled_from(list(MacState)),
        reward=st.floats(-30, 30),
        alpha=st.floats(0.01, 1.0),
        gamma=st.floats(0.01, 0.99),
        cells=st.lists(st.floats(-50, 50), min_size=48, max_size=48),
    )
    @settings(max_examples=300)
    def test_matches_scalar_recomputation(self, s, a, s_next, reward, alpha, gamma, cells):
        q = QTable([[cells[r * 16 + c] for c in range(16)] for r in range(3)])
        before = [row[:] for row in q.values]
        update_q(q, s, a, reward, s_next, alpha=alpha, gamma=gamma)
        # Independent scalar recomputation of the backup.
        best_next = before[s_next][0]
        for v in before[s_next][1:]:
            if v > best_next:
                best_next = v
        expected = before[s][a] + alpha * (reward + gamma * best_next - before[s][a])
        assert math.isclose(q.values[s][a], expected, rel_tol=0, abs_tol=1e-12)
        for r in range(3):
            for c in range(16):
                if (r, c) != (s, a):
                    assert q.values[r][c] == before[r][c]


class TestSelectAction:
    def test_pure_exploitation_picks_peak(self):
        agent = make_agent()
        agent.epsilon = 0.0
        agent.q.values[MacState.FRESH][9] = 5.0
        rng = random.Random(1)
        assert all(agent.select_action(rng) == 9 for _ in range(50))

    def test_full_exploration_is_uniform(self):
        agent = make_agent()
        agent.epsilon = 1.0
        rng = random.Random(2)
        counts = Counter(agent.select_action(rng) for _ in range(10_000))
        # Each slot expected 625 times; 3 sigma of Binomial(1e4, 1/16) ~ 73.
        for slot in range(16):
            assert abs(counts[slot] - 625) < 3 * math.sqrt(10_000 * (1 / 16) * (15 / 16))

    def test_zero_row_ties_broken_uniformly(self):
        agent = make_agent()
        agent.epsilon = 0.0
        rng = random.Random(3)
        counts = Counter(agent.select_action(rng) for _ in range(10_000))
        assert len(counts) == 16
        for slot in range(16):
            assert abs(counts[slot] - 625) < 3 * math.sqrt(10_000 * (1 / 16) * (15 / 16))

    def test_exploitation_returns_argmax_member(self):
        agent = make_agent()
        agent.epsilon = 0.0
        agent.q.values[MacState.FRESH] = [1.0, 7.0, 7.0] + [0.0] * 13
        rng = random.Random(4)
        picks = {agent.select_action(rng) for _ in range(200)}
        assert picks == {1, 2}


class TestDecayEpsilon:
    def test_single_step(self):
        agent = make_agent()
        agent.decay_epsilon()
        assert agent.epsilon == pytest.approx(0.99)

    def test_floor_holds(self):
        agent = make_agent()
        agent.epsilon = CFG.eps_min
        agent.decay_epsilon()
        assert agent.epsilon == CFG.eps_min

    def test_many_decays_clamp_at_floor(self):
        # 0.99^300 ~ 0.049 would undershoot the 0.05 floor without clamping.
        agent = make_agent()
        for _ in range(300):
            agent.decay_epsilon()
        assert agent.epsilon == CFG.eps_min

    def test_sequence_non_increasing_and_bounded(self):
        agent = make_agent()
        values = [agent.epsilon]
        for _ in range(500):
            agent.decay_epsilon()
            values.append(agent.epsilon)
        assert all(b <= a for a, b in zip(values, values[1:]))
        assert all(v >= CFG.eps_min for v in values)


class TestDetectConvergence:
    def _with_history(self, actions):
        agent = make_agent()
        agent.history.extend(actions)
        return agent

    def test_six_of_seven(self):
        assert self._with_history([9, 9, 9, 2, 9, 9, 9]).detect_convergence()

    def test_four_of_seven_insufficient(self):
        assert not self._with_history([9, 2, 9, 4, 9, 2, 9]).detect_convergence()

    def test_short_history(self):
        assert not self._with_history([9] * 6).detect_convergence()

    def test_counts_follow_most_recent_action(self):
        # Five nines but the latest pick is different: no lock on 9.
        assert not self._with_history([9, 9, 9, 9, 9, 2, 4]).detect_convergence()

    @given(st.lists(st.integers(0, 15), min_size=7, max_size=7))
    @settings(max_examples=300)
    def test_matches_brute_force_count(self, actions):
        agent = self._with_history(actions)
        expected = sum(1 for a in actions if a == actions[-1]) >= CFG.m_window - 2
        assert agent.detect_convergence() == expected


class TestSync:
    def test_join_emits_frame_and_sets_origin(self):
        agent = make_agent()
        frame = agent.join(37_000)
        assert frame.origin == 0 and frame.timestamp_us == 37_000
        assert agent.frame_origin_us == 37_000

    def test_double_join_rejected(self):
        agent = make_agent()
        agent.join(0)
        with pytest.raises(RuntimeError):
            agent.join(1)

    def test_receivers_adopt_newest_origin(self):
        a, b = make_agent(), make_agent()
        a.join(0)
        sync = b.join(10_000)
        a.handle_sync(sync)
        assert a.frame_origin_us == b.frame_origin_us == 10_000

    def test_redundant_sync_idempotent(self):
        a = make_agent()
        a.join(0)
        sync_b = QLearningAgent(node=1, cfg=CFG).join(10_000)
        a.handle_sync(sync_b)
        before = a.frame_origin_us
        a.handle_sync(sync_b)
        assert a.frame_origin_us == before


class TestStepOutcomes:
    def _primed(self):
        agent = make_agent()
        agent.join(0)
        rng = random.Random(5)
        agent.start_frame(1, 0, rng)
        return agent

    def test_idle_channel_success(self):
        agent = self._primed()
        decision = agent.observe_and_decide(busy=False, iteration=1)
        assert decision.transmit
        assert decision.reward == REWARD_SUCCESS
        assert agent.mac_state is MacState.TRANSMITTED
        assert agent.retries == 0

    def test_busy_defers_and_keeps_packet(self):
        agent = self._primed()
        packet = agent.head_packet
        decision = agent.observe_and_decide(busy=True, iteration=1)
        assert not decision.transmit
        assert decision.reward == REWARD_DEFER
        assert agent.mac_state is MacState.DEFERRED
        assert agent.retries == 1
        assert agent.head_packet is packet  # same data next frame

    def test_retry_exhaustion_drops_packet(self):
        agent = make_agent()
        agent.join(0)
        rng = random.Random(6)
        rewards = []
        for it in range(1, 7):
            agent.start_frame(it, (it - 1) * CFG.frame_period_us, rng)
            rewards.append(agent.observe_and_decide(busy=True, iteration=it).reward)
        # Five deferrals, then the sixth busy hits the retransmission cap.
        assert rewards == [REWARD_DEFER] * 5 + [REWARD_DROP]
        assert agent.mac_state is MacState.FRESH
        assert agent.retries == 0
        assert agent.head_packet is None
        assert agent.dropped_packets == 1

    def test_rewards_are_the_three_values_only(self):
        agent = make_agent()
        agent.join(0)
        rng = random.Random(7)
        for it in range(1, 40):
            agent.start_frame(it, (it - 1) * CFG.frame_period_us, rng)
            agent.observe_and_decide(busy=rng.random() < 0.5, iteration=it)
        assert {r for _, r in agent.rewards} <= {REWARD_SUCCESS, REWARD_DEFER, REWARD_DROP}
        assert agent.retries <= CFG.max_retransmissions

    def test_lock_requires_transmitted_streak(self):
        # Seven identical picks, all deferred: must NOT lock the slot.
        agent = make_agent()
        agent.join(0)
        agent.epsilon = 0.0
        agent.q.values[MacState.FRESH][4] = 50.0
        agent.q.values[MacState.DEFERRED][4] = 50.0
        rng = random.Random(8)
        for it in range(1, 9):
            agent.start_frame(it, (it - 1) * CFG.frame_period_us, rng)
            agent.observe_and_decide(busy=True, iteration=it)
        assert not agent.converged

    def test_lock_after_successful_streak(self):
        agent = make_agent()
        agent.join(0)
        agent.epsilon = 0.0
        agent.q.values[MacState.FRESH][4] = 50.0
        agent.q.values[MacState.TRANSMITTED][4] = 50.0
        rng = random.Random(9)
        for it in range(1, 9):
            agent.start_frame(it, (it - 1) * CFG.frame_period_us, rng)
            if agent.converged:
                break
            agent.observe_and_decide(busy=False, iteration=it)
        assert agent.converged
        assert agent.final_slot == 4
        # Locked: Q never written again, slot never changes, no more draws.
        frozen = [row[:] for row in agent.q.values]
        for it in range(9, 30):
            agent.start_frame(it, (it - 1) * CFG.frame_period_us, rng)
            decision = agent.observe_and_decide(busy=False, iteration=it)
            assert decision.transmit and decision.slot == 4
            assert decision.reward == REWARD_SUCCESS
        assert agent.q.values == frozen
        assert agent.final_slot == 4
