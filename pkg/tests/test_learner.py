import numpy as np
import pytest
from scipy import stats

from searchtrack.config import LearnerSchedule
from searchtrack.featurizer import TileCoder
from searchtrack.learner import QFunction, decay, q_value, select_action, td_update

SMALL = TileCoder(np.array([1.0]), num_tilings=64, hash_table_size=4096)


def fresh(num_actions=9, coder=SMALL):
    return QFunction(coder, num_actions)


def distinct_tiles(rng, size=4096, k=64):
    return rng.choice(size, k, replace=False).astype(np.int64)


class TestQValue:
    def test_zero_init(self):
        qf = fresh()
        tiles = SMALL.tiles(np.array([0.3]))
        assert all(q_value(qf, tiles, a) == 0 for a in range(9))

    def test_single_weight(self):
        qf = fresh()
        tiles = distinct_tiles(np.random.default_rng(0))
        qf.weights[tiles[5], 2] = 0.5
        assert q_value(qf, tiles, 2) == 0.5

    def test_linear_sum(self):
        qf = fresh()
        tiles = distinct_tiles(np.random.default_rng(1))
        qf.weights[tiles, 4] = 0.1
        assert q_value(qf, tiles, 4) == pytest.approx(6.4)

    def test_unknown_action(self):
        with pytest.raises(IndexError):
            q_value(fresh(), np.arange(64), 9)


class TestSelect:
    def test_greedy_picks_strict_max(self):
        qf = fresh()
        tiles = distinct_tiles(np.random.default_rng(2))
        qf.weights[tiles[0], 6] = 1.0
        rng = np.random.default_rng(0)
        assert {select_action(qf, tiles, np.arange(9), 0.0, rng) for _ in range(200)} == {6}

    def test_masked_best_never_returned(self):
        qf = fresh()
        tiles = distinct_tiles(np.random.default_rng(3))
        qf.weights[tiles[0], 6] = 1.0
        rng = np.random.default_rng(0)
        adm = np.array([0, 1, 2])
        for eps in (0.0, 0.5, 1.0):
            assert {select_action(qf, tiles, adm, eps, rng) for _ in range(300)} <= {0, 1, 2}

    @pytest.mark.parametrize("epsilon", [1.0, 0.0])
    def test_uniform_when_exploring_or_tied(self, epsilon):
        # epsilon = 1 explores; epsilon = 0 on a fresh table is an all-way tie
        qf = fresh()
        tiles = distinct_tiles(np.random.default_rng(4))
        if epsilon == 1.0:
            qf.weights[tiles[0], 0] = 5.0
        adm = np.array([0, 2, 3, 5, 8])
        rng = np.random.default_rng(11)
        draws = np.array([select_action(qf, tiles, adm, epsilon, rng) for _ in range(100_000)])
        counts = np.array([(draws == a).sum() for a in adm])
        assert counts.sum() == 100_000
        _, p = stats.chisquare(counts)
        assert p > 1e-3
        sigma = np.sqrt(100_000 * (1 / 5) * (4 / 5))
        assert np.all(np.abs(counts - 20_000) < 3 * sigma)

    def test_empty_admissible(self):
        with pytest.raises(ValueError):
            select_action(fresh(), np.arange(64), [], 0.1, np.random.default_rng())


class TestTDUpdate:
    def test_direct_substitution(self):
        qf = fresh()
        rng = np.random.default_rng(5)
        s, s2 = distinct_tiles(rng), distinct_tiles(rng)
        s2 = np.setdiff1d(s2, s)[:1].repeat(64)  # s' disjoint from s
        qf.weights[s2[0], 3] = 2.0 / 64
        td_update(qf, s, 1, 1.0, s2, np.arange(9), 0.2, 0.9)
        assert q_value(qf, s, 1) == pytest.approx(0.56)

    def test_zero_error_no_change(self):
        qf = fresh()
        s = distinct_tiles(np.random.default_rng(6))
        before = qf.weights.copy()
        delta = td_update(qf, s, 0, 0.0, s, np.arange(9), 0.2, 0.9)
        assert delta == 0 and np.array_equal(before, qf.weights)

    def test_geometric_approach(self):
        qf = fresh()
        s = distinct_tiles(np.random.default_rng(7))
        td_update(qf, s, 0, 1.0, s, np.arange(9), 0.2, 0.0)
        assert q_value(qf, s, 0) == pytest.approx(0.2)
        td_update(qf, s, 0, 1.0, s, np.arange(9), 0.2, 0.0)
        assert q_value(qf, s, 0) == pytest.approx(0.36)

    def test_bootstrap_uses_admissible_max_only(self):
        qf = fresh()
        rng = np.random.default_rng(8)
        s = distinct_tiles(rng)
        s2 = np.setdiff1d(np.arange(4096), s)[:64]
        qf.weights[s2, 7] = 1.0  # Q(s', 7) = 64 but action 7 is masked
        qf.weights[s2, 1] = 0.5 / 64
        td_update(qf, s, 0, 0.0, s2, np.array([0, 1]), 1.0, 0.5)
        assert q_value(qf, s, 0) == pytest.approx(0.25)

    def test_only_owning_table_changes(self):
        a, b = fresh(), fresh()
        s = distinct_tiles(np.random.default_rng(9))
        td_update(a, s, 0, 1.0, s, np.arange(9), 0.2, 0.9)
        assert np.any(a.weights != 0) and not np.any(b.weights)


class TestDecay:
    def test_one_episode(self):
        assert decay(LearnerSchedule()).alpha == pytest.approx(0.199994)

    def test_closed_form_after_many_episodes(self):
        sched = LearnerSchedule()
        for _ in range(100_000):
            sched = decay(sched)
        assert sched.alpha == pytest.approx(0.2 * 0.99997**100_000, rel=1e-9)
        assert sched.alpha == pytest.approx(0.00996, abs=5e-5)
        assert sched.epsilon == pytest.approx(0.01494, abs=5e-5)
        assert sched.gamma == 0.9
