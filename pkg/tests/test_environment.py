import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searchtrack.config import ConfigError, WorldConfig
from searchtrack.environment import (
    AgentState,
    TargetState,
    admissible_actions,
    apply_action,
    detect,
    detection_matrix,
    enumerate_action_set,
    make_target,
    spawn_episode,
    step_target,
)

DEFAULT = WorldConfig()
ACTIONS = enumerate_action_set(DEFAULT.radial_steps, DEFAULT.num_angles)


def as_set(arr):
    return {tuple(map(float, r)) for r in np.asarray(arr).reshape(-1, 2)}


class TestActionSet:
    def test_default_nine_actions(self):
        expected = {(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1), (3, 0), (0, 3), (-3, 0), (0, -3)}
        assert len(ACTIONS) == 9
        assert as_set(ACTIONS) == {tuple(map(float, e)) for e in expected}

    def test_zero_radius_collapses(self):
        assert as_set(enumerate_action_set([0], 4)) == {(0.0, 0.0)}

    def test_two_angles_wraparound_removed(self):
        assert as_set(enumerate_action_set([2], 2)) == {(2.0, 0.0), (-2.0, 0.0)}

    def test_closed_under_quarter_turn(self):
        rot = ACTIONS @ np.array([[0, 1], [-1, 0]])
        assert as_set(rot) == as_set(ACTIONS)

    def test_empty_steps_rejected(self):
        with pytest.raises(ConfigError):
            enumerate_action_set([], 4)

    def test_components_snapped(self):
        acts = enumerate_action_set([1, 3], 4)
        assert np.all(acts == np.round(acts))


class TestAdmissible:
    @pytest.mark.parametrize(
        "pos, expected",
        [
            ((25, 25), as_set(ACTIONS)),
            ((0, 25), as_set(ACTIONS) - {(-1.0, 0.0), (-3.0, 0.0)}),
            ((0, 0), {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (3.0, 0.0), (0.0, 3.0)}),
        ],
    )
    def test_examples(self, pos, expected):
        idx = admissible_actions(AgentState(np.array(pos, float)), ACTIONS, DEFAULT)
        assert as_set(ACTIONS[idx]) == expected

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_admissible_walks_stay_inside(self, seed):
        rng = np.random.default_rng(seed)
        agent = AgentState(np.array(DEFAULT.center))
        for _ in range(200):
            idx = admissible_actions(agent, ACTIONS, DEFAULT)
            assert len(idx) >= 1
            agent = apply_action(agent, ACTIONS[rng.choice(idx)], DEFAULT)
            assert 0 <= agent.pos[0] <= 50 and 0 <= agent.pos[1] <= 50


class TestApplyAction:
    @pytest.mark.parametrize(
        "pos, disp, out",
        [((25, 25), (3, 0), (28, 25)), ((25, 25), (0, 0), (25, 25)), ((1, 1), (0, -1), (1, 0))],
    )
    def test_examples(self, pos, disp, out):
        new = apply_action(AgentState(np.array(pos, float)), np.array(disp, float))
        np.testing.assert_array_equal(new.pos, out)

    def test_out_of_bounds_is_contract_violation(self):
        with pytest.raises(ValueError):
            apply_action(AgentState(np.array([0.0, 0.0])), np.array([-1.0, 0.0]))


class TestSpawn:
    def test_agents_start_at_center(self):
        agents, _ = spawn_episode(WorldConfig(num_agents=4), 3)
        assert len(agents) == 4
        for a in agents:
            np.testing.assert_array_equal(a.pos, [25, 25])

    def test_targets_on_their_edges_heading_to_poi(self):
        for seed in range(50):
            _, targets = spawn_episode(DEFAULT, seed)
            t1, t2 = targets
            assert t1.pos[0] == 0 and 0 <= t1.pos[1] <= 50
            assert t2.pos[0] == 50 and 0 <= t2.pos[1] <= 50
            for t in targets:
                assert 20 <= t.poi[0] <= 30 and 20 <= t.poi[1] <= 30
                assert np.hypot(*t.vel) == pytest.approx(1.0)
                d = (t.poi - t.pos) / np.linalg.norm(t.poi - t.pos)
                np.testing.assert_allclose(t.vel, d)

    def test_same_seed_identical(self):
        a1, t1 = spawn_episode(DEFAULT, 1234)
        a2, t2 = spawn_episode(DEFAULT, 1234)
        for x, y in zip(t1, t2):
            assert x.pos.tobytes() == y.pos.tobytes()
            assert x.vel.tobytes() == y.vel.tobytes()
            assert x.poi.tobytes() == y.poi.tobytes()

    def test_scenario_velocity(self):
        # spawn (0, 47) heading to POI (21, 25): |(21, -22)| = 30.41
        t = make_target((0, 47), (21, 25), 1.0)
        np.testing.assert_allclose(t.vel, [21 / np.hypot(21, 22), -22 / np.hypot(21, 22)])
        np.testing.assert_allclose(t.vel, [0.690, -0.723], atol=1e-3)

    def test_horizontal_velocity(self):
        t = make_target((0, 25), (25, 25), 1.0)
        np.testing.assert_allclose(t.vel, [1.0, 0.0])

    def test_perimeter_edges(self):
        cfg = WorldConfig(target_spawn_edges=("perimeter",), num_targets=5)
        _, targets = spawn_episode(cfg, 0)
        for t in targets:
            x, y = t.pos
            assert min(x, y, 50 - x, 50 - y) == pytest.approx(0.0)


class TestStepTarget:
    def test_scenario_first_step(self):
        t = TargetState(np.array([0.0, 47.0]), np.array([0.690, -0.723]), np.array([21.0, 25.0]))
        np.testing.assert_allclose(step_target(t, 1.0).pos, [0.690, 46.277])

    def test_arrived_target_is_absorbing(self):
        t = TargetState(np.array([21.0, 25.0]), np.zeros(2), np.array([21.0, 25.0]), True)
        assert np.array_equal(step_target(t).pos, [21, 25])

    def test_snap_to_poi(self):
        t = TargetState(np.array([24.5, 25.0]), np.array([1.0, 0.0]), np.array([25.0, 25.0]))
        s = step_target(t, 1.0)
        assert np.array_equal(s.pos, [25, 25]) and s.arrived and np.all(s.vel == 0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 50), st.floats(20, 30), st.floats(20, 30), st.sampled_from([0.0, 50.0]))
    def test_speed_constant_until_arrival(self, y, px, py, x):
        t = make_target((x, y), (px, py), 1.0)
        arrived_at = None
        for k in range(80):
            t = step_target(t)
            speed = np.hypot(*t.vel)
            assert 0 <= t.pos[0] <= 50 and 0 <= t.pos[1] <= 50
            if t.arrived:
                arrived_at = arrived_at or k
                assert speed == 0 and np.array_equal(t.pos, t.poi)
            else:
                assert speed == pytest.approx(1.0)
        assert arrived_at is not None


class TestDetect:
    @pytest.mark.parametrize(
        "agent, target, expected",
        [((25, 25), (25, 29), True), ((25, 25), (30, 25), True), ((0, 0), (50, 50), False)],
    )
    def test_examples(self, agent, target, expected):
        a = AgentState(np.array(agent, float))
        t = TargetState(np.array(target, float), np.zeros(2), np.zeros(2))
        assert detect(a, t, 5.0) is expected
        # symmetric in the two points
        a2 = AgentState(np.array(target, float))
        t2 = TargetState(np.array(agent, float), np.zeros(2), np.zeros(2))
        assert detect(a2, t2, 5.0) is expected

    def test_matrix_examples(self):
        tgt = [TargetState(np.array([25.0, 29.0]), np.zeros(2), np.zeros(2))]
        one = [AgentState(np.array([25.0, 25.0]))]
        two = one + [AgentState(np.array([0.0, 0.0]))]
        assert detection_matrix(one, tgt, 5.0).tolist() == [[True]]
        assert detection_matrix(two, tgt, 5.0).tolist() == [[True, False]]
        empty = detection_matrix(two, [], 5.0)
        assert empty.shape == (0, 2) and empty.dtype == bool
