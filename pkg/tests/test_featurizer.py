from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searchtrack.config import CoderConfig
from searchtrack.environment import AgentState, TargetState, detection_matrix
from searchtrack.featurizer import OBS_DIM, TileCoder, active_tiles, build_observation, observation_widths

CODER = TileCoder.for_observations(CoderConfig())
# quarter-metre grid so translations are exact in floating point
GRID = st.integers(0, 200).map(lambda k: k / 4)
SHIFT = st.integers(-80, 80).map(lambda k: k / 4)


def agent(x, y):
    return AgentState(np.array([x, y], dtype=float))


def target(x, y):
    return TargetState(np.array([x, y], dtype=float), np.zeros(2), np.zeros(2))


def obs_for(agents, targets, j=0, radius=5.0):
    return build_observation(j, agents, targets, detection_matrix(agents, targets, radius))


class TestObservation:
    def test_example_one_target_one_peer(self):
        o = obs_for([agent(25, 25), agent(10, 40)], [target(27, 26)])
        np.testing.assert_array_equal(o[:2], [25, 25])
        np.testing.assert_array_equal(o[2:6], [1, 0, 0, 0])
        np.testing.assert_allclose(o[6:10], [np.sqrt(5), 0, 0, 0])
        np.testing.assert_array_equal(o[10:14], [0, 1, 0, 0])
        np.testing.assert_allclose(o[14:18], [0, np.sqrt(450), 0, 0])

    def test_empty(self):
        o = obs_for([agent(25, 25)], [])
        assert o.shape == (OBS_DIM,)
        assert np.all(o[2:] == 0)

    def test_mean_distance(self):
        o = obs_for([agent(25, 25)], [target(28, 25), target(25, 30)])
        # (3, 0) lies on the positive x axis -> quadrant 1; (0, 5) lies on +y -> quadrant 2
        assert o[2] == 1 and o[3] == 1
        o = obs_for([agent(25, 25)], [target(28, 25), target(29, 28)])
        assert o[2] == 2 and o[6] == pytest.approx(4.0)

    @pytest.mark.parametrize(
        "offset, quadrant",
        [((1, 0), 0), ((1, 1), 0), ((0, 1), 1), ((-1, 1), 1), ((-1, 0), 2), ((-1, -1), 2), ((0, -1), 3), ((1, -1), 3), ((0, 0), 0)],
    )
    def test_quadrant_tie_break(self, offset, quadrant):
        o = obs_for([agent(25, 25), agent(25 + offset[0], 25 + offset[1])], [])
        expected = np.zeros(4)
        expected[quadrant] = 1
        np.testing.assert_array_equal(o[10:14], expected)

    def test_far_target_ignored(self):
        near = obs_for([agent(25, 25)], [target(27, 25)])
        with_far = obs_for([agent(25, 25)], [target(27, 25), target(31, 25)])
        np.testing.assert_array_equal(near, with_far)

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.tuples(GRID, GRID), min_size=1, max_size=6),
        st.lists(st.tuples(GRID, GRID), min_size=0, max_size=4),
        st.tuples(SHIFT, SHIFT),
    )
    def test_relative_encoding_and_sizes(self, agents, targets, shift):
        ag = [agent(*p) for p in agents]
        tg = [target(*p) for p in targets]
        det = detection_matrix(ag, tg, 5.0)
        o = build_observation(0, ag, tg, det)
        assert o.shape == (18,)
        assert o[2:6].sum() <= len(tg)
        assert o[10:14].sum() == len(ag) - 1
        assert np.all(o[6:10][o[2:6] > 0] <= 5.0 + 1e-9)
        moved_a = [agent(x + shift[0], y + shift[1]) for x, y in agents]
        moved_t = [target(x + shift[0], y + shift[1]) for x, y in targets]
        o2 = build_observation(0, moved_a, moved_t, det)
        np.testing.assert_allclose(o2[2:], o[2:], atol=1e-9)


def crossing_tilings(x1, x2, dim, width, num_tilings):
    """Tilings with a tile boundary in (x1, x2] along ``dim``, from exact boundary positions.

    Tiling k's boundaries sit at ``width * (j + r_k / n)`` with
    ``r_k = -k(2*dim+1) mod n``.
    """
    n = num_tilings
    lo, hi = Fraction(x1) / Fraction(width), Fraction(x2) / Fraction(width)
    out = set()
    for k in range(n):
        r = Fraction((-k * (2 * dim + 1)) % n, n)
        if int(np.floor(float(lo - r))) != int(np.floor(float(hi - r))):
            out.add(k)
    return out


class TestTileCoder:
    def test_sixty_four_indices_deterministic(self):
        o = obs_for([agent(12.3, 40.1), agent(20, 20)], [target(14, 41)])
        t1 = active_tiles(CODER, o)
        t2 = active_tiles(CODER, o.copy())
        assert len(t1) == 64
        assert np.array_equal(t1, t2)
        assert np.all((0 <= t1) & (t1 < CODER.hash_table_size))

    def test_widths_follow_config(self):
        w = observation_widths(CoderConfig())
        assert list(w) == [25, 25] + [1] * 4 + [25] * 4 + [1] * 4 + [25] * 4

    @pytest.mark.parametrize("dim, x1, x2", [(0, 10.0, 10.3), (1, 33.0, 33.35), (0, 0.5, 0.6), (6, 2.0, 2.2)])
    def test_small_move_changes_strict_subset(self, dim, x1, x2):
        base = np.zeros(OBS_DIM)
        base[:2] = 25.0
        a, b = base.copy(), base.copy()
        a[dim], b[dim] = x1, x2
        diff = set(np.flatnonzero(CODER.tiles(a) != CODER.tiles(b)))
        expected = crossing_tilings(x1, x2, dim, CODER.widths[dim], CODER.num_tilings)
        assert diff == expected
        assert len(diff) < CODER.num_tilings

    def test_integer_counts_always_separated(self):
        a = np.zeros(OBS_DIM)
        b = a.copy()
        b[2] = 1.0
        assert np.all(CODER.tiles(a) != CODER.tiles(b))

    def test_shape_check(self):
        with pytest.raises(ValueError):
            CODER.tiles(np.zeros(3))
