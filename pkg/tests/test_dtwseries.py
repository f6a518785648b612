from functools import lru_cache

import numpy as np
import pytest

from gcflsim.clustering import stoer_wagner_mincut
from gcflsim.dtwseries import (
    NormWindow,
    dtw_distance,
    dtw_matrix,
    dtw_to_cut_weights,
    push_norms,
    standardize_row,
    write_window_csv,
)
from gcflsim.errors import ArgumentError


def dtw_oracle(a, b):
    """Memoized-recursion DTW, written independently of the DP-table version."""
    a = tuple(float(x) for x in a)
    b = tuple(float(x) for x in b)

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0 and j == 0:
            return abs(a[0] - b[0])
        if i < 0 or j < 0:
            return float("inf")
        return abs(a[i] - b[j]) + min(rec(i - 1, j), rec(i, j - 1), rec(i - 1, j - 1))

    return rec(len(a) - 1, len(b) - 1)


class TestNormWindow:
    def test_eviction_keeps_most_recent(self):
        window = NormWindow(3)
        for x in (1.0, 2.0, 3.0, 4.0):
            push_norms(window, {0: x})
        assert window.row(0).tolist() == [2.0, 3.0, 4.0]

    def test_partial_fill_preserves_order(self):
        window = NormWindow(5)
        push_norms(window, {1: 0.5})
        push_norms(window, {1: 0.25})
        assert window.row(1).tolist() == [0.5, 0.25]

    def test_fill_level_is_min_rounds_window(self):
        window = NormWindow(4)
        for t in range(7):
            push_norms(window, {0: float(t), 1: float(t)})
            for cid in (0, 1):
                assert len(window.row(cid)) == min(t + 1, 4)

    def test_negative_norm_rejected(self):
        with pytest.raises(ArgumentError):
            push_norms(NormWindow(3), {0: -0.1})


class TestStandardizeRow:
    def test_two_point_sequence(self):
        # population std of {2, 4} is 1, so the row is unchanged
        assert standardize_row(np.array([2.0, 4.0])).tolist() == [2.0, 4.0]

    def test_constant_sequence_unchanged(self, caplog):
        out = standardize_row(np.array([5.0, 5.0, 5.0]))
        assert out.tolist() == [5.0, 5.0, 5.0]

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        seq = rng.uniform(0.1, 2.0, size=8)
        assert np.allclose(standardize_row(seq * 3.0), standardize_row(seq), atol=1e-12)

    def test_needs_two_values(self):
        with pytest.raises(ArgumentError):
            standardize_row(np.array([1.0]))


class TestDtwDistance:
    def test_identical_sequences(self):
        assert dtw_distance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_single_cell(self):
        assert dtw_distance([0.0], [-3.5]) == 3.5

    def test_repeated_element_aligns_free(self):
        assert dtw_distance([1.0, 2.0, 3.0], [1.0, 2.0, 2.0, 3.0]) == 0.0

    def test_constant_offset(self):
        assert dtw_distance([1.0, 1.0, 1.0], [5.0, 5.0, 5.0]) == 12.0

    def test_matches_memoized_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a = rng.uniform(0, 3, size=int(rng.integers(1, 16)))
            b = rng.uniform(0, 3, size=int(rng.integers(1, 16)))
            assert dtw_distance(a, b) == pytest.approx(dtw_oracle(a, b), abs=1e-12)

    def test_symmetry_and_self_distance(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.uniform(size=int(rng.integers(1, 10)))
            b = rng.uniform(size=int(rng.integers(1, 10)))
            assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), abs=1e-12)
            assert dtw_distance(a, a) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            dtw_distance([], [1.0])


class TestDtwMatrix:
    def _window(self, rows):
        window = NormWindow(10)
        for cid, row in rows.items():
            for x in row:
                push_norms(window, {cid: x})
        return window

    def test_identical_histories_zero_matrix(self):
        window = self._window({0: [1.0, 2.0], 1: [1.0, 2.0], 2: [1.0, 2.0]})
        assert np.all(dtw_matrix(window, [0, 1, 2]) == 0.0)

    def test_constant_offset_pair(self):
        window = self._window({0: [1.0, 1.0, 1.0], 1: [5.0, 5.0, 5.0]})
        beta = dtw_matrix(window, [0, 1])
        assert beta[0, 1] == 12.0

    def test_symmetric_zero_diagonal(self):
        rng = np.random.default_rng(3)
        window = self._window({i: rng.uniform(size=6) for i in range(4)})
        beta = dtw_matrix(window, [0, 1, 2, 3])
        assert np.allclose(beta, beta.T)
        assert np.all(np.diag(beta) == 0.0)

    def test_prefix_comparison_for_partial_fill(self):
        window = self._window({0: [1.0, 2.0, 3.0], 1: [1.0]})
        beta = dtw_matrix(window, [0, 1])
        assert beta[0, 1] == pytest.approx(dtw_oracle([1.0, 2.0, 3.0], [1.0]))

    def test_standardize_flag(self):
        window = self._window({0: [1.0, 2.0, 4.0], 1: [2.0, 4.0, 8.0]})
        raw = dtw_matrix(window, [0, 1])
        std = dtw_matrix(window, [0, 1], standardize=True)
        assert std[0, 1] == pytest.approx(0.0, abs=1e-12)  # same shape after scaling
        assert raw[0, 1] > 0.0

    def test_empty_buffer_names_client(self):
        window = self._window({0: [1.0]})
        with pytest.raises(ArgumentError, match="client 5"):
            dtw_matrix(window, [0, 5])


class TestDtwToCutWeights:
    def test_all_zero_distances_give_uniform_weights_singleton_cut(self):
        beta = np.zeros((4, 4))
        w = dtw_to_cut_weights(beta)
        off = w[~np.eye(4, dtype=bool)]
        assert np.allclose(off, off[0])
        (a, b), _ = stoer_wagner_mincut(w)
        assert min(len(a), len(b)) == 1

    def test_dominant_distance_is_severed(self):
        # client pair (0, 2) is far apart; 1 sits near 0
        beta = np.array([
            [0.0, 1.0, 10.0],
            [1.0, 0.0, 9.0],
            [10.0, 9.0, 0.0],
        ])
        (a, b), _ = stoer_wagner_mincut(dtw_to_cut_weights(beta))
        assert {frozenset(a), frozenset(b)} == {frozenset({0, 1}), frozenset({2})}

    def test_output_satisfies_mincut_preconditions(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            beta = np.triu(rng.uniform(0, 5, (n, n)), 1)
            beta = beta + beta.T
            stoer_wagner_mincut(dtw_to_cut_weights(beta))  # must not raise


def test_write_window_csv(tmp_path):
    window = NormWindow(4)
    for x in (0.25, 0.5):
        push_norms(window, {3: x, 1: x * 2})
    path = tmp_path / "window.csv"
    write_window_csv(path, window, [3, 1])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "client_id,norms"
    assert lines[1].startswith("1,")
    assert "0.25;0.5" in lines[2]
