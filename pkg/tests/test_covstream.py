from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eegbeam.covstream import (EegWindow, batch_covariance, covariance, init_state, scatter,
                               slide)
from eegbeam.errors import DataError, ParameterError, RankRequirementError, SingularMatrixError
from eegbeam.millerinv import direct_inverse

from oracles import gauss_jordan_inverse, loop_scatter, rel_fro


class TestEegWindow:
    def test_shape(self):
        w = EegWindow(np.zeros((3, 5)), sample_rate=100.0)
        assert (w.k, w.n_samples) == (3, 5)

    @pytest.mark.parametrize("bad", [np.zeros((0, 3)), np.zeros(4), np.array([[1.0, np.inf]])])
    def test_rejects(self, bad):
        with pytest.raises(DataError):
            EegWindow(bad)


class TestBatchCovariance:
    def test_centered_example(self):
        X = np.array([[1.0, -1], [1, -1]])
        np.testing.assert_array_equal(batch_covariance(X, center=True), [[2, 2], [2, 2]])

    def test_constant_rows_vanish(self):
        X = np.tile([[3.0], [-2.0], [7.0]], (1, 6))
        np.testing.assert_array_equal(batch_covariance(X, center=True), np.zeros((3, 3)))

    def test_uncentered_example(self):
        np.testing.assert_array_equal(batch_covariance(np.eye(2), center=False), np.eye(2))

    def test_matches_loop_oracle(self):
        X = np.random.default_rng(0).standard_normal((5, 40))
        Xc = X - X.mean(axis=1, keepdims=True)
        np.testing.assert_allclose(batch_covariance(X), loop_scatter(Xc) / 39, rtol=1e-12)
        np.testing.assert_allclose(batch_covariance(X, center=False), loop_scatter(X) / 39,
                                   rtol=1e-12)

    def test_single_sample_needs_uncentered(self):
        with pytest.raises(DataError):
            batch_covariance(np.ones((2, 1)), center=True)
        np.testing.assert_array_equal(batch_covariance(np.ones((2, 1)), center=False),
                                      np.ones((2, 2)))

    def test_non_finite(self):
        with pytest.raises(DataError):
            batch_covariance(np.array([[1.0, np.nan, 2.0]]))


class TestInitState:
    def test_no_valid_block_for_ns_2(self):
        with pytest.raises(ParameterError):
            init_state(np.eye(2), cy=1)

    def test_rank_requirement(self):
        with pytest.raises(RankRequirementError):
            init_state(np.ones((8, 4)), cy=1)

    @pytest.mark.parametrize("cy", [0, 4, 5])
    def test_block_range(self, cy):
        with pytest.raises(ParameterError):
            init_state(np.random.default_rng(0).standard_normal((2, 8)), cy=cy)

    def test_random_full_rank(self):
        X = np.random.default_rng(1).standard_normal((2, 8))
        state = init_state(X, cy=1)
        C = loop_scatter(X) / 7
        assert np.linalg.norm(C @ state.inverse - np.eye(2)) <= 1e-10
        assert state.window_start == 0 and state.inverse_valid

    def test_duplicated_rows_need_ridge(self):
        row = np.random.default_rng(2).standard_normal(8)
        X = np.vstack([row, row])
        with pytest.raises(SingularMatrixError):
            init_state(X, cy=1)
        state = init_state(X, cy=1, ridge=1e-6)
        C = covariance(state)
        assert np.linalg.norm(C @ state.inverse - np.eye(2)) <= 1e-6 * 2

    def test_negative_ridge(self):
        with pytest.raises(ParameterError):
            init_state(np.random.default_rng(0).standard_normal((2, 8)), cy=1, ridge=-1.0)


def state_with_columns(cols, cy=1):
    return init_state(np.array(cols, dtype=float).T, cy=cy, ridge=1.0)


class TestSlide:
    def test_worked_example(self):
        # window (1,0), (0,1), padding zeros; evicting (1,0) and adding (1,1)
        state = state_with_columns([(1, 0), (0, 1), (0, 0), (0, 0), (0, 0)])
        np.testing.assert_array_equal(state.scatter, np.eye(2))
        new, delta = slide(state, [1.0, 1.0])
        np.testing.assert_array_equal(new.scatter, [[1, 1], [1, 2]])
        np.testing.assert_array_equal(new.scatter, loop_scatter(new.window()))
        np.testing.assert_array_equal(delta.matrix, [[0, 1], [1, 1]])

    def test_same_block_is_noop(self):
        X = np.random.default_rng(3).standard_normal((3, 9))
        state = init_state(X, cy=2)
        new, delta = slide(state, X[:, :2])
        np.testing.assert_allclose(new.scatter, state.scatter, atol=1e-14)
        np.testing.assert_allclose(delta.matrix, 0, atol=1e-15)

    def test_zero_block(self):
        X = np.random.default_rng(4).standard_normal((3, 9))
        state = init_state(X, cy=2)
        new, _ = slide(state, np.zeros((3, 2)))
        np.testing.assert_allclose(new.scatter, state.scatter - loop_scatter(X[:, :2]), atol=1e-13)

    def test_block_shape_checked(self):
        state = init_state(np.random.default_rng(5).standard_normal((3, 9)), cy=2)
        with pytest.raises(DataError):
            slide(state, np.zeros((3, 3)))
        with pytest.raises(DataError):
            slide(state, np.full((3, 2), np.nan))

    def test_input_state_untouched(self):
        state = init_state(np.random.default_rng(6).standard_normal((3, 9)), cy=1)
        before = state.scatter.copy()
        slide(state, np.ones(3))
        np.testing.assert_array_equal(state.scatter, before)


class TestCovariance:
    def _state(self, S, ns, ridge):
        k = len(S)
        base = init_state(np.random.default_rng(0).standard_normal((k, ns)), cy=1, ridge=1.0)
        return replace(base, scatter=np.array(S, dtype=float), ridge=ridge)

    def test_examples(self):
        np.testing.assert_array_equal(covariance(self._state(np.eye(2), 3, 0.0)), np.eye(2) / 2)
        np.testing.assert_array_equal(covariance(self._state(np.eye(2), 3, 0.5)), np.eye(2))
        np.testing.assert_array_equal(covariance(self._state([[1, 1], [1, 2]], 3, 0.0)),
                                      [[0.5, 0.5], [0.5, 1]])


@given(k=st.sampled_from([2, 4, 8, 16]), cy=st.integers(1, 3), seed=st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25, deadline=None)
def test_sliding_matches_batch(k, cy, seed):
    rng = np.random.default_rng(seed)
    ns = 4 * k
    slides = 30
    X = rng.standard_normal((k, ns + slides * cy))
    state = init_state(X[:, :ns], cy)
    for m in range(1, slides + 1):
        state, _ = slide(state, X[:, ns + (m - 1) * cy:ns + m * cy])
        window = X[:, m * cy:m * cy + ns]
        assert state.window_start == m * cy
        np.testing.assert_array_equal(state.window(), window)
        assert rel_fro(covariance(state), batch_covariance(window, center=False)) <= 1e-9
        S = state.scatter
        assert np.linalg.norm(S - S.T) <= 1e-12 * np.linalg.norm(S)


def test_psd_with_ridge():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((6, 24))
    state = init_state(X, cy=2, ridge=0.1)
    for j in range(50):
        state, _ = slide(state, rng.standard_normal((6, 2)) * (j % 3))
        assert np.linalg.eigvalsh(covariance(state)).min() >= 0.1 - 1e-10


def test_direct_inverse_matches_gauss_jordan():
    C = batch_covariance(np.random.default_rng(8).standard_normal((6, 30)))
    np.testing.assert_allclose(direct_inverse(C), gauss_jordan_inverse(C), rtol=1e-10)


def test_scatter_matches_loop():
    X = np.random.default_rng(9).standard_normal((4, 11))
    np.testing.assert_allclose(scatter(X), loop_scatter(X), rtol=1e-13)
