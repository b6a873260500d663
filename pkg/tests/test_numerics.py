"""Tests for the numerics module: eigensolver and random streams."""

import numpy as np
import pytest

from decbilevel.numerics import (
    RngStream,
    as_sym_matrix,
    as_vector,
    draw_gaussian,
    draw_uniform_int,
    draw_uniform_ints,
    sym_eigvals,
)


def test_eigvals_identity():
    vals = sym_eigvals(np.eye(2))
    assert np.allclose(vals, [1.0, 1.0], atol=1e-14)


def test_eigvals_rank_one_averaging():
    vals = sym_eigvals(np.ones((3, 3)) / 3.0)
    assert np.allclose(vals, [1.0, 0.0, 0.0], atol=1e-12)


def test_eigvals_path_metropolis():
    m = np.array([[2 / 3, 1 / 3, 0.0], [1 / 3, 1 / 3, 1 / 3], [0.0, 1 / 3, 2 / 3]])
    vals = sym_eigvals(m)
    assert np.allclose(vals, [1.0, 2 / 3, 0.0], atol=1e-12)


def test_eigvals_descending_order():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((8, 8))
    a = (a + a.T) / 2
    vals = sym_eigvals(a)
    assert np.all(np.diff(vals) <= 0)


@pytest.mark.parametrize("m", [2, 3, 5, 10, 30])
def test_eigvals_against_reference_solver(m):
    rng = np.random.default_rng(100 + m)
    a = rng.standard_normal((m, m))
    a = (a + a.T) / 2
    vals = sym_eigvals(a)
    ref = np.linalg.eigvalsh(a)[::-1]
    scale = max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(vals - ref)) <= 1e-10 * scale


def test_eigvals_trace_invariant():
    rng = np.random.default_rng(5)
    for m in (3, 7, 20):
        a = rng.standard_normal((m, m)) * 3.0
        a = (a + a.T) / 2
        vals = sym_eigvals(a)
        tol = 1e-9 * m * np.max(np.abs(a))
        assert abs(np.sum(vals) - np.trace(a)) <= tol


def test_eigvals_rejects_bad_input():
    with pytest.raises(ValueError):
        sym_eigvals(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(ValueError):
        sym_eigvals(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        sym_eigvals(np.ones((2, 3)))


def test_eigvals_single_entry_and_zero():
    assert sym_eigvals(np.array([[4.5]]))[0] == 4.5
    assert np.array_equal(sym_eigvals(np.zeros((3, 3))), np.zeros(3))


def test_vector_validation():
    v = as_vector([1.0, 2.0], dim=2)
    assert v.dtype == np.float64
    with pytest.raises(ValueError):
        as_vector([1.0, np.inf])
    with pytest.raises(ValueError):
        as_vector([1.0, 2.0], dim=3)
    with pytest.raises(ValueError):
        as_vector([[1.0, 2.0]])


def test_sym_matrix_validation():
    a = as_sym_matrix([[1.0, 2.0], [2.0, 3.0]])
    assert a.shape == (2, 2)
    with pytest.raises(ValueError):
        as_sym_matrix([[1.0, 2.0], [2.0000001, 3.0]])


def test_vector_ops_bilinear():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b, c = rng.standard_normal((3, 6))
        t = rng.standard_normal()
        assert abs(np.dot(a + b, c) - (np.dot(a, c) + np.dot(b, c))) <= 1e-12 * (
            1 + abs(np.dot(a, c)) + abs(np.dot(b, c))
        )
        assert abs(np.dot(t * a, c) - t * np.dot(a, c)) <= 1e-12 * (
            1 + abs(t * np.dot(a, c))
        )
        assert abs(np.linalg.norm(a) ** 2 - np.dot(a, a)) <= 1e-12 * (1 + np.dot(a, a))


def test_gaussian_sigma_zero_is_zero_vector():
    s = RngStream(1, (0, 0, "up"))
    assert np.array_equal(draw_gaussian(s, 5, 0.0), np.zeros(5))


def test_gaussian_rejects_negative_sigma():
    with pytest.raises(ValueError):
        draw_gaussian(RngStream(1), 3, -0.1)


def test_gaussian_determinism_same_lane():
    a = draw_gaussian(RngStream(42, (3, 17, "low")), 8, 2.0)
    b = draw_gaussian(RngStream(42, (3, 17, "low")), 8, 2.0)
    assert np.array_equal(a, b)


def test_gaussian_lanes_independent_of_visit_order():
    # Drawing lane A then B must equal drawing B then A, per lane.
    root = RngStream(9)
    a1 = draw_gaussian(root.lane_stream(0, 5, "up"), 4, 1.0)
    b1 = draw_gaussian(root.lane_stream(1, 5, "up"), 4, 1.0)
    root2 = RngStream(9)
    b2 = draw_gaussian(root2.lane_stream(1, 5, "up"), 4, 1.0)
    a2 = draw_gaussian(root2.lane_stream(0, 5, "up"), 4, 1.0)
    assert np.array_equal(a1, a2)
    assert np.array_equal(b1, b2)


def test_gaussian_distinct_lanes_differ():
    a = draw_gaussian(RngStream(5, (0, 0, "up")), 6, 1.0)
    b = draw_gaussian(RngStream(5, (0, 0, "low")), 6, 1.0)
    c = draw_gaussian(RngStream(5, (0, 1, "up")), 6, 1.0)
    d = draw_gaussian(RngStream(6, (0, 0, "up")), 6, 1.0)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_gaussian_law_of_large_numbers():
    draws = draw_gaussian(RngStream(2024, ("lln",)), 10**6, 1.0)
    assert abs(np.mean(draws)) <= 4e-3
    assert abs(np.var(draws) - 1.0) <= 0.01


def test_uniform_int_singleton_support():
    s = RngStream(1, ("k",))
    assert all(draw_uniform_int(s, 1) == 0 for _ in range(10))


def test_uniform_int_rejects_nonpositive():
    with pytest.raises(ValueError):
        draw_uniform_int(RngStream(1), 0)
    with pytest.raises(ValueError):
        draw_uniform_ints(RngStream(1), -2, 5)


def test_uniform_int_range_and_determinism():
    seq1 = [draw_uniform_int(RngStream(3, ("k", t)), 7) for t in range(50)]
    seq2 = [draw_uniform_int(RngStream(3, ("k", t)), 7) for t in range(50)]
    assert seq1 == seq2
    assert all(0 <= k < 7 for k in seq1)
    assert len(set(seq1)) > 1


def test_uniform_int_frequencies():
    draws = draw_uniform_ints(RngStream(77, ("freq",)), 4, 10**6)
    counts = np.bincount(draws, minlength=4) / 10**6
    assert np.all(np.abs(counts - 0.25) <= 0.005)


def test_stream_repr_and_lane_extension():
    s = RngStream(12, (1,))
    child = s.lane_stream(2, "up")
    assert child.lane == (1, 2, "up")
    assert "seed=12" in repr(s)
