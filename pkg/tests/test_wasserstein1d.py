import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sotdd.baselines import exact_ot
from sotdd.errors import InvalidOrder, LengthMismatch, MassMismatch
from sotdd.wasserstein1d import (
    SortedWeightedSamples,
    uniform_merge_plan,
    w1d_equal_uniform_pp,
    w1d_pp,
    w1d_uniform_pp,
)

S = SortedWeightedSamples.from_samples
dyadic = st.integers(-64, 64).map(lambda v: v / 8)


def brute_force_pp(a, b, p):
    n = len(a)
    best = min(sum(abs(a[i] - b[s[i]]) ** p for i in range(n)) for s in itertools.permutations(range(n)))
    return best / n


def test_examples():
    assert w1d_pp(S([1, 2, 3]), S([1, 2, 3])) == 0
    assert abs(w1d_pp(S([1, 2, 3]), S([4, 5, 6]), 2) - 9) <= 1e-12
    assert abs(w1d_pp(S([0, 1], [0.5, 0.5]), S([0]), 1) - 0.5) <= 1e-15
    assert w1d_equal_uniform_pp([1, 2, 3], [4, 5, 6], 2) == 9
    assert w1d_uniform_pp([1, 2, 3], [1, 2, 3]) == 0


def test_shift_p1():
    a = np.sort(np.random.default_rng(0).normal(size=20))
    assert abs(w1d_equal_uniform_pp(a, a + 2.5, 1) - 2.5) <= 1e-12


def test_errors():
    with pytest.raises(InvalidOrder):
        w1d_pp(S([0]), S([1]), 0.5)
    with pytest.raises(MassMismatch):
        SortedWeightedSamples([0, 1], [0.5, 0.6])
    with pytest.raises(LengthMismatch):
        w1d_equal_uniform_pp([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        SortedWeightedSamples([2, 1], [0.5, 0.5])


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_matches_permutation_oracle(p):
    rng = np.random.default_rng(int(p * 10))
    for _ in range(40):
        n = int(rng.integers(1, 7))
        a, b = rng.normal(size=n), rng.normal(size=n) * 2
        oracle = brute_force_pp(a.tolist(), b.tolist(), p)
        assert abs(w1d_pp(S(a), S(b), p) - oracle) <= 1e-10
        assert abs(w1d_equal_uniform_pp(np.sort(a), np.sort(b), p) - oracle) <= 1e-10


def test_weighted_matches_exact_ot():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n, m = rng.integers(1, 9, size=2)
        a, b = rng.normal(size=n), rng.normal(size=m)
        wa, wb = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m))
        cost = np.abs(a[:, None] - b[None, :]) ** 2
        oracle = exact_ot(cost, wa, wb).value
        assert abs(w1d_pp(S(a, wa), S(b, wb), 2) - oracle) <= 1e-10


def test_uniform_unequal_sizes_match_weighted():
    rng = np.random.default_rng(4)
    for n, m in [(3, 5), (7, 2), (4, 6), (10, 15)]:
        a, b = np.sort(rng.normal(size=n)), np.sort(rng.normal(size=m))
        assert abs(w1d_uniform_pp(a, b, 2) - w1d_pp(S(a), S(b), 2)) <= 1e-12


def test_merge_plan_masses():
    ia, ib, mass = uniform_merge_plan(4, 6)
    assert abs(mass.sum() - 1) <= 1e-15
    assert ia[-1] == 3 and ib[-1] == 5
    assert len(mass) == 4 + 6 - 2


def test_batched_rows_match_single():
    rng = np.random.default_rng(5)
    A = np.sort(rng.normal(size=(6, 9)), axis=1)
    B = np.sort(rng.normal(size=(6, 4)), axis=1)
    batch = w1d_uniform_pp(A, B, 1.5)
    for r in range(6):
        assert abs(batch[r] - w1d_uniform_pp(A[r], B[r], 1.5)) <= 1e-14 * batch[r]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12), st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12), st.sampled_from([1.0, 2.0, 2.5]))
def test_symmetry_exact(a, b, p):
    a, b = np.sort(a), np.sort(b)
    assert w1d_uniform_pp(a, b, p) == w1d_uniform_pp(b, a, p)
    assert w1d_pp(S(a), S(b), p) == w1d_pp(S(b), S(a), p)


@settings(max_examples=100, deadline=None)
@given(st.lists(dyadic, min_size=1, max_size=10), st.lists(dyadic, min_size=1, max_size=10), dyadic)
def test_translation_invariance_on_dyadic_values(a, b, c):
    a, b = np.sort(a), np.sort(b)
    assert w1d_uniform_pp(a + c, b + c, 2) == w1d_uniform_pp(a, b, 2)


@settings(max_examples=100, deadline=None)
@given(*(st.lists(st.floats(-100, 100), min_size=1, max_size=8) for _ in range(3)), st.sampled_from([1.0, 2.0, 3.0]))
def test_triangle_inequality(a, b, c, p):
    a, b, c = (np.sort(x) for x in (a, b, c))
    w = lambda x, y: w1d_uniform_pp(x, y, p) ** (1 / p)
    assert w(a, c) <= w(a, b) + w(b, c) + 1e-9 * (1 + np.max(np.abs(np.r_[a, b, c])))
