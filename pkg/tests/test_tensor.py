import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from desap.errors import BudgetError, ShapeError
from desap.tensor import (
    cosine_sim_matrix,
    layer_norm,
    matmul,
    mean_over_axis,
    row_softmax,
    top_k_indices,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def naive_matmul(a, b):
    n, k = len(a), len(a[0])
    m = len(b[0])
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i][t] * b[t][j]
            out[i][j] = s
    return np.array(out)


def sort_oracle_top_k(scores, k):
    # full sort on (-score, index): ties resolved by lowest index
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return sorted(ranked[:k])


class TestMatmul:
    def test_identity(self):
        np.testing.assert_array_equal(matmul([[1, 0], [0, 1]], [[3, 4], [5, 6]]), [[3, 4], [5, 6]])

    def test_inner_product(self):
        np.testing.assert_array_equal(matmul([[1, 2]], [[3], [4]]), [[11]])

    def test_random_against_loops(self, rng):
        a, b = rng.standard_normal((5, 7)), rng.standard_normal((7, 3))
        np.testing.assert_allclose(matmul(a, b), naive_matmul(a.tolist(), b.tolist()), rtol=0, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 16), st.integers(1, 16), st.integers(1, 16), st.integers(0, 2**32 - 1))
    def test_random_sizes_against_loops(self, n, k, m, seed):
        r = np.random.default_rng(seed)
        a, b = r.standard_normal((n, k)), r.standard_normal((k, m))
        np.testing.assert_allclose(matmul(a, b), naive_matmul(a.tolist(), b.tolist()), rtol=0, atol=1e-12)

    def test_shape_error_names_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            matmul(np.zeros((2, 3)), np.zeros((2, 3)))


class TestSoftmax:
    @pytest.mark.parametrize("c", [-7.5, 0.0, 3.0, 1e4])
    def test_uniform(self, c):
        np.testing.assert_allclose(row_softmax([[c, c, c]]), [[1 / 3] * 3], atol=1e-15)

    def test_closed_form(self):
        # exp(ln 3) / (1 + 3) = 0.75
        np.testing.assert_allclose(row_softmax([[0.0, math.log(3)]]), [[0.25, 0.75]], atol=1e-15)

    def test_large_logits_shift(self):
        out = row_softmax([[1000.0, 1000.5]])
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, row_softmax([[0.0, 0.5]]), atol=1e-15)

    def test_empty(self):
        with pytest.raises(ShapeError):
            row_softmax(np.zeros((0, 3)))

    @given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=finite), finite)
    def test_rows_stochastic_and_shift_invariant(self, m, c):
        p = row_softmax(m)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(row_softmax(m + c), p, atol=1e-9)


class TestLayerNorm:
    def test_constant_row(self):
        np.testing.assert_allclose(layer_norm([[1, 1, 1]], np.ones(3), np.zeros(3)), [[0, 0, 0]])

    def test_two_values(self):
        # mean 1, population std 1
        np.testing.assert_allclose(layer_norm([[0, 2]], np.ones(2), np.zeros(2), eps=1e-15), [[-1, 1]], atol=1e-12)

    def test_zero_gamma(self, rng):
        np.testing.assert_array_equal(layer_norm(rng.standard_normal((3, 2)), np.zeros(2), [5, 5]), np.full((3, 2), 5.0))

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            layer_norm(np.zeros((2, 3)), np.ones(2), np.zeros(2))


class TestCosine:
    def test_self_similarity(self, rng):
        a = rng.standard_normal((4, 5))
        np.testing.assert_allclose(np.diag(cosine_sim_matrix(a, a)), 1.0, atol=1e-12)

    def test_orthogonal(self):
        assert cosine_sim_matrix([[1, 0]], [[0, 1]])[0, 0] == 0.0

    def test_scale(self):
        assert cosine_sim_matrix([[2, 0]], [[1, 0]])[0, 0] == pytest.approx(1.0)

    def test_zero_row_gives_zero(self):
        s = cosine_sim_matrix([[0, 0], [1, 1]], [[1, 0]])
        assert s[0, 0] == 0.0
        assert np.all(np.isfinite(s))

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            cosine_sim_matrix(np.ones((2, 3)), np.ones((2, 2)))

    @given(
        arrays(np.float64, (4, 3), elements=finite),
        arrays(np.float64, (5, 3), elements=finite),
        arrays(np.float64, 4, elements=st.floats(0.01, 100)),
    )
    def test_bounds_and_rescaling(self, a, b, scale):
        s = cosine_sim_matrix(a, b)
        assert np.all(s >= -1 - 1e-9) and np.all(s <= 1 + 1e-9)
        np.testing.assert_allclose(cosine_sim_matrix(a * scale[:, None], b), s, atol=1e-9)


class TestMean:
    def test_axes(self):
        m = [[1, 3], [5, 7]]
        np.testing.assert_array_equal(mean_over_axis(m, "cols"), [2, 6])
        np.testing.assert_array_equal(mean_over_axis(m, "rows"), [3, 5])

    def test_single_row(self):
        np.testing.assert_array_equal(mean_over_axis([[4, 5, 6]], "rows"), [4, 5, 6])

    def test_empty(self):
        with pytest.raises(ShapeError):
            mean_over_axis(np.zeros((0, 2)), "rows")


class TestTopK:
    def test_basic(self):
        assert top_k_indices([0.1, 0.9, 0.5], 2).tolist() == [1, 2]

    def test_tie_lowest_index(self):
        assert top_k_indices([0.5, 0.9, 0.5], 2).tolist() == [0, 1]

    def test_empty_budget(self):
        assert top_k_indices([0.3, 0.2], 0).tolist() == []

    def test_budget_error(self):
        with pytest.raises(BudgetError):
            top_k_indices([1.0], 2)

    @given(st.lists(st.integers(0, 4).map(float), min_size=1, max_size=12), st.data())
    def test_matches_sort_oracle(self, scores, data):
        k = data.draw(st.integers(0, len(scores)))
        assert top_k_indices(scores, k).tolist() == sort_oracle_top_k(scores, k)

    @given(st.lists(finite, min_size=1, max_size=12), st.data())
    def test_monotone_transform_invariance(self, scores, data):
        k = data.draw(st.integers(0, len(scores)))
        s = np.array(scores)
        # strictly increasing remap of the distinct values, exact by construction
        levels = np.unique(s)
        steps = np.cumsum(data.draw(arrays(np.float64, levels.size, elements=st.floats(0.1, 10))))
        t = steps[np.searchsorted(levels, s)]
        assert top_k_indices(t, k).tolist() == top_k_indices(s, k).tolist()

    @given(st.lists(finite, min_size=1, max_size=12))
    def test_full_budget(self, scores):
        assert top_k_indices(scores, len(scores)).tolist() == list(range(len(scores)))
