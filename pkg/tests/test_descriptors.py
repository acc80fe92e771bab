import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tripletrack.descriptors import (
    DistanceMetric,
    cosine_distance,
    cosine_distance_matrix,
    euclidean_distance,
    metric_function,
)
from tripletrack.errors import DimensionError, InvalidDescriptorError


def test_cosine_identical_vectors():
    assert cosine_distance([1.0, 0.0], [1.0, 0.0]) == 0.0


def test_cosine_orthogonal_vectors():
    assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == 1.0


def test_cosine_antipodal_vectors():
    assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == 2.0


def test_cosine_hand_value():
    # 1 - (3*4 + 4*3) / (5 * 5) = 1 - 24/25
    assert cosine_distance([3.0, 4.0], [4.0, 3.0]) == pytest.approx(0.04, abs=1e-15)


def test_cosine_rejects_zero_vector():
    with pytest.raises(InvalidDescriptorError):
        cosine_distance([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(InvalidDescriptorError):
        cosine_distance([1.0, 0.0], [0.0, 0.0])


def test_cosine_rejects_length_mismatch():
    with pytest.raises(DimensionError):
        cosine_distance([1.0, 0.0], [1.0, 0.0, 0.0])


def test_cosine_rejects_nonfinite():
    with pytest.raises(InvalidDescriptorError):
        cosine_distance([1.0, np.nan], [1.0, 0.0])


def test_euclidean_values():
    assert euclidean_distance([0.0, 0.0], [0.0, 0.0]) == 0.0
    assert euclidean_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(np.sqrt(2))
    assert euclidean_distance([3.0, 4.0], [0.0, 0.0]) == 5.0


def test_euclidean_rejects_length_mismatch():
    with pytest.raises(DimensionError):
        euclidean_distance([1.0], [1.0, 2.0])


finite_vecs = arrays(
    np.float64,
    st.integers(min_value=2, max_value=16).map(lambda n: (n,)),
    elements=st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
)


@given(finite_vecs, finite_vecs)
@settings(max_examples=200)
def test_symmetry_exact(a, b):
    if a.shape != b.shape:
        return
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        return
    assert cosine_distance(a, b) == cosine_distance(b, a)
    assert euclidean_distance(a, b) == euclidean_distance(b, a)


@given(finite_vecs, st.floats(min_value=1e-3, max_value=1e3))
@settings(max_examples=200)
def test_cosine_scale_invariance(a, alpha):
    if np.linalg.norm(a) == 0:
        return
    b = np.roll(a, 1) + 0.5
    if np.linalg.norm(b) == 0:
        return
    assert abs(cosine_distance(alpha * a, b) - cosine_distance(a, b)) <= 1e-12


@given(finite_vecs)
@settings(max_examples=200)
def test_cosine_self_distance(a):
    if np.linalg.norm(a) == 0:
        return
    assert cosine_distance(a, a) <= 1e-12


def test_cosine_range_bulk():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(2000, 8))
    b = rng.normal(size=(2000, 8))
    d = np.array([cosine_distance(x, y) for x, y in zip(a, b)])
    assert np.all(d >= 0.0) and np.all(d <= 2.0)


def test_distance_matrix_matches_scalar():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(5, 6))
    b = rng.normal(size=(4, 6))
    m = cosine_distance_matrix(a, b)
    assert m.shape == (5, 4)
    for i in range(5):
        for j in range(4):
            assert m[i, j] == pytest.approx(cosine_distance(a[i], b[j]), abs=1e-12)


def test_distance_matrix_rejects_zero_row():
    a = np.array([[1.0, 0.0], [0.0, 0.0]])
    b = np.array([[1.0, 1.0]])
    with pytest.raises(InvalidDescriptorError):
        cosine_distance_matrix(a, b)


def test_metric_function_dispatch():
    assert metric_function(DistanceMetric.COSINE) is cosine_distance
    assert metric_function(DistanceMetric.EUCLIDEAN) is euclidean_distance
