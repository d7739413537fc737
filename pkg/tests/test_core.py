import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sigmageom.core import (
    IntervalClass, Skeleton, Vector, WorldFunction, classify, covariant_coordinates,
    distortion_from_quantum, distortion_map, gram_determinant, metric_tensor,
    quadratic_sigma, scalar_product, squared_length,
)
from sigmageom.errors import ContractViolation, SingularSkeleton

E2 = WorldFunction.euclidean(2)
E3 = WorldFunction.euclidean(3)
M4 = WorldFunction.minkowski()
O4 = np.zeros(4)


def test_euclidean_sigma_is_half_squared_distance():
    assert E2([0, 0], [3, 4]) == 12.5


def test_minkowski_sigma():
    assert M4(O4, [2, 1, 0, 0]) == 1.5


def test_minkowski_respects_speed_of_light():
    g = WorldFunction.minkowski(c=3.0)
    assert g(O4, [1, 0, 0, 0]) == pytest.approx(4.5)


def test_distorted_branches():
    g = WorldFunction.distorted(d=0.1, sigma0=0.5)
    assert g(O4, [2, 0, 0, 0]) == pytest.approx(2.1)
    assert g(O4, [0, math.sqrt(2), 0, 0]) == pytest.approx(-1.0)
    # middle band scales by 1 + d/sigma0
    assert g(O4, [0.5, 0, 0, 0]) == pytest.approx(0.125 * 1.2)


@pytest.mark.parametrize("g", [E3, M4, WorldFunction.distorted(0.1, 0.5)])
def test_self_distance_is_exactly_zero(g):
    rng = np.random.default_rng(1)
    p = rng.uniform(-5, 5, size=(100, g.dim))
    assert np.all(g(p, p) == 0.0)


def test_dimension_mismatch_raises():
    with pytest.raises(ContractViolation):
        E2([0, 0], [1, 2, 3])


def test_invalid_distorted_parameters():
    with pytest.raises(ContractViolation):
        WorldFunction.distorted(d=-1, sigma0=1)
    with pytest.raises(ContractViolation):
        WorldFunction.distorted(d=1, sigma0=0)


@pytest.mark.parametrize("g", [E3, M4, WorldFunction.distorted(0.05, 0.01)])
def test_symmetry_on_random_pairs(g):
    rng = np.random.default_rng(7)
    p = rng.uniform(-10, 10, size=(1000, g.dim))
    q = rng.uniform(-10, 10, size=(1000, g.dim))
    a, b = g(p, q), g(q, p)
    assert np.all(np.abs(a - b) <= 1e-12 * (1 + np.abs(a)))


@pytest.mark.parametrize("sigma0", [0.5, 0.013])
def test_distortion_continuous_at_branch_points(sigma0):
    d = 0.1
    eps = 1e-15
    assert abs(distortion_map(sigma0 - eps, d, sigma0) - distortion_map(sigma0 + eps, d, sigma0)) <= 1e-12
    assert abs(distortion_map(-eps, d, sigma0) - distortion_map(eps, d, sigma0)) <= 1e-12


def test_squared_length_and_classification():
    v = Vector.of([0, 0], [3, 4])
    assert squared_length(E2, v) == 25
    assert classify(E2, Vector.of([1, 1], [1, 1])) is IntervalClass.NULL
    s = Vector.of(O4, [0, 1, 0, 0])
    assert squared_length(M4, s) == -1
    assert classify(M4, s) is IntervalClass.SPACELIKE
    assert classify(M4, Vector.of(O4, [1, 0, 0, 0])) is IntervalClass.TIMELIKE
    assert classify(M4, Vector.of(O4, [1, 1, 0, 0])) is IntervalClass.NULL


def test_scalar_product_orthogonal_axes():
    v = Vector.of([0, 0], [1, 0])
    w = Vector.of([0, 0], [0, 1])
    assert scalar_product(E2, v, w) == 0


def test_scalar_product_with_itself_is_squared_length():
    rng = np.random.default_rng(3)
    for g in (E3, M4, WorldFunction.distorted(0.1, 0.02)):
        for _ in range(50):
            a, b = rng.uniform(-3, 3, size=(2, g.dim))
            v = Vector.of(a, b)
            assert scalar_product(g, v, v) == 2 * g(a, b)


def test_distorted_common_origin_product_shift():
    # all three Minkowski values above sigma0; shared start gets a +d shift
    d = 0.1
    g = WorldFunction.distorted(d, sigma0=0.01)
    v = Vector.of(O4, [2.0, 0.3, 0, 0])
    w = Vector.of(O4, [3.5, -0.2, 0.1, 0])
    pm = (M4(v.start, w.end) + M4(v.end, w.start) - M4(v.start, w.start) - M4(v.end, w.end))
    assert M4(v.end, w.end) > 0.01
    assert scalar_product(g, v, w) == pytest.approx(pm + d, abs=1e-12)


def test_metric_tensor_euclidean_axes_is_identity():
    gm, gi = metric_tensor(E3, Skeleton.axes(np.zeros(3)))
    np.testing.assert_allclose(gm, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(gi, np.eye(3), atol=1e-15)


def test_metric_tensor_minkowski_axes():
    gm, gi = metric_tensor(M4, Skeleton.axes(O4))
    np.testing.assert_allclose(gm, np.diag([1, -1, -1, -1]), atol=1e-15)
    gm3, _ = metric_tensor(WorldFunction.minkowski(c=2.0), Skeleton.axes(O4))
    np.testing.assert_allclose(np.diag(gm3), [4, -1, -1, -1])


def test_metric_tensor_repeated_point():
    with pytest.raises(SingularSkeleton):
        metric_tensor(E2, Skeleton([[0, 0], [1, 0], [1, 0]]))


def test_metric_tensor_collinear_is_singular():
    with pytest.raises(SingularSkeleton):
        metric_tensor(E2, Skeleton([[0, 0], [1, 1], [2, 2]]))


def test_inverse_contract():
    rng = np.random.default_rng(11)
    sk = Skeleton(rng.uniform(-2, 2, size=(4, 3)))
    gm, gi = metric_tensor(E3, sk)
    np.testing.assert_allclose(gi @ gm, np.eye(3), atol=1e-10)


def test_gram_determinant_values():
    assert gram_determinant(E3, Skeleton.axes(np.zeros(3))) == pytest.approx(1.0)
    rng = np.random.default_rng(5)
    sk5 = Skeleton(rng.uniform(-1, 1, size=(5, 3)))
    assert abs(gram_determinant(E3, sk5)) <= 1e-8
    assert abs(gram_determinant(E2, Skeleton([[0, 0], [1, 1], [3, 3]]))) <= 1e-12


def test_covariant_coordinates():
    sk = Skeleton.axes(np.zeros(2))
    np.testing.assert_allclose(covariant_coordinates(E2, sk, [0, 0]), [0, 0])
    np.testing.assert_allclose(covariant_coordinates(E2, sk, [2, 3]), [2, 3])
    doubled = Skeleton([[0, 0], [2, 0], [0, 1]])
    np.testing.assert_allclose(covariant_coordinates(E2, doubled, [2, 3]), [4, 3])


def test_covariant_coordinates_singular():
    with pytest.raises(SingularSkeleton):
        covariant_coordinates(E2, Skeleton([[0, 0], [1, 0], [2, 0]]), [1, 1])


def test_distortion_from_quantum():
    assert distortion_from_quantum(1, 1, 1) == 0.5
    assert distortion_from_quantum(1, 0.5, 1) == 1.0
    assert distortion_from_quantum(1e-300, 1, 1) < 1e-299
    with pytest.raises(ContractViolation):
        distortion_from_quantum(0, 1, 1)
    with pytest.raises(ContractViolation):
        distortion_from_quantum(1, -1, 1)


coords3 = arrays(np.float64, (3,), elements=st.floats(-10, 10))


@settings(max_examples=200, deadline=None)
@given(st.lists(coords3, min_size=4, max_size=4), coords3, coords3)
def test_quadratic_form_reconstructs_sigma(skpts, p, q):
    sk = Skeleton(np.array(skpts))
    try:
        _, gi = metric_tensor(E3, sk, rtol=1e-6)
    except SingularSkeleton:
        return
    x = covariant_coordinates(E3, sk, np.array([p, q]), check=False)
    rebuilt = quadratic_sigma(gi, x[0], x[1])
    exact = E3(p, q)
    cond = np.linalg.cond(np.linalg.inv(gi))
    assert abs(rebuilt - exact) <= 1e-9 * max(1.0, exact) * max(1.0, cond / 1e3)


@settings(max_examples=200, deadline=None)
@given(st.lists(coords3, min_size=2, max_size=6))
def test_euclidean_gram_is_positive_semidefinite(pts):
    sk = Skeleton(np.array(pts))
    from sigmageom.core import gram_matrix
    gm = gram_matrix(E3, sk)
    eig = np.linalg.eigvalsh(gm)
    assert eig.min() >= -1e-10 * max(1.0, np.abs(eig).max())
