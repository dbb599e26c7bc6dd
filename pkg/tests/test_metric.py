import numpy as np
import pytest

from umt.errors import (
    AsymmetricMatrix,
    CoincidentPoints,
    DuplicatePoints,
    InvalidMatrix,
    NegativeDistance,
    NonzeroDiagonal,
    TriangleViolation,
    UnverifiedMetric,
)
from umt.generators import line_space, random_euclidean, rng_from_seed
from umt.metric import (
    ExtendedSpace,
    cross_ratio,
    make_quasi_space,
    make_space,
    require_metric,
    triangle_excess,
)


def test_one_and_two_point_spaces():
    assert make_space([[0]]).n == 1
    s = make_space([[0, 1], [1, 0]])
    assert s.n == 2 and s.labels == ("0", "1")


def test_triangle_violation_witness():
    with pytest.raises(TriangleViolation) as exc:
        make_space([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    assert sorted(exc.value.witness) == [0, 1, 2]
    assert exc.value.witness[1] == 1  # the detour point


@pytest.mark.parametrize("mat,err", [
    ([[0, 1], [2, 0]], AsymmetricMatrix),
    ([[0, -1], [-1, 0]], NegativeDistance),
    ([[1, 1], [1, 0]], NonzeroDiagonal),
    ([[0, 0], [0, 0]], CoincidentPoints),
    ([[0, np.nan], [np.nan, 0]], InvalidMatrix),
    ([[0, 1, 2], [1, 0, 1]], InvalidMatrix),
])
def test_validation_errors(mat, err):
    with pytest.raises(err):
        make_space(mat)


def test_labels_must_be_distinct():
    with pytest.raises(DuplicatePoints):
        make_space([[0, 1], [1, 0]], ["a", "a"])


def test_triangle_holds_on_random_spaces():
    for seed in range(20):
        s = random_euclidean(12, rng_from_seed(seed))
        excess, _ = triangle_excess(np.asarray(s.dist))
        assert excess <= 1e-9


def test_dist_is_read_only():
    s = make_space([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        s.dist[0, 1] = 5


def test_quasi_space_is_rejected_where_metric_required():
    q = make_quasi_space([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    with pytest.raises(UnverifiedMetric):
        require_metric(q)


def test_cross_ratio_collinear():
    s = line_space([0, 1, 2, 3])
    assert cross_ratio(s, 0, 1, 2, 3).value == pytest.approx(4.0)
    assert cross_ratio(s, 0, 2, 1, 3).value == pytest.approx(1 / 4)


def test_cross_ratio_with_ideal_infinity():
    e = ExtendedSpace.with_ideal_infinity(line_space([0, 1, 2]))
    inf = e.infinity_index
    assert cross_ratio(e, 0, 1, 2, inf).value == pytest.approx(2.0)
    with pytest.raises(DuplicatePoints):
        cross_ratio(e, 0, 0, 1, 2)


@pytest.mark.parametrize("M", [1e3, 1e6])
def test_infinity_is_limit_of_far_point(M):
    rng = rng_from_seed(3)
    xs = rng.uniform(0, 1, 3)
    e = ExtendedSpace.with_ideal_infinity(line_space(xs))
    far = line_space(np.concatenate([xs, [M]]))
    for q in [(0, 1, 2, 3), (0, 3, 1, 2), (3, 0, 2, 1), (1, 2, 3, 0)]:
        ideal = cross_ratio(e, *q).value
        approx = cross_ratio(far, *q).value
        assert abs(approx - ideal) / ideal <= 2 / M


def test_cross_ratio_scale_invariant():
    s = random_euclidean(6, rng_from_seed(0))
    for c in (1e-3, 7.0, 1e4):
        t = s.rescaled(c)
        for q in [(0, 1, 2, 3), (5, 4, 1, 0), (2, 0, 5, 3)]:
            a, b = cross_ratio(s, *q).value, cross_ratio(t, *q).value
            assert abs(a - b) <= 1e-12 * a


def test_materialized_infinity_is_an_ordinary_point():
    base = line_space([0, 1, 2, 4])
    e = ExtendedSpace(base, 3, "3")
    assert not e.ideal and e.n == 4
    assert cross_ratio(e, 0, 1, 2, 3).value == pytest.approx(2 * 3 / (1 * 2))
