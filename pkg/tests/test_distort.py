import itertools
from fractions import Fraction

import numpy as np
import pytest

from tests.helpers import chordal_identity, rho_to_sigma
from tests.oracles import exact_cross_scan, weak_qm_oracle, weak_qs_oracle
from umt.distort import (
    PointMap,
    bilipschitz_of_map,
    compose,
    distortion_report,
    is_mobius,
    weak_qm_constant,
    weak_qs_constant,
)
from umt.errors import InvalidMap, ScanTooLarge, TooFewPoints
from umt.generators import (
    line_space,
    random_euclidean,
    random_loguniform_ultrametric,
    random_ultrametric,
    rng_from_seed,
)
from umt.metric import ExtendedSpace, make_space
from umt.ultrametrize import subdominant_ultrametric


def identity(X, Y):
    return PointMap.identity(X, Y)


def perturbed(X, i=0, j=1, factor=1.5):
    d = np.array(X.dist)
    d[i, j] *= factor
    d[j, i] *= factor
    return make_space(d, X.labels, check_triangle=False)


# ---------------------------------------------------------------- maps

def test_point_map_validation():
    X = line_space([0, 1, 2])
    with pytest.raises(InvalidMap):
        PointMap(X, X, (0, 0, 1))
    with pytest.raises(InvalidMap):
        PointMap(X, X, (0, 1))
    with pytest.raises(InvalidMap):
        PointMap.from_labels(X, X, {"0": "0", "1": "1"})
    sub = X.subspace([0, 1])
    f = PointMap(sub, X, (0, 2))  # injective, not onto
    assert not f.bijective
    assert f.labels_dict() == {"0": "0", "1": "2"}


def test_compose():
    X, Y, Z = (random_euclidean(5, rng_from_seed(s)) for s in range(3))
    h = compose(identity(X, Y), PointMap(Y, Z, (4, 3, 2, 1, 0)))
    assert h.assignment == (4, 3, 2, 1, 0)


# ------------------------------------------------------------ bilipschitz

def test_bilipschitz_examples():
    X = random_euclidean(6, rng_from_seed(0))
    assert bilipschitz_of_map(identity(X, X)).value == 1
    assert bilipschitz_of_map(identity(X, X.rescaled(2))).value == pytest.approx(2)
    assert bilipschitz_of_map(identity(X, X.rescaled(0.25))).value == pytest.approx(4)
    line = line_space([0, 1, 3])
    m = bilipschitz_of_map(identity(line, subdominant_ultrametric(line)))
    assert m.value == pytest.approx(1.5) and set(m.witness) == {0, 2}


def test_bilipschitz_exact():
    X = random_ultrametric(7, rng_from_seed(1), Fraction(1, 3))
    m = bilipschitz_of_map(identity(X, X.rescaled(Fraction(3, 7))), exact=True)
    assert m.exact == Fraction(7, 3)


def test_bilipschitz_skips_infinity():
    f = chordal_identity(random_loguniform_ultrametric(6, rng_from_seed(2)), 0)
    assert f.source.infinity_index not in bilipschitz_of_map(f).witness


# ----------------------------------------------------------------- weak QS

def test_weak_qs_examples():
    X = random_euclidean(7, rng_from_seed(3))
    assert weak_qs_constant(identity(X, X))[0].value == 1
    assert weak_qs_constant(identity(X, X.rescaled(9.0)))[0].value == pytest.approx(1)
    line = line_space([0, 1, 2, 3])
    sub = subdominant_ultrametric(line)
    assert weak_qs_constant(identity(line, sub))[0].value == pytest.approx(1)
    m, _ = weak_qs_constant(identity(sub, line))
    assert m.value == pytest.approx(3)
    x, y, z = m.witness
    assert line.d(x, z) / line.d(x, y) == pytest.approx(3)


def test_weak_qs_matches_triple_scan():
    for seed in range(25):
        rng = rng_from_seed(seed)
        X, Y = random_euclidean(6, rng), random_euclidean(6, rng)
        m, steps = weak_qs_constant(identity(X, Y))
        assert m.value == pytest.approx(weak_qs_oracle(X.dist, Y.dist), rel=1e-12)
        assert steps.out_ratio.max() == pytest.approx(max(m.raw, steps.out_ratio.max()))
        assert np.all(steps.in_ratio <= 1.0)


def test_step_data_majorant():
    X, Y = random_euclidean(8, rng_from_seed(4)), random_euclidean(8, rng_from_seed(5))
    m, steps = weak_qs_constant(identity(X, Y))
    assert steps.majorized_by(lambda t: np.full_like(t, m.raw))
    assert not steps.majorized_by(lambda t: np.full_like(t, m.raw * 0.99))


# ----------------------------------------------------------------- weak QM

def test_weak_qm_matches_quadruple_scan():
    for seed in range(15):
        rng = rng_from_seed(seed)
        X, Y = random_euclidean(6, rng), random_euclidean(6, rng)
        m, _ = weak_qm_constant(identity(X, Y))
        assert m.value == pytest.approx(weak_qm_oracle(X.dist, Y.dist), rel=1e-12)


def test_weak_qm_exact_agrees_with_float():
    X = random_ultrametric(6, rng_from_seed(6))
    Y = random_ultrametric(6, rng_from_seed(7))
    fl, _ = weak_qm_constant(identity(X, Y))
    ex, _ = weak_qm_constant(identity(X, Y), exact=True)
    assert ex.value == pytest.approx(fl.value, rel=1e-12)
    assert isinstance(ex.exact, Fraction)


def test_lemma_maps_have_unit_qm_constant():
    f = chordal_identity(random_loguniform_ultrametric(9, rng_from_seed(8)), 3)
    m, steps = weak_qm_constant(f)
    assert abs(m.value - 1) <= 1e-9 and steps.on_diagonal(1e-9)
    g = rho_to_sigma(2, 3)
    m, steps = weak_qm_constant(g, exact=True)
    assert m.exact == 1 and steps.on_diagonal(0.0)


def test_scan_limits():
    X = random_euclidean(70, rng_from_seed(9))
    f = identity(X, X.rescaled(3.0))
    with pytest.raises(ScanTooLarge):
        weak_qm_constant(f)
    m, _ = weak_qm_constant(f, force=True, step_data=False)
    assert m.lower_bound and m.value == pytest.approx(1)
    assert is_mobius(f, force=True).lower_bound
    with pytest.raises(TooFewPoints):
        weak_qm_constant(identity(line_space([0, 1, 2]), line_space([0, 1, 2])))


def test_sampled_scan_is_deterministic():
    X, Y = random_euclidean(65, rng_from_seed(1)), random_euclidean(65, rng_from_seed(2))
    f = identity(X, Y)
    a, _ = weak_qm_constant(f, force=True, step_data=False, seed=3)
    b, _ = weak_qm_constant(f, force=True, step_data=False, seed=3)
    assert a == b


# ------------------------------------------------------------------ Mobius

def test_lemma_31_chordal_identity_is_mobius():
    for seed in range(10):
        rng = rng_from_seed(seed)
        X = random_loguniform_ultrametric(int(rng.integers(4, 15)), rng)
        r = is_mobius(chordal_identity(X, int(rng.integers(0, X.n))), 1e-9)
        assert r.is_mobius and r.max_deviation <= 1e-9


def test_lemma_31_exact_with_exact_inputs():
    X = random_ultrametric(10, rng_from_seed(3), Fraction(1, 3), top=-4)
    assert is_mobius(chordal_identity(X, 0), 0).is_mobius


@pytest.mark.parametrize("k,depth", [(2, 2), (2, 3), (3, 2)])
def test_lemma_32_rho_to_sigma_is_mobius(k, depth):
    f = rho_to_sigma(k, depth, "1/3")
    assert is_mobius(f, 0).is_mobius
    assert is_mobius(f, 1e-12).is_mobius


def test_perturbation_is_caught():
    X = random_ultrametric(7, rng_from_seed(4))
    f = identity(X, perturbed(X))
    for tol in (1e-9, 0):
        r = is_mobius(f, tol)
        assert not r.is_mobius and len(r.witness) == 4
        assert 0 in r.witness or 1 in r.witness


def test_exact_certificate_matches_full_scan():
    rng = np.random.default_rng(0)
    for seed in range(12):
        X = random_ultrametric(6, rng_from_seed(seed), Fraction(1, 2), top=-2)
        if seed % 3 == 0:
            Y = X.rescaled(Fraction(5, 3))
        elif seed % 3 == 1:
            Y = perturbed(X, *sorted(rng.choice(6, 2, replace=False)))
        else:
            Y = chordal_identity(X, 1).target.base.subspace(range(6))
        f = identity(X, Y)
        S, T = f.pair_matrices(range(6), exact=True, cross=True)
        worst = exact_cross_scan(S.tolist(), T.tolist())
        assert is_mobius(f, 0).is_mobius == (worst == 0)


def test_tol_zero_on_float_inputs_is_strict():
    # float-built spaces are compared at their rounded values
    X = random_loguniform_ultrametric(6, rng_from_seed(0))
    f = chordal_identity(X, 0)
    assert is_mobius(f, 1e-9).is_mobius
    assert is_mobius(f, 0).max_deviation < 1e-12


# ------------------------------------------------------------- invariants

def test_bilipschitz_submultiplicative():
    for seed in range(40):
        rng = rng_from_seed(seed)
        X, Y, Z = (random_euclidean(6, rng) for _ in range(3))
        f, g = identity(X, Y), identity(Y, Z)
        h = compose(f, g)
        assert bilipschitz_of_map(h).value <= bilipschitz_of_map(f).value * bilipschitz_of_map(g).value * (1 + 1e-12)


def test_qm_constant_invariant_under_mobius_composition():
    for seed in range(10):
        rng = rng_from_seed(seed)
        X, Y = random_euclidean(6, rng), random_euclidean(6, rng)
        f = identity(X, Y)
        mob = identity(Y, Y.rescaled(float(rng.uniform(0.1, 10))))
        assert weak_qm_constant(compose(f, mob))[0].value == pytest.approx(weak_qm_constant(f)[0].value, rel=1e-12)


def test_infinity_preserving_maps_have_finite_qs():
    for seed in range(8):
        rng = rng_from_seed(seed)
        X = ExtendedSpace.with_ideal_infinity(random_euclidean(6, rng))
        Y = ExtendedSpace.with_ideal_infinity(random_euclidean(6, rng))
        f = PointMap(X, Y, tuple(range(7)))
        assert f.preserves_infinity
        K = weak_qm_constant(f)[0].value
        H = weak_qs_constant(f)[0].value
        assert np.isfinite(K) and np.isfinite(H)


def test_scaling_invariance():
    X, Y = random_euclidean(7, rng_from_seed(1)), random_euclidean(7, rng_from_seed(2))
    base = distortion_report(identity(X, Y))
    for c in (0.01, 3.0):
        for f in (identity(X.rescaled(c), Y), identity(X, Y.rescaled(c))):
            rep = distortion_report(f)
            assert rep.H_qs.value == pytest.approx(base.H_qs.value, rel=1e-12)
            assert rep.K_qm.value == pytest.approx(base.K_qm.value, rel=1e-12)
    L = bilipschitz_of_map(identity(X, X.rescaled(5.0))).value
    assert L == pytest.approx(5.0)


def test_report_serialization():
    X = random_euclidean(5, rng_from_seed(0))
    rep = distortion_report(identity(X, X))
    d = rep.to_dict(steps=True)
    assert d["mobius"]["mobius"] is True
    assert d["L_bilip"]["value"] == 1
    assert set(d) == {"L_bilip", "H_qs", "K_qm", "mobius", "qs_steps", "qm_steps"}
