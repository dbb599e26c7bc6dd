from fractions import Fraction

import numpy as np
import pytest

from umt.cantor import CantorSpace, exponent_matrix, materialize
from umt.embed import (
    block_code,
    block_width,
    code_words,
    embed_compact,
    embed_unbounded,
    quantize_level,
    uniformize,
)
from umt.errors import AlphabetTooSmall, DegenerateInput, InvalidParams, NotUltrametric
from umt.generators import (
    clustered_line,
    line_space,
    random_loguniform_ultrametric,
    random_ultrametric,
    rng_from_seed,
)
from umt.metric import make_space
from umt.props import disconnectedness_modulus
from umt.ultrametrize import build_dendrogram, ultrametrization_distortion


def equilateral(n, side=1.0):
    return make_space(np.full((n, n), side) - side * np.eye(n))


def test_quantize_level():
    half = Fraction(1, 2)
    assert quantize_level(Fraction(1), half) == 0
    assert quantize_level(Fraction(1, 3), half) == 2
    assert quantize_level(Fraction(1, 4), half) == 2  # boundary is inclusive
    assert quantize_level(Fraction(1, 4) + Fraction(1, 10**12), half) == 2
    assert quantize_level(Fraction(1, 4) - Fraction(1, 10**12), half) == 3
    with pytest.raises(ValueError):
        quantize_level(Fraction(2), half)


def test_blocks():
    assert [block_width(m, 2) for m in (1, 2, 3, 4, 5, 8, 9)] == [1, 1, 2, 2, 3, 3, 4]
    assert block_width(5, 5) == 1
    assert [block_code(i, 2, 3) for i in range(4)] == [(0, 0), (0, 1), (0, 2), (1, 0)]


def test_cantor_input_is_reproduced():
    F = materialize(CantorSpace.full(2, 3, "1/2"))
    res = embed_compact(F, 2, "1/2")
    assert res.report.L_bilip.value == 1
    assert res.report.K_qm.value == 1
    img = materialize(res.target)
    assert np.array_equal(img.dist, F.dist)


def test_alphabet_too_small():
    with pytest.raises(AlphabetTooSmall) as exc:
        embed_compact(equilateral(5), 4, "1/2")
    assert exc.value.minimal_k == 5
    assert embed_compact(equilateral(5), 5, "1/2").report.L_bilip.value == 1
    res = embed_compact(equilateral(5), 2, "1/2", mode="expand-depth")
    assert res.target.depth == 3


def test_quantization_example():
    X = make_space([[0, 1, 1], [1, 0, 1 / 3], [1, 1 / 3, 0]])
    res = embed_compact(X, 2, "1/2")
    img = materialize(res.target)
    assert img.d(1, 2) == 0.25
    assert res.report.L_bilip.value == pytest.approx(4 / 3)
    assert res.report.L_bilip.value <= 2


def test_exact_level_sandwich():
    for seed in range(30):
        rng = rng_from_seed(seed)
        X = random_loguniform_ultrametric(int(rng.integers(2, 30)), rng, lo=1e-2, hi=1.0, max_branch=3)
        try:
            res = embed_compact(X, 3, "1/2")
        except AlphabetTooSmall as exc:
            assert exc.minimal_k > 3
            continue
        lam = Fraction(1, 2)
        E = exponent_matrix(res.target, "rho")
        D = X.exact_matrix()
        for i in range(X.n):
            for j in range(i + 1, X.n):
                r = lam ** int(E[i, j])
                assert lam * D[i, j] < r <= D[i, j]
        assert bilip_exact(res) <= 2


def bilip_exact(res):
    from umt.distort import bilipschitz_of_map

    return bilipschitz_of_map(res.map, exact=True).exact


def test_rescaling_is_recorded():
    X = random_ultrametric(10, rng_from_seed(0), top=-5)
    res = embed_compact(X, 4, "1/2")
    assert res.stage_constants["scale"] == Fraction(32)
    assert res.report.L_bilip.value == 1


def test_expand_depth_bound():
    for seed in range(30):
        rng = rng_from_seed(seed)
        X = random_loguniform_ultrametric(int(rng.integers(3, 40)), rng, max_branch=6)
        for k in (2, 3):
            res = embed_compact(X, k, "1/2", mode="expand-depth", full_report=False)
            assert bilip_exact(res) <= res.stage_constants["bound"]


def test_expand_depth_bound_without_drift_matches_block_formula():
    X = random_ultrametric(40, rng_from_seed(2), max_branch=5, max_step=3)
    words, depth, root = code_words(X, 2, Fraction(1, 2), "expand-depth")
    drift = any(v.start != v.level for v in root.walk() if not v.is_leaf)
    res = embed_compact(X, 2, "1/2", mode="expand-depth", full_report=False)
    if not drift:
        widest = max(block_width(len(v.children), 2) for v in root.walk() if not v.is_leaf)
        assert res.stage_constants["bound"] == 2 ** widest


def test_injective_and_relabeling_invariant():
    rng = rng_from_seed(5)
    for _ in range(10):
        X = random_ultrametric(15, rng, max_branch=3)
        res = embed_compact(X, 3, "1/2")
        assert len(set(res.words)) == X.n
        perm = rng.permutation(X.n)
        Y = X.subspace(perm.tolist())
        res2 = embed_compact(Y, 3, "1/2")
        a = materialize(res.target).dist[np.ix_(perm, perm)]
        assert np.array_equal(a, materialize(res2.target).dist)


def test_not_ultrametric():
    with pytest.raises(NotUltrametric):
        embed_compact(line_space([0, 1, 2]), 2, "1/2")
    with pytest.raises(InvalidParams):
        embed_compact(equilateral(3), 2, "1/2", mode="nope")


def test_single_point():
    res = embed_compact(make_space([[0]]), 2, "1/2")
    assert len(res.words) == 1


# --------------------------------------------------------------- unbounded

def test_unbounded_small_diameter_is_trivial():
    X = random_ultrametric(12, rng_from_seed(1), top=1, max_branch=3)
    res = embed_unbounded(X, 0, 3, "1/2")
    assert res.stage_constants["L_total"] == pytest.approx(res.stage_constants["L_stage"])
    assert all(w != res.target.base for w in res.words)


def test_unbounded_example_powers_of_four():
    X = make_space([[0, 1, 4, 16], [1, 0, 4, 16], [4, 4, 0, 16], [16, 16, 16, 0]])
    # the extension's root splits {0}, {1}, {2, 3, inf}
    with pytest.raises(AlphabetTooSmall):
        embed_unbounded(X, 0, 2, "1/2")
    res = embed_unbounded(X, 0, 3, "1/2")
    c = res.stage_constants
    assert c["L_total"] <= c["L_stage"] ** 3 * (1 + 1e-9)


def test_unbounded_cube_bound():
    for seed in range(20):
        rng = rng_from_seed(seed)
        X = random_loguniform_ultrametric(int(rng.integers(2, 20)), rng, max_branch=3)
        res = embed_unbounded(X, int(rng.integers(0, X.n)), 2, "1/2", mode="expand-depth", full_report=False)
        c = res.stage_constants
        assert c["L_total"] <= c["L_stage"] ** 3 * (1 + 1e-9)


def test_rotation_sends_infinity_to_base():
    X = random_ultrametric(8, rng_from_seed(4), top=-3, max_branch=3)
    res = embed_unbounded(X, 2, 3, "1/2")
    assert res.target.base not in res.words
    assert res.stage_constants["infinity_word"] != ""


# ---------------------------------------------------------------- uniformize

def test_uniformize_fixed_point():
    F = materialize(CantorSpace.full(2, 3, "1/2"))
    res = uniformize(F, "bounded")
    assert res.report.L_bilip.value == 1 and res.report.K_qm.value == 1


def test_uniformize_line_reports_large_l1():
    X = line_space(np.arange(12.0))
    res = uniformize(X, "bounded")
    mu = disconnectedness_modulus(X).mu
    assert res.stage_constants["L1"] == pytest.approx(ultrametrization_distortion(X))
    assert res.stage_constants["L1"] <= 1 / mu + 1e-9
    assert res.stage_constants["L1"] == pytest.approx(11)


def test_uniformize_three_adic_clusters():
    pts = [0, 1, 2, 9, 10, 11, 18, 19, 20]
    X = line_space(pts)
    for mode in ("bounded", "unbounded"):
        res = uniformize(X, mode, lam="1/2")
        assert np.isfinite(res.report.H_qs.value)
        assert np.isfinite(res.report.K_qm.value)
    assert np.isfinite(res.stage_constants["K_qm_rho"])


def test_uniformize_clustered_inputs():
    for seed in range(3):
        X = clustered_line(rng_from_seed(seed))
        res = uniformize(X, "unbounded")
        assert res.stage_constants["L1"] <= 1 / res.properties.modulus.mu + 1e-9


def test_uniformize_lambda_adic_is_distortion_free():
    X = random_ultrametric(12, rng_from_seed(3), max_branch=2)
    res = uniformize(X, "bounded")
    assert res.report.L_bilip.value == 1 and res.report.K_qm.value == pytest.approx(1)


def test_uniformize_degenerate():
    with pytest.raises(DegenerateInput):
        uniformize(make_space([[0]]))
    with pytest.raises(InvalidParams):
        uniformize(equilateral(3), "sideways")


def test_result_serialization():
    res = embed_compact(equilateral(3), 3, "1/2")
    d = res.to_dict()
    assert set(d) == {"target", "assignment", "report", "stage_constants"}
    assert d["assignment"] == {"0": "0", "1": "1", "2": "2"}
