import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aplab.constructions import (
    IntegerSet,
    SelfSimilarMeasure,
    behrend_set,
    behrend_trend,
    count_nontrivial_3aps,
    default_depth,
    discretize,
    discretize_tolerance_band,
    embedding_prime,
    is_ap_free,
    max_ap_free_oracle,
    random_set,
    self_similar_fourier,
)
from aplab.group_fourier import GridDensity, dual_transform, lambda3, trivial_ap_contribution

# r_3(N) for N = 1..32, frozen from an independent exhaustive search
R3 = [1, 2, 2, 3, 4, 4, 4, 4, 5, 5, 6, 6, 7, 8, 8, 8, 8, 8, 8, 9, 9, 9, 9, 10, 10, 11, 11, 11, 11, 12, 12, 13]


def brute_r3(n):
    for k in range(n, 0, -1):
        for c in combinations(range(n), k):
            s = set(c)
            if not any(2 * b - a in s for a in c for b in c if b > a):
                return k
    return 0


# ------------------------------------------------------------------ sets


def test_integer_set_invariants_and_text(tmp_path):
    E = IntegerSet(10, [5, 1, 1, 3])
    assert E.elements.tolist() == [1, 3, 5]
    assert E.density == pytest.approx(0.3)
    assert IntegerSet.from_text(E.to_text(), 10).elements.tolist() == [1, 3, 5]
    with pytest.raises(ValueError):
        IntegerSet(4, [4])


@pytest.mark.parametrize("N", range(1, 13))
def test_oracle_matches_brute_force(N):
    assert max_ap_free_oracle(N) == brute_r3(N)


def test_oracle_frozen_values_and_monotone():
    vals = [max_ap_free_oracle(N) for N in range(1, 33)]
    assert vals == R3
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert max_ap_free_oracle(5) == 4 and is_ap_free([0, 1, 3, 4])
    with pytest.raises(ValueError, match="behrend_set"):
        max_ap_free_oracle(33)


@pytest.mark.parametrize("N", [3, 9, 50, 200, 1000])
def test_behrend_small_is_ap_free(N):
    E = behrend_set(N)
    assert is_ap_free(E.elements)
    assert count_nontrivial_3aps(E.elements) == 0
    assert E.elements.max() < N


def test_behrend_n9_within_oracle():
    assert len(behrend_set(9)) <= max_ap_free_oracle(9) == 5


def test_behrend_integer_count_identity():
    # normalized indicator on Z_p with p >= 2N + 1: only trivial progressions remain
    N = 400
    E = behrend_set(N)
    p = embedding_prime(N)
    delta = len(E) / p
    lam = lambda3(GridDensity(E.indicator(p).values / delta))
    assert lam == pytest.approx(trivial_ap_contribution(len(E), p), rel=1e-9)


def test_behrend_trend_size_at_1e3():
    E = behrend_set(1000)
    assert len(E) >= 0.5 * behrend_trend(1000)


def test_count_nontrivial_3aps_small():
    assert count_nontrivial_3aps([0, 1, 2]) == 1
    assert count_nontrivial_3aps([0, 1, 2, 3, 4]) == 4
    assert is_ap_free([0, 1, 3, 4, 9, 10, 12, 13])


def test_embedding_prime():
    assert embedding_prime(10) == 23
    assert embedding_prime(1000) == 2003


def test_random_set_properties():
    assert len(random_set(50, 1.0, 3)) == 50
    assert np.array_equal(random_set(100, 0.5, 7).elements, random_set(100, 0.5, 7).elements)
    E = random_set(10_000, 0.3, 11)
    sigma = math.sqrt(0.3 * 0.7 / 10_000)
    assert abs(E.density - 0.3) <= 5 * sigma
    with pytest.raises(ValueError):
        random_set(10, 0.0, 1)


# ------------------------------------------------------------------ measures


def test_measure_validation_and_toml(tmp_path):
    mt = SelfSimilarMeasure.middle_thirds()
    assert mt.similarity_dimension == pytest.approx(math.log(2) / math.log(3))
    p = tmp_path / "m.toml"
    p.write_text(mt.to_toml())
    assert SelfSimilarMeasure.from_toml(p) == mt
    with pytest.raises(ValueError):
        SelfSimilarMeasure(3, (0, 2), (0.6, 0.6))
    with pytest.raises(ValueError):
        SelfSimilarMeasure(3, (0, 3), (0.5, 0.5))


def test_fourier_zero_and_self_similarity():
    mt = SelfSimilarMeasure.middle_thirds()
    assert self_similar_fourier(mt, 0.0) == pytest.approx(1.0)
    base = abs(mt.fourier(1.0))
    for m in range(9):
        assert abs(mt.fourier(3.0**m)) == pytest.approx(base, rel=1e-9)


def test_fourier_lebesgue_closed_form():
    leb = SelfSimilarMeasure.lebesgue(2)
    xi = np.array([0.3, 0.5, 1.7, 2.5])
    exact = np.exp(-1j * np.pi * xi) * np.sinc(xi)
    assert np.allclose(leb.fourier(xi), exact, atol=1e-10)
    assert np.allclose(leb.fourier(np.array([1.0, 2.0, 5.0])), 0.0, atol=1e-10)


def test_fourier_depth_tail_bound():
    mt = SelfSimilarMeasure.middle_thirds()
    xi = 17.3
    K = 6
    gap = abs(self_similar_fourier(mt, xi, K + 1) - self_similar_fourier(mt, xi, K))
    assert gap <= 2 * np.pi * xi * 3.0**-K
    assert default_depth(3, 1000) >= math.ceil(math.log(1000, 3))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-200, 200), min_size=2, max_size=6))
def test_fourier_bounded_hermitian_positive_definite(xs):
    mt = SelfSimilarMeasure(4, (0, 1, 3), (0.2, 0.5, 0.3))
    x = np.array(xs)
    v = mt.fourier(x)
    assert np.all(np.abs(v) <= 1 + 1e-12)
    assert np.allclose(mt.fourier(-x), np.conj(v))
    gram = mt.fourier(x[:, None] - x[None, :])
    assert np.linalg.eigvalsh((gram + gram.conj().T) / 2).min() >= -1e-9


def test_fourier_2d_product():
    m2 = SelfSimilarMeasure.middle_thirds(2)
    m1 = SelfSimilarMeasure.middle_thirds(1)
    xi = np.array([[2.0, 5.0], [1.0, -3.0]])
    assert np.allclose(m2.fourier(xi), m1.fourier(xi[:, 0]) * m1.fourier(xi[:, 1]))


def test_discretize_cases():
    mt = SelfSimilarMeasure.middle_thirds()
    f0 = discretize(mt, 27, 0)
    assert f0.values[0] == pytest.approx(27) and np.count_nonzero(f0.values) == 1
    leb = discretize(SelfSimilarMeasure.lebesgue(3), 27, 3)
    assert np.allclose(leb.values, 1.0)
    f = discretize(SelfSimilarMeasure.middle_thirds(2), 27, 3)
    assert f.l1_mass() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        discretize(mt, 10, 3)


def test_discretize_low_frequency_spectrum():
    mt = SelfSimilarMeasure.middle_thirds()
    N = 3**8
    f = discretize(mt, N, 8)
    F = dual_transform(f).coeffs
    band = int(discretize_tolerance_band(mt, N, 8))
    xi = np.arange(-band, band + 1)
    exact = mt.fourier(xi.astype(float))
    assert band >= 1
    assert np.max(np.abs(F[xi % N] - exact)) <= 0.02
