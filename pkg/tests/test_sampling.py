import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from firenet.phantoms import reference_level_model
from firenet.sampling import (
    DEFAULT_SCALE,
    MeasurementOperator,
    SamplingScheme,
    band_counts_MF,
    band_counts_MW,
    band_of_frequency,
    build_bands,
    coherence_table,
    draw_scheme,
    local_coherence,
    sample_allocation,
    scheme_for_fraction,
)
from firenet.sparsity import LevelModel, optimal_weights
from firenet.transforms import fourier_frequencies, haar_level_bounds

from conftest import crandn
from test_transforms import haar_matrix, naive_dft_matrix, walsh_matrix


def test_band_examples():
    b = build_bands("fourier", 2, 1)
    f = fourier_frequencies(4)
    assert sorted(f[b.bands[(1,)]]) == [0, 1]
    assert sorted(f[b.bands[(2,)]]) == [-1, 2]
    w = build_bands("walsh", 3, 1)
    assert sorted(w.bands[(3,)]) == [4, 5, 6, 7]


@pytest.mark.parametrize("kind", ["fourier", "walsh"])
@pytest.mark.parametrize("r,d", [(1, 1), (3, 1), (6, 1), (2, 2), (4, 2)])
def test_bands_partition_grid(kind, r, d):
    b = build_bands(kind, r, d)
    allidx = np.concatenate([b.bands[k] for k in b.keys])
    assert np.array_equal(np.sort(allidx), np.arange(b.N))
    assert sum(b.size(k) for k in b.keys) == b.N


def test_fourier_band_formula():
    r = 5
    b = build_bands("fourier", r, 1)
    f = fourier_frequencies(2**r)
    for k in range(2, r + 1):
        expect = set(range(-(2 ** (k - 1)) + 1, -(2 ** (k - 2)) + 1)) | set(range(2 ** (k - 2) + 1, 2 ** (k - 1) + 1))
        assert set(int(v) for v in f[b.bands[(k,)]]) == expect
    assert band_of_frequency("fourier", 0) == 1 and band_of_frequency("fourier", 1) == 1
    assert band_of_frequency("fourier", -1) == 2 and band_of_frequency("fourier", 2) == 2


def test_bands_reject_bad_d():
    with pytest.raises(ValueError):
        build_bands("fourier", 2, 3)


def test_walsh_counts_are_level_sparsity():
    s = (3, 5, 9, 2)
    for k in range(1, 5):
        assert band_counts_MW(s, (k,)) == s[k - 1]
    assert band_counts_MW(s, (2, 4)) == s[3] * 2.0**-2


def test_fourier_counts_formula():
    s = (3, 5, 9, 2)
    for k in range(1, 5):
        expect = sum(s[j - 1] * 2.0 ** -abs(k - j) for j in range(1, k + 1))
        expect += sum(s[j - 1] * 2.0 ** (-3 * abs(k - j)) for j in range(k + 1, 5))
        assert band_counts_MF(s, (k,)) == pytest.approx(expect, rel=1e-14)


def test_walsh_allocation_proportional_to_sparsity():
    # For d = 1 the Walsh weight is s_k, so m_k = ceil(c s_k) with one constant c
    # on every band that is neither clamped to 1 nor saturated.
    M = haar_level_bounds(12, 1)
    s = (2, 2, 4, 8, 16, 32, 64, 100, 150, 200, 300, 400)
    lm = LevelModel(M, s, optimal_weights(M, s))
    alloc = sample_allocation(lm, "walsh", 1, scale=1e-7)
    lo, hi = 0.0, math.inf
    used = 0
    for k in range(1, 13):
        m = alloc[(k,)]
        if 1 < m < 2 ** max(k - 1, 1):
            lo, hi = max(lo, (m - 1) / s[k - 1]), min(hi, m / s[k - 1])
            used += 1
    assert used >= 6
    assert lo < hi


def test_allocation_saturates():
    lm = reference_level_model(4, 2)
    alloc = sample_allocation(lm, "fourier", 2, scale=1e6)
    band = build_bands("fourier", 4, 2)
    assert all(alloc[k] == band.size(k) for k in band.keys)
    with pytest.raises(ValueError):
        sample_allocation(LevelModel((2, 4), (1, 1)), "fourier", 2)


def test_default_scale_gives_fifteen_percent_at_256():
    lm = reference_level_model(8, 2)
    alloc = sample_allocation(lm, "fourier", 2, 0.01, DEFAULT_SCALE)
    frac = sum(alloc.values()) / 256**2
    assert 0.145 <= frac <= 0.155


def test_full_levels_option():
    lm = reference_level_model(6, 2)
    alloc = sample_allocation(lm, "fourier", 2, scale=1e-9, full_levels=3)
    band = build_bands("fourier", 6, 2)
    for k in band.keys:
        if max(k) <= 3:
            assert alloc[k] == band.size(k)
        else:
            assert alloc[k] == 1


def test_draw_scheme_examples():
    band = build_bands("fourier", 3, 2)
    full = {k: band.size(k) for k in band.keys}
    sch = draw_scheme(band, full, 1)
    assert np.array_equal(np.sort(sch.indices), np.arange(band.N))
    assert np.all(sch.scaling == 1.0)
    part = {k: max(1, band.size(k) // 3) for k in band.keys}
    a, b = draw_scheme(band, part, 5), draw_scheme(band, part, 5)
    assert np.array_equal(a.indices, b.indices)
    lookup = {}
    for k in band.keys:
        for i in band.bands[k]:
            lookup[int(i)] = k
    counts = {}
    for i in a.indices:
        counts[lookup[int(i)]] = counts.get(lookup[int(i)], 0) + 1
    assert counts == part
    for k in band.keys:
        mask = np.isin(a.indices, band.bands[k])
        assert np.allclose(a.scaling[mask], math.sqrt(band.size(k) / part[k]))


def test_draw_scheme_errors():
    band = build_bands("walsh", 2, 1)
    with pytest.raises(ValueError):
        draw_scheme(band, {(1,): 0, (2,): 1})
    with pytest.raises(ValueError):
        draw_scheme(band, {(1,): 3, (2,): 1})
    with pytest.raises(ValueError):
        draw_scheme(band, {(1,): 1})


def test_draw_without_replacement_and_compensation():
    band = build_bands("fourier", 4, 2)
    part = {k: max(1, band.size(k) // 2) for k in band.keys}
    sch = draw_scheme(band, part, 3, replacement=False, compensate=False)
    assert np.unique(sch.indices).size == sch.m
    assert np.all(sch.scaling == 1.0)
    assert MeasurementOperator(sch).norm().value == pytest.approx(1.0, abs=1e-8)


def test_scheme_json_roundtrip():
    band = build_bands("fourier", 3, 2)
    part = {k: max(1, band.size(k) // 2) for k in band.keys}
    sch = draw_scheme(band, part, 9)
    data = sch.to_dict()
    assert {"kind", "r", "d", "seed", "m_per_band", "indices"} <= set(data)
    back = SamplingScheme.from_json(sch.to_json())
    assert np.array_equal(back.indices, sch.indices)
    assert np.array_equal(back.scaling, sch.scaling)
    assert back.m_per_band == sch.m_per_band


def test_scheme_for_fraction():
    lm = reference_level_model(6, 2)
    sch, scale = scheme_for_fraction(lm, "fourier", 2, 0.25, 0)
    assert abs(sch.fraction - 0.25) < 0.01
    full, _ = scheme_for_fraction(lm, "fourier", 2, 1.0, 0)
    assert full.m == full.band.N


def dense_oracle(sch):
    r, d = sch.band.r, sch.band.d
    K = 2**r
    V = naive_dft_matrix(K) if sch.band.kind == "fourier" else walsh_matrix(r)
    if d == 2:
        V = np.kron(V, V)
    Psi = haar_matrix(r, d)
    U = V @ Psi.T
    return sch.scaling[:, None] * U[sch.indices]


@pytest.mark.parametrize("kind", ["fourier", "walsh"])
@pytest.mark.parametrize("r,d", [(4, 1), (2, 2)])
def test_operator_matches_dense_oracle(kind, r, d, rng):
    band = build_bands(kind, r, d)
    part = {k: max(1, (band.size(k) * 2) // 3) for k in band.keys}
    sch = draw_scheme(band, part, 4)
    op = MeasurementOperator(sch)
    A = dense_oracle(sch)
    x = crandn(rng, band.N)
    assert np.allclose(op.forward(x), A @ x, atol=1e-12)
    y = crandn(rng, sch.m)
    assert np.allclose(op.adjoint(y), A.conj().T @ y, atol=1e-12)
    assert np.allclose(op.dense(), A, atol=1e-12)
    # Norm estimate against the dense oracle and the scaling bound.
    assert op.norm().value == pytest.approx(np.linalg.norm(A, 2), rel=1e-6)


@given(st.sampled_from(["fourier", "walsh"]), st.integers(0, 2**31), st.booleans())
def test_adjoint_pair(kind, seed, image_domain):
    g = np.random.default_rng(seed)
    band = build_bands(kind, 3, 2)
    part = {k: int(g.integers(1, band.size(k) + 1)) for k in band.keys}
    op = MeasurementOperator(draw_scheme(band, part, seed), "image" if image_domain else "coeffs")
    f, h = crandn(g, *op.domain_shape), crandn(g, *op.range_shape)
    lhs, rhs = np.vdot(h, op.forward(f)), np.vdot(op.adjoint(h), f)
    assert abs(lhs - rhs) <= 1e-11 * abs(lhs)
    # Rows of U are orthonormal, so ||A||**2 is the largest summed D_ii**2 over repeats of one frequency.
    exact = math.sqrt(np.max(np.bincount(op.scheme.indices, op.scheme.scaling**2)))
    assert op.norm().value == pytest.approx(exact, rel=1e-6)
    if np.unique(op.scheme.indices).size == op.scheme.m:
        assert op.norm().value <= op.scheme.scaling.max() + 1e-8


@pytest.mark.parametrize("kind", ["fourier", "walsh"])
def test_full_sampling_is_unitary(kind, rng):
    band = build_bands(kind, 3, 2)
    op = MeasurementOperator(draw_scheme(band, {k: band.size(k) for k in band.keys}, 0))
    x = crandn(rng, band.N)
    assert np.linalg.norm(op.forward(x)) == pytest.approx(np.linalg.norm(x), rel=1e-12)
    assert np.allclose(op.adjoint(op.forward(x)), x, atol=1e-12)
    assert op.norm().value == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(op.forward(np.zeros(band.N)), 0)


def test_operator_dimension_errors():
    band = build_bands("walsh", 2, 1)
    op = MeasurementOperator(draw_scheme(band, {k: band.size(k) for k in band.keys}, 0))
    with pytest.raises(ValueError):
        op.forward(np.ones(3))
    with pytest.raises(ValueError):
        op.adjoint(np.ones(5))


@pytest.mark.parametrize("r", [3, 4, 5])
def test_walsh_coherence_pattern(r):
    tab = coherence_table("walsh", r, 1)
    for (k, j), mu in tab.items():
        if max(k) == j:
            assert mu > 0
            # Each matching-band inner product has modulus 2**(-(j-1)/2).
            # |<psi, rho_omega>| = 2**(-(j-1)/2) on B_j, so mu = |B_j| 2**(1-j) = 1;
            # the coarse block pairs B_1 with two unit inner products, so mu = 2.
            assert mu == pytest.approx(2.0 if j == 1 else 1.0, rel=1e-12)
        else:
            assert mu < 1e-24
    assert local_coherence("walsh", r, 1, (2,), 2) == pytest.approx(1.0)


def test_coherence_size_guard():
    with pytest.raises(ValueError):
        coherence_table("fourier", 7, 2)
