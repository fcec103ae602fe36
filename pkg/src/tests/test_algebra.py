import math
from fractions import Fraction

import numpy as np
import pytest

from rkhs.algebra import (
    CombineOp,
    FiniteFrame,
    FrameDivergenceError,
    FrameKernel,
    MonomialFrame,
    combine,
    is_orthonormal_frame,
    kernel_from_frame,
    optimal_decomposition,
    power,
    series_of,
    sum_rkhs_norm,
)
from rkhs.core import (
    DomainTag,
    PointSet,
    Power,
    Scaled,
    Series,
    SeriesKernel,
    bargmann,
    bergman,
    constant,
    gram,
    half_plane,
    inverse_power,
    kernel_from_descriptor,
    psd_check,
    szego,
)

rng = np.random.default_rng(3)


def random_disk(n, radius):
    return PointSet(radius * np.sqrt(rng.uniform(size=n)) * np.exp(2j * np.pi * rng.uniform(size=n)),
                    DomainTag.DISK)


pts = random_disk(12, 0.8)


def relative_gap(a, b):
    return np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))


def test_combine_matches_entrywise_operations():
    G1, G2 = gram(szego(), pts).entries, gram(bergman(), pts).entries
    assert relative_gap(gram(combine(CombineOp.SUM, szego(), bergman()), pts).entries, G1 + G2) <= 1e-12
    assert relative_gap(gram(combine("product", szego(), bergman()), pts).entries, G1 * G2) <= 1e-12


def test_combined_kernels_stay_psd():
    kernels = [szego(), bergman(), bargmann()]
    for K in kernels:
        for L in kernels:
            for op in CombineOp:
                for _ in range(3):
                    sample = random_disk(15, 0.9)
                    assert psd_check(gram(combine(op, K, L), sample)).psd


def test_power_closed_forms_match_power_node():
    for K in (szego(), bergman(), bargmann(2), Series(SeriesKernel.rising(1))):
        for n in (1, 2, 3):
            closed = gram(power(K, n), pts).entries
            node = gram(Power(K, n), pts).entries
            assert relative_gap(closed, node) <= 1e-10
    assert power(szego(), 2).to_descriptor() == inverse_power(2).to_descriptor()
    with pytest.raises(ValueError):
        power(szego(), 0)


def test_series_of():
    assert series_of(combine("product", szego(), szego())) == SeriesKernel.rising(2)
    with pytest.raises(ValueError):
        series_of(half_plane())


def test_monomial_frame_reproduces_its_kernel():
    inner = random_disk(10, 0.7)
    frame = MonomialFrame(SeriesKernel.rising(1))
    K = kernel_from_frame(frame, 200, check_points=inner)
    assert relative_gap(gram(K, inner).entries, gram(szego(), inner).entries) <= 1e-12
    assert is_orthonormal_frame(frame, SeriesKernel.rising(1), 30)


def test_frame_kernel_descriptor_roundtrip():
    K = FrameKernel(FiniteFrame(([1], [0, "3/5"], [0, "4/5"])), 3)
    restored = kernel_from_descriptor(K.to_descriptor())
    assert np.array_equal(gram(restored, pts).entries, gram(K, pts).entries)


def test_parseval_frame_that_is_not_a_basis():
    basis = FiniteFrame(([1], [0, 1]))
    split = FiniteFrame(([1], [0, Fraction(3, 5)], [0, Fraction(4, 5)]))
    szego_series = SeriesKernel.rising(1)
    G_basis = gram(kernel_from_frame(basis, 2), pts).entries
    G_split = gram(kernel_from_frame(split, 3), pts).entries
    assert relative_gap(G_split, G_basis) <= 1e-14
    assert is_orthonormal_frame(basis, szego_series, 2)
    assert not is_orthonormal_frame(split, szego_series, 3)
    assert split.squared_norms(szego_series, 3) == [1, Fraction(9, 25), Fraction(16, 25)]


def test_frame_divergence_is_reported():
    frame = MonomialFrame(SeriesKernel.rising(1))
    with pytest.raises(FrameDivergenceError):
        kernel_from_frame(frame, 20, check_points=PointSet([0.2, 0.999], DomainTag.DISK))
    with pytest.raises(FrameDivergenceError):
        kernel_from_frame(frame, 20, check_points=PointSet([1.2], DomainTag.DISK, radius=2.0))


def test_sum_norm_of_doubled_kernel():
    sample = PointSet([0.0, 0.3, -0.3, 0.3j, -0.3j], DomainTag.DISK)
    d = np.array([1.0, -0.5, 0.25j, 2.0, 0.1])
    G = gram(szego(), sample).entries
    F = G @ d
    norm_squared = float(np.real(np.conj(d) @ G @ d))
    decomposition = optimal_decomposition(F, sample, szego(), szego())
    assert decomposition.norm == pytest.approx(math.sqrt(norm_squared / 2), rel=1e-8)
    assert np.allclose(decomposition.first, F / 2, atol=1e-8)
    assert np.allclose(decomposition.first + decomposition.second, F, atol=1e-8)


def test_sum_norm_is_at_most_either_part():
    sample = PointSet([0.1, 0.4, -0.2 + 0.3j, 0.5j], DomainTag.DISK)
    d = np.array([1.0, 2.0, -1.0, 0.5])
    G1, G2 = gram(szego(), sample).entries, gram(bergman(), sample).entries
    F = G1 @ d
    first_norm = math.sqrt(float(np.real(np.conj(d) @ G1 @ d)))
    assert sum_rkhs_norm(F, sample, szego(), bergman()) <= first_norm * (1 + 1e-9)
    with pytest.raises(ValueError):
        sum_rkhs_norm(F[:2], sample, szego(), bergman())


def test_sum_norm_with_a_zero_second_kernel():
    sample = PointSet([0.1, 0.4, -0.2 + 0.3j, 0.5j], DomainTag.DISK)
    d = np.array([1.0, 2.0, -1.0, 0.5j])
    G = gram(szego(), sample).entries
    F = G @ d
    expected = math.sqrt(float(np.real(np.conj(d) @ G @ d)))
    for zero in (constant(0), Scaled(bergman(), 0)):
        decomposition = optimal_decomposition(F, sample, szego(), zero)
        assert decomposition.norm == pytest.approx(expected, rel=1e-9)
        assert decomposition.second_norm_squared == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(decomposition.first, F, atol=1e-9)


def grid_minimum(objective, center, halfwidth, rounds=20, size=49):
    axis = np.linspace(-1.0, 1.0, size)
    best = np.inf
    for _ in range(rounds):
        grids = np.meshgrid(*(c + halfwidth * axis for c in center), indexing="ij")
        candidates = np.stack([g.ravel() for g in grids], axis=1)
        values = objective(candidates)
        i = int(np.argmin(values))
        center, best = candidates[i], float(values[i])
        halfwidth = 8 * (2 * halfwidth / (size - 1))
    return best


def test_sum_norm_against_grid_search():
    # real points and real F keep the optimal split real
    sample = PointSet([0.0, 0.6, -0.6], DomainTag.DISK)
    G1, G2 = gram(szego(), sample).entries.real, gram(bergman(), sample).entries.real
    A, B = np.linalg.inv(G1), np.linalg.inv(G2)
    F = G1 @ np.array([1.0, -0.5, 0.25]) + G2 @ np.array([0.2, 0.3, -0.4])

    def objective(first):
        second = F[None, :] - first
        return (np.einsum("ij,jk,ik->i", first, A, first)
                + np.einsum("ij,jk,ik->i", second, B, second))

    searched = grid_minimum(objective, np.zeros(3), 6 * float(np.linalg.norm(F)))
    assert sum_rkhs_norm(F, sample, szego(), bergman()) ** 2 == pytest.approx(searched, rel=1e-9)


def test_cube_of_szego_has_triangular_coefficients():
    for K in (power(szego(), 3), Power(szego(), 3)):
        series = series_of(K)
        assert [series.exact_coefficient(k) for k in range(30)] == [(k + 1) * (k + 2) // 2 for k in range(30)]
    assert relative_gap(gram(power(szego(), 3), pts).entries, gram(inverse_power(3), pts).entries) == 0


def test_weighted_monomial_frame_generates_bergman():
    inner = random_disk(10, 0.7)
    frame = MonomialFrame(SeriesKernel.rising(2))  # f_n(x) = sqrt(n + 1) x^n
    assert np.allclose(frame.values(np.array([0.5]), 4)[0], [1, math.sqrt(2) * 0.5, math.sqrt(3) * 0.25, 2 * 0.125])
    K = kernel_from_frame(frame, 300, inner)
    assert relative_gap(gram(K, inner).entries, gram(bergman(), inner).entries) <= 1e-12
    assert is_orthonormal_frame(frame, SeriesKernel.rising(2), 30)
