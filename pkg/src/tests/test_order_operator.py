from fractions import Fraction

import numpy as np
import pytest

from rkhs.core import DomainTag, PointSet, Scaled, SeriesKernel, bergman, half_plane, inverse_power, szego
from rkhs.order_operator import (
    PENCIL_FLOOR,
    SPECTRUM_LENGTH,
    SupportMismatchError,
    diagonal_reconstruction,
    inclusion_constant,
    isometry_check,
    multiplier_test,
    order_operator_diagonal,
    order_operator_sampled,
)

rng = np.random.default_rng(13)
values = 0.9 * np.sqrt(rng.uniform(size=15)) * np.exp(2j * np.pi * rng.uniform(size=15))
pts = PointSet(values, DomainTag.DISK)
szego_series = SeriesKernel.rising(1)
bergman_series = SeriesKernel.rising(2)


def test_diagonal_spectrum_of_szego_in_bergman():
    spectrum = order_operator_diagonal(szego_series, bergman_series)
    assert len(spectrum.eigenvalues) == SPECTRUM_LENGTH
    for n, value in enumerate(spectrum.eigenvalues):
        assert value == Fraction(1, n + 1)
        assert spectrum.inverse[n] == n + 1
    assert spectrum.contraction


def test_diagonal_reconstruction_is_exact():
    assert diagonal_reconstruction(szego_series, bergman_series) == [1] * SPECTRUM_LENGTH
    assert diagonal_reconstruction(SeriesKernel.polynomial([1, 0, 2]), szego_series, 5) == [1, 0, 2, 0, 0]


def test_reversed_order_is_not_a_contraction():
    assert not order_operator_diagonal(bergman_series, szego_series, 10).contraction


def test_support_mismatch():
    with pytest.raises(SupportMismatchError):
        order_operator_diagonal(szego_series, SeriesKernel.polynomial([1, 1]))
    spectrum = order_operator_diagonal(SeriesKernel.polynomial([1, 0, 2]), szego_series, 4)
    assert spectrum.inverse == [1, None, Fraction(1, 2), None]


def test_sampled_spectrum_lies_in_the_unit_interval():
    sample = order_operator_sampled(szego(), bergman(), pts)
    assert sample.eigenvalues.min() >= -1e-8
    assert sample.eigenvalues.max() <= 1 + 1e-8
    assert 0 < sample.effective_rank <= len(pts)
    assert sample.matrix.shape == (15, 15)


def test_sampled_spectrum_with_the_default_floor():
    assert PENCIL_FLOOR == 1e-12
    coarse = order_operator_sampled(szego(), bergman(), pts, floor=1e-6)
    fine = order_operator_sampled(szego(), bergman(), pts)
    assert coarse.effective_rank <= fine.effective_rank
    assert fine.eigenvalues.min() >= -1e-8
    assert fine.eigenvalues.max() <= 1 + 1e-8
    assert fine.eigenvalues.size == fine.effective_rank


def test_sampled_spectrum_without_series():
    upper = PointSet([0.5j, 1 + 1j, -0.5 + 2j, 0.3 + 0.7j], DomainTag.UPPER_HALF_PLANE)
    sample = order_operator_sampled(half_plane(), Scaled(half_plane(), 2), upper)
    assert np.allclose(sample.eigenvalues, 0.5, atol=1e-10)


def test_sampled_operator_matches_the_diagonal_spectrum():
    # <A f, f>_L for f = sum_j c_j L_{x_j}: through C, through G_K, and through
    # lambda_n = 1 / (n + 1) on the monomial coefficients F_n of f
    sample = PointSet([0.0, 0.5, -0.5j, 0.4 + 0.3j], DomainTag.DISK)
    c = np.array([1.0, -0.5 + 0.25j, 0.3j, 0.8])
    operator = order_operator_sampled(szego(), bergman(), sample)
    through_matrix = complex(np.conj(c) @ operator.gram_l @ operator.matrix @ c)
    through_k = complex(np.conj(c) @ operator.gram_k @ c)

    N = 200
    n = np.arange(N)
    b = bergman_series.coefficients(N)
    F = b * (c @ np.power.outer(np.conj(sample.values), n))
    lam = np.array([float(v) for v in order_operator_diagonal(szego_series, bergman_series, N).eigenvalues])
    through_diagonal = float(np.sum(lam * np.abs(F) ** 2 / b))

    assert through_matrix.real == pytest.approx(through_diagonal, rel=1e-9)
    assert through_k.real == pytest.approx(through_diagonal, rel=1e-12)
    assert abs(through_matrix.imag) <= 1e-9


def test_isometry_on_a_well_conditioned_sample():
    sample = PointSet([0.0, 0.5, -0.5j, 0.4 + 0.3j], DomainTag.DISK)
    report = isometry_check(szego(), bergman(), sample)
    assert report.deviation <= 1e-9
    assert report.condition >= 1.0


def test_inclusion_constant():
    assert inclusion_constant(szego(), bergman(), pts) <= 1 + 1e-8
    assert inclusion_constant(bergman(), szego(), pts) > 1
    assert inclusion_constant(bergman(), inverse_power(3), pts) <= 1 + 1e-8


def test_multipliers_on_the_szego_space():
    identity = multiplier_test(lambda z: z, szego(), pts)
    assert identity.contractive and identity.witness.psd
    half = multiplier_test(lambda z: 0.5, szego(), pts)
    assert half.contractive
    assert half.max_modulus == pytest.approx(0.5)
    doubled = multiplier_test(lambda z: 2 * z, szego(), pts)
    assert not doubled.contractive
    assert not doubled.witness.psd
    assert not doubled.unit_ball
