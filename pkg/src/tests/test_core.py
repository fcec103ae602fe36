import math
from fractions import Fraction

import numpy as np
import pytest

from rkhs.core import (
    BoundUnavailableError,
    DomainError,
    DomainTag,
    KernelSection,
    NonHermitianError,
    NotInRKHSError,
    Point,
    PointSet,
    Power,
    Product,
    Restriction,
    Scaled,
    Series,
    SeriesDivergenceError,
    SeriesKernel,
    Sum,
    VariableKind,
    auto_truncation,
    bargmann,
    bergman,
    collapse_atoms,
    constant,
    evaluate,
    gram,
    half_plane,
    hardy_norm,
    inverse_power,
    kernel_from_descriptor,
    monomial,
    psd_check,
    rkhs_norm,
    rkhs_norm_squared,
    series_total,
    szego,
    truncation_bound,
)

rng = np.random.default_rng(11)
disk_values = 0.9 * np.sqrt(rng.uniform(size=10)) * np.exp(2j * np.pi * rng.uniform(size=10))
disk = PointSet(disk_values, DomainTag.DISK)
szego_series = SeriesKernel.rising(1)
bergman_series = SeriesKernel.rising(2)


def disk_point(z):
    return Point(z, DomainTag.DISK)


def test_eval_closed_forms():
    assert evaluate(szego(), disk_point(0), disk_point(0)) == 1
    assert evaluate(szego(), disk_point(0.5), disk_point(0.5)) == pytest.approx(4 / 3, abs=1e-15)
    assert evaluate(bergman(), disk_point(0.5), disk_point(0.5)) == pytest.approx(16 / 9, abs=1e-15)
    one = Point(1.0, DomainTag.WHOLE_PLANE)
    assert evaluate(bargmann(), one, one) == pytest.approx(math.e, abs=1e-15)


def test_series_node_matches_builtin():
    x, y = disk_point(0.3 + 0.4j), disk_point(-0.5 + 0.1j)
    closed = evaluate(szego(), x, y)
    series = evaluate(Series(szego_series), x, y)
    assert abs(closed - series) <= 1e-12


def test_eval_is_hermitian_for_every_node():
    x, y = disk_point(0.6 - 0.2j), disk_point(-0.1 + 0.7j)
    kernels = [
        szego(), bergman(), inverse_power(3), bargmann(2), constant(3),
        Series(SeriesKernel.exponential(1)),
        Sum([szego(), bergman()]),
        Product(szego(), bargmann()),
        Power(Series(SeriesKernel.polynomial([1, 2, 1])), 3),
        Restriction(bargmann(), DomainTag.DISK),
        Scaled(szego(), Fraction(1, 2)),
    ]
    for K in kernels:
        forward, backward = evaluate(K, x, y), evaluate(K, y, x)
        assert abs(forward - np.conj(backward)) <= 1e-13 * max(1.0, abs(forward))


def test_half_plane_diagonal_is_positive():
    z = Point(0.3 + 0.5j, DomainTag.UPPER_HALF_PLANE)
    value = evaluate(half_plane(), z, z)
    assert value.imag == pytest.approx(0.0, abs=1e-15)
    assert value.real == pytest.approx(1 / (4 * 0.5))


def test_points_are_validated():
    with pytest.raises(DomainError):
        Point(1.0, DomainTag.DISK)
    with pytest.raises(DomainError):
        Point(0.5 - 0.1j, DomainTag.UPPER_HALF_PLANE)
    with pytest.raises(ValueError):
        PointSet([0.1, 0.1], DomainTag.DISK)
    with pytest.raises(ValueError):
        PointSet([float("nan")], DomainTag.DISK)
    with pytest.raises(ValueError):
        PointSet([], DomainTag.DISK)


def test_domain_mismatch_is_rejected():
    plane = PointSet([0.5, 2.0], DomainTag.WHOLE_PLANE)
    with pytest.raises(DomainError):
        gram(szego(), plane)
    # the whole-plane kernel accepts disk points
    assert gram(bargmann(), disk).entries.shape == (10, 10)


def test_series_divergence():
    wide = PointSet([0.5, 1.5], DomainTag.DISK, radius=2.0)
    with pytest.raises(SeriesDivergenceError):
        gram(Series(szego_series), wide)


def test_gram_small_example():
    pts = PointSet([0, 0.5], DomainTag.REAL_INTERVAL)
    g = gram(Series(SeriesKernel.rising(1, VariableKind.REAL)), pts)
    assert np.allclose(g.entries, [[1, 1], [1, 4 / 3]], atol=1e-12)
    certificate = psd_check(g)
    assert certificate.psd
    assert certificate.verdict == "psd"


def test_gram_is_hermitian_with_real_diagonal():
    g = gram(szego(), disk)
    assert np.array_equal(g.entries, g.entries.conj().T)
    assert np.all(g.entries.diagonal().imag == 0)
    single = gram(bergman(), PointSet([0.4j], DomainTag.DISK))
    assert single.entries[0, 0].real > 0


def test_psd_check_examples():
    identity = psd_check(np.eye(3))
    assert identity.psd and identity.min_eigenvalue == pytest.approx(1.0)
    indefinite = psd_check(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not indefinite.psd
    assert indefinite.min_eigenvalue == pytest.approx(-1.0)
    assert indefinite.verdict == "not-psd"
    with pytest.raises(NonHermitianError):
        psd_check(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_builtin_grams_are_psd():
    for K in (szego(), bergman(), inverse_power(4), bargmann(), constant(2)):
        for trial in range(5):
            r = 0.95 * np.sqrt(rng.uniform(size=15))
            pts = PointSet(r * np.exp(2j * np.pi * rng.uniform(size=15)), DomainTag.DISK)
            assert psd_check(gram(K, pts)).psd
    upper = PointSet(rng.uniform(-1, 1, 12) + 1j * rng.uniform(0.05, 1, 12), DomainTag.UPPER_HALF_PLANE)
    assert psd_check(gram(half_plane(), upper)).psd


def test_rkhs_norm_of_monomials():
    for k in range(51):
        assert rkhs_norm_squared(monomial(k), szego_series) == 1
        assert rkhs_norm_squared(monomial(k), bergman_series) == Fraction(1, k + 1)
    assert rkhs_norm(monomial(3), bergman_series) == pytest.approx(0.5)
    assert rkhs_norm([0, 0, 0], szego_series) == 0


def test_rkhs_norm_outside_support():
    with pytest.raises(NotInRKHSError):
        rkhs_norm([0, 0, 1], SeriesKernel.polynomial([1, 1]))


def test_hardy_norm_scalar_and_vector():
    assert hardy_norm([3, 4]) == pytest.approx(5.0)
    assert hardy_norm([[1, 0], [0, 2], [2, 0]]) == pytest.approx(3.0)


def test_truncation_bound_examples():
    assert truncation_bound(szego_series, 0.5, 20) == pytest.approx(0.25 ** 20 / 0.75, rel=1e-12)
    tail = math.fsum(1 / math.factorial(k) for k in range(10, 40))
    bound = truncation_bound(SeriesKernel.exponential(1), 1.0, 10)
    assert tail <= bound <= 2 / math.factorial(10)
    with pytest.raises(BoundUnavailableError):
        truncation_bound(szego_series, 1.0, 5)


def test_convolution_tail_bound_dominates_the_exact_tail():
    product = SeriesKernel.convolution(szego_series, szego_series)  # a_j = j + 1
    for r in (0.3, 0.7, 0.9):
        t = r * r
        for N in (1, 2, 7, 40):
            exact = t ** N * (N + 1 - N * t) / (1 - t) ** 2
            assert exact <= truncation_bound(product, r, N) * (1 + 1e-12)
    # bergman parts need N large before their own closed form applies
    wide = SeriesKernel.convolution(bergman_series, SeriesKernel.exponential(3))
    for N in (1, 3, 20):
        head = float(np.polynomial.polynomial.polyval(0.81, wide.coefficients(N)))
        assert series_total(wide, 0.9) - head <= truncation_bound(wide, 0.9, N) * (1 + 1e-12)
    assert series_total(product, 0.5) == pytest.approx(1 / 0.75 ** 2, rel=1e-14)
    assert truncation_bound(product, 0.5, 0) == pytest.approx(series_total(product, 0.5), rel=1e-14)


def test_truncation_bound_controls_series_evaluation():
    for series in (szego_series, bergman_series, SeriesKernel.convolution(szego_series, SeriesKernel.exponential(1))):
        K = Series(series)
        for x, y in [(0.7 + 0.1j, 0.2 - 0.6j), (0.85, 0.85), (-0.5j, 0.3)]:
            r = max(abs(x), abs(y))
            for N in (10, 30):
                xs, ys = np.array([x], dtype=complex), np.array([y], dtype=complex)
                short, long = K._matrix(xs, ys, N)[0, 0], K._matrix(xs, ys, 2 * N)[0, 0]
                assert abs(short - long) <= truncation_bound(series, r, N) * (1 + 1e-12) + 1e-14


def test_auto_truncation_clears_tolerance():
    N = auto_truncation(szego_series, 0.9)
    assert truncation_bound(szego_series, 0.9, N) <= 1e-12
    assert truncation_bound(szego_series, 0.9, N - 1) > 1e-12
    with pytest.raises(SeriesDivergenceError):
        auto_truncation(szego_series, 1.0)


def test_exact_coefficients():
    assert [bergman_series.exact_coefficient(k) for k in range(4)] == [1, 2, 3, 4]
    assert SeriesKernel.exponential(2).exact_coefficient(3) == Fraction(8, 6)
    product = SeriesKernel.convolution(szego_series, szego_series)
    assert [product.exact_coefficient(k) for k in range(5)] == [1, 2, 3, 4, 5]
    partial = SeriesKernel.partial(szego_series, 2)
    assert list(partial.coefficients(5)) == [1, 1, 1, 0, 0]


def test_descriptor_roundtrip_evaluates_identically():
    K = Sum([Scaled(szego(), Fraction(1, 3)), Product(bergman(), Series(SeriesKernel.exponential(2)))])
    restored = kernel_from_descriptor(K.to_descriptor())
    x, y = disk_point(0.2 + 0.3j), disk_point(0.5j)
    assert evaluate(restored, x, y) == evaluate(K, x, y)


def test_collapse_atoms():
    values, weights = collapse_atoms([0.5, 0.1, 0.5], [1, 2, -1])
    assert list(values) == [0.5, 0.1]
    assert list(weights) == [0, 2]


def test_reproducing_property():
    centers = PointSet(disk_values[:8], DomainTag.DISK)
    weights = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    f = KernelSection(szego(), centers, weights)
    values = f(centers)
    for i in range(8):
        section = KernelSection(szego(), PointSet([centers.values[i]], DomainTag.DISK), [1.0])
        # <f, K_x> = f(x)
        assert abs(f.inner(section) - values[i]) <= 1e-10 * (1 + abs(values[i]))
    assert f.norm() ** 2 == pytest.approx(np.real(f.inner(f)), rel=1e-10)
