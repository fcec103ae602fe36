import logging

import numpy as np
import pytest

from rkhs.core import DomainTag, Point, PointSet, bergman, constant, gram, szego
from rkhs.ktransform import (
    DiscreteMeasure,
    adjoint_gap,
    energy,
    isometry_gap,
    k_inverse,
    m2_inner,
    roundtrip_error,
    tk_apply,
)

# six points evenly spread on |z| = 1/2 keep the Gram matrix well conditioned
circle = PointSet(0.5 * np.exp(2j * np.pi * np.arange(6) / 6), DomainTag.DISK)
weights = np.array([1.0, -2.0, 0.5j, 3.0 - 1.0j, 0.0, -0.25])
mu = DiscreteMeasure(circle, weights)


def test_energy_examples():
    half = DiscreteMeasure(PointSet([0.5], DomainTag.DISK), [1.0])
    assert energy(half, szego()) == pytest.approx(4 / 3)
    dipole = DiscreteMeasure(PointSet([0.0, 0.5], DomainTag.DISK), [1.0, -1.0])
    assert energy(dipole, szego()) == pytest.approx(1 / 3)
    assert energy(DiscreteMeasure.zero(circle), szego()) == 0


def test_energy_is_nonnegative():
    rng = np.random.default_rng(21)
    for _ in range(10):
        c = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        assert energy(DiscreteMeasure(circle, c), bergman()) >= -1e-12


def test_tk_apply_is_the_weighted_section():
    section = tk_apply(mu, szego())
    point = PointSet([0.1 + 0.2j], DomainTag.DISK)
    x = point.values[0]
    expected = np.sum(weights / (1 - x * np.conj(circle.values)))
    assert section(point)[0] == pytest.approx(expected, rel=1e-12)


def test_roundtrip_recovers_the_measure():
    for K in (szego(), bergman()):
        assert roundtrip_error(mu, K) <= 1e-9
        assert isometry_gap(mu, K) <= 1e-9


def test_adjoint_identity():
    d = np.array([0.3, 1.0j, -1.0, 0.0, 2.0, 0.5])
    f = gram(szego(), circle).entries @ d
    assert adjoint_gap(mu, f, szego()) <= 1e-9


def test_k_inverse_reports_values_outside_the_span(caplog):
    pts = PointSet([0.1, 0.2, 0.3], DomainTag.DISK)
    with caplog.at_level(logging.WARNING):
        recovered = k_inverse([1.0, 2.0, 3.0], pts, constant(1))
    assert "not in sampled span" in caplog.text
    assert np.allclose(recovered.weights, 2.0 / 3.0)
    with pytest.raises(ValueError):
        k_inverse([1.0], pts, szego())


def test_measure_construction():
    atoms = [Point(0.5, DomainTag.DISK), Point(0.1, DomainTag.DISK), Point(0.5, DomainTag.DISK)]
    merged = DiscreteMeasure.from_atoms(atoms, [1.0, 2.0, 0.5])
    assert list(merged.pts.values) == [0.5, 0.1]
    assert list(merged.weights) == [1.5, 2.0]
    assert merged.to_dict() == {"domain": "complex-disk", "points": [0.5, 0.1], "weights": [1.5, 2.0]}
    with pytest.raises(ValueError):
        DiscreteMeasure(circle, [1.0])
    with pytest.raises(ValueError):
        DiscreteMeasure(PointSet([0.5], DomainTag.DISK), [float("inf")])
    with pytest.raises(ValueError):
        merged.weights[0] = 0


def test_m2_inner_needs_a_common_support():
    other = DiscreteMeasure(PointSet([0.5], DomainTag.DISK), [1.0])
    with pytest.raises(ValueError):
        m2_inner(other, mu, szego())
    assert m2_inner(mu, mu, szego()).real == pytest.approx(energy(mu, szego()))
