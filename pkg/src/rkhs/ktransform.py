"""
Finite atomic measures, their energy form and the transform into the RKHS.

T_K maps mu = sum_i c_i delta_{x_i} to the section sum_i c_i K(., x_i); the
adjoint is computed as a Moore-Penrose inverse of the sampled Gram matrix.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from rkhs.core import (
    PINV_RCOND,
    KernelExpr,
    KernelSection,
    Point,
    PointSet,
    collapse_atoms,
    gram,
)

logger = logging.getLogger(__name__)

SPAN_TOLERANCE = 1e-8  # relative residual above which f is reported outside the span


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    pts: PointSet
    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=complex).ravel()
        if weights.size != len(self.pts):
            raise ValueError(f"Expected {len(self.pts)} weights, got {weights.size}")
        if not np.all(np.isfinite(weights)):
            raise ValueError("Measure weights must be finite")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_atoms(cls, points: Sequence[Point], weights: Sequence[complex]) -> "DiscreteMeasure":
        """Build a measure from possibly repeated atoms, summing weights at equal points."""
        points = list(points)
        if not points:
            raise ValueError("Need at least one atom")
        values, merged = collapse_atoms([p.value for p in points], weights)
        return cls(PointSet(values, points[0].domain, points[0].radius), merged)

    @classmethod
    def zero(cls, pts: PointSet) -> "DiscreteMeasure":
        return cls(pts, np.zeros(len(pts), dtype=complex))

    def to_dict(self) -> Dict:
        return {"domain": self.pts.domain.value,
                "points": [complex(v) for v in self.pts.values],
                "weights": [complex(w) for w in self.weights]}


def m2_inner(nu: DiscreteMeasure, mu: DiscreteMeasure, K: KernelExpr,
             truncation: Optional[int] = None) -> complex:
    """<nu, mu> = nu* G mu for two measures on the same support."""
    if nu.pts is not mu.pts and not np.array_equal(nu.pts.values, mu.pts.values):
        raise ValueError("Measures must share their support points")
    entries = gram(K, mu.pts, truncation).entries
    return complex(np.conj(nu.weights) @ entries @ mu.weights)


def energy(mu: DiscreteMeasure, K: KernelExpr, truncation: Optional[int] = None) -> float:
    """The quadratic form c* G c, which equals ||T_K mu||^2."""
    return float(np.real(m2_inner(mu, mu, K, truncation)))


def tk_apply(mu: DiscreteMeasure, K: KernelExpr, truncation: Optional[int] = None) -> KernelSection:
    return KernelSection(K, mu.pts, mu.weights, truncation)


def k_inverse(f_values: Sequence[complex], pts: PointSet, K: KernelExpr,
              truncation: Optional[int] = None) -> DiscreteMeasure:
    """
    Minimum-norm least-squares weights c = pinv(G) f.

    A residual ||G c - f|| above SPAN_TOLERANCE times ||f|| is logged:
    f is then not in the sampled span.
    """
    f = np.asarray(f_values, dtype=complex).ravel()
    if f.size != len(pts):
        raise ValueError(f"Expected {len(pts)} function values, got {f.size}")
    entries = gram(K, pts, truncation).entries
    weights = np.linalg.pinv(entries, rcond=PINV_RCOND, hermitian=True) @ f
    residual = float(np.linalg.norm(entries @ weights - f))
    if residual > SPAN_TOLERANCE * max(float(np.linalg.norm(f)), 1.0):
        logger.warning(f"f not in sampled span: residual norm {residual:.3e}")
    return DiscreteMeasure(pts, weights)


def adjoint_gap(mu: DiscreteMeasure, f_values: Sequence[complex], K: KernelExpr,
                truncation: Optional[int] = None) -> float:
    """
    |<T_K mu, f> - <mu, K^-1 f>| for f given by its values on the support of mu.

    The first pairing is the RKHS inner product sum_i c_i conj(f(x_i)) of a
    section with f; the second is the measure pairing of K^-1 f with mu.
    """
    f = np.asarray(f_values, dtype=complex).ravel()
    direct = complex(np.conj(f) @ mu.weights)
    recovered = k_inverse(f, mu.pts, K, truncation)
    via_inverse = m2_inner(recovered, mu, K, truncation)
    return abs(direct - via_inverse)


def roundtrip_error(mu: DiscreteMeasure, K: KernelExpr, truncation: Optional[int] = None) -> float:
    """max |c - k_inverse(T_K mu)| on the support of mu."""
    section = tk_apply(mu, K, truncation)
    recovered = k_inverse(section(mu.pts), mu.pts, K, truncation)
    return float(np.max(np.abs(recovered.weights - mu.weights)))


def isometry_gap(mu: DiscreteMeasure, K: KernelExpr, truncation: Optional[int] = None) -> float:
    return abs(tk_apply(mu, K, truncation).norm() ** 2 - energy(mu, K, truncation))
