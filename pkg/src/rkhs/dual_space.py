import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from rkhs.algebra import MonomialFrame
from rkhs.core import (
    PSD_TOLERANCE,
    KernelError,
    KernelExpr,
    NotInRKHSError,
    Point,
    PointSet,
    SeriesKernel,
    collapse_atoms,
    gram,
)
from rkhs.features import FeatureMap, SpaceTag, onb_feature

logger = logging.getLogger(__name__)

EXPANSION_TOLERANCE = 1e-12


class ExpansionMismatchError(KernelError):
    """A truncated delta expansion disagrees with direct evaluation."""
    pass


@dataclass(frozen=True)
class DistributionElement:
    """sum_n c_n D_n with D_n = delta^(n) / (n! sqrt(a_n)) for the kernel's coefficients."""
    coeffs: tuple
    kernel: SeriesKernel

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coeffs)
        if not all(math.isfinite(c.real) and math.isfinite(c.imag) for c in coeffs):
            raise ValueError("Distribution coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    def norm(self) -> float:
        return float(np.linalg.norm(np.array(self.coeffs, dtype=complex)))


def _exact_sqrt(q: Fraction) -> Optional[Fraction]:
    num, den = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if num * num == q.numerator and den * den == q.denominator:
        return Fraction(num, den)
    return None


def dual_pairing(K: SeriesKernel, n: int, m: int) -> Fraction:
    """
    D_n(x) K(x, y) D_m(y) by coefficient extraction at the origin.

    The mixed derivative d^n/dx^n d^m/dy^m of K at 0 is c_nm n! m! where c_nm
    is the coefficient of x^n conj(y)^m in the bivariate expansion of K.
    Normalising by n! m! sqrt(a_n a_m) leaves c_nm / sqrt(a_n a_m).

    Raises:
        NotInRKHSError: If a_n or a_m is zero
        ValueError: If sqrt(a_n a_m) is irrational and c_nm is not zero
    """
    a_n, a_m = K.exact_coefficient(n), K.exact_coefficient(m)
    if a_n == 0 or a_m == 0:
        raise NotInRKHSError(f"D_{n} or D_{m} is undefined: the kernel has a zero coefficient there")
    derivative = K.mixed_coefficient(n, m) * math.factorial(n) * math.factorial(m)
    if derivative == 0:
        return Fraction(0)
    root = _exact_sqrt(a_n * a_m)
    if root is None:
        raise ValueError(f"<D_{n}, D_{m}> is not rational: sqrt({a_n * a_m}) is irrational")
    return derivative / (math.factorial(n) * math.factorial(m) * root)


def apply_distribution(d: DistributionElement, p: Sequence, K: Optional[SeriesKernel] = None) -> complex:
    """sum_n c_n p^(n)(0) / (n! sqrt(a_n)) for a polynomial p given by its coefficients."""
    kernel = K if K is not None else d.kernel
    total = 0j
    for n, c in enumerate(d.coeffs[:len(p)]):
        if c == 0 or p[n] == 0:
            continue
        a = kernel.exact_coefficient(n)
        if a == 0:
            raise NotInRKHSError(f"D_{n} is undefined: a_{n} = 0")
        total += c * complex(p[n]) / math.sqrt(a)
    return total


def delta_expansion(x: Union[Point, complex], N: int, K: SeriesKernel) -> DistributionElement:
    """delta_x truncated to sum_{k<N} x^k delta^(k) / k! = sum_{k<N} x^k sqrt(a_k) D_k."""
    value = complex(x.value if isinstance(x, Point) else x)
    coeffs = [value ** k * math.sqrt(K.exact_coefficient(k)) for k in range(N)]
    return DistributionElement(tuple(coeffs), K)


def delta_expand(x: Union[Point, complex], N: int, p: Sequence, tol: float = EXPANSION_TOLERANCE) -> complex:
    """
    Truncated Taylor action sum_{k<N} x^k p^(k)(0) / k!, checked against p(x).

    A degree >= N only logs the truncation residual.

    Raises:
        ExpansionMismatchError: If deg p < N and the expansion misses p(x)
        ValueError: If p has no coefficients or N < 1
    """
    if N < 1:
        raise ValueError(f"Expansion length must be >= 1, got {N}")
    if len(p) == 0:
        raise ValueError("Polynomial needs at least one coefficient")
    value = complex(x.value if isinstance(x, Point) else x)
    poly = np.polynomial.Polynomial(np.asarray(p, dtype=complex))
    degree = len(np.trim_zeros(np.asarray(p, dtype=complex), "b")) - 1
    terms = [value ** k * poly.deriv(k).coef[0] / math.factorial(k) for k in range(N)]
    expanded = complex(sum(terms))
    direct = complex(poly(value))
    residual = abs(expanded - direct)
    if degree >= N:
        logger.warning(f"delta expansion truncated below degree {degree} (N = {N}): residual {residual:.3e}")
        return expanded
    scale = 1.0 + float(np.sum(np.abs(poly.coef) * abs(value) ** np.arange(poly.coef.size)))
    if residual > tol * scale:
        raise ExpansionMismatchError(f"delta expansion misses p({value}) by {residual:.3e}")
    return expanded


def section_taylor_coefficients(K: SeriesKernel, centers: PointSet, weights: Sequence, N: int) -> np.ndarray:
    """Taylor coefficients of f = sum_j d_j K(., y_j) up to degree N - 1."""
    weights = np.asarray(weights, dtype=complex)
    powers = np.power.outer(np.conj(centers.values), np.arange(N))
    return K.coefficients(N) * (weights @ powers)


def _measure_points(pts, weights):
    if isinstance(pts, PointSet):
        if len(weights) != len(pts):
            raise ValueError(f"Expected {len(pts)} weights, got {len(weights)}")
        return pts, np.asarray(weights, dtype=complex)
    points = list(pts)
    if not points:
        raise ValueError("Need at least one point")
    values, merged = collapse_atoms([p.value for p in points], weights)
    return PointSet(values, points[0].domain, points[0].radius), merged


def dirac_norm(weights: Sequence, pts: Union[PointSet, Sequence[Point]], K: KernelExpr,
               truncation: Optional[int] = None) -> float:
    """
    Norm of sum_i c_i delta_{x_i} in the dual space: sqrt(c* G c).

    Repeated points in a plain sequence are merged first.
    """
    sample, c = _measure_points(pts, weights)
    entries = gram(K, sample, truncation).entries
    return math.sqrt(max(float(np.real(np.conj(c) @ entries @ c)), 0.0))


@dataclass
class DualContainment:
    norm_k: float
    norm_l: float
    contractive: bool


def dirac_containment(K: KernelExpr, L: KernelExpr, weights: Sequence, pts: PointSet,
                      tol: float = PSD_TOLERANCE, truncation: Optional[int] = None) -> DualContainment:
    """For K <= L the Dirac-span norms satisfy ||mu||_K <= ||mu||_L."""
    norm_k = dirac_norm(weights, pts, K, truncation)
    norm_l = dirac_norm(weights, pts, L, truncation)
    return DualContainment(norm_k, norm_l, norm_k <= norm_l * (1.0 + tol) + tol)


def distributional_feature(K: SeriesKernel) -> FeatureMap:
    """x -> delta_x with coordinates x^n sqrt(a_n) against the basis D_n."""
    base = onb_feature(K)
    return FeatureMap(
        coeff_fn=MonomialFrame(K).values,
        space=SpaceTag.DISTRIBUTIONAL,
        label=f"distributional({K.family})",
        tail_fn=base.tail_fn,
        diag_fn=base.diag_fn,
        truncation_fn=base.truncation_fn,
        domain=base.domain,
    )
