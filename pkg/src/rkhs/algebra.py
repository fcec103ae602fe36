import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from rkhs.core import (
    PINV_RCOND,
    Builtin,
    DomainTag,
    KernelError,
    KernelExpr,
    NotInRKHSError,
    PointSet,
    Power,
    Product,
    Series,
    SeriesKernel,
    Sum,
    bargmann,
    constant,
    gram,
    inverse_power,
    register_node,
    rkhs_norm_squared,
    to_fraction,
)

logger = logging.getLogger(__name__)

FRAME_TAIL_SHARE = 0.2  # largest admissible share of the diagonal in the last quarter of the frame
SPAN_RESIDUAL_TOLERANCE = 1e-8


class FrameDivergenceError(KernelError):
    """The frame sum sum_n |f_n(x)|^2 does not settle at a sample point."""
    pass


class CombineOp(Enum):
    SUM = "sum"
    PRODUCT = "product"


def combine(op: Union[CombineOp, str], K: KernelExpr, L: KernelExpr) -> KernelExpr:
    """Sum or Hadamard product of two kernels."""
    op = CombineOp(op)
    if op == CombineOp.SUM:
        return Sum([K, L])
    return Product(K, L)


def power(K: KernelExpr, n: int) -> KernelExpr:
    """
    n-fold Hadamard product of K.

    Closed forms are returned for the (1 - x conj(y))^(-m) and exponential
    families and for constants; any other kernel gets a Power node.
    """
    if int(n) < 1:
        raise ValueError(f"Kernel power exponent must be >= 1, got {n}")
    n = int(n)
    if n == 1:
        return K
    if isinstance(K, Builtin):
        if K.name in ("szego", "bergman", "inverse_power"):
            return inverse_power(K.series().params[0] * n)
        if K.name == "bargmann":
            return bargmann(K.params["c"] * n)
        if K.name == "constant":
            return constant(K.params["c"] ** n)
    if isinstance(K, Series):
        base = K.kernel
        if base.family == "rising":
            return Series(SeriesKernel.rising(base.params[0] * n, base.variable_kind))
        if base.family == "exponential":
            return Series(SeriesKernel.exponential(base.params[0] * n, base.variable_kind))
    return Power(K, n)


def series_of(expr: KernelExpr) -> SeriesKernel:
    """Power-series representation of a series-backed kernel expression."""
    series = expr.series()
    if series is None:
        raise ValueError(f"Kernel {expr.node} has no power-series representation")
    return series


# Frame-generated kernels

@dataclass(frozen=True)
class MonomialFrame:
    """f_n(x) = sqrt(a_n) x^n for the coefficients a_n of a series."""
    series: SeriesKernel

    @property
    def domain(self) -> Optional[DomainTag]:
        return Series(self.series).domain

    def values(self, xs: np.ndarray, count: int) -> np.ndarray:
        weights = np.sqrt(self.series.coefficients(count))
        return weights[None, :] * np.power.outer(np.asarray(xs, dtype=complex), np.arange(count))

    def squared_norms(self, k: SeriesKernel, count: int) -> List[Fraction]:
        norms = []
        for n in range(count):
            a = self.series.exact_coefficient(n)
            b = k.exact_coefficient(n)
            if a != 0 and b == 0:
                raise NotInRKHSError(f"Frame function {n} is outside the RKHS (a_{n} = 0)")
            norms.append(a / b if a != 0 else Fraction(0))
        return norms

    def to_descriptor(self) -> Dict:
        return {"type": "monomial", "series": self.series.to_descriptor()}


@dataclass(frozen=True)
class FiniteFrame:
    """Finitely many polynomial frame functions, each given by its coefficients."""
    functions: tuple

    def __post_init__(self):
        functions = tuple(tuple(to_fraction(c) for c in f) for f in self.functions)
        object.__setattr__(self, "functions", functions)

    @property
    def domain(self) -> Optional[DomainTag]:
        return None

    def values(self, xs: np.ndarray, count: int) -> np.ndarray:
        xs = np.asarray(xs, dtype=complex)
        used = self.functions[:count]
        columns = [np.polynomial.polynomial.polyval(xs, [float(c) for c in f]) for f in used]
        if not columns:
            return np.zeros((xs.size, 0), dtype=complex)
        return np.stack(columns, axis=1).astype(complex)

    def squared_norms(self, k: SeriesKernel, count: int) -> List[Fraction]:
        return [rkhs_norm_squared(list(f), k) for f in self.functions[:count]]

    def to_descriptor(self) -> Dict:
        return {"type": "finite", "functions": [[str(c) for c in f] for f in self.functions]}


Frame = Union[MonomialFrame, FiniteFrame]


def frame_from_descriptor(descriptor: Dict) -> Frame:
    if descriptor["type"] == "monomial":
        return MonomialFrame(SeriesKernel.from_descriptor(descriptor["series"]))
    if descriptor["type"] == "finite":
        return FiniteFrame(tuple(descriptor["functions"]))
    raise ValueError(f"Unknown frame type: {descriptor['type']}")


@register_node("frame")
class FrameKernel(KernelExpr):
    """K(x, y) = sum_{n < truncation} f_n(x) conj(f_n(y))."""

    def __init__(self, frame: Frame, truncation: int):
        if truncation < 1:
            raise ValueError(f"Frame truncation must be >= 1, got {truncation}")
        self.frame = frame
        self.truncation = int(truncation)

    @property
    def domain(self) -> Optional[DomainTag]:
        return self.frame.domain

    def _matrix(self, xs, ys, truncation):
        if isinstance(self.frame, MonomialFrame):
            radius = self.frame.series.radius
            if max(np.max(np.abs(xs)), np.max(np.abs(ys))) >= radius:
                raise FrameDivergenceError(f"Monomial frame evaluated outside radius {radius}")
        left = self.frame.values(xs, self.truncation)
        right = self.frame.values(ys, self.truncation)
        return left @ right.conj().T

    def to_descriptor(self) -> Dict:
        return {"node": "frame",
                "params": {"truncation": self.truncation, "frame": self.frame.to_descriptor()}}

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "FrameKernel":
        params = descriptor["params"]
        return cls(frame_from_descriptor(params["frame"]), int(params["truncation"]))


def kernel_from_frame(frames: Frame, truncation: int, check_points: Optional[PointSet] = None) -> FrameKernel:
    """
    Kernel generated by a frame, checked for a convergent diagonal at the sample points.

    Raises:
        FrameDivergenceError: If sum_n |f_n(x)|^2 is non-finite at a sample point or
            the last quarter of the truncated frame still carries more than
            FRAME_TAIL_SHARE of the diagonal
    """
    kernel = FrameKernel(frames, truncation)
    if check_points is None:
        return kernel
    kernel.check_admissible(check_points.domain)
    if isinstance(frames, MonomialFrame) and check_points.max_modulus >= frames.series.radius:
        raise FrameDivergenceError(
            f"Frame sum diverges at |x| = {check_points.max_modulus:.6g} (radius {frames.series.radius})")
    squares = np.abs(frames.values(check_points.values, truncation)) ** 2
    if not np.all(np.isfinite(squares)):
        raise FrameDivergenceError("Frame sum is not finite at a sample point")
    totals = squares.sum(axis=1)
    tails = squares[:, (3 * squares.shape[1]) // 4:].sum(axis=1)
    shares = np.divide(tails, totals, out=np.zeros_like(tails), where=totals > 0)
    if squares.shape[1] >= 4 and np.max(shares) > FRAME_TAIL_SHARE:
        worst = int(np.argmax(shares))
        raise FrameDivergenceError(
            f"Frame sum has not settled at x = {check_points.values[worst]:.6g}: "
            f"tail share {shares[worst]:.3f} with {truncation} functions")
    return kernel


def is_orthonormal_frame(frame: Frame, k: SeriesKernel, count: int) -> bool:
    """A Parseval frame is an orthonormal basis iff every member has unit norm."""
    return all(norm == 1 for norm in frame.squared_norms(k, count))


# Norm of the sum space

@dataclass
class SumDecomposition:
    norm: float
    weights: np.ndarray
    first: np.ndarray  # samples of F1 on the point set
    second: np.ndarray
    first_norm_squared: float
    second_norm_squared: float


def optimal_decomposition(F_samples: Sequence[complex], pts: PointSet,
                          K1: KernelExpr, K2: KernelExpr,
                          truncation: Optional[int] = None) -> SumDecomposition:
    """
    Minimise ||F1||^2 + ||F2||^2 over F = F1 + F2 with F_i in the span of K_i sections.

    With lam = (G1 + G2)^+ F the minimiser is F1 = G1 lam, F2 = G2 lam.
    """
    F = np.asarray(F_samples, dtype=complex).ravel()
    if F.size != len(pts):
        raise ValueError(f"Expected {len(pts)} samples of F, got {F.size}")
    G1 = gram(K1, pts, truncation).entries
    G2 = gram(K2, pts, truncation).entries
    joint = G1 + G2
    lam = np.linalg.pinv(joint, rcond=PINV_RCOND, hermitian=True) @ F
    residual = float(np.linalg.norm(joint @ lam - F))
    if residual > SPAN_RESIDUAL_TOLERANCE * (1.0 + float(np.linalg.norm(F))):
        logger.warning(f"F is not in the sampled span of K1 + K2 (residual {residual:.3e})")
    first_sq = float(np.real(np.conj(lam) @ G1 @ lam))
    second_sq = float(np.real(np.conj(lam) @ G2 @ lam))
    return SumDecomposition(
        norm=math.sqrt(max(first_sq + second_sq, 0.0)),
        weights=lam,
        first=G1 @ lam,
        second=G2 @ lam,
        first_norm_squared=first_sq,
        second_norm_squared=second_sq,
    )


def sum_rkhs_norm(F_samples: Sequence[complex], pts: PointSet, K1: KernelExpr, K2: KernelExpr,
                  truncation: Optional[int] = None) -> float:
    """Norm of F in the RKHS of K1 + K2, restricted to the sampled span."""
    return optimal_decomposition(F_samples, pts, K1, K2, truncation).norm
