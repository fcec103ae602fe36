"""
Middle-third iterated function system acting on functions and kernels.

The transform (Tf)(x) = f(3x) + f(3x - 2) pulls a function on [0, 1] back
through the two contractions x/3 and (x + 2)/3, so T^n f vanishes outside
the n-th Cantor stage C_n. Functions are zero-extended outside [0, 1].
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from rkhs.core import (
    DEFAULT_TRUNCATION,
    DomainTag,
    KernelExpr,
    PointSet,
    SeriesKernel,
    register_node,
)

logger = logging.getLogger(__name__)

MAX_IFS_DEPTH = 20
# (scale, shift) of the inverse branches x -> scale * x - shift
MIDDLE_THIRD = ((3.0, 0.0), (3.0, 2.0))


@dataclass(frozen=True)
class IfsFunction:
    base: Callable[[np.ndarray], np.ndarray]
    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError(f"IFS depth must be >= 0, got {self.depth}")


def _zero_extended(base: Callable[[np.ndarray], np.ndarray], xs: np.ndarray, upper: float = 1.0) -> np.ndarray:
    out = np.zeros(xs.shape, dtype=float)
    inside = (xs >= 0.0) & (xs <= upper)
    if np.any(inside):
        out[inside] = np.broadcast_to(base(xs[inside]), out[inside].shape)
    return out


def _transform(base: Callable[[np.ndarray], np.ndarray], depth: int, xs: np.ndarray) -> np.ndarray:
    if depth == 0:
        return _zero_extended(base, xs)
    return sum(_transform(base, depth - 1, scale * xs - shift) for scale, shift in MIDDLE_THIRD)


def _transform_scalar(base, depth: int, x: float, cache: Dict[Tuple[int, float], float]) -> float:
    key = (depth, x)
    if key in cache:
        return cache[key]
    if depth == 0:
        value = float(_zero_extended(base, np.array([x]))[0])
    else:
        value = sum(_transform_scalar(base, depth - 1, scale * x - shift, cache)
                    for scale, shift in MIDDLE_THIRD)
    cache[key] = value
    return value


def ifs_eval(f: IfsFunction, x: Union[float, np.ndarray],
             cache: Optional[Dict[Tuple[int, float], float]] = None) -> Union[float, np.ndarray]:
    """
    T^depth f at x by direct recursion.

    Points outside C_depth give literal zeros. A cache dict keyed by
    (depth, x) memoizes scalar sweeps over a grid.
    """
    if np.ndim(x) == 0:
        if cache is not None:
            return _transform_scalar(f.base, f.depth, float(x), cache)
        return float(_transform(f.base, f.depth, np.array([float(x)]))[0])
    return _transform(f.base, f.depth, np.asarray(x, dtype=float))


def support_intervals(depth: int) -> List[Tuple[Fraction, Fraction]]:
    """The 2^depth closed intervals of C_depth, sorted."""
    if depth < 0 or depth > MAX_IFS_DEPTH:
        raise ValueError(f"depth overflow: support intervals need 0 <= depth <= {MAX_IFS_DEPTH}, got {depth}")
    intervals = [(Fraction(0), Fraction(1))]
    for _ in range(depth):
        intervals = ([(a / 3, b / 3) for a, b in intervals]
                     + [((a + 2) / 3, (b + 2) / 3) for a, b in intervals])
    return sorted(intervals)


def cantor_member(x: Union[float, np.ndarray], depth: int) -> Union[bool, np.ndarray]:
    """True iff x lies in C_depth, following the same arithmetic as ifs_eval."""
    ys = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    member = (ys >= 0.0) & (ys <= 1.0)
    for _ in range(depth):
        left = 3.0 * ys
        right = 3.0 * ys - 2.0
        ys = np.where(left <= 1.0, left, right)
        member &= (left <= 1.0) | (right >= 0.0)
    if np.ndim(x) == 0:
        return bool(member[0])
    return member


def triadic_endpoints(depth: int) -> np.ndarray:
    """Sorted distinct endpoints of the intervals of C_depth."""
    ends = {float(end) for interval in support_intervals(depth) for end in interval}
    return np.array(sorted(ends))


def _series_frames(series: SeriesKernel, N: int, cutoff: float) -> Callable[[np.ndarray], np.ndarray]:
    weights = np.sqrt(series.coefficients(N))

    def frames(xs: np.ndarray) -> np.ndarray:
        out = np.zeros((xs.size, N))
        inside = (xs >= 0.0) & (xs <= cutoff)
        out[inside] = weights[None, :] * np.power.outer(xs[inside], np.arange(N))
        return out
    return frames


def transformed_frames(series: SeriesKernel, depth: int, xs: np.ndarray, N: int, cutoff: float = 1.0) -> np.ndarray:
    """Rows (T^depth f_i)(x) for the frame f_i(x) = sqrt(a_i) x^i, i < N."""
    frames = _series_frames(series, N, cutoff)

    def recurse(level: int, points: np.ndarray) -> np.ndarray:
        if level == 0:
            return frames(points)
        return sum(recurse(level - 1, scale * points - shift) for scale, shift in MIDDLE_THIRD)

    return recurse(depth, np.asarray(xs, dtype=float))


@register_node("ifs")
class IfsKernel(KernelExpr):
    """K_depth(x, y) = sum_i (T^depth f_i)(x) (T^depth f_i)(y) on the unit interval."""

    def __init__(self, series: SeriesKernel, depth: int, truncation: int = DEFAULT_TRUNCATION,
                 cutoff: float = 1.0):
        if depth < 0 or truncation < 1:
            raise ValueError("IFS kernels need depth >= 0 and truncation >= 1")
        if not 0.0 < cutoff <= 1.0:
            raise ValueError(f"Cutoff must lie in (0, 1], got {cutoff}")
        self.series_kernel = series
        self.depth = int(depth)
        self.truncation = int(truncation)
        self.cutoff = float(cutoff)

    @property
    def domain(self) -> Optional[DomainTag]:
        return DomainTag.UNIT_INTERVAL

    def frames(self, xs: np.ndarray) -> np.ndarray:
        return transformed_frames(self.series_kernel, self.depth, np.real(xs), self.truncation, self.cutoff)

    def _matrix(self, xs, ys, truncation):
        return (self.frames(xs) @ self.frames(ys).T).astype(complex)

    def to_descriptor(self) -> Dict:
        return {"node": "ifs",
                "params": {"depth": self.depth, "truncation": self.truncation, "cutoff": self.cutoff},
                "children": [{"node": "series", "series": self.series_kernel.to_descriptor()}]}

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "IfsKernel":
        params = descriptor["params"]
        series = SeriesKernel.from_descriptor(descriptor["children"][0]["series"])
        return cls(series, int(params["depth"]), int(params.get("truncation", DEFAULT_TRUNCATION)),
                   float(params.get("cutoff", 1.0)))


def ifs_kernel(K: SeriesKernel, depth: int, truncation: int = DEFAULT_TRUNCATION, cutoff: float = 1.0) -> IfsKernel:
    return IfsKernel(K, depth, truncation, cutoff)


def transformed_kernel(kernel: IfsKernel, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """
    (T K)(x, y) = sum_i (T f_i)(x) (T f_i)(y), expanded into the four
    evaluations K(a(x), b(y)) over pairs of inverse branches a, b.
    """
    xs, ys = np.real(np.asarray(xs)), np.real(np.asarray(ys))
    total = np.zeros((xs.size, ys.size))
    for scale_x, shift_x in MIDDLE_THIRD:
        for scale_y, shift_y in MIDDLE_THIRD:
            total += np.real(kernel._matrix(scale_x * xs - shift_x, scale_y * ys - shift_y, kernel.truncation))
    return total


def ifs_invariance_check(K: SeriesKernel, depth: int, pts: PointSet, tol: float = 1e-9,
                         truncation: int = DEFAULT_TRUNCATION, cutoff: float = 1.0) -> float:
    """
    max |(T K_depth)(x, y) - K_{depth+1}(x, y)| over the sample.

    Raises:
        ValueError: If the sample is not on the unit interval
    """
    if pts.domain != DomainTag.UNIT_INTERVAL:
        raise ValueError(f"Invariance is checked on unit-interval samples, got {pts.domain.value}")
    current = ifs_kernel(K, depth, truncation, cutoff)
    following = ifs_kernel(K, depth + 1, truncation, cutoff)
    lhs = transformed_kernel(current, pts.values, pts.values)
    rhs = np.real(following._matrix(pts.values, pts.values, truncation))
    deviation = float(np.max(np.abs(lhs - rhs)))
    if deviation > tol:
        logger.warning(f"T K_{depth} differs from K_{depth + 1} by {deviation:.3e}")
    return deviation


def frame_l2_bound(K: SeriesKernel, depth: int, xs: np.ndarray, truncation: int = DEFAULT_TRUNCATION,
                   cutoff: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Both sides of sum_i |T f_i(x)|^2 <= sum_i |f_i(3x)|^2 + |f_i(3x - 2)|^2
    with f_i = T^depth applied to the base frame.
    """
    xs = np.asarray(xs, dtype=float)
    branches = [transformed_frames(K, depth, scale * xs - shift, truncation, cutoff)
                for scale, shift in MIDDLE_THIRD]
    lhs = np.sum(np.abs(sum(branches)) ** 2, axis=1)
    rhs = sum(np.sum(np.abs(branch) ** 2, axis=1) for branch in branches)
    return lhs, rhs
