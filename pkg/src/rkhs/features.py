import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from rkhs.algebra import Frame, MonomialFrame
from rkhs.core import (
    DEFAULT_TRUNCATION,
    TRUNCATION_TOLERANCE,
    DomainTag,
    KernelExpr,
    PointSet,
    SeriesKernel,
    auto_truncation,
    common_domain,
    gram,
    truncation_bound,
)

logger = logging.getLogger(__name__)

GAUSSIAN_CHUNK = 4096  # draws per counter-based stream


class SpaceTag(Enum):
    RKHS = "rkhs"
    L2 = "l2"
    DUAL_RKHS = "dual-rkhs"
    TENSOR = "tensor"
    DIRECT_SUM = "direct-sum"
    GAUSSIAN = "gaussian"
    DISTRIBUTIONAL = "distributional"


def _no_tail(r_eff: float, N: int) -> float:
    return 0.0


def _default_truncation(r_eff: float) -> int:
    return DEFAULT_TRUNCATION


def _values(xs) -> np.ndarray:
    if isinstance(xs, PointSet):
        return xs.values
    return np.atleast_1d(np.asarray(xs, dtype=complex))


@dataclass(frozen=True)
class FeatureMap:
    """
    Point -> coefficient sequence, materialized to length N on demand.

    coeff_fn(xs, N) returns one row of coordinates per point. tail_fn(r, N)
    bounds the omitted part of sum_n |phi_n(x)|^2 for |x| <= r and
    diag_fn(r) bounds the full diagonal.
    """
    coeff_fn: Callable[[np.ndarray, int], np.ndarray]
    space: SpaceTag
    label: str
    tail_fn: Callable[[float, int], float] = _no_tail
    diag_fn: Optional[Callable[[float], float]] = None
    truncation_fn: Callable[[float], int] = _default_truncation
    realize_fn: Optional[Callable[[np.ndarray, np.ndarray, int], np.ndarray]] = field(default=None, repr=False)
    domain: Optional[DomainTag] = None

    def choose_truncation(self, r_eff: float) -> int:
        return self.truncation_fn(r_eff)

    def tail_bound(self, r_eff: float, N: int) -> float:
        return self.tail_fn(r_eff, N)

    def diagonal_bound(self, r_eff: float) -> float:
        if self.diag_fn is not None:
            return self.diag_fn(r_eff)
        N = self.choose_truncation(r_eff)
        row = self.coeff_fn(np.array([r_eff], dtype=complex), N)
        return float(np.sum(np.abs(row) ** 2)) + self.tail_bound(r_eff, N)

    def _resolve(self, xs: np.ndarray, truncation: Optional[int]) -> int:
        if truncation is not None:
            return int(truncation)
        return self.choose_truncation(float(np.max(np.abs(xs))) if xs.size else 0.0)

    def coefficients(self, xs, truncation: Optional[int] = None) -> np.ndarray:
        values = _values(xs)
        return np.asarray(self.coeff_fn(values, self._resolve(values, truncation)), dtype=complex)

    def pairing(self, xs, ys, truncation: Optional[int] = None) -> np.ndarray:
        """<phi(x_i), phi(y_j)> as the l2 pairing of truncated sequences."""
        xv, yv = _values(xs), _values(ys)
        N = self._resolve(np.concatenate([xv, yv]), truncation)
        return self.coeff_fn(xv, N) @ np.conj(self.coeff_fn(yv, N)).T

    def gram(self, pts: PointSet, truncation: Optional[int] = None) -> np.ndarray:
        return self.pairing(pts, pts, truncation)

    def diagonal(self, xs, truncation: Optional[int] = None) -> np.ndarray:
        return np.sum(np.abs(self.coefficients(xs, truncation)) ** 2, axis=1)

    def realize(self, xs, zs, truncation: Optional[int] = None) -> np.ndarray:
        """phi(x) evaluated as a function of z in its target space."""
        if self.realize_fn is None:
            raise ValueError(f"Feature map {self.label} has no function realization")
        xv, zv = _values(xs), _values(zs)
        return self.realize_fn(xv, zv, self._resolve(xv, truncation))


def _series_diag(k: SeriesKernel) -> Callable[[float], float]:
    def diag(r_eff: float) -> float:
        N = auto_truncation(k, r_eff)
        head = np.polynomial.polynomial.polyval(r_eff * r_eff, k.coefficients(N))
        return float(head) + truncation_bound(k, r_eff, N)
    return diag


def _series_truncation(k: SeriesKernel) -> Callable[[float], int]:
    def choose(r_eff: float) -> int:
        return auto_truncation(k, r_eff)
    return choose


def _series_tail(k: SeriesKernel) -> Callable[[float, int], float]:
    def tail(r_eff: float, N: int) -> float:
        return truncation_bound(k, r_eff, N)
    return tail


def onb_feature(K: SeriesKernel) -> FeatureMap:
    """Coordinates sqrt(a_n) x^n of K_x in the monomial orthonormal basis."""
    frame = MonomialFrame(K)
    return FeatureMap(
        coeff_fn=frame.values,
        space=SpaceTag.RKHS,
        label=f"rkhs({K.family})",
        tail_fn=_series_tail(K),
        diag_fn=_series_diag(K),
        truncation_fn=_series_truncation(K),
        domain=frame.domain,
    )


def l2_feature(frame: Frame, count: int) -> FeatureMap:
    """x -> (f_n(x))_n in l2 for the first `count` frame functions."""
    def coeff_fn(xs: np.ndarray, N: int) -> np.ndarray:
        return frame.values(xs, min(N, count))

    truncation_fn = _default_truncation
    tail_fn = _no_tail
    if isinstance(frame, MonomialFrame):
        truncation_fn = _series_truncation(frame.series)
        tail_fn = _series_tail(frame.series)
    return FeatureMap(coeff_fn, SpaceTag.L2, "l2", tail_fn=tail_fn,
                      truncation_fn=truncation_fn, domain=frame.domain)


def dual_pair(K: SeriesKernel, L: SeriesKernel) -> Tuple[FeatureMap, FeatureMap]:
    """
    Feature maps of K into the RKHS of L and of L into the RKHS of K.

    phi(x) = sum_n f_n(x) g_n with f_n, g_n the monomial orthonormal bases
    of K and L; psi swaps the roles.
    """
    def build(source: SeriesKernel, target: SeriesKernel, label: str) -> FeatureMap:
        source_frame, target_frame = MonomialFrame(source), MonomialFrame(target)

        def realize(xs: np.ndarray, zs: np.ndarray, N: int) -> np.ndarray:
            return source_frame.values(xs, N) @ target_frame.values(zs, N).T

        return FeatureMap(
            coeff_fn=source_frame.values,
            space=SpaceTag.DUAL_RKHS,
            label=label,
            tail_fn=_series_tail(source),
            diag_fn=_series_diag(source),
            truncation_fn=_series_truncation(source),
            realize_fn=realize,
            domain=source_frame.domain,
        )

    phi = build(K, L, f"dual-rkhs({L.family})")
    psi = build(L, K, f"dual-rkhs({K.family})")
    return phi, psi


def tensor_feature(f1: FeatureMap, f2: FeatureMap) -> FeatureMap:
    """phi(x) = phi1(x) (x) phi2(x); the pairing is the Hadamard product K1 K2."""
    domain = common_domain(f1.domain, f2.domain)

    def coeff_fn(xs: np.ndarray, N: int) -> np.ndarray:
        left, right = f1.coeff_fn(xs, N), f2.coeff_fn(xs, N)
        return (left[:, :, None] * right[:, None, :]).reshape(xs.size, -1)

    def tail_fn(r_eff: float, N: int) -> float:
        return (f1.tail_bound(r_eff, N) * f2.diagonal_bound(r_eff)
                + f1.diagonal_bound(r_eff) * f2.tail_bound(r_eff, N))

    def diag_fn(r_eff: float) -> float:
        return f1.diagonal_bound(r_eff) * f2.diagonal_bound(r_eff)

    def truncation_fn(r_eff: float) -> int:
        return max(f1.choose_truncation(r_eff), f2.choose_truncation(r_eff))

    return FeatureMap(coeff_fn, SpaceTag.TENSOR, f"tensor({f1.label}, {f2.label})",
                      tail_fn=tail_fn, diag_fn=diag_fn, truncation_fn=truncation_fn, domain=domain)


def direct_sum_feature(fs: Sequence[FeatureMap], check_points: Optional[PointSet] = None) -> FeatureMap:
    """
    Concatenated coordinates; the pairing is sum_i K_i.

    Raises:
        ValueError: If the summed diagonal is not finite at a sample point
    """
    fs = list(fs)
    if not fs:
        raise ValueError("A direct sum needs at least one feature map")
    domain = None
    for fm in fs:
        domain = common_domain(domain, fm.domain)

    def coeff_fn(xs: np.ndarray, N: int) -> np.ndarray:
        return np.concatenate([fm.coeff_fn(xs, N) for fm in fs], axis=1)

    def tail_fn(r_eff: float, N: int) -> float:
        return math.fsum(fm.tail_bound(r_eff, N) for fm in fs)

    def diag_fn(r_eff: float) -> float:
        return math.fsum(fm.diagonal_bound(r_eff) for fm in fs)

    def truncation_fn(r_eff: float) -> int:
        return max(fm.choose_truncation(r_eff) for fm in fs)

    fm = FeatureMap(coeff_fn, SpaceTag.DIRECT_SUM, "direct-sum(" + ", ".join(f.label for f in fs) + ")",
                    tail_fn=tail_fn, diag_fn=diag_fn, truncation_fn=truncation_fn, domain=domain)
    if check_points is not None:
        diagonal = fm.diagonal(check_points)
        if not np.all(np.isfinite(diagonal)):
            raise ValueError("Direct-sum diagonal diverges at a sample point")
    return fm


@dataclass(eq=False)
class EmpiricalGram:
    entries: np.ndarray
    sample_count: int
    seed: int
    truncation: int
    points: PointSet = field(repr=False)
    space: SpaceTag = SpaceTag.GAUSSIAN


def gaussian_feature(K: SeriesKernel, pts: PointSet, M: int, seed: int,
                     truncation: Optional[int] = None,
                     chunk_size: int = GAUSSIAN_CHUNK) -> EmpiricalGram:
    """
    Monte-Carlo second moments of W_x = sum_n sqrt(a_n) x^n Z_n with Z_n iid N(0, 1).

    Draws are split in fixed chunks, each with its own Philox stream spawned
    from SeedSequence(seed), so the result is bit-identical for a given seed.

    Raises:
        ValueError: If M < 1
    """
    if M < 1:
        raise ValueError(f"Sample count M must be >= 1, got {M}")
    fm = onb_feature(K)
    N = truncation if truncation is not None else fm.choose_truncation(pts.max_modulus)
    phi = fm.coefficients(pts, N)
    n_chunks = -(-M // chunk_size)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    accumulated = np.zeros((len(pts), len(pts)), dtype=complex)
    for index, stream in enumerate(streams):
        size = min(chunk_size, M - index * chunk_size)
        rng = np.random.Generator(np.random.Philox(stream))
        draws = phi @ rng.standard_normal((N, size))
        accumulated += draws @ draws.conj().T
    entries = accumulated / M
    entries = (entries + entries.conj().T) / 2
    logger.debug(f"Gaussian realization: M = {M}, seed = {seed}, truncation = {N}")
    return EmpiricalGram(entries, M, seed, N, pts)


@dataclass
class FeatureCheck:
    passed: bool
    max_deviation: float
    allowance: float
    truncation: int


def verify_feature(fm: FeatureMap, K: KernelExpr, pts: PointSet, tol: float = 1e-10,
                   truncation: Optional[int] = None) -> FeatureCheck:
    """max |<fm(x_i), fm(x_j)> - K(x_i, x_j)| against tol plus the truncation tail."""
    r_eff = pts.max_modulus
    N = truncation if truncation is not None else fm.choose_truncation(r_eff)
    deviation = float(np.max(np.abs(fm.gram(pts, N) - gram(K, pts).entries)))
    allowance = tol + fm.tail_bound(r_eff, N)
    if K.series() is not None:
        allowance += TRUNCATION_TOLERANCE  # auto-truncated kernel evaluation
    return FeatureCheck(deviation <= allowance, deviation, allowance, N)
