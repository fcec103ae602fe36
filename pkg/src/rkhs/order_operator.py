import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg

from rkhs.core import (
    PINV_RCOND,
    PSD_TOLERANCE,
    KernelError,
    KernelExpr,
    PointSet,
    PsdCertificate,
    SeriesKernel,
    gram,
    psd_check,
    resolve_truncation,
)

logger = logging.getLogger(__name__)

PENCIL_FLOOR = 1e-12  # directions of G_L below this fraction of the largest are dropped
SPECTRUM_LENGTH = 51


class SupportMismatchError(KernelError):
    """K has a nonzero coefficient where L has none."""
    pass


@dataclass
class OrderOperatorSample:
    matrix: np.ndarray  # C with G_L C = G_K
    eigenvalues: np.ndarray  # of G_L^{-1/2} G_K G_L^{-1/2} on the kept subspace
    effective_rank: int
    gram_k: np.ndarray = field(repr=False)
    gram_l: np.ndarray = field(repr=False)


def _whitening(gram_l: np.ndarray, floor: float):
    values, vectors = scipy.linalg.eigh(gram_l)
    keep = values > floor * max(float(values[-1]), 0.0)
    return vectors[:, keep] / np.sqrt(values[keep])[None, :], int(np.count_nonzero(keep))


def _gram_pencil(gram_k: np.ndarray, gram_l: np.ndarray, floor: float):
    whitening, rank = _whitening(gram_l, floor)
    pencil = whitening.conj().T @ gram_k @ whitening
    return scipy.linalg.eigvalsh((pencil + pencil.conj().T) / 2), rank


def _feature_pencil(k_series: SeriesKernel, l_series: SeriesKernel, xs: np.ndarray, N: int, floor: float):
    """
    Pencil spectrum from the monomial features of L, or None when K is not supported by L.

    With G_L = F F* and G_K = F D F*, D = diag(a_n(K) / a_n(L)), whitening by
    the SVD F = U S V* leaves V* D V: no small eigenvalue of G_L is inverted.
    """
    a, b = k_series.coefficients(N), l_series.coefficients(N)
    if np.any((b == 0) & (a > 0)):
        return None
    ratio = np.divide(a, b, out=np.zeros(N), where=b > 0)
    features = np.sqrt(b)[None, :] * np.power.outer(xs, np.arange(N))
    _, singular, vh = scipy.linalg.svd(features, full_matrices=False)
    keep = singular ** 2 > floor * float(singular[0]) ** 2
    rows = vh[keep]
    pencil = (rows * ratio[None, :]) @ rows.conj().T
    return scipy.linalg.eigvalsh((pencil + pencil.conj().T) / 2), int(np.count_nonzero(keep))


def order_operator_sampled(K: KernelExpr, L: KernelExpr, pts: PointSet,
                           truncation: Optional[int] = None,
                           floor: float = PENCIL_FLOOR) -> OrderOperatorSample:
    """
    Matrix of the ordering operator on span{L_x : x in pts} and its pencil spectrum.

    C solves G_L C = G_K in the least-squares sense. The eigenvalues are those
    of G_L^{-1/2} G_K G_L^{-1/2} on the directions of G_L above floor * max.
    Two series kernels are whitened through the features of L; other kernels
    through the eigendecomposition of G_L.
    """
    gram_k = gram(K, pts, truncation).entries
    gram_l = gram(L, pts, truncation).entries
    matrix = np.linalg.pinv(gram_l, rcond=PINV_RCOND, hermitian=True) @ gram_k
    spectrum = None
    k_series, l_series = K.series(), L.series()
    if k_series is not None and l_series is not None:
        N = max(resolve_truncation(K, pts.values, truncation), resolve_truncation(L, pts.values, truncation))
        spectrum = _feature_pencil(k_series, l_series, pts.values, N, floor)
    if spectrum is None:
        spectrum = _gram_pencil(gram_k, gram_l, floor)
    eigenvalues, rank = spectrum
    if rank < len(pts):
        logger.warning(f"G_L is rank deficient on the sample: effective rank {rank} of {len(pts)}")
    return OrderOperatorSample(matrix, eigenvalues, rank, gram_k, gram_l)


@dataclass
class DiagonalSpectrum:
    eigenvalues: List[Fraction]  # lambda_n = a_n(K) / a_n(L)
    inverse: List[Optional[Fraction]]  # 1 / lambda_n, None where lambda_n = 0
    contraction: bool  # sup lambda_n <= 1 over the computed range


def order_operator_diagonal(K: SeriesKernel, L: SeriesKernel, count: int = SPECTRUM_LENGTH) -> DiagonalSpectrum:
    """
    Exact spectrum of the ordering operator for two series kernels sharing the monomial basis.

    Raises:
        SupportMismatchError: If a_n(K) > 0 while a_n(L) = 0
    """
    eigenvalues, inverse = [], []
    for n in range(count):
        a_k, a_l = K.exact_coefficient(n), L.exact_coefficient(n)
        if a_l == 0:
            if a_k != 0:
                raise SupportMismatchError(f"a_{n}(K) = {a_k} but a_{n}(L) = 0")
            eigenvalues.append(Fraction(0))
            inverse.append(None)
            continue
        value = a_k / a_l
        eigenvalues.append(value)
        inverse.append(1 / value if value != 0 else None)
    return DiagonalSpectrum(eigenvalues, inverse, all(value <= 1 for value in eigenvalues))


def diagonal_reconstruction(K: SeriesKernel, L: SeriesKernel, count: int = SPECTRUM_LENGTH) -> List[Fraction]:
    """Coefficients a_n(L) lambda_n, which recover a_n(K) exactly."""
    spectrum = order_operator_diagonal(K, L, count)
    return [L.exact_coefficient(n) * value for n, value in enumerate(spectrum.eigenvalues)]


@dataclass
class IsometryReport:
    deviation: float
    condition: float


def isometry_check(K: KernelExpr, L: KernelExpr, pts: PointSet,
                   truncation: Optional[int] = None) -> IsometryReport:
    """max |(G_L C) - G_K|: the sampled form of <A^1/2 L_x, A^1/2 L_y>_L = K(x, y)."""
    sample = order_operator_sampled(K, L, pts, truncation)
    deviation = float(np.max(np.abs(sample.gram_l @ sample.matrix - sample.gram_k)))
    return IsometryReport(deviation, float(np.linalg.cond(sample.gram_l)))


def inclusion_constant(K: KernelExpr, L: KernelExpr, pts: PointSet,
                       truncation: Optional[int] = None) -> float:
    """Smallest c^2 with K <= c^2 L on the sample, the largest pencil eigenvalue."""
    sample = order_operator_sampled(K, L, pts, truncation)
    return max(float(sample.eigenvalues[-1]), 0.0)


@dataclass
class MultiplierReport:
    contractive: bool
    witness: PsdCertificate
    unit_ball: bool  # |phi| <= 1 at every sample point
    max_modulus: float


def multiplier_test(phi: Callable[[np.ndarray], np.ndarray], K: KernelExpr, pts: PointSet,
                    tol: float = PSD_TOLERANCE, truncation: Optional[int] = None) -> MultiplierReport:
    """
    Contractive-multiplier test through (1 - phi(z) conj(phi(w))) K(z, w).

    A not-psd witness refutes contractivity; a psd one is sample evidence.
    """
    values = np.broadcast_to(np.asarray(phi(pts.values), dtype=complex), pts.values.shape)
    entries = gram(K, pts, truncation).entries
    weighted = (1.0 - values[:, None] * np.conj(values)[None, :]) * entries
    witness = psd_check(weighted, tol)
    max_modulus = float(np.max(np.abs(values)))
    unit_ball = max_modulus <= 1.0 + tol
    return MultiplierReport(witness.psd and unit_ball, witness, unit_ball, max_modulus)
