import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np

from rkhs.algebra import power
from rkhs.core import (
    PSD_TOLERANCE,
    GramMatrix,
    KernelError,
    KernelExpr,
    PointSet,
    PsdCertificate,
    SeriesKernel,
    constant,
    gram,
    psd_check,
)

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6
CAUCHY_TOLERANCE = 1e-13  # relative increment at which a monotone family is taken as converged
TREND_WINDOW = 8  # consecutive small increments needed for convergence; also the growth-trend window


class Basis(Enum):
    REFUTED = "refuted"  # a negative eigenvalue proves the order fails
    SAMPLED = "sampled"  # psd on the sample only: evidence
    COEFFICIENTS = "coefficients"  # a_k(K) <= a_k(L) for every k: proof


@dataclass
class OrderVerdict:
    holds: bool
    witness: PsdCertificate
    sample: PointSet = field(repr=False)
    basis: Basis = Basis.SAMPLED

    @property
    def is_proof(self) -> bool:
        return self.basis != Basis.SAMPLED


class ChainPremiseError(KernelError):
    """An order chain or monotone family fails one of its order premises."""

    def __init__(self, message: str, verdicts: List[OrderVerdict], index: int):
        super().__init__(message)
        self.verdicts = verdicts
        self.index = index


class SupConditionError(KernelError):
    """The diagonal of a monotone family grows without bound."""
    pass


def series_dominates(K: SeriesKernel, L: SeriesKernel) -> Optional[bool]:
    """
    Decide a_k(K) <= a_k(L) for all k when the families allow it.

    Returns None when the coefficients cannot be compared exhaustively.
    """
    if K.family == L.family == "rising":
        return K.params[0] <= L.params[0]
    if K.family == L.family == "exponential":
        return K.params[0] <= L.params[0]
    if K.family == "polynomial":
        return all(a <= L.exact_coefficient(k) for k, a in enumerate(K.params))
    return None


def _verdict_from_grams(gram_k: GramMatrix, gram_l: GramMatrix, pts: PointSet, tol: float) -> OrderVerdict:
    witness = psd_check(gram_l.entries - gram_k.entries, tol)
    basis = Basis.SAMPLED if witness.psd else Basis.REFUTED
    return OrderVerdict(witness.psd, witness, pts, basis)


def loewner_leq(K: KernelExpr, L: KernelExpr, pts: PointSet,
                tol: float = PSD_TOLERANCE, truncation: Optional[int] = None) -> OrderVerdict:
    """
    Certify K <= L on a sample through the difference Gram G_L - G_K.

    A not-psd verdict refutes the order. A psd verdict is sample evidence,
    upgraded to a proof when the series coefficients of L dominate those of K.
    """
    verdict = _verdict_from_grams(gram(K, pts, truncation), gram(L, pts, truncation), pts, tol)
    if verdict.holds:
        k_series, l_series = K.series(), L.series()
        if k_series is not None and l_series is not None and series_dominates(k_series, l_series):
            verdict.basis = Basis.COEFFICIENTS
    return verdict


def verify_chain(K: KernelExpr, pts: PointSet, n_max: int,
                 tol: float = PSD_TOLERANCE, truncation: Optional[int] = None) -> List[OrderVerdict]:
    """
    Verdicts for 1 <= K, K <= K^2, ..., K^(n_max-1) <= K^n_max.

    Raises:
        ChainPremiseError: If 1 <= K fails on the sample (index 0)
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    premise = loewner_leq(constant(1), K, pts, tol, truncation)
    if not premise.holds:
        raise ChainPremiseError(
            f"Chain premise 1 <= K fails (min eigenvalue {premise.witness.min_eigenvalue:.3e})",
            [premise], 0)
    verdicts = [premise]
    for n in range(1, n_max):
        verdict = loewner_leq(power(K, n), power(K, n + 1), pts, tol, truncation)
        logger.info(f"K^{n} <= K^{n + 1}: {verdict.witness.verdict} "
                    f"(min eigenvalue {verdict.witness.min_eigenvalue:.3e})")
        verdicts.append(verdict)
    return verdicts


@dataclass
class MonotoneLimit:
    limit: np.ndarray
    sup_diag: np.ndarray
    increments: List[float]
    verdicts: List[OrderVerdict]
    terms: int
    converged: bool


def monotone_limit(seq: Callable[[int], KernelExpr], pts: PointSet, n_terms: int,
                   tol: float = PSD_TOLERANCE, truncation: Optional[int] = None) -> MonotoneLimit:
    """
    Pointwise limit of an increasing kernel family K_1 <= K_2 <= ... on a sample.

    Parameters:
        seq: n -> K_n for n = 1, 2, ...
        pts: Sample on which the limit is estimated
        n_terms: Largest index evaluated

    Raises:
        ChainPremiseError: If consecutive terms are not ordered on the sample
        SupConditionError: If the diagonal grows by more than DIVERGENCE_FACTOR,
            or the increments are still growing when n_terms is reached
    """
    if n_terms < 1:
        raise ValueError(f"n_terms must be >= 1, got {n_terms}")
    previous = gram(seq(1), pts, truncation)
    first_diag = float(np.max(previous.entries.diagonal().real))
    increments: List[float] = []
    verdicts: List[OrderVerdict] = []
    converged = False
    quiet = 0
    n = 1
    while n < n_terms:
        n += 1
        current = gram(seq(n), pts, truncation)
        verdict = _verdict_from_grams(previous, current, pts, tol)
        verdicts.append(verdict)
        if not verdict.holds:
            raise ChainPremiseError(f"Family is not increasing at n = {n}", verdicts, len(verdicts) - 1)
        diag = float(np.max(current.entries.diagonal().real))
        if first_diag > 0 and diag / first_diag > DIVERGENCE_FACTOR:
            raise SupConditionError(
                f"sup-condition violated: diagonal grew by {diag / first_diag:.3e} within {n} terms")
        increment = float(np.max(np.abs(current.entries - previous.entries)))
        increments.append(increment)
        previous = current
        quiet = quiet + 1 if increment <= CAUCHY_TOLERANCE * (1.0 + diag) else 0
        if quiet >= TREND_WINDOW:
            converged = True
            break

    if not converged and len(increments) >= 2:
        window = np.array(increments[-TREND_WINDOW:])
        if np.all(window > 0) and np.mean(np.diff(np.log(window))) >= 0:
            raise SupConditionError(
                f"sup-condition violated: increments still growing after {n} terms "
                f"(last {increments[-1]:.3e})")

    logger.debug(f"Monotone family stopped after {n} terms (converged={converged})")
    return MonotoneLimit(
        limit=previous.entries,
        sup_diag=previous.entries.diagonal().real.copy(),
        increments=increments,
        verdicts=verdicts,
        terms=n,
        converged=converged,
    )


class Dominance(Enum):
    SUPER = "super"
    SUB = "sub"
    EXACT = "exact"
    INCOMPARABLE = "incomparable"


def feature_dominance(fm, K: KernelExpr, pts: PointSet,
                      tol: float = PSD_TOLERANCE, truncation: Optional[int] = None) -> Dominance:
    """
    Compare the Gram of a feature map with the Gram of K in the Loewner order.

    super: G_fm - G_K is psd only; sub: G_K - G_fm only; exact: both.
    """
    kernel_gram = gram(K, pts, truncation).entries
    feature_gram = fm.gram(pts, truncation)
    above = psd_check(feature_gram - kernel_gram, tol).psd
    below = psd_check(kernel_gram - feature_gram, tol).psd
    if above and below:
        return Dominance.EXACT
    if above:
        return Dominance.SUPER
    if below:
        return Dominance.SUB
    return Dominance.INCOMPARABLE
