"""
Experiment runner: one function per experiment, each returning its
assertions, CSV artifacts and the tolerances and truncations it used.
"""
import argparse
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from rkhs.algebra import CombineOp, combine, power, series_of
from rkhs.core import (
    DEFAULT_TRUNCATION,
    PSD_TOLERANCE,
    DomainError,
    DomainTag,
    KernelError,
    KernelExpr,
    PointSet,
    Series,
    SeriesDivergenceError,
    SeriesKernel,
    gram,
    psd_check,
    resolve_truncation,
)
from rkhs.dual_space import (
    EXPANSION_TOLERANCE,
    ExpansionMismatchError,
    apply_distribution,
    delta_expand,
    delta_expansion,
    distributional_feature,
    dual_pairing,
)
from rkhs.features import gaussian_feature, onb_feature, tensor_feature, verify_feature
from rkhs.fractal import (
    IfsFunction,
    cantor_member,
    ifs_eval,
    ifs_invariance_check,
    ifs_kernel,
    support_intervals,
)
from rkhs.ktransform import (
    DiscreteMeasure,
    adjoint_gap,
    energy,
    isometry_gap,
    k_inverse,
    roundtrip_error,
    tk_apply,
)
from rkhs.order_operator import (
    PENCIL_FLOOR,
    SPECTRUM_LENGTH,
    diagonal_reconstruction,
    inclusion_constant,
    isometry_check,
    multiplier_test,
    order_operator_diagonal,
    order_operator_sampled,
)
from rkhs.ordering import (
    CAUCHY_TOLERANCE,
    DIVERGENCE_FACTOR,
    ChainPremiseError,
    SupConditionError,
    feature_dominance,
    monotone_limit,
    verify_chain,
)
from sampling import parse_kernel, parse_points
from utils import (
    ConfigError,
    export_results,
    gram_rows,
    load_experiment_config,
    load_kernel,
    parse_scalar,
    gram_to_dict,
    point_rows,
)

logger = logging.getLogger(__name__)

CHAIN_FLOOR = 1e-8  # smallest admissible eigenvalue of a difference Gram in an order chain
LIMIT_TOLERANCE = 1e-10
IDENTITY_TOLERANCE = 1e-12
SPECTRUM_SLACK = 1e-8
GAUSSIAN_SIGMAS = 5.0
GAUSSIAN_COVERAGE = 0.95
INVARIANCE_TOLERANCE = 1e-9
ROUNDTRIP_TOLERANCE = 1e-9
IFS_GRID_END = 1.0 - 1e-6
RANDOM_SUPPORT_POINTS = 10_000

DEFAULT_POINTS = {
    "gram": "disk:20:r0.9",
    "psd": "disk:20:r0.9",
    "order-chain": "disk:40:r0.9",
    "monotone-limit": "disk:20:r0.7",
    "feature-verify": "disk:20:r0.8",
    "gaussian-mc": "disk:10:r0.8",
    "order-operator": "disk:15:r0.9",
    "multiplier": "disk:20:r0.9",
    "ifs-kernel": "triadic:4",
    "ktransform-roundtrip": "disk:6:r0.7",
}
MONOTONE_FAMILIES = {"partial-sum": 200, "power": 30}  # family -> default number of terms
POWER_FAMILY_POINTS = "explicit:[0.6]"
FEATURES = ("onb", "tensor", "distributional")
DEFAULT_MULTIPLIERS = ["z", "0.5", "2z"]


@dataclass
class ExperimentConfig:
    experiment: str
    kernel: str = "szego"
    kernel_json: Optional[str] = None
    against: str = "bergman"
    points: Optional[str] = None
    seed: int = 0
    out: str = "results"
    tolerance: float = PSD_TOLERANCE
    truncation: Optional[int] = None
    n_max: int = 4
    n_terms: Optional[int] = None
    family: str = "partial-sum"
    feature: str = "onb"
    M: int = 100_000
    count: int = SPECTRUM_LENGTH
    n_range: int = 15
    degree: int = 10
    polynomials: int = 100
    evaluations: int = 20
    trials: int = 20
    depths: Optional[str] = None
    grid: Optional[int] = None
    max_depth: Optional[int] = None
    phi: List[str] = field(default_factory=lambda: list(DEFAULT_MULTIPLIERS))
    verbose: bool = False

    def validate(self) -> None:
        """
        Raises:
            ConfigError: If any setting is out of range
        """
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"Unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
        if self.M < 1:
            raise ConfigError(f"Sample count M must be >= 1, got {self.M}")
        if self.tolerance <= 0:
            raise ConfigError(f"Tolerance must be positive, got {self.tolerance}")
        if self.truncation is not None and self.truncation < 1:
            raise ConfigError(f"Truncation must be >= 1, got {self.truncation}")
        for name in ("n_max", "count", "degree", "polynomials", "evaluations", "trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_range < 0:
            raise ConfigError(f"n_range must be >= 0, got {self.n_range}")
        if self.family not in MONOTONE_FAMILIES:
            raise ConfigError(f"Unknown monotone family {self.family!r}")
        if self.feature not in FEATURES:
            raise ConfigError(f"Unknown feature map {self.feature!r}")


@dataclass
class ExperimentResult:
    assertions: Dict[str, bool]
    records: Dict = field(default_factory=dict)
    files: Dict[str, Tuple[List[str], List[List]]] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    truncations: Dict[str, int] = field(default_factory=dict)
    documents: Dict[str, Dict] = field(default_factory=dict)


def parse_depths(text: str) -> List[int]:
    """ "0..5" or "0,2,4" -> list of depths."""
    try:
        if ".." in text:
            start, stop = text.split("..")
            depths = list(range(int(start), int(stop) + 1))
        else:
            depths = [int(part) for part in text.split(",")]
    except ValueError as e:
        raise ConfigError(f"Error parsing depths {text!r}: {e}")
    if not depths or min(depths) < 0:
        raise ConfigError(f"Depths must be a nonempty range of nonnegative integers, got {text!r}")
    return depths


def parse_multiplier(token: str) -> Tuple[Callable[[np.ndarray], np.ndarray], complex]:
    """ "cz" -> z -> c z and "c" -> the constant c; returns the function and c."""
    text = token.strip()
    try:
        if text.endswith("z"):
            c = parse_scalar(text[:-1] or "1")
            return (lambda zs: c * zs), c
        c = parse_scalar(text)
        return (lambda zs: np.full(np.shape(zs), c, dtype=complex)), c
    except ValueError as e:
        raise ConfigError(f"Error parsing multiplier {token!r}: {e}")


def _kernel(config: ExperimentConfig) -> KernelExpr:
    if config.kernel_json:
        return load_kernel(config.kernel_json)
    return parse_kernel(config.kernel)


def _series(kernel: KernelExpr) -> SeriesKernel:
    try:
        return series_of(kernel)
    except ValueError as e:
        raise ConfigError(f"This experiment needs a power-series kernel: {e}")


def _points(config: ExperimentConfig, seed_offset: int = 0) -> PointSet:
    default = DEFAULT_POINTS[config.experiment]
    if config.experiment == "monotone-limit" and config.family == "power":
        default = POWER_FAMILY_POINTS
    return parse_points(config.points or default, config.seed + seed_offset)


def _truncation(kernel: KernelExpr, pts: PointSet, config: ExperimentConfig) -> int:
    return resolve_truncation(kernel, pts.values, config.truncation)


# Experiments

def run_gram(config: ExperimentConfig) -> ExperimentResult:
    K, pts = _kernel(config), _points(config)
    g = gram(K, pts, config.truncation)
    return ExperimentResult(
        assertions={
            "finite": bool(np.all(np.isfinite(g.entries))),
            "hermitian": bool(np.array_equal(g.entries, g.entries.conj().T)),
        },
        records={"size": len(g)},
        files={"gram.csv": (["i", "j", "value"], gram_rows(g.entries)),
               "points.csv": (["i", "value"], point_rows(pts))},
        truncations={"gram": g.truncation},
        documents={"gram.json": gram_to_dict(g)},
    )


def run_psd(config: ExperimentConfig) -> ExperimentResult:
    K, pts = _kernel(config), _points(config)
    g = gram(K, pts, config.truncation)
    certificate = psd_check(g, config.tolerance)
    logger.info(f"Gram of {len(pts)} points: {certificate.verdict} "
                f"(min eigenvalue {certificate.min_eigenvalue:.3e})")
    return ExperimentResult(
        assertions={"psd": certificate.psd},
        records={"verdict": certificate.verdict, "min_eigenvalue": certificate.min_eigenvalue,
                 "spectral_radius": certificate.spectral_radius},
        files={"witness.csv": (["i", "value"], [[str(i), v] for i, v in enumerate(certificate.witness)]),
               "points.csv": (["i", "value"], point_rows(pts))},
        tolerances={"psd": config.tolerance},
        truncations={"gram": g.truncation},
    )


def run_order_chain(config: ExperimentConfig) -> ExperimentResult:
    K, pts = _kernel(config), _points(config)
    try:
        verdicts = verify_chain(K, pts, config.n_max, config.tolerance, config.truncation)
        premise = True
    except ChainPremiseError as e:
        logger.error(f"{e}")
        verdicts, premise = e.verdicts, False
    rows = [[str(n), v.witness.min_eigenvalue, v.witness.verdict, v.basis.value] for n, v in enumerate(verdicts)]
    return ExperimentResult(
        assertions={
            "premise": premise,
            "chain_holds": premise and all(v.holds for v in verdicts),
            "min_eigenvalue_floor": all(v.witness.min_eigenvalue >= -CHAIN_FLOOR for v in verdicts),
        },
        records={"links": len(verdicts)},
        files={"order_chain.csv": (["n", "min_eig", "verdict", "basis"], rows)},
        tolerances={"psd": config.tolerance, "chain_floor": CHAIN_FLOOR},
        truncations={f"K^{config.n_max}": _truncation(power(K, config.n_max), pts, config)},
    )


def run_monotone_limit(config: ExperimentConfig) -> ExperimentResult:
    K, pts = _kernel(config), _points(config)
    n_terms = config.n_terms or MONOTONE_FAMILIES[config.family]
    if config.family == "partial-sum":
        series = _series(K)
        family = lambda n: Series(SeriesKernel.partial(series, n - 1))  # noqa: E731
    else:
        family = lambda n: power(K, n)  # noqa: E731
    tolerances = {"psd": config.tolerance, "cauchy": CAUCHY_TOLERANCE, "divergence_factor": DIVERGENCE_FACTOR}

    try:
        result = monotone_limit(family, pts, n_terms, config.tolerance, config.truncation)
    except SupConditionError as e:
        logger.info(f"{e}")
        return ExperimentResult(
            assertions={"sup_condition_flagged": config.family == "power"},
            records={"flagged": True, "message": str(e)},
            tolerances=tolerances,
        )
    except ChainPremiseError as e:
        logger.error(f"{e}")
        return ExperimentResult(assertions={"increasing": False}, records={"index": e.index},
                                tolerances=tolerances)

    assertions = {"increasing": True}
    records = {"terms": result.terms, "converged": result.converged, "flagged": False}
    if config.family == "partial-sum":
        exact = gram(K, pts, config.truncation)
        deviation = float(np.max(np.abs(result.limit - exact.entries)))
        assertions["converged"] = result.converged
        assertions["matches_kernel"] = deviation <= LIMIT_TOLERANCE
        records["max_deviation"] = deviation
        tolerances["limit"] = LIMIT_TOLERANCE
    else:
        assertions["sup_condition_flagged"] = False
    rows = [[str(n + 2), increment] for n, increment in enumerate(result.increments)]
    return ExperimentResult(
        assertions=assertions,
        records=records,
        files={"increments.csv": (["n", "increment"], rows),
               "limit_diagonal.csv": (["i", "value"], [[str(i), v] for i, v in enumerate(result.sup_diag)])},
        tolerances=tolerances,
    )


def run_feature_verify(config: ExperimentConfig) -> ExperimentResult:
    K, pts = _kernel(config), _points(config)
    series = _series(K)
    target = K
    assertions = {}
    records = {}
    if config.feature == "onb":
        fm = onb_feature(series)
    elif config.feature == "distributional":
        fm = distributional_feature(series)
    else:
        fm = tensor_feature(onb_feature(series), onb_feature(series))
        target = power(K, 2)
        product = gram(combine(CombineOp.PRODUCT, K, K), pts, config.truncation).entries
        closed = gram(target, pts, config.truncation).entries
        gap = float(np.max(np.abs(product - closed)))
        assertions["product_matches_power"] = gap <= IDENTITY_TOLERANCE * (1.0 + float(np.max(np.abs(closed))))
        records["product_gap"] = gap
    check = verify_feature(fm, target, pts, truncation=config.truncation)
    assertions["feature_matches_kernel"] = check.passed
    records.update({"label": fm.label, "max_deviation": check.max_deviation,
                    "dominance": feature_dominance(fm, target, pts, config.tolerance, config.truncation).value})
    return ExperimentResult(
        assertions=assertions,
        records=records,
        tolerances={"allowance": check.allowance, "identity": IDENTITY_TOLERANCE},
        truncations={"feature": check.truncation},
    )


def run_gaussian_mc(config: ExperimentConfig) -> ExperimentResult:
    K, pts = _kernel(config), _points(config)
    series = _series(K)
    empirical = gaussian_feature(series, pts, config.M, config.seed, config.truncation)
    repeat = gaussian_feature(series, pts, config.M, config.seed, config.truncation)
    exact = gram(K, pts, config.truncation).entries
    diagonal = exact.diagonal().real
    allowance = GAUSSIAN_SIGMAS * np.sqrt(np.outer(diagonal, diagonal)) / np.sqrt(config.M)
    within = np.abs(empirical.entries - exact) <= allowance
    coverage = float(np.mean(within))
    logger.info(f"Gaussian realization with M = {config.M}: {coverage:.1%} of entries within {GAUSSIAN_SIGMAS} sigma")
    return ExperimentResult(
        assertions={"coverage": coverage >= GAUSSIAN_COVERAGE,
                    "reproducible": bool(np.array_equal(empirical.entries, repeat.entries))},
        records={"coverage": coverage, "samples": config.M},
        files={"empirical_gram.csv": (["i", "j", "value"], gram_rows(empirical.entries))},
        tolerances={"sigmas": GAUSSIAN_SIGMAS, "coverage": GAUSSIAN_COVERAGE},
        truncations={"feature": empirical.truncation},
    )


def run_dual_pairing(config: ExperimentConfig) -> ExperimentResult:
    series = _series(_kernel(config))
    rows = []
    exact = True
    for n in range(config.n_range + 1):
        for m in range(config.n_range + 1):
            value = dual_pairing(series, n, m)
            exact &= value == (1 if n == m else 0)
            rows.append([str(n), str(m), value])
    return ExperimentResult(
        assertions={"orthonormal": exact},
        records={"n_range": config.n_range},
        files={"dual_pairing.csv": (["n", "m", "value"], rows)},
    )


def run_delta_expand(config: ExperimentConfig) -> ExperimentResult:
    series = _series(_kernel(config))
    rng = np.random.default_rng(config.seed)
    N = config.degree + 1
    rows = []
    max_error, matched = 0.0, True
    for trial in range(config.polynomials):
        degree = int(rng.integers(0, config.degree + 1))
        p = rng.standard_normal(degree + 1)
        xs = rng.uniform(-1.0, 1.0, config.evaluations)
        worst = 0.0
        for x in xs:
            direct = complex(np.polynomial.polynomial.polyval(x, p))
            try:
                expanded = delta_expand(complex(x), N, p)
            except ExpansionMismatchError as e:
                logger.error(f"{e}")
                matched = False
                continue
            via_distribution = apply_distribution(delta_expansion(complex(x), N, series), p, series)
            worst = max(worst, abs(expanded - direct), abs(via_distribution - direct))
        rows.append([str(trial), str(degree), worst])
        max_error = max(max_error, worst)
    return ExperimentResult(
        assertions={"expansion_matches": matched and max_error <= EXPANSION_TOLERANCE},
        records={"max_error": max_error},
        files={"delta_expand.csv": (["trial", "degree", "max_error"], rows)},
        tolerances={"expansion": EXPANSION_TOLERANCE},
        truncations={"expansion": N},
    )


def run_order_operator(config: ExperimentConfig) -> ExperimentResult:
    K, L, pts = _kernel(config), parse_kernel(config.against), _points(config)
    sample = order_operator_sampled(K, L, pts, config.truncation)
    in_range = bool(np.all(sample.eigenvalues >= -SPECTRUM_SLACK) and np.all(sample.eigenvalues <= 1 + SPECTRUM_SLACK))
    assertions = {"sampled_spectrum_in_unit_interval": in_range}
    files = {"pencil_eigenvalues.csv": (["k", "eigenvalue"],
                                        [[str(k), v] for k, v in enumerate(sample.eigenvalues)])}
    records = {"effective_rank": sample.effective_rank,
               "isometry_deviation": isometry_check(K, L, pts, config.truncation).deviation,
               "inclusion_constant": inclusion_constant(K, L, pts, config.truncation)}
    k_series, l_series = K.series(), L.series()
    if k_series is not None and l_series is not None:
        spectrum = order_operator_diagonal(k_series, l_series, config.count)
        reconstructed = diagonal_reconstruction(k_series, l_series, config.count)
        assertions["diagonal_contraction"] = spectrum.contraction
        assertions["diagonal_reconstructs_k"] = all(
            value == k_series.exact_coefficient(n) for n, value in enumerate(reconstructed))
        files["diagonal_spectrum.csv"] = (["n", "lambda", "lambda_float"],
                                          [[str(n), str(v), float(v)] for n, v in enumerate(spectrum.eigenvalues)])
    return ExperimentResult(
        assertions=assertions,
        records=records,
        files=files,
        tolerances={"spectrum_slack": SPECTRUM_SLACK, "pencil_floor": PENCIL_FLOOR},
        truncations={"K": _truncation(K, pts, config), "L": _truncation(L, pts, config)},
    )


def run_multiplier(config: ExperimentConfig) -> ExperimentResult:
    K, pts = _kernel(config), _points(config)
    disk_kernel = K.domain in (DomainTag.DISK, DomainTag.REAL_INTERVAL)
    assertions, rows = {}, []
    for token in config.phi:
        phi, c = parse_multiplier(token)
        report = multiplier_test(phi, K, pts, config.tolerance, config.truncation)
        weighted_diagonal = (1.0 - np.abs(phi(pts.values)) ** 2) * gram(K, pts, config.truncation).entries.diagonal().real
        rows.append([token, report.witness.min_eigenvalue, report.witness.verdict,
                     str(report.contractive), float(np.min(weighted_diagonal))])
        if disk_kernel:
            # on the disk kernels the shift and the constants have multiplier norm |c|
            assertions[f"phi={token}"] = report.contractive == (abs(c) <= 1.0)
    return ExperimentResult(
        assertions=assertions,
        records={"cases": len(config.phi)},
        files={"multipliers.csv": (["phi", "min_eig", "verdict", "contractive", "min_diagonal"], rows)},
        tolerances={"psd": config.tolerance},
        truncations={"K": _truncation(K, pts, config)},
    )


def _unit_base(xs: np.ndarray) -> np.ndarray:
    return np.ones_like(xs)


def run_ifs_figure(config: ExperimentConfig) -> ExperimentResult:
    depths = parse_depths(config.depths or "0..5")
    grid = config.grid or 2187
    xs = np.arange(grid + 1) / grid
    assertions, files = {}, {}
    for n in depths:
        values = ifs_eval(IfsFunction(_unit_base, n), xs)
        assertions[f"grid_support_depth_{n}"] = bool(np.array_equal(values != 0, cantor_member(xs, n)))
        files[f"ifs_depth_{n}.csv"] = (["x", "value"], [[x, v] for x, v in zip(xs, values)])

    rng = np.random.default_rng(config.seed)
    uniform_xs = rng.uniform(0.0, 1.0, RANDOM_SUPPORT_POINTS)
    for n in range(max((config.max_depth if config.max_depth is not None else 8), max(depths)) + 1):
        values = ifs_eval(IfsFunction(_unit_base, n), uniform_xs)
        outside = ~cantor_member(uniform_xs, n)
        intervals = support_intervals(n)
        assertions[f"support_law_depth_{n}"] = bool(
            np.all(values[outside] == 0)
            and len(intervals) == 2 ** n
            and sum((b - a for a, b in intervals), Fraction(0)) == Fraction(2, 3) ** n)
    return ExperimentResult(assertions=assertions, records={"depths": depths, "grid": grid}, files=files)


def run_ifs_kernel(config: ExperimentConfig) -> ExperimentResult:
    series = _series(_kernel(config))
    depths = parse_depths(config.depths or "0..3")
    N = config.truncation or DEFAULT_TRUNCATION
    grid = np.linspace(0.0, IFS_GRID_END, config.grid or 200)
    surface_points = PointSet(grid, DomainTag.UNIT_INTERVAL)
    header = ["x"] + [repr(float(y)) for y in grid]
    files = {}
    for n in depths:
        surface = gram(ifs_kernel(series, n, N), surface_points).entries.real
        files[f"ifs_kernel_depth_{n}.csv"] = (header, [[x] + list(row) for x, row in zip(grid, surface)])

    pts = _points(config)
    assertions, rows = {}, []
    for n in range(((config.max_depth if config.max_depth is not None else 4)) + 1):
        deviation = ifs_invariance_check(series, n, pts, INVARIANCE_TOLERANCE, N)
        certificate = psd_check(gram(ifs_kernel(series, n, N), pts), config.tolerance)
        assertions[f"invariance_depth_{n}"] = deviation <= INVARIANCE_TOLERANCE
        assertions[f"psd_depth_{n}"] = certificate.psd
        rows.append([str(n), deviation, certificate.min_eigenvalue])
    files["ifs_invariance.csv"] = (["depth", "max_deviation", "min_eig"], rows)
    return ExperimentResult(
        assertions=assertions,
        records={"depths": depths},
        files=files,
        tolerances={"invariance": INVARIANCE_TOLERANCE, "psd": config.tolerance},
        truncations={"frame": N},
    )


def _random_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def run_ktransform_roundtrip(config: ExperimentConfig) -> ExperimentResult:
    K = _kernel(config)
    rng = np.random.default_rng(config.seed)
    rows, measures = [], []
    worst = {"roundtrip": 0.0, "adjoint": 0.0, "isometry": 0.0, "penrose": 0.0}
    assertions = {"roundtrip": True, "adjoint": True, "isometry": True, "penrose": True}
    for trial in range(config.trials):
        pts = _points(config, seed_offset=trial)
        mu = DiscreteMeasure(pts, _random_weights(rng, len(pts)))
        measures.append(mu.to_dict())
        f = tk_apply(DiscreteMeasure(pts, _random_weights(rng, len(pts))), K, config.truncation)(pts)
        errors = {
            "roundtrip": roundtrip_error(mu, K, config.truncation),
            "adjoint": adjoint_gap(mu, f, K, config.truncation),
            "isometry": isometry_gap(mu, K, config.truncation),
        }
        recovered = k_inverse(f, pts, K, config.truncation)
        again = k_inverse(tk_apply(recovered, K, config.truncation)(pts), pts, K, config.truncation)
        errors["penrose"] = float(np.max(np.abs(again.weights - recovered.weights)))
        mu_energy = energy(mu, K, config.truncation)
        limits = {
            "roundtrip": ROUNDTRIP_TOLERANCE,
            "adjoint": ROUNDTRIP_TOLERANCE * (1.0 + float(np.linalg.norm(f) * np.linalg.norm(mu.weights))),
            "isometry": IDENTITY_TOLERANCE * (1.0 + mu_energy),
            "penrose": ROUNDTRIP_TOLERANCE * (1.0 + float(np.max(np.abs(recovered.weights)))),
        }
        for name, error in errors.items():
            worst[name] = max(worst[name], error)
            assertions[name] &= error <= limits[name]
        rows.append([str(trial), errors["roundtrip"], errors["adjoint"], errors["isometry"], mu_energy])
    return ExperimentResult(
        assertions=assertions,
        records={"max_errors": worst, "trials": config.trials},
        files={"ktransform.csv": (["trial", "roundtrip_error", "adjoint_gap", "isometry_gap", "energy"], rows)},
        tolerances={"roundtrip": ROUNDTRIP_TOLERANCE, "isometry": IDENTITY_TOLERANCE},
        documents={"measures.json": {"measures": measures}},
    )


EXPERIMENTS: Dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "gram": run_gram,
    "psd": run_psd,
    "order-chain": run_order_chain,
    "monotone-limit": run_monotone_limit,
    "feature-verify": run_feature_verify,
    "gaussian-mc": run_gaussian_mc,
    "dual-pairing": run_dual_pairing,
    "delta-expand": run_delta_expand,
    "order-operator": run_order_operator,
    "multiplier": run_multiplier,
    "ifs-figure": run_ifs_figure,
    "ifs-kernel": run_ifs_kernel,
    "ktransform-roundtrip": run_ktransform_roundtrip,
}


def run(config: ExperimentConfig) -> Dict:
    """
    Run one experiment and write its artifact bundle to config.out.

    Returns:
        The summary record, with "passed" true iff every assertion holds

    Raises:
        ConfigError: If the config is invalid or the output directory unusable
    """
    config.validate()
    logger.info(f"Running experiment {config.experiment}")
    result = EXPERIMENTS[config.experiment](config)
    passed = all(result.assertions.values())
    for name, ok in sorted(result.assertions.items()):
        if not ok:
            logger.error(f"{config.experiment}: assertion {name} failed")
    summary = {
        "experiment": config.experiment,
        "config": asdict(config),
        "seed": config.seed,
        "assertions": result.assertions,
        "passed": passed,
        "records": result.records,
        "tolerances": result.tolerances,
        "truncations": result.truncations,
    }
    record = export_results(config.out, summary, result.files, result.documents)
    logger.info(f"Finished {config.experiment}: {'pass' if passed else 'FAIL'} -> {os.path.join(config.out, 'summary.json')}")
    return record


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with experiment settings; flags override it")
    common.add_argument("--kernel", help="Kernel name, e.g. szego or inverse-power:3")
    common.add_argument("--kernel-json", dest="kernel_json", help="JSON kernel descriptor file")
    common.add_argument("--against", help="Second kernel L for order-operator")
    common.add_argument("--points", help="Sampling plan, e.g. disk:40:r0.9 or triadic:4")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="Artifact directory")
    common.add_argument("--tolerance", type=float)
    common.add_argument("--truncation", type=int)
    common.add_argument("--nmax", "--n-max", dest="n_max", type=int)
    common.add_argument("--n-terms", dest="n_terms", type=int)
    common.add_argument("--family", choices=sorted(MONOTONE_FAMILIES))
    common.add_argument("--feature", choices=FEATURES)
    common.add_argument("--M", dest="M", type=int, help="Gaussian sample count")
    common.add_argument("--count", type=int)
    common.add_argument("--n-range", dest="n_range", type=int)
    common.add_argument("--degree", type=int)
    common.add_argument("--polynomials", type=int)
    common.add_argument("--evaluations", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--depths", help="Depth range, e.g. 0..5")
    common.add_argument("--grid", type=int)
    common.add_argument("--max-depth", dest="max_depth", type=int)
    common.add_argument("--phi", nargs="+", help="Multipliers, e.g. z 0.5 2z")
    common.add_argument("--verbose", "-v", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        description="Run reproducing-kernel experiments and write CSV/JSON artifacts.",
        parents=[common])
    subparsers = parser.add_subparsers(dest="experiment")
    for name in EXPERIMENTS:
        subparsers.add_parser(name, parents=[common])
    return parser


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Merge the optional --config file with the command-line flags; flags win.

    Raises:
        ConfigError: If the file is unreadable, names unknown settings or no experiment
    """
    flags = {key: value for key, value in vars(args).items() if value is not None}
    settings = load_experiment_config(flags.pop("config")) if "config" in flags else {}
    settings.update(flags)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(settings) - known)
    if unknown:
        raise ConfigError(f"Unknown settings: {', '.join(unknown)}")
    if not settings.get("experiment"):
        raise ConfigError("No experiment given")
    try:
        config = ExperimentConfig(**settings)
        config.validate()
    except TypeError as e:
        raise ConfigError(f"Error building experiment config: {e}")
    return config


def main(argv: Optional[List[str]] = None) -> int:
    """Exit status: 0 when every assertion holds, 1 on a failed assertion, 2 on a config error."""
    args = build_parser().parse_args(argv)
    if getattr(args, "verbose", False):
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        summary = run(build_config(args))
    except (ConfigError, DomainError, SeriesDivergenceError) as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except OSError as e:
        logger.error(f"Error writing artifacts: {e}")
        return 2
    except KernelError as e:
        logger.error(f"Experiment failed: {e}")
        return 1
    return 0 if summary["passed"] else 1
