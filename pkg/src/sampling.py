"""
Sampling plans and kernel names for experiment configs.

A sampling plan is one token:

    disk:N:rR         N low-discrepancy points in |z| < R (R < 1)
    plane:N:rR        the same plan on the whole plane
    upper:N:rR        N points with |Re z| < R and 0 < Im z <= R
    interval:N:a:b    N low-discrepancy points in [a, b] inside (-1, 1)
    triadic:depth     endpoints of the Cantor stage C_depth on [0, 1]
    explicit:[...]    JSON list of numbers or "re+imi" strings
"""
import json
import logging
from typing import Tuple

import numpy as np
from scipy.stats import qmc

from rkhs.core import (
    DomainTag,
    KernelExpr,
    PointSet,
    SeriesKernel,
    Series,
    VariableKind,
    bargmann,
    bergman,
    constant,
    half_plane,
    inverse_power,
    szego,
)
from rkhs.fractal import triadic_endpoints
from utils import ConfigError, parse_scalar

logger = logging.getLogger(__name__)

STRESS_SHARE = 5  # one point in this many sits on the stress ring
STRESS_RADIUS = 0.9
KERNEL_NAMES = ("szego", "bergman", "bargmann", "half-plane", "inverse-power:n",
                "constant:c", "interval-szego")


def _halton(n: int, d: int, seed: int) -> np.ndarray:
    engine = qmc.Halton(d=d, scramble=True, seed=np.random.default_rng(seed))
    return engine.random(n)


def disk_points(n: int, radius: float, seed: int) -> np.ndarray:
    """
    Area-uniform scrambled Halton points in |z| < radius.

    One in STRESS_SHARE points is moved to the ring |z| = min(radius, STRESS_RADIUS)
    with a seeded rotation, so that samples reach the region where truncation
    and conditioning are hardest.
    """
    n_ring = n // STRESS_SHARE
    n_inner = n - n_ring
    u = _halton(n_inner, 2, seed)
    inner = radius * np.sqrt(u[:, 0]) * np.exp(2j * np.pi * u[:, 1])
    if n_ring == 0:
        return inner
    rotation = np.random.default_rng(seed).uniform(0.0, 2 * np.pi)
    ring_radius = min(radius, STRESS_RADIUS)
    ring = ring_radius * np.exp(1j * (rotation + 2 * np.pi * np.arange(n_ring) / n_ring))
    return np.concatenate([inner, ring])


def upper_points(n: int, radius: float, seed: int) -> np.ndarray:
    u = _halton(n, 2, seed)
    return radius * (2.0 * u[:, 0] - 1.0) + 1j * radius * (1.0 - u[:, 1])


def interval_points(n: int, a: float, b: float, seed: int) -> np.ndarray:
    u = _halton(n, 1, seed)[:, 0]
    return a + (b - a) * u


def _infer_domain(values: np.ndarray) -> DomainTag:
    if np.all(values.imag == 0):
        real = values.real
        if np.all((real >= 0) & (real <= 1)):
            return DomainTag.UNIT_INTERVAL
        if np.all(np.abs(real) < 1):
            return DomainTag.REAL_INTERVAL
    if np.all(np.abs(values) < 1):
        return DomainTag.DISK
    if np.all(values.imag > 0):
        return DomainTag.UPPER_HALF_PLANE
    return DomainTag.WHOLE_PLANE


def _count_and_radius(fields, token: str) -> Tuple[int, float]:
    if len(fields) != 2 or not fields[1].startswith("r"):
        raise ValueError(f"expected <N>:r<R> in {token!r}")
    n, radius = int(fields[0]), float(fields[1][1:])
    if n < 1 or not radius > 0:
        raise ValueError(f"need N >= 1 and R > 0 in {token!r}")
    return n, radius


def parse_points(token: str, seed: int = 0) -> PointSet:
    """
    PointSet for a sampling-plan token; the same token and seed give the same points.

    Raises:
        ConfigError: If the token is malformed or its points leave the domain
    """
    kind, _, rest = token.partition(":")
    try:
        if kind == "explicit":
            raw = json.loads(rest)
            if not isinstance(raw, list):
                raise ValueError("explicit points must be a JSON list")
            values = np.array([parse_scalar(v) for v in raw], dtype=complex)
            return PointSet(values, _infer_domain(values))
        fields = rest.split(":")
        if kind == "disk":
            n, radius = _count_and_radius(fields, token)
            if radius >= 1:
                raise ValueError(f"disk plans need R < 1, got {radius}")
            return PointSet(disk_points(n, radius, seed), DomainTag.DISK)
        if kind == "plane":
            n, radius = _count_and_radius(fields, token)
            return PointSet(disk_points(n, radius, seed), DomainTag.WHOLE_PLANE)
        if kind == "upper":
            n, radius = _count_and_radius(fields, token)
            return PointSet(upper_points(n, radius, seed), DomainTag.UPPER_HALF_PLANE)
        if kind == "interval":
            if len(fields) != 3:
                raise ValueError(f"expected interval:<N>:<a>:<b>, got {token!r}")
            n, a, b = int(fields[0]), float(fields[1]), float(fields[2])
            if n < 1 or not a < b:
                raise ValueError(f"need N >= 1 and a < b in {token!r}")
            return PointSet(interval_points(n, a, b, seed), DomainTag.REAL_INTERVAL)
        if kind == "triadic":
            return PointSet(triadic_endpoints(int(rest)), DomainTag.UNIT_INTERVAL)
    except (ValueError, json.JSONDecodeError) as e:
        raise ConfigError(f"Error parsing point set {token!r}: {e}")
    raise ConfigError(f"Unknown point-set kind {kind!r} in {token!r}")


def parse_kernel(name: str) -> KernelExpr:
    """
    Kernel for a CLI name such as "szego" or "inverse-power:3".

    Raises:
        ConfigError: If the name is unknown or its parameter is invalid
    """
    base, _, arg = name.partition(":")
    try:
        if base == "szego" and not arg:
            return szego()
        if base == "bergman" and not arg:
            return bergman()
        if base == "bargmann":
            return bargmann(arg or 1)
        if base == "half-plane" and not arg:
            return half_plane()
        if base == "inverse-power" and arg:
            return inverse_power(int(arg))
        if base == "constant":
            return constant(arg or 1)
        if base == "interval-szego" and not arg:
            return Series(SeriesKernel.rising(1, VariableKind.REAL))
    except ValueError as e:
        raise ConfigError(f"Error parsing kernel {name!r}: {e}")
    raise ConfigError(f"Unknown kernel {name!r}; expected one of {', '.join(KERNEL_NAMES)}")
