import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

# Numerical policy
PSD_TOLERANCE = 1e-9  # relative to (1 + spectral radius)
TRUNCATION_TOLERANCE = 1e-12
HERMITIAN_TOLERANCE = 1e-12
DEFAULT_TRUNCATION = 64
MAX_TRUNCATION = 8192
EXACT_ORDER = 64  # coefficients up to this index are convolved over the rationals
PINV_RCOND = 1e-12  # singular values below this fraction of the largest are dropped

Scalar = complex


class KernelError(ValueError):
    """Base class for kernel evaluation and certification errors."""
    pass


class DomainError(KernelError):
    """A point or kernel does not fit the domain it is used on."""
    pass


class SeriesDivergenceError(KernelError):
    """A power series is evaluated outside its radius of convergence."""
    pass


class NotInRKHSError(KernelError):
    """A coefficient sits on an index where the kernel has no support."""
    pass


class BoundUnavailableError(KernelError):
    """No convergent majorant was found for a series tail."""
    pass


class NonHermitianError(KernelError):
    """A matrix handed to the certifier is not Hermitian."""
    pass


class DomainTag(Enum):
    REAL_INTERVAL = "real-interval"
    DISK = "complex-disk"
    UPPER_HALF_PLANE = "upper-half-plane"
    WHOLE_PLANE = "whole-plane"
    UNIT_INTERVAL = "unit-interval"


# Which domains a kernel defined on the key domain can also be evaluated on
_CONTAINS = {
    DomainTag.WHOLE_PLANE: {DomainTag.DISK, DomainTag.REAL_INTERVAL,
                            DomainTag.UPPER_HALF_PLANE, DomainTag.UNIT_INTERVAL},
    DomainTag.DISK: {DomainTag.REAL_INTERVAL, DomainTag.UNIT_INTERVAL},
    DomainTag.REAL_INTERVAL: {DomainTag.UNIT_INTERVAL},
}


def domain_admits(kernel_domain: Optional[DomainTag], point_domain: DomainTag) -> bool:
    if kernel_domain is None or kernel_domain == point_domain:
        return True
    return point_domain in _CONTAINS.get(kernel_domain, set())


def common_domain(first: Optional[DomainTag], second: Optional[DomainTag]) -> Optional[DomainTag]:
    """Narrowest domain on which both kernels are defined."""
    if first is None:
        return second
    if second is None or first == second:
        return first
    if domain_admits(first, second):
        return second
    if domain_admits(second, first):
        return first
    raise DomainError(f"Incompatible domains: {first.value} and {second.value}")


def _validate_values(values: np.ndarray, domain: DomainTag, radius: float) -> None:
    if values.ndim != 1 or values.size == 0:
        raise ValueError("A point set must be a nonempty one-dimensional sequence")
    if not np.all(np.isfinite(values)):
        raise ValueError("Point values must be finite")
    if domain in (DomainTag.REAL_INTERVAL, DomainTag.UNIT_INTERVAL) and np.any(values.imag != 0):
        raise DomainError(f"Points on the {domain.value} must be real")
    if domain == DomainTag.DISK and np.any(np.abs(values) >= radius):
        raise DomainError(f"Disk points must satisfy |z| < {radius}")
    if domain == DomainTag.REAL_INTERVAL and np.any(np.abs(values.real) >= radius):
        raise DomainError(f"Interval points must lie in (-{radius}, {radius})")
    if domain == DomainTag.UPPER_HALF_PLANE and np.any(values.imag <= 0):
        raise DomainError("Half-plane points must have Im z > 0")
    # the unit interval is closed so that Cantor endpoints are admissible
    if domain == DomainTag.UNIT_INTERVAL and np.any((values.real < 0) | (values.real > 1)):
        raise DomainError("Unit-interval points must lie in [0, 1]")


@dataclass(frozen=True)
class Point:
    value: complex
    domain: DomainTag
    radius: float = 1.0

    def __post_init__(self):
        _validate_values(np.array([complex(self.value)]), self.domain, self.radius)


@dataclass(frozen=True, eq=False)
class PointSet:
    """Ordered, pairwise distinct points sharing one domain."""
    values: np.ndarray
    domain: DomainTag
    radius: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=complex).ravel()
        _validate_values(values, self.domain, self.radius)
        if np.unique(values).size != values.size:
            raise ValueError("Points in a point set must be pairwise distinct")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_points(cls, points: Sequence[Point]) -> "PointSet":
        if not points:
            raise ValueError("A point set must be nonempty")
        domains = {p.domain for p in points}
        if len(domains) != 1:
            raise DomainError("All points of a point set must share one domain")
        return cls(np.array([p.value for p in points], dtype=complex),
                   points[0].domain, max(p.radius for p in points))

    @property
    def points(self) -> List[Point]:
        return [Point(complex(v), self.domain, self.radius) for v in self.values]

    @property
    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, index: int) -> Point:
        return Point(complex(self.values[index]), self.domain, self.radius)


class VariableKind(Enum):
    REAL = "real"
    COMPLEX = "complex"


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"Non-finite coefficient: {value}")
    return Fraction(str(value))


@dataclass(frozen=True)
class SeriesKernel:
    """
    Power-series kernel K(x, y) = sum_k a_k x^k conj(y)^k with a_k >= 0.

    Families:
        rising(n):        a_k = C(n+k-1, k), the (1 - x conj(y))^(-n) family
        exponential(c):   a_k = c^k / k!
        polynomial(a..):  finite coefficient list
        scaled(c):        c times the single part
        sum:              coefficientwise sum of the parts
        convolution:      Hadamard product of the two parts
        partial(n):       the single part cut after index n
    """
    family: str
    params: Tuple = ()
    parts: Tuple["SeriesKernel", ...] = ()
    variable_kind: VariableKind = VariableKind.COMPLEX

    def __post_init__(self):
        if self.family == "rising":
            n = self.params[0]
            if not isinstance(n, int) or n < 1:
                raise ValueError(f"Rising-factorial order must be an integer >= 1, got {n}")
        elif self.family == "exponential":
            if self.params[0] <= 0:
                raise ValueError(f"Exponential scale must be positive, got {self.params[0]}")
        elif self.family == "polynomial":
            if any(a < 0 for a in self.params):
                raise ValueError("Polynomial kernel coefficients must be nonnegative")
        elif self.family == "scaled":
            if self.params[0] < 0 or len(self.parts) != 1:
                raise ValueError("A scaled series needs one part and a nonnegative factor")
        elif self.family == "partial":
            if self.params[0] < 0 or len(self.parts) != 1:
                raise ValueError("A partial series needs one part and a cut index >= 0")
        elif self.family == "sum":
            if not self.parts:
                raise ValueError("A series sum needs at least one part")
        elif self.family == "convolution":
            if len(self.parts) != 2:
                raise ValueError("A series convolution needs exactly two parts")
        else:
            raise ValueError(f"Unknown series family: {self.family}")

    @classmethod
    def rising(cls, n: int, kind: VariableKind = VariableKind.COMPLEX) -> "SeriesKernel":
        return cls("rising", (int(n),), (), kind)

    @classmethod
    def exponential(cls, c=1, kind: VariableKind = VariableKind.COMPLEX) -> "SeriesKernel":
        return cls("exponential", (to_fraction(c),), (), kind)

    @classmethod
    def polynomial(cls, coeffs: Sequence, kind: VariableKind = VariableKind.COMPLEX) -> "SeriesKernel":
        return cls("polynomial", tuple(to_fraction(a) for a in coeffs), (), kind)

    @classmethod
    def scaled(cls, base: "SeriesKernel", factor) -> "SeriesKernel":
        return cls("scaled", (to_fraction(factor),), (base,), base.variable_kind)

    @classmethod
    def sum(cls, parts: Sequence["SeriesKernel"]) -> "SeriesKernel":
        parts = tuple(parts)
        return cls("sum", (), parts, _joint_kind(parts))

    @classmethod
    def convolution(cls, left: "SeriesKernel", right: "SeriesKernel") -> "SeriesKernel":
        return cls("convolution", (), (left, right), _joint_kind((left, right)))

    @classmethod
    def partial(cls, base: "SeriesKernel", n: int) -> "SeriesKernel":
        return cls("partial", (int(n),), (base,), base.variable_kind)

    @property
    def radius(self) -> float:
        if self.family == "rising":
            return 1.0
        if self.family in ("exponential", "polynomial", "partial"):
            return math.inf
        return min(part.radius for part in self.parts)

    @lru_cache(maxsize=None)
    def exact_coefficient(self, k: int) -> Fraction:
        if k < 0:
            return Fraction(0)
        if self.family == "rising":
            n = self.params[0]
            return Fraction(math.comb(n + k - 1, k))
        if self.family == "exponential":
            return self.params[0] ** k / math.factorial(k)
        if self.family == "polynomial":
            return self.params[k] if k < len(self.params) else Fraction(0)
        if self.family == "scaled":
            return self.params[0] * self.parts[0].exact_coefficient(k)
        if self.family == "partial":
            return self.parts[0].exact_coefficient(k) if k <= self.params[0] else Fraction(0)
        if self.family == "sum":
            return sum((part.exact_coefficient(k) for part in self.parts), Fraction(0))
        left, right = self.parts
        return sum((left.exact_coefficient(j) * right.exact_coefficient(k - j)
                    for j in range(k + 1)), Fraction(0))

    @lru_cache(maxsize=None)
    def mixed_coefficient(self, n: int, m: int) -> Fraction:
        """Coefficient of x^n conj(y)^m in the bivariate expansion of K(x, y)."""
        if n < 0 or m < 0:
            return Fraction(0)
        if self.family == "scaled":
            return self.params[0] * self.parts[0].mixed_coefficient(n, m)
        if self.family == "partial":
            return self.parts[0].mixed_coefficient(n, m) if max(n, m) <= self.params[0] else Fraction(0)
        if self.family == "sum":
            return sum((part.mixed_coefficient(n, m) for part in self.parts), Fraction(0))
        if self.family == "convolution":
            left, right = self.parts
            return sum((left.mixed_coefficient(i, j) * right.mixed_coefficient(n - i, m - j)
                        for i in range(n + 1) for j in range(m + 1)), Fraction(0))
        # rising, exponential and polynomial kernels are functions of x conj(y) alone
        return self.exact_coefficient(n) if n == m else Fraction(0)

    @lru_cache(maxsize=256)
    def _float_coefficients(self, count: int) -> np.ndarray:
        if self.family == "rising":
            n = self.params[0]
            ratios = (n + np.arange(count - 1)) / (np.arange(count - 1) + 1.0)
            coeffs = np.concatenate(([1.0], np.cumprod(ratios)))
        elif self.family == "exponential":
            c = float(self.params[0])
            ratios = c / (np.arange(count - 1) + 1.0)
            coeffs = np.concatenate(([1.0], np.cumprod(ratios)))
        elif self.family == "polynomial":
            coeffs = np.zeros(count)
            head = [float(a) for a in self.params[:count]]
            coeffs[:len(head)] = head
        elif self.family == "scaled":
            coeffs = float(self.params[0]) * self.parts[0].coefficients(count)
        elif self.family == "partial":
            coeffs = self.parts[0].coefficients(count).copy()
            coeffs[self.params[0] + 1:] = 0.0
        elif self.family == "sum":
            coeffs = np.sum([part.coefficients(count) for part in self.parts], axis=0)
        else:
            left, right = self.parts
            coeffs = np.convolve(left.coefficients(count), right.coefficients(count))[:count]
            exact = min(count, EXACT_ORDER + 1)
            coeffs[:exact] = [float(self.exact_coefficient(k)) for k in range(exact)]
        coeffs = np.asarray(coeffs, dtype=float)
        coeffs.flags.writeable = False
        return coeffs

    def coefficients(self, count: int) -> np.ndarray:
        """First `count` coefficients a_0 .. a_{count-1} as floats."""
        if count < 0:
            raise ValueError(f"Coefficient count must be nonnegative, got {count}")
        if count == 0:
            return np.zeros(0)
        return self._float_coefficients(count)

    def to_descriptor(self) -> Dict:
        descriptor = {"family": self.family, "variable_kind": self.variable_kind.value}
        if self.family == "rising":
            descriptor["params"] = {"n": self.params[0]}
        elif self.family == "exponential":
            descriptor["params"] = {"c": str(self.params[0])}
        elif self.family == "polynomial":
            descriptor["params"] = {"coeffs": [str(a) for a in self.params]}
        elif self.family == "scaled":
            descriptor["params"] = {"factor": str(self.params[0])}
        elif self.family == "partial":
            descriptor["params"] = {"n": self.params[0]}
        if self.parts:
            descriptor["children"] = [part.to_descriptor() for part in self.parts]
        return descriptor

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "SeriesKernel":
        family = descriptor["family"]
        params = descriptor.get("params", {})
        kind = VariableKind(descriptor.get("variable_kind", "complex"))
        parts = [cls.from_descriptor(child) for child in descriptor.get("children", [])]
        if family == "rising":
            return cls.rising(int(params["n"]), kind)
        if family == "exponential":
            return cls.exponential(params.get("c", 1), kind)
        if family == "polynomial":
            return cls.polynomial(params["coeffs"], kind)
        if family == "scaled":
            return cls.scaled(parts[0], params["factor"])
        if family == "partial":
            return cls.partial(parts[0], int(params["n"]))
        if family == "sum":
            return cls.sum(parts)
        if family == "convolution":
            return cls.convolution(*parts)
        raise ValueError(f"Unknown series family: {family}")


def _joint_kind(parts: Sequence[SeriesKernel]) -> VariableKind:
    if all(part.variable_kind == VariableKind.REAL for part in parts):
        return VariableKind.REAL
    return VariableKind.COMPLEX


def multiply_series(left: SeriesKernel, right: SeriesKernel) -> SeriesKernel:
    """Series of the Hadamard product, in closed form where one exists."""
    kind = _joint_kind((left, right))
    if left.family == right.family == "rising":
        return SeriesKernel.rising(left.params[0] + right.params[0], kind)
    if left.family == right.family == "exponential":
        return SeriesKernel.exponential(left.params[0] + right.params[0], kind)
    if left.family == right.family == "polynomial":
        product = np.zeros(len(left.params) + len(right.params) - 1, dtype=object)
        for i, a in enumerate(left.params):
            for j, b in enumerate(right.params):
                product[i + j] += a * b
        return SeriesKernel.polynomial(list(product), kind)
    if left.family == "scaled":
        return SeriesKernel.scaled(multiply_series(left.parts[0], right), left.params[0])
    if right.family == "scaled":
        return SeriesKernel.scaled(multiply_series(left, right.parts[0]), right.params[0])
    return SeriesKernel.convolution(left, right)


def monomial(k: int) -> List[Fraction]:
    """Coefficient list of x^k."""
    return [Fraction(0)] * k + [Fraction(1)]


# Kernel expressions

NODE_TYPES: Dict[str, Callable[[Dict], "KernelExpr"]] = {}


def register_node(name: str):
    """Register a KernelExpr subclass under its descriptor node name."""
    def decorator(cls):
        NODE_TYPES[name] = cls.from_descriptor
        cls.node = name
        return cls
    return decorator


def kernel_from_descriptor(descriptor: Dict) -> "KernelExpr":
    node = descriptor.get("node")
    if node not in NODE_TYPES:
        raise ValueError(f"Unknown kernel node: {node}")
    return NODE_TYPES[node](descriptor)


def _require_inside(values: np.ndarray, radius: float, name: str) -> None:
    if values.size and np.max(np.abs(values)) >= radius:
        raise SeriesDivergenceError(
            f"{name} diverges at |x| = {np.max(np.abs(values)):.6g} (radius {radius})")


class KernelExpr:
    """Evaluable kernel. Subclasses implement `_matrix` on raw value arrays."""
    node = "abstract"

    @property
    def domain(self) -> Optional[DomainTag]:
        return None

    def _matrix(self, xs: np.ndarray, ys: np.ndarray, truncation: int) -> np.ndarray:
        raise NotImplementedError

    def series(self) -> Optional[SeriesKernel]:
        """Exact power-series representation, if the node has one."""
        return None

    def to_descriptor(self) -> Dict:
        raise NotImplementedError

    def check_admissible(self, domain: DomainTag) -> None:
        if not domain_admits(self.domain, domain):
            raise DomainError(
                f"Kernel {self.node} on {self.domain.value} cannot be evaluated "
                f"on points of the {domain.value}")


_BUILTIN_DOMAINS = {
    "szego": DomainTag.DISK,
    "bergman": DomainTag.DISK,
    "inverse_power": DomainTag.DISK,
    "bargmann": DomainTag.WHOLE_PLANE,
    "half_plane": DomainTag.UPPER_HALF_PLANE,
    "constant": None,
}


@register_node("builtin")
class Builtin(KernelExpr):
    """Closed-form kernels; the truncation order is ignored."""

    def __init__(self, name: str, **params):
        if name not in _BUILTIN_DOMAINS:
            raise ValueError(f"Unknown builtin kernel: {name}")
        self.name = name
        if name == "inverse_power":
            n = int(params.get("n", 1))
            if n < 1:
                raise ValueError(f"inverse_power needs n >= 1, got {n}")
            params = {"n": n}
        elif name == "bargmann":
            params = {"c": to_fraction(params.get("c", 1))}
            if params["c"] <= 0:
                raise ValueError("bargmann scale must be positive")
        elif name == "constant":
            params = {"c": to_fraction(params.get("c", 1))}
            if params["c"] < 0:
                raise ValueError("A constant kernel must be nonnegative")
        else:
            params = {}
        self.params = params

    @property
    def domain(self) -> Optional[DomainTag]:
        return _BUILTIN_DOMAINS[self.name]

    def _order(self) -> int:
        return {"szego": 1, "bergman": 2}.get(self.name, self.params.get("n", 1))

    def _matrix(self, xs, ys, truncation):
        product = xs[:, None] * np.conj(ys)[None, :]
        if self.name in ("szego", "bergman", "inverse_power"):
            _require_inside(xs, 1.0, self.name)
            _require_inside(ys, 1.0, self.name)
            return (1.0 - product) ** (-self._order())
        if self.name == "bargmann":
            return np.exp(float(self.params["c"]) * product)
        if self.name == "half_plane":
            return 1j / (2.0 * (xs[:, None] - np.conj(ys)[None, :]))
        return np.full(product.shape, float(self.params["c"]), dtype=complex)

    def series(self) -> Optional[SeriesKernel]:
        if self.name in ("szego", "bergman", "inverse_power"):
            return SeriesKernel.rising(self._order())
        if self.name == "bargmann":
            return SeriesKernel.exponential(self.params["c"])
        if self.name == "constant":
            return SeriesKernel.polynomial([self.params["c"]])
        return None

    def to_descriptor(self) -> Dict:
        params = {key: (str(value) if isinstance(value, Fraction) else value)
                  for key, value in self.params.items()}
        return {"node": "builtin", "name": self.name, "params": params}

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "Builtin":
        return cls(descriptor["name"], **descriptor.get("params", {}))

    def __repr__(self):
        return f"Builtin({self.name}, {self.params})"


def szego() -> Builtin:
    return Builtin("szego")


def bergman() -> Builtin:
    return Builtin("bergman")


def inverse_power(n: int) -> Builtin:
    return Builtin("inverse_power", n=n)


def bargmann(c=1) -> Builtin:
    return Builtin("bargmann", c=c)


def half_plane() -> Builtin:
    return Builtin("half_plane")


def constant(c=1) -> Builtin:
    return Builtin("constant", c=c)


@register_node("series")
class Series(KernelExpr):
    def __init__(self, kernel: SeriesKernel):
        self.kernel = kernel

    @property
    def domain(self) -> Optional[DomainTag]:
        if self.kernel.variable_kind == VariableKind.REAL:
            return DomainTag.REAL_INTERVAL
        return DomainTag.DISK if math.isfinite(self.kernel.radius) else DomainTag.WHOLE_PLANE

    def _matrix(self, xs, ys, truncation):
        radius = self.kernel.radius
        _require_inside(xs, radius, f"series {self.kernel.family}")
        _require_inside(ys, radius, f"series {self.kernel.family}")
        products = xs[:, None] * np.conj(ys)[None, :]
        return np.polynomial.polynomial.polyval(products, self.kernel.coefficients(truncation))

    def series(self) -> Optional[SeriesKernel]:
        return self.kernel

    def to_descriptor(self) -> Dict:
        return {"node": "series", "series": self.kernel.to_descriptor()}

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "Series":
        return cls(SeriesKernel.from_descriptor(descriptor["series"]))


@register_node("sum")
class Sum(KernelExpr):
    def __init__(self, parts: Sequence[KernelExpr]):
        if not parts:
            raise ValueError("A kernel sum needs at least one part")
        self.parts = list(parts)
        self._domain = None
        for part in self.parts:
            self._domain = common_domain(self._domain, part.domain)

    @property
    def domain(self) -> Optional[DomainTag]:
        return self._domain

    def _matrix(self, xs, ys, truncation):
        return sum(part._matrix(xs, ys, truncation) for part in self.parts)

    def series(self) -> Optional[SeriesKernel]:
        parts = [part.series() for part in self.parts]
        if any(part is None for part in parts):
            return None
        return SeriesKernel.sum(parts)

    def to_descriptor(self) -> Dict:
        return {"node": "sum", "children": [part.to_descriptor() for part in self.parts]}

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "Sum":
        return cls([kernel_from_descriptor(child) for child in descriptor["children"]])


@register_node("product")
class Product(KernelExpr):
    def __init__(self, left: KernelExpr, right: KernelExpr):
        self.left = left
        self.right = right
        self._domain = common_domain(left.domain, right.domain)

    @property
    def domain(self) -> Optional[DomainTag]:
        return self._domain

    def _matrix(self, xs, ys, truncation):
        return self.left._matrix(xs, ys, truncation) * self.right._matrix(xs, ys, truncation)

    def series(self) -> Optional[SeriesKernel]:
        left, right = self.left.series(), self.right.series()
        if left is None or right is None:
            return None
        return multiply_series(left, right)

    def to_descriptor(self) -> Dict:
        return {"node": "product",
                "children": [self.left.to_descriptor(), self.right.to_descriptor()]}

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "Product":
        left, right = descriptor["children"]
        return cls(kernel_from_descriptor(left), kernel_from_descriptor(right))


@register_node("power")
class Power(KernelExpr):
    def __init__(self, base: KernelExpr, n: int):
        if int(n) < 1:
            raise ValueError(f"Kernel power exponent must be >= 1, got {n}")
        self.base = base
        self.n = int(n)

    @property
    def domain(self) -> Optional[DomainTag]:
        return self.base.domain

    def _matrix(self, xs, ys, truncation):
        return self.base._matrix(xs, ys, truncation) ** self.n

    def series(self) -> Optional[SeriesKernel]:
        base = self.base.series()
        if base is None:
            return None
        result = base
        for _ in range(self.n - 1):
            result = multiply_series(result, base)
        return result

    def to_descriptor(self) -> Dict:
        return {"node": "power", "params": {"n": self.n}, "children": [self.base.to_descriptor()]}

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "Power":
        return cls(kernel_from_descriptor(descriptor["children"][0]), descriptor["params"]["n"])


@register_node("restriction")
class Restriction(KernelExpr):
    def __init__(self, base: KernelExpr, subdomain: DomainTag):
        if not domain_admits(base.domain, subdomain):
            raise DomainError(f"Cannot restrict a kernel on {base.domain.value} to {subdomain.value}")
        self.base = base
        self.subdomain = subdomain

    @property
    def domain(self) -> Optional[DomainTag]:
        return self.subdomain

    def _matrix(self, xs, ys, truncation):
        return self.base._matrix(xs, ys, truncation)

    def series(self) -> Optional[SeriesKernel]:
        return self.base.series()

    def to_descriptor(self) -> Dict:
        return {"node": "restriction", "params": {"subdomain": self.subdomain.value},
                "children": [self.base.to_descriptor()]}

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "Restriction":
        return cls(kernel_from_descriptor(descriptor["children"][0]),
                   DomainTag(descriptor["params"]["subdomain"]))


@register_node("scaled")
class Scaled(KernelExpr):
    def __init__(self, base: KernelExpr, factor):
        self.factor = to_fraction(factor)
        if self.factor < 0:
            raise ValueError(f"Kernel scale factor must be nonnegative, got {factor}")
        self.base = base

    @property
    def domain(self) -> Optional[DomainTag]:
        return self.base.domain

    def _matrix(self, xs, ys, truncation):
        return float(self.factor) * self.base._matrix(xs, ys, truncation)

    def series(self) -> Optional[SeriesKernel]:
        base = self.base.series()
        return None if base is None else SeriesKernel.scaled(base, self.factor)

    def to_descriptor(self) -> Dict:
        return {"node": "scaled", "params": {"factor": str(self.factor)},
                "children": [self.base.to_descriptor()]}

    @classmethod
    def from_descriptor(cls, descriptor: Dict) -> "Scaled":
        return cls(kernel_from_descriptor(descriptor["children"][0]), descriptor["params"]["factor"])


# Evaluation and certification

def truncation_bound(k: SeriesKernel, r_eff: float, N: int) -> float:
    """
    Upper bound on the tail sum_{j >= N} a_j r_eff^(2j).

    Closed forms are used for the rising-factorial and exponential families.
    A convolution is bounded through the tails and totals of its two parts.

    Raises:
        BoundUnavailableError: If r_eff is outside the radius or no
            convergent majorant exists at this N
    """
    if N < 0 or r_eff < 0:
        raise ValueError("Truncation order and radius must be nonnegative")
    if r_eff >= k.radius:
        raise BoundUnavailableError(f"r_eff = {r_eff} is not inside the radius {k.radius}")
    t = r_eff * r_eff
    if t == 0.0:
        return float(k.exact_coefficient(0)) if N == 0 else 0.0

    if k.family == "rising":
        n = k.params[0]
        ratio = t * (n + N) / (N + 1)
        if ratio >= 1.0:
            raise BoundUnavailableError(f"Term ratio {ratio:.4g} >= 1 at N = {N}")
        log_term = math.log(math.comb(n + N - 1, N)) + N * math.log(t)
        return math.exp(log_term) / (1.0 - ratio)
    if k.family == "exponential":
        c = float(k.params[0])
        ratio = c * t / (N + 1)
        if ratio >= 1.0:
            raise BoundUnavailableError(f"Term ratio {ratio:.4g} >= 1 at N = {N}")
        log_term = N * math.log(c * t) - math.lgamma(N + 1)
        return math.exp(log_term) / (1.0 - ratio)
    if k.family == "polynomial":
        return math.fsum(float(a) * t ** j for j, a in enumerate(k.params) if j >= N)
    if k.family == "scaled":
        return float(k.params[0]) * truncation_bound(k.parts[0], r_eff, N)
    if k.family == "sum":
        return math.fsum(truncation_bound(part, r_eff, N) for part in k.parts)
    if k.family == "partial":
        cut = k.params[0]
        if N > cut:
            return 0.0
        coeffs = k.coefficients(cut + 1)
        return math.fsum(float(coeffs[j]) * t ** j for j in range(N, cut + 1))
    # convolution: a pair (i, l) with i + l >= N has i >= M or l >= M for M = ceil(N / 2)
    if N == 0:
        return series_total(k, r_eff)
    left, right = k.parts
    M = (N + 1) // 2
    return (_tail_or_total(left, r_eff, M) * series_total(right, r_eff)
            + series_total(left, r_eff) * _tail_or_total(right, r_eff, M))


def series_total(k: SeriesKernel, r_eff: float) -> float:
    """Full sum sum_j a_j r_eff^(2j), the diagonal K(x, x) at |x| = r_eff."""
    if r_eff >= k.radius:
        raise SeriesDivergenceError(f"r_eff = {r_eff} is not inside the radius {k.radius}")
    t = r_eff * r_eff
    if k.family == "rising":
        return (1.0 - t) ** (-k.params[0])
    if k.family == "exponential":
        return math.exp(float(k.params[0]) * t)
    if k.family == "polynomial":
        return math.fsum(float(a) * t ** j for j, a in enumerate(k.params))
    if k.family == "scaled":
        return float(k.params[0]) * series_total(k.parts[0], r_eff)
    if k.family == "sum":
        return math.fsum(series_total(part, r_eff) for part in k.parts)
    if k.family == "partial":
        cut = k.params[0]
        return math.fsum(float(a) * t ** j for j, a in enumerate(k.coefficients(cut + 1)))
    left, right = k.parts
    return series_total(left, r_eff) * series_total(right, r_eff)


def _tail_or_total(k: SeriesKernel, r_eff: float, N: int) -> float:
    try:
        return truncation_bound(k, r_eff, N)
    except BoundUnavailableError:
        return series_total(k, r_eff)


def auto_truncation(k: SeriesKernel, r_eff: float,
                    tol: float = TRUNCATION_TOLERANCE,
                    max_order: int = MAX_TRUNCATION) -> int:
    """Smallest N whose truncation_bound at r_eff clears tol."""
    if r_eff >= k.radius:
        raise SeriesDivergenceError(f"r_eff = {r_eff} is outside the radius {k.radius}")
    for N in range(1, max_order + 1):
        try:
            bound = truncation_bound(k, r_eff, N)
        except BoundUnavailableError:
            continue
        if bound <= tol:
            logger.debug(f"Auto truncation for {k.family}: N = {N} (bound {bound:.3e} at r = {r_eff:.4g})")
            return N
    raise BoundUnavailableError(f"No truncation up to {max_order} reaches {tol} at r = {r_eff}")


def resolve_truncation(kernel: KernelExpr, values: np.ndarray, truncation: Optional[int]) -> int:
    if truncation is not None:
        if truncation < 1:
            raise ValueError(f"Truncation must be >= 1, got {truncation}")
        return int(truncation)
    series = kernel.series()
    if series is None:
        return DEFAULT_TRUNCATION
    r_eff = float(np.max(np.abs(values))) if values.size else 0.0
    if r_eff >= series.radius:
        return DEFAULT_TRUNCATION  # evaluation reports the divergence
    try:
        return auto_truncation(series, r_eff)
    except BoundUnavailableError as e:
        logger.warning(f"Falling back to truncation {MAX_TRUNCATION}: {e}")
        return MAX_TRUNCATION


def evaluate(kernel: KernelExpr, x: Point, y: Point, truncation: Optional[int] = None) -> complex:
    """K(x, y) for one point pair."""
    kernel.check_admissible(x.domain)
    kernel.check_admissible(y.domain)
    xs = np.array([complex(x.value)])
    ys = np.array([complex(y.value)])
    N = resolve_truncation(kernel, np.concatenate([xs, ys]), truncation)
    return complex(kernel._matrix(xs, ys, N)[0, 0])


@dataclass(eq=False)
class GramMatrix:
    entries: np.ndarray
    points: PointSet
    kernel: KernelExpr
    truncation: int

    def __len__(self) -> int:
        return self.entries.shape[0]


def cross_matrix(kernel: KernelExpr, xs: PointSet, ys: PointSet,
                 truncation: Optional[int] = None) -> np.ndarray:
    """Rectangular matrix K(x_i, y_j)."""
    kernel.check_admissible(xs.domain)
    kernel.check_admissible(ys.domain)
    N = resolve_truncation(kernel, np.concatenate([xs.values, ys.values]), truncation)
    return kernel._matrix(xs.values, ys.values, N)


def gram(kernel: KernelExpr, pts: PointSet, truncation: Optional[int] = None) -> GramMatrix:
    """Hermitian Gram matrix G[i][j] = K(x_i, x_j) from the upper triangle."""
    kernel.check_admissible(pts.domain)
    N = resolve_truncation(kernel, pts.values, truncation)
    full = np.asarray(kernel._matrix(pts.values, pts.values, N), dtype=complex)
    if not np.all(np.isfinite(full)):
        raise ValueError(f"Non-finite Gram entries for kernel {kernel.node}")
    upper = np.triu(full)
    entries = upper + np.triu(full, 1).conj().T
    np.fill_diagonal(entries, entries.diagonal().real)
    return GramMatrix(entries, pts, kernel, N)


@dataclass
class PsdCertificate:
    psd: bool
    min_eigenvalue: float
    tolerance: float
    spectral_radius: float
    witness: np.ndarray = field(repr=False)

    @property
    def verdict(self) -> str:
        return "psd" if self.psd else "not-psd"


def psd_check(g: Union[GramMatrix, np.ndarray], tol: float = PSD_TOLERANCE) -> PsdCertificate:
    """
    Certify positive semidefiniteness from a full Hermitian eigendecomposition.

    The verdict is psd iff min_eigenvalue >= -tol * (1 + spectral_radius).
    The witness is the eigenvector of the smallest eigenvalue.
    """
    if tol <= 0:
        raise ValueError(f"Tolerance must be positive, got {tol}")
    entries = np.asarray(g.entries if isinstance(g, GramMatrix) else g, dtype=complex)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {entries.shape}")
    scale = 1.0 + float(np.max(np.abs(entries))) if entries.size else 1.0
    asymmetry = float(np.max(np.abs(entries - entries.conj().T))) if entries.size else 0.0
    if asymmetry > HERMITIAN_TOLERANCE * scale:
        raise NonHermitianError(f"Matrix is not Hermitian (max asymmetry {asymmetry:.3e})")
    eigenvalues, eigenvectors = scipy.linalg.eigh(entries)
    min_eig = float(eigenvalues[0])
    radius = float(np.max(np.abs(eigenvalues)))
    return PsdCertificate(
        psd=min_eig >= -tol * (1.0 + radius),
        min_eigenvalue=min_eig,
        tolerance=tol,
        spectral_radius=radius,
        witness=eigenvectors[:, 0],
    )


def rkhs_norm_squared(f_coeffs: Sequence, k: SeriesKernel) -> Union[Fraction, float]:
    """
    Squared norm sum |c_j|^2 / a_j of f = sum c_j x^j in the RKHS of k.

    Exact (Fraction) when every coefficient is rational, float otherwise.

    Raises:
        NotInRKHSError: If c_j != 0 where a_j = 0
    """
    exact = all(isinstance(c, (int, Fraction)) for c in f_coeffs)
    terms = []
    for j, c in enumerate(f_coeffs):
        if c == 0:
            continue
        a = k.exact_coefficient(j)
        if a == 0:
            raise NotInRKHSError(f"Coefficient {j} is nonzero but the kernel has a_{j} = 0")
        if exact:
            terms.append(Fraction(c) * Fraction(c) / a)
        else:
            if not np.isfinite(c):
                raise ValueError(f"Non-finite coefficient at index {j}")
            terms.append(abs(complex(c)) ** 2 / float(a))
    if exact:
        return sum(terms, Fraction(0))
    return math.fsum(terms)


def rkhs_norm(f_coeffs: Sequence, k: SeriesKernel, tail_bound: float = 0.0) -> float:
    """
    RKHS norm of a finitely supported coefficient sequence.

    Parameters:
        f_coeffs: Coefficients c_0, c_1, ... of f = sum c_j x^j
        k: Series kernel whose RKHS is measured
        tail_bound: Bound on the squared norm of the omitted tail, added
            when the sequence is a truncation of an infinite one
    """
    if tail_bound < 0:
        raise ValueError("Tail bound must be nonnegative")
    return math.sqrt(float(rkhs_norm_squared(f_coeffs, k)) + tail_bound)


def hardy_norm(coeffs) -> float:
    """
    H2 norm of a power series from its Taylor coefficients.

    One-dimensional input gives the scalar Hardy space; two-dimensional
    input is read as Hilbert-space-valued coefficients, one row per h_n,
    with norm squared sum_n ||h_n||^2.
    """
    array = np.asarray(coeffs, dtype=complex)
    if array.ndim not in (1, 2):
        raise ValueError(f"Expected scalar or vector coefficients, got {array.ndim} dimensions")
    if not np.all(np.isfinite(array)):
        raise ValueError("Hardy coefficients must be finite")
    return float(np.linalg.norm(array))


def collapse_atoms(values: Sequence[complex], weights: Sequence[complex]) -> Tuple[np.ndarray, np.ndarray]:
    """Merge repeated points by summing their weights, keeping first-seen order."""
    if len(values) != len(weights):
        raise ValueError("Need one weight per point")
    merged: Dict[complex, complex] = {}
    for v, w in zip(values, weights):
        key = complex(v)
        merged[key] = merged.get(key, 0j) + complex(w)
    return (np.array(list(merged.keys()), dtype=complex),
            np.array(list(merged.values()), dtype=complex))


@dataclass(eq=False)
class KernelSection:
    """Element sum_j d_j K(., y_j) of the sampled span."""
    kernel: KernelExpr
    centers: PointSet
    weights: np.ndarray
    truncation: Optional[int] = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=complex).ravel()
        if self.weights.size != len(self.centers):
            raise ValueError("Need one weight per center")

    def __call__(self, pts: PointSet) -> np.ndarray:
        return cross_matrix(self.kernel, pts, self.centers, self.truncation) @ self.weights

    def inner(self, other: "KernelSection") -> complex:
        """<self, other> in the RKHS, linear in self."""
        cross = cross_matrix(self.kernel, other.centers, self.centers, self.truncation)
        return complex(np.conj(other.weights) @ cross @ self.weights)

    def norm(self) -> float:
        entries = gram(self.kernel, self.centers, self.truncation).entries
        value = float(np.real(np.conj(self.weights) @ entries @ self.weights))
        return math.sqrt(max(value, 0.0))
