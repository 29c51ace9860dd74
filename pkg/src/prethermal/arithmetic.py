"""Frequency-label groups, depth functions, penalties and small divisors.

Labels live in one of three additive groups:

* integer vectors ``n`` paired with a base frequency vector ``omega``,
* dyadic rationals ``k / 2**d``,
* factorial rationals ``k / ell!``.

All label arithmetic is exact (Python integers).  Penalties assign a
non-negative weight to a label, and :func:`check_subadditivity` searches
for pairs violating ``p(a + b) <= p(a) + p(b)``.

The second half of the module defines the three suppression classes and
their small-divisor functions ``h(delta_kappa)``, the worst-case
amplification ``sup_x exp(-delta_kappa p(x)) / x`` of the ``1/Omega``
divisor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import CapacityError, DomainError, ParameterError

MAX_FACTORIAL_K = 20
SUBADDITIVITY_TOL = 1e-12

#: Alternative cluster constant ``inf_m (1 - ln m / m)`` over positive
#: integers, attained at ``m = 3``.  Exposed for reference only; the
#: quasipolynomial penalty uses the shifted logarithm instead.
CLUSTER_CONSTANT_ALT = 1.0 - math.log(3.0) / 3.0

Rational = Union[int, Fraction, str]


def _as_fraction(mu: Rational) -> Fraction:
    if isinstance(mu, float):
        raise DomainError("depths need exact rationals, got a float", value=mu)
    try:
        return Fraction(mu)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"cannot interpret {mu!r} as a rational") from exc


# ---------------------------------------------------------------------------
# Depth functions
# ---------------------------------------------------------------------------


def dyadic_depth(mu: Rational) -> int:
    """Smallest ``r`` with ``2**r * mu`` an integer.

    Raises
    ------
    DomainError
        If the reduced denominator is not a power of two.
    """
    den = _as_fraction(mu).denominator
    if den & (den - 1):
        raise DomainError("rational is not dyadic", value=str(mu))
    return den.bit_length() - 1


def factorial_depth(mu: Rational) -> int:
    """Smallest ``k >= 1`` with ``k! * mu`` an integer."""
    den = _as_fraction(mu).denominator
    k, fact = 1, 1
    while fact % den:
        k += 1
        fact *= k
    return k


# ---------------------------------------------------------------------------
# Labels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntVecLabel:
    """Integer frequency vector ``n``; ``omega(w) = n . w``."""

    n: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))

    @property
    def group(self) -> str:
        return "intvec"

    def __add__(self, other: "IntVecLabel") -> "IntVecLabel":
        if not isinstance(other, IntVecLabel) or len(other.n) != len(self.n):
            raise DomainError("can only add integer vectors of equal dimension")
        return IntVecLabel(tuple(a + b for a, b in zip(self.n, other.n)))

    def l1(self) -> int:
        return sum(abs(v) for v in self.n)

    def is_zero(self) -> bool:
        return not any(self.n)

    def omega(self, base: Sequence[float]) -> float:
        if len(base) != len(self.n):
            raise DomainError("frequency vector has the wrong dimension")
        return float(sum(a * w for a, w in zip(self.n, base)))

    def __str__(self) -> str:
        return "n(" + ";".join(str(v) for v in self.n) + ")"


@dataclass(frozen=True)
class DyadicLabel:
    """Dyadic rational ``numerator / 2**depth`` kept in lowest terms."""

    numerator: int
    depth: int = 0

    def __post_init__(self):
        num, d = int(self.numerator), int(self.depth)
        if d < 0:
            raise ParameterError("dyadic depth must be non-negative", depth=d)
        if num == 0:
            d = 0
        while d > 0 and num % 2 == 0:
            num //= 2
            d -= 1
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "depth", d)

    @classmethod
    def from_rational(cls, mu: Rational) -> "DyadicLabel":
        frac = _as_fraction(mu)
        return cls(frac.numerator, dyadic_depth(frac))

    @property
    def group(self) -> str:
        return "dyadic"

    def __add__(self, other: "DyadicLabel") -> "DyadicLabel":
        if not isinstance(other, DyadicLabel):
            raise DomainError("can only add dyadic labels together")
        d = max(self.depth, other.depth)
        num = (self.numerator << (d - self.depth)) + (other.numerator << (d - other.depth))
        return DyadicLabel(num, d)

    def value(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.depth)

    def is_zero(self) -> bool:
        return self.numerator == 0

    def omega(self, lam: float) -> float:
        return 2.0 * math.pi * lam * self.numerator / 2.0**self.depth

    def __str__(self) -> str:
        return f"{self.numerator}/2^{self.depth}"


@dataclass(frozen=True)
class FactorialLabel:
    """Factorial rational ``numerator / k!`` with the minimal ``k``."""

    numerator: int
    k: int = 1

    def __post_init__(self):
        num, k = int(self.numerator), int(self.k)
        if k < 1:
            raise ParameterError("factorial index must be >= 1", k=k)
        if k > MAX_FACTORIAL_K:
            raise CapacityError("factorial labels are capped", k=k, cap=MAX_FACTORIAL_K)
        # num / k! == (num / k) / (k - 1)! whenever k divides num.
        while k > 1 and num % k == 0:
            num //= k
            k -= 1
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "k", k)

    @classmethod
    def from_rational(cls, mu: Rational) -> "FactorialLabel":
        frac = _as_fraction(mu)
        k = factorial_depth(frac)
        if k > MAX_FACTORIAL_K:
            raise CapacityError("factorial labels are capped", k=k, cap=MAX_FACTORIAL_K)
        return cls(frac.numerator * (math.factorial(k) // frac.denominator), k)

    @property
    def group(self) -> str:
        return "factorial"

    def __add__(self, other: "FactorialLabel") -> "FactorialLabel":
        if not isinstance(other, FactorialLabel):
            raise DomainError("can only add factorial labels together")
        k = max(self.k, other.k)
        fk = math.factorial(k)
        num = self.numerator * (fk // math.factorial(self.k)) + other.numerator * (
            fk // math.factorial(other.k)
        )
        return FactorialLabel(num, k)

    def value(self) -> Fraction:
        return Fraction(self.numerator, math.factorial(self.k))

    def is_zero(self) -> bool:
        return self.numerator == 0

    def omega(self, lam: float) -> float:
        return 2.0 * math.pi * lam * self.numerator / math.factorial(self.k)

    def __str__(self) -> str:
        return f"{self.numerator}/{self.k}!"


FrequencyLabel = Union[IntVecLabel, DyadicLabel, FactorialLabel]


# ---------------------------------------------------------------------------
# Penalties
# ---------------------------------------------------------------------------

_PENALTY_GROUPS = {
    "QF_Log": "intvec",
    "QF_LogPowB": "intvec",
    "QF_NormAlpha": "intvec",
    "Dyadic_Linear": "dyadic",
    "Dyadic_Square": "dyadic",
    "Factorial_BLogFact": "factorial",
    "Factorial_LogFactPowB": "factorial",
    "Factorial_FactPowB": "factorial",
}


@dataclass(frozen=True)
class Penalty:
    """A resonance penalty on one label group.

    ``param`` is ``b`` for the ``*PowB``/``BLogFact`` families and ``alpha``
    for ``QF_NormAlpha``; it is ignored by the others.  The zero label
    always has penalty 0.
    """

    family: str
    param: float | None = None

    def __post_init__(self):
        if self.family not in _PENALTY_GROUPS:
            raise ParameterError("unknown penalty family", family=self.family)
        needs = self.family in (
            "QF_LogPowB",
            "QF_NormAlpha",
            "Factorial_BLogFact",
            "Factorial_LogFactPowB",
            "Factorial_FactPowB",
        )
        if needs and (self.param is None or not self.param > 0):
            raise ParameterError("penalty parameter must be positive", family=self.family)

    @property
    def group(self) -> str:
        return _PENALTY_GROUPS[self.family]

    @property
    def k_b(self) -> float:
        """Shift ``e**(b-1) / b`` used by ``QF_LogPowB``."""
        b = float(self.param)
        return math.exp(b - 1.0) / b

    def value(self, label: FrequencyLabel) -> float:
        return penalty_value(self, label)

    def __str__(self) -> str:
        return self.family if self.param is None else f"{self.family}({self.param:g})"


def penalty_value(p: Penalty, label: FrequencyLabel) -> float:
    """Evaluate penalty ``p`` on ``label``."""
    if getattr(label, "group", None) != p.group:
        raise DomainError(
            "label group does not match penalty family",
            family=p.family,
            label=str(label),
        )
    if label.is_zero():
        return 0.0
    fam, b = p.family, p.param
    if fam == "QF_Log":
        return math.log1p(label.l1())
    if fam == "QF_LogPowB":
        return math.log(p.k_b + label.l1()) ** b
    if fam == "QF_NormAlpha":
        return float(label.l1()) ** b
    if fam == "Dyadic_Linear":
        return float(label.depth)
    if fam == "Dyadic_Square":
        return float(label.depth) ** 2
    lnfact = math.lgamma(label.k + 1)
    if fam == "Factorial_BLogFact":
        return b * lnfact
    if fam == "Factorial_LogFactPowB":
        return lnfact**b
    return float(math.factorial(label.k)) ** b


@dataclass(frozen=True)
class Holds:
    trials: int


@dataclass(frozen=True)
class Counterexample:
    label1: FrequencyLabel
    label2: FrequencyLabel
    lhs: float
    rhs: float
    trial: int

    def csv_row(self, family: str) -> str:
        return f"{family},{self.label1},{self.label2},{self.lhs!r},{self.rhs!r}"


def check_subadditivity(
    p: Penalty,
    sampler: Iterable[tuple[FrequencyLabel, FrequencyLabel]],
    trials: int,
    tol: float = SUBADDITIVITY_TOL,
) -> Holds | Counterexample:
    """Look for ``p(a + b) > p(a) + p(b) + tol`` among ``trials`` pairs.

    ``sampler`` is any iterable of label pairs; iteration stops after
    ``trials`` pairs or when the iterable is exhausted.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1", trials=trials)
    count = 0
    for a, b in sampler:
        lhs = penalty_value(p, a + b)
        rhs = penalty_value(p, a) + penalty_value(p, b)
        count += 1
        if lhs > rhs + tol:
            return Counterexample(a, b, lhs, rhs, count)
        if count >= trials:
            break
    return Holds(count)


# -- pair samplers ----------------------------------------------------------


def intvec_pairs_exhaustive(max_abs: int, dim: int = 1) -> Iterator[tuple[IntVecLabel, IntVecLabel]]:
    """All pairs of integer vectors with entries in ``[-max_abs, max_abs]``."""
    rng = range(-max_abs, max_abs + 1)
    vecs = [IntVecLabel(v) for v in product(rng, repeat=dim)]
    for a in vecs:
        for b in vecs:
            yield a, b


def intvec_pairs_random(seed: int, dim: int = 1, max_abs: int = 50) -> Iterator[tuple[IntVecLabel, IntVecLabel]]:
    rng = np.random.default_rng(seed)
    while True:
        a, b = rng.integers(-max_abs, max_abs + 1, size=(2, dim))
        yield IntVecLabel(tuple(a)), IntVecLabel(tuple(b))


def dyadic_pairs_random(seed: int, max_depth: int = 30, max_num: int = 1 << 20) -> Iterator[tuple[DyadicLabel, DyadicLabel]]:
    rng = np.random.default_rng(seed)
    while True:
        d = rng.integers(0, max_depth + 1, size=2)
        k = rng.integers(-max_num, max_num + 1, size=2)
        yield DyadicLabel(int(k[0]), int(d[0])), DyadicLabel(int(k[1]), int(d[1]))


def factorial_pairs_random(seed: int, max_k: int = 12, max_num: int = 1 << 20) -> Iterator[tuple[FactorialLabel, FactorialLabel]]:
    rng = np.random.default_rng(seed)
    while True:
        k = rng.integers(1, max_k + 1, size=2)
        n = rng.integers(-max_num, max_num + 1, size=2)
        yield FactorialLabel(int(n[0]), int(k[0])), FactorialLabel(int(n[1]), int(k[1]))


# -- exhaustive ultra-subadditivity over a full period ------------------------


def _dyadic_depth_table(max_depth: int) -> np.ndarray:
    """Depth of ``j / 2**max_depth`` for ``j = 0 .. 2**max_depth - 1``."""
    n = 1 << max_depth
    j = np.arange(n)
    tz = np.zeros(n, dtype=np.int64)
    jj = j.copy()
    jj[0] = n  # depth of 0 is 0
    while True:
        even = (jj % 2 == 0) & (tz < max_depth)
        if not even.any():
            break
        tz[even] += 1
        jj[even] //= 2
    return max_depth - tz


def _factorial_depth_table(max_k: int) -> np.ndarray:
    """Depth of ``j / max_k!`` for ``j = 0 .. max_k! - 1``."""
    n = math.factorial(max_k)
    j = np.arange(n)
    depth = np.full(n, max_k, dtype=np.int64)
    for k in range(max_k, 0, -1):
        step = n // math.factorial(k)
        depth[j % step == 0] = k
    return depth


def ultra_subadditivity_violations(group: str, max_depth: int) -> int:
    """Count pairs violating ``depth(a + b) <= max(depth(a), depth(b))``.

    Depth is invariant under integer shifts, so scanning every pair in one
    period of the finest grid (``2**-max_depth`` or ``1/max_depth!``) is an
    exhaustive check for all labels up to that depth.
    """
    if group == "dyadic":
        table = _dyadic_depth_table(max_depth)
    elif group == "factorial":
        table = _factorial_depth_table(max_depth)
    else:
        raise ParameterError("group must be 'dyadic' or 'factorial'", group=group)
    n = table.size
    bad = 0
    idx = np.arange(n)
    chunk = max(1, (1 << 22) // n)
    for start in range(0, n, chunk):
        a = idx[start : start + chunk, None]
        s = (a + idx[None, :]) % n
        bad += int(np.count_nonzero(table[s] > np.maximum(table[a], table[None, :])))
    return bad


# ---------------------------------------------------------------------------
# Suppression classes and small divisors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuppressionClass:
    """Near-origin suppression law ``f(x) = exp(-p(x))`` with ``x = Omega/lambda``."""

    b: float

    name = "base"

    def f(self, x):
        return np.exp(-self.p(x))

    def p(self, x):  # pragma: no cover - overridden
        raise NotImplementedError

    @property
    def min_gap(self) -> float:
        return 0.0

    def h(self, delta_kappa: float) -> float:
        return small_divisor_h(self, delta_kappa)

    def __str__(self) -> str:
        return f"{self.name}({self.b:g})"


@dataclass(frozen=True)
class Poly(SuppressionClass):
    """``f(x) = min(1, |x|**b)``."""

    name = "poly"

    def __post_init__(self):
        if not self.b >= 0:
            raise ParameterError("Poly requires b >= 0", b=self.b)

    def p(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            return self.b * np.maximum(0.0, -np.log(x))

    @property
    def min_gap(self) -> float:
        return math.inf if self.b == 0 else 1.0 / self.b


@dataclass(frozen=True)
class Quasipoly(SuppressionClass):
    """``f(x) = exp(-(ln(1/|x|))**b)`` below ``|x| = 1`` and 1 above."""

    name = "quasipoly"

    def __post_init__(self):
        if not self.b > 1:
            raise ParameterError("Quasipoly requires b > 1", b=self.b)

    def p(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            return np.maximum(0.0, -np.log(x)) ** self.b

    @property
    def c_b(self) -> float:
        b = self.b
        return (b - 1.0) / b ** (b / (b - 1.0))


@dataclass(frozen=True)
class StretchExpt(SuppressionClass):
    """``f(x) = exp(-|x|**(-b))``."""

    name = "stretch"

    def __post_init__(self):
        if not self.b > 0:
            raise ParameterError("StretchExpt requires b > 0", b=self.b)

    def p(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            return x ** (-self.b)

    @property
    def c_b(self) -> float:
        b = self.b
        return (1.0 / (b * math.e)) ** (1.0 / b)


def make_class(name: str, b: float) -> SuppressionClass:
    """Build a suppression class from its short name."""
    key = name.lower()
    if key in ("poly", "polyb"):
        return Poly(b)
    if key in ("quasipoly", "quasi", "quasipolyb"):
        return Quasipoly(b)
    if key in ("stretch", "stretchexpt", "stretchb"):
        return StretchExpt(b)
    raise ParameterError("unknown suppression class", name=name)


def small_divisor_h(cls: SuppressionClass, delta_kappa: float) -> float:
    """Closed-form ``sup_x exp(-delta_kappa p(x)) / x`` (returns ``inf`` if unbounded)."""
    if not delta_kappa > 0:
        raise ParameterError("delta_kappa must be positive", delta_kappa=delta_kappa)
    if isinstance(cls, Poly):
        return 1.0 if delta_kappa >= cls.min_gap else math.inf
    if isinstance(cls, Quasipoly):
        return math.exp(cls.c_b / delta_kappa ** (1.0 / (cls.b - 1.0)))
    if isinstance(cls, StretchExpt):
        return cls.c_b / delta_kappa ** (1.0 / cls.b)
    raise ParameterError("unsupported class", cls=str(cls))


def small_divisor_sup_oracle(cls: SuppressionClass, delta_kappa: float, grid: Iterable[float]) -> float:
    """Brute-force maximum of ``exp(-delta_kappa p(x)) / x`` over ``grid``."""
    x = np.asarray(list(grid) if not isinstance(grid, np.ndarray) else grid, dtype=float)
    if x.size == 0 or np.any(x <= 0):
        raise ParameterError("grid must be non-empty and positive")
    # Work in logs so huge amplifications near the origin do not overflow.
    logs = -delta_kappa * cls.p(x) - np.log(x)
    return float(np.exp(np.max(logs)))


def default_oracle_grid(lo: float = 1e-12, hi: float = 1e3, per_decade: int = 2000) -> np.ndarray:
    n = int(round(math.log10(hi / lo) * per_decade)) + 1
    return np.geomspace(lo, hi, n)


def diophantine_margin(omega: Sequence[float], gamma: float, n_max: int) -> float:
    """Empirical Diophantine constant ``min |n.w| |n|_1**gamma / |w|``.

    The minimum runs over the box of nonzero integer vectors with every
    entry in ``[-n_max, n_max]``; the weight uses the L1 norm.
    """
    w = np.asarray(omega, dtype=float)
    if n_max < 1:
        raise ParameterError("n_max must be >= 1", n_max=n_max)
    norm = float(np.linalg.norm(w))
    if norm == 0:
        raise ParameterError("omega must be nonzero")
    m = w.size
    if (2 * n_max + 1) ** m > 5_000_000:
        raise CapacityError("too many integer vectors", dim=m, n_max=n_max)
    axes = np.meshgrid(*[np.arange(-n_max, n_max + 1)] * m, indexing="ij")
    n = np.stack([a.ravel() for a in axes], axis=1)
    l1 = np.abs(n).sum(axis=1)
    keep = l1 > 0
    n, l1 = n[keep], l1[keep]
    vals = np.abs(n @ w) * l1.astype(float) ** gamma / norm
    return float(vals.min())


def label_from_string(text: str) -> FrequencyLabel:
    """Parse the ``str()`` form of any label back into a label."""
    text = text.strip()
    if text.startswith("n(") and text.endswith(")"):
        body = text[2:-1]
        return IntVecLabel(tuple(int(v) for v in body.split(";")) if body else ())
    if "/2^" in text:
        num, d = text.split("/2^")
        return DyadicLabel(int(num), int(d))
    if text.endswith("!") and "/" in text:
        num, k = text[:-1].split("/")
        return FactorialLabel(int(num), int(k))
    raise DomainError("unrecognised label", text=text)


__all__ = [
    "CLUSTER_CONSTANT_ALT",
    "Counterexample",
    "DyadicLabel",
    "FactorialLabel",
    "FrequencyLabel",
    "Holds",
    "IntVecLabel",
    "Penalty",
    "Poly",
    "Quasipoly",
    "StretchExpt",
    "SuppressionClass",
    "check_subadditivity",
    "default_oracle_grid",
    "diophantine_margin",
    "dyadic_depth",
    "dyadic_pairs_random",
    "factorial_depth",
    "factorial_pairs_random",
    "intvec_pairs_exhaustive",
    "intvec_pairs_random",
    "label_from_string",
    "make_class",
    "penalty_value",
    "small_divisor_h",
    "small_divisor_sup_oracle",
    "ultra_subadditivity_violations",
]
