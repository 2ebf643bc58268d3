"""Entire realizers for periodic candidate orbits.

For distinct nodes w_0..w_n with w_{n+1} = w_{n'} and any entire F,

    f(z) = sum_k  P(z)/(z - w_k) * (F(z) - F(w_k) + w_{k+1} / prod_{k' != k}(w_k - w_{k'}))

with P(z) = prod_k (z - w_k) satisfies f(w_k) = w_{k+1}. Polynomial F gives a
polynomial f (kept in expanded form); F(z) = c e^z gives a transcendental f
(kept as a closed-form evaluator).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import mpmath

from .core import OrbitSequence, ToleranceConfig
from .numeric import DEFAULT_PRECISION, parse_complex, rounding_slack, working_precision

# below this node separation a conditioning warning is emitted
NEAR_NODE_DISTANCE = 1e-8
# |value| beyond 2**OVERFLOW_EXPONENT is treated as leaving the representable range
OVERFLOW_EXPONENT = 2**40


class OrbitOverflow(OverflowError):
    """Iteration left the representable range; ``partial`` holds the orbit so far."""

    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class PeriodicOrbitSpec:
    """Nodes w_0..w_{n+1} of an eventually periodic orbit, w_{n+1} = w_{n_prime}."""

    w: tuple
    n_prime: int
    precision_bits: int = DEFAULT_PRECISION

    def __post_init__(self):
        w = tuple(parse_complex(x, self.precision_bits) for x in self.w)
        object.__setattr__(self, "w", w)
        if len(w) < 2:
            raise ValueError("need at least w_0 and w_1")
        n = len(w) - 2
        if not 0 <= self.n_prime <= n:
            raise ValueError(f"n_prime must lie in [0, {n}]")
        if w[n + 1] != w[self.n_prime]:
            raise ValueError("w_{n+1} must equal w_{n_prime} exactly")
        for i in range(n + 1):
            for j in range(i):
                if w[i] == w[j]:
                    raise ValueError(f"nodes w_{j} and w_{i} coincide; "
                                     "the realizer divides by w_{i} - w_{j}")

    @property
    def n(self) -> int:
        return len(self.w) - 2

    @property
    def nodes(self) -> tuple:
        return self.w[:-1]

    def conditioning(self) -> mpmath.mpf:
        """prod_{k < k'} |w_k - w_{k'}|; tiny values mean fragile coefficients."""
        nodes = self.nodes
        with working_precision(self.precision_bits):
            out = mpmath.mpf(1)
            for i in range(len(nodes)):
                for j in range(i):
                    out *= abs(nodes[i] - nodes[j])
            return out

    @classmethod
    def from_sequence(cls, seq: OrbitSequence,
                      tol: ToleranceConfig = ToleranceConfig()) -> "PeriodicOrbitSpec":
        """Cut a periodic prefix at the first return z_{n+1} = z_{n'}."""
        pts = seq.points
        with working_precision(seq.precision_bits):
            eq_tol = mpmath.mpf(tol.eq_tol)
            for m in range(1, len(pts)):
                for j in range(m):
                    if abs(pts[m] - pts[j]) <= eq_tol:
                        w = list(pts[:m]) + [pts[j]]
                        return cls(tuple(w), j, seq.precision_bits)
        raise ValueError("sequence has no repeat within the prefix; not periodic")


@dataclass(frozen=True)
class BaseFunction:
    """The free entire function F: a polynomial, or c * exp(z)."""

    kind: str
    coefficients: tuple = ()
    c: Optional[mpmath.mpc] = None

    def __post_init__(self):
        if self.kind not in ("polynomial", "exponential"):
            raise ValueError(f"unknown base function kind {self.kind!r}")
        if self.kind == "exponential" and self.c is None:
            raise ValueError("exponential base function needs c")

    @classmethod
    def zero(cls) -> "BaseFunction":
        return cls("polynomial", ())

    @classmethod
    def polynomial(cls, coefficients: Sequence) -> "BaseFunction":
        return cls("polynomial", tuple(coefficients))

    @classmethod
    def exponential(cls, c) -> "BaseFunction":
        return cls("exponential", (), c)

    @property
    def is_polynomial(self) -> bool:
        return self.kind == "polynomial"

    def coeffs(self, bits: int) -> list:
        return [parse_complex(a, bits) for a in self.coefficients]

    def __call__(self, z):
        if self.kind == "exponential":
            return mpmath.mpc(self.c) * mpmath.exp(z)
        return _horner(self.coeffs(mpmath.mp.prec), z)

    @classmethod
    def from_json(cls, obj: dict, bits: int) -> "BaseFunction":
        kind = obj.get("kind")
        if kind == "polynomial":
            return cls.polynomial(parse_complex(a, bits) for a in obj.get("coefficients", []))
        if kind == "exponential":
            return cls.exponential(parse_complex(obj["c"], bits))
        raise ValueError(f"unknown base function kind {kind!r}")


def _horner(coeffs: Sequence, z):
    acc = mpmath.mpc(0)
    for a in reversed(coeffs):
        acc = acc * z + a
    return acc


def _poly_mul(a: Sequence, b: Sequence) -> list:
    if not a or not b:
        return []
    out = [mpmath.mpc(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_add(a: Sequence, b: Sequence) -> list:
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _trim(coeffs: list) -> list:
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def node_polynomial(nodes: Sequence) -> list:
    """Coefficients (ascending) of prod (z - w)."""
    out = [mpmath.mpc(1)]
    for w in nodes:
        out = _poly_mul(out, [-w, mpmath.mpc(1)])
    return out


@dataclass(frozen=True)
class RealizationPolynomial:
    coefficients: tuple
    spec: PeriodicOrbitSpec
    base: BaseFunction
    node_residual: mpmath.mpf = field(default=mpmath.mpf(0))

    @property
    def precision_bits(self) -> int:
        return self.spec.precision_bits

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, z):
        with working_precision(self.precision_bits):
            return _horner(self.coefficients, mpmath.mpc(z))


@dataclass(frozen=True)
class RealizerEvaluator:
    """Closed-form realizer for a transcendental base function."""

    spec: PeriodicOrbitSpec
    base: BaseFunction
    node_residual: mpmath.mpf = field(default=mpmath.mpf(0))

    @property
    def precision_bits(self) -> int:
        return self.spec.precision_bits

    def __call__(self, z):
        with working_precision(self.precision_bits):
            z = mpmath.mpc(z)
            nodes = self.spec.nodes
            w = self.spec.w
            total = mpmath.mpc(0)
            Fz = self.base(z)
            for k, wk in enumerate(nodes):
                others = [x for i, x in enumerate(nodes) if i != k]
                pk = mpmath.mpc(1)
                denom = mpmath.mpc(1)
                for x in others:
                    pk *= z - x
                    denom *= wk - x
                total += pk * (Fz - self.base(wk) + w[k + 1] / denom)
            return total


Realizer = Union[RealizationPolynomial, RealizerEvaluator]


def _node_audit(f: Callable, spec: PeriodicOrbitSpec) -> mpmath.mpf:
    worst = mpmath.mpf(0)
    for k, wk in enumerate(spec.nodes):
        err = abs(f(wk) - spec.w[k + 1]) / (1 + abs(spec.w[k + 1]))
        worst = max(worst, err)
    return worst


def build_periodic_realizer(spec: PeriodicOrbitSpec,
                            F: BaseFunction = BaseFunction.zero()) -> Realizer:
    nodes = spec.nodes
    bits = spec.precision_bits
    with working_precision(bits):
        min_gap = min((abs(a - b) for i, a in enumerate(nodes) for b in nodes[:i]),
                      default=mpmath.inf)
        if min_gap < NEAR_NODE_DISTANCE:
            warnings.warn(
                f"nearly coincident nodes (min gap {mpmath.nstr(min_gap, 3)}, "
                f"conditioning {mpmath.nstr(spec.conditioning(), 3)})",
                RuntimeWarning,
                stacklevel=2,
            )
        if not F.is_polynomial:
            ev = RealizerEvaluator(spec, F)
            return RealizerEvaluator(spec, F, _node_audit(ev, spec))

        fco = F.coeffs(bits)
        total: list = []
        for k, wk in enumerate(nodes):
            others = [x for i, x in enumerate(nodes) if i != k]
            pk = node_polynomial(others)
            denom = mpmath.mpc(1)
            for x in others:
                denom *= wk - x
            factor = list(fco) if fco else [mpmath.mpc(0)]
            factor[0] = factor[0] - _horner(fco, wk) + spec.w[k + 1] / denom
            total = _poly_add(total, _poly_mul(pk, factor))
        coeffs = tuple(_trim([mpmath.mpc(a) for a in total]))
        poly = RealizationPolynomial(coeffs, spec, F)
        return RealizationPolynomial(coeffs, spec, F, _node_audit(poly, spec))


def realizer_family_member(spec: PeriodicOrbitSpec, c) -> RealizationPolynomial:
    """Realizer built from F(z) = c z; differs from the F = 0 one by c (n+1) P."""
    c = parse_complex(c, spec.precision_bits)
    return build_periodic_realizer(spec, BaseFunction.polynomial([0, c]))


def iterate(f: Callable, z0, count: int, precision_bits: Optional[int] = None) -> OrbitSequence:
    """Return [z0, f(z0), ..., f^count(z0)]."""
    if count < 1:
        raise ValueError("count must be >= 1")
    bits = precision_bits or getattr(f, "precision_bits", DEFAULT_PRECISION)
    with working_precision(bits):
        z = parse_complex(z0, bits)
        out = [z]
        for k in range(count):
            z = mpmath.mpc(f(z))
            finite = mpmath.isfinite(z.real) and mpmath.isfinite(z.imag)
            if not finite or (z != 0 and mpmath.mag(z) > OVERFLOW_EXPONENT):
                raise OrbitOverflow(f"orbit overflowed at step {k + 1}", out)
            out.append(z)
    return OrbitSequence(tuple(out), bits)


@dataclass
class RealizationReport:
    passed: bool
    max_residual: mpmath.mpf
    first_failure: Optional[int]
    residuals: list

    def to_report(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "evidence": f"max relative residual {mpmath.nstr(self.max_residual, 6)}",
            "witness": self.first_failure,
        }


def verify_realization(f: Callable, seq: OrbitSequence,
                       tol: ToleranceConfig = ToleranceConfig()) -> RealizationReport:
    """Check f(z_k) = z_{k+1} up to rel_tol * (1 + |z_{k+1}|) along the prefix."""
    pts = seq.points
    with working_precision(seq.precision_bits):
        rel_tol = mpmath.mpf(tol.rel_tol)
        residuals = []
        first = None
        for k in range(len(pts) - 1):
            r = abs(mpmath.mpc(f(pts[k])) - pts[k + 1]) / (1 + abs(pts[k + 1]))
            residuals.append(r)
            if first is None and r > rel_tol:
                first = k
        worst = max(residuals)
    return RealizationReport(first is None, worst, first, residuals)


def interpolation_bound(bits: int) -> mpmath.mpf:
    return rounding_slack(bits)
