"""Sequences of complex points, candidate-orbit consistency and classification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import mpmath

from .numeric import (
    DEFAULT_PRECISION,
    MIN_PRECISION,
    format_complex,
    format_real,
    parse_complex,
    parse_real,
    working_precision,
)

TAIL_KINDS = (
    "none",
    "tends-to-zero",
    "tends-to-point",
    "escaping",
    "periodic-from",
    "bounded",
)

# pairs closer than this multiple of eq_tol (but not equal) are reported
NEAR_COINCIDENCE_FACTOR = 1e6


class InconsistentSequence(ValueError):
    """The sequence maps one point to two different successors."""


@dataclass(frozen=True)
class Tail:
    """Declared asymptotic behaviour of the part of the sequence not stored."""

    kind: str = "none"
    zeta: Optional[mpmath.mpc] = None
    index: Optional[int] = None
    period: Optional[int] = None
    bound: Optional[mpmath.mpf] = None

    def __post_init__(self):
        if self.kind not in TAIL_KINDS:
            raise ValueError(f"unknown tail kind {self.kind!r}")
        if self.kind == "tends-to-point" and self.zeta is None:
            raise ValueError("tends-to-point tail needs zeta")
        if self.kind == "periodic-from":
            if self.index is None or self.period is None:
                raise ValueError("periodic-from tail needs index and period")
            if self.index < 0 or self.period < 1:
                raise ValueError("periodic-from needs index >= 0 and period >= 1")
        if self.kind == "bounded" and (self.bound is None or self.bound <= 0):
            raise ValueError("bounded tail needs L > 0")

    @property
    def declared(self) -> bool:
        return self.kind != "none"

    def to_json(self, bits: int) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.zeta is not None:
            out["zeta"] = format_complex(self.zeta, bits)
        if self.index is not None:
            out["index"] = self.index
        if self.period is not None:
            out["period"] = self.period
        if self.bound is not None:
            out["L"] = format_real(self.bound, bits)
        return out

    @classmethod
    def from_json(cls, obj: Optional[dict], bits: int) -> Optional["Tail"]:
        if obj is None:
            return None
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ValueError("tail must be an object with a 'kind' field")
        return cls(
            kind=obj["kind"],
            zeta=parse_complex(obj["zeta"], bits) if "zeta" in obj else None,
            index=int(obj["index"]) if "index" in obj else None,
            period=int(obj["period"]) if "period" in obj else None,
            bound=parse_real(obj["L"], bits) if "L" in obj else None,
        )


@dataclass(frozen=True)
class ToleranceConfig:
    """Thresholds used when comparing points of a finite prefix.

    ``eq_tol`` is absolute; keep it below ``rel_tol`` times the largest
    modulus in play, otherwise two points that compare equal can still have
    successors flagged as different purely through scaling. Values may be
    decimal strings when they fall outside double range.
    """

    eq_tol: float | str = 1e-30
    rel_tol: float | str = 1e-30
    escape_radius: float | str = 1e6

    def __post_init__(self):
        for name in ("eq_tol", "rel_tol", "escape_radius"):
            if not mpmath.mpf(getattr(self, name)) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class OrbitSequence:
    points: tuple
    precision_bits: int = DEFAULT_PRECISION
    tail: Optional[Tail] = None

    def __post_init__(self):
        if self.precision_bits < MIN_PRECISION:
            raise ValueError(f"precision_bits must be >= {MIN_PRECISION}")
        if len(self.points) < 2:
            raise ValueError("sequence too short: need at least 2 points")
        pts = tuple(parse_complex(p, self.precision_bits) for p in self.points)
        for k, z in enumerate(pts):
            if not (mpmath.isfinite(z.real) and mpmath.isfinite(z.imag)):
                raise ValueError(f"point {k} is not finite")
        object.__setattr__(self, "points", pts)
        tail = self.tail
        if tail is not None and tail.kind == "periodic-from":
            tol = mpmath.mpf(ToleranceConfig().eq_tol)
            i, p = tail.index, tail.period
            for k in range(i + p, len(pts)):
                if abs(pts[k] - pts[k - p]) > tol:
                    raise ValueError(
                        f"declared periodic-from({i},{p}) but z_{k} != z_{k - p}"
                    )

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, k):
        return self.points[k]

    def moduli(self) -> list:
        with working_precision(self.precision_bits):
            return [abs(z) for z in self.points]

    def with_points(self, points: Iterable) -> "OrbitSequence":
        return OrbitSequence(tuple(points), self.precision_bits, self.tail)

    @classmethod
    def from_values(cls, values: Iterable, precision_bits: int = DEFAULT_PRECISION,
                    tail: Optional[Tail] = None) -> "OrbitSequence":
        return cls(tuple(values), precision_bits, tail)

    def to_json(self) -> dict:
        bits = self.precision_bits
        out: dict[str, Any] = {"precision_bits": bits}
        if self.tail is not None:
            out["tail"] = self.tail.to_json(bits)
        out["points"] = [format_complex(z, bits) for z in self.points]
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, obj: dict, precision_bits: Optional[int] = None) -> "OrbitSequence":
        if not isinstance(obj, dict):
            raise ValueError("sequence file must hold a JSON object")
        if "points" not in obj:
            raise ValueError("sequence file lacks 'points'")
        bits = int(precision_bits or obj.get("precision_bits", DEFAULT_PRECISION))
        tail = Tail.from_json(obj.get("tail"), bits)
        pts = tuple(parse_complex(p, bits) for p in obj["points"])
        return cls(pts, bits, tail)


@dataclass(frozen=True)
class OrbitClass:
    tag: str
    evidence: str
    exact: bool

    TAGS = ("Periodic", "Escaping", "Bounded", "Bungee")


@dataclass
class ConsistencyReport:
    passed: bool
    witness: Optional[tuple[int, int]] = None
    near_coincidences: list = field(default_factory=list)
    evidence: str = ""

    def to_report(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "evidence": self.evidence,
            "witness": list(self.witness) if self.witness else None,
            "near_coincidences": [
                {"p": p, "q": q, "distance": mpmath.nstr(d, 6)}
                for p, q, d in self.near_coincidences
            ],
        }


def check_candidate_consistency(seq: OrbitSequence,
                                tol: ToleranceConfig = ToleranceConfig()) -> ConsistencyReport:
    """Finite-prefix version of "z_p = z_q forces z_{p+1} = z_{q+1}".

    Scans pairs p < q < len-1 in lexicographic order and stops at the first
    pair whose points coincide (within ``eq_tol``) while their successors do
    not (beyond ``rel_tol * (1 + |z_{p+1}|)``). A pass only certifies the
    prefix: full candidate-orbit status also depends on the unseen tail.
    """
    if len(seq) < 2:
        raise ValueError("sequence too short")
    pts = seq.points
    n = len(pts)
    with working_precision(seq.precision_bits):
        eq_tol = mpmath.mpf(tol.eq_tol)
        rel_tol = mpmath.mpf(tol.rel_tol)
        near_tol = eq_tol * NEAR_COINCIDENCE_FACTOR
        near = []
        for p in range(n - 1):
            for q in range(p + 1, n - 1):
                dist = abs(pts[p] - pts[q])
                if dist <= eq_tol:
                    nxt = abs(pts[p + 1] - pts[q + 1])
                    if nxt > rel_tol * (1 + abs(pts[p + 1])):
                        return ConsistencyReport(
                            passed=False,
                            witness=(p, q),
                            near_coincidences=near,
                            evidence=(f"z_{p} = z_{q} but z_{p + 1} and z_{q + 1} differ "
                                      f"by {mpmath.nstr(nxt, 6)}"),
                        )
                elif dist <= near_tol:
                    near.append((p, q, dist))
    evidence = f"no conflicting coincidence among {n} points"
    if near:
        evidence += f"; {len(near)} near-coincident pair(s) flagged"
    return ConsistencyReport(True, None, near, evidence)


def _first_repeat(seq: OrbitSequence, eq_tol) -> Optional[tuple[int, int]]:
    pts = seq.points
    for q in range(1, len(pts)):
        for p in range(q):
            if abs(pts[p] - pts[q]) <= eq_tol:
                return p, q
    return None


def classify_orbit(seq: OrbitSequence, tol: ToleranceConfig = ToleranceConfig()) -> OrbitClass:
    report = check_candidate_consistency(seq, tol)
    if not report.passed:
        raise InconsistentSequence(report.evidence)

    tail = seq.tail
    if tail is not None and tail.declared:
        tag = {
            "periodic-from": "Periodic",
            "escaping": "Escaping",
            "tends-to-zero": "Bounded",
            "tends-to-point": "Bounded",
            "bounded": "Bounded",
        }[tail.kind]
        return OrbitClass(tag, f"declared tail {tail.kind}", exact=True)

    with working_precision(seq.precision_bits):
        eq_tol = mpmath.mpf(tol.eq_tol)
        radius = mpmath.mpf(tol.escape_radius)
        rep = _first_repeat(seq, eq_tol)
        if rep is not None:
            return OrbitClass("Periodic", f"z_{rep[0]} repeats at index {rep[1]}", exact=False)
        mods = seq.moduli()
        window = mods[-math.ceil(len(mods) / 4):]
        increasing = all(b > a for a, b in zip(window, window[1:]))
        if increasing and all(m > radius for m in window):
            return OrbitClass(
                "Escaping",
                f"last {len(window)} moduli strictly increase beyond {mpmath.nstr(radius, 6)}",
                exact=False,
            )
        top = max(mods)
        if top <= radius:
            return OrbitClass("Bounded", f"max modulus {mpmath.nstr(top, 6)}", exact=False)
        return OrbitClass("Bungee", f"max modulus {mpmath.nstr(top, 6)} exceeds the "
                                    f"escape radius without escaping", exact=False)


@dataclass(frozen=True)
class DegreeHint:
    degree: Optional[int]
    residual: float
    mean: float
    stddev: float
    ratios: tuple


def polynomial_degree_hint(seq: OrbitSequence) -> DegreeHint:
    """Guess a polynomial degree from log|z_{n+1}| / log|z_n|.

    A polynomial realizer of an escaping (or superattracting) orbit forces
    this ratio to settle on an integer.
    """
    n = len(seq)
    count = math.ceil(n / 2)
    idx = list(range(n - 1))[-count:]
    with working_precision(seq.precision_bits):
        mods = seq.moduli()
        for k in idx:
            for j in (k, k + 1):
                if mods[j] == 1:
                    raise ValueError(f"|z_{j}| = 1: log ratio undefined")
        ratios = [mpmath.log(mods[k + 1]) / mpmath.log(mods[k]) for k in idx]
        mean = mpmath.fsum(ratios) / len(ratios)
        var = mpmath.fsum((r - mean) ** 2 for r in ratios) / len(ratios)
        std = mpmath.sqrt(var)
        nearest = mpmath.nint(mean)
        residual = abs(mean - nearest)
    degree = int(nearest) if (std < 0.05 and residual < 0.05 and nearest >= 1) else None
    return DegreeHint(degree, float(residual), float(mean), float(std),
                      tuple(float(r) for r in ratios))
