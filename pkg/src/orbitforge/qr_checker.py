"""Quasiregular necessary conditions on moduli, and the Hölder exponents they imply.

Everything is compared in the log domain: ratios such as |z_n|/|z_{n+1}| for
z_n = 2^(-2^n) leave double range after a handful of terms, their logarithms
do not.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import mpmath

from .core import OrbitSequence
from .numeric import rounding_slack, working_precision

DEFAULT_MU_GRID = tuple(0.25 * k for k in range(1, 33))
DEFAULT_NU_GRID = DEFAULT_MU_GRID
DEFAULT_LOG2C_GRID = (0.01, 0.1, 0.5, 1, 2, 5)


@dataclass(frozen=True)
class QRParams:
    mu: float
    nu: float
    C: float
    n0: int = 0

    def __post_init__(self):
        if not (self.mu > 0 and self.nu > 0):
            raise ValueError("mu and nu must be positive")
        if not self.C > 1:
            raise ValueError("C must exceed 1")
        if self.n0 < 0:
            raise ValueError("n0 must be non-negative")

    def to_json(self) -> dict:
        return {"mu": self.mu, "nu": self.nu, "C": self.C, "n0": self.n0}


@dataclass(frozen=True)
class Witness:
    n: int
    condition: str  # e1 | e1b | e1new | e2new
    side: str       # lower | upper
    lhs: mpmath.mpf  # log-domain values
    rhs: mpmath.mpf

    def to_json(self) -> dict:
        return {"n": self.n, "condition": self.condition, "side": self.side,
                "lhs_log": mpmath.nstr(self.lhs, 12), "rhs_log": mpmath.nstr(self.rhs, 12)}


@dataclass
class QRConditionReport:
    e1_ok: bool
    e1b_ok: bool
    witnesses: list = field(default_factory=list)
    checked: int = 0

    @property
    def passed(self) -> bool:
        return self.e1_ok and self.e1b_ok

    def to_report(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "evidence": f"{self.checked} index(es) checked; e1 {'ok' if self.e1_ok else 'violated'}, "
                        f"e1b {'ok' if self.e1b_ok else 'violated'}",
            "witness": [w.to_json() for w in self.witnesses],
        }


def _log_moduli(seq: OrbitSequence) -> list:
    logs = []
    for k, z in enumerate(seq.points):
        m = abs(z)
        if m == 0:
            raise ValueError(f"zero modulus at index {k}")
        logs.append(mpmath.log(m))
    return logs


def _leq(lhs, rhs, slack) -> bool:
    return lhs <= rhs + slack * (1 + abs(lhs) + abs(rhs))


def check_necessary(seq: OrbitSequence, params: QRParams, stop_at_first: bool = False,
                    ) -> QRConditionReport:
    """Evaluate the two-sided ratio inequalities from index n0 on.

    With R_n = |z_n| / |z_{n+1}| the decreasing case requires
    -2 log C + mu log R_n <= log R_{n+1} <= 2 log C + nu log R_n,
    and the increasing case the same with every ratio inverted.
    """
    with working_precision(seq.precision_bits):
        return _check_logs(_log_moduli(seq), seq.precision_bits, params, stop_at_first)


def _check_logs(lg: list, bits: int, params: QRParams, stop_at_first: bool) -> QRConditionReport:
    slack = rounding_slack(bits)
    two_log_c = 2 * mpmath.log(mpmath.mpf(params.C))
    mu, nu = mpmath.mpf(params.mu), mpmath.mpf(params.nu)
    report = QRConditionReport(True, True)
    for n in range(params.n0, len(lg) - 2):
        report.checked += 1
        if lg[n] >= lg[n + 1]:
            cond = "e1"
            a = lg[n] - lg[n + 1]
            b = lg[n + 1] - lg[n + 2]
        else:
            cond = "e1b"
            a = lg[n + 1] - lg[n]
            b = lg[n + 2] - lg[n + 1]
        low = -two_log_c + mu * a
        high = two_log_c + nu * a
        bad = []
        if not _leq(low, b, slack):
            bad.append(Witness(n, cond, "lower", low, b))
        if not _leq(b, high, slack):
            bad.append(Witness(n, cond, "upper", b, high))
        if bad:
            report.witnesses.extend(bad)
            if cond == "e1":
                report.e1_ok = False
            else:
                report.e1b_ok = False
            if stop_at_first:
                break
    return report


def check_one_sided(seq: OrbitSequence, params: QRParams,
                              stop_at_first: bool = False) -> QRConditionReport:
    """One-sided halves of the ratio inequalities: the upper bound when the
    sequence decreases, the lower bound when it increases."""
    with working_precision(seq.precision_bits):
        lg = _log_moduli(seq)
        slack = rounding_slack(seq.precision_bits)
        two_log_c = 2 * mpmath.log(mpmath.mpf(params.C))
        mu, nu = mpmath.mpf(params.mu), mpmath.mpf(params.nu)
        report = QRConditionReport(True, True)
        for n in range(params.n0, len(lg) - 2):
            report.checked += 1
            if lg[n] >= lg[n + 1]:
                lhs = lg[n + 1] - lg[n + 2]
                rhs = two_log_c + nu * (lg[n] - lg[n + 1])
                if not _leq(lhs, rhs, slack):
                    report.e1_ok = False
                    report.witnesses.append(Witness(n, "e1new", "upper", lhs, rhs))
            if lg[n] <= lg[n + 1]:
                lhs = -two_log_c + mu * (lg[n + 1] - lg[n])
                rhs = lg[n + 2] - lg[n + 1]
                if not _leq(lhs, rhs, slack):
                    report.e1b_ok = False
                    report.witnesses.append(Witness(n, "e2new", "lower", lhs, rhs))
            if stop_at_first and report.witnesses:
                break
        return report


@dataclass(frozen=True)
class ParamGrid:
    mu: tuple = DEFAULT_MU_GRID
    nu: tuple = DEFAULT_NU_GRID
    log2C: tuple = DEFAULT_LOG2C_GRID

    def __post_init__(self):
        if not (self.mu and self.nu and self.log2C):
            raise ValueError("empty parameter grid")

    def points(self) -> Iterable[QRParams]:
        """Tightest constants first: C ascending, then mu descending, nu ascending."""
        for lc in sorted(self.log2C):
            for mu in sorted(self.mu, reverse=True):
                for nu in sorted(self.nu):
                    yield QRParams(mu, nu, 2.0 ** lc, 0)


def _ratio_pairs(lg: list) -> list:
    """(a_n, b_n): log ratio at step n and at step n+1, oriented as in the checks."""
    out = []
    for n in range(len(lg) - 2):
        if lg[n] >= lg[n + 1]:
            out.append((lg[n] - lg[n + 1], lg[n + 1] - lg[n + 2]))
        else:
            out.append((lg[n + 1] - lg[n], lg[n + 2] - lg[n + 1]))
    return out


def search_params(seq: OrbitSequence, grid: ParamGrid = ParamGrid()) -> Optional[QRParams]:
    """First grid point (in ``ParamGrid.points`` order) passing ``check_necessary``.

    For fixed C the conditions split into mu <= mu_max(C) and nu >= nu_min(C),
    so the grid is filtered analytically first; survivors are confirmed by the
    exact check in scan order, which gives the same answer as a full scan.
    """
    bits = seq.precision_bits
    with working_precision(bits):
        lg = _log_moduli(seq)
        pairs = _ratio_pairs(lg)
        loose = mpmath.mpf(10) ** -9
        mus = sorted(grid.mu, reverse=True)
        nus = sorted(grid.nu)
        for lc in sorted(grid.log2C):
            C = 2.0 ** lc
            two_log_c = 2 * mpmath.log(mpmath.mpf(C))
            mu_max, nu_min, feasible = mpmath.inf, -mpmath.inf, True
            for a, b in pairs:
                if a == 0:
                    if abs(b) > two_log_c * (1 + loose):
                        feasible = False
                        break
                    continue
                mu_max = min(mu_max, (b + two_log_c) / a)
                nu_min = max(nu_min, (b - two_log_c) / a)
            if not feasible:
                continue
            cand_mu = [m for m in mus if m <= mu_max * (1 + loose) + loose]
            cand_nu = [v for v in nus if v >= nu_min * (1 - loose) - loose]
            for mu in cand_mu:
                for nu in cand_nu:
                    params = QRParams(mu, nu, C, 0)
                    if _check_logs(lg, bits, params, stop_at_first=True).passed:
                        return params
    return None


@dataclass(frozen=True)
class HolderExponents:
    alpha: float
    beta: float
    N: int

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "N": self.N}


def derive_holder(params: QRParams, seq: OrbitSequence) -> HolderExponents:
    """Exponents with x_n^alpha <= x_{n+1} <= x_n^beta from index N on.

    beta = mu / (2 (mu + 1)), alpha = mu + 2 + max(mu, nu); N is the first
    index from which every x_n lies below min(1, C^(-4/mu)).
    """
    mu, nu, C = params.mu, params.nu, params.C
    beta = mu / (2 * (mu + 1))
    alpha = mu + 2 + max(mu, nu)
    with working_precision(seq.precision_bits):
        lg = _log_moduli(seq)
        threshold = min(mpmath.mpf(0), -4 * mpmath.log(mpmath.mpf(C)) / mu)
        N = None
        for k in range(len(lg) - 1, -1, -1):
            if lg[k] < threshold:
                N = k
            else:
                break
    if N is None or N < params.n0:
        if N is not None:
            N = params.n0
        else:
            raise ValueError("no index in the prefix satisfies x_N < min(1, C^(-4/mu))")
    return HolderExponents(alpha, beta, N)


@dataclass
class HolderReport:
    passed: bool
    violations: list
    checked: int

    def to_report(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "evidence": f"{self.checked} step(s) checked, {len(self.violations)} violation(s)",
            "witness": [{"n": n, "side": side} for n, side in self.violations],
        }


def verify_holder(seq: OrbitSequence, exps: HolderExponents) -> HolderReport:
    """Check alpha log x_n <= log x_{n+1} <= beta log x_n for N <= n < len - 1."""
    with working_precision(seq.precision_bits):
        lg = _log_moduli(seq)
        slack = rounding_slack(seq.precision_bits)
        alpha, beta = mpmath.mpf(exps.alpha), mpmath.mpf(exps.beta)
        violations = []
        checked = 0
        for n in range(exps.N, len(lg) - 1):
            checked += 1
            if not _leq(alpha * lg[n], lg[n + 1], slack):
                violations.append((n, "lower"))
            if not _leq(lg[n + 1], beta * lg[n], slack):
                violations.append((n, "upper"))
    return HolderReport(not violations, violations, checked)


def stride_pairs(stride: int, first: int, second: int, start: int = 0) -> Callable:
    """Pair selector giving (stride*m + first, stride*m + second) for m >= start."""
    def select(seq: OrbitSequence) -> list:
        out = []
        m = start
        while stride * m + max(first, second) + 1 < len(seq):
            out.append((m, stride * m + first, stride * m + second))
            m += 1
        return out
    return select


@dataclass
class HolderWitness:
    alpha: float
    C: float
    m: Optional[int]
    i: Optional[int]
    j: Optional[int]
    lhs_log: Optional[mpmath.mpf] = None
    rhs_log: Optional[mpmath.mpf] = None

    @property
    def found(self) -> bool:
        return self.i is not None

    def to_json(self) -> dict:
        out = {"alpha": self.alpha, "C": self.C, "m": self.m, "i": self.i, "j": self.j}
        if self.found:
            out["lhs"] = mpmath.nstr(mpmath.exp(self.lhs_log), 6)
            out["rhs"] = mpmath.nstr(mpmath.exp(self.rhs_log), 6)
        return out


@dataclass
class HolderScanReport:
    results: list

    @property
    def all_witnessed(self) -> bool:
        return all(r.found for r in self.results)

    def first(self) -> Optional[HolderWitness]:
        return next((r for r in self.results if r.found), None)

    def to_report(self) -> dict:
        return {
            "verdict": "fail" if self.all_witnessed else "info",
            "evidence": (f"{sum(r.found for r in self.results)} of {len(self.results)} "
                         "(alpha, C) grid points violated by the data"),
            "witness": [r.to_json() for r in self.results],
        }


def holder_violation_scan(seq: OrbitSequence, alpha_grid: Sequence[float],
                          C_grid: Sequence[float], pair_selector: Callable,
                          radius: Optional[float] = None) -> HolderScanReport:
    """Look for |z_{i+1} - z_{j+1}| > C |z_i - z_j|^alpha among selected pairs.

    A witness for every (alpha, C) rules out any realizer obeying a Hölder
    condition near the points, hence any quasiregular realizer. ``radius``
    keeps only pairs with both points inside that disc about 0.
    """
    pairs = pair_selector(seq)
    if not pairs:
        raise ValueError("pair selection is empty")
    pts = seq.points
    with working_precision(seq.precision_bits):
        rows = []
        for m, i, j in pairs:
            if radius is not None and not (abs(pts[i]) < radius and abs(pts[j]) < radius):
                continue
            image = abs(pts[i + 1] - pts[j + 1])
            pre = abs(pts[i] - pts[j])
            log_image = mpmath.log(image) if image else -mpmath.inf
            log_pre = mpmath.log(pre) if pre else -mpmath.inf
            rows.append((m, i, j, log_image, log_pre))
        if not rows:
            raise ValueError("pair selection is empty inside the radius")
        results = []
        for alpha, C in itertools.product(alpha_grid, C_grid):
            a = mpmath.mpf(alpha)
            lc = mpmath.log(mpmath.mpf(C))
            hit = HolderWitness(alpha, C, None, None, None)
            for m, i, j, li, lp in rows:
                rhs = lc + a * lp
                if li > rhs:
                    hit = HolderWitness(alpha, C, m, i, j, li, rhs)
                    break
            results.append(hit)
    return HolderScanReport(results)
