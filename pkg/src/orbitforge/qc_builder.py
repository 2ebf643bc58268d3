"""Piecewise quasiconformal realizer for sequences shrinking geometrically to 0.

On the annulus A_n = {|z_{n+1}| < |z| <= |z_n|} the map is

    f(z) = z_{n+2} exp(phi(log(z / z_{n+1}))),
    phi(x + iy) = (d'/d) x + i (y + alpha x / d),

with d = log|z_n/z_{n+1}|, d' = log|z_{n+1}/z_{n+2}| and
alpha = 2 arg z_{n+1} - arg z_n - arg z_{n+2}. Outside |z_0| it is the
similarity z -> z_1 z / z_0, and f(0) = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import mpmath

from .core import OrbitSequence
from .numeric import format_complex, format_real, parse_complex, principal_arg, rounding_slack, \
    working_precision
from .qr_checker import QRParams, check_necessary

ALPHA_MODES = ("principal", "reduced")


class HypothesisViolation(ValueError):
    """A construction precondition fails; ``witness`` names the offending index."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class BeyondPrefix(ValueError):
    """Evaluation point lies inside the innermost circle the prefix can handle."""


@dataclass(frozen=True)
class AnnulusMapParams:
    n: int
    d: mpmath.mpf
    d_prime: mpmath.mpf
    alpha: mpmath.mpf

    def __post_init__(self):
        if not (self.d > 0 and self.d_prime > 0):
            raise ValueError("annulus widths must be positive")

    @property
    def g_prime(self):
        return self.d_prime / self.d

    @property
    def theta_prime(self):
        return self.alpha / self.d

    def phi(self, w):
        """The real-linear map; commutes with translation by 2 pi i."""
        x, y = w.real, w.imag
        return mpmath.mpc(self.g_prime * x, y + self.theta_prime * x)

    def to_json(self, bits: int) -> dict:
        mu, K = dilatation(self)
        return {
            "n": self.n,
            "d": format_real(self.d, bits),
            "d_prime": format_real(self.d_prime, bits),
            "alpha": format_real(self.alpha, bits),
            "theta_prime": format_real(self.theta_prime, bits),
            "mu": format_real(mu, bits),
            "K": format_real(K, bits),
        }


def dilatation(params: AnnulusMapParams):
    """(|mu_phi|, K) for the linear phi; constant over the annulus."""
    g, t = params.g_prime, params.theta_prime
    mu = mpmath.sqrt(((g - 1) ** 2 + t ** 2) / ((g + 1) ** 2 + t ** 2))
    return mu, (1 + mu) / (1 - mu)


def uniform_bound(params: QRParams, D) -> tuple:
    """A priori bound B on d'/d + d/d' + 16 pi^2/(d d') and the |mu|, K it implies."""
    mu, nu = mpmath.mpf(params.mu), mpmath.mpf(params.nu)
    log_c = mpmath.log(mpmath.mpf(params.C))
    L = mpmath.log(1 / mpmath.mpf(D))
    B = 1 / mu + nu + (2 + 2 / mu) * log_c / L + 16 * mpmath.pi ** 2 / L ** 2
    # with S = g' + 1/g' + theta'^2/g' one has |mu|^2 = (S - 2)/(S + 2)
    mu_b = mpmath.sqrt((B - 2) / (B + 2))
    return B, mu_b, (1 + mu_b) / (1 - mu_b)


@dataclass
class DilatationReport:
    per_annulus: list  # (n, mu_abs, K)
    sup_mu: mpmath.mpf
    K_global: mpmath.mpf
    uniform_bound_inputs: Optional[tuple] = None  # (D, mu, nu, C)
    bound_B: Optional[mpmath.mpf] = None
    mu_bound: Optional[mpmath.mpf] = None
    K_bound: Optional[mpmath.mpf] = None
    bound_ok: Optional[bool] = None

    @property
    def quasiconformal(self) -> bool:
        return self.sup_mu < 1

    def to_json(self, bits: int) -> dict:
        out = {
            "per_annulus": [{"n": n, "mu": format_real(m, bits), "K": format_real(k, bits)}
                            for n, m, k in self.per_annulus],
            "sup_mu": format_real(self.sup_mu, bits),
            "K_global": format_real(self.K_global, bits),
        }
        if self.uniform_bound_inputs is not None:
            D, mu, nu, C = self.uniform_bound_inputs
            out["uniform_bound"] = {
                "D": format_real(D, bits), "mu": mu, "nu": nu, "C": C,
                "B": format_real(self.bound_B, bits),
                "mu_bound": format_real(self.mu_bound, bits),
                "K_bound": format_real(self.K_bound, bits),
                "holds": self.bound_ok,
            }
        return out


def _alpha(z0, z1, z2, mode: str):
    a = 2 * principal_arg(z1) - principal_arg(z0) - principal_arg(z2)
    if mode == "reduced":
        a = principal_arg(mpmath.expj(a))
    return a


def _annuli(seq: OrbitSequence, mode: str) -> tuple:
    pts = seq.points
    mods = [abs(z) for z in pts]
    out = []
    for n in range(len(pts) - 2):
        d = mpmath.log(mods[n] / mods[n + 1])
        dp = mpmath.log(mods[n + 1] / mods[n + 2])
        out.append(AnnulusMapParams(n, d, dp, _alpha(pts[n], pts[n + 1], pts[n + 2], mode)))
    return tuple(out)


@dataclass(frozen=True)
class PiecewiseQCMap:
    seq: OrbitSequence
    annuli: tuple
    outer_factor: mpmath.mpc
    dilatation_report: DilatationReport
    params: Optional[QRParams] = None
    D: Optional[mpmath.mpf] = None
    alpha_mode: str = "principal"
    hypotheses_checked: bool = True
    extend: Optional[Callable[[int], OrbitSequence]] = field(default=None, compare=False)

    @property
    def precision_bits(self) -> int:
        return self.seq.precision_bits

    @property
    def K_global(self):
        return self.dilatation_report.K_global

    @property
    def inner_radius(self):
        """Smallest modulus the prefix covers (the circle |z| = |z_{L-2}| included)."""
        with working_precision(self.precision_bits):
            return abs(self.seq.points[-2])

    def annulus_of(self, r) -> int:
        """Index n with |z_{n+1}| < r <= |z_n|; the last annulus also takes its inner circle."""
        pts = self.seq.points
        lo, hi = 0, len(self.annuli) - 1
        if r > abs(pts[0]):
            raise ValueError("outside |z_0|: handled by the outer similarity")
        inner = abs(pts[hi + 1])
        # a rotated copy of z_{L-2} may land an ulp inside the last circle
        if r < inner * (1 - rounding_slack(self.precision_bits)):
            raise BeyondPrefix(f"|z| below |z_{hi + 1}|, the last circle the prefix covers")
        # invariant: answer in [lo, hi]
        while lo < hi:
            mid = (lo + hi) // 2
            if r > abs(pts[mid + 1]):
                hi = mid
            else:
                lo = mid + 1
        return lo

    def formula(self, n: int, z):
        """Annulus-n expression evaluated at z, without checking membership."""
        pts = self.seq.points
        a = self.annuli[n]
        with working_precision(self.precision_bits):
            z = mpmath.mpc(z)
            ratio = abs(z) / abs(pts[n + 1])
            x = mpmath.log(ratio)
            y = principal_arg(z / pts[n + 1])
            # ratio ** g' instead of exp(g' x) keeps the conformal case exact
            return pts[n + 2] * ratio ** a.g_prime * mpmath.expj(y + a.theta_prime * x)

    def _extended(self) -> "PiecewiseQCMap":
        if self.extend is None:
            raise BeyondPrefix("point lies below the covered prefix and no extension rule is set")
        longer = self.extend(2 * len(self.seq))
        return build_qc_map(longer, self.params, self.D, alpha_mode=self.alpha_mode,
                            strict=self.hypotheses_checked, extend=self.extend)

    def __call__(self, z):
        return evaluate(self, z)


def evaluate(qc: PiecewiseQCMap, z):
    with working_precision(qc.precision_bits):
        z = parse_complex(z, qc.precision_bits)
        if z == 0:
            return mpmath.mpc(0)
        r = abs(z)
        if r > abs(qc.seq.points[0]):
            return qc.outer_factor * z
        try:
            n = qc.annulus_of(r)
        except BeyondPrefix:
            return evaluate(qc._extended(), z)
        return qc.formula(n, z)


def build_qc_map(seq: OrbitSequence, params: Optional[QRParams] = None, D=None, *,
                 alpha_mode: str = "principal", strict: bool = True,
                 extend: Optional[Callable[[int], OrbitSequence]] = None) -> PiecewiseQCMap:
    """Build the annulus-wise map for a prefix of strictly decreasing modulus.

    With ``strict`` the geometric-decay condition |z_{n+1}| <= D |z_n| and
    the two-sided ratio condition for ``params`` are enforced; without it the
    map is built anyway so its (possibly unbounded) distortion can be shown.
    When D is omitted the smallest admissible value max |z_{n+1}/z_n| is used.
    """
    if alpha_mode not in ALPHA_MODES:
        raise ValueError(f"alpha_mode must be one of {ALPHA_MODES}")
    if len(seq) < 3:
        raise ValueError("need at least 3 points to form one annulus")
    bits = seq.precision_bits
    with working_precision(bits):
        pts = seq.points
        mods = [abs(z) for z in pts]
        for k, m in enumerate(mods):
            if m == 0:
                raise HypothesisViolation(f"z_{k} = 0", k)
        for k in range(len(mods) - 1):
            if not mods[k + 1] < mods[k]:
                raise HypothesisViolation(f"moduli not strictly decreasing at index {k}", k)
        ratios = [mods[k + 1] / mods[k] for k in range(len(mods) - 1)]
        if D is None:
            D = max(ratios)
        else:
            D = mpmath.mpf(D)
            if not 0 < D < 1:
                raise ValueError("D must lie in (0, 1)")
            if strict:
                for k, q in enumerate(ratios):
                    if q > D:
                        raise HypothesisViolation(
                            f"|z_{k + 1}| > D |z_{k}| (ratio {mpmath.nstr(q, 8)})", k)
        if params is not None and strict:
            rep = check_necessary(seq, params, stop_at_first=True)
            if not rep.passed:
                w = rep.witnesses[0]
                raise HypothesisViolation(f"ratio condition fails at n={w.n} ({w.side} bound)", w.n)

        annuli = _annuli(seq, alpha_mode)
        per = []
        for a in annuli:
            mu, K = dilatation(a)
            per.append((a.n, mu, K))
        sup_mu = max(m for _, m, _ in per)
        report = DilatationReport(per, sup_mu, max(k for _, _, k in per))
        if params is not None and D < 1:
            B, mu_b, K_b = uniform_bound(params, D)
            slack = rounding_slack(bits)
            covered = [m for n, m, _ in per if n >= params.n0]
            report.uniform_bound_inputs = (D, params.mu, params.nu, params.C)
            report.bound_B, report.mu_bound, report.K_bound = B, mu_b, K_b
            report.bound_ok = all(m <= mu_b + slack for m in covered)
        return PiecewiseQCMap(seq, annuli, pts[1] / pts[0], report, params, D, alpha_mode,
                              strict, extend)


@dataclass
class AuditResult:
    name: str
    passed: bool
    max_error: mpmath.mpf
    witness: Optional[int] = None
    detail: str = ""

    def to_json(self) -> dict:
        return {"check": self.name, "passed": self.passed,
                "max_error": mpmath.nstr(self.max_error, 6), "witness": self.witness,
                "detail": self.detail}


def _default_tol(bits: int):
    return mpmath.ldexp(1, -(bits - 20))


def verify_orbit_realization(qc: PiecewiseQCMap, tol=None) -> AuditResult:
    """Relative residual |f(z_n) - z_{n+1}| / |z_{n+1}| over the whole prefix."""
    bits = qc.precision_bits
    pts = qc.seq.points
    with working_precision(bits):
        tol = _default_tol(bits) if tol is None else mpmath.mpf(tol)
        worst, first = mpmath.mpf(0), None
        for n in range(len(pts) - 1):
            err = abs(evaluate(qc, pts[n]) - pts[n + 1]) / abs(pts[n + 1])
            worst = max(worst, err)
            if first is None and err > tol:
                first = n
    return AuditResult("orbit-realization", first is None, worst, first,
                       f"{len(pts) - 1} points checked")


def _angles(count: int) -> list:
    return [2 * mpmath.pi * k / count - mpmath.pi + mpmath.pi / count for k in range(count)]


def verify_boundary_continuity(qc: PiecewiseQCMap, n: int, sample_count: int = 64,
                               tol=None) -> AuditResult:
    """Compare the A_n and A_{n+1} expressions on the shared circle |z| = |z_{n+1}|."""
    if not 0 <= n < len(qc.annuli):
        raise ValueError(f"annulus index must lie in [0, {len(qc.annuli)})")
    if n + 1 >= len(qc.annuli):
        if qc.extend is None:
            raise BeyondPrefix(f"annulus {n + 1} needs z_{n + 3}, beyond the prefix")
        qc = qc._extended()
    bits = qc.precision_bits
    pts = qc.seq.points
    with working_precision(bits):
        tol = _default_tol(bits) if tol is None else mpmath.mpf(tol)
        scale = abs(pts[n + 2])
        worst = mpmath.mpf(0)
        absolute = mpmath.mpf(0)
        for b in _angles(sample_count):
            z = pts[n + 1] * mpmath.expj(b)
            gap = abs(qc.formula(n, z) - qc.formula(n + 1, z))
            absolute = max(absolute, gap)
            worst = max(worst, gap / scale)
    return AuditResult("boundary-continuity", worst <= tol, worst, None if worst <= tol else n,
                       f"annulus {n}: max absolute gap {mpmath.nstr(absolute, 6)}")


def verify_circle_identity(qc: PiecewiseQCMap, sample_count: int = 16, tol=None) -> AuditResult:
    """f(z_n e^{ib}) = z_{n+1} e^{ib} for every stored z_n."""
    bits = qc.precision_bits
    pts = qc.seq.points
    with working_precision(bits):
        tol = _default_tol(bits) if tol is None else mpmath.mpf(tol)
        worst, first = mpmath.mpf(0), None
        for n in range(len(pts) - 1):
            for b in _angles(sample_count):
                rot = mpmath.expj(b)
                err = abs(evaluate(qc, pts[n] * rot) - pts[n + 1] * rot) / abs(pts[n + 1])
                worst = max(worst, err)
                if first is None and err > tol:
                    first = n
    return AuditResult("circle-identity", first is None, worst, first)


def periodicity_audit(params: AnnulusMapParams, samples: Optional[list] = None) -> bool:
    """phi(w + 2 pi i) - phi(w) = 2 pi i at the sampled w (up to the final rounding)."""
    two_pi = 2 * mpmath.pi
    if samples is None:
        samples = [mpmath.mpc(params.d * k / 4, mpmath.pi * (j - 2) / 3)
                   for k in range(5) for j in range(5)]
    slack = rounding_slack(mpmath.mp.prec)
    for w in samples:
        w = mpmath.mpc(w)
        diff = params.phi(w + mpmath.mpc(0, two_pi)) - params.phi(w)
        if diff.real != 0 or abs(diff.imag - two_pi) > slack * (1 + abs(w)):
            return False
    return True


def modulus_bounds(qc: PiecewiseQCMap, r, sample_count: int = 64) -> tuple:
    """(min, max) of |f| sampled on |z| = r."""
    bits = qc.precision_bits
    with working_precision(bits):
        r = mpmath.mpf(r)
        if not 0 < r <= abs(qc.seq.points[0]):
            raise ValueError("r must lie in (0, |z_0|]")
        if r < qc.inner_radius and qc.extend is None:
            raise BeyondPrefix("r below the covered prefix")
        vals = [abs(evaluate(qc, r * mpmath.expj(b))) for b in _angles(sample_count)]
        return min(vals), max(vals)


@dataclass
class QCAudit:
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_report(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "evidence": "; ".join(f"{r.name}: {'ok' if r.passed else 'FAILED'}"
                                  for r in self.results),
            "witness": [r.to_json() for r in self.results if not r.passed] or None,
            "checks": [r.to_json() for r in self.results],
        }


def audit(qc: PiecewiseQCMap, sample_count: int = 32, tol=None) -> QCAudit:
    """Run every verification the map supports on its own prefix."""
    results = [verify_orbit_realization(qc, tol), verify_circle_identity(qc, 8, tol)]
    worst_b, where = mpmath.mpf(0), None
    passed = True
    for n in range(len(qc.annuli) - 1):
        r = verify_boundary_continuity(qc, n, sample_count, tol)
        if r.max_error > worst_b:
            worst_b = r.max_error
        if not r.passed and where is None:
            where, passed = n, False
    results.append(AuditResult("boundary-continuity", passed, worst_b, where,
                               f"{max(len(qc.annuli) - 1, 0)} circle(s) checked"))
    bad = next((a.n for a in qc.annuli if not periodicity_audit(a)), None)
    results.append(AuditResult("periodicity", bad is None, mpmath.mpf(0), bad))
    rep = qc.dilatation_report
    results.append(AuditResult("quasiconformal", bool(rep.quasiconformal), rep.sup_mu,
                               detail=f"K_global {mpmath.nstr(rep.K_global, 12)}"))
    if rep.bound_ok is not None:
        results.append(AuditResult("uniform-bound", bool(rep.bound_ok), rep.sup_mu,
                                   detail=f"mu bound {mpmath.nstr(rep.mu_bound, 8)}"))
    return QCAudit(results)


def map_to_json(qc: PiecewiseQCMap) -> dict:
    bits = qc.precision_bits
    with working_precision(bits):
        out = {
            "sequence": qc.seq.to_json(),
            "alpha_mode": qc.alpha_mode,
            "strict": qc.hypotheses_checked,
            "D": format_real(qc.D, bits),
            "params": qc.params.to_json() if qc.params else None,
            "outer_factor": format_complex(qc.outer_factor, bits),
            "annuli": [a.to_json(bits) for a in qc.annuli],
            "K_global": format_real(qc.K_global, bits),
            "dilatation": qc.dilatation_report.to_json(bits),
        }
    return out


def map_from_json(obj: dict) -> PiecewiseQCMap:
    """Rebuild from a descriptor; annulus data are recomputed from the sequence."""
    if not isinstance(obj, dict) or "sequence" not in obj:
        raise ValueError("map descriptor lacks 'sequence'")
    seq = OrbitSequence.from_json(obj["sequence"])
    p = obj.get("params")
    params = QRParams(p["mu"], p["nu"], p["C"], p.get("n0", 0)) if p else None
    D = obj.get("D")
    with working_precision(seq.precision_bits):
        D = mpmath.mpf(D) if D is not None else None
        return build_qc_map(seq, params, D, alpha_mode=obj.get("alpha_mode", "principal"),
                            strict=obj.get("strict", True))


def dumps(qc: PiecewiseQCMap) -> str:
    return json.dumps(map_to_json(qc), indent=1, sort_keys=True)


@dataclass
class GrowthCheck:
    T: mpmath.mpf
    r: mpmath.mpf
    max_over_min: mpmath.mpf  # M(r) / m(Tr)
    min_over_max: mpmath.mpf  # m(r) / M(Tr)
    passed: bool

    def to_json(self) -> dict:
        return {"T": mpmath.nstr(self.T, 8), "r": mpmath.nstr(self.r, 8),
                "M(r)/m(Tr)": mpmath.nstr(self.max_over_min, 12),
                "m(r)/M(Tr)": mpmath.nstr(self.min_over_max, 12), "passed": self.passed}


def growth_check(qc: PiecewiseQCMap, params: QRParams, T, r, sample_count: int = 64) -> GrowthCheck:
    """Sampled two-sided growth bounds near 0 for a quasiregular f with f(0) = 0:

        T^-mu <= M(r)/m(Tr) <= C^2 T^-nu,   C^-2 T^-mu <= m(r)/M(Tr) <= T^-nu.
    """
    bits = qc.precision_bits
    with working_precision(bits):
        T, r = mpmath.mpf(T), mpmath.mpf(r)
        if not 0 < T <= 1:
            raise ValueError("T must lie in (0, 1]")
        m_r, M_r = modulus_bounds(qc, r, sample_count)
        m_t, M_t = modulus_bounds(qc, T * r, sample_count)
        mu, nu = mpmath.mpf(params.mu), mpmath.mpf(params.nu)
        c2 = mpmath.mpf(params.C) ** 2
        a, b = M_r / m_t, m_r / M_t
        s = 1 + mpmath.ldexp(1, -(bits - 24))
        ok = (T ** -mu <= a * s and a <= c2 * T ** -nu * s
              and T ** -mu / c2 <= b * s and b <= T ** -nu * s)
        return GrowthCheck(T, r, a, b, bool(ok))
