"""Recover the Taylor germ forced by interpolation data accumulating at a point.

Given pairs (zeta_n, w_n) with zeta_n -> zeta and w_n -> w, an analytic f with
f(zeta_n) = w_n must have order

    p = lim log|w_n - w| / log|zeta_n - zeta|

and coefficients obtained one at a time as limits of

    ((w_n - w) - sum_{j<k} a_{p+j} h_n^{p+j}) / h_n^{p+k},   h_n = zeta_n - zeta.

Each limit is read off the tail of the data by extrapolation to h = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath

from .core import OrbitSequence
from .numeric import DEFAULT_PRECISION, parse_complex, working_precision

MIN_PAIRS = 4
MIN_USABLE = 3


class ProbeError(ValueError):
    """Base class for data on which the germ cannot be recovered."""


class IdenticallyW(ProbeError):
    """w_n = w on the whole tail: the germ is constant there."""


class NoIntegerOrder(ProbeError):
    """The order limit exists but is not an integer, or does not settle."""

    def __init__(self, message: str, order: "OrderEstimate"):
        super().__init__(message)
        self.order = order


@dataclass(frozen=True)
class AccumulationData:
    """Interpolation pairs, sorted so that |zeta_n - zeta| is non-increasing."""

    zeta_n: tuple
    w_n: tuple
    zeta: mpmath.mpc
    w: mpmath.mpc
    precision_bits: int = DEFAULT_PRECISION
    # rebuilds the same data at a higher precision (used for escalation)
    resample: Optional[Callable[[int], "AccumulationData"]] = field(
        default=None, compare=False, repr=False)

    def __post_init__(self):
        bits = self.precision_bits
        zs = [parse_complex(z, bits) for z in self.zeta_n]
        ws = [parse_complex(v, bits) for v in self.w_n]
        zeta = parse_complex(self.zeta, bits)
        w = parse_complex(self.w, bits)
        if len(zs) != len(ws):
            raise ValueError("zeta_n and w_n must have equal length")
        if len(zs) < MIN_PAIRS:
            raise ValueError(f"need at least {MIN_PAIRS} pairs")
        with working_precision(bits):
            if any(z == zeta for z in zs):
                raise ValueError("zeta_n must differ from zeta")
            order = sorted(range(len(zs)), key=lambda i: -abs(zs[i] - zeta))
        object.__setattr__(self, "zeta_n", tuple(zs[i] for i in order))
        object.__setattr__(self, "w_n", tuple(ws[i] for i in order))
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return len(self.zeta_n)

    @classmethod
    def from_orbit(cls, seq: OrbitSequence, zeta=0, w=None,
                   resample: Optional[Callable[[int], OrbitSequence]] = None,
                   ) -> "AccumulationData":
        """Pairs (z_n, z_{n+1}) of an orbit accumulating at ``zeta``.

        ``w`` defaults to ``zeta``: a single accumulation point is fixed by any
        continuous realizer.
        """
        bits = seq.precision_bits
        zeta = parse_complex(zeta, bits)
        w = zeta if w is None else parse_complex(w, bits)
        pts = seq.points
        pairs = [(pts[k], pts[k + 1]) for k in range(len(pts) - 1) if pts[k] != zeta]
        rs = None
        if resample is not None:
            rs = lambda b: cls.from_orbit(resample(b), zeta, w, resample)  # noqa: E731
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), zeta, w,
                   bits, rs)


@dataclass(frozen=True)
class ProbeConfig:
    K: int = 8
    window: int = 6
    conv_tol: float = 1e-6
    precision_bits: Optional[int] = None
    max_precision: int = 4096

    def __post_init__(self):
        if self.window < 3:
            raise ValueError("window must be >= 3")
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if not self.conv_tol > 0:
            raise ValueError("conv_tol must be positive")


@dataclass
class OrderEstimate:
    p_real: float
    p: Optional[int]
    integrality_residual: float
    flag: str  # ok | non-integer | no-limit | identically-w
    ratios: list = field(default_factory=list)
    fit_residual: float = 0.0


@dataclass
class TaylorEstimate:
    p: int
    coeffs: list
    statuses: list
    per_coeff_convergence: list
    integrality_residual: float
    zeta: mpmath.mpc = mpmath.mpc(0)
    w: mpmath.mpc = mpmath.mpc(0)
    p_real: float = 0.0
    radius_estimate: Optional[mpmath.mpf] = None
    radius_flag: Optional[str] = None
    stop_reason: Optional[str] = None
    precision_bits: int = DEFAULT_PRECISION

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("order p must be a positive integer")
        if self.coeffs and self.coeffs[0] == 0:
            raise ValueError("leading coefficient a_p must be nonzero")

    @property
    def trusted(self) -> int:
        return len(self.coeffs)

    def coefficient(self, m: int):
        """a_m (zero below the order)."""
        k = m - self.p
        if k < 0:
            return mpmath.mpc(0)
        return self.coeffs[k]

    def __call__(self, z):
        with working_precision(self.precision_bits):
            h = mpmath.mpc(z) - self.zeta
            acc = mpmath.mpc(0)
            for a in reversed(self.coeffs):
                acc = acc * h + a
            return self.w + acc * h ** self.p


def _neville_at_zero(xs: Sequence, ys: Sequence):
    """Value at 0 of the interpolating polynomial through (xs, ys)."""
    p = list(ys)
    n = len(xs)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i])
    return p[0]


def _stable_limit(xs: Sequence, ys: Sequence):
    """Extrapolated value at 0 together with its stability diagnostic.

    A value counts as stable if neither dropping the farthest nor the nearest
    pair moves it. Every trailing subwindow of at least MIN_USABLE pairs is
    tried and the most stable one wins: polynomial-like data favour the full
    window, while data whose far pairs are polluted by much faster decaying
    terms favour the nearest pairs.
    """
    best = None
    for start in range(len(xs) - MIN_USABLE + 1):
        sx, sy = xs[start:], ys[start:]
        if all(y == sy[0] for y in sy):
            cand = (sy[0], mpmath.mpf(0))
        else:
            limit = _neville_at_zero(sx, sy)
            cand = (limit, max(abs(limit - _neville_at_zero(sx[1:], sy[1:])),
                               abs(limit - _neville_at_zero(sx[:-1], sy[:-1]))))
        if best is None or cand[1] < best[1]:
            best = cand
    return best


def _line_intercept(ts: Sequence, rs: Sequence):
    n = len(ts)
    tm = mpmath.fsum(ts) / n
    rm = mpmath.fsum(rs) / n
    sxx = mpmath.fsum((t - tm) ** 2 for t in ts)
    if sxx == 0:
        return rm, mpmath.mpf(0)
    slope = mpmath.fsum((t - tm) * (r - rm) for t, r in zip(ts, rs)) / sxx
    return rm - slope * tm, slope


def estimate_order(data: AccumulationData, cfg: ProbeConfig = ProbeConfig()) -> OrderEstimate:
    """Extrapolate log|w_n - w| / log|zeta_n - zeta| to the accumulation point.

    The ratio behaves like p + log|a_p| / log|h_n| + O(h_n), so a least-squares
    line in t = 1 / log|h_n| over the tail window is fitted and read at t = 0.
    One Richardson step then combines the window with the window shifted one
    pair earlier, assuming the leftover error shrinks like |h_n|.
    """
    bits = max(cfg.precision_bits or 0, data.precision_bits)
    with working_precision(bits):
        hs, ds = [], []
        for z, v in zip(data.zeta_n, data.w_n):
            h = abs(z - data.zeta)
            dw = abs(v - data.w)
            hs.append(h)
            ds.append(dw)
        tail = list(range(len(hs)))[-cfg.window:]
        if all(ds[i] == 0 for i in tail):
            return OrderEstimate(math.inf, None, math.inf, "identically-w")
        usable = [i for i in range(len(hs)) if ds[i] != 0 and hs[i] != 1]
        if len(usable) < 2:
            return OrderEstimate(math.nan, None, math.nan, "no-limit")

        def fit(idx):
            ts = [1 / mpmath.log(hs[i]) for i in idx]
            rs = [mpmath.log(ds[i]) / mpmath.log(hs[i]) for i in idx]
            p0, slope = _line_intercept(ts, rs)
            resid = max(abs(r - (p0 + slope * t)) for t, r in zip(ts, rs))
            return p0, resid, rs

        win = usable[-cfg.window:]
        p0, resid, ratios = fit(win)
        p_real = p0
        if len(usable) > len(win) or len(win) >= 4:
            prev = usable[-cfg.window - 1:-1] if len(usable) > len(win) else win[:-1]
            p1, _, _ = fit(prev)
            q = hs[win[-1]] / hs[prev[-1]]
            if q < 0.9:
                p_real = (p0 - q * p1) / (1 - q)
        nearest = mpmath.nint(p_real)
        residual = abs(p_real - nearest)
        if resid > cfg.conv_tol * max(1, abs(p_real)):
            flag = "no-limit"
            p = None
        elif residual < cfg.conv_tol and nearest >= 1:
            flag = "ok"
            p = int(nearest)
        else:
            flag = "non-integer"
            p = None
        return OrderEstimate(float(p_real), p, float(residual), flag,
                             [float(r) for r in ratios], float(resid))


def _estimate_at(data: AccumulationData, cfg: ProbeConfig, bits: int) -> TaylorEstimate:
    order = estimate_order(data, cfg)
    if order.flag == "identically-w":
        raise IdenticallyW("w_n = w on the whole tail; the germ is constant")
    if order.p is None:
        raise NoIntegerOrder(
            f"order limit {order.p_real:.6g} ({order.flag}); no analytic germ", order)
    p = order.p
    with working_precision(bits):
        hs = [z - data.zeta for z in data.zeta_n]
        dws = [v - data.w for v in data.w_n]
        floor_scale = mpmath.ldexp(1, -bits + 32)
        floors = [floor_scale * abs(d) for d in dws]
        residuals = list(dws)
        coeffs: list = []
        statuses: list = []
        convergence: list = []
        stop = None
        conv_tol = mpmath.mpf(cfg.conv_tol)
        for k in range(cfg.K + 1):
            # each fitted coefficient uses up one pair; keep MIN_USABLE spare
            if len(hs) < k + MIN_USABLE:
                stop = "data-limited"
                break
            tail = list(range(len(hs)))[-cfg.window:]
            if all(abs(residuals[i]) < floors[i] or residuals[i] == 0 for i in tail):
                if k == 0:
                    raise IdenticallyW("data exhausted before the leading coefficient")
                # a true zero leaves (almost) every pair at rounding level; signal
                # surviving at larger |h| means the tail merely lost resolution
                loud = sum(1 for i in range(len(hs))
                           if abs(residuals[i]) >= floors[i] and residuals[i] != 0)
                if loud >= MIN_USABLE:
                    stop = "precision-limited"
                    break
                coeffs.append(mpmath.mpc(0))
                statuses.append("zero")
                convergence.append([])
                continue
            win = [i for i in tail if abs(residuals[i]) >= floors[i] and residuals[i] != 0]
            if len(win) < MIN_USABLE:
                stop = "precision-limited"
                break
            xs = [hs[i] for i in win]
            ys = [residuals[i] / hs[i] ** (p + k) for i in win]
            limit, diag = _stable_limit(xs, ys)
            convergence.append([float(abs(y - limit)) for y in ys])
            if diag > conv_tol * abs(limit) or (k == 0 and limit == 0):
                stop = "no-limit"
                convergence.pop()
                break
            coeffs.append(limit)
            statuses.append("ok")
            residuals = [r - limit * h ** (p + k) for r, h in zip(residuals, hs)]
    est = TaylorEstimate(
        p=p, coeffs=coeffs, statuses=statuses, per_coeff_convergence=convergence,
        integrality_residual=order.integrality_residual, zeta=data.zeta, w=data.w,
        p_real=order.p_real, stop_reason=stop, precision_bits=bits,
    )
    if est.trusted >= 3:
        r = radius_probe(est)
        est.radius_estimate, est.radius_flag = r.value, r.flag
    return est


def estimate_coefficients(data: AccumulationData,
                          cfg: ProbeConfig = ProbeConfig()) -> TaylorEstimate:
    """Iterated limits a_p, a_{p+1}, ..., a_{p+K}.

    Stops at the first limit that does not settle ("no-limit") or when too
    few pairs keep significant digits after the subtraction
    ("precision-limited"). In the latter case, data carrying a ``resample``
    hook are rebuilt at doubled precision up to ``cfg.max_precision``.
    """
    bits = max(cfg.precision_bits or 0, data.precision_bits)
    while True:
        est = _estimate_at(data, cfg, bits)
        if (est.stop_reason != "precision-limited" or data.resample is None
                or bits * 2 > cfg.max_precision):
            return est
        bits *= 2
        data = data.resample(bits)


@dataclass(frozen=True)
class RadiusEstimate:
    value: mpmath.mpf
    flag: str  # infinite | zero | finite
    roots: tuple


def radius_probe(est: TaylorEstimate) -> RadiusEstimate:
    """Root-test radius 1 / limsup |a_k|^{1/k} over the trusted coefficients."""
    if est.trusted < 3:
        raise ValueError("radius probe needs at least 3 trusted coefficients")
    with working_precision(est.precision_bits):
        if est.statuses and est.statuses[-1] == "zero":
            return RadiusEstimate(mpmath.inf, "infinite", ())
        roots = [(est.p + j, abs(a) ** (mpmath.mpf(1) / (est.p + j)))
                 for j, a in enumerate(est.coeffs) if a != 0]
        s = [r for _, r in roots]
        if len(s) >= 3:
            d1, d2 = s[-2] - s[-3], s[-1] - s[-2]
            if d1 > 0 and d2 > d1:
                return RadiusEstimate(mpmath.mpf(0), "zero", tuple(s))
        half = s[-max(1, math.ceil(len(s) / 2)):]
        top = max(half)
        if top == 0:
            return RadiusEstimate(mpmath.inf, "infinite", tuple(s))
        return RadiusEstimate(1 / top, "finite", tuple(s))


@dataclass
class GermReport:
    mismatches: list
    checked: list
    skipped: list
    residuals: dict
    notes: list

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_report(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "evidence": (f"{len(self.checked)} step(s) checked, "
                         f"{len(self.mismatches)} mismatch(es)"),
            "witness": self.mismatches,
        }


def germ_consistency_check(seq: OrbitSequence, est: TaylorEstimate, accum_point=None,
                           tol: Optional[float] = None) -> GermReport:
    """Evaluate the truncated germ at each z_n and compare with z_{n+1}.

    ``tol`` is relative to |z_{n+1} - w|; by default it sits just above the
    rounding level of the sequence precision, so any genuine disagreement of
    the data with the germ is reported.
    """
    bits = max(seq.precision_bits, est.precision_bits)
    with working_precision(bits):
        zeta = est.zeta if accum_point is None else parse_complex(accum_point, bits)
        rel = mpmath.ldexp(1, -(seq.precision_bits - 32)) if tol is None else mpmath.mpf(tol)
        radius = est.radius_estimate
        notes = []
        if radius is None:
            notes.append("radius not estimated; every point evaluated")
        mismatches, checked, skipped = [], [], []
        residuals = {}
        pts = seq.points
        for n in range(len(pts) - 1):
            dist = abs(pts[n] - zeta)
            if radius is not None and not dist < radius:
                skipped.append(n)
                continue
            diff = abs(est(pts[n]) - pts[n + 1])
            scale = abs(pts[n + 1] - est.w)
            ok = diff <= rel * scale if scale != 0 else diff == 0
            residuals[n] = diff / scale if scale != 0 else diff
            checked.append(n)
            if not ok:
                mismatches.append(n)
        if skipped:
            notes.append(f"{len(skipped)} point(s) outside the estimated radius skipped")
    return GermReport(mismatches, checked, skipped, residuals, notes)


def estimate_accumulation(seq: OrbitSequence, window: int = 6, conv_tol: float = 1e-6):
    """Mean of the last ``window`` points as a guess for the accumulation point.

    Returns ``(zeta, converged)`` where ``converged`` says the window spread is
    below ``conv_tol * (1 + |zeta|)``.
    """
    with working_precision(seq.precision_bits):
        tail = seq.points[-window:]
        zeta = mpmath.fsum(tail) / len(tail)
        spread = max(abs(z - zeta) for z in tail)
        return zeta, bool(spread <= conv_tol * (1 + abs(zeta)))
