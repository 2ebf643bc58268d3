"""Generators for the worked example sequences."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import mpmath

from .core import OrbitSequence, Tail
from .numeric import (
    DEFAULT_PRECISION,
    PrecisionCapExceeded,
    parse_real,
    precision_cap,
    working_precision,
)

LOG2_E = 1 / math.log(2)


class GalleryId(str, Enum):
    Ex3_1 = "Ex3_1"
    Ex3_2 = "Ex3_2"
    Ex3_3 = "Ex3_3"
    Ex3_4 = "Ex3_4"
    QRClever = "QRClever"
    QRNew = "QRNew"
    AppendixCounter = "AppendixCounter"


@dataclass(frozen=True)
class GeneratorParams:
    count: int = 10
    precision_bits: int = DEFAULT_PRECISION
    b: int = 10                 # Ex3_2: eps_n = 2^(-b^(n+1))
    a: str = "1.5"              # Ex3_3: z_n = 2^(-a^n), 1 < a < 2
    delta_log2: int = -20       # Ex3_4: certified closeness to pure squaring
    perturb: bool = True        # Ex3_4: False means N_m = infinity for all m
    eps: str = "1e-3"           # QRClever
    s: str = "1e-2"             # QRClever
    z0: Optional[str] = None    # QRClever, defaults to s/2
    cap: Optional[int] = None   # precision ceiling, defaults to precision_cap()

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("count must be >= 2")
        if self.b < 2:
            raise ValueError("b must be >= 2")


def _tail() -> Tail:
    return Tail("tends-to-zero")


def _check_cap(bits: int, params: GeneratorParams) -> None:
    cap = params.cap if params.cap is not None else precision_cap()
    if bits > cap:
        raise PrecisionCapExceeded(
            f"{bits} bits needed, cap is {cap} (set ORBITFORGE_PRECISION_CAP to raise it)")


def _ex3_1(p: GeneratorParams) -> list:
    pts = [mpmath.mpf(1), mpmath.mpf(1) / 2]
    while len(pts) < p.count:
        pts.append(pts[-1] ** 2)
    return pts[:p.count]


def ex3_2_required_bits(count: int, b: int = 10) -> int:
    # last term 2^(-2^(n)) + 2^(-b^(n+2)) with n = count - 1
    return b ** (count + 1) + 64


def _ex3_2(p: GeneratorParams) -> list:
    two = mpmath.mpf(2)
    return [two ** -(2 ** n) + two ** -(p.b ** (n + 2)) for n in range(p.count)]


def _ex3_3(p: GeneratorParams) -> list:
    a = mpmath.mpf(p.a)
    if not 1 < a < 2:
        raise ValueError("Ex3_3 needs 1 < a < 2")
    return [mpmath.mpf(2) ** -(a ** n) for n in range(p.count)]


@dataclass
class SigmaSchedule:
    """N_m for the perturbed squaring orbit and the certificate it achieved."""

    N: dict = field(default_factory=dict)
    delta: mpmath.mpf = mpmath.mpf(0)
    certified_bound: mpmath.mpf = mpmath.mpf(0)
    ledger: list = field(default_factory=list)  # (m, N_m, 2^(m^2))

    def active(self, n: int) -> list:
        return sorted(m for m, Nm in self.N.items() if Nm <= n)


def _ex3_4(p: GeneratorParams) -> tuple[list, SigmaSchedule]:
    delta = mpmath.ldexp(1, p.delta_log2)
    sched = SigmaSchedule(delta=delta)
    z = mpmath.mpf(1) / 2
    pts = [z]
    worst = mpmath.mpf(0)
    for n in range(p.count - 1):
        if p.perturb:
            m = 3 + len(sched.N)
            last = max(sched.N.values(), default=-1)
            # each active term gets budget delta * 2^-(m-2), so the sum stays below delta
            if n > last and (mpmath.ldexp(1, m * m) * abs(z) ** (m - 2)
                             <= delta * mpmath.ldexp(1, -(m - 2))):
                sched.N[m] = n
                sched.ledger.append((m, n, 2 ** (m * m)))
        pert = mpmath.fsum(mpmath.ldexp(1, m * m) * z ** m for m in sched.active(n))
        rel = abs(pert) / (z * z)
        if rel >= delta:
            raise ValueError(f"perturbation at step {n} not certified below delta")
        worst = max(worst, rel)
        z = z * z + pert
        pts.append(z)
    sched.certified_bound = worst
    return pts, sched


def ex3_4_sigma_schedule(params: GeneratorParams = GeneratorParams()) -> SigmaSchedule:
    """Choose N_m constructively so every step stays within delta of z -> z^2."""
    with working_precision(params.precision_bits):
        _, sched = _ex3_4(params)
    return sched


def qrclever_apply(z, eps, s):
    """The quasiconformal map P (argument taken in [0, 2*pi))."""
    eps = mpmath.mpf(eps)
    s = mpmath.mpf(s)
    if not eps > 0 or not 0 < s < 1:
        raise ValueError("need eps > 0 and 0 < s < 1")
    z = mpmath.mpc(z)
    if z == 0:
        warnings.warn("P(0): argument undefined, returning 0 by continuity", RuntimeWarning,
                      stacklevel=2)
        return mpmath.mpc(0)
    r = abs(z)
    y = mpmath.arg(z)
    if y < 0:
        y += 2 * mpmath.pi
    if y <= mpmath.pi / 2:
        t = 2 * y + eps
    else:
        t = 2 * (y + mpmath.pi) / 3 + eps
    mod = r * (1 - r) if r <= s else r * (1 - s)
    return mod * mpmath.expj(t)


def qrclever_dilatation_estimate(eps="1e-3", s="1e-2", radii: int = 8, angles: int = 24,
                                 bits: int = 128) -> float:
    """Largest sampled |f_zbar / f_z| of P, by central differences.

    A diagnostic only: samples avoid the seams arg z = 0 and arg z = pi/2 and
    say nothing rigorous about the global dilatation.
    """
    with working_precision(bits):
        s_ = mpmath.mpf(s)
        step = mpmath.ldexp(1, -(bits // 3))
        worst = mpmath.mpf(0)
        for i in range(radii):
            r = 2 * s_ * mpmath.mpf(i + 1) / (radii + 1)
            for j in range(angles):
                y = 2 * mpmath.pi * (j + mpmath.mpf(1) / 2) / angles
                z = r * mpmath.expj(y)
                fx = (qrclever_apply(z + step, eps, s) - qrclever_apply(z - step, eps, s)) / (2 * step)
                fy = (qrclever_apply(z + 1j * step, eps, s)
                      - qrclever_apply(z - 1j * step, eps, s)) / (2 * step)
                fz, fzb = (fx - 1j * fy) / 2, (fx + 1j * fy) / 2
                worst = max(worst, abs(fzb) / abs(fz))
        return float(worst)


def _qrclever(p: GeneratorParams) -> list:
    eps, s = mpmath.mpf(p.eps), mpmath.mpf(p.s)
    z = mpmath.mpc(mpmath.mpf(p.z0) if p.z0 is not None else s / 2)
    if not 0 < z.real < s or z.imag != 0:
        raise ValueError("QRClever needs z0 in (0, s)")
    pts = [z]
    for _ in range(p.count - 1):
        z = qrclever_apply(z, eps, s)
        pts.append(z)
    return pts


def qrnew_required_bits(count: int) -> int:
    m = (count - 1) // 3 + 2
    return int(math.ceil((m * m - m) * LOG2_E)) + 64


def _qrnew(p: GeneratorParams) -> list:
    pts = []
    for k in range(p.count):
        m, r = divmod(k, 3)
        e1 = mpmath.exp(-(m + 2))
        if r == 0:
            pts.append(e1)
        elif r == 1:
            pts.append(e1 - mpmath.exp(-(m + 2) ** 2))
        else:
            pts.append(-e1 / 2)
    return pts


def _counter(p: GeneratorParams) -> list:
    x = mpmath.mpf(1) / 2
    pts = [x]
    for n in range(1, p.count):
        x = x / 2 if n % 2 == 0 else x * x
        pts.append(x)
    return pts


def required_bits(gid: GalleryId, params: GeneratorParams) -> int:
    gid = GalleryId(gid)
    bits = params.precision_bits
    if gid is GalleryId.Ex3_2:
        bits = max(bits, ex3_2_required_bits(params.count, params.b))
    elif gid is GalleryId.QRNew:
        bits = max(bits, qrnew_required_bits(params.count))
    return bits


def generate(gid: GalleryId | str, params: GeneratorParams = GeneratorParams()) -> OrbitSequence:
    """Exact prefix of the named example at (possibly escalated) precision."""
    gid = GalleryId(gid)
    bits = required_bits(gid, params)
    _check_cap(bits, params)
    builders = {
        GalleryId.Ex3_1: _ex3_1,
        GalleryId.Ex3_2: _ex3_2,
        GalleryId.Ex3_3: _ex3_3,
        GalleryId.Ex3_4: lambda q: _ex3_4(q)[0],
        GalleryId.QRClever: _qrclever,
        GalleryId.QRNew: _qrnew,
        GalleryId.AppendixCounter: _counter,
    }
    with working_precision(bits):
        pts = builders[gid](replace(params, precision_bits=bits))
        return OrbitSequence(tuple(mpmath.mpc(z) for z in pts), bits, _tail())


def resampler(gid: GalleryId | str, params: GeneratorParams = GeneratorParams()):
    """Callable bits -> sequence regenerated at that precision."""
    return lambda bits: generate(gid, replace(params, precision_bits=bits))


def parse_params(gid: GalleryId | str, **kwargs) -> GeneratorParams:
    clean = {k: v for k, v in kwargs.items() if v is not None}
    if "a" in clean:
        parse_real(clean["a"], 64)
    return GeneratorParams(**clean)
