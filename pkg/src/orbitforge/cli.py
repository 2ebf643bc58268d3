"""Command-line front end.

Every verb reads one JSON document (``--input``, default stdin) and writes one
JSON report (``--output``, default stdout). Exit status: 0 for pass/info,
1 for a fail verdict or an exceeded precision cap, 2 for usage or input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from typing import Optional

import mpmath

from . import __version__
from . import gallery as gal
from . import plotting
from . import qc_builder as qcb
from . import qr_checker as qr
from .core import (
    InconsistentSequence,
    OrbitSequence,
    ToleranceConfig,
    check_candidate_consistency,
    classify_orbit,
    polynomial_degree_hint,
)
from .numeric import (
    MIN_PRECISION,
    PrecisionCapExceeded,
    format_complex,
    format_real,
    parse_complex,
    precision_cap,
    working_precision,
)
from .poly_realizer import (
    BaseFunction,
    PeriodicOrbitSpec,
    RealizationPolynomial,
    build_periodic_realizer,
    verify_realization,
)
from .taylor_probe import (
    AccumulationData,
    ProbeConfig,
    ProbeError,
    estimate_coefficients,
    estimate_order,
    germ_consistency_check,
)

FAST_BITS = MIN_PRECISION


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit status 2."""


class CapError(Exception):
    """Precision cap exceeded; maps to exit status 1."""


# ---------------------------------------------------------------- input

@dataclasses.dataclass
class Loaded:
    raw: bytes
    doc: object

    @property
    def digest(self) -> str:
        return "sha256:" + hashlib.sha256(self.raw).hexdigest()


def _read(path: str) -> Loaded:
    try:
        if path == "-":
            raw = sys.stdin.buffer.read()
        else:
            with open(path, "rb") as fh:
                raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise UsageError(f"input is not UTF-8 (byte {exc.start})") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON at line {exc.lineno}, column {exc.colno} "
                         f"(char {exc.pos}): {exc.msg}") from None
    return Loaded(raw, doc)


def _bits(args) -> Optional[int]:
    if args.fast:
        return FAST_BITS
    if args.precision_bits is not None:
        if args.precision_bits < MIN_PRECISION:
            raise UsageError(f"--precision-bits must be >= {MIN_PRECISION}")
        if args.precision_bits > precision_cap():
            raise CapError(f"--precision-bits {args.precision_bits} exceeds the cap "
                           f"{precision_cap()} (set ORBITFORGE_PRECISION_CAP)")
    return args.precision_bits


def _unwrap(doc):
    """Accept a bare sequence, a map descriptor, or a report wrapping either."""
    if isinstance(doc, dict) and isinstance(doc.get("body"), dict):
        body = doc["body"]
        if "sequence" in body or "points" in body:
            return body
    return doc


def _sequence(doc, args) -> OrbitSequence:
    doc = _unwrap(doc)
    if isinstance(doc, list):
        doc = {"points": doc}
    if isinstance(doc, dict) and "sequence" in doc and "points" not in doc:
        doc = doc["sequence"]
    if isinstance(doc, dict):
        declared = doc.get("precision_bits")
        if isinstance(declared, int) and declared > precision_cap():
            raise CapError(f"input declares {declared} bits, above the cap {precision_cap()}")
    try:
        return OrbitSequence.from_json(doc, _bits(args))
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid sequence: {exc}") from None


def _generator(doc):
    """(id, params) recorded by the gallery verb, if present."""
    doc = _unwrap(doc)
    if isinstance(doc, dict) and "sequence" in doc and "generator" not in doc:
        doc = doc["sequence"]
    gen = doc.get("generator") if isinstance(doc, dict) else None
    if not isinstance(gen, dict):
        return None
    try:
        return gal.GalleryId(gen["id"]), gal.GeneratorParams(**gen.get("params", {}))
    except (KeyError, TypeError, ValueError):
        return None


def _params_from_args(args, seq: OrbitSequence) -> Optional[qr.QRParams]:
    given = [args.mu, args.nu, args.C]
    if all(v is None for v in given):
        return None
    if any(v is None for v in given):
        raise UsageError("--mu, --nu and --C must be given together")
    try:
        return qr.QRParams(args.mu, args.nu, args.C, args.n0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _float_list(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _tol(args, default: ToleranceConfig = ToleranceConfig()) -> ToleranceConfig:
    eq = args.eq_tol if getattr(args, "eq_tol", None) is not None else default.eq_tol
    rel = args.tol if args.tol is not None else default.rel_tol
    esc = getattr(args, "escape_radius", None) or default.escape_radius
    try:
        return ToleranceConfig(eq, rel, esc)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _report(verdict: str, digest: str, evidence: str, witness=None, body=None) -> dict:
    return {
        "verdict": verdict,
        "tool_version": __version__,
        "inputs_digest": digest,
        "evidence": evidence,
        "witness": witness,
        "body": body if body is not None else {},
    }


# ---------------------------------------------------------------- verbs

def cmd_validate(args):
    src = _read(args.input)
    seq = _sequence(src.doc, args)
    rep = check_candidate_consistency(seq, _tol(args))
    r = rep.to_report()
    return _report(r["verdict"], src.digest, r["evidence"], r["witness"],
                   {"length": len(seq), "near_coincidences": r["near_coincidences"]})


def cmd_classify(args):
    src = _read(args.input)
    seq = _sequence(src.doc, args)
    try:
        cls = classify_orbit(seq, _tol(args))
    except InconsistentSequence as exc:
        w = check_candidate_consistency(seq, _tol(args)).witness
        return _report("fail", src.digest, f"not a candidate orbit: {exc}", list(w))
    body = {"class": cls.tag, "exact": cls.exact}
    try:
        hint = polynomial_degree_hint(seq)
        body["degree_hint"] = {"degree": hint.degree, "mean": round(hint.mean, 12),
                               "stddev": round(hint.stddev, 12)}
    except ValueError as exc:
        body["degree_hint"] = {"degree": None, "note": str(exc)}
    return _report("info", src.digest, cls.evidence, None, body)


def _base(args, bits: int) -> BaseFunction:
    if args.base == "zero":
        return BaseFunction.zero()
    if args.base == "z":
        return BaseFunction.polynomial([0, 1])
    if args.base == "z2":
        return BaseFunction.polynomial([0, 0, 1])
    c = parse_complex(args.c, bits) if args.c else mpmath.mpc(1)
    if args.base == "exp":
        return BaseFunction.exponential(c)
    if not args.coeffs:
        raise UsageError("--base poly needs --coeffs")
    return BaseFunction.polynomial([parse_complex(x, bits) for x in args.coeffs.split(";")])


def cmd_realize_poly(args):
    src = _read(args.input)
    seq = _sequence(src.doc, args)
    tol = _tol(args)
    try:
        spec = PeriodicOrbitSpec.from_sequence(seq, tol)
    except ValueError as exc:
        return _report("fail", src.digest, str(exc))
    bits = seq.precision_bits
    f = build_periodic_realizer(spec, _base(args, bits))
    ver = verify_realization(f, seq, tol)
    body = {"n": spec.n, "n_prime": spec.n_prime,
            "max_residual": mpmath.nstr(ver.max_residual, 6)}
    if isinstance(f, RealizationPolynomial):
        body["degree"] = f.degree
        body["coefficients"] = [format_complex(a, bits) for a in f.coefficients]
    else:
        body["form"] = "closed-form evaluator with F(z) = c exp(z)"
    r = ver.to_report()
    return _report(r["verdict"], src.digest, r["evidence"], r["witness"], body)


def cmd_probe_taylor(args):
    src = _read(args.input)
    seq = _sequence(src.doc, args)
    gen = _generator(src.doc)
    resample = None
    if gen is not None and not args.fast:
        gid, params = gen
        resample = gal.resampler(gid, dataclasses.replace(params, count=len(seq)))
    try:
        cfg = ProbeConfig(K=args.K, window=args.window,
                          conv_tol=args.tol if args.tol is not None else 1e-6,
                          max_precision=min(args.max_precision, precision_cap()))
        data = AccumulationData.from_orbit(seq, args.zeta, args.w, resample)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    order = estimate_order(data, cfg)
    body = {"order": {"p_real": round(order.p_real, 12), "p": order.p,
                      "integrality_residual": round(order.integrality_residual, 12),
                      "flag": order.flag}}
    if order.flag != "ok":
        return _report("info", src.digest, f"order flag {order.flag}", None, body)
    try:
        est = estimate_coefficients(data, cfg)
    except ProbeError as exc:
        return _report("info", src.digest, str(exc), None, body)
    bits = est.precision_bits
    body["coefficients"] = [format_complex(a, bits) for a in est.coeffs]
    body["statuses"] = est.statuses
    body["stop_reason"] = est.stop_reason
    body["precision_bits"] = bits
    body["radius"] = {"flag": est.radius_flag,
                      "value": None if est.radius_estimate is None
                      else mpmath.nstr(est.radius_estimate, 8)}
    germ = germ_consistency_check(seq, est)
    body["germ_check"] = {"mismatches": germ.mismatches, "checked": germ.checked,
                          "skipped": germ.skipped, "notes": germ.notes}
    return _report("info", src.digest,
                   f"order {est.p}, {est.trusted} coefficient(s), "
                   f"{len(germ.mismatches)} germ mismatch(es)", germ.mismatches or None, body)


def cmd_check_qr(args):
    src = _read(args.input)
    seq = _sequence(src.doc, args)
    params = _params_from_args(args, seq)
    try:
        if params is None:
            params = qr.search_params(seq)
            if params is None:
                return _report("fail", src.digest, "no grid point satisfies the ratio conditions")
        check = qr.check_one_sided if args.one_sided else qr.check_necessary
        rep = check(seq, params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    r = rep.to_report()
    return _report(r["verdict"], src.digest, r["evidence"], r["witness"],
                   {"params": params.to_json(), "one_sided": args.one_sided})


def cmd_derive_holder(args):
    src = _read(args.input)
    seq = _sequence(src.doc, args)
    params = _params_from_args(args, seq) or qr.search_params(seq)
    if params is None:
        return _report("fail", src.digest, "no grid point satisfies the ratio conditions")
    try:
        exps = qr.derive_holder(params, seq)
    except ValueError as exc:
        return _report("fail", src.digest, str(exc), None, {"params": params.to_json()})
    rep = qr.verify_holder(seq, exps)
    r = rep.to_report()
    return _report(r["verdict"], src.digest, r["evidence"], r["witness"],
                   {"params": params.to_json(), "exponents": exps.to_json()})


def cmd_scan_holder(args):
    src = _read(args.input)
    seq = _sequence(src.doc, args)
    sel = qr.stride_pairs(args.stride, args.first, args.second, args.start)
    try:
        rep = qr.holder_violation_scan(seq, args.alpha, args.C_grid, sel)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    r = rep.to_report()
    return _report(r["verdict"], src.digest, r["evidence"], r["witness"])


def _qc_map(src: Loaded, args) -> qcb.PiecewiseQCMap:
    doc = _unwrap(src.doc)
    extend = None
    gen = _generator(src.doc)
    if gen is not None:
        gid, params = gen
        extend = lambda count: gal.generate(gid, dataclasses.replace(params, count=count))  # noqa: E731
    try:
        if isinstance(doc, dict) and "annuli" in doc:
            qc = qcb.map_from_json(doc)
            return dataclasses.replace(qc, extend=extend)
        seq = _sequence(doc, args)
        params = _params_from_args(args, seq)
        if params is None and not args.no_strict:
            params = qr.search_params(seq)
        with working_precision(seq.precision_bits):
            D = mpmath.mpf(args.D) if args.D is not None else None
        return qcb.build_qc_map(seq, params, D, alpha_mode=args.alpha_mode,
                                strict=not args.no_strict, extend=extend)
    except qcb.HypothesisViolation:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"cannot build map: {exc}") from None


def _qc_fail(src: Loaded, exc: qcb.HypothesisViolation) -> dict:
    return _report("fail", src.digest, f"construction hypothesis violated: {exc}", exc.witness)


def cmd_build_qc(args):
    src = _read(args.input)
    try:
        qc = _qc_map(src, args)
    except qcb.HypothesisViolation as exc:
        return _qc_fail(src, exc)
    rep = qc.dilatation_report
    verdict = "pass" if rep.quasiconformal and rep.bound_ok is not False else "fail"
    return _report(verdict, src.digest,
                   f"{len(qc.annuli)} annuli, K_global {mpmath.nstr(qc.K_global, 12)}",
                   None, qcb.map_to_json(qc))


def cmd_eval_qc(args):
    src = _read(args.input)
    try:
        qc = _qc_map(src, args)
    except qcb.HypothesisViolation as exc:
        return _qc_fail(src, exc)
    bits = qc.precision_bits
    try:
        z = parse_complex(args.at, bits)
        w = qcb.evaluate(qc, z)
    except qcb.BeyondPrefix as exc:
        return _report("fail", src.digest, str(exc))
    except ValueError as exc:
        raise UsageError(f"--at: {exc}") from None
    return _report("info", src.digest, "evaluated", None,
                   {"z": format_complex(z, bits), "f(z)": format_complex(w, bits)})


def _audit(src: Loaded, args):
    qc = _qc_map(src, args)
    tol = args.tol
    res = qcb.audit(qc, sample_count=args.samples, tol=tol)
    return qc, res


def cmd_audit_qc(args):
    src = _read(args.input)
    try:
        qc, res = _audit(src, args)
    except qcb.HypothesisViolation as exc:
        return _qc_fail(src, exc)
    r = res.to_report()
    bits = qc.precision_bits
    body = {"K_global": format_real(qc.K_global, bits), "checks": r["checks"],
            "dilatation": qc.dilatation_report.to_json(bits)}
    return _report(r["verdict"], src.digest, r["evidence"], r["witness"], body)


def _write_svg(path: Optional[str], svg: str) -> None:
    if not path:
        raise UsageError("--svg PATH is required")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)


def cmd_plot_qc(args):
    src = _read(args.input)
    try:
        qc, res = _audit(src, args)
    except qcb.HypothesisViolation as exc:
        return _qc_fail(src, exc)
    r = res.to_report()
    _write_svg(args.svg, plotting.plot_qc(qc, verdict=r["verdict"]))
    return _report(r["verdict"], src.digest, r["evidence"], r["witness"],
                   {"svg": args.svg, "K_global": format_real(qc.K_global, qc.precision_bits)})


def cmd_plot_orbit(args):
    src = _read(args.input)
    seq = _sequence(src.doc, args)
    rep = check_candidate_consistency(seq, _tol(args))
    verdict = "pass" if rep.passed else "fail"
    style = {"palette": args.palette.split(",")} if args.palette else None
    _write_svg(args.svg, plotting.plot_orbit(seq, style, verdict))
    return _report(verdict, src.digest, rep.evidence,
                   list(rep.witness) if rep.witness else None, {"svg": args.svg})


def cmd_gallery(args):
    fields = {"count": args.count, "b": args.b, "a": args.a, "delta_log2": args.delta_log2,
              "eps": args.eps, "s": args.s, "z0": args.z0}
    if args.precision_bits is not None:
        fields["precision_bits"] = args.precision_bits
    if args.no_perturb:
        fields["perturb"] = False
    try:
        params = gal.parse_params(args.id, **fields)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        seq = gal.generate(args.id, params)
    except PrecisionCapExceeded as exc:
        raise CapError(str(exc)) from None
    out = seq.to_json()
    recorded = {k: v for k, v in dataclasses.asdict(params).items()
                if k not in ("precision_bits", "cap")}
    out["generator"] = {"id": gal.GalleryId(args.id).value, "params": recorded}
    return out


# ---------------------------------------------------------------- parser

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--input", default="-", help="input JSON file, '-' for stdin")
    p.add_argument("--output", default="-", help="report file, '-' for stdout")
    p.add_argument("--precision-bits", type=int, default=None,
                   help="working precision (default: the input's own)")
    p.add_argument("--tol", type=float, default=None, help="verb-specific tolerance")
    p.add_argument("--fast", action="store_true",
                   help="run at 53-bit precision (quick look, not exact)")
    return p


def _qr_flags(p):
    p.add_argument("--mu", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--n0", type=int, default=0)


def _qc_flags(p):
    _qr_flags(p)
    p.add_argument("--D", type=str, default=None, help="decay constant in (0,1)")
    p.add_argument("--alpha-mode", choices=qcb.ALPHA_MODES, default="principal")
    p.add_argument("--no-strict", action="store_true",
                   help="build even when the hypotheses fail")
    p.add_argument("--samples", type=int, default=32, help="angles per seam in audits")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="orbitforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("validate", cmd_validate, "candidate-orbit consistency of a prefix")
    p.add_argument("--eq-tol", type=float)
    p = add("classify", cmd_classify, "periodic / escaping / bounded / bungee")
    p.add_argument("--eq-tol", type=float)
    p.add_argument("--escape-radius", type=float)
    p = add("realize-poly", cmd_realize_poly, "entire realizer of a periodic prefix")
    p.add_argument("--eq-tol", type=float)
    p.add_argument("--base", choices=("zero", "z", "z2", "poly", "exp"), default="zero")
    p.add_argument("--coeffs", help="';'-separated 're,im' coefficients for --base poly")
    p.add_argument("--c", help="'re,im' constant for --base exp")
    p = add("probe-taylor", cmd_probe_taylor, "order and Taylor coefficients at an accumulation point")
    p.add_argument("--accum", "--zeta", dest="zeta", default="0",
                   help="accumulation point 're,im'")
    p.add_argument("--limit", "--w", dest="w", default=None,
                   help="limit of the images 're,im' (estimated if omitted)")
    p.add_argument("--max-coeffs", "--K", dest="K", type=int, default=8)
    p.add_argument("--window", type=int, default=6)
    p.add_argument("--max-precision", type=int, default=4096)
    p = add("check-qr", cmd_check_qr, "two-sided ratio conditions (searches a grid if no params)")
    _qr_flags(p)
    p.add_argument("--one-sided", action="store_true", help="check only the weaker halves")
    p = add("derive-holder", cmd_derive_holder, "Hölder exponents implied by the ratio conditions")
    _qr_flags(p)
    p = add("scan-holder", cmd_scan_holder, "search for Hölder-condition violations")
    p.add_argument("--alpha", type=_float_list, default=[0.5, 1.0])
    p.add_argument("--C-grid", type=_float_list, default=[1.0, 10.0, 1e3, 1e6])
    p.add_argument("--stride", type=int, default=3)
    p.add_argument("--first", type=int, default=0)
    p.add_argument("--second", type=int, default=1)
    p.add_argument("--start", type=int, default=0)
    _qc_flags(add("build-qc", cmd_build_qc, "annulus-wise quasiconformal realizer"))
    p = add("eval-qc", cmd_eval_qc, "evaluate a built map")
    _qc_flags(p)
    p.add_argument("--at", required=True, help="'re,im'")
    _qc_flags(add("audit-qc", cmd_audit_qc, "run every verification on a map"))
    p = add("plot-qc", cmd_plot_qc, "SVG of annuli, images and K per annulus")
    _qc_flags(p)
    p.add_argument("--svg", required=True)
    p = add("plot-orbit", cmd_plot_orbit, "SVG of an orbit prefix")
    p.add_argument("--eq-tol", type=float)
    p.add_argument("--svg", required=True)
    p.add_argument("--palette", help="comma-separated colours")
    p = add("gallery", cmd_gallery, "emit a built-in example sequence")
    p.add_argument("--id", required=True, choices=[g.value for g in gal.GalleryId])
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--b", type=int)
    p.add_argument("--a")
    p.add_argument("--delta-log2", type=int)
    p.add_argument("--no-perturb", action="store_true")
    p.add_argument("--eps")
    p.add_argument("--s")
    p.add_argument("--z0")
    return parser


def _emit(doc: dict, path: str) -> None:
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        doc = args.func(args)
    except UsageError as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "exit": 2}) + "\n")
        return 2
    except (CapError, PrecisionCapExceeded) as exc:
        doc = _report("fail", "", f"precision cap exceeded: {exc}")
        _emit(doc, args.output)
        return 1
    if getattr(args, "fast", False) and "verdict" in doc:
        doc["precision_mode"] = f"fast ({FAST_BITS}-bit)"
    _emit(doc, args.output)
    return 1 if doc.get("verdict") == "fail" else 0


if __name__ == "__main__":
    sys.exit(main())
