import mpmath
import pytest

from orbitforge.core import polynomial_degree_hint
from orbitforge.gallery import (
    GalleryId,
    GeneratorParams,
    ex3_2_required_bits,
    ex3_4_sigma_schedule,
    generate,
    qrclever_apply,
    qrclever_dilatation_estimate,
)
from orbitforge.numeric import PrecisionCapExceeded
from orbitforge.qc_builder import HypothesisViolation, build_qc_map
from orbitforge.qr_checker import (
    HolderExponents,
    QRParams,
    check_one_sided,
    search_params,
    verify_holder,
)


def test_squaring_prefix_is_exact():
    seq = generate(GalleryId.Ex3_1, GeneratorParams(count=5))
    assert seq.points == tuple(mpmath.mpc(x) for x in (1, 0.5, 0.25, 0.0625, 0.00390625))


def test_three_strand_first_block():
    seq = generate("QRNew", GeneratorParams(count=3))
    with mpmath.workprec(seq.precision_bits):
        e2 = mpmath.exp(-2)
        assert seq[0] == e2
        assert abs(seq[1] - (e2 - mpmath.exp(-4))) < mpmath.ldexp(1, -240)
        assert seq[2] == -e2 / 2


def test_counter_sequence_values():
    seq = generate("AppendixCounter", GeneratorParams(count=4))
    assert [z.real for z in seq.points] == [0.5, 0.25, 0.125, 1 / 64]


def test_every_id_tends_to_zero_and_is_deterministic():
    for gid in GalleryId:
        params = GeneratorParams(count=4)
        a, b = generate(gid, params), generate(gid, params)
        assert a.dumps() == b.dumps()
        assert a.tail.kind == "tends-to-zero"


def test_ex3_2_precision_is_escalated_and_capped():
    seq = generate("Ex3_2", GeneratorParams(count=3))
    assert seq.precision_bits == ex3_2_required_bits(3) == 10 ** 4 + 64
    # the perturbation of the last point is still resolved
    with mpmath.workprec(seq.precision_bits):
        assert seq[2] != mpmath.ldexp(1, -4)
    with pytest.raises(PrecisionCapExceeded):
        generate("Ex3_2", GeneratorParams(count=8))
    with pytest.raises(PrecisionCapExceeded):
        generate("Ex3_2", GeneratorParams(count=3, cap=4096))


def test_parameter_ranges():
    with pytest.raises(ValueError):
        GeneratorParams(count=1)
    with pytest.raises(ValueError):
        generate("Ex3_3", GeneratorParams(a="2.5"))
    with pytest.raises(ValueError):
        generate("QRClever", GeneratorParams(z0="0.5"))
    with pytest.raises(ValueError):
        qrclever_apply(1, 0, "0.5")


def test_p_map_examples():
    s, eps = mpmath.mpf("0.01"), mpmath.mpf("1e-3")
    w = qrclever_apply(s / 2, eps, s)
    assert abs(abs(w) - (s / 2) * (1 - s / 2)) < 1e-15
    assert abs(mpmath.arg(w) - eps) < 1e-15
    w = qrclever_apply(-s / 2, eps, s)
    assert abs(mpmath.arg(w) % (2 * mpmath.pi) - (4 * mpmath.pi / 3 + eps)) < 1e-12
    assert abs(abs(qrclever_apply(2 * s, eps, s)) - 2 * s * (1 - s)) < 1e-15
    with pytest.warns(RuntimeWarning):
        assert qrclever_apply(0, eps, s) == 0


def test_p_map_orbit_ratios_increase_to_one():
    seq = generate("QRClever", GeneratorParams(count=40))
    mods = seq.moduli()
    ratios = [b / a for a, b in zip(mods, mods[1:])]
    assert all(r1 < r2 < 1 for r1, r2 in zip(ratios, ratios[1:]))
    for a, r in zip(mods, ratios):
        assert abs(r - (1 - a)) < 1e-60


def test_p_map_dilatation_diagnostic_is_bounded():
    assert 0.3 < qrclever_dilatation_estimate() < 0.4


def test_sigma_schedule_certificate_and_ledger():
    params = GeneratorParams(count=8, delta_log2=-20)
    sched = ex3_4_sigma_schedule(params)
    assert sched.certified_bound < mpmath.ldexp(1, -20)
    assert sched.N and all(a_m == 2 ** (m * m) for m, _, a_m in sched.ledger)
    ms = sorted(sched.N)
    assert ms == list(range(3, 3 + len(ms)))
    seq = generate("Ex3_4", params)
    with mpmath.workprec(seq.precision_bits):
        for z, w in zip(seq.points, seq.points[1:]):
            assert abs(w - z * z) <= mpmath.ldexp(1, -20) * abs(z * z)


def test_unperturbed_schedule_is_pure_squaring():
    params = GeneratorParams(count=8, perturb=False)
    assert ex3_4_sigma_schedule(params).N == {}
    seq = generate("Ex3_4", params)
    with mpmath.workprec(seq.precision_bits):
        assert all(w == z * z for z, w in zip(seq.points, seq.points[1:]))


def test_non_integer_growth_has_no_degree():
    assert polynomial_degree_hint(generate("Ex3_3", GeneratorParams(count=30))).degree is None


def test_three_strand_ratio_structure():
    seq = generate("QRNew", GeneratorParams(count=60))
    mods = seq.moduli()
    # |z_{3m+2}| / |z_{3m+1}| -> 1/2 while |z_{3m+1}| / |z_{3m}| -> 1
    m = 19
    assert abs(mods[3 * m + 2] / mods[3 * m + 1] - 0.5) < 1e-100
    assert abs(mods[3 * m + 1] / mods[3 * m] - 1) < 1e-100


def test_three_strand_meets_ratio_conditions_but_not_decay():
    seq = generate("QRNew", GeneratorParams(count=30))
    assert search_params(seq) is not None
    with pytest.raises(HypothesisViolation):
        build_qc_map(seq, D="0.99")


def test_counter_sequence_holder_and_one_sided_failure():
    seq = generate("AppendixCounter", GeneratorParams(count=20))
    assert verify_holder(seq, HolderExponents(2.0, 1.0, 0)).passed
    rep = check_one_sided(seq, QRParams(2.0, 2.0, 10.0))
    assert not rep.passed
    assert all(w.n % 2 == 1 for w in rep.witnesses)
