import json

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import geometric, spiral, squaring
from orbitforge.core import OrbitSequence
from orbitforge.gallery import GeneratorParams, generate
from orbitforge.qc_builder import (
    AnnulusMapParams,
    BeyondPrefix,
    HypothesisViolation,
    audit,
    build_qc_map,
    dilatation,
    evaluate,
    map_from_json,
    map_to_json,
    modulus_bounds,
    periodicity_audit,
    uniform_bound,
    verify_boundary_continuity,
    verify_circle_identity,
    verify_orbit_realization,
)
from orbitforge.qr_checker import QRParams

BITS = 256
TIGHT = mpmath.mpf("1e-30")


def test_geometric_map_is_a_similarity():
    qc = build_qc_map(geometric(10))
    assert qc.K_global == 1
    with mpmath.workprec(BITS):
        ln2 = mpmath.log(2)
        for a in qc.annuli:
            assert abs(a.d - ln2) < 1e-70 and abs(a.d_prime - ln2) < 1e-70 and a.alpha == 0
        assert evaluate(qc, 1) == mpmath.mpf(1) / 2
        assert abs(evaluate(qc, "0.3,0.1") - mpmath.mpc("0.15", "0.05")) < TIGHT
        assert evaluate(qc, 0) == 0
    assert verify_orbit_realization(qc).max_error == 0


def test_squaring_annuli_and_dilatation():
    qc = build_qc_map(squaring(10))
    with mpmath.workprec(BITS):
        for a in qc.annuli:
            assert abs(a.d - 2 ** a.n * mpmath.log(2)) < 1e-60
            assert abs(a.g_prime - 2) < 1e-70 and a.alpha == 0
            mu, K = dilatation(a)
            assert abs(mu - mpmath.mpf(1) / 3) < 1e-70 and abs(K - 2) < 1e-70
        assert evaluate(qc, qc.seq[0]) == qc.seq[1]


def test_rotated_orbit_points_map_to_rotated_images():
    qc = build_qc_map(squaring(10))
    with mpmath.workprec(BITS):
        rot = mpmath.expj(mpmath.mpf("0.3"))
        for n in range(8):
            got = evaluate(qc, qc.seq[n] * rot)
            assert abs(got - qc.seq[n + 1] * rot) <= TIGHT * abs(qc.seq[n + 1])


def test_spiral_prefix_has_zero_alpha():
    qc = build_qc_map(spiral(9))
    assert all(abs(a.alpha) < 1e-70 for a in qc.annuli)
    assert abs(qc.K_global - 1) < 1e-70
    assert verify_boundary_continuity(qc, 3, tol=TIGHT).passed
    m, M = modulus_bounds(qc, mpmath.mpf("0.1"))
    assert abs(M - m) < 1e-70


def test_long_spiral_needs_reduced_alpha():
    seq = spiral(20)
    principal = build_qc_map(seq)
    reduced = build_qc_map(seq, alpha_mode="reduced")
    # the principal argument wraps past pi and leaves alpha = +-2 pi on a few annuli
    assert max(abs(a.alpha) for a in principal.annuli) > 6
    assert all(abs(a.alpha) < 1e-70 for a in reduced.annuli)
    for qc in (principal, reduced):
        assert verify_orbit_realization(qc).passed
        assert verify_circle_identity(qc).passed


def test_dilatation_examples():
    ln2 = mpmath.log(2)
    assert dilatation(AnnulusMapParams(0, ln2, ln2, mpmath.mpf(0))) == (0, 1)
    mu, K = dilatation(AnnulusMapParams(0, ln2, 2 * ln2, mpmath.mpf(0)))
    assert abs(mu - mpmath.mpf(1) / 3) < 1e-14 and abs(K - 2) < 1e-14
    mu, _ = dilatation(AnnulusMapParams(0, ln2, ln2, 2 * mpmath.pi))
    t = 2 * mpmath.pi / ln2
    assert abs(mu ** 2 - t ** 2 / (4 + t ** 2)) < 1e-14
    with pytest.raises(ValueError):
        AnnulusMapParams(0, mpmath.mpf(0), ln2, mpmath.mpf(0))


def test_periodicity_audit():
    qc = build_qc_map(squaring(6))
    assert all(periodicity_audit(a) for a in qc.annuli)
    a = qc.annuli[2]
    w = mpmath.mpc(a.d / 2, mpmath.pi / 3)
    assert a.phi(w + 2j * mpmath.pi) - a.phi(w) == mpmath.mpc(0, 2 * mpmath.pi)


def test_modulus_bounds_examples():
    m, M = modulus_bounds(build_qc_map(geometric(8)), mpmath.mpf(1) / 4)
    assert m == M == mpmath.mpf(1) / 8
    qc = build_qc_map(squaring(8))
    with mpmath.workprec(BITS):
        m, M = modulus_bounds(qc, qc.seq[1].real)
        target = qc.seq[2].real
        assert abs(m - target) < TIGHT * target and abs(M - target) < TIGHT * target
    with pytest.raises(ValueError):
        modulus_bounds(qc, 2)


def test_boundary_continuity_and_audit_on_squaring():
    qc = build_qc_map(squaring(10), QRParams(2, 2, 1.01), "0.5")
    rep = verify_boundary_continuity(qc, 2, 64, TIGHT)
    assert rep.passed
    full = audit(qc)
    assert full.passed
    assert {r.name for r in full.results} >= {"orbit-realization", "circle-identity",
                                               "boundary-continuity", "periodicity",
                                               "quasiconformal", "uniform-bound"}


def test_uniform_bound_covers_the_squaring_map():
    params = QRParams(2, 2, 1.01)
    B, mu_b, K_b = uniform_bound(params, mpmath.mpf("0.5"))
    assert mu_b > mpmath.mpf(1) / 3 and K_b > 2
    qc = build_qc_map(squaring(10), params, "0.5")
    assert qc.dilatation_report.bound_ok


def test_build_rejections_carry_witnesses():
    with pytest.raises(HypothesisViolation) as err:
        build_qc_map(OrbitSequence(("0.5", "0.25", "0.25", "0.1")))
    assert err.value.witness == 1
    with pytest.raises(HypothesisViolation) as err:
        build_qc_map(OrbitSequence(("0.5", "0.25", "0.2", "0.1")), D="0.6")
    assert err.value.witness == 1
    with pytest.raises(HypothesisViolation):
        build_qc_map(squaring(8), QRParams(2.5, 3, 1.01))
    with pytest.raises(ValueError):
        build_qc_map(geometric(2))
    with pytest.raises(ValueError):
        build_qc_map(geometric(5), D="1.5")


def test_rotating_p_map_orbit_breaks_decay_and_distortion():
    seq = generate("QRClever", GeneratorParams(count=3000))
    with pytest.raises(HypothesisViolation):
        build_qc_map(seq, D="0.9")
    qc = build_qc_map(seq, D="0.9", strict=False)
    thetas = [abs(a.theta_prime) for a in qc.annuli]
    Ks = [k for _, _, k in qc.dilatation_report.per_annulus]
    # d_n ~ |z_n| decays like 1/n while alpha does not, so theta' and K keep growing
    assert max(thetas[-100:]) > 5 * max(thetas[:100])
    assert max(Ks[-100:]) > 10 * max(Ks[:100])


def test_beyond_prefix_and_extension():
    seq = squaring(6)
    qc = build_qc_map(seq)
    deep = mpmath.ldexp(1, -40)
    with pytest.raises(BeyondPrefix):
        evaluate(qc, deep)
    ext = build_qc_map(generate("Ex3_1", GeneratorParams(count=6)),
                       extend=lambda n: generate("Ex3_1", GeneratorParams(count=n)))
    with mpmath.workprec(BITS):
        # z_n = 2^(-2^(n-1)) for n >= 1, so 2^-40 lies in a covered annulus after extension
        assert abs(evaluate(ext, deep) - mpmath.ldexp(1, -80)) < TIGHT * mpmath.ldexp(1, -80)


def test_descriptor_round_trip():
    qc = build_qc_map(spiral(9), QRParams(1, 1, 1.5), "0.5")
    back = map_from_json(json.loads(json.dumps(map_to_json(qc))))
    assert back.annuli == qc.annuli
    assert back.K_global == qc.K_global
    with pytest.raises(ValueError):
        map_from_json({"nope": 1})


def test_non_integer_growth_is_realized_quasiconformally():
    qc = build_qc_map(generate("Ex3_3", GeneratorParams(count=14)))
    assert verify_orbit_realization(qc).passed
    assert qc.K_global < 2


def test_spiral_boundary_continuity_holds_for_any_alpha():
    with mpmath.workprec(BITS):
        seq = OrbitSequence(tuple(mpmath.ldexp(1, -(n + 1)) * mpmath.expj(n * n * 0.7)
                                  for n in range(8)), BITS)
    qc = build_qc_map(seq)
    assert any(abs(a.alpha) > 1 for a in qc.annuli)
    for n in range(len(qc.annuli) - 1):
        assert verify_boundary_continuity(qc, n, 64, TIGHT).passed


moduli_steps = st.lists(st.floats(0.3, 3.0), min_size=3, max_size=7)
angles = st.lists(st.floats(-3.1, 3.1), min_size=8, max_size=8)


def _random_sequence(steps, args):
    with mpmath.workprec(BITS):
        logs = [mpmath.mpf(0)]
        for s in steps:
            logs.append(logs[-1] - mpmath.mpf(s))
        return OrbitSequence(tuple(mpmath.exp(x) * mpmath.expj(a) for x, a in zip(logs, args)),
                             BITS)


@settings(max_examples=25, deadline=None)
@given(moduli_steps, angles)
def test_realization_and_circle_identity_property(steps, args):
    qc = build_qc_map(_random_sequence(steps, args))
    assert verify_orbit_realization(qc).passed
    assert verify_circle_identity(qc, 8).passed


@settings(max_examples=25, deadline=None)
@given(moduli_steps, angles, st.floats(0.01, 0.99), st.floats(-3.1, 3.1))
def test_annulus_maps_onto_next_annulus(steps, args, t, b):
    qc = build_qc_map(_random_sequence(steps, args))
    with mpmath.workprec(BITS):
        for n in range(len(qc.annuli)):
            outer, inner = abs(qc.seq[n]), abs(qc.seq[n + 1])
            r = inner * (outer / inner) ** mpmath.mpf(t)
            w = abs(evaluate(qc, r * mpmath.expj(b)))
            assert abs(qc.seq[n + 2]) < w <= abs(qc.seq[n + 1])


@settings(max_examples=20, deadline=None)
@given(moduli_steps, angles, st.floats(-3.1, 3.1))
def test_rotation_homogeneity_in_reduced_mode(steps, args, gamma):
    seq = _random_sequence(steps, args)
    with mpmath.workprec(BITS):
        rot = mpmath.expj(mpmath.mpf(gamma))
        turned = OrbitSequence(tuple(z * rot for z in seq.points), BITS)
    a = build_qc_map(seq, alpha_mode="reduced")
    b = build_qc_map(turned, alpha_mode="reduced")
    with mpmath.workprec(BITS):
        for n in range(len(a.annuli)):
            z = seq[n + 1] * mpmath.mpc("1.3", "0.4")
            if not abs(seq[n + 1]) < abs(z) <= abs(seq[n]):
                continue
            assert abs(evaluate(b, z * rot) - rot * evaluate(a, z)) < TIGHT * abs(evaluate(a, z))


@settings(max_examples=20, deadline=None)
@given(moduli_steps, angles)
def test_no_collisions_inside_an_annulus(steps, args):
    qc = build_qc_map(_random_sequence(steps, args), alpha_mode="reduced")
    with mpmath.workprec(BITS):
        for n, a in enumerate(qc.annuli):
            assert a.g_prime > 0  # determinant of the real-linear phi
            outer, inner = abs(qc.seq[n]), abs(qc.seq[n + 1])
            pts = [inner * (outer / inner) ** (mpmath.mpf(i + 1) / 5) * mpmath.expj(2.0 * j)
                   for i in range(4) for j in range(3)]
            imgs = [evaluate(qc, z) for z in pts]
            for i in range(len(imgs)):
                for j in range(i):
                    assert abs(imgs[i] - imgs[j]) > 1e-40 * abs(imgs[i])
