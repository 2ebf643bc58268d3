import json

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import geometric, squaring
from orbitforge.core import (
    InconsistentSequence,
    OrbitSequence,
    Tail,
    ToleranceConfig,
    check_candidate_consistency,
    classify_orbit,
    polynomial_degree_hint,
)


def test_sequence_needs_two_points():
    with pytest.raises(ValueError):
        OrbitSequence((1,))


def test_sequence_rejects_low_precision_and_nonfinite():
    with pytest.raises(ValueError):
        OrbitSequence((1, 2), 32)
    with pytest.raises(ValueError):
        OrbitSequence((1, "nan"))


def test_points_parsed_at_sequence_precision():
    seq = OrbitSequence(("0.1", ["1", "2"]), 512)
    assert seq[0].real.context.prec >= 53
    with mpmath.workprec(512):
        assert seq[0] == mpmath.mpc(mpmath.mpf("0.1"))
        assert seq[1] == mpmath.mpc(1, 2)


def test_json_round_trip_is_lossless():
    seq = OrbitSequence((mpmath.mpc(1, 3), "0.3333333333333333333333333333333333333"), 300,
                        Tail("tends-to-point", zeta=mpmath.mpc(0)))
    back = OrbitSequence.from_json(json.loads(seq.dumps()))
    assert back.points == seq.points
    assert back.tail == seq.tail
    assert back.precision_bits == 300


def test_declared_periodic_tail_is_validated():
    OrbitSequence((1, 2, 1, 2), tail=Tail("periodic-from", index=0, period=2))
    with pytest.raises(ValueError):
        OrbitSequence((1, 2, 1, 3), tail=Tail("periodic-from", index=0, period=2))


@pytest.mark.parametrize("kw", [
    {"kind": "weird"},
    {"kind": "tends-to-point"},
    {"kind": "periodic-from", "index": 0},
    {"kind": "bounded", "bound": mpmath.mpf(-1)},
])
def test_bad_tails(kw):
    with pytest.raises(ValueError):
        Tail(**kw)


def test_tolerances_must_be_positive():
    with pytest.raises(ValueError):
        ToleranceConfig(eq_tol=0)
    assert ToleranceConfig(eq_tol="1e-500").eq_tol == "1e-500"


def test_repeat_with_different_successor_is_rejected():
    rep = check_candidate_consistency(OrbitSequence((1, 2, 1, 3)))
    assert not rep.passed
    assert rep.witness == (0, 2)
    assert rep.to_report()["verdict"] == "fail"


def test_minimal_witness_is_lexicographic():
    rep = check_candidate_consistency(OrbitSequence((5, 1, 2, 1, 3, 5, 7)))
    assert rep.witness == (0, 5)


def test_consistent_repeat_passes():
    assert check_candidate_consistency(OrbitSequence((1, 2, 1, 2, 1))).passed


def test_last_point_is_never_paired():
    # z_1 = z_3 but z_3 has no successor in the prefix
    assert check_candidate_consistency(OrbitSequence((0, 1, 2, 1))).passed


def test_near_coincidences_are_flagged_not_failed():
    rep = check_candidate_consistency(OrbitSequence((1, 2, "1.000000000000000000000000001", 3)))
    assert rep.passed
    assert [(p, q) for p, q, _ in rep.near_coincidences] == [(0, 2)]


def test_classify_declared_tails_are_exact():
    cls = classify_orbit(OrbitSequence((1, 2), tail=Tail("escaping")))
    assert (cls.tag, cls.exact) == ("Escaping", True)
    cls = classify_orbit(squaring(5).with_points(squaring(5).points))
    assert cls.tag == "Bounded" and not cls.exact


def test_classify_heuristics():
    assert classify_orbit(OrbitSequence((1, 2, 3, 1, 2, 3))).tag == "Periodic"
    big = OrbitSequence(tuple(mpmath.mpf(10) ** (2 ** n) for n in range(8)))
    assert classify_orbit(big).tag == "Escaping"
    bungee = OrbitSequence((0, 1e7, 0.5, 1e8, 0.25, 3))
    assert classify_orbit(bungee).tag == "Bungee"


def test_classify_refuses_inconsistent_prefix():
    with pytest.raises(InconsistentSequence):
        classify_orbit(OrbitSequence((1, 2, 1, 3)))


def test_degree_hint_on_squaring_and_cubing():
    assert polynomial_degree_hint(squaring(10)).degree == 2
    with mpmath.workprec(256):
        cubes = OrbitSequence(tuple(mpmath.mpf(3) ** (3 ** n) for n in range(8)), 256)
    assert polynomial_degree_hint(cubes).degree == 3


def test_degree_hint_absent_for_non_integer_growth():
    with mpmath.workprec(256):
        seq = OrbitSequence(tuple(mpmath.mpf(2) ** -(mpmath.mpf(1.5) ** n) for n in range(4, 24)),
                            256)
    hint = polynomial_degree_hint(seq)
    assert hint.degree is None
    assert abs(hint.residual - 0.5) < 0.01


def test_degree_hint_rejects_unit_modulus():
    with pytest.raises(ValueError):
        polynomial_degree_hint(OrbitSequence((2, 1, 1j, 1)))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-4, 4), min_size=2, max_size=12))
def test_consistency_agrees_with_functional_graph(values):
    # a prefix is consistent exactly when "value -> next value" is a function
    seen = {}
    expected = True
    for a, b in zip(values[:-1], values[1:]):
        if seen.setdefault(a, b) != b:
            expected = False
    assert check_candidate_consistency(OrbitSequence(tuple(values))).passed == expected


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=2, max_size=6),
       st.sampled_from([53, 128, 300]))
def test_json_round_trip_property(pairs, bits):
    seq = OrbitSequence(tuple(list(p) for p in pairs), bits)
    assert OrbitSequence.from_json(json.loads(seq.dumps())).points == seq.points


def test_geometric_fixture_moduli():
    assert geometric(4).moduli()[-1] == mpmath.mpf(1) / 16
