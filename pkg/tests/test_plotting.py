import re

import pytest

from conftest import squaring
from orbitforge.core import OrbitSequence
from orbitforge.gallery import GeneratorParams, generate
from orbitforge.plotting import DEFAULT_PALETTE, plot_orbit, plot_qc
from orbitforge.qc_builder import build_qc_map
from orbitforge.qr_checker import QRParams


def _ids(svg: str, prefix: str) -> set:
    return set(re.findall(rf'id="({prefix}[\w-]*)"', svg))


def test_periodic_orbit_glyphs_and_arrows():
    svg = plot_orbit(OrbitSequence((0, 1, 0, 1, 0)))
    assert _ids(svg, "orbit-point-") == {"orbit-point-0", "orbit-point-1"}
    assert len(_ids(svg, "orbit-arrow-")) == 4
    # z = 0 has no log modulus; the inset still shows the points at z = 1
    assert "orbit-modulus-inset" in svg
    assert ">0,2,4<" in svg and ">1,3<" in svg


def test_three_strand_prefix_elements():
    svg = plot_orbit(generate("QRNew", GeneratorParams(count=9)), verdict="info")
    assert len(_ids(svg, "orbit-point-")) == 9
    assert len(_ids(svg, "orbit-arrow-")) == 8
    assert "orbit-modulus-inset" in svg
    assert "verdict: info" in svg


def test_empty_style_uses_default_palette():
    seq = OrbitSequence((1, "0.5", "0.25"))
    plain = plot_orbit(seq, style={"palette": []})
    assert DEFAULT_PALETTE[0] in plain
    assert plain == plot_orbit(seq)
    custom = plot_orbit(seq, style={"palette": ["#123456"]})
    assert "#123456" in custom
    with pytest.raises(ValueError):
        plot_orbit(seq, style={"colour": "red"})


def test_orbit_svg_is_byte_stable():
    seq = generate("Ex3_1", GeneratorParams(count=6))
    assert plot_orbit(seq, verdict="pass") == plot_orbit(seq, verdict="pass")


def test_qc_plot_elements():
    qc = build_qc_map(squaring(10), QRParams(2, 2, 1.01), "0.5")
    svg = plot_qc(qc, verdict="pass", annuli_shown=4, samples_per_annulus=3)
    assert len(_ids(svg, "qc-circle-")) == 6
    assert len(_ids(svg, "qc-image-circle-")) == 4
    assert len(_ids(svg, "qc-corr-")) == 12
    assert len(_ids(svg, "qc-kbar-")) == len(qc.annuli)
    assert "verdict: pass" in svg and "K_global = 2.0" in svg
    assert svg == plot_qc(qc, verdict="pass", annuli_shown=4, samples_per_annulus=3)
