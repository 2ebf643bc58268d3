"""SVG figures for orbits and constructed maps.

Output is byte-stable: the SVG hash salt is fixed, the date metadata is
dropped, and text stays as <text> elements so labels can be asserted on.
Artists carry gids (rendered as SVG ids) for element-count checks.
"""

from __future__ import annotations

import io
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import mpmath  # noqa: E402
from matplotlib.patches import Circle, FancyArrowPatch  # noqa: E402

from .core import OrbitSequence  # noqa: E402
from .numeric import working_precision  # noqa: E402

DEFAULT_PALETTE = ("#1f5f8b", "#c8553d", "#588b8b", "#8d6a9f", "#f28f3b", "#4f6d7a")

_RC = {
    "svg.hashsalt": "orbitforge",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def _render(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def _style(style: Optional[dict]) -> dict:
    out = {"palette": DEFAULT_PALETTE, "marker": "o", "figsize": (7.0, 5.0)}
    for k, v in (style or {}).items():
        if k not in out:
            raise ValueError(f"unknown style key {k!r}")
        out[k] = tuple(v) if k in ("palette", "figsize") else v
    if not out["palette"]:
        out["palette"] = DEFAULT_PALETTE
    return out


def _log10(x) -> float:
    return float(mpmath.log10(x)) if x > 0 else float("-inf")


def plot_orbit(seq: OrbitSequence, style: Optional[dict] = None,
               verdict: Optional[str] = None) -> str:
    """Points (one glyph per distinct value), index labels, arrows z_n -> z_{n+1}
    and an inset with log10 |z_n| against n."""
    st = _style(style)
    pal = st["palette"]
    with working_precision(seq.precision_bits):
        distinct: list = []
        owner = []
        for z in seq.points:
            for k, w in enumerate(distinct):
                if w == z:
                    owner.append(k)
                    break
            else:
                owner.append(len(distinct))
                distinct.append(z)
        xy = [(float(z.real), float(z.imag)) for z in distinct]
        logmod = [_log10(abs(z)) for z in seq.points]

    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=st["figsize"])
        for k, (x, y) in enumerate(xy):
            ax.plot([x], [y], linestyle="none", marker=st["marker"], color=pal[k % len(pal)],
                    markersize=6, gid=f"orbit-point-{k}")
            idx = [str(n) for n, o in enumerate(owner) if o == k]
            ax.annotate(",".join(idx), (x, y), textcoords="offset points", xytext=(5, 5),
                        fontsize=8, gid=f"orbit-label-{k}")
        for n in range(len(owner) - 1):
            a, b = xy[owner[n]], xy[owner[n + 1]]
            arrow = FancyArrowPatch(a, b, arrowstyle="-|>", mutation_scale=10,
                                    connectionstyle="arc3,rad=0.15", color="0.35",
                                    linewidth=0.8, gid=f"orbit-arrow-{n}")
            ax.add_patch(arrow)
        ax.set_xlabel("Re z")
        ax.set_ylabel("Im z")
        ax.set_aspect("equal", adjustable="datalim")
        ax.margins(0.15)
        title = f"orbit prefix, {len(seq)} points"
        if verdict is not None:
            title += f" (verdict: {verdict})"
        ax.set_title(title)

        inset = ax.inset_axes([0.68, 0.68, 0.3, 0.28])
        finite = [(n, v) for n, v in enumerate(logmod) if v != float("-inf")]
        if finite:
            inset.plot([n for n, _ in finite], [v for _, v in finite], marker=".",
                       color=pal[0], linewidth=0.8, gid="orbit-modulus-inset")
        inset.set_xlabel("n", fontsize=7)
        inset.set_ylabel("log10 |z_n|", fontsize=7)
        inset.tick_params(labelsize=6)
        return _render(fig)


def _embed(r, top) -> float:
    """Radius for the log-radius picture: |z_0| -> 1, 0 -> 0, monotone."""
    return float(1 / (1 + mpmath.log(top / r)))


def plot_qc(qc, verdict: Optional[str] = None, annuli_shown: int = 6,
            samples_per_annulus: int = 4, style: Optional[dict] = None) -> str:
    """Annulus circles, their image circles and sampled z -> f(z) correspondences
    in a log-radius embedding, next to a bar chart of K per annulus."""
    from .qc_builder import evaluate

    st = _style(style)
    pal = st["palette"]
    pts = qc.seq.points
    count = min(annuli_shown, len(qc.annuli))
    with working_precision(qc.precision_bits):
        top = abs(pts[0])
        circles = [_embed(abs(z), top) for z in pts[:count + 2]]
        pairs = []
        for n in range(count):
            a = qc.annuli[n]
            # middle of A_n in log radius, rotated through a few angles
            r = abs(pts[n + 1]) * mpmath.exp(a.d / 2)
            for k in range(samples_per_annulus):
                t = 2 * mpmath.pi * (k + 0.5 * (n % 2)) / samples_per_annulus
                z = r * mpmath.expj(t)
                w = evaluate(qc, z)
                zr, wr = _embed(abs(z), top), _embed(abs(w), top)
                pairs.append((n, k, zr * float(mpmath.cos(t)), zr * float(mpmath.sin(t)),
                              wr * float(mpmath.cos(mpmath.arg(w))),
                              wr * float(mpmath.sin(mpmath.arg(w))), wr))
        Ks = [float(k) for _, _, k in qc.dilatation_report.per_annulus]

    with plt.rc_context(_RC):
        fig, (ax, bx) = plt.subplots(1, 2, figsize=(11.0, 5.0))
        for n, rho in enumerate(circles):
            ax.add_patch(Circle((0, 0), rho, fill=False, color=pal[0], linewidth=0.9,
                                gid=f"qc-circle-{n}"))
        seen = set()
        for n, k, x0, y0, x1, y1, wr in pairs:
            if n not in seen:
                seen.add(n)
                ax.add_patch(Circle((0, 0), wr, fill=False, color=pal[1], linestyle="--",
                                    linewidth=0.7, gid=f"qc-image-circle-{n}"))
            ax.add_patch(FancyArrowPatch((x0, y0), (x1, y1), arrowstyle="-|>",
                                         mutation_scale=8, color=pal[2], linewidth=0.7,
                                         gid=f"qc-corr-{n}-{k}"))
        ax.set_xlim(-1.1, 1.1)
        ax.set_ylim(-1.1, 1.1)
        ax.set_aspect("equal")
        ax.set_title("annuli (solid), images (dashed), log-radius scale")
        bars = bx.bar(range(len(Ks)), Ks, color=pal[3])
        for n, bar in enumerate(bars):
            bar.set_gid(f"qc-kbar-{n}")
        bx.set_xlabel("annulus n")
        bx.set_ylabel("K")
        bx.set_title(f"K_global = {mpmath.nstr(qc.K_global, 8)}")
        if verdict is not None:
            fig.suptitle(f"verdict: {verdict}")
        return _render(fig)
