"""Render BER sweep results to figure files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_MARKERS = ("o", "s", "v", "^", "D", "x", "+", "*")


def render_ber_figure(rows: list[dict], path: str | Path) -> Path:
    """Plot BER vs Eb/N0, one curve per scheme; zero-BER points are gaps.

    ``rows`` are dicts as returned by :func:`turboep.harness.read_csv`.
    Returns the written path.
    """
    path = Path(path)
    schemes = sorted({row["scheme"] for row in rows})
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for i, scheme in enumerate(schemes):
        pts = sorted(
            ((r["ebn0_db"], r["ber"]) for r in rows if r["scheme"] == scheme)
        )
        xs = [p[0] for p in pts]
        ys = [p[1] if p[1] > 0 else float("nan") for p in pts]
        ax.semilogy(
            xs, ys, marker=_MARKERS[i % len(_MARKERS)], label=scheme.upper()
        )
    ax.set_xlabel(r"$E_b/N_0$ (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
