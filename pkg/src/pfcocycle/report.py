"""Figure rendering for sweep and reference outputs.

Figures are written next to the delimited output as PNG files; they are a
viewing convenience and never part of the byte-stable result set.
"""

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .harness import ReferenceBundle, SweepRecord


def render_perturbation_sweep(records: Sequence[SweepRecord], out_dir, basename: str = "sweep_perturb") -> list[Path]:
    """Log-log trends of exponent / projection / slow-space differences, and
    the operator-vs-map distance ratio band."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    live = [r for r in records if not r.skipped and r.axis > 0]
    paths = []
    if not live:
        return paths

    eps = [r.axis for r in live]
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax = axes[0]
    ax.loglog(eps, [max(r.gamma_diffs) for r in live], "o-", label="exponent diff")
    ax.loglog(eps, [max(r.proj_tnorm_diffs) for r in live], "s-", label="projection diff")
    ax.loglog(eps, [r.slow_gap for r in live], "^-", label="slow-space gap")
    ax.set_xlabel("perturbation size")
    ax.set_ylabel("difference vs reference")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)

    ax = axes[1]
    ratios = [r.map_tnorm_diff / r.map_ck_distance for r in live if r.map_ck_distance > 0]
    if ratios:
        ax.semilogx([r.axis for r in live if r.map_ck_distance > 0], ratios, "o-")
        ax.set_xlabel("perturbation size")
        ax.set_ylabel("operator diff / map diff")
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    p = out / f"{basename}.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    paths.append(p)
    return paths


def render_fejer_sweep(records: Sequence[SweepRecord], out_dir, basename: str = "sweep_fejer") -> list[Path]:
    """Self-convergence of exponents and splittings against truncation order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    live = [r for r in records if not r.skipped]
    paths = []
    if not live:
        return paths
    orders = [int(r.axis) for r in live]
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.semilogy(orders, [max(r.gamma_diffs) if r.gamma_diffs else math.nan for r in live], "o-", label="exponent diff")
    ax.semilogy(orders, [max(r.proj_tnorm_diffs) if r.proj_tnorm_diffs else math.nan for r in live], "s-", label="projection diff")
    ax.semilogy(orders, [r.slow_gap for r in live], "^-", label="slow-space gap")
    ax.set_xlabel("truncation order")
    ax.set_ylabel("difference vs reference order")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    p = out / f"{basename}.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    paths.append(p)
    return paths


def render_reference(bundle: ReferenceBundle, out_dir, basename: str = "reference") -> list[Path]:
    """Spectrum stem plot with merge blocks and certificate annotations."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = bundle.result.spectrum
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.stem(range(1, len(spec.raw) + 1), spec.raw)
    for lam in spec.exponents:
        ax.axhline(lam, color="tab:orange", lw=0.8, alpha=0.6)
    cert = bundle.result.certificate
    ax.set_title(
        f"top exponents (N = {spec.horizon}); certificate "
        f"{'passed' if cert.passed else 'failed'}: eta = {cert.eta:.3f}, theta = {cert.theta:.2f}",
        fontsize=9,
    )
    ax.set_xlabel("direction")
    ax.set_ylabel("exponent")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    p = out / f"{basename}.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    return [p]
