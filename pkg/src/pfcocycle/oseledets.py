"""Lyapunov spectra and invariant splittings of matrix cocycles.

Exponents come from a discrete-QR sweep with per-step re-orthonormalisation.
Splittings come from two graph-transform fixed points: the fast space is the
limit of forward transforms of the zero chart pulled from ever-earlier times,
the slow space the limit of backward transforms pulled from ever-later times,
both charted against caller-supplied reference frames.  A determinant-based
estimator and a uniform-hyperbolicity certificate (projection-norm bound plus
growth/decay envelopes) cross-check the QR output.

All norms are taken in the metric carried by the subspaces (see
:mod:`pfcocycle.grassmann`); matrices are always given in ambient coordinates.
"""

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DegenerateBlock, DegenerateCocycle, NoContraction, NotComplementary, RankCollapse
from .grassmann import (
    GraphChart,
    ObliqueProjection,
    Subspace,
    backward_transform,
    chart_inverse,
    det_on,
    forward_transform,
    gap,
    oblique_proj,
    projection_norm,
)
from .transfer import CocyclePath, product


def _metric_matrices(path: CocyclePath, mats: Mapping[str, object], weights) -> dict[str, np.ndarray]:
    """Fiber matrices conjugated into metric coordinates (w M / w)."""
    out = {}
    for fid in path.driver.fibers:
        m = mats[fid]
        m = m.entries if hasattr(m, "entries") else np.asarray(m, dtype=complex)
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            m = (w[:, None] * m) / w[None, :]
        out[fid] = m
    return out


@dataclass(frozen=True)
class LyapunovSpectrum:
    """Merged exponent blocks (descending), with raw per-direction estimates."""

    exponents: tuple[float, ...]
    multiplicities: tuple[int, ...]
    stderrs: tuple[float, ...]
    raw: tuple[float, ...]
    tail_bound: float
    horizon: int
    tau: float

    def __post_init__(self):
        if len(self.exponents) != len(self.multiplicities):
            raise ValueError("one multiplicity per exponent block")
        if any(b >= a for a, b in zip(self.exponents, self.exponents[1:])):
            raise ValueError("block exponents must be strictly decreasing")

    @property
    def dim(self) -> int:
        return sum(self.multiplicities)

    def with_multiplicity(self) -> tuple[float, ...]:
        """Exponents repeated by multiplicity (gamma_1 >= gamma_2 >= ...)."""
        out = []
        for lam, d in zip(self.exponents, self.multiplicities):
            out.extend([lam] * d)
        return tuple(out)

    def min_gap(self) -> float:
        """Smallest gap between consecutive merged blocks (inf for one block)."""
        gaps = [a - b for a, b in zip(self.exponents, self.exponents[1:])]
        return min(gaps) if gaps else math.inf

    def to_json_dict(self) -> dict:
        return {
            "exponents": list(self.exponents),
            "multiplicities": list(self.multiplicities),
            "stderr": list(self.stderrs),
            "raw": list(self.raw),
            "tail_bound": self.tail_bound,
            "N": self.horizon,
            "tau": self.tau,
        }


def qr_spectrum(
    path: CocyclePath,
    mats: Mapping[str, object],
    steps: int,
    d_max: int,
    tau: float | None = None,
    weights=None,
    start: int = 0,
    seed: int = 0,
    block: int = 1,
    q0: np.ndarray | None = None,
    burn_in: int = 0,
) -> LyapunovSpectrum:
    """Discrete-QR exponents of the cocycle over a window starting at `start`.

    Accumulates log |R_jj| of per-step QR factors of the evolving frame and
    averages; exponents within tau merge into multiplicity blocks (default
    tau = 5/sqrt(steps)).  With block > 1 each step applies `block`
    consecutive fiber matrices, and exponents are per applied step.  The
    initial frame q0 defaults to a seeded random one; `burn_in` steps are
    applied without logging first, which removes the O(1/steps) alignment
    bias of a generic seed frame.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    tilde = _metric_matrices(path, mats, weights)
    dim = tilde[path.driver.fibers[0]].shape[0]
    if not (1 <= d_max <= dim):
        raise ValueError("d_max must lie in [1, ambient dim]")
    if tau is None:
        tau = 5.0 / math.sqrt(steps)

    if q0 is None:
        rng = np.random.default_rng(seed)
        q0 = rng.normal(size=(dim, d_max)) + 1j * rng.normal(size=(dim, d_max))
    q, _ = np.linalg.qr(np.asarray(q0, dtype=complex))
    logs = np.zeros((steps, d_max))
    t = start
    for step in range(-burn_in, steps):
        y = q
        for _ in range(block):
            y = tilde[path.fiber_at(t)] @ y
            t += 1
        q, r = np.linalg.qr(y)
        diag = np.abs(np.diagonal(r))
        if not np.isfinite(diag).all() or np.any(diag == 0.0):
            raise DegenerateCocycle(f"QR diagonal degenerate at step {step}")
        if step >= 0:
            logs[step] = np.log(diag)

    raw = logs.mean(axis=0)
    se = logs.std(axis=0, ddof=1) / math.sqrt(steps) if steps > 1 else np.zeros(d_max)
    order = np.argsort(-raw)
    raw_sorted, se_sorted = raw[order], se[order]

    blocks: list[list[int]] = [[0]]
    for i in range(1, d_max):
        if raw_sorted[i - 1] - raw_sorted[i] <= tau:
            blocks[-1].append(i)
        else:
            blocks.append([i])
    exps = tuple(float(raw_sorted[b].mean()) for b in blocks)
    mults = tuple(len(b) for b in blocks)
    stderrs = tuple(float(se_sorted[b].mean() / math.sqrt(len(b))) for b in blocks)
    tail = float(raw_sorted[-1])
    return LyapunovSpectrum(
        exponents=exps, multiplicities=mults, stderrs=stderrs,
        raw=tuple(float(x) for x in raw_sorted), tail_bound=tail, horizon=steps, tau=float(tau),
    )


@dataclass(frozen=True)
class SplittingState:
    """Computed fast/slow pair at one path time, with convergence evidence."""

    t: int
    fast: Subspace
    slow: Subspace | None
    proj: ObliqueProjection | None
    chart_norm: float
    residual: float
    iterations: int
    contraction_ratio: float

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "d": self.fast.dim,
            "chart_norm": self.chart_norm,
            "residual": self.residual,
            "iterations": self.iterations,
            "contraction_ratio": self.contraction_ratio,
        }


def fast_space_pullforward(
    path: CocyclePath,
    mats: Mapping[str, object],
    t: int,
    d: int,
    m: int,
    v0: Subspace | None = None,
    weights=None,
    seed: int = 0,
) -> tuple[Subspace, float]:
    """Fast space at time t as the orthonormalised image of a pullback seed.

    Pushes a generic d-frame forward from time t - m; returns the space and a
    convergence diagnostic (gap between the results at depth m and m/2).
    Raises RankCollapse if the image degenerates.
    """
    if m < 1:
        raise ValueError("pullback length must be >= 1")
    tilde = _metric_matrices(path, mats, weights)
    dim = tilde[path.driver.fibers[0]].shape[0]
    if v0 is None:
        rng = np.random.default_rng(seed)
        g = rng.normal(size=(dim, d)) + 1j * rng.normal(size=(dim, d))
    else:
        g = v0.metric_basis()
    seed_frame, _ = np.linalg.qr(g)

    def push(depth: int) -> np.ndarray:
        q = seed_frame
        for s in range(t - depth, t):
            q = _orth_or_collapse(tilde[path.fiber_at(s)] @ q)
        return q

    final = _from_metric(push(m), weights)
    half = m // 2
    diagnostic = gap(final, _from_metric(push(half), weights)) if half >= 1 else math.inf
    return final, diagnostic


def _orth_or_collapse(y: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(y)
    diag = np.abs(np.diagonal(r))
    if not np.isfinite(diag).all() or diag.min() <= 1e-300:
        raise RankCollapse("pullback image lost numerical rank")
    return q

def _from_metric(q: np.ndarray, weights) -> Subspace:
    if weights is None:
        return Subspace(basis=q)
    w = np.asarray(weights, dtype=float)
    return Subspace(basis=q / w[:, None], weights=w)


ReferenceFrames = Callable[[int], tuple[Subspace, Subspace]]


def fast_chart_fixpoint(
    path: CocyclePath,
    mats: Mapping[str, object],
    t: int,
    reference: ReferenceFrames,
    block: int = 1,
    max_iters: int = 64,
    tol: float = 1e-10,
    ratio_window: int = 3,
) -> SplittingState:
    """Fast space at time t as the fixed point of the forward graph transform.

    Iteration K pushes the zero chart forward from time t - K*block through
    the cocycle, against the reference frames at each block boundary; the
    charts at t converge geometrically once the transform contracts.  Stops
    when successive charts differ by at most tol; raises NoContraction after
    `ratio_window` consecutive expanding steps.
    """
    blocks = {}

    def block_product(k: int) -> np.ndarray:
        if k not in blocks:
            blocks[k] = product(path, mats, t - k * block, block)
        return blocks[k]

    prev = None
    diffs: list[float] = []
    u = None
    iterations = 0
    for depth in range(1, max_iters + 1):
        e_far, f_far = reference(t - depth * block)
        u = GraphChart(np.zeros((f_far.dim, e_far.dim), dtype=complex), base=e_far, fiber=f_far)
        for k in range(depth, 0, -1):
            e_to, f_to = reference(t - (k - 1) * block)
            u = forward_transform(block_product(k), u, e_to, f_to)
        iterations = depth
        if prev is not None:
            diffs.append(float(np.linalg.norm(u.matrix - prev, 2)))
            if diffs[-1] <= tol:
                break
            if len(diffs) > ratio_window and all(
                diffs[-i] > diffs[-i - 1] for i in range(1, ratio_window + 1)
            ):
                raise NoContraction(f"forward transform expanded for {ratio_window} consecutive depths")
        prev = u.matrix

    ratio = diffs[-1] / diffs[-2] if len(diffs) >= 2 and diffs[-2] > 0 else 0.0
    return SplittingState(
        t=t,
        fast=chart_inverse(u),
        slow=None,
        proj=None,
        chart_norm=u.operator_norm,
        residual=diffs[-1] if diffs else 0.0,
        iterations=iterations,
        contraction_ratio=float(ratio),
    )


def slow_chart_fixpoint(
    path: CocyclePath,
    mats: Mapping[str, object],
    t: int,
    fast: Callable[[int], Subspace],
    reference_slow: Callable[[int], Subspace],
    block: int = 1,
    max_iters: int = 64,
    tol: float = 1e-10,
    ratio_window: int = 3,
) -> SplittingState:
    """Slow space at time t as the fixed point of the backward graph transform.

    Charts live over the frames (reference slow, computed fast); iteration K
    pulls the zero chart back from time t + K*block.  Returns the completed
    splitting with the oblique projection onto the fast space along the slow.
    """
    blocks = {}

    def block_product(k: int) -> np.ndarray:
        if k not in blocks:
            blocks[k] = product(path, mats, t + (k - 1) * block, block)
        return blocks[k]

    prev = None
    diffs: list[float] = []
    v = None
    iterations = 0
    for depth in range(1, max_iters + 1):
        e_far, f_far = fast(t + depth * block), reference_slow(t + depth * block)
        v = GraphChart(np.zeros((e_far.dim, f_far.dim), dtype=complex), base=f_far, fiber=e_far)
        for k in range(depth, 0, -1):
            v = backward_transform(block_product(k), v, fast(t + (k - 1) * block), reference_slow(t + (k - 1) * block))
        iterations = depth
        if prev is not None:
            diffs.append(float(np.linalg.norm(v.matrix - prev, 2)))
            if diffs[-1] <= tol:
                break
            if len(diffs) > ratio_window and all(
                diffs[-i] > diffs[-i - 1] for i in range(1, ratio_window + 1)
            ):
                raise NoContraction(f"backward transform expanded for {ratio_window} consecutive depths")
        prev = v.matrix

    ratio = diffs[-1] / diffs[-2] if len(diffs) >= 2 and diffs[-2] > 0 else 0.0
    fast_t = fast(t)
    slow_t = chart_inverse(v)
    return SplittingState(
        t=t,
        fast=fast_t,
        slow=slow_t,
        proj=oblique_proj(fast_t, slow_t),
        chart_norm=v.operator_norm,
        residual=diffs[-1] if diffs else 0.0,
        iterations=iterations,
        contraction_ratio=float(ratio),
    )


def oseledets_projection(splittings: Sequence[tuple[Subspace, Subspace]], i: int) -> ObliqueProjection:
    """Projection onto the i-th exponent block (1-based) at one time.

    `splittings` lists (fast, slow) pairs of increasing fast dimension; the
    block projection composes the i-th pair's projection with the complement
    of the (i-1)-th, and its rank must equal the block dimension.
    """
    if not (1 <= i <= len(splittings)):
        raise ValueError("block index out of range")
    fast_i, slow_i = splittings[i - 1]
    if slow_i is None:
        if fast_i.dim != fast_i.ambient:
            raise ValueError("missing slow space for a proper block")
        return ObliqueProjection(np.eye(fast_i.ambient, dtype=complex), fast_i.ambient)
    pi_i = oblique_proj(fast_i, slow_i)
    if i == 1:
        return pi_i
    fast_prev, slow_prev = splittings[i - 2]
    pi_prev_compl = oblique_proj(slow_prev, fast_prev)
    matrix = pi_i.matrix @ pi_prev_compl.matrix
    d_i = fast_i.dim - fast_prev.dim
    rank = int(np.sum(np.linalg.svd(matrix, compute_uv=False) > 1e-8))
    if rank != d_i:
        raise NotComplementary(f"block projection rank {rank} != block dimension {d_i}")
    return ObliqueProjection(matrix=matrix, range_dim=d_i)


@dataclass(frozen=True)
class DetExponentEstimate:
    """Volume-growth exponent with its norm/co-norm companions."""

    value: float
    norm_estimate: float
    conorm_estimate: float
    stderr: float
    samples: int
    horizon: int

    def bracket_ok(self) -> bool:
        return self.conorm_estimate <= self.value <= self.norm_estimate


def exponent_via_det(
    path: CocyclePath,
    mats: Mapping[str, object],
    spaces: Mapping[int, Subspace],
    n: int,
    per_sample: bool = False,
):
    """Block exponent as the average volume-growth rate over sampled times.

    For each anchor t the product over [t, t+n) restricted to the supplied
    block space contributes log det / (n d).  The per-sample norm and
    co-norm growth rates bracket the determinant rate exactly (singular
    values); their averages are returned as companion estimates.
    """
    if n < 1:
        raise ValueError("power must be >= 1")
    if not spaces:
        raise ValueError("need at least one sampled block space")
    dets, norms, conorms = [], [], []
    for t in sorted(spaces):
        e = spaces[t]
        p = product(path, mats, t, n)
        img = p @ e.basis
        if e.weights is not None:
            img = e.weights[:, None] * img
        sv = np.linalg.svd(img, compute_uv=False)
        if sv.min() <= 0.0:
            raise DegenerateBlock(f"block image singular at time {t}")
        d = e.dim
        dets.append(float(np.log(sv).sum()) / (n * d))
        norms.append(math.log(float(sv.max())) / n)
        conorms.append(math.log(float(sv.min())) / n)
    dets_arr = np.asarray(dets)
    stderr = float(dets_arr.std(ddof=1) / math.sqrt(len(dets))) if len(dets) > 1 else 0.0
    est = DetExponentEstimate(
        value=float(dets_arr.mean()),
        norm_estimate=float(np.mean(norms)),
        conorm_estimate=float(np.mean(conorms)),
        stderr=stderr,
        samples=len(dets),
        horizon=n,
    )
    if per_sample:
        return est, list(zip(sorted(spaces), dets, norms, conorms))
    return est


@dataclass(frozen=True)
class HyperbolicityCertificate:
    """Fitted uniform-hyperbolicity constants and their gap test."""

    theta: float
    c: float
    eta: float
    horizon: int
    min_gap: float
    feasible: bool
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "theta": self.theta,
            "C": self.c,
            "eta": self.eta,
            "horizon": self.horizon,
            "min_gap": self.min_gap,
            "feasible": self.feasible,
            "pass": self.passed,
        }


def _block_levels(spectrum: LyapunovSpectrum, cum_dims: Sequence[int]) -> list[float]:
    """Exponent levels for nested blocks of cumulative dims, plus the tail rate.

    Level i is the mean of the raw exponents inside block i; the final entry
    is the first raw exponent below the deepest block (the floor the last
    slow space decays at), which requires the spectrum to have been computed
    one direction deeper than the splitting.
    """
    raw = spectrum.raw
    if cum_dims[-1] >= len(raw):
        raise ValueError("spectrum too shallow: compute at least one direction below the deepest block")
    levels = []
    prev = 0
    for c in cum_dims:
        levels.append(float(np.mean(raw[prev:c])))
        prev = c
    levels.append(float(raw[cum_dims[-1]]))
    return levels


def hyperbolicity_certificate(
    path: CocyclePath,
    mats: Mapping[str, object],
    spectrum: LyapunovSpectrum,
    splittings: Sequence[Sequence[SplittingState]],
    horizon: int,
    eta_grid: Sequence[float] | None = None,
) -> HyperbolicityCertificate:
    """Empirical certificate: projection bound plus growth/decay envelopes.

    theta is the largest metric norm among the sampled block projections and
    their complements.  Block exponent levels come from the raw QR exponents
    grouped by the splittings' fast dimensions.  eta_hat is the smallest eta
    admitting a single C with
    ||P^h restricted to slow_i|| <= C exp(h (level_{i+1} + eta))  and
    conorm(P^h on fast_i) >= C exp(h (level_i - eta))  over all sampled
    states and h <= horizon: exact when eta_grid is None (the feasible set
    is an interval, so the infimum has a closed form over constraint pairs),
    otherwise the first feasible grid point.  The certificate passes when
    eta_hat is below half the smallest gap between consecutive levels.  A
    failing certificate is a report, not an error.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not splittings or not all(splittings):
        raise ValueError("need at least one splitting state per block")
    cum_dims = [states[0].fast.dim for states in splittings]
    if any(b <= a for a, b in zip(cum_dims, cum_dims[1:])):
        raise ValueError("block splittings must have strictly increasing fast dimension")
    levels = _block_levels(spectrum, cum_dims)
    min_gap = min(a - b for a, b in zip(levels, levels[1:]))

    weights = splittings[0][0].fast.weights
    tilde = _metric_matrices(path, mats, weights)

    theta = 0.0
    slow_log: list[tuple[int, float, float]] = []  # (h, log growth, level_next)
    fast_log: list[tuple[int, float, float]] = []  # (h, log conorm, level_i)
    for i, states in enumerate(splittings, start=1):
        lam_i, lam_next = levels[i - 1], levels[i]
        for st in states:
            if st.slow is None or st.proj is None:
                raise ValueError("certificate needs completed splittings")
            theta = max(theta, projection_norm(st.proj, weights), projection_norm(st.proj.complement(), weights))
            zf = st.fast.metric_basis()
            zs = st.slow.metric_basis()
            for h in range(1, horizon + 1):
                m = tilde[path.fiber_at(st.t + h - 1)]
                zf = m @ zf
                zs = m @ zs
                sv_f = np.linalg.svd(zf, compute_uv=False)
                sv_s = np.linalg.svd(zs, compute_uv=False)
                if sv_f.min() <= 0.0:
                    raise DegenerateCocycle("fast block collapsed inside certificate horizon")
                # below ~1e-13 the pushed frames are roundoff, not dynamics
                if sv_s.max() > 1e-13:
                    slow_log.append((h, math.log(sv_s.max()), lam_next))
                if sv_f.min() > 1e-13:
                    fast_log.append((h, math.log(sv_f.min()), lam_i))

    lower = [(h, g - h * lam) for h, g, lam in slow_log]  # log C >= a - h eta
    upper = [(h, g - h * lam) for h, g, lam in fast_log]  # log C <= b + h eta
    if eta_grid is None:
        # feasibility is monotone in eta, so the infimum is exact:
        # every pair demands eta >= (a_i - b_j) / (h_i + h_j)
        eta_hat = max(0.0, max((a - b) / (ha + hb) for ha, a in lower for hb, b in upper))
        feasible = True
        c_hat = math.exp(max(a - ha * eta_hat for ha, a in lower))
    else:
        feasible = False
        eta_hat = float(eta_grid[-1])
        c_hat = math.inf
        for eta in eta_grid:
            log_needed = max(a - ha * eta for ha, a in lower)
            log_allowed = min(b + hb * eta for hb, b in upper)
            if log_needed <= log_allowed:
                feasible = True
                eta_hat = float(eta)
                c_hat = math.exp(log_needed)
                break

    passed = feasible and eta_hat < 0.5 * min_gap
    return HyperbolicityCertificate(
        theta=float(theta),
        c=c_hat,
        eta=eta_hat,
        horizon=horizon,
        min_gap=float(min_gap),
        feasible=feasible,
        passed=passed,
    )
