"""Experiment orchestration: reference runs, stability sweeps, reports.

A run builds Cesaro-damped transfer matrices for every configured map, drives
them along a sampled two-sided path, and extracts the spectrum, nested
fast/slow splittings at anchor times, and a hyperbolicity certificate.  The
two sweeps rerun that pipeline along an axis (map-perturbation size, or
truncation order against a reference order) and record how exponents,
block projections (in the strong-to-weak operator norm), and slow spaces
move.  Everything is deterministic given the config and seed; emitted JSON
is byte-stable, with wall times kept in a separate timing block.
"""

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import grassmann, oseledets, spectral, transfer
from .errors import ConfigError, PerturbationLeavesClass
from .maps import CircleMap, LyClassParams, ck_distance, perturb, validate
from .spectral import SaksStructure, _mix64


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see from_dict for the JSON schema."""

    maps: tuple[CircleMap, ...]
    ly_params: LyClassParams
    driver_spec: dict
    truncation: int
    quadrature: int | None = None
    spectrum_steps: int = 2000
    d_max: int = 3
    tau: float | None = None
    burn_in: int = 64
    block: int = 2
    tol: float = 1e-10
    max_iters: int = 60
    block_dims: tuple[int, ...] = (1,)
    anchor_count: int = 4
    anchor_stride: int = 5
    pullback: int = 60
    cert_horizon: int = 16
    det_power: int = 12
    epsilons: tuple[float, ...] = ()
    orders: tuple[int, ...] = ()
    order_ref: int | None = None
    perturb_mode: str = "amplitude"
    seed: int = 0
    require_hyperbolic: bool = False
    out_dir: str | None = None

    def __post_init__(self):
        if not self.maps:
            raise ConfigError("at least one map is required")
        for i, m in enumerate(self.maps):
            rep = validate(m, self.ly_params)
            if not rep.ok:
                raise ConfigError(
                    f"map {i} fails class bounds: inf|T'| = {rep.inf_deriv:.4f}, "
                    f"C^k bound = {rep.ck_bound:.4f}"
                )
        if self.truncation < 1:
            raise ConfigError("truncation order must be >= 1")
        if not self.block_dims or any(d <= 0 for d in self.block_dims):
            raise ConfigError("block dims must be a nonempty list of positive integers")
        if self.d_max <= self._cum_dims()[-1]:
            raise ConfigError("d_max must exceed the deepest block dimension by at least one")
        if self.anchor_count < 1 or self.anchor_stride < 1:
            raise ConfigError("need at least one anchor with positive stride")
        if self.orders and (self.order_ref is None or any(b <= a for a, b in zip(self.orders, self.orders[1:]))
                            or self.orders[-1] > self.order_ref):
            raise ConfigError("orders must be strictly increasing and at most order_ref")

    def _cum_dims(self) -> tuple[int, ...]:
        out, acc = [], 0
        for d in self.block_dims:
            acc += d
            out.append(acc)
        return tuple(out)

    @property
    def cumulative_dims(self) -> tuple[int, ...]:
        return self._cum_dims()

    @property
    def anchors(self) -> tuple[int, ...]:
        return tuple(i * self.anchor_stride for i in range(self.anchor_count))

    @property
    def map_ids(self) -> tuple[str, ...]:
        return tuple(f"m{i}" for i in range(len(self.maps)))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            maps = tuple(CircleMap.from_spec(s) for s in d["maps"])
            lp = d["ly_params"]
            params = LyClassParams(k=int(lp["k"]), alpha=float(lp["alpha"]), K=float(lp["K"]))
            spec = d.get("spectrum", {})
            split = d.get("splitting", {})
            sweep = d.get("sweep", {})
            return cls(
                maps=maps,
                ly_params=params,
                driver_spec=dict(d["driver"]),
                truncation=int(d["truncation"]),
                quadrature=d.get("quadrature"),
                spectrum_steps=int(spec.get("steps", 2000)),
                d_max=int(spec.get("d_max", 3)),
                tau=spec.get("tau"),
                burn_in=int(spec.get("burn_in", 64)),
                block=int(split.get("block", 2)),
                tol=float(split.get("tol", 1e-10)),
                max_iters=int(split.get("max_iters", 60)),
                block_dims=tuple(split.get("block_dims", [1])),
                anchor_count=int(split.get("anchor_count", 4)),
                anchor_stride=int(split.get("anchor_stride", 5)),
                pullback=int(split.get("pullback", 60)),
                cert_horizon=int(d.get("cert_horizon", 16)),
                det_power=int(d.get("det_power", 12)),
                epsilons=tuple(sweep.get("epsilons", [])),
                orders=tuple(sweep.get("orders", [])),
                order_ref=sweep.get("order_ref"),
                perturb_mode=sweep.get("mode", "amplitude"),
                seed=int(d.get("seed", 0)),
                require_hyperbolic=bool(d.get("require_hyperbolic", False)),
                out_dir=d.get("output_dir"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def canonical_dict(self) -> dict:
        return {
            "maps": [m.to_spec() for m in self.maps],
            "ly_params": {"k": self.ly_params.k, "alpha": self.ly_params.alpha, "K": self.ly_params.K},
            "driver": self.driver_spec,
            "truncation": self.truncation,
            "quadrature": self.quadrature,
            "spectrum": {"steps": self.spectrum_steps, "d_max": self.d_max, "tau": self.tau,
                         "burn_in": self.burn_in},
            "splitting": {
                "block": self.block,
                "tol": self.tol,
                "max_iters": self.max_iters,
                "block_dims": list(self.block_dims),
                "anchor_count": self.anchor_count,
                "anchor_stride": self.anchor_stride,
                "pullback": self.pullback,
            },
            "cert_horizon": self.cert_horizon,
            "det_power": self.det_power,
            "sweep": {
                "epsilons": list(self.epsilons),
                "orders": list(self.orders),
                "order_ref": self.order_ref,
                "mode": self.perturb_mode,
            },
            "seed": self.seed,
            "require_hyperbolic": self.require_hyperbolic,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.blake2b(blob, digest_size=8).hexdigest()


# ---------------------------------------------------------------- pipeline


def build_matrices(cfg: ExperimentConfig, maps: Sequence[CircleMap] | None = None,
                   order: int | None = None) -> dict[str, transfer.TransferMatrix]:
    """Assemble and Cesaro-damp the transfer matrix of every fiber map."""
    use = cfg.maps if maps is None else maps
    n = cfg.truncation if order is None else order
    out = {}
    for mid, m in zip(cfg.map_ids, use):
        out[mid] = transfer.fejer_weight(transfer.assemble(m, n, cfg.quadrature, map_id=mid))
    return out


def build_path(cfg: ExperimentConfig) -> transfer.CocyclePath:
    driver = transfer.Driver.from_spec({**cfg.driver_spec, "fibers": list(cfg.map_ids)})
    reach = cfg.block * (cfg.max_iters + 1)
    backward = reach + cfg.pullback + cfg.block
    last_anchor = max(cfg.anchors)
    forward = max(
        cfg.spectrum_steps + cfg.burn_in,
        last_anchor + reach + cfg.pullback,
        last_anchor + 2 * cfg.cert_horizon,
        last_anchor + cfg.det_power,
    ) + cfg.block
    return transfer.sample_path(driver, backward, forward)


class FrameOracle:
    """Memoised reference frames per nested dimension: pullforward fast space
    and its metric-orthogonal complement."""

    def __init__(self, path, mats, weights, pullback: int, seed: int):
        self.path, self.mats, self.weights = path, mats, weights
        self.pullback, self.seed = pullback, seed
        self._cache: dict[tuple[int, int], tuple] = {}

    def frames(self, dim: int) -> Callable[[int], tuple[grassmann.Subspace, grassmann.Subspace]]:
        def at(t: int):
            key = (dim, t)
            if key not in self._cache:
                e, _ = oseledets.fast_space_pullforward(
                    self.path, self.mats, t, dim, self.pullback, weights=self.weights, seed=self.seed
                )
                self._cache[key] = (e, grassmann.orthogonal_complement(e))
            return self._cache[key]

        return at


@dataclass(frozen=True)
class RunResult:
    """One cocycle's computed objects at fixed truncation."""

    spectrum: oseledets.LyapunovSpectrum
    states: tuple[tuple[oseledets.SplittingState, ...], ...]  # [block][anchor]
    projections: tuple[tuple[grassmann.ObliqueProjection, ...], ...]
    certificate: oseledets.HyperbolicityCertificate
    order: int

    def to_json_dict(self) -> dict:
        return {
            "order": self.order,
            "spectrum": self.spectrum.to_json_dict(),
            "splittings": [[st.to_json_dict() for st in states] for states in self.states],
            "certificate": self.certificate.to_json_dict(),
        }


def run_cocycle(
    cfg: ExperimentConfig,
    mats: dict[str, transfer.TransferMatrix],
    path: transfer.CocyclePath,
    frames_oracle: FrameOracle | None = None,
) -> RunResult:
    """Spectrum, nested anchor splittings, block projections, certificate.

    When no frame oracle is supplied the run bootstraps its own reference
    frames by pullforward; sweeps pass the reference run's oracle so that
    perturbed spaces are charted against the unperturbed frames.
    """
    order = next(iter(mats.values())).order
    saks = SaksStructure(cfg.ly_params.k)
    weights = saks.strong.weights(order)
    raw = {k: v.entries for k, v in mats.items()}

    spectrum = oseledets.qr_spectrum(
        path, raw, steps=cfg.spectrum_steps, d_max=cfg.d_max, tau=cfg.tau,
        weights=weights, seed=cfg.seed, burn_in=cfg.burn_in,
    )

    if frames_oracle is None:
        frames_oracle = FrameOracle(path, raw, weights, cfg.pullback, seed=_mix64(cfg.seed ^ 0x5EED))

    states_by_block = []
    projections_by_block = []
    for dim in cfg.cumulative_dims:
        ref = frames_oracle.frames(dim)
        block_states = []
        for t in cfg.anchors:
            fast_state = oseledets.fast_chart_fixpoint(
                path, raw, t, ref, block=cfg.block, max_iters=cfg.max_iters, tol=cfg.tol
            )
            fast_cache = {t: fast_state.fast}

            def fast_at(s: int, _cache=fast_cache, _ref=ref):
                if s not in _cache:
                    _cache[s] = oseledets.fast_chart_fixpoint(
                        path, raw, s, _ref, block=cfg.block, max_iters=cfg.max_iters, tol=cfg.tol
                    ).fast
                return _cache[s]

            slow_state = oseledets.slow_chart_fixpoint(
                path, raw, t, fast_at, lambda s, _ref=ref: _ref(s)[1],
                block=cfg.block, max_iters=cfg.max_iters, tol=cfg.tol,
            )
            merged = oseledets.SplittingState(
                t=t, fast=fast_state.fast, slow=slow_state.slow, proj=slow_state.proj,
                chart_norm=max(fast_state.chart_norm, slow_state.chart_norm),
                residual=max(fast_state.residual, slow_state.residual),
                iterations=max(fast_state.iterations, slow_state.iterations),
                contraction_ratio=max(fast_state.contraction_ratio, slow_state.contraction_ratio),
            )
            block_states.append(merged)
        states_by_block.append(tuple(block_states))

    for i in range(1, len(cfg.cumulative_dims) + 1):
        projs = []
        for a, t in enumerate(cfg.anchors):
            pairs = [(states_by_block[j][a].fast, states_by_block[j][a].slow) for j in range(i)]
            projs.append(oseledets.oseledets_projection(pairs, i))
        projections_by_block.append(tuple(projs))

    certificate = oseledets.hyperbolicity_certificate(
        path, raw, spectrum, states_by_block, horizon=cfg.cert_horizon
    )
    return RunResult(
        spectrum=spectrum,
        states=tuple(states_by_block),
        projections=tuple(projections_by_block),
        certificate=certificate,
        order=order,
    )


@dataclass(frozen=True)
class ReferenceBundle:
    config: ExperimentConfig
    result: RunResult
    mats: dict[str, transfer.TransferMatrix]
    path: transfer.CocyclePath
    frames_oracle: FrameOracle
    det_estimate: oseledets.DetExponentEstimate

    def to_json_dict(self) -> dict:
        return {
            "config_hash": self.config.config_hash(),
            "metadata": run_metadata(self.config),
            **self.result.to_json_dict(),
            "det_exponent": {
                "value": self.det_estimate.value,
                "norm": self.det_estimate.norm_estimate,
                "conorm": self.det_estimate.conorm_estimate,
                "stderr": self.det_estimate.stderr,
                "samples": self.det_estimate.samples,
                "power": self.det_estimate.horizon,
            },
        }


def run_metadata(cfg: ExperimentConfig) -> dict:
    saks = SaksStructure(cfg.ly_params.k)
    return {
        **saks.metadata(),
        "inner_product": "diagonal weighted-l2, weights = strong-norm weights squared",
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "map_family": "trigonometric-polynomial lifts",
    }


def run_reference(cfg: ExperimentConfig) -> ReferenceBundle:
    """Unperturbed cocycle: spectrum, splittings, certificate, det exponent.

    A failing certificate is reported, not raised; the CLI maps it to its
    own exit code when the config demands hyperbolicity.
    """
    mats = build_matrices(cfg)
    path = build_path(cfg)
    saks = SaksStructure(cfg.ly_params.k)
    weights = saks.strong.weights(cfg.truncation)
    raw = {k: v.entries for k, v in mats.items()}
    oracle = FrameOracle(path, raw, weights, cfg.pullback, seed=_mix64(cfg.seed ^ 0x5EED))
    result = run_cocycle(cfg, mats, path, oracle)
    top_spaces = {st.t: st.fast for st in result.states[0]}
    det_est = oseledets.exponent_via_det(path, raw, top_spaces, cfg.det_power)
    return ReferenceBundle(config=cfg, result=result, mats=mats, path=path,
                           frames_oracle=oracle, det_estimate=det_est)


# ------------------------------------------------------------------ sweeps


@dataclass(frozen=True)
class SweepRecord:
    """Differences of one sweep point against the reference run."""

    axis: float
    gamma_diffs: tuple[float, ...]
    proj_tnorm_diffs: tuple[float, ...]
    slow_gap: float
    theta: float
    eta: float
    cert_passed: bool
    wall_ms: float
    skipped: bool = False
    reason: str = ""
    map_tnorm_diff: float = math.nan
    map_ck_distance: float = math.nan

    def to_json_dict(self) -> dict:
        out = {
            "axis": self.axis,
            "gamma_diffs": list(self.gamma_diffs),
            "proj_tnorm_diffs": list(self.proj_tnorm_diffs),
            "slow_gap": self.slow_gap,
            "theta": self.theta,
            "eta": self.eta,
            "pass": self.cert_passed,
            "skipped": self.skipped,
            "reason": self.reason,
        }
        if not math.isnan(self.map_tnorm_diff):
            out["map_tnorm_diff"] = self.map_tnorm_diff
            out["map_ck_distance"] = self.map_ck_distance
        return out


def _compare_runs(cfg: ExperimentConfig, ref: RunResult, new: RunResult,
                  saks: SaksStructure) -> tuple[tuple[float, ...], tuple[float, ...], float]:
    """Exponent, projection, and slow-space differences of two runs.

    Exponents are compared raw index by raw index (descending order), over
    every computed direction.  Projections and slow spaces of a lower-order
    run are zero-padded into the reference band first.
    """
    gamma = tuple(abs(a - b) for a, b in zip(ref.spectrum.raw, new.spectrum.raw))

    n_ref = ref.order
    weights = saks.strong.weights(n_ref)
    proj_diffs = []
    for block in range(len(cfg.cumulative_dims)):
        worst = 0.0
        for a in range(len(cfg.anchors)):
            p_ref = ref.projections[block][a].matrix
            p_new = _pad_matrix(new.projections[block][a].matrix, new.order, n_ref)
            worst = max(worst, spectral.triple_norm(p_ref - p_new, saks))
        proj_diffs.append(worst)

    slow_gap = 0.0
    last = len(cfg.cumulative_dims) - 1
    for a in range(len(cfg.anchors)):
        s_ref = ref.states[last][a].slow
        s_new = _pad_slow(new.states[last][a].slow, new.order, n_ref, weights)
        slow_gap = max(slow_gap, grassmann.hausdorff(s_ref, s_new))
    return gamma, tuple(proj_diffs), slow_gap


def _pad_matrix(m: np.ndarray, order: int, order_ref: int) -> np.ndarray:
    if order == order_ref:
        return m
    d_ref = 2 * order_ref + 1
    out = np.zeros((d_ref, d_ref), dtype=complex)
    off = order_ref - order
    out[off : off + m.shape[0], off : off + m.shape[1]] = m
    return out


def _pad_slow(s: grassmann.Subspace, order: int, order_ref: int, weights) -> grassmann.Subspace:
    """Embed a slow space into a wider band, adjoining the silent high modes."""
    if order == order_ref:
        return s
    d_ref, off = 2 * order_ref + 1, order_ref - order
    cols = []
    for i in range(s.dim):
        v = np.zeros(d_ref, dtype=complex)
        v[off : off + s.ambient] = s.basis[:, i]
        cols.append(v)
    for j in list(range(off)) + list(range(off + s.ambient, d_ref)):
        e = np.zeros(d_ref, dtype=complex)
        e[j] = 1.0
        cols.append(e)
    return grassmann.Subspace.from_spanning(np.column_stack(cols), weights=weights)


def sweep_perturbation(cfg: ExperimentConfig, reference: ReferenceBundle | None = None,
                       threads: int = 1) -> tuple[ReferenceBundle, list[SweepRecord], dict]:
    """Perturb every fiber map at each epsilon and diff against the reference.

    Perturbed splittings are charted against the reference frames.  Points
    failing class validation are recorded as skipped.  The returned analysis
    holds Spearman rank correlations of each difference family against the
    axis, plus the Lipschitz band max/min of map-distance to operator-distance
    ratios.
    """
    if not cfg.epsilons:
        raise ConfigError("perturbation sweep needs a nonempty epsilon list")
    ref = reference or run_reference(cfg)
    saks = SaksStructure(cfg.ly_params.k)

    def one_point(item) -> SweepRecord:
        idx, eps = item
        t0 = time.perf_counter()
        if eps == 0.0:
            new = run_cocycle(cfg, ref.mats, ref.path, ref.frames_oracle)
            gamma, projd, sgap = _compare_runs(cfg, ref.result, new, saks)
            return SweepRecord(axis=eps, gamma_diffs=gamma, proj_tnorm_diffs=projd, slow_gap=sgap,
                               theta=new.certificate.theta, eta=new.certificate.eta,
                               cert_passed=new.certificate.passed,
                               wall_ms=1e3 * (time.perf_counter() - t0),
                               map_tnorm_diff=0.0, map_ck_distance=0.0)
        try:
            pmaps = [
                perturb(m, eps, cfg.perturb_mode, cfg.ly_params,
                        seed=_mix64(cfg.seed ^ (997 * idx + 31 * i + 1)))
                for i, m in enumerate(cfg.maps)
            ]
        except PerturbationLeavesClass as exc:
            return SweepRecord(axis=eps, gamma_diffs=(), proj_tnorm_diffs=(), slow_gap=math.nan,
                               theta=math.nan, eta=math.nan, cert_passed=False,
                               wall_ms=1e3 * (time.perf_counter() - t0), skipped=True, reason=str(exc))
        pmats = build_matrices(cfg, maps=pmaps)
        new = run_cocycle(cfg, pmats, ref.path, ref.frames_oracle)
        gamma, projd, sgap = _compare_runs(cfg, ref.result, new, saks)
        tnorm_d = max(
            spectral.triple_norm(pmats[mid].entries - ref.mats[mid].entries, saks)
            for mid in cfg.map_ids
        )
        ck_d = max(ck_distance(a, b, cfg.ly_params.k - 1) for a, b in zip(cfg.maps, pmaps))
        return SweepRecord(axis=eps, gamma_diffs=gamma, proj_tnorm_diffs=projd, slow_gap=sgap,
                           theta=new.certificate.theta, eta=new.certificate.eta,
                           cert_passed=new.certificate.passed,
                           wall_ms=1e3 * (time.perf_counter() - t0),
                           map_tnorm_diff=tnorm_d, map_ck_distance=ck_d)

    items = list(enumerate(cfg.epsilons))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one_point, items))
    else:
        records = [one_point(it) for it in items]

    analysis = analyze_perturbation(records)
    return ref, records, analysis


def analyze_perturbation(records: Sequence[SweepRecord]) -> dict:
    live = [r for r in records if not r.skipped and r.axis > 0]
    out: dict = {"points": len(live), "skipped": sum(r.skipped for r in records)}
    if len(live) >= 3:
        eps = [r.axis for r in live]
        gamma_top = [max(r.gamma_diffs) for r in live]
        proj_top = [max(r.proj_tnorm_diffs) for r in live]
        out["spearman_gamma"] = float(stats.spearmanr(eps, gamma_top)[0])
        out["spearman_proj"] = float(stats.spearmanr(eps, proj_top)[0])
        out["spearman_slow_gap"] = float(stats.spearmanr(eps, [r.slow_gap for r in live])[0])
    ratios = [r.map_tnorm_diff / r.map_ck_distance for r in live if r.map_ck_distance > 0]
    if ratios:
        out["lipschitz_ratio_max"] = max(ratios)
        out["lipschitz_ratio_min"] = min(ratios)
    return out


def sweep_fejer(cfg: ExperimentConfig, threads: int = 1) -> tuple[ReferenceBundle, list[SweepRecord], dict]:
    """Rerun the cocycle at each truncation order against the reference order.

    The reference is the run at order_ref (the largest order); lower-order
    results are zero-padded into its band before comparison, so the report is
    a self-convergence statement, not an error against the untruncated
    operator.
    """
    if not cfg.orders or cfg.order_ref is None:
        raise ConfigError("truncation sweep needs orders and order_ref")
    ref_cfg = _with_truncation(cfg, cfg.order_ref)
    ref = run_reference(ref_cfg)

    def one_point(n: int) -> SweepRecord:
        t0 = time.perf_counter()
        sub_cfg = _with_truncation(cfg, n)
        mats = build_matrices(sub_cfg)
        path = build_path(sub_cfg)
        new = run_cocycle(sub_cfg, mats, path)
        gamma, projd, sgap = _compare_runs(ref_cfg, ref.result, new, SaksStructure(cfg.ly_params.k))
        return SweepRecord(axis=float(n), gamma_diffs=gamma, proj_tnorm_diffs=projd, slow_gap=sgap,
                           theta=new.certificate.theta, eta=new.certificate.eta,
                           cert_passed=new.certificate.passed,
                           wall_ms=1e3 * (time.perf_counter() - t0))

    orders = list(cfg.orders)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one_point, orders))
    else:
        records = [one_point(n) for n in orders]

    analysis = {
        "order_ref": cfg.order_ref,
        "comparison": "self-convergence",
        "gamma_top_by_order": {str(int(r.axis)): max(r.gamma_diffs) for r in records},
        "stderr_floor": max(ref.result.spectrum.stderrs),
        "defect_halving": {
            str(n): transfer.fejer_defect(2 * n, cfg.ly_params.k, 2 * n)
            / transfer.fejer_defect(n, cfg.ly_params.k, n)
            for n in orders
        },
    }
    return ref, records, analysis


def _with_truncation(cfg: ExperimentConfig, n: int) -> ExperimentConfig:
    d = cfg.canonical_dict()
    d["truncation"] = n
    return ExperimentConfig.from_dict(d)


# ---------------------------------------------------------------- check-ly


@dataclass(frozen=True)
class LyReport:
    fit: spectral.LyFitResult
    r: float
    powers: tuple[int, ...]
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "r": self.r,
            "R": self.fit.big_r,
            "pass": self.passed,
            "per_power": [
                {"power": f.power, "C1": f.c1, "C2": f.c2, "ok": f.ok, "margin": f.worst_margin}
                for f in self.fit.fits
            ],
        }


def check_ly(cfg: ExperimentConfig, max_power: int = 8, samples: int = 32) -> LyReport:
    """Fit uniform growth constants at r = alpha^(k-1) across powers 1..8.

    Tests every fiber matrix's powers plus the path product at each power;
    passes when a single (r, R) admits finite fitted constants everywhere.
    """
    mats = build_matrices(cfg)
    path = build_path(cfg)
    saks = SaksStructure(cfg.ly_params.k)
    raw = {k: v.entries for k, v in mats.items()}
    by_power: dict[int, list[np.ndarray]] = {}
    for p in range(1, max_power + 1):
        group = [np.linalg.matrix_power(m, p) for m in raw.values()]
        group.append(transfer.product(path, raw, 0, p))
        by_power[p] = group
    r = cfg.ly_params.alpha ** (cfg.ly_params.k - 1)
    fit = spectral.ly_fit(by_power, saks, r_grid=[r], big_r_grid=[1.0, 2.0],
                          samples=samples, seed=cfg.seed)
    return LyReport(fit=fit, r=r, powers=tuple(range(1, max_power + 1)), passed=fit.ok)


# ------------------------------------------------------------------- emit


def emit(records: Sequence[SweepRecord], out_dir, cfg: ExperimentConfig,
         analysis: dict, basename: str = "sweep") -> dict[str, Path]:
    """Write the delimited table and its JSON mirror (timing kept separate).

    The JSON file is byte-stable for a fixed config and seed; wall times go
    to <basename>_timing.json so rerun comparisons can diff the results file
    directly.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d_total = cfg.d_max
    n_blocks = len(cfg.cumulative_dims)

    csv_path = out / f"{basename}.csv"
    header = (
        ["axis"]
        + [f"gamma_diff_{i + 1}" for i in range(d_total)]
        + [f"proj_tnorm_diff_{i + 1}" for i in range(n_blocks)]
        + ["slow_gap", "theta", "eta", "pass", "wall_ms"]
    )
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in records:
            gam = list(r.gamma_diffs) + [math.nan] * (d_total - len(r.gamma_diffs))
            prj = list(r.proj_tnorm_diffs) + [math.nan] * (n_blocks - len(r.proj_tnorm_diffs))
            writer.writerow(
                [r.axis] + [repr(x) for x in gam] + [repr(x) for x in prj]
                + [repr(r.slow_gap), repr(r.theta), repr(r.eta), int(r.cert_passed), f"{r.wall_ms:.3f}"]
            )

    json_path = out / f"{basename}.json"
    payload = {
        "metadata": run_metadata(cfg),
        "analysis": analysis,
        "records": [r.to_json_dict() for r in records],
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")

    timing_path = out / f"{basename}_timing.json"
    with open(timing_path, "w") as fh:
        json.dump({"wall_ms": [r.wall_ms for r in records]}, fh, indent=1)
        fh.write("\n")
    return {"csv": csv_path, "json": json_path, "timing": timing_path}


def write_reference(bundle: ReferenceBundle, out_dir) -> dict[str, Path]:
    """Persist the reference bundle: JSON summary plus subspace basis files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = bundle.to_json_dict()
    for b, states in enumerate(bundle.result.states, start=1):
        for st in states:
            ref = f"splitting_b{b}_t{st.t}"
            grassmann.save_subspace(out / f"{ref}_fast.sub", st.fast)
            if st.slow is not None:
                grassmann.save_subspace(out / f"{ref}_slow.sub", st.slow)
            for entry in doc["splittings"][b - 1]:
                if entry["t"] == st.t:
                    entry["basis_ref"] = ref
    path = out / "reference.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return {"json": path}
