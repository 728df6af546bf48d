"""Truncated Fourier representation of circle functions and the two-norm machinery.

Functions on the circle are held as coefficient vectors c_l, l = -n..n, with
c_l = integral of f(x) exp(-2*pi*i*l*x).  Smoothness is measured by weighted
l^1 norms

    ||f||_s = sum_l w_s(l) |c_l|,     w_s(l) = 1 + (2*pi*|l|)^s  (s >= 1),

with w_0 identically one (the plain coefficient sum).  A pair of consecutive
orders (s, s-1) plays the role of a strong/weak norm pair; the operator norm
from the strong to the weak norm ("triple norm") is the metric in which
transfer matrices depend continuously on the underlying map.  All operator
norms between these weighted-l^1 norms are exact column maxima, not bounds.
"""

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class NormOrder:
    """Smoothness order s of a weighted coefficient norm."""

    s: int

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("norm order must be nonnegative")

    def weight(self, ell):
        """w_s(l); accepts scalars or arrays of frequencies."""
        ell = np.asarray(ell)
        if self.s == 0:
            return np.ones_like(ell, dtype=float)
        return 1.0 + (TWO_PI * np.abs(ell)) ** self.s

    def weights(self, n: int) -> np.ndarray:
        """Weight vector over the frequency band l = -n..n."""
        return self.weight(np.arange(-n, n + 1))


@dataclass(frozen=True)
class SaksStructure:
    """Strong/weak norm pair at smoothness k: orders k-1 and k-2."""

    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("smoothness k must be >= 2")

    @property
    def strong(self) -> NormOrder:
        return NormOrder(self.k - 1)

    @property
    def weak(self) -> NormOrder:
        return NormOrder(self.k - 2)

    def metadata(self) -> dict:
        return {
            "strong_order": self.k - 1,
            "weak_order": self.k - 2,
            "weight_rule": "1+(2*pi*abs(l))^s",
        }


@dataclass(frozen=True)
class FourierVector:
    """Coefficient vector c_l over l = -n..n; position l+n holds c_l."""

    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError("coefficient vector must have odd length 2n+1")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        if self.real:
            sym = np.abs(c - np.conj(c[::-1])).max()
            if sym > 1e-12:
                raise ValueError(f"real-tagged vector violates c_-l = conj(c_l) by {sym:.2e}")

    @property
    def order(self) -> int:
        return (self.coeffs.size - 1) // 2

    def coeff(self, ell: int) -> complex:
        n = self.order
        if abs(ell) > n:
            return 0.0 + 0.0j
        return complex(self.coeffs[ell + n])

    def padded(self, n_new: int) -> "FourierVector":
        """Zero-pad into a wider frequency band."""
        n = self.order
        if n_new < n:
            raise ValueError("padding must not shrink the band")
        c = np.zeros(2 * n_new + 1, dtype=complex)
        c[n_new - n : n_new + n + 1] = self.coeffs
        return FourierVector(c, real=self.real)


def norm(f: FourierVector, order: NormOrder) -> float:
    """Weighted-l^1 norm sum_l w_s(l)|c_l|."""
    return float(order.weights(f.order) @ np.abs(f.coeffs))


def _square(a) -> np.ndarray:
    entries = getattr(a, "entries", a)
    m = np.asarray(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 1:
        raise ValueError("expected a square matrix over a band l = -n..n")
    return m


def op_norm(a, order_in: NormOrder, order_out: NormOrder) -> float:
    """Exact operator norm between weighted-l^1 norms.

    For diagonal weights the norm of A is attained at a coordinate vector:
    max over columns l of sum_j w_out(j)|A_jl| / w_in(l).
    """
    m = _square(a)
    n = (m.shape[0] - 1) // 2
    w_in = order_in.weights(n)
    w_out = order_out.weights(n)
    col_sums = w_out @ np.abs(m)
    return float(np.max(col_sums / w_in))


def triple_norm(a, saks: SaksStructure) -> float:
    """Strong-to-weak operator norm; always <= op_norm(a, strong, strong)."""
    return op_norm(a, saks.strong, saks.weak)


_MASK64 = (1 << 64) - 1


def _mix64(z: int) -> int:
    """splitmix64 finaliser; the package's portable counter-based generator."""
    z = int(z) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def unit_strong_samples(n: int, order: NormOrder, count: int, seed: int) -> list[FourierVector]:
    """Seeded random vectors, coefficients iid uniform on the unit disc, normalised.

    Sample j is drawn from a generator keyed by seed XOR j, so parallel
    evaluation of disjoint sample ranges reproduces the serial sequence.
    """
    out = []
    for j in range(count):
        rng = np.random.default_rng(_mix64((seed & _MASK64) ^ j))
        r = np.sqrt(rng.uniform(size=2 * n + 1))
        th = rng.uniform(0.0, TWO_PI, size=2 * n + 1)
        c = r * np.exp(1j * th)
        f = FourierVector(c)
        s = norm(f, order)
        out.append(FourierVector(c / s))
    return out


@dataclass(frozen=True)
class LyPowerFit:
    """Fitted constants for one product power."""

    power: int
    c1: float
    c2: float
    ok: bool
    worst_margin: float


@dataclass(frozen=True)
class LyFitResult:
    r: float
    big_r: float
    fits: tuple[LyPowerFit, ...]
    ok: bool

    def constants(self) -> dict[int, tuple[float, float]]:
        return {f.power: (f.c1, f.c2) for f in self.fits}


def ly_fit(
    mats_by_power: Mapping[int, Sequence],
    saks: SaksStructure,
    r_grid: Sequence[float],
    big_r_grid: Sequence[float],
    c1_grid: Sequence[float] | None = None,
    c2_grid: Sequence[float] | None = None,
    samples: int = 32,
    seed: int = 0,
) -> LyFitResult:
    """Fit per-power constants in  strong(A_p f) <= C1 r^p + C2 R^p weak(f).

    The inequality is tested on `samples` random unit-strong-norm vectors per
    power.  (r, R) pairs are scanned in grid order; the first pair for which
    every power admits constants on the C grids is reported, with the
    smallest feasible (C2, C1) in lexicographic order.  If no pair works the
    result carries ok=False (a violation report, not an exception).
    """
    if not mats_by_power:
        raise ValueError("empty matrix sequence")
    if samples < 1:
        raise ValueError("sample count must be >= 1")
    if c1_grid is None:
        c1_grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
    if c2_grid is None:
        c2_grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]

    powers = sorted(mats_by_power)
    mats = {p: [_square(a) for a in mats_by_power[p]] for p in powers}
    n = (next(iter(mats[powers[0]])).shape[0] - 1) // 2
    fs = unit_strong_samples(n, saks.strong, samples, seed)

    # strong(A f) and weak(f) for every (power, matrix, sample)
    measured: dict[int, list[tuple[float, float]]] = {}
    for p in powers:
        rows = []
        for a in mats[p]:
            for f in fs:
                img = FourierVector(a @ f.coeffs)
                rows.append((norm(img, saks.strong), norm(f, saks.weak)))
        measured[p] = rows

    best: LyFitResult | None = None
    for r in r_grid:
        for big_r in big_r_grid:
            fits = []
            all_ok = True
            for p in powers:
                fit = _fit_one_power(p, measured[p], r, big_r, c1_grid, c2_grid)
                fits.append(fit)
                all_ok = all_ok and fit.ok
            result = LyFitResult(r=float(r), big_r=float(big_r), fits=tuple(fits), ok=all_ok)
            if all_ok:
                return result
            best = result
    assert best is not None
    return best


def _fit_one_power(p, rows, r, big_r, c1_grid, c2_grid) -> LyPowerFit:
    rp, big_rp = r**p, big_r**p
    for c2 in sorted(c2_grid):
        for c1 in sorted(c1_grid):
            bound = c1 * rp
            if all(s <= bound + c2 * big_rp * w + 1e-12 for s, w in rows):
                margin = min(bound + c2 * big_rp * w - s for s, w in rows)
                return LyPowerFit(power=p, c1=float(c1), c2=float(c2), ok=True, worst_margin=float(margin))
    c1, c2 = max(c1_grid), max(c2_grid)
    deficit = max(s - c1 * rp - c2 * big_rp * w for s, w in rows)
    return LyPowerFit(power=p, c1=float(c1), c2=float(c2), ok=False, worst_margin=float(-deficit))


def ess_radius_bound(r_seq: Sequence[float]) -> float:
    """min over n of r_n^(1/n), a finite-sample stand-in for liminf r_n^(1/n).

    r_seq[i] is the constant at power n = i+1.
    """
    if len(r_seq) == 0:
        raise ValueError("empty growth-constant sequence")
    vals = [float(r) ** (1.0 / (i + 1)) for i, r in enumerate(r_seq)]
    return min(vals)


def equicont_check(
    mats: Sequence,
    saks: SaksStructure,
    eta_grid: Sequence[float],
    samples: int = 32,
    seed: int = 0,
) -> dict[float, float]:
    """Smallest sampled C_eta with  weak(A f) <= eta strong(f) + C_eta weak(f).

    Reported per eta, maximised over all matrices and random unit-strong
    samples.  Zero matrices give C_eta = 0; the value is a sampled lower
    bound on the true constant.
    """
    ms = [_square(a) for a in mats]
    if not ms:
        raise ValueError("empty matrix set")
    n = (ms[0].shape[0] - 1) // 2
    fs = unit_strong_samples(n, saks.strong, samples, seed)
    table: dict[float, float] = {}
    for eta in eta_grid:
        c_eta = 0.0
        for a in ms:
            for f in fs:
                img = FourierVector(a @ f.coeffs)
                lhs = norm(img, saks.weak)
                wf = norm(f, saks.weak)
                need = (lhs - eta * norm(f, saks.strong)) / wf
                c_eta = max(c_eta, need)
        table[float(eta)] = max(0.0, c_eta)
    return table
