"""Transfer matrices of expanding circle maps and random cocycles over them.

The density-pushforward operator of a map T acts on Fourier coefficients via

    M_jl = integral exp(2*pi*i*l*x) exp(-2*pi*i*j*T(x)) dx,

computed here with the uniform trapezoid rule, which is spectrally accurate
for the band-limited lifts of :mod:`pfcocycle.maps`.  Frequencies |l| > n of
the image are discarded and rows are optionally damped with Cesaro (Fejer)
weights 1 - |j|/(n+1); the result is the finite-rank compression whose
cocycles this package studies.  Randomness over fibers is realised by
drivers whose per-time draws are counter-based, so a two-sided path is
consistent under window extension.
"""

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import AlreadyWeighted, DegenerateCocycle, QuadratureUnderresolved
from .maps import CircleMap
from .spectral import NormOrder, _mix64

ENTRY_TOL = 1e-10
MAGIC_MATRIX = b"PFM1"


@dataclass(frozen=True)
class TransferMatrix:
    """(2n+1) x (2n+1) coefficient-space matrix of one map, rows j, columns l."""

    order: int
    entries: np.ndarray
    fejer: bool
    map_id: str

    def __post_init__(self):
        m = np.ascontiguousarray(self.entries, dtype=complex)
        d = 2 * self.order + 1
        if m.shape != (d, d):
            raise ValueError(f"entries must be {d}x{d}")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return 2 * self.order + 1


def map_id_hash(map_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(map_id.encode(), digest_size=8).digest(), "little")


def default_quadrature(T: CircleMap, n: int) -> int:
    m = T.degree
    return max(1024, 16 * n * m, 8 * (n + m * n + m * max(1, T.max_harmonic)))


def _raw_assemble(T: CircleMap, n: int, q: int) -> np.ndarray:
    x = np.arange(q) / q
    tx = T.lift(x)
    freqs = np.arange(-n, n + 1)
    rows = np.exp(-2j * np.pi * np.outer(tx, freqs))  # q x (2n+1), column j
    cols = np.exp(2j * np.pi * np.outer(x, freqs))  # q x (2n+1), column l
    return (rows.T @ cols) / q


def assemble(
    T: CircleMap,
    n: int,
    q: int | None = None,
    map_id: str | None = None,
    self_test: bool = True,
) -> TransferMatrix:
    """Unweighted transfer matrix at truncation order n.

    The trapezoid rule on q points is certified by a doubling self-test:
    if any entry moves by more than 1e-10 when q doubles, the quadrature
    is declared under-resolved.  Row j = 0 always reproduces delta_0l
    (integral preservation), which the tests pin down.
    """
    if q is None:
        q = default_quadrature(T, n)
    q_min = 8 * (n + T.degree * n + T.degree * max(1, T.max_harmonic))
    if q < q_min:
        raise ValueError(f"quadrature {q} below oversampling floor {q_min}")
    m = _raw_assemble(T, n, q)
    if self_test:
        m2 = _raw_assemble(T, n, 2 * q)
        delta = float(np.abs(m - m2).max())
        if delta > ENTRY_TOL:
            raise QuadratureUnderresolved(f"entries moved by {delta:.2e} under q doubling")
        m = m2
    if map_id is None:
        map_id = f"map[{T.degree};{T.harmonics}]"
    return TransferMatrix(order=n, entries=m, fejer=False, map_id=map_id)


def fejer_weights(n: int) -> np.ndarray:
    """Cesaro row weights 1 - |j|/(n+1) over j = -n..n."""
    j = np.arange(-n, n + 1)
    return 1.0 - np.abs(j) / (n + 1.0)


def fejer_weight(m: TransferMatrix) -> TransferMatrix:
    """Apply Cesaro row damping; weighting twice is an error."""
    if m.fejer:
        raise AlreadyWeighted("matrix rows already carry Fejer weights")
    w = fejer_weights(m.order)
    return TransferMatrix(order=m.order, entries=w[:, None] * m.entries, fejer=True, map_id=m.map_id)


def fejer_defect(n: int, k: int, trunc: int | None = None) -> float:
    """Exact strong-to-weak norm of (Cesaro smoother - identity) on a band.

    The smoother is diagonal in frequency with symbol 1 - |l|/(n+1) inside
    |l| <= n and 0 outside, so the operator norm from order k-1 to order k-2
    is max over the band of |symbol - 1| * w_{k-2}(l) / w_{k-1}(l).  The band
    is |l| <= trunc (default n).  Decays like 1/n: doubling n roughly halves
    the value.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if trunc is None:
        trunc = n
    ell = np.arange(0, trunc + 1)
    damp = np.where(ell <= n, ell / (n + 1.0), 1.0)
    ratio = NormOrder(k - 2).weight(ell) / NormOrder(k - 1).weight(ell)
    return float(np.max(damp * ratio))


@dataclass(frozen=True)
class Driver:
    """Base-dynamics sampler over a finite list of fibers.

    kind "iid": per-time fiber drawn from `weights` with a counter-based
    generator, so the draw at time t is independent of the window.
    kind "rotation": orbit of an irrational rotation, fiber = partition cell
    of frac(t*theta); `cells` are right edges of the partition of [0,1).
    kind "periodic": fixed cycle with t = 0 anchored at cycle position 0.
    """

    kind: str
    fibers: tuple[str, ...]
    seed: int = 0
    weights: tuple[float, ...] | None = None
    theta: float | None = None
    cells: tuple[float, ...] | None = None
    cycle: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.fibers:
            raise ValueError("driver needs at least one fiber")
        if self.kind == "iid":
            w = self.weights or tuple(1.0 / len(self.fibers) for _ in self.fibers)
            if len(w) != len(self.fibers) or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
                raise ValueError("iid weights must be a probability vector over the fibers")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        elif self.kind == "rotation":
            if self.theta is None:
                raise ValueError("rotation driver needs theta")
            cells = self.cells or tuple((i + 1) / len(self.fibers) for i in range(len(self.fibers)))
            if len(cells) != len(self.fibers) or any(b <= a for a, b in zip((0.0,) + cells[:-1], cells)):
                raise ValueError("cells must be increasing right edges, one per fiber")
            if abs(cells[-1] - 1.0) > 1e-12:
                raise ValueError("cells must cover [0, 1)")
            object.__setattr__(self, "cells", tuple(float(c) for c in cells))
        elif self.kind == "periodic":
            cyc = self.cycle if self.cycle is not None else tuple(range(len(self.fibers)))
            if not cyc or any(not (0 <= i < len(self.fibers)) for i in cyc):
                raise ValueError("cycle entries must index the fiber list")
            object.__setattr__(self, "cycle", tuple(int(i) for i in cyc))
        else:
            raise ValueError(f"unknown driver kind {self.kind!r}")

    def fiber_index(self, t: int) -> int:
        if self.kind == "periodic":
            return self.cycle[t % len(self.cycle)]
        if self.kind == "rotation":
            x = math.fmod(t * self.theta, 1.0)
            if x < 0.0:
                x += 1.0
            for i, edge in enumerate(self.cells):
                if x < edge:
                    return i
            return len(self.fibers) - 1
        u = _unit_uniform(self.seed, t)
        acc = 0.0
        for i, w in enumerate(self.weights):
            acc += w
            if u < acc:
                return i
        return len(self.fibers) - 1

    def to_spec(self) -> dict:
        out = {"kind": self.kind, "seed": self.seed, "fibers": list(self.fibers)}
        if self.kind == "iid":
            out["weights"] = list(self.weights)
        elif self.kind == "rotation":
            out["theta"] = self.theta
            out["cells"] = list(self.cells)
        else:
            out["cycle"] = list(self.cycle)
        return out

    @classmethod
    def from_spec(cls, spec: dict) -> "Driver":
        kw = dict(kind=spec["kind"], fibers=tuple(spec["fibers"]), seed=int(spec.get("seed", 0)))
        if "weights" in spec:
            kw["weights"] = tuple(spec["weights"])
        if "theta" in spec:
            kw["theta"] = float(spec["theta"])
        if "cells" in spec:
            kw["cells"] = tuple(spec["cells"])
        if "cycle" in spec:
            kw["cycle"] = tuple(spec["cycle"])
        return cls(**kw)


def _unit_uniform(seed: int, t: int) -> float:
    """Deterministic uniform in [0,1) keyed by (seed, absolute time)."""
    z = _mix64((seed & 0xFFFFFFFFFFFFFFFF) ^ _mix64(t & 0xFFFFFFFFFFFFFFFF))
    return (z >> 11) / float(1 << 53)


@dataclass(frozen=True)
class CocyclePath:
    """Realised fiber indices on the two-sided window [-backward, forward]."""

    driver: Driver
    backward: int
    forward: int
    indices: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.backward < 0 or self.forward < 0:
            raise ValueError("window bounds must be nonnegative")
        idx = tuple(self.driver.fiber_index(t) for t in range(-self.backward, self.forward + 1))
        object.__setattr__(self, "indices", idx)

    def index_at(self, t: int) -> int:
        if not (-self.backward <= t <= self.forward):
            raise IndexError(f"time {t} outside window [{-self.backward}, {self.forward}]")
        return self.indices[t + self.backward]

    def fiber_at(self, t: int) -> str:
        return self.driver.fibers[self.index_at(t)]


def sample_path(driver: Driver, backward: int, forward: int) -> CocyclePath:
    """Deterministic two-sided path; extending the window preserves indices."""
    return CocyclePath(driver=driver, backward=backward, forward=forward)


def _entries(mats: Mapping[str, object], key: str) -> np.ndarray:
    m = mats[key]
    return m.entries if isinstance(m, TransferMatrix) else np.asarray(m, dtype=complex)


@dataclass(frozen=True)
class StabilizedChain:
    """QR-factored cocycle product with per-step log scales.

    The product over the window equals q @ r_k @ ... @ r_1 times
    exp(sum(log_scales)); factors are kept unit-scaled so very long windows
    neither overflow nor underflow.
    """

    q: np.ndarray
    r_factors: tuple[np.ndarray, ...]
    log_scales: tuple[float, ...]

    def to_dense(self) -> np.ndarray:
        acc = np.eye(self.q.shape[0], dtype=complex)
        for r in self.r_factors:
            acc = r @ acc
        return self.q @ acc * math.exp(sum(self.log_scales))

    @property
    def log_scale(self) -> float:
        return float(sum(self.log_scales))


def product(
    path: CocyclePath,
    mats: Mapping[str, object],
    t0: int,
    p: int,
    stabilized: bool = False,
):
    """Cocycle product M(t0+p-1) ... M(t0) over the path window.

    Dense mode multiplies directly; stabilized mode re-orthonormalises after
    every factor and accumulates scales in log space.
    """
    if p < 0:
        raise ValueError("length must be nonnegative")
    if p > 0 and not (-path.backward <= t0 and t0 + p - 1 <= path.forward):
        raise IndexError(f"window [{t0}, {t0 + p}) not covered by path")
    dim = _entries(mats, path.driver.fibers[0]).shape[0]
    if not stabilized:
        acc = np.eye(dim, dtype=complex)
        for t in range(t0, t0 + p):
            acc = _entries(mats, path.fiber_at(t)) @ acc
        if not np.isfinite(acc).all():
            raise DegenerateCocycle("non-finite entries in dense product")
        return acc

    q = np.eye(dim, dtype=complex)
    r_factors: list[np.ndarray] = []
    log_scales: list[float] = []
    for t in range(t0, t0 + p):
        y = _entries(mats, path.fiber_at(t)) @ q
        scale = float(np.abs(y).max())
        if not math.isfinite(scale) or scale == 0.0:
            raise DegenerateCocycle(f"degenerate factor at time {t}")
        q, r = np.linalg.qr(y / scale)
        r_factors.append(r)
        log_scales.append(math.log(scale))
    return StabilizedChain(q=q, r_factors=tuple(r_factors), log_scales=tuple(log_scales))


def save_matrix(path, m: TransferMatrix) -> None:
    """Binary cache: magic, n (u32), fejer flag (u8), map-id hash (u64), row-major complex entries."""
    with open(path, "wb") as fh:
        fh.write(MAGIC_MATRIX)
        fh.write(struct.pack("<IBQ", m.order, int(m.fejer), map_id_hash(m.map_id)))
        fh.write(np.ascontiguousarray(m.entries, dtype="<c16").tobytes())


def load_matrix(path, map_id: str | None = None) -> TransferMatrix:
    """Read a cached matrix; verifies the stored map-id hash when map_id is given."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_MATRIX:
            raise ValueError(f"bad magic {magic!r}")
        n, fejer, stored_hash = struct.unpack("<IBQ", fh.read(13))
        d = 2 * n + 1
        entries = np.frombuffer(fh.read(d * d * 16), dtype="<c16").reshape(d, d)
    if map_id is not None and map_id_hash(map_id) != stored_hash:
        raise ValueError("cache file does not match the requested map id")
    return TransferMatrix(order=n, entries=entries.astype(complex), fejer=bool(fejer), map_id=map_id or f"hash:{stored_hash:016x}")
