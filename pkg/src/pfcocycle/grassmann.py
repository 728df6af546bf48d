"""Numerical Grassmannian: oblique projections, graph charts and transforms, gaps.

Subspaces of C^D carry an optional diagonal metric: the inner product is
<u, v> = sum_i w_i^2 u_i conj(v_i), so a vector's length is the Euclidean
length of w*u.  Bases are stored orthonormal in that metric.  Charts express
a subspace E' complementary to F as a coefficient matrix U : E -> F with
E' = (Id + U)(E); the induced action of an operator S on charts is

    forward   S*U  = F2-part of S(Id+U)  composed with  (E2-part)^(-1),
    backward  S_*U = G^(-1) (U b_F - a_F)  with  G = a_E - U b_E,

where (a, b) are the (E2, F2)-components of S restricted to E1 resp. F1.
Transversality failures raise rather than return garbage; the singular-value
cliff is TRANSVERSALITY_TOL.
"""

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FrameMismatch, NotComplementary, NotTransverse, RankCollapse, TransformSingular

TRANSVERSALITY_TOL = 1e-10
ORTHONORMALITY_TOL = 1e-12
MAGIC_SUBSPACE = b"SUB1"


def _as_weights(weights, dim: int):
    if weights is None:
        return None
    w = np.asarray(weights, dtype=float)
    if w.shape != (dim,) or np.any(w <= 0):
        raise ValueError("weights must be a positive vector of the ambient dimension")
    return w


def _same_weights(a, b) -> bool:
    if a is None and b is None:
        return True
    if a is None or b is None:
        return False
    return a.shape == b.shape and bool(np.array_equal(a, b))


@dataclass(frozen=True)
class Subspace:
    """D x d basis with columns orthonormal in the (optionally weighted) metric."""

    basis: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        b = np.ascontiguousarray(self.basis, dtype=complex)
        if b.ndim != 2 or not (1 <= b.shape[1] <= b.shape[0]):
            raise ValueError("basis must be D x d with 1 <= d <= D")
        w = _as_weights(self.weights, b.shape[0])
        g = b if w is None else w[:, None] * b
        residual = np.abs(g.conj().T @ g - np.eye(b.shape[1])).max()
        if residual > ORTHONORMALITY_TOL:
            raise ValueError(f"basis not orthonormal in the metric (residual {residual:.2e})")
        b.flags.writeable = False
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "weights", w)

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def metric_basis(self) -> np.ndarray:
        """Basis in metric coordinates (Euclidean-orthonormal columns)."""
        if self.weights is None:
            return self.basis
        return self.weights[:, None] * self.basis

    @classmethod
    def from_spanning(cls, vectors: np.ndarray, weights=None) -> "Subspace":
        v = np.atleast_2d(np.asarray(vectors, dtype=complex))
        if v.shape[0] < v.shape[1]:
            raise ValueError("spanning set must be D x d")
        w = _as_weights(weights, v.shape[0])
        g = v if w is None else w[:, None] * v
        q, r = np.linalg.qr(g)
        sv = np.abs(np.diagonal(r))
        if sv.min() <= TRANSVERSALITY_TOL * max(1.0, sv.max()):
            raise RankCollapse(f"spanning set numerically rank deficient (ratio {sv.min():.2e})")
        b = q if w is None else q / w[:, None]
        return cls(basis=b, weights=w)


def _check_geometry(*spaces: Subspace):
    first = spaces[0]
    for s in spaces[1:]:
        if s.ambient != first.ambient or not _same_weights(s.weights, first.weights):
            raise FrameMismatch("subspaces live in different geometries")


@dataclass(frozen=True)
class ObliqueProjection:
    """Idempotent matrix with prescribed range and kernel, in ambient coordinates."""

    matrix: np.ndarray
    range_dim: int

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=complex)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def complement(self) -> "ObliqueProjection":
        return ObliqueProjection(np.eye(self.matrix.shape[0]) - self.matrix, self.matrix.shape[0] - self.range_dim)


@dataclass(frozen=True)
class GraphChart:
    """Coefficients of an operator base -> fiber; represents (Id + U)(base)."""

    matrix: np.ndarray
    base: Subspace
    fiber: Subspace

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=complex)
        if m.shape != (self.fiber.dim, self.base.dim):
            raise ValueError("chart matrix must be dim(fiber) x dim(base)")
        if not np.isfinite(m).all():
            raise ValueError("chart matrix has non-finite entries")
        _check_geometry(self.base, self.fiber)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def operator_norm(self) -> float:
        """Metric operator norm; exact because both frame bases are orthonormal."""
        if self.matrix.size == 0:
            return 0.0
        return float(np.linalg.norm(self.matrix, 2))

    def same_frame(self, other: "GraphChart") -> bool:
        return (
            np.array_equal(self.base.basis, other.base.basis)
            and np.array_equal(self.fiber.basis, other.fiber.basis)
            and _same_weights(self.base.weights, other.base.weights)
        )


def _frame_solver(e: Subspace, f: Subspace):
    """LU-backed decomposition of ambient vectors into (E, F) components."""
    _check_geometry(e, f)
    if e.dim + f.dim != e.ambient:
        raise NotComplementary(f"dimensions {e.dim} + {f.dim} != ambient {e.ambient}")
    stacked = np.hstack([e.metric_basis(), f.metric_basis()])
    sv = np.linalg.svd(stacked, compute_uv=False)
    if sv.min() < TRANSVERSALITY_TOL:
        raise NotComplementary(f"frame near-singular (smallest singular value {sv.min():.2e})")
    inv = np.linalg.inv(np.hstack([e.basis, f.basis]))

    def solve(y: np.ndarray):
        c = inv @ y
        return c[: e.dim], c[e.dim :]

    return solve


def oblique_proj(e: Subspace, f: Subspace) -> ObliqueProjection:
    """Projection with range e and kernel f; requires e + f to span the ambient space."""
    solve = _frame_solver(e, f)
    a, _ = solve(np.eye(e.ambient, dtype=complex))
    return ObliqueProjection(matrix=e.basis @ a, range_dim=e.dim)


def projection_norm(p: ObliqueProjection, weights=None) -> float:
    """Metric operator norm of the projection matrix."""
    m = p.matrix
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        m = (w[:, None] * m) / w[None, :]
    return float(np.linalg.norm(m, 2))


def chart(e: Subspace, f: Subspace, eprime: Subspace) -> GraphChart:
    """Chart coordinates of eprime against the frame (e, f).

    eprime must be complementary to f; the chart U satisfies
    chart_inverse(U) = eprime.
    """
    _check_geometry(e, f, eprime)
    if eprime.dim != e.dim:
        raise NotTransverse(f"chart needs dim {e.dim}, got {eprime.dim}")
    solve = _frame_solver(e, f)
    a, b = solve(eprime.basis)
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.min() <= TRANSVERSALITY_TOL * max(1.0, sv.max()):
        raise NotTransverse(f"subspace tangent to the frame kernel (singular value {sv.min():.2e})")
    return GraphChart(matrix=b @ np.linalg.inv(a), base=e, fiber=f)


def chart_inverse(u: GraphChart) -> Subspace:
    """The subspace (Id + U)(base), orthonormalised in the metric."""
    vectors = u.base.basis + u.fiber.basis @ u.matrix
    return Subspace.from_spanning(vectors, weights=u.base.weights)


def forward_transform(s: np.ndarray, u: GraphChart, e2: Subspace, f2: Subspace) -> GraphChart:
    """Push the chart u on (E1, F1) through the operator s into the frame (E2, F2).

    Realises the image action: chart_inverse(result) = s(chart_inverse(u)).
    Raises TransformSingular when the E2-component of s(Id+U)|E1 is not
    invertible (loss of transversality).
    """
    _check_geometry(u.base, e2, f2)
    solve = _frame_solver(e2, f2)
    image = np.asarray(s, dtype=complex) @ (u.base.basis + u.fiber.basis @ u.matrix)
    a, b = solve(image)
    if a.shape[0] != a.shape[1]:
        raise TransformSingular("target frame dimension differs from chart dimension")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.min() <= TRANSVERSALITY_TOL * max(1.0, sv.max()):
        raise TransformSingular(f"image tangent to target kernel frame (singular value {sv.min():.2e})")
    return GraphChart(matrix=b @ np.linalg.inv(a), base=e2, fiber=f2)


def backward_transform(s: np.ndarray, u: GraphChart, e1: Subspace, f1: Subspace) -> GraphChart:
    """Pull the chart u on (F2, E2) back through s onto the frame (F1, E1).

    u.base is F2 and u.fiber is E2.  When s is invertible the result
    represents the preimage: chart_inverse(result) = s^(-1)(chart_inverse(u)).
    """
    _check_geometry(u.base, e1, f1)
    f2, e2 = u.base, u.fiber
    solve = _frame_solver(e2, f2)
    sm = np.asarray(s, dtype=complex)
    a_e, b_e = solve(sm @ e1.basis)
    a_f, b_f = solve(sm @ f1.basis)
    g = a_e - u.matrix @ b_e
    sv = np.linalg.svd(g, compute_uv=False)
    if sv.min() <= TRANSVERSALITY_TOL * max(1.0, sv.max()):
        raise TransformSingular(f"restricted operator near-singular (singular value {sv.min():.2e})")
    return GraphChart(matrix=np.linalg.solve(g, u.matrix @ b_f - a_f), base=f1, fiber=e1)


def gap(e: Subspace, f: Subspace) -> float:
    """sup over metric-unit vectors of e of the distance to f.

    Exact in the metric: the largest singular value of (Id - P_f) applied to
    an orthonormal basis of e, with P_f the orthogonal projector onto f.
    """
    _check_geometry(e, f)
    ge, gf = e.metric_basis(), f.metric_basis()
    resid = ge - gf @ (gf.conj().T @ ge)
    return float(np.linalg.svd(resid, compute_uv=False).max())


def hausdorff(e: Subspace, f: Subspace) -> float:
    """Symmetric unit-sphere distance between subspaces.

    For a unit vector u the distance to the unit sphere of the other space is
    sqrt(2 - 2||P u||); maximising over u gives sqrt(2 - 2 s_min) with s_min
    the smallest singular value of the basis cross-Gram.
    """
    _check_geometry(e, f)

    def one_sided(a: np.ndarray, b: np.ndarray) -> float:
        if a.shape[1] > b.shape[1]:
            s_min = 0.0  # some direction of a is orthogonal to all of b
        else:
            s_min = float(np.linalg.svd(b.conj().T @ a, compute_uv=False).min())
        return float(np.sqrt(max(0.0, 2.0 - 2.0 * min(1.0, s_min))))

    ge, gf = e.metric_basis(), f.metric_basis()
    return max(one_sided(ge, gf), one_sided(gf, ge))


def det_on(a: np.ndarray, e: Subspace) -> float:
    """Volume-distortion factor of a on e: product of metric singular values of a|e."""
    img = np.asarray(a, dtype=complex) @ e.basis
    if e.weights is not None:
        img = e.weights[:, None] * img
    sv = np.linalg.svd(img, compute_uv=False)
    return float(np.prod(sv))


def save_subspace(path, s: Subspace) -> None:
    """Binary container: magic, D (u32), d (u32), weight flag (u8), weights, basis."""
    with open(path, "wb") as fh:
        fh.write(MAGIC_SUBSPACE)
        fh.write(struct.pack("<IIB", s.ambient, s.dim, int(s.weights is not None)))
        if s.weights is not None:
            fh.write(np.ascontiguousarray(s.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(s.basis, dtype="<c16").tobytes())


def load_subspace(path) -> Subspace:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_SUBSPACE:
            raise ValueError(f"bad magic {magic!r}")
        dim_d, dim_sub, has_w = struct.unpack("<IIB", fh.read(9))
        weights = None
        if has_w:
            weights = np.frombuffer(fh.read(8 * dim_d), dtype="<f8").astype(float)
        basis = np.frombuffer(fh.read(dim_d * dim_sub * 16), dtype="<c16").reshape(dim_d, dim_sub)
    return Subspace(basis=basis.astype(complex), weights=weights)


def orthogonal_complement(e: Subspace) -> Subspace:
    """Metric-orthogonal complement, as a convenient chart frame."""
    g = e.metric_basis()
    full, _, _ = np.linalg.svd(np.eye(e.ambient, dtype=complex) - g @ g.conj().T)
    comp = full[:, : e.ambient - e.dim]
    basis = comp if e.weights is None else comp / e.weights[:, None]
    return Subspace(basis=basis, weights=e.weights)


def principal_subspace(vectors: Sequence[np.ndarray], weights=None) -> Subspace:
    """Orthonormal span of the given ambient vectors (columns)."""
    v = np.column_stack(vectors)
    return Subspace.from_spanning(v, weights=weights)
