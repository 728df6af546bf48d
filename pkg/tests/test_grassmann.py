import numpy as np
import pytest

from pfcocycle import grassmann as gr
from pfcocycle.errors import FrameMismatch, NotComplementary, NotTransverse, RankCollapse
from tests.conftest import random_matrix, random_subspace


def coord_subspace(dim, cols, weights=None):
    basis = np.eye(dim, dtype=complex)[:, list(cols)]
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        basis = basis / w[:, None]
    return gr.Subspace(basis=basis, weights=weights)


def complementary_pair(rng, dim, d, weights=None):
    while True:
        e = random_subspace(rng, dim, d, weights)
        f = random_subspace(rng, dim, dim - d, weights)
        stacked = np.hstack([e.metric_basis(), f.metric_basis()])
        if np.linalg.svd(stacked, compute_uv=False).min() > 1e-3:
            return e, f


class TestSubspace:
    def test_orthonormality_enforced(self):
        with pytest.raises(ValueError):
            gr.Subspace(basis=np.ones((4, 2), dtype=complex))

    def test_from_spanning_orthonormalizes(self, rng):
        s = gr.Subspace.from_spanning(rng.normal(size=(6, 3)) + 0j)
        g = s.metric_basis()
        assert np.abs(g.conj().T @ g - np.eye(3)).max() <= 1e-12

    def test_weighted_orthonormality(self, rng):
        w = np.linspace(1.0, 9.0, 5)
        s = random_subspace(rng, 5, 2, weights=w)
        g = w[:, None] * s.basis
        assert np.abs(g.conj().T @ g - np.eye(2)).max() <= 1e-12

    def test_rank_collapse_detected(self):
        v = np.ones((5, 2), dtype=complex)
        with pytest.raises(RankCollapse):
            gr.Subspace.from_spanning(v)

    def test_serialization_round_trip(self, rng, tmp_path):
        for w in (None, np.linspace(1.0, 4.0, 6)):
            s = random_subspace(rng, 6, 2, weights=w)
            f = tmp_path / f"s_{w is None}.sub"
            gr.save_subspace(f, s)
            back = gr.load_subspace(f)
            assert np.array_equal(back.basis, s.basis)
            if w is None:
                assert back.weights is None
            else:
                assert np.array_equal(back.weights, s.weights)


class TestObliqueProjection:
    def test_coordinate_splitting(self):
        e = coord_subspace(4, [0])
        f = coord_subspace(4, [1, 2, 3])
        p = gr.oblique_proj(e, f)
        target = np.zeros((4, 4), dtype=complex)
        target[0, 0] = 1.0
        assert np.abs(p.matrix - target).max() <= 1e-14

    def test_equal_subspaces_rejected(self, rng):
        e = random_subspace(rng, 4, 2)
        with pytest.raises(NotComplementary):
            gr.oblique_proj(e, e)

    def test_random_pair_properties(self, rng):
        e, f = complementary_pair(rng, 5, 2)
        p = gr.oblique_proj(e, f)
        assert np.abs(p.matrix @ p.matrix - p.matrix).max() <= 1e-12
        assert np.abs(p.matrix @ e.basis - e.basis).max() <= 1e-12
        assert np.abs(p.matrix @ f.basis).max() <= 1e-12

    def test_complement(self, rng):
        e, f = complementary_pair(rng, 6, 2)
        p = gr.oblique_proj(e, f)
        q = p.complement()
        assert np.abs(p.matrix + q.matrix - np.eye(6)).max() <= 1e-13


class TestCharts:
    def test_chart_of_base_is_zero(self, rng):
        e, f = complementary_pair(rng, 5, 2)
        u = gr.chart(e, f, e)
        assert np.abs(u.matrix).max() <= 1e-12

    def test_two_dimensional_closed_form(self):
        e = coord_subspace(2, [0])
        f = coord_subspace(2, [1])
        t = 0.37
        ep = gr.Subspace.from_spanning(np.array([[1.0], [t]], dtype=complex))
        u = gr.chart(e, f, ep)
        assert u.matrix[0, 0] == pytest.approx(t, abs=1e-14)

    def test_inverse_of_zero_chart(self, rng):
        e, f = complementary_pair(rng, 5, 2)
        u = gr.GraphChart(np.zeros((3, 2), dtype=complex), base=e, fiber=f)
        assert gr.gap(gr.chart_inverse(u), e) <= 1e-13

    def test_round_trip_entrywise(self, rng):
        for _ in range(20):
            e, f = complementary_pair(rng, 6, 2)
            u_mat = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
            u_mat *= 10.0 / max(10.0, np.linalg.norm(u_mat, 2))  # norm <= 10
            u = gr.GraphChart(u_mat, base=e, fiber=f)
            back = gr.chart(e, f, gr.chart_inverse(u))
            assert np.abs(back.matrix - u_mat).max() <= 1e-10

    def test_tangent_subspace_rejected(self):
        e = coord_subspace(3, [0])
        f = coord_subspace(3, [1, 2])
        with pytest.raises(NotTransverse):
            gr.chart(e, f, coord_subspace(3, [2]))

    def test_projection_formula(self, rng):
        # the projection onto the charted subspace along f equals
        # (Id + embedded chart) composed with the frame projection
        for _ in range(10):
            e, f = complementary_pair(rng, 6, 2)
            u_mat = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
            u = gr.GraphChart(u_mat, base=e, fiber=f)
            ep = gr.chart_inverse(u)
            lhs = gr.oblique_proj(ep, f).matrix
            pi_ef = gr.oblique_proj(e, f).matrix
            embedded = f.basis @ u_mat @ e.basis.conj().T
            rhs = pi_ef + embedded @ pi_ef
            assert np.abs(lhs - rhs).max() <= 1e-10

    def test_lipschitz_bound(self, rng):
        # d_H of two charted subspaces <= 2 ||Pi_{e||f}|| ||U1 - U2||
        for _ in range(10):
            e, f = complementary_pair(rng, 6, 2)
            pi_norm = np.linalg.norm(gr.oblique_proj(e, f).matrix, 2)
            u1 = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
            u2 = u1 + 0.01 * (rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)))
            s1 = gr.chart_inverse(gr.GraphChart(u1, base=e, fiber=f))
            s2 = gr.chart_inverse(gr.GraphChart(u2, base=e, fiber=f))
            bound = 2.0 * pi_norm * np.linalg.norm(u1 - u2, 2)
            assert gr.hausdorff(s1, s2) <= bound * (1.0 + 1e-9)


class TestTransforms:
    def test_forward_fixes_invariant_splitting(self):
        e = coord_subspace(4, [0, 1])
        f = coord_subspace(4, [2, 3])
        s = np.diag([2.0, 1.5, 0.5, 0.25]).astype(complex)
        u0 = gr.GraphChart(np.zeros((2, 2), dtype=complex), base=e, fiber=f)
        out = gr.forward_transform(s, u0, e, f)
        assert np.abs(out.matrix).max() <= 1e-14

    def test_identity_acts_trivially(self, rng):
        e, f = complementary_pair(rng, 5, 2)
        u = gr.GraphChart(rng.normal(size=(3, 2)) + 0j, base=e, fiber=f)
        out = gr.forward_transform(np.eye(5), u, e, f)
        assert np.abs(out.matrix - u.matrix).max() <= 1e-11

    def test_forward_matches_direct_image(self, rng):
        for _ in range(10):
            e1, f1 = complementary_pair(rng, 6, 2)
            e2, f2 = complementary_pair(rng, 6, 2)
            s = random_matrix(rng, 6)
            u = gr.GraphChart(rng.normal(size=(4, 2)) + 0j, base=e1, fiber=f1)
            pushed = gr.chart_inverse(gr.forward_transform(s, u, e2, f2))
            direct = gr.Subspace.from_spanning(s @ gr.chart_inverse(u).basis)
            assert max(gr.gap(pushed, direct), gr.gap(direct, pushed)) <= 1e-9

    def test_backward_identity(self, rng):
        e, f = complementary_pair(rng, 5, 2)
        v = gr.GraphChart(rng.normal(size=(2, 3)) + 0j, base=f, fiber=e)
        out = gr.backward_transform(np.eye(5), v, e, f)
        assert np.abs(out.matrix - v.matrix).max() <= 1e-11

    def test_backward_zero_chart_block_diagonal(self):
        e = coord_subspace(4, [0, 1])
        f = coord_subspace(4, [2, 3])
        s = np.diag([2.0, 1.5, 0.5, 0.25]).astype(complex)
        v0 = gr.GraphChart(np.zeros((2, 2), dtype=complex), base=f, fiber=e)
        out = gr.backward_transform(s, v0, e, f)
        assert np.abs(out.matrix).max() <= 1e-14

    def test_backward_matches_preimage(self, rng):
        for _ in range(10):
            e1, f1 = complementary_pair(rng, 6, 2)
            e2, f2 = complementary_pair(rng, 6, 2)
            s = random_matrix(rng, 6)
            v = gr.GraphChart(rng.normal(size=(2, 4)) + 0j, base=f2, fiber=e2)
            pulled = gr.chart_inverse(gr.backward_transform(s, v, e1, f1))
            direct = gr.Subspace.from_spanning(np.linalg.solve(s, gr.chart_inverse(v).basis))
            assert max(gr.gap(pulled, direct), gr.gap(direct, pulled)) <= 1e-9

    def test_transform_semigroup(self, rng):
        for _ in range(10):
            frames = [complementary_pair(rng, 6, 2) for _ in range(3)]
            s1, s2 = random_matrix(rng, 6), random_matrix(rng, 6)
            u = gr.GraphChart(rng.normal(size=(4, 2)) + 0j, base=frames[0][0], fiber=frames[0][1])
            via = gr.forward_transform(
                s2, gr.forward_transform(s1, u, *frames[1]), *frames[2]
            )
            direct = gr.forward_transform(s2 @ s1, u, *frames[2])
            assert np.abs(via.matrix - direct.matrix).max() <= 1e-9 * max(
                1.0, np.abs(direct.matrix).max()
            )

    def test_frame_mismatch_detected(self, rng):
        e1, f1 = complementary_pair(rng, 5, 2)
        w = np.linspace(1.0, 2.0, 5)
        e2 = random_subspace(rng, 5, 2, weights=w)
        f2 = gr.orthogonal_complement(e2)
        u = gr.GraphChart(np.zeros((3, 2), dtype=complex), base=e1, fiber=f1)
        with pytest.raises(FrameMismatch):
            gr.forward_transform(np.eye(5), u, e2, f2)


class TestGapMetrics:
    def test_gap_to_self(self, rng):
        e = random_subspace(rng, 6, 3)
        assert gr.gap(e, e) <= 1e-14

    def test_orthogonal_lines(self):
        assert gr.gap(coord_subspace(3, [0]), coord_subspace(3, [1])) == pytest.approx(1.0)

    def test_sandwich(self, rng):
        for _ in range(30):
            e = random_subspace(rng, 6, int(rng.integers(1, 4)))
            f = random_subspace(rng, 6, int(rng.integers(1, 4)))
            both = max(gr.gap(e, f), gr.gap(f, e))
            dh = gr.hausdorff(e, f)
            assert both <= dh * (1.0 + 1e-12)
            assert dh <= 2.0 * both * (1.0 + 1e-12)

    def test_weighted_gap_matches_transformed(self, rng):
        w = np.linspace(1.0, 5.0, 6)
        e = random_subspace(rng, 6, 2, weights=w)
        f = random_subspace(rng, 6, 3, weights=w)
        eg = gr.Subspace(e.metric_basis())
        fg = gr.Subspace(f.metric_basis())
        assert gr.gap(e, f) == pytest.approx(gr.gap(eg, fg), abs=1e-12)


class TestDeterminant:
    def test_uniform_scaling(self, rng):
        e = random_subspace(rng, 5, 2)
        assert gr.det_on(3.0 * np.eye(5), e) == pytest.approx(9.0, rel=1e-12)

    def test_kernel_intersection_gives_zero(self):
        a = np.diag([0.0, 1.0, 1.0]).astype(complex)
        e = coord_subspace(3, [0, 1])
        assert gr.det_on(a, e) == pytest.approx(0.0, abs=1e-14)

    def test_matches_gram_oracle(self, rng):
        # independent oracle: sqrt(det(Gram)) of the image vectors
        for _ in range(10):
            a = random_matrix(rng, 5)
            e = random_subspace(rng, 5, 2)
            img = a @ e.basis
            gram = img.conj().T @ img
            expected = float(np.sqrt(abs(np.linalg.det(gram))))
            assert gr.det_on(a, e) == pytest.approx(expected, rel=1e-10)

    def test_multiplicative_over_composition(self, rng):
        for _ in range(10):
            a, b = random_matrix(rng, 5), random_matrix(rng, 5)
            e = random_subspace(rng, 5, 2)
            be = gr.Subspace.from_spanning(b @ e.basis)
            lhs = gr.det_on(a @ b, e)
            rhs = gr.det_on(a, be) * gr.det_on(b, e)
            assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_weighted_determinant(self, rng):
        # conjugating into metric coordinates reduces to the Euclidean case
        w = np.linspace(1.0, 3.0, 5)
        a = random_matrix(rng, 5)
        e = random_subspace(rng, 5, 2, weights=w)
        a_metric = (w[:, None] * a) / w[None, :]
        e_metric = gr.Subspace(e.metric_basis())
        assert gr.det_on(a, e) == pytest.approx(gr.det_on(a_metric, e_metric), rel=1e-11)
