"""Convolution operator, antiderivative operators, M/K blocks, Pi pairs."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from diffkern2d.errors import InvalidArgumentError
from diffkern2d.grid import GridFn, LineFn, grid_inner, make_grid
from diffkern2d.kernels import exp_kernel, identity_kernel, poly_kernel
from diffkern2d.operators import (
    ConvOperator,
    adjoint_integration_op,
    assemble_pi,
    conv_apply,
    export_dense_csv,
    integration_op,
    k_op,
    line_integration_op,
    m_op,
)

from conftest import dense_oracle_S, samples_for


class TestConvApply:
    def test_identity_operator(self, rng):
        S = ConvOperator(samples_for(identity_kernel(c=1.0), 8))
        f = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        assert_allclose(S.apply(f), f, rtol=0, atol=1e-14)

    def test_constant_kernel_integrates_to_area(self):
        # c = 0, v = 1: S f is the plain integral of f, = 1 for f = 1
        S = ConvOperator(samples_for(poly_kernel(c=0.0, amp=1.0, q=0.0), 8,
                                     normalize=False))
        out = S.apply(np.ones(64))
        assert_allclose(out, np.ones(64), rtol=0, atol=1e-13)

    def test_matches_entrywise_dense_oracle(self):
        s = samples_for(exp_kernel(), 8)
        S = ConvOperator(s)
        g = s.grid
        f = GridFn(g, g.outer_flat(g.x1, g.x2))     # f = x1 x2 sampled
        oracle = dense_oracle_S(s)
        got = conv_apply(S, f).values
        want = oracle @ f.values
        assert np.abs(got - want).max() <= 1e-12 * np.abs(want).max()

    def test_fft_and_dense_paths_agree(self, rng):
        for n in (8, 16, 32):
            S = ConvOperator(samples_for(exp_kernel(), n))
            D = S.dense()
            for _ in range(10):
                f = rng.standard_normal(n * n) + 1j * rng.standard_normal(n * n)
                diff = np.linalg.norm(S.apply_fft(f) - D @ f) / np.linalg.norm(D @ f)
                assert diff <= 1e-12

    def test_dense_has_constant_diagonals(self):
        s = samples_for(exp_kernel(), 6)
        D = ConvOperator(s).dense()
        g = s.grid
        scale = np.abs(D).max()
        seen = {}
        for b in range(g.n2):
            for a in range(g.n1):
                for bp in range(g.n2):
                    for ap in range(g.n1):
                        key = (a - ap, b - bp)
                        val = D[b * g.n1 + a, bp * g.n1 + ap]
                        if key in seen:
                            assert abs(val - seen[key]) <= 1e-12 * scale
                        else:
                            seen[key] = val

    def test_grid_mismatch_rejected(self):
        S = ConvOperator(samples_for(identity_kernel(), 8))
        other = make_grid(1.0, 1.0, 4, 4)
        with pytest.raises(InvalidArgumentError):
            conv_apply(S, GridFn(other, np.zeros(16)))

    def test_dense_guard(self):
        s = samples_for(identity_kernel(), 80, normalize=False)
        S = ConvOperator(s)
        with pytest.raises(InvalidArgumentError):
            S.dense()


class TestIntegrationOps:
    def test_antiderivative_of_ones_is_ix(self):
        g = make_grid(1.0, 1.0, 4, 4)
        A1 = integration_op(g, 1)
        out = A1.apply(np.ones(16).astype(complex))
        want = g.outer_flat(1j * g.x1, np.ones(4))
        assert_allclose(out, want, rtol=0, atol=1e-15)

    def test_sum_with_adjoint_on_ones(self):
        # (A1 + A1*) 1 = i (2 x1 - omega1): the two integration ranges
        # join into the full interval minus the reflected part
        g = make_grid(1.0, 1.0, 4, 4)
        out = (integration_op(g, 1).mat + adjoint_integration_op(g, 1).mat) @ np.ones(16)
        want = g.outer_flat(1j * (2 * g.x1 - g.omega1), np.ones(4))
        assert_allclose(out, want, rtol=0, atol=1e-15)

    def test_axis2_against_kron_oracle(self, rng):
        g = make_grid(1.0, 2.0, 8, 8)
        stencil = 1j * g.h2 * (np.tril(np.ones((8, 8)), -1) + 0.5 * np.eye(8))
        oracle = np.kron(stencil, np.eye(8))
        f = rng.standard_normal(64)
        assert_allclose(integration_op(g, 2).apply(f.astype(complex)),
                        oracle @ f, rtol=0, atol=1e-14)

    def test_typed_apply_and_adjoint_flag(self):
        g = make_grid(1.0, 1.0, 4, 4)
        from diffkern2d.operators import integration_apply

        ones = GridFn(g, np.ones(16).astype(complex))
        fwd = integration_apply(g, 1, ones)
        assert_allclose(fwd.values, g.outer_flat(1j * g.x1, np.ones(4)),
                        rtol=0, atol=1e-15)
        adj = integration_apply(g, 1, ones, adjoint=True)
        assert_allclose(adj.values,
                        g.outer_flat(-1j * (g.omega1 - g.x1), np.ones(4)),
                        rtol=0, atol=1e-15)

    def test_adjoint_consistency(self, rng):
        g = make_grid(1.3, 0.8, 6, 5)
        f = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        h = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        for axis in (1, 2):
            A = integration_op(g, axis)
            Astar = adjoint_integration_op(g, axis)
            lhs = grid_inner(g, A.apply(f), h)
            rhs = grid_inner(g, f, Astar.apply(h))
            assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)

    def test_line_op_matches_grid_stencil(self):
        g = make_grid(1.0, 1.0, 4, 6)
        calA = line_integration_op(g, 2)
        out = calA.apply(np.ones(6).astype(complex))
        assert_allclose(out, 1j * g.x2, rtol=0, atol=1e-15)

    def test_cal_a_apply_typed(self):
        from diffkern2d.operators import cal_a_apply

        g = make_grid(1.0, 1.0, 4, 6)
        out = cal_a_apply(g, 2, LineFn(g, 2, np.ones(6).astype(complex)))
        assert out.axis == 2
        assert_allclose(out.values, 1j * g.x2, rtol=0, atol=1e-15)


class TestMOps:
    def test_m31_broadcast(self):
        s = samples_for(exp_kernel(), 4)
        g = s.grid
        out = m_op(s, 3, 1).apply(np.ones(4).astype(complex))
        assert_allclose(out, np.ones(16), rtol=0, atol=0)
        # and the line function m32 broadcasts along the other axis
        out2 = m_op(s, 3, 2).apply(np.arange(4).astype(complex))
        assert_allclose(g.to2d(out2)[2, :], np.arange(4))

    def test_all_zero_kernel_gives_zero_m11(self):
        s = samples_for(identity_kernel(c=0.0), 4, normalize=False)
        assert np.abs(m_op(s, 1, 1).mat).max() == 0.0
        assert np.abs(m_op(s, 4, 2).mat).max() == 0.0

    def test_jump_only_expansions(self):
        # c = 1, everything else 0: M11 = broadcast/2, M41 = M21/2
        s = samples_for(identity_kernel(c=1.0), 6)
        M11 = m_op(s, 1, 1).mat
        M31 = m_op(s, 3, 1).mat
        assert_allclose(M11, 0.5 * M31, rtol=0, atol=1e-15)
        M41 = m_op(s, 4, 1).mat
        M21 = m_op(s, 2, 1).mat
        assert_allclose(M41, 0.5 * M21, rtol=0, atol=1e-15)

    def test_row_sum_operator(self):
        s = samples_for(exp_kernel(), 4)
        g = s.grid
        f = np.arange(16.0)
        out = m_op(s, 2, 1).apply(f.astype(complex))
        want = g.h1 * g.to2d(f).sum(axis=1)
        assert_allclose(out, want)

    def test_invalid_jk(self):
        s = samples_for(exp_kernel(), 4)
        with pytest.raises(InvalidArgumentError):
            m_op(s, 5, 1)
        with pytest.raises(InvalidArgumentError):
            m_op(s, 1, 3)


class TestKOps:
    def test_constant_embedding(self):
        s = samples_for(exp_kernel(), 5)
        out = k_op(s, "K21").apply(np.array([1.0 + 0j]))
        assert_allclose(out, np.ones(5), rtol=0, atol=0)
        out2 = k_op(s, "K22").apply(np.array([1.0 + 0j]))
        assert_allclose(out2, np.ones(5), rtol=0, atol=0)

    def test_side_integral_of_ones(self):
        # K31 integrates over (0, omega2): f = 1 gives omega2 on every x1
        s = samples_for(exp_kernel(), 4, omega2=1.0)
        out = k_op(s, "K31").apply(np.ones(4).astype(complex))
        assert_allclose(out, np.ones(4), rtol=0, atol=1e-15)

    def test_total_quadrature_jump_only(self):
        # K4 on f = 1 with the pure jump kernel: quadrature of s(-t) = c/4
        s = samples_for(identity_kernel(c=1.0), 8)
        got = k_op(s, "K4").apply(np.ones(64).astype(complex))
        assert_allclose(got, [0.25], rtol=0, atol=1e-15)
        # dense quadrature oracle for a smooth kernel
        s2 = samples_for(exp_kernel(), 8)
        m = s2.model
        g = s2.grid
        want = 0.0
        for b in range(8):
            for a in range(8):
                want += g.h1 * g.h2 * complex(
                    np.asarray(m.s_values(-g.x1[a], -g.x2[b])))
        got2 = k_op(s2, "K4").apply(np.ones(64).astype(complex))
        assert abs(got2[0] - want) <= 1e-13

    def test_k11_uses_sign_expansion(self):
        # s(x1, -t2) = -c/4 + alpha(-t2)/2 - beta(x1)/2 + sigma(x1, -t2)
        s = samples_for(identity_kernel(c=1.0), 4)
        got = k_op(s, "K11").mat
        assert_allclose(got, 0.25 * s.grid.h2 * np.ones((4, 4)), rtol=0, atol=1e-15)

    def test_unknown_name(self):
        s = samples_for(exp_kernel(), 4)
        with pytest.raises(InvalidArgumentError):
            k_op(s, "K13")


class TestPiPair:
    def test_all_zero_kernel_blocks(self):
        s = samples_for(identity_kernel(c=0.0), 4, normalize=False)
        pp = assemble_pi(s, 1)
        n2, N = 4, 16
        assert np.abs(pp.pi.mat[:, :n2]).max() == 0.0           # M11 = 0
        assert_allclose(pp.pi.mat[:, n2:], m_op(s, 3, 1).mat)   # M31 survives
        assert_allclose(pp.pi_hat.mat[:n2, :], m_op(s, 2, 1).mat)
        assert np.abs(pp.pi_hat.mat[n2:, :]).max() == 0.0       # M41 = 0

    def test_pihat_on_ones_jump_kernel(self):
        # c=1, rest 0, unit square: PiHat_1 1 = [1; 1/2]
        s = samples_for(identity_kernel(c=1.0), 8)
        out = assemble_pi(s, 1).pi_hat.apply(np.ones(64).astype(complex))
        assert_allclose(out[:8], np.ones(8), rtol=0, atol=1e-14)
        assert_allclose(out[8:], 0.5 * np.ones(8), rtol=0, atol=1e-14)

    def test_product_rank_bound(self):
        s = samples_for(exp_kernel(), 8)
        pp = assemble_pi(s, 1)
        prod = pp.pi.mat @ pp.pi_hat.mat
        rank = np.linalg.matrix_rank(prod, tol=1e-10)
        assert rank <= 2 * s.grid.n2

    def test_bad_axis(self):
        s = samples_for(exp_kernel(), 4)
        with pytest.raises(InvalidArgumentError):
            assemble_pi(s, 3)


class TestCsvExport:
    def test_roundtrip_real_and_complex(self, tmp_path, rng):
        A = rng.standard_normal((5, 7))
        export_dense_csv(A, tmp_path / "a.csv")
        back = np.loadtxt(tmp_path / "a.csv", delimiter=",")
        assert_allclose(back, A, rtol=0, atol=0)
        Z = A + 1j * rng.standard_normal((5, 7))
        export_dense_csv(Z, tmp_path / "z.csv")
        raw = np.loadtxt(tmp_path / "z.csv", delimiter=",")
        assert_allclose(raw[:, 0::2] + 1j * raw[:, 1::2], Z, rtol=0, atol=0)
