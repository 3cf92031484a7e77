import numpy as np
import pytest

from conftest import band_limited, monogenic_linear
from plemelj.algebra import Multivector, algebra, cauchy_kernel
from plemelj.mesh import make_circle, make_flat_patch
from plemelj.operators import (
    BlockOperator,
    BoundaryFunction,
    NearBoundaryError,
    assemble_adjoint_cauchy,
    assemble_kerzman_stein,
    assemble_singular_cauchy,
    cauchy_transform,
    cauchy_transform_points,
    export_operator_json,
    export_spectrum_csv,
    generic_kernel_operator,
    hermitian_inner,
    l2_norm,
    omega,
    pairing,
    plemelj_projection,
    smooth_matrix_norm,
)


def test_omega_values():
    assert abs(omega(2) - 2 * np.pi) < 1e-14
    assert abs(omega(3) - 4 * np.pi) < 1e-14
    assert abs(omega(4) - 2 * np.pi**2) < 1e-14


class TestCauchyTransform:
    def test_constant_interior(self, circle128):
        one = BoundaryFunction.constant(circle128, 1.0)
        v = cauchy_transform(circle128, one, np.zeros(2))
        assert np.abs(v.coeffs - [1, 0, 0, 0]).max() < 1e-10

    def test_monogenic_reproduction(self, circle128):
        f = monogenic_linear(circle128)
        v = cauchy_transform(circle128, f, np.array([0.3, 0.0]))
        assert np.abs(v.coeffs - [0, 0, 0.3, 0]).max() < 1e-8

    def test_constant_exterior_vanishes(self, circle128):
        one = BoundaryFunction.constant(circle128, 1.0)
        v = cauchy_transform(circle128, one, np.array([3.0, 0.0]))
        assert v.norm() < 1e-10

    def test_near_boundary_refused(self, circle128):
        one = BoundaryFunction.constant(circle128, 1.0)
        with pytest.raises(NearBoundaryError):
            cauchy_transform(circle128, one, circle128.nodes[0])

    def test_deformed_reproduces_constants(self, deformed128):
        one = BoundaryFunction.constant(deformed128, 1.0)
        v = cauchy_transform(deformed128, one, np.zeros(2))
        assert np.abs(v.coeffs - [1, 0, 0, 0]).max() < 1e-10


class TestSingularCauchy:
    def test_constant_calibration_exact(self, circle128):
        C = assemble_singular_cauchy(circle128)
        one = BoundaryFunction.constant(circle128, 1.0)
        assert np.abs(C.apply(one).values - 0.5 * one.values).max() < 1e-14
        # any constant multivector
        b = BoundaryFunction.constant(
            circle128, Multivector(algebra(2), np.array([0.3, 1.0, -2.0, 0.5j]))
        )
        assert np.abs(C.apply(b).values - 0.5 * b.values).max() < 1e-13

    def test_squares_to_quarter_identity(self, circle128, circle256):
        for mesh in (circle128, circle256):
            C = assemble_singular_cauchy(mesh)
            res = (C @ C).matrix - 0.25 * np.eye(C.matrix.shape[0])
            assert smooth_matrix_norm(res, mesh) < 1e-3

    def test_apply_squared_to_random(self, circle128):
        C = assemble_singular_cauchy(circle128)
        f = band_limited(circle128, seed=11)
        g = C.apply(C.apply(f))
        assert l2_norm(g - 0.25 * f) / l2_norm(f) < 1e-3

    def test_norm_bounded_across_refinement(self):
        norms = [assemble_singular_cauchy(make_circle(N)).operator_norm() for N in (64, 128, 256, 512)]
        for a, b in zip(norms, norms[1:]):
            assert b / a <= 1.05

    def test_flat_patch_norm_stable(self):
        norms = [assemble_singular_cauchy(make_flat_patch(N)).operator_norm() for N in (64, 128, 256)]
        for a, b in zip(norms, norms[1:]):
            assert b / a <= 1.1

    def test_real_mesh_blocks_real(self, circle128):
        C = assemble_singular_cauchy(circle128)
        assert np.abs(C.matrix.imag).max() < 1e-12

    def test_kernel_negation_flips_sign(self, circle128):
        C = assemble_singular_cauchy(circle128)
        T = generic_kernel_operator(circle128, lambda d: -cauchy_kernel(d))
        offdiag = C.matrix.copy()
        d = C.block_dim
        for i in range(circle128.size):
            offdiag[i * d : (i + 1) * d, i * d : (i + 1) * d] = 0.0
        assert np.abs(T.matrix + offdiag).max() < 1e-12


class TestKerzmanStein:
    def test_circle_vanishes(self, circle128):
        A = assemble_kerzman_stein(circle128)
        assert np.abs(A.matrix).max() < 1e-12
        one = BoundaryFunction.constant(circle128, 1.0)
        assert l2_norm(A.apply(one)) < 1e-6

    def test_entry_boundedness_under_refinement(self, deformed128, deformed256):
        a1 = assemble_kerzman_stein(deformed128).max_block_norm()
        a2 = assemble_kerzman_stein(deformed256).max_block_norm()
        assert a2 <= 2.0 * a1 + 1e-12

    def test_spectral_decay_index_grows_slower_than_N(self, deformed128, deformed256):
        def decay_index(mesh):
            sv = assemble_kerzman_stein(mesh).singular_values()
            return int(np.argmax(sv / sv[0] <= 0.1))

        k1, k2 = decay_index(deformed128), decay_index(deformed256)
        assert k2 < 2 * k1

    def test_adjoint_of_cauchy_wrt_pairing(self, circle128):
        C = assemble_singular_cauchy(circle128)
        Cs = assemble_adjoint_cauchy(circle128)
        f = band_limited(circle128, seed=1)
        g = band_limited(circle128, seed=2)
        lhs = pairing(C.apply(f), g).coeffs
        rhs = pairing(f, Cs.apply(g)).coeffs
        assert np.abs(lhs - rhs).max() < 1e-8 * max(1.0, np.abs(lhs).max())

    def test_difference_identity_exact(self, circle128):
        C = assemble_singular_cauchy(circle128)
        A = assemble_kerzman_stein(circle128)
        Cs = assemble_adjoint_cauchy(circle128)
        assert np.abs(C.matrix - Cs.matrix - A.matrix).max() < 1e-15

    def test_cstar_of_constants(self, circle128):
        Cs = assemble_adjoint_cauchy(circle128)
        A = assemble_kerzman_stein(circle128)
        one = BoundaryFunction.constant(circle128, 1.0)
        want = 0.5 * one.values - A.apply(one).values
        assert np.abs(Cs.apply(one).values - want).max() < 1e-13


class TestPlemeljProjections:
    def test_partition_of_identity_exact(self, circle128):
        Sp = plemelj_projection(circle128, "+")
        Sm = plemelj_projection(circle128, "-")
        assert np.abs(Sp.matrix + Sm.matrix - np.eye(Sp.matrix.shape[0])).max() == 0.0

    def test_idempotence(self, circle128, circle256):
        r = []
        for mesh in (circle128, circle256):
            Sp = plemelj_projection(mesh, "+")
            r.append(smooth_matrix_norm((Sp @ Sp).matrix - Sp.matrix, mesh))
        assert r[0] < 1e-3 and r[1] < 1e-3

    def test_exterior_trace_annihilated(self, circle256):
        g = BoundaryFunction.kernel_trace(circle256, np.array([3.0, 0.0]))
        Sp = plemelj_projection(circle256, "+")
        Sm = plemelj_projection(circle256, "-")
        assert l2_norm(Sp.apply(g) - g) / l2_norm(g) < 1e-8
        assert l2_norm(Sm.apply(g)) / l2_norm(g) < 1e-8


class TestPairingAndNorm:
    def test_norm_of_constants_is_total_measure(self, circle128):
        one = BoundaryFunction.constant(circle128, 1.0)
        assert abs(l2_norm(one) ** 2 - circle128.total_measure()) < 1e-12

    def test_pairing_blade_example(self, circle128):
        # delta-like e1 at one node against e1 at the same node
        alg = algebra(2)
        fv = np.zeros((circle128.size, 4), dtype=complex)
        fv[3, 1] = 1.0
        f = BoundaryFunction(circle128, fv)
        p = pairing(f, f)
        # bar(e1) e1 = -e1 e1 = 1, weighted by sigma_3
        assert abs(p.coeffs[0] - circle128.sigma[3]) < 1e-14
        assert np.abs(p.coeffs[1:]).max() < 1e-14

    def test_norm_positive_definite(self, circle128):
        f = band_limited(circle128, seed=3)
        assert l2_norm(f) > 0
        zero = BoundaryFunction.constant(circle128, 0.0)
        assert l2_norm(zero) == 0.0

    def test_mesh_mismatch_raises(self, circle128, circle256):
        f = BoundaryFunction.constant(circle128, 1.0)
        g = BoundaryFunction.constant(circle256, 1.0)
        with pytest.raises(ValueError):
            pairing(f, g)


class TestGenericKernel:
    def test_cauchy_kernel_reproduces_C(self, circle128):
        C = assemble_singular_cauchy(circle128)
        T = generic_kernel_operator(circle128, cauchy_kernel)
        # differ only by the diagonal rule
        diff = BlockOperator(circle128, C.matrix - T.matrix)
        assert diff.max_block_norm(off_diagonal_only=True) < 1e-13
        assert smooth_matrix_norm(C.matrix - T.matrix, circle128) < 1e-3

    def test_zero_kernel(self, circle128):
        T = generic_kernel_operator(circle128, lambda d: np.zeros_like(d))
        assert np.abs(T.matrix).max() == 0.0

    def test_scaled_odd_kernel_bounded(self):
        # K(z) = G(z) * sqrt(z^2): odd, homogeneous of degree -(n-2)
        def kern(d):
            from plemelj.algebra import vector_square

            s = np.sqrt(vector_square(d).astype(complex))
            return cauchy_kernel(d) * s[..., None]

        norms = [
            generic_kernel_operator(make_circle(N), kern).operator_norm() for N in (64, 128, 256)
        ]
        for a, b in zip(norms, norms[1:]):
            assert b <= 1.2 * a

    def test_nonfinite_kernel_rejected(self, circle128):
        def bad(d):
            out = np.asarray(cauchy_kernel(d)).copy()
            out[..., 0] = np.inf
            return out

        with pytest.raises(ValueError):
            generic_kernel_operator(circle128, bad)


class TestNearEvaluation:
    def test_subtracted_limit_matches_projection(self, circle256):
        f = monogenic_linear(circle256)
        Sp = plemelj_projection(circle256, "+")
        target = Sp.apply(f)
        idx = np.arange(circle256.size)
        pts = circle256.nodes * (1 - 1e-7)
        vals = cauchy_transform_points(circle256, f, pts, subtract_node=idx, interior=True)
        assert np.abs(vals - target.values).max() < 1e-6

    def test_exterior_subtracted_limit(self, circle256):
        f = band_limited(circle256, seed=5)
        Sm = plemelj_projection(circle256, "-")
        target = -1.0 * Sm.apply(f)
        idx = np.arange(circle256.size)
        pts = circle256.nodes * (1 + 1e-7)
        vals = cauchy_transform_points(circle256, f, pts, subtract_node=idx, interior=False)
        assert np.abs(vals - target.values).max() < 1e-6


class TestExport:
    def test_operator_json(self, tmp_path):
        import json

        m = make_circle(8)
        C = assemble_singular_cauchy(m)
        path = str(tmp_path / "op.json")
        export_operator_json(C, path)
        doc = json.load(open(path))
        assert doc["label"] == "C"
        assert len(doc["blocks"]) == 8
        b00 = np.array(doc["blocks"][0][0])
        assert np.abs(b00[..., 0] + 1j * b00[..., 1] - C.block(0, 0)).max() < 1e-15

    def test_spectrum_csv(self, tmp_path):
        m = make_circle(16)
        C = assemble_singular_cauchy(m)
        path = str(tmp_path / "spec.csv")
        export_spectrum_csv(C, path)
        lines = open(path).read().strip().splitlines()
        assert lines[0] == "index,singular_value"
        assert len(lines) == 1 + C.matrix.shape[0]


def test_block_operator_algebra(circle128):
    C = assemble_singular_cauchy(circle128)
    Sp = plemelj_projection(circle128, "+")
    f = band_limited(circle128, seed=9)
    g = band_limited(circle128, seed=10)
    # linearity of application
    lhs = C.apply(f + 2j * g)
    rhs = C.apply(f) + 2j * C.apply(g)
    assert np.abs(lhs.values - rhs.values).max() < 1e-12
    # composition corresponds to the block-matrix product
    comp = (Sp @ C).apply(f)
    seq = Sp.apply(C.apply(f))
    assert np.abs(comp.values - seq.values).max() < 1e-12
    # block accessor agrees with the flat matrix
    assert np.abs(C.block(2, 3) - C.matrix[8:12, 12:16]).max() == 0.0


def test_hermitian_inner_matches_weighted_dot(circle128):
    f = band_limited(circle128, seed=6)
    g = band_limited(circle128, seed=7)
    want = np.sum(np.conj(f.values) * g.values * circle128.sigma_abs[:, None])
    assert abs(hermitian_inner(f, g) - want) < 1e-12
