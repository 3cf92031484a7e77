"""Dense boundary-integral operators over a BoundaryMesh.

Everything is assembled in Nystrom fashion: an operator is an (N d) x (N d)
complex matrix of d x d blocks (d = 2**n), each block the left-multiplication
matrix of a kernel value times a quadrature weight.

Kernel and sign conventions are fixed once by constant calibration: with
K(w, z) = G(w - z) and the chosen orientation of normals and measure, the
off-boundary transform of the constant function 1 equals 1 at interior
points and 0 at exterior points, and the principal-value operator C maps
constants to 1/2 exactly (its diagonal blocks are defined by that row-sum
rule).

On closed curves with even N the singular quadrature uses odd offsets only
with doubled weights; this reproduces the band-exact discrete conjugation
on the circle, so operator identities hold to quadrature accuracy on
band-limited data rather than stalling at first order.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .algebra import Multivector, algebra, cauchy_kernel, is_null
from .mesh import BoundaryMesh, Region, region_membership, validate_domain_manifold

__all__ = [
    "BlockOperator",
    "BoundaryFunction",
    "NearBoundaryError",
    "assemble_adjoint_cauchy",
    "assemble_kerzman_stein",
    "assemble_singular_cauchy",
    "cauchy_transform",
    "cauchy_transform_points",
    "export_operator_json",
    "export_spectrum_csv",
    "generic_kernel_operator",
    "l2_norm",
    "omega",
    "pairing",
    "plemelj_projection",
    "smooth_matrix_norm",
    "smooth_test_basis",
]


class NearBoundaryError(ValueError):
    """Transform evaluation requested on or numerically on the boundary."""


def omega(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


# -- boundary functions --------------------------------------------------------


class BoundaryFunction:
    """One multivector value per mesh node; the discrete L^2(dM) element."""

    def __init__(self, mesh: BoundaryMesh, values: np.ndarray):
        d = algebra(mesh.n).dim
        values = np.asarray(values, dtype=complex)
        if values.shape != (mesh.size, d):
            raise ValueError(f"expected values of shape {(mesh.size, d)}, got {values.shape}")
        self.mesh = mesh
        self.values = values

    @classmethod
    def constant(cls, mesh: BoundaryMesh, value=1.0) -> "BoundaryFunction":
        alg = algebra(mesh.n)
        if isinstance(value, Multivector):
            coeffs = value.coeffs
        else:
            coeffs = np.zeros(alg.dim, dtype=complex)
            coeffs[0] = value
        return cls(mesh, np.tile(coeffs, (mesh.size, 1)))

    @classmethod
    def from_callable(cls, mesh: BoundaryMesh, fn) -> "BoundaryFunction":
        """Sample fn(node) -> Multivector | coefficient vector at every node."""
        alg = algebra(mesh.n)
        rows = []
        for z in mesh.nodes:
            v = fn(z)
            rows.append(v.coeffs if isinstance(v, Multivector) else np.asarray(v, dtype=complex))
        return cls(mesh, np.array(rows))

    @classmethod
    def kernel_trace(cls, mesh: BoundaryMesh, pole: np.ndarray) -> "BoundaryFunction":
        """Boundary trace of G(. - pole)."""
        alg = algebra(mesh.n)
        pole = np.asarray(pole, dtype=complex)
        return cls(mesh, alg.embed_vector(cauchy_kernel(mesh.nodes - pole)))

    def copy(self) -> "BoundaryFunction":
        return BoundaryFunction(self.mesh, self.values.copy())

    def __add__(self, other: "BoundaryFunction") -> "BoundaryFunction":
        self._check(other)
        return BoundaryFunction(self.mesh, self.values + other.values)

    def __sub__(self, other: "BoundaryFunction") -> "BoundaryFunction":
        self._check(other)
        return BoundaryFunction(self.mesh, self.values - other.values)

    def __mul__(self, scalar) -> "BoundaryFunction":
        return BoundaryFunction(self.mesh, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return BoundaryFunction(self.mesh, -self.values)

    def _check(self, other):
        if other.mesh is not self.mesh and other.mesh.size != self.mesh.size:
            raise ValueError("mesh mismatch between boundary functions")

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def l2_norm(f: BoundaryFunction) -> float:
    """Weighted L^2 norm: identity part of sum star(f) f |sigma|."""
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2 * f.mesh.sigma_abs[:, None])))


def pairing(f: BoundaryFunction, g: BoundaryFunction) -> Multivector:
    """Clifford-bilinear pairing sum_j bar(f_j) g_j sigma_j."""
    f._check(g)
    alg = algebra(f.mesh.n)
    prod = alg.product(alg.bar(f.values), g.values)
    return Multivector(alg, np.sum(prod * f.mesh.sigma[:, None], axis=0))


def hermitian_inner(f: BoundaryFunction, g: BoundaryFunction) -> complex:
    """Positive inner product sum_j <f_j, g_j>_C |sigma|_j (test oracle use)."""
    f._check(g)
    return complex(np.sum(np.conj(f.values) * g.values * f.mesh.sigma_abs[:, None]))


# -- block operators -------------------------------------------------------------


class BlockOperator:
    """(N d) x (N d) complex matrix acting on stacked node coefficients."""

    def __init__(self, mesh: BoundaryMesh, matrix: np.ndarray, label: str = "custom"):
        self.mesh = mesh
        self.matrix = matrix
        self.label = label

    @classmethod
    def identity(cls, mesh: BoundaryMesh) -> "BlockOperator":
        d = algebra(mesh.n).dim
        return cls(mesh, np.eye(mesh.size * d, dtype=complex), "I")

    @property
    def block_dim(self) -> int:
        return algebra(self.mesh.n).dim

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.block_dim
        return self.matrix[i * d : (i + 1) * d, j * d : (j + 1) * d]

    def apply(self, f: BoundaryFunction) -> BoundaryFunction:
        if f.mesh.size != self.mesh.size:
            raise ValueError("operator and function live on different meshes")
        out = self.matrix @ f.flat()
        return BoundaryFunction(f.mesh, out.reshape(f.values.shape))

    def compose(self, other: "BlockOperator") -> "BlockOperator":
        return BlockOperator(self.mesh, self.matrix @ other.matrix, f"{self.label}*{other.label}")

    def __matmul__(self, other):
        return self.compose(other)

    def __add__(self, other):
        return BlockOperator(self.mesh, self.matrix + other.matrix, f"{self.label}+{other.label}")

    def __sub__(self, other):
        return BlockOperator(self.mesh, self.matrix - other.matrix, f"{self.label}-{other.label}")

    def __mul__(self, scalar):
        return BlockOperator(self.mesh, self.matrix * scalar, self.label)

    __rmul__ = __mul__

    def _weights(self):
        d = self.block_dim
        return np.repeat(np.sqrt(self.mesh.sigma_abs), d)

    def operator_norm(self) -> float:
        """Largest singular value w.r.t. the weighted L^2 inner product."""
        w = self._weights()
        return float(np.linalg.norm((self.matrix * (w[:, None] / w[None, :])), 2))

    def singular_values(self) -> np.ndarray:
        w = self._weights()
        return np.linalg.svd(self.matrix * (w[:, None] / w[None, :]), compute_uv=False)

    def max_block_norm(self, off_diagonal_only: bool = False) -> float:
        d = self.block_dim
        N = self.mesh.size
        blocks = self.matrix.reshape(N, d, N, d)
        norms = np.sqrt(np.sum(np.abs(blocks) ** 2, axis=(1, 3)))
        if off_diagonal_only:
            np.fill_diagonal(norms, 0.0)
        return float(norms.max())


# -- smooth test family ----------------------------------------------------------


def smooth_test_basis(mesh: BoundaryMesh, modes: int = 12) -> np.ndarray:
    """Weighted-orthonormal basis of a fixed smooth subspace, as columns.

    Curves get Fourier modes |m| <= modes tensored with all blades; other
    meshes get polynomial traces of degree <= 2.  Nystrom discretizations
    of singular operators converge strongly, not in norm, so identity
    residuals are measured on this family.
    """
    key = ("smooth_basis", modes)
    if key in mesh.cache:
        return mesh.cache[key]
    alg = algebra(mesh.n)
    d = alg.dim
    N = mesh.size
    if mesh.theta is not None:
        ms = np.arange(-modes, modes + 1)
        scal = np.exp(1j * np.outer(mesh.theta, ms))  # (N, M)
    else:
        x = mesh.nodes.real
        cols = [np.ones(N)]
        for a in range(mesh.n):
            cols.append(x[:, a])
            for b in range(a, mesh.n):
                cols.append(x[:, a] * x[:, b])
        scal = np.array(cols).T
    M = scal.shape[1]
    raw = np.zeros((N * d, M * d), dtype=complex)
    for c in range(d):
        raw[c::d, c * M : (c + 1) * M] = scal
    w = np.repeat(np.sqrt(mesh.sigma_abs), d)
    q, _ = np.linalg.qr(w[:, None] * raw)
    mesh.cache[key] = q
    return q


def smooth_matrix_norm(op_matrix: np.ndarray, mesh: BoundaryMesh, modes: int = 12) -> float:
    """Operator norm of the weighted matrix restricted to the smooth family."""
    q = smooth_test_basis(mesh, modes)
    d = algebra(mesh.n).dim
    w = np.repeat(np.sqrt(mesh.sigma_abs), d)
    weighted = (op_matrix * (w[:, None] / w[None, :])) @ q
    return float(np.linalg.norm(weighted, 2))


# -- assembly ---------------------------------------------------------------------


def _pair_kernel(mesh: BoundaryMesh) -> np.ndarray:
    """G(w_i - z_j) components for all pairs, junk on the diagonal."""
    diffs = mesh.nodes[:, None, :] - mesh.nodes[None, :, :]
    idx = np.arange(mesh.size)
    diffs[idx, idx, 0] = 1.0  # placeholder off the null cone; diagonal set later
    return cauchy_kernel(diffs)


def _quad_weights(mesh: BoundaryMesh) -> np.ndarray:
    """(N, N) quadrature weight matrix for singular kernels.

    Closed curves with even N use odd offsets with doubled weights (the
    alternate-point trapezoid rule, exact on the circle's band); other
    meshes use the punctured rule.
    """
    N = mesh.size
    if mesh.curve_order and N % 2 == 0:
        i = np.arange(N)
        parity = ((i[:, None] - i[None, :]) % 2).astype(float)
        return parity * (2.0 * mesh.sigma)[None, :]
    W = np.tile(mesh.sigma, (N, 1))
    np.fill_diagonal(W, 0.0)
    return W


def _blocks_to_matrix(blocks: np.ndarray) -> np.ndarray:
    N, d = blocks.shape[0], blocks.shape[2]
    return blocks.transpose(0, 2, 1, 3).reshape(N * d, N * d)


def assemble_singular_cauchy(mesh: BoundaryMesh, validate: bool = True) -> BlockOperator:
    """Principal-value Cauchy operator C with the constant-calibrated diagonal.

    Off-diagonal blocks are (1/omega) L(G(w_i - z_j)) L(n_j) w_ij; the
    diagonal absorbs the quadrature's principal-value defect through
    diag_i = I/2 - sum_{j != i} block_ij, which makes C(const) = const/2
    exact for every constant multivector.
    """
    key = "op_C"
    if key in mesh.cache:
        return mesh.cache[key]
    if validate:
        report = validate_domain_manifold(mesh)
        if not report.passed:
            from .mesh import ValidationFailedError

            raise ValidationFailedError(report)
    alg = algebra(mesh.n)
    G = _pair_kernel(mesh)
    LG = alg.left_vector_matrix(G)
    Ln = alg.left_vector_matrix(mesh.normals)
    W = _quad_weights(mesh)
    blocks = np.einsum("ijab,jbc,ij->ijac", LG, Ln, W) / omega(mesh.n)
    idx = np.arange(mesh.size)
    blocks[idx, idx] = 0.0
    rowsum = blocks.sum(axis=1)
    blocks[idx, idx] = 0.5 * np.eye(alg.dim)[None, :, :] - rowsum
    op = BlockOperator(mesh, _blocks_to_matrix(blocks), "C")
    mesh.cache[key] = op
    return op


def _cancelled_kernel_coeffs(alg, G, n_row, n_col) -> np.ndarray:
    """Coefficients of G(w-z) n(z) + n(w) G(w-z), written without cancellation.

    For vectors, u v + v u = -2 <u, v>, so the singular parts drop out
    analytically:  G (n(z) - n(w)) - 2 <G, n(w)>.
    """
    delta = n_col - n_row
    scal = -np.sum(G * (n_col + n_row), axis=-1)
    out = np.zeros(G.shape[:-1] + (alg.dim,), dtype=complex)
    out[..., 0] = scal
    n = alg.n
    slot = {}
    for i, blade in enumerate(alg.blades):
        if len(blade) == 2:
            slot[blade] = i
    for a in range(n):
        for b in range(a + 1, n):
            out[..., slot[(a + 1, b + 1)]] = G[..., a] * delta[..., b] - G[..., b] * delta[..., a]
    return out


def assemble_kerzman_stein(mesh: BoundaryMesh, validate: bool = True) -> BlockOperator:
    """Kerzman-Stein operator A = C - C* (continuous, singularity-cancelled kernel).

    C* is the transpose of C with respect to the bilinear pairing
    <f, g> = integral bar(f) g dsigma, which is the reading under which the
    singularities cancel (and A vanishes identically on the circle).  The
    diagonal is the Richardson extrapolation of the cancelled kernel from
    the two nearest neighbor rings.
    """
    key = "op_A"
    if key in mesh.cache:
        return mesh.cache[key]
    if validate:
        report = validate_domain_manifold(mesh)
        if not report.passed:
            from .mesh import ValidationFailedError

            raise ValidationFailedError(report)
    alg = algebra(mesh.n)
    N = mesh.size
    G = _pair_kernel(mesh)
    n_row = np.broadcast_to(mesh.normals[:, None, :], G.shape)
    n_col = np.broadcast_to(mesh.normals[None, :, :], G.shape)
    K = _cancelled_kernel_coeffs(alg, G, n_row, n_col)
    idx = np.arange(N)

    # diagonal limit via Richardson extrapolation along the surface
    if mesh.curve_order:
        ring1 = np.stack([(idx + 1) % N, (idx - 1) % N], axis=1)
        ring2 = np.stack([(idx + 2) % N, (idx - 2) % N], axis=1)
    else:
        edges = mesh.edge_list()
        nbrs = [[] for _ in range(N)]
        for a, b in edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        second = []
        for i in range(N):
            s = set()
            for j in nbrs[i]:
                s.update(nbrs[j])
            s.discard(i)
            s -= set(nbrs[i])
            second.append(sorted(s))
        k1 = np.array([K[i, nbrs[i]].mean(axis=0) for i in range(N)])
        k2 = np.array([K[i, second[i]].mean(axis=0) for i in range(N)])
    if mesh.curve_order:
        k1 = K[idx[:, None], ring1].mean(axis=1)
        k2 = K[idx[:, None], ring2].mean(axis=1)
    K[idx, idx] = (4.0 * k1 - k2) / 3.0

    W = np.tile(mesh.sigma, (N, 1))  # smooth kernel: plain trapezoid everywhere
    LK = alg.left_matrix(K)
    blocks = np.einsum("ijab,ij->ijab", LK, W) / omega(mesh.n)
    op = BlockOperator(mesh, _blocks_to_matrix(blocks), "A")
    mesh.cache[key] = op
    return op


def assemble_adjoint_cauchy(mesh: BoundaryMesh) -> BlockOperator:
    """C* = C - A: the bilinear-pairing transpose of C."""
    key = "op_Cstar"
    if key in mesh.cache:
        return mesh.cache[key]
    op = assemble_singular_cauchy(mesh) - assemble_kerzman_stein(mesh)
    op.label = "C*"
    mesh.cache[key] = op
    return op


def plemelj_projection(mesh: BoundaryMesh, sign: str = "+") -> BlockOperator:
    """Boundary projection S+ = I/2 + C or S- = I/2 - C."""
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    key = f"op_S{sign}"
    if key in mesh.cache:
        return mesh.cache[key]
    C = assemble_singular_cauchy(mesh)
    eye = np.eye(C.matrix.shape[0], dtype=complex)
    s = 1.0 if sign == "+" else -1.0
    op = BlockOperator(mesh, 0.5 * eye + s * C.matrix, f"S{sign}")
    mesh.cache[key] = op
    return op


def generic_kernel_operator(mesh: BoundaryMesh, kernel, label: str = "T_K") -> BlockOperator:
    """Nystrom operator for a user kernel K(w - z), odd-symmetry zero diagonal.

    kernel maps difference vectors (..., n) to either grade-1 components
    (..., n) or full coefficient arrays (..., 2**n).  Assembly matches the
    Cauchy operator except that diagonal blocks are zero (the principal
    value of an odd kernel over a symmetric neighborhood).
    """
    alg = algebra(mesh.n)
    N = mesh.size
    diffs = mesh.nodes[:, None, :] - mesh.nodes[None, :, :]
    idx = np.arange(N)
    diffs[idx, idx, 0] = 1.0
    K = np.asarray(kernel(diffs), dtype=complex)
    if K.shape[-1] == mesh.n:
        K = alg.embed_vector(K)
    K[idx, idx] = 0.0
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel returned non-finite values on mesh differences")
    LK = alg.left_matrix(K)
    Ln = alg.left_vector_matrix(mesh.normals)
    W = _quad_weights(mesh)
    blocks = np.einsum("ijab,jbc,ij->ijac", LK, Ln, W) / omega(mesh.n)
    blocks[idx, idx] = 0.0
    return BlockOperator(mesh, _blocks_to_matrix(blocks), label)


# -- off-boundary transforms -------------------------------------------------------


def _transform_points(mesh: BoundaryMesh, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """(1/omega) sum_j G(u - z_j) n_j f_j sigma_j at each point, vectorized."""
    alg = algebra(mesh.n)
    points = np.asarray(points, dtype=complex).reshape(-1, mesh.n)
    nf = np.einsum("jab,jb->ja", alg.left_vector_matrix(mesh.normals), values)
    nfs = nf * mesh.sigma[:, None]
    pre = np.einsum("lab,jb->laj", alg.generator_left, nfs)  # (n, d, N)
    out = np.empty((points.shape[0], alg.dim), dtype=complex)
    chunk = max(1, int(4e6 / mesh.size))
    for s0 in range(0, points.shape[0], chunk):
        rows = slice(s0, min(s0 + chunk, points.shape[0]))
        diffs = points[rows, None, :] - mesh.nodes[None, :, :]
        G = cauchy_kernel(diffs)
        out[rows] = np.einsum("mjl,laj->ma", G, pre)
    return out / omega(mesh.n)


def cauchy_transform(mesh: BoundaryMesh, f: BoundaryFunction, w) -> Multivector:
    """Off-boundary Cauchy transform of f at the point w.

    Refuses points classified NearBoundary.  The naive quadrature is
    spectrally accurate away from dM and degrades like h/dist close to it;
    use cauchy_transform_points(..., subtract_node=...) for controlled
    near-boundary evaluation.
    """
    w = np.asarray(w, dtype=complex)
    if region_membership(w, mesh) is Region.NEAR_BOUNDARY:
        raise NearBoundaryError("evaluation point is numerically on the boundary")
    alg = algebra(mesh.n)
    return Multivector(alg, _transform_points(mesh, f.values, w[None, :])[0])


def cauchy_transform_points(
    mesh: BoundaryMesh,
    f: BoundaryFunction,
    points: np.ndarray,
    subtract_node=None,
    interior: bool = True,
) -> np.ndarray:
    """Batch transform; optional singularity subtraction for near evaluation.

    With subtract_node[m] = i, the value at points[m] is computed from the
    integrand G(u - z) n(z) (f(z) - f(z_i)) plus chi * f(z_i), where chi is
    1 for interior targets and 0 for exterior ones.  The added term is
    exactly zero in the continuum, the subtraction removes the h/dist
    quadrature blow-up near z_i, and the quadrature weights are those of
    node i's row in the singular operator, so the s -> 0 limit reproduces
    the Nystrom boundary projection exactly.
    """
    points = np.asarray(points, dtype=complex).reshape(-1, mesh.n)
    if subtract_node is None:
        return _transform_points(mesh, f.values, points)
    alg = algebra(mesh.n)
    subtract_node = np.asarray(subtract_node, dtype=int)
    chi = 1.0 if interior else 0.0
    W = _quad_weights(mesh)[subtract_node]  # (M, N) row weights
    nf = np.einsum("jab,jb->ja", alg.left_vector_matrix(mesh.normals), f.values)
    n1 = mesh.normals  # n_j acting on the constant 1 is the vector itself
    pre_f = np.einsum("lab,jb->laj", alg.generator_left, nf)
    pre_1 = np.einsum("lab,jb->laj", alg.generator_left, alg.embed_vector(n1))
    out = np.empty((points.shape[0], alg.dim), dtype=complex)
    chunk = max(1, int(4e6 / mesh.size))
    for s0 in range(0, points.shape[0], chunk):
        rows = slice(s0, min(s0 + chunk, points.shape[0]))
        diffs = points[rows, None, :] - mesh.nodes[None, :, :]
        # pairs on the null cone carry zero quadrature weight (they sit at
        # the subtracted node); park them off the cone before evaluating
        Wr = np.array(W[rows])
        bad = is_null(diffs)
        if np.any(bad):
            diffs = diffs.copy()
            diffs[bad] = np.eye(mesh.n)[0]
            Wr[bad] = 0.0
        G = cauchy_kernel(diffs)
        base = np.einsum("mjl,laj,mj->ma", G, pre_f, Wr)
        unit = np.einsum("mjl,laj,mj->ma", G, pre_1, Wr)
        fi = f.values[subtract_node[rows]]
        Lu = alg.left_matrix(unit / omega(mesh.n))
        out[rows] = base / omega(mesh.n) - (
            np.einsum("mab,mb->ma", Lu, fi) - chi * fi
        )
    return out


# -- export -----------------------------------------------------------------------


def export_operator_json(op: BlockOperator, path: str):
    """Block-major, row-major within block, [re, im] scalar pairs."""
    d = op.block_dim
    N = op.mesh.size
    blocks = []
    for i in range(N):
        row = []
        for j in range(N):
            b = op.block(i, j)
            row.append([[[float(v.real), float(v.imag)] for v in r] for r in b])
        blocks.append(row)
    with open(path, "w") as fh:
        json.dump({"label": op.label, "n": op.mesh.n, "N": N, "blocks": blocks}, fh)


def export_spectrum_csv(op: BlockOperator, path: str):
    sv = op.singular_values()
    with open(path, "w") as fh:
        fh.write("index,singular_value\n")
        for k, s in enumerate(sv):
            fh.write(f"{k},{s:.16e}\n")
