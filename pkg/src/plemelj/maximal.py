"""Discrete maximal and non-tangential maximal functions with norm diagnostics.

The sup over ball radii is replaced by a geometric schedule (the discrete
average only changes when a node enters the ball); the sup over approach
cones is replaced by a deterministic low-discrepancy sample, giving a
reproducible lower bound that is monotone in the sample count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import algebra
from .mesh import (
    BoundaryMesh,
    EmptyBallError,
    barrier_clearance,
    barrier_clearance_floor,
    cone_parameters,
    _cone_samples,
)
from .operators import (
    BoundaryFunction,
    _pair_kernel,
    _transform_points,
    assemble_singular_cauchy,
    l2_norm,
    omega,
)

__all__ = [
    "MaximalReport",
    "bound_diagnostics",
    "default_radii",
    "maximal_function",
    "nontangential_maximal",
]


def default_radii(mesh: BoundaryMesh) -> np.ndarray:
    """Geometric schedule 2h, 4h, ... up to the mesh diameter."""
    diam = 2.0 * 0.5 * float(
        np.max(np.sqrt(np.sum(np.abs(mesh.nodes[:1] - mesh.nodes) ** 2, axis=1)))
    ) * 2.0
    k = max(1, int(np.ceil(np.log2(diam / (2 * mesh.h)))) + 1)
    return 2.0 * mesh.h * 2.0 ** np.arange(k)


def _pair_distances(mesh: BoundaryMesh) -> np.ndarray:
    key = "pair_dist"
    if key not in mesh.cache:
        D = mesh.nodes[:, None, :] - mesh.nodes[None, :, :]
        mesh.cache[key] = np.sqrt(np.sum(np.abs(D) ** 2, axis=-1))
    return mesh.cache[key]


def maximal_function(mesh: BoundaryMesh, f: BoundaryFunction, radii=None) -> np.ndarray:
    """Max over the schedule of |sigma|-weighted ball averages of ||f||."""
    if radii is None:
        radii = default_radii(mesh)
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise ValueError("radius schedule is empty")
    if np.any(radii < 2 * mesh.h):
        raise ValueError("every radius must be at least 2h")
    alg = algebra(mesh.n)
    norms = alg.norm(f.values)
    dist = _pair_distances(mesh)
    out = np.zeros(mesh.size)
    for r in radii:
        mask = dist < r
        counts = mask.sum(axis=1)
        if np.any(counts < 2):
            raise EmptyBallError(f"ball of radius {r:.3g} captures no node beyond its center")
        meas = mask @ mesh.sigma_abs
        avg = (mask @ (norms * mesh.sigma_abs)) / meas
        out = np.maximum(out, avg)
    return out


def _cone_sample_cache(mesh: BoundaryMesh, alpha: float, r: float, count: int, seed: int):
    key = ("nt_samples", alpha, r, count, seed)
    if key not in mesh.cache:
        pts = np.concatenate(
            [_cone_samples(mesh, i, alpha, r, count, seed) for i in range(mesh.size)]
        )
        # samples within the barrier-resolution zone of dM are unusable
        near = barrier_clearance(pts, mesh) < barrier_clearance_floor(mesh)
        mesh.cache[key] = (pts, near.reshape(mesh.size, count))
    return mesh.cache[key]


def nontangential_maximal(
    mesh: BoundaryMesh,
    f: BoundaryFunction,
    alpha: float = None,
    r: float = None,
    samples_per_cone: int = 64,
    seed: int = 7,
):
    """Per-node max of the transform norm over sampled approach cones.

    Returns (values, skipped) where skipped counts cone samples discarded
    as NearBoundary.  A sampled sup is a lower bound for the true one and
    never decreases as samples_per_cone grows.
    """
    if alpha is None or r is None:
        alpha, r = cone_parameters(mesh)
    pts, near = _cone_sample_cache(mesh, alpha, r, samples_per_cone, seed)
    vals = _transform_points(mesh, f.values, pts)
    norms = algebra(mesh.n).norm(vals).reshape(mesh.size, samples_per_cone)
    norms = np.where(near, -np.inf, norms)
    out = norms.max(axis=1)
    out[~np.isfinite(out)] = 0.0  # every sample of a cone skipped
    return out, int(near.sum())


def _truncated_sup(mesh: BoundaryMesh, f: BoundaryFunction, radii) -> np.ndarray:
    """sup over the schedule of ||integral over dM minus B(w, eps) of G n f||."""
    alg = algebra(mesh.n)
    G = _pair_kernel(mesh)
    nf = np.einsum("jab,jb->ja", alg.left_vector_matrix(mesh.normals), f.values)
    pre = np.einsum("lab,jb->laj", alg.generator_left, nf * mesh.sigma[:, None])
    dist = _pair_distances(mesh)
    out = np.zeros(mesh.size)
    for eps in radii:
        mask = (dist > eps).astype(float)
        np.fill_diagonal(mask, 0.0)
        vals = np.einsum("ijl,laj,ij->ia", G, pre, mask) / omega(mesh.n)
        out = np.maximum(out, alg.norm(vals))
    return out


@dataclass
class MaximalReport:
    maximal: np.ndarray
    nontangential: np.ndarray
    cotlar_ratio: np.ndarray
    norm_f: float
    norm_maximal: float
    norm_nontangential: float
    skipped_cone_samples: int

    @property
    def c_maximal(self) -> float:
        return self.norm_maximal / self.norm_f

    @property
    def c_nontangential(self) -> float:
        return self.norm_nontangential / self.norm_f


def _weighted_l2(mesh: BoundaryMesh, values: np.ndarray) -> float:
    return float(np.sqrt(np.sum(values**2 * mesh.sigma_abs)))


def band_limited_family(mesh: BoundaryMesh, count: int, seed: int = 0, modes: int = 8):
    """Random smooth test functions; Fourier band on curves, low degree otherwise."""
    rng = np.random.default_rng(seed)
    alg = algebra(mesh.n)
    out = []
    for _ in range(count):
        if mesh.theta is not None:
            ms = np.arange(-modes, modes + 1)
            coef = rng.normal(size=(ms.size, alg.dim)) + 1j * rng.normal(size=(ms.size, alg.dim))
            vals = np.exp(1j * np.outer(mesh.theta, ms)) @ coef / np.sqrt(ms.size)
        else:
            x = mesh.nodes.real
            coef = rng.normal(size=(1 + mesh.n, alg.dim)) + 1j * rng.normal(size=(1 + mesh.n, alg.dim))
            vals = coef[0][None, :] + x @ coef[1:]
        out.append(BoundaryFunction(mesh, vals))
    return out


def bound_diagnostics(
    mesh: BoundaryMesh,
    family_size: int = 20,
    seed: int = 0,
    radii=None,
    samples_per_cone: int = 64,
):
    """Empirical maximal-inequality constants over a random smooth family.

    For each test function reports C_M = ||M f|| / ||f||, C_N = ||N f|| /
    ||f|| and the per-node Cotlar ratio sup_eps ||truncated C f|| /
    (M(Cf) + M(f)).  The constants are estimates, not proofs; stability
    under refinement is what the acceptance checks.
    """
    if radii is None:
        radii = default_radii(mesh)
    alpha, r = cone_parameters(mesh)
    C = assemble_singular_cauchy(mesh)
    reports = []
    for f in band_limited_family(mesh, family_size, seed):
        Mf = maximal_function(mesh, f, radii)
        Nf, skipped = nontangential_maximal(mesh, f, alpha, r, samples_per_cone)
        Cf = C.apply(f)
        MCf = maximal_function(mesh, Cf, radii)
        trunc = _truncated_sup(mesh, f, radii)
        cotlar = trunc / (MCf + Mf)
        reports.append(
            MaximalReport(
                maximal=Mf,
                nontangential=Nf,
                cotlar_ratio=cotlar,
                norm_f=l2_norm(f),
                norm_maximal=_weighted_l2(mesh, Mf),
                norm_nontangential=_weighted_l2(mesh, Nf),
                skipped_cone_samples=skipped,
            )
        )
    return reports
