"""Evaluation quantities for correspondences, transferred meshes, functional maps and spectra."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .basis import project_boundary
from .laplacian import assemble_operators
from .mesh.core import SurfaceMesh, TetMesh, extract_boundary
from .mesh.geodesic import GeodesicCache

NORMALIZATIONS = ("diameter", "sqrt-area", "cbrt-volume")


@dataclass
class ErrorCurve:
    """Cumulative geodesic error: fraction of vertices with error <= threshold."""

    thresholds: np.ndarray
    fractions: np.ndarray
    age: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", "fraction"])
            w.writerows(zip(self.thresholds.tolist(), self.fractions.tolist()))


def normalization_factor(mesh, normalization):
    """Length scale used to make geodesic errors unitless.

    ``diameter`` is the bounding-box diagonal, ``sqrt-area`` the square root
    of the (boundary) surface area and ``cbrt-volume`` the cube root of the
    tet volume.
    """
    if normalization == "diameter":
        return mesh.bbox_diagonal() if isinstance(mesh, TetMesh) else float(np.linalg.norm(np.ptp(mesh.vertices, axis=0)))
    if normalization == "sqrt-area":
        surf = mesh if isinstance(mesh, SurfaceMesh) else extract_boundary(mesh)
        return float(np.sqrt(surf.total_area))
    if normalization == "cbrt-volume":
        if not isinstance(mesh, TetMesh):
            raise ValueError("cbrt-volume normalization needs a tet mesh")
        return float(np.cbrt(mesh.total_volume))
    raise ValueError(f"unknown normalization {normalization!r}; choose from {NORMALIZATIONS}")


def error_curve(errors, thresholds=None, num=101):
    errors = np.asarray(errors, dtype=float)
    if thresholds is None:
        thresholds = np.linspace(0.0, errors.max(initial=0.0), num)
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be ascending")
    srt = np.sort(errors)
    fractions = np.searchsorted(srt, thresholds, side="right") / max(errors.size, 1)
    return ErrorCurve(thresholds, fractions, float(errors.mean()) if errors.size else 0.0)


def geodesic_error_stats(pi, pi_gt, target, normalization="cbrt-volume", thresholds=None, cache=None):
    """Per-vertex geodesic error ``d_N(pi_gt(v), pi(v)) / norm`` and its cumulative curve.

    Parameters
    ----------
    pi, pi_gt : Correspondence
        Total maps into ``target``.
    target : TetMesh or SurfaceMesh
    normalization : {'diameter', 'sqrt-area', 'cbrt-volume'}
    thresholds : array, optional
    cache : GeodesicCache, optional
        Reused Dijkstra rows on ``target``.

    Returns
    -------
    errors : array, shape=[n_source]
    curve : ErrorCurve
    """
    a, b = np.asarray(pi.map), np.asarray(pi_gt.map)
    if a.shape != b.shape:
        raise ValueError("correspondences have different lengths")
    if (a < 0).any() or (b < 0).any():
        raise ValueError("geodesic error needs total correspondences")
    cache = GeodesicCache(target) if cache is None else cache
    err = cache.distance(b, a) / normalization_factor(target, normalization)
    return err, error_curve(err, thresholds)


@dataclass
class FlipReport:
    """Per-tet Jacobian determinants of a piecewise-affine map."""

    per_tet_det: np.ndarray
    flipped_count: int
    flipped_fraction: float
    distortion: np.ndarray

    @property
    def flipped(self):
        return np.flatnonzero(self.per_tet_det <= 0)

    def write(self, path):
        """Sidecar: summary header, then ``tet det sign`` per tet."""
        with open(path, "w") as fh:
            fh.write(f"# flipped {self.flipped_count} of {self.per_tet_det.size} ({self.flipped_fraction:.6g})\n")
            for t, d in enumerate(self.per_tet_det.tolist()):
                fh.write(f"{t} {d!r} {1 if d > 0 else -1}\n")


def read_flip_sidecar(path):
    """Return ``(flipped_count, dets)`` from a sidecar written by :meth:`FlipReport.write`."""
    with open(path) as fh:
        head = fh.readline().split()
        data = np.loadtxt(fh, ndmin=2)
    return int(head[2]), (data[:, 1] if data.size else np.empty(0))


def flip_report(source, coords):
    """Jacobian determinants of the affine map taking each source tet onto its image.

    Parameters
    ----------
    source : TetMesh
    coords : array, shape=[n, 3]
        Mapped vertex positions.

    Returns
    -------
    FlipReport
    """
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (source.n_vertices, 3):
        raise ValueError(f"mapped coordinates must be ({source.n_vertices}, 3), got {coords.shape}")
    t = source.tets
    det_e = np.linalg.det(np.stack([source.vertices[t[:, c]] - source.vertices[t[:, 0]] for c in (1, 2, 3)], axis=-1))
    if np.any(np.abs(det_e) <= 1e-14 * source.bbox_diagonal() ** 3):
        raise ValueError("degenerate source tet: edge matrix is singular")
    det_m = np.linalg.det(np.stack([coords[t[:, c]] - coords[t[:, 0]] for c in (1, 2, 3)], axis=-1))
    det = det_m / det_e
    count = int((det <= 0).sum())
    return FlipReport(det, count, count / det.size, np.abs(1.0 - det))


def _mass(mesh, ops):
    return (assemble_operators(mesh) if ops is None else ops).mass_diag


def map_quality(pi, source, target, ops_source=None, ops_target=None, cache=None):
    """Continuity, coverage and Dirichlet energy of a vertex map.

    continuity
        Mean over source edges ``(i, j)`` of ``d_N(pi(i), pi(j)) / |v_i - v_j|``.
    coverage
        Lumped mass of the distinct image vertices over the total target mass.
    dirichlet
        ``sum_c g_c^T S_M g_c`` for the target coordinates pulled back by
        ``pi``, over the squared target bounding-box diagonal.
    """
    j = np.asarray(pi.map)
    if j.size != source.n_vertices or (j < 0).any():
        raise ValueError("map quality needs a total correspondence")
    cache = GeodesicCache(target) if cache is None else cache
    e = source.edges
    lengths = np.linalg.norm(source.vertices[e[:, 0]] - source.vertices[e[:, 1]], axis=1)
    continuity = float(np.mean(cache.distance(j[e[:, 0]], j[e[:, 1]]) / lengths))
    mass_t = _mass(target, ops_target)
    coverage = float(mass_t[np.unique(j)].sum() / mass_t.sum())
    S = (assemble_operators(source) if ops_source is None else ops_source).stiffness
    g = target.vertices[j]
    diam = normalization_factor(target, "diameter")
    dirichlet = float(np.einsum("ic,ic->", g, S @ g) / diam**2)
    return {"continuity": continuity, "coverage": coverage, "dirichlet": dirichlet}


def fmap_quality(C, evals_M, evals_N):
    """``||C^T C - I||_F / ||I||_F`` and ``||C L_M - L_N C||_F / ||C L_M||_F``."""
    C = np.asarray(C, dtype=float)
    k = C.shape[0]
    if C.shape != (k, k) or len(evals_M) != k or len(evals_N) != k:
        raise ValueError("fmap_quality needs a square C and k eigenvalues on each side")
    I = np.eye(k)
    ortho = np.linalg.norm(C.T @ C - I) / np.linalg.norm(I)
    CL = C * np.asarray(evals_M)[None, :]
    den = np.linalg.norm(CL)
    if not den > 0:
        raise ValueError("||C Lambda_M|| is zero; commutativity is undefined")
    comm = np.linalg.norm(CL - np.asarray(evals_N)[:, None] * C) / den
    return {"orthogonality": float(ortho), "commutativity": float(comm)}


@dataclass
class SpectrumComparison:
    relative_diffs: np.ndarray
    offset_diffs: np.ndarray
    dim: int

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "relative_diff", "offset_diff"])
            for i, (r, o) in enumerate(zip(self.relative_diffs.tolist(), self.offset_diffs.tolist())):
                w.writerow([i, r, o])


def offsets(evals, dim=3):
    """Consecutive differences of the (Weyl-transformed for ``dim=3``) spectrum, first entry kept as is."""
    lam = np.asarray(evals, dtype=float)
    if dim == 3:
        lam = np.sign(lam) * np.abs(lam) ** 1.5
    elif dim != 2:
        raise ValueError("dim must be 2 or 3")
    return np.diff(lam, prepend=0.0)


def spectrum_offset_error(evals_A, evals_B, dim=3, eps=1e-12):
    """Relative and offset differences between two spectra of unit-size shapes.

    Relative differences use ``max(lambda_A, lambda_B, eps)`` as denominator so
    the comparison is symmetric.
    """
    a, b = np.asarray(evals_A, dtype=float), np.asarray(evals_B, dtype=float)
    if a.shape != b.shape:
        raise ValueError("spectra must have equal length")
    for lam in (a, b):
        if np.any(np.diff(lam) < -1e-12 * max(1.0, np.abs(lam).max(initial=0))):
            raise ValueError("eigenvalues must be ascending")
    rel = np.abs(a - b) / np.maximum(np.maximum(a, b), eps)
    off = np.abs(offsets(a, dim) - offsets(b, dim))
    return SpectrumComparison(rel, off, dim)


def _sample_pairs(rng, n, num, dist):
    """``num`` vertex pairs with nonzero source distance; zero-distance pairs are redrawn."""
    x = rng.integers(n, size=num)
    y = rng.integers(n, size=num)
    for _ in range(100):
        bad = np.flatnonzero(dist(x, y) <= 0)
        if not bad.size:
            return x, y
        y[bad] = rng.integers(n, size=bad.size)
    raise ValueError("could not draw pairs with positive distance")


def geodesic_distortion_stats(M, N, pi_gt, num_samples=100_000, seed=0):
    """Relative geodesic distortion on the boundary surfaces and through the volumes.

    Pairs ``(x, y)`` are drawn on the boundary of ``M``; ``SurfErr`` uses
    Dijkstra distances on the boundary edge graphs, ``VolErr`` on the tet edge
    graphs.

    Parameters
    ----------
    M, N : TetMesh
    pi_gt : Correspondence
        Vertex map ``M -> N``, total on the boundary of ``M`` and sending it
        to the boundary of ``N``.
    num_samples : int
    seed : int

    Returns
    -------
    dict
        ``{'surf': (mean, std), 'vol': (mean, std)}``.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    bM, bN = extract_boundary(M), extract_boundary(N)
    img = np.asarray(pi_gt.map)[bM.parent_map]
    if (img < 0).any():
        raise ValueError("pi_gt must be total on the boundary")
    local_N = np.full(N.n_vertices, -1)
    local_N[bN.parent_map] = np.arange(bN.n_vertices)
    img_local = local_N[img]
    if (img_local < 0).any():
        raise ValueError("pi_gt sends boundary vertices into the interior")
    gM, gbM, gN, gbN = GeodesicCache(M), GeodesicCache(bM), GeodesicCache(N), GeodesicCache(bN)
    rng = np.random.default_rng(seed)
    x, y = _sample_pairs(rng, bM.n_vertices, num_samples, gbM.distance)
    ds_M = gbM.distance(x, y)
    ds_N = gbN.distance(img_local[x], img_local[y])
    dv_M = gM.distance(bM.parent_map[x], bM.parent_map[y])
    dv_N = gN.distance(img[x], img[y])
    surf = np.abs(ds_M - ds_N) / ds_M
    vol = np.abs(dv_M - dv_N) / dv_M
    return {"surf": (float(surf.mean()), float(surf.std())), "vol": (float(vol.mean()), float(vol.std()))}


def boundary_trace_reconstruction_error(trace, surface_basis, surface_mass):
    """Squared surface-L2 residual of each surface eigenfunction after fitting with the trace.

    The fit is the mass-weighted least-squares projection onto the span of
    the trace, so every error of a unit-norm function lies in ``[0, 1]``.

    Parameters
    ----------
    trace : array, shape=[n_b, k]
    surface_basis : array, shape=[n_b, k]
        Unit-norm in the surface mass inner product.
    surface_mass : array, shape=[n_b]

    Returns
    -------
    errors : array, shape=[k]
    """
    Psi = np.asarray(surface_basis, dtype=float)
    a = project_boundary(trace, Psi, mass=surface_mass)
    R = Psi - trace @ a
    return np.asarray(surface_mass) @ R**2


def write_rows_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
