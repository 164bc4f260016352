"""Connectivity transfer, coordinate extrapolation, surface matching through volumes, labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import augment_cmh, project_boundary
from .fmap import MatchConfig, extract_p2p, match_volumes
from .laplacian import assemble_volume_operators
from .mesh.core import TetMesh, extract_boundary
from .mesh.geodesic import Correspondence
from .mesh.io import write_medit
from .metrics import FlipReport, flip_report, write_rows_csv
from .spectral import compute_eigenbasis

MODES = ("transfer", "extrapolate")


@dataclass(eq=False)
class TransferResult:
    """Source connectivity with coordinates carried over from the target.

    Attributes
    ----------
    mesh : TetMesh
        Tets identical to the source mesh.
    flips : FlipReport
    mode : {'transfer', 'extrapolate'}
    k_used : int
    """

    mesh: TetMesh
    flips: FlipReport
    mode: str
    k_used: int


def volume_basis(mesh, k, kind="lbo", lbo=None):
    """LBO or CMH basis of size ``k`` on a tet mesh (``lbo`` may be a precomputed larger LBO)."""
    if kind not in ("lbo", "cmh"):
        raise ValueError(f"transfer supports 'lbo' and 'cmh' bases, got {kind!r}")
    if lbo is None or lbo.k < k:
        lbo = compute_eigenbasis(assemble_volume_operators(mesh), k)
    basis = lbo.truncated(k)
    return augment_cmh(basis, mesh.vertices) if kind == "cmh" else basis


def _checked_surface_map(pi_surf, n_bM, n_bN):
    j = np.asarray(pi_surf.map)
    if j.size != n_bM:
        raise ValueError(f"surface map has {j.size} entries, boundary of M has {n_bM} vertices")
    if pi_surf.n_target != n_bN:
        raise ValueError(f"surface map targets {pi_surf.n_target} vertices, boundary of N has {n_bN}")
    rows = np.flatnonzero(j >= 0)
    if not rows.size:
        raise ValueError("surface map is empty")
    return rows, j[rows]


def _result(M, X, mode, k):
    mesh = M.with_vertices(X)
    return TransferResult(mesh, flip_report(M, X), mode, k)


def transfer_connectivity(M, N, pi_surf, k, kind="lbo", basis_M=None, basis_N=None, surf_M=None, surf_N=None):
    """Carry the coordinates of ``N`` onto the connectivity of ``M`` through a functional map.

    The map is fitted on the boundary, ``C = Phi_dM^+ Phi_dN[pi]``, and the
    coordinates follow ``X = Phi_M C Phi_N^T W_N X_N``.

    Parameters
    ----------
    M, N : TetMesh
    pi_surf : Correspondence
        Boundary vertices of ``M`` to boundary vertices of ``N`` (surface
        indices); unmapped entries are left out of the fit.
    k : int
    kind : {'lbo', 'cmh'}
    basis_M, basis_N : SpectralBasis, optional
        Precomputed LBO bases with at least ``k`` functions.
    surf_M, surf_N : SurfaceMesh, optional
        Boundaries, as returned by ``extract_boundary``.

    Returns
    -------
    TransferResult
    """
    surf_M = extract_boundary(M) if surf_M is None else surf_M
    surf_N = extract_boundary(N) if surf_N is None else surf_N
    rows, tgt = _checked_surface_map(pi_surf, surf_M.n_vertices, surf_N.n_vertices)
    if k > rows.size:
        raise ValueError(f"k={k} exceeds the {rows.size} mapped boundary vertices")
    PM = volume_basis(M, k, kind, basis_M)
    PN = volume_basis(N, k, kind, basis_N)
    trace_M = PM.functions[surf_M.parent_map[rows]]
    trace_N = PN.functions[surf_N.parent_map[tgt]]
    C = project_boundary(trace_M, trace_N)
    coeffs_N = PN.functions.T @ (PN.mass[:, None] * N.vertices)
    X = PM.functions @ (C @ coeffs_N)
    return _result(M, X, "transfer", k)


def extrapolate_coordinates(M, surf_N, pi_surf, k, kind="lbo", basis_M=None, surf_M=None):
    """Fit the target boundary positions with the boundary trace of ``M`` and evaluate inside.

    ``X = Phi_M Phi_dM^+ X_dN[pi]``; only the spectrum of ``M`` is needed.

    Parameters
    ----------
    M : TetMesh
    surf_N : SurfaceMesh
        Target boundary surface.
    pi_surf : Correspondence
        Boundary vertices of ``M`` to vertices of ``surf_N``.
    k : int
    kind : {'lbo', 'cmh'}
    basis_M : SpectralBasis, optional
    surf_M : SurfaceMesh, optional

    Returns
    -------
    TransferResult
    """
    surf_M = extract_boundary(M) if surf_M is None else surf_M
    rows, tgt = _checked_surface_map(pi_surf, surf_M.n_vertices, surf_N.n_vertices)
    if k > rows.size:
        raise ValueError(f"k={k} exceeds the {rows.size} mapped boundary vertices")
    PM = volume_basis(M, k, kind, basis_M)
    a = project_boundary(PM.functions[surf_M.parent_map[rows]], surf_N.vertices[tgt])
    return _result(M, PM.functions @ a, "extrapolate", k)


def vol2surf_match(M, N, cfg=None, **kwargs):
    """Boundary correspondence obtained by matching the volumes.

    The functional map is estimated and refined on the full tet meshes;
    the point-to-point map is then searched among boundary traces only.

    Returns
    -------
    pi_surf : Correspondence
        Boundary vertices of ``M`` to boundary vertices of ``N`` (surface indices).
    C : array
    """
    cfg = MatchConfig() if cfg is None else cfg
    C, sM, sN, _ = match_volumes(M, N, cfg, **kwargs)
    bM, bN = extract_boundary(M), extract_boundary(N)
    pi = extract_p2p(sM.basis, sN.basis, C, source_rows=bM.parent_map, target_rows=bN.parent_map, method=cfg.nn_method)
    local = np.full(N.n_vertices, -1)
    local[bN.parent_map] = np.arange(bN.n_vertices)
    return Correspondence(local[pi.map], bN.n_vertices), C


def boundary_restriction(pi, surf_M, surf_N):
    """Restrict a volume map to the boundaries; vertices landing inside are unmapped (-1)."""
    local = np.full(pi.n_target, -1)
    local[surf_N.parent_map] = np.arange(surf_N.n_vertices)
    return Correspondence(local[np.asarray(pi.map)[surf_M.parent_map]], surf_N.n_vertices)


def transfer_labels(pi, labels):
    """Pull integer labels back along ``pi``: ``out[i] = labels[pi[i]]``."""
    labels = np.asarray(labels)
    if labels.shape[0] != pi.n_target:
        raise ValueError(f"{labels.shape[0]} labels for a target of {pi.n_target} vertices")
    j = np.asarray(pi.map)
    if (j < 0).any():
        raise ValueError("label transfer needs a total correspondence")
    return labels[j]


def export_warm_start(result, path):
    """Write the transferred mesh as MEDIT and its flip sidecar ``<path>.flips.txt``.

    Returns
    -------
    sidecar : str
    """
    write_medit(path, result.mesh.vertices, tets=result.mesh.tets)
    sidecar = f"{path}.flips.txt"
    result.flips.write(sidecar)
    return sidecar


def transfer_sweep(M, N, pi_surf, ks, kind="lbo", mode="transfer"):
    """Flip statistics of transfer (or extrapolation) for several basis sizes.

    Bases are computed once at ``max(ks)`` and truncated.

    Returns
    -------
    rows : list of dict
        ``k``, ``fraction_of_spectrum``, ``flipped_count``, ``flipped_fraction``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    ks = [int(k) for k in ks]
    kmax = max(ks)
    surf_M, surf_N = extract_boundary(M), extract_boundary(N)
    lbo_M = compute_eigenbasis(assemble_volume_operators(M), kmax)
    lbo_N = compute_eigenbasis(assemble_volume_operators(N), kmax) if mode == "transfer" else None
    rows = []
    for k in ks:
        if mode == "transfer":
            r = transfer_connectivity(M, N, pi_surf, k, kind, lbo_M, lbo_N, surf_M, surf_N)
        else:
            r = extrapolate_coordinates(M, surf_N, pi_surf, k, kind, lbo_M, surf_M)
        rows.append(
            {
                "k": k,
                "fraction_of_spectrum": k / M.n_vertices,
                "flipped_count": r.flips.flipped_count,
                "flipped_fraction": r.flips.flipped_fraction,
            }
        )
    return rows


def write_sweep_csv(rows, path):
    keys = ["k", "fraction_of_spectrum", "flipped_count", "flipped_fraction"]
    write_rows_csv(path, keys, [[r[c] for c in keys] for r in rows])
