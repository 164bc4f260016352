"""Cotangent Laplace-Beltrami operators (stiffness + lumped mass).

Volumes use the edge weights

    w_ij = 1/6 * sum over tets ijkl of |v_k - v_l| * cot(theta_kl)

with ``theta_kl`` the dihedral angle at the edge opposite to ``ij``.
Boundary rows are left untouched, which yields Neumann conditions.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .mesh.core import DEGENERACY_TOL, TET_EDGES, SurfaceMesh, TetMesh


class DegenerateElementError(ValueError):
    pass


# For each local tet edge (i, j), the opposite edge (k, l).
_OPPOSITE = np.array([[2, 3], [1, 3], [1, 2], [0, 3], [0, 2], [0, 1]])


@dataclass(eq=False)
class LaplacianOperators:
    """Discrete LBO as ``S f = lambda W f``.

    Attributes
    ----------
    stiffness : scipy.sparse.csr_matrix, shape=[n, n]
    mass_diag : array, shape=[n]
        Lumped mass.
    domain_dim : int
        3 for volumes, 2 for surfaces.
    """

    stiffness: sparse.csr_matrix
    mass_diag: np.ndarray
    domain_dim: int

    @property
    def mass(self):
        return sparse.diags(self.mass_diag, format="csr")

    @property
    def n(self):
        return self.mass_diag.size

    @property
    def total_mass(self):
        return float(self.mass_diag.sum())

    def permuted(self, perm):
        """Operators of the mesh relabelled so that new vertex ``i`` is old ``perm[i]``."""
        return LaplacianOperators(self.stiffness[perm][:, perm].tocsr(), self.mass_diag[perm], self.domain_dim)


def _cot_between(a, b):
    """cot of the angle between row vectors ``a`` and ``b``."""
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.einsum("...i,...i->...", a, b) / cross


def tet_edge_weights(vertices, tets):
    """Per-tet cotangent weights, shape=[m, 6], ordered as ``TET_EDGES``."""
    p = vertices[tets]
    i, j = TET_EDGES.T
    k, l = _OPPOSITE.T
    vk, vl = p[:, k], p[:, l]
    vi, vj = p[:, i], p[:, j]
    e = vl - vk
    elen = np.linalg.norm(e, axis=-1)
    eh = e / elen[..., None]
    # project the two wing vertices onto the plane orthogonal to edge kl
    a = vi - vk
    b = vj - vk
    a -= np.einsum("...i,...i->...", a, eh)[..., None] * eh
    b -= np.einsum("...i,...i->...", b, eh)[..., None] * eh
    return elen * _cot_between(a, b) / 6.0


def _check_tets(mesh):
    vol = mesh.volumes
    tol = DEGENERACY_TOL * mesh.bbox_diagonal() ** 3
    bad = np.flatnonzero(vol < tol)
    if bad.size:
        t = int(bad[0])
        kind = "inverted" if vol[t] < -tol else "near-degenerate"
        raise DegenerateElementError(
            f"{bad.size} tets below volume tolerance {tol:.3g}; first is tet {t} "
            f"({kind}, volume {vol[t]:.3g}, vertices {mesh.tets[t].tolist()})"
        )


def _assemble(n, rows, cols, w):
    W = sparse.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    W = W + W.T
    S = sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W
    S = S.tocsr()
    S.sum_duplicates()
    return S


def assemble_volume_operators(mesh: TetMesh) -> LaplacianOperators:
    """Volumetric cotangent stiffness and lumped mass.

    Parameters
    ----------
    mesh : TetMesh
        Positively oriented.

    Returns
    -------
    ops : LaplacianOperators
        Vertex mass is a quarter of the incident tet volumes.
    """
    _check_tets(mesh)
    w = tet_edge_weights(mesh.vertices, mesh.tets)
    t = mesh.tets
    rows = t[:, TET_EDGES[:, 0]].ravel()
    cols = t[:, TET_EDGES[:, 1]].ravel()
    S = _assemble(mesh.n_vertices, rows, cols, w.ravel())
    mass = np.bincount(t.ravel(), weights=np.repeat(mesh.volumes / 4.0, 4), minlength=mesh.n_vertices)
    return LaplacianOperators(S, mass, 3)


def assemble_surface_operators(mesh: SurfaceMesh) -> LaplacianOperators:
    """Triangle cotangent stiffness, ``w_ij = (cot a + cot b) / 2``, barycentric lumped mass."""
    area = mesh.areas
    tol = 1e-14 * max(np.ptp(mesh.vertices, axis=0).max(), np.finfo(float).tiny) ** 2
    bad = np.flatnonzero(area < tol)
    if bad.size:
        raise DegenerateElementError(f"{bad.size} degenerate triangles; first is triangle {int(bad[0])}")
    f = mesh.triangles
    p = mesh.vertices[f]
    rows, cols, w = [], [], []
    for c in range(3):
        a, b = (c + 1) % 3, (c + 2) % 3
        cot = _cot_between(p[:, a] - p[:, c], p[:, b] - p[:, c])
        rows.append(f[:, a])
        cols.append(f[:, b])
        w.append(0.5 * cot)
    S = _assemble(mesh.n_vertices, np.concatenate(rows), np.concatenate(cols), np.concatenate(w))
    mass = np.bincount(f.ravel(), weights=np.repeat(area / 3.0, 3), minlength=mesh.n_vertices)
    return LaplacianOperators(S, mass, 2)


def assemble_operators(mesh):
    if isinstance(mesh, TetMesh):
        return assemble_volume_operators(mesh)
    if isinstance(mesh, SurfaceMesh):
        return assemble_surface_operators(mesh)
    raise TypeError(f"no Laplacian for {type(mesh).__name__}")


def save_coo(matrix, path):
    """Write a sparse matrix as ``row col value`` lines (0-based), header ``n_rows n_cols nnz``."""
    m = sparse.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    lines = [f"{m.shape[0]} {m.shape[1]} {m.nnz}"]
    lines += [f"{r} {c} {v!r}" for r, c, v in zip(m.row[order].tolist(), m.col[order].tolist(), m.data[order].tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def load_coo(path):
    lines = Path(path).read_text().split("\n")
    nr, nc, nnz = (int(x) for x in lines[0].split())
    data = np.loadtxt(lines[1 : 1 + nnz], ndmin=2) if nnz else np.empty((0, 3))
    return sparse.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(nr, nc)).tocsr()


def export_operators(ops, prefix):
    """Write ``<prefix>_S.txt`` and ``<prefix>_W.txt``."""
    save_coo(ops.stiffness, f"{prefix}_S.txt")
    save_coo(ops.mass, f"{prefix}_W.txt")
