"""Mesh containers, validation and boundary extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class MeshParseError(ValueError):
    """Malformed mesh file (bad section, count mismatch, bad token)."""


class MeshTopologyError(ValueError):
    """Degenerate, duplicated or non-manifold elements."""


# Outward faces of a positively oriented tet (a, b, c, d); row i is opposite vertex i.
TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])
TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
TRI_EDGES = np.array([[0, 1], [1, 2], [2, 0]])

# Relative volume below which a tet counts as degenerate (times bbox diagonal cubed).
DEGENERACY_TOL = 1e-14


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def signed_volumes(vertices, tets):
    """Signed volume of every tetrahedron, ``det[b-a, c-a, d-a] / 6``."""
    p = vertices[tets]
    e = p[:, 1:] - p[:, :1]
    return np.linalg.det(e) / 6.0


@dataclass(eq=False)
class TetMesh:
    """Tetrahedral mesh.

    Parameters
    ----------
    vertices : array-like, shape=[n, 3]
    tets : array-like, shape=[m, 4]
        0-based vertex indices.
    """

    vertices: np.ndarray
    tets: np.ndarray

    def __post_init__(self):
        self.vertices = _readonly(self.vertices, np.float64)
        self.tets = _readonly(self.tets, np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError(f"vertices must be (n, 3), got {self.vertices.shape}")
        if self.tets.ndim != 2 or self.tets.shape[1] != 4:
            raise ValueError(f"tets must be (m, 4), got {self.tets.shape}")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_tets(self):
        return self.tets.shape[0]

    @cached_property
    def volumes(self):
        """Signed per-tet volumes."""
        v = signed_volumes(self.vertices, self.tets)
        v.setflags(write=False)
        return v

    @property
    def total_volume(self):
        return float(self.volumes.sum())

    @cached_property
    def edges(self):
        """Unique undirected edges, shape=[e, 2], sorted rows."""
        return unique_edges(self.tets, TET_EDGES)

    def with_vertices(self, vertices):
        """Same connectivity, new coordinates (no validation)."""
        return TetMesh(vertices, self.tets)

    def scaled(self, factor):
        return TetMesh(self.vertices * factor, self.tets)

    def bbox_diagonal(self):
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))


@dataclass(eq=False)
class SurfaceMesh:
    """Triangle mesh, optionally tied to a parent volume.

    Parameters
    ----------
    vertices : array-like, shape=[n, 3]
    triangles : array-like, shape=[f, 3]
    parent_map : array-like, shape=[n], optional
        Volume vertex index of every surface vertex.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    parent_map: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.vertices = _readonly(self.vertices, np.float64)
        self.triangles = _readonly(self.triangles, np.int64)
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError(f"triangles must be (f, 3), got {self.triangles.shape}")
        if self.parent_map is not None:
            self.parent_map = _readonly(self.parent_map, np.int64)
            if self.parent_map.shape != (self.vertices.shape[0],):
                raise ValueError("parent_map must have one entry per surface vertex")
            if np.unique(self.parent_map).size != self.parent_map.size:
                raise ValueError("parent_map must be injective")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @cached_property
    def edges(self):
        return unique_edges(self.triangles, TRI_EDGES)

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        a = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
        a.setflags(write=False)
        return a

    @property
    def total_area(self):
        return float(self.areas.sum())

    def scaled(self, factor):
        return SurfaceMesh(self.vertices * factor, self.triangles, self.parent_map)

    def euler_characteristic(self):
        return self.n_vertices - self.edges.shape[0] + self.n_triangles


def unique_edges(cells, local_edges):
    e = cells[:, local_edges].reshape(-1, 2)
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def edge_graph(mesh):
    """Symmetric sparse adjacency with Euclidean edge lengths as weights."""
    e = mesh.edges
    w = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    n = mesh.n_vertices
    g = sparse.coo_matrix((w, (e[:, 0], e[:, 1])), shape=(n, n))
    return (g + g.T).tocsr()


@dataclass
class ValidationReport:
    """Issues found by :func:`validate_mesh`.

    ``mesh`` holds the orientation-fixed copy; the index lists refer to tets
    of the input.
    """

    mesh: TetMesh
    inverted: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)
    repeated_index: list = field(default_factory=list)
    duplicates: list = field(default_factory=list)
    out_of_range: list = field(default_factory=list)
    n_components: int = 1
    unreferenced: list = field(default_factory=list)

    @property
    def issues(self):
        out = []
        if self.out_of_range:
            out.append(f"{len(self.out_of_range)} tets with out-of-range indices")
        if self.repeated_index:
            out.append(f"{len(self.repeated_index)} tets with a repeated vertex")
        if self.degenerate:
            out.append(f"{len(self.degenerate)} zero-volume tets")
        if self.duplicates:
            out.append(f"{len(self.duplicates)} duplicated tets")
        if self.inverted:
            out.append(f"{len(self.inverted)} inverted tets (flipped)")
        if self.n_components > 1:
            out.append(f"{self.n_components} disconnected components")
        if self.unreferenced:
            out.append(f"{len(self.unreferenced)} unreferenced vertices")
        return out

    @property
    def fatal(self):
        return bool(self.out_of_range or self.repeated_index or self.degenerate or self.duplicates)


def validate_mesh(mesh):
    """Inspect a tet mesh and fix its orientation.

    Never raises; see :attr:`ValidationReport.fatal` for problems that
    orientation fixing cannot repair.

    Parameters
    ----------
    mesh : TetMesh

    Returns
    -------
    report : ValidationReport
    """
    n = mesh.n_vertices
    tets = mesh.tets.copy()
    bad_range = np.flatnonzero(((tets < 0) | (tets >= n)).any(axis=1))
    if bad_range.size:
        return ValidationReport(mesh=mesh, out_of_range=bad_range.tolist(), n_components=0)

    srt = np.sort(tets, axis=1)
    repeated = np.flatnonzero((np.diff(srt, axis=1) == 0).any(axis=1))

    _, first = np.unique(srt, axis=0, return_index=True)
    keep = np.zeros(len(tets), dtype=bool)
    keep[first] = True
    keep[repeated] = True
    duplicates = np.flatnonzero(~keep).tolist()

    vol = signed_volumes(mesh.vertices, tets)
    scale = max(mesh.bbox_diagonal(), np.finfo(float).tiny)
    tiny = np.abs(vol) < DEGENERACY_TOL * scale**3
    degenerate = np.setdiff1d(np.flatnonzero(tiny), repeated)
    inverted = np.flatnonzero((vol < 0) & ~tiny)
    tets[inverted] = tets[inverted][:, [1, 0, 2, 3]]

    fixed = TetMesh(mesh.vertices, tets)
    used = np.zeros(n, dtype=bool)
    used[tets.ravel()] = True
    n_comp = 0
    if n:
        ncomp_all, labels = csgraph.connected_components(edge_graph(fixed), directed=False)
        n_comp = np.unique(labels[used]).size if used.any() else ncomp_all
    return ValidationReport(
        mesh=fixed,
        inverted=inverted.tolist(),
        degenerate=degenerate.tolist(),
        repeated_index=repeated.tolist(),
        duplicates=duplicates,
        n_components=int(n_comp),
        unreferenced=np.flatnonzero(~used).tolist(),
    )


def validated(mesh):
    """Return the orientation-fixed mesh or raise :class:`MeshTopologyError`."""
    rep = validate_mesh(mesh)
    if rep.fatal:
        raise MeshTopologyError("invalid tet mesh: " + "; ".join(rep.issues))
    return rep.mesh


def extract_boundary(mesh):
    """Boundary surface of a tet mesh.

    Triangles are the tet faces used by exactly one tet, oriented outward.
    Surface vertices keep the relative order of their volume indices.

    Parameters
    ----------
    mesh : TetMesh
        Positively oriented.

    Returns
    -------
    surface : SurfaceMesh
        With ``parent_map`` set.
    """
    faces = mesh.tets[:, TET_FACES].reshape(-1, 3)
    key = np.sort(faces, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if (counts > 2).any():
        raise MeshTopologyError(f"{int((counts > 2).sum())} faces shared by more than two tets")
    bnd = faces[counts[inv] == 1]
    parent = np.unique(bnd)
    local = np.full(mesh.n_vertices, -1, dtype=np.int64)
    local[parent] = np.arange(parent.size)
    surf = SurfaceMesh(mesh.vertices[parent], local[bnd], parent_map=parent)

    e = np.sort(surf.triangles[:, TRI_EDGES].reshape(-1, 2), axis=1)
    _, ecount = np.unique(e, axis=0, return_counts=True)
    if (ecount != 2).any():
        raise MeshTopologyError(
            f"non-manifold boundary: {int((ecount != 2).sum())} edges not shared by exactly two triangles"
        )
    return surf
