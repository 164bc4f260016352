"""Edge-graph geodesics (Dijkstra) and point-to-point correspondences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .core import edge_graph


class DisconnectedMeshError(ValueError):
    pass


@dataclass(eq=False)
class Correspondence:
    """Vertex map ``pi : source -> target``.

    ``map[i]`` is the target index of source vertex ``i``; ``-1`` marks an
    unmapped vertex (only tolerated by the transfer routines).
    """

    map: np.ndarray
    n_target: int

    def __post_init__(self):
        self.map = np.asarray(self.map, dtype=np.int64).ravel()
        self.n_target = int(self.n_target)
        if (self.map >= self.n_target).any() or (self.map < -1).any():
            raise ValueError("correspondence entries must lie in [0, n_target) or be -1")

    def __len__(self):
        return self.map.size

    @property
    def n_source(self):
        return self.map.size

    @property
    def is_total(self):
        return bool((self.map >= 0).all())

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n), n)

    def compose(self, other):
        """``other`` after ``self``."""
        return Correspondence(other.map[self.map], other.n_target)


@dataclass(eq=False)
class GeodesicField:
    source: int
    distances: np.ndarray


def _check_connected(graph, source=None):
    ncomp, labels = csgraph.connected_components(graph, directed=False)
    if ncomp > 1:
        ref = labels[source] if source is not None else labels[0]
        other = np.flatnonzero(labels != ref)
        raise DisconnectedMeshError(
            f"edge graph has {ncomp} components; {other.size} vertices unreachable "
            f"from vertex {0 if source is None else source} (e.g. vertex {int(other[0])})"
        )


def dijkstra_distances(mesh, source, graph=None):
    """Shortest edge-path lengths from one vertex.

    Parameters
    ----------
    mesh : TetMesh or SurfaceMesh
    source : int
    graph : sparse matrix, optional
        Precomputed :func:`~volfmaps.mesh.core.edge_graph`.

    Returns
    -------
    field : GeodesicField
    """
    if not 0 <= source < mesh.n_vertices:
        raise IndexError(f"source {source} out of range [0, {mesh.n_vertices})")
    g = edge_graph(mesh) if graph is None else graph
    _check_connected(g, source)
    d = csgraph.dijkstra(g, directed=False, indices=int(source))
    return GeodesicField(int(source), d)


def pairwise_dijkstra(mesh, sources, graph=None, check=True):
    """Distance rows ``D[s, :]`` for each requested source, shape=[len(sources), n]."""
    g = edge_graph(mesh) if graph is None else graph
    if check:
        _check_connected(g)
    sources = np.asarray(sources, dtype=np.int64)
    return csgraph.dijkstra(g, directed=False, indices=sources)


class GeodesicCache:
    """Lazily computed Dijkstra rows over one mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.graph = edge_graph(mesh)
        _check_connected(self.graph)
        self._rows = {}

    def rows(self, sources):
        sources = np.asarray(sources, dtype=np.int64)
        missing = np.setdiff1d(np.unique(sources), np.fromiter(self._rows, dtype=np.int64))
        if missing.size:
            d = csgraph.dijkstra(self.graph, directed=False, indices=missing)
            for s, row in zip(missing.tolist(), d):
                self._rows[s] = row
        return np.stack([self._rows[s] for s in sources.tolist()]) if sources.size else np.empty((0, self.mesh.n_vertices))

    def distance(self, a, b):
        """Element-wise ``d(a[i], b[i])``."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        uniq, inv = np.unique(a, return_inverse=True)
        rows = self.rows(uniq)
        return rows[inv.ravel(), b]
