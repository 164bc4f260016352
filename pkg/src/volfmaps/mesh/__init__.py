"""Tetrahedral / triangular meshes: containers, I/O, boundary, geodesics, test meshes."""

from .core import (
    MeshParseError,
    MeshTopologyError,
    SurfaceMesh,
    TetMesh,
    ValidationReport,
    edge_graph,
    extract_boundary,
    signed_volumes,
    validate_mesh,
    validated,
)
from .generate import bar_mesh, bent_bar_pair, cube_mesh, generate_test_mesh, grid_tet_mesh
from .geodesic import (
    Correspondence,
    DisconnectedMeshError,
    GeodesicCache,
    GeodesicField,
    dijkstra_distances,
    pairwise_dijkstra,
)
from .io import load_correspondence, load_mesh, save_correspondence, save_mesh

__all__ = [
    "Correspondence",
    "DisconnectedMeshError",
    "GeodesicCache",
    "GeodesicField",
    "MeshParseError",
    "MeshTopologyError",
    "SurfaceMesh",
    "TetMesh",
    "ValidationReport",
    "bar_mesh",
    "bent_bar_pair",
    "cube_mesh",
    "dijkstra_distances",
    "edge_graph",
    "extract_boundary",
    "generate_test_mesh",
    "grid_tet_mesh",
    "load_correspondence",
    "load_mesh",
    "pairwise_dijkstra",
    "save_correspondence",
    "save_mesh",
    "signed_volumes",
    "validate_mesh",
    "validated",
]
