"""Functional maps between tetrahedral volumes.

Submodules: ``mesh`` (containers, I/O, geodesics, test meshes), ``laplacian``,
``spectral``, ``basis``, ``fmap``, ``transfer``, ``metrics`` and ``cli``.
"""

from .basis import augment_cmh, build_orthoprods, project, reconstruct
from .fmap import MatchConfig, estimate_fmap, extract_p2p, fmap_from_p2p, match_volumes, zoomout
from .laplacian import LaplacianOperators, assemble_operators, assemble_volume_operators
from .mesh import Correspondence, SurfaceMesh, TetMesh, extract_boundary, load_mesh
from .spectral import SpectralBasis, compute_eigenbasis
from .transfer import extrapolate_coordinates, transfer_connectivity, vol2surf_match

__version__ = "0.1.0"

__all__ = [
    "Correspondence",
    "LaplacianOperators",
    "MatchConfig",
    "SpectralBasis",
    "SurfaceMesh",
    "TetMesh",
    "assemble_operators",
    "assemble_volume_operators",
    "augment_cmh",
    "build_orthoprods",
    "compute_eigenbasis",
    "estimate_fmap",
    "extract_boundary",
    "extract_p2p",
    "extrapolate_coordinates",
    "fmap_from_p2p",
    "load_mesh",
    "match_volumes",
    "project",
    "reconstruct",
    "transfer_connectivity",
    "vol2surf_match",
    "zoomout",
]
