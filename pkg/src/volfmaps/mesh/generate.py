"""Synthetic tetrahedral test meshes (grids, bars, bent bars)."""

from __future__ import annotations

from itertools import permutations

import numpy as np

from .core import MeshTopologyError, TetMesh, validated
from .geodesic import Correspondence


def _kuhn_cell_tets():
    """Six tets of the unit cube sharing the main diagonal, as corner bit codes."""
    out = []
    for perm in permutations(range(3)):
        code = 0
        path = [code]
        for axis in perm:
            code |= 1 << axis
            path.append(code)
        out.append(path)
    return np.array(out)


def grid_tet_mesh(res, size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0), mirrored=True):
    """Box of ``nx*ny*nz`` cells, each split into 6 tets (Kuhn split).

    With ``mirrored`` the split of cell ``(i, j, k)`` is reflected along every
    axis whose cell index is odd. The result stays conforming and, for even
    resolutions, has the full symmetry group of the box; the plain Kuhn split
    only has the axis permutations and the central inversion.

    Parameters
    ----------
    res : int or tuple of 3 ints
    size : tuple of 3 floats
        Box extents.
    origin : tuple of 3 floats
        Minimum corner.
    mirrored : bool

    Returns
    -------
    mesh : TetMesh
        ``(nx+1)(ny+1)(nz+1)`` vertices, ``6 nx ny nz`` positively oriented tets.
    """
    nx, ny, nz = (res,) * 3 if np.isscalar(res) else res
    if min(nx, ny, nz) < 1:
        raise ValueError(f"resolution must be >= 1, got {(nx, ny, nz)}")
    xs = np.linspace(0, size[0], nx + 1) + origin[0]
    ys = np.linspace(0, size[1], ny + 1) + origin[1]
    zs = np.linspace(0, size[2], nz + 1) + origin[2]
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    flip = (np.column_stack([I, J, K]) % 2) if mirrored else np.zeros((I.size, 3), dtype=int)
    corners = np.stack(
        [
            vid(I + ((c & 1) ^ flip[:, 0]), J + (((c >> 1) & 1) ^ flip[:, 1]), K + (((c >> 2) & 1) ^ flip[:, 2]))
            for c in range(8)
        ],
        axis=1,
    )
    tets = corners[:, _kuhn_cell_tets()].reshape(-1, 4)
    return validated(TetMesh(verts, tets))


def cube_mesh(res, side=1.0):
    """Cube ``[0, side]^3``; ``side=1`` gives unit volume."""
    return grid_tet_mesh(res, (side, side, side))


def bar_mesh(res=(20, 4, 4), size=None):
    """Straight bar along x, centred on the x axis and at ``x = 0``.

    ``size`` defaults to unit cells.
    """
    res = tuple(int(r) for r in res)
    size = tuple(float(r) for r in res) if size is None else tuple(size)
    origin = (-size[0] / 2, -size[1] / 2, -size[2] / 2)
    return grid_tet_mesh(res, size, origin)


def bend_coordinates(vertices, angle, length):
    """Bend a bar lying along x (centred at 0) into an arc in the xy plane.

    The centre line keeps its length; total turning angle is ``angle``.
    """
    if angle == 0:
        return np.array(vertices, dtype=float, copy=True)
    R = length / angle
    x, y, z = vertices.T
    t = x / R
    return np.column_stack([(R + y) * np.sin(t), (R + y) * np.cos(t) - R, z])


def bent_bar_pair(res=(20, 4, 4), bend=np.pi / 4, size=None):
    """Straight bar and its bent copy with identical connectivity.

    Returns
    -------
    straight, bent : TetMesh
    gt : Correspondence
        Identity (straight vertex i is bent vertex i).
    """
    if not -np.pi < bend < np.pi:
        raise ValueError(f"bend angle must lie in (-pi, pi), got {bend}")
    straight = bar_mesh(res, size)
    length = np.ptp(straight.vertices[:, 0])
    half_width = np.abs(straight.vertices[:, 1]).max()
    if bend != 0 and abs(length / bend) <= half_width:
        raise MeshTopologyError(
            f"bend {bend} gives radius {abs(length / bend):.3g} <= half width {half_width:.3g}: inverted cells"
        )
    bent = straight.with_vertices(bend_coordinates(straight.vertices, bend, length))
    vol = bent.volumes
    if (vol <= 0).any():
        raise MeshTopologyError(f"bend {bend} inverts {int((vol <= 0).sum())} tets")
    return straight, bent, Correspondence.identity(straight.n_vertices)


def generate_test_mesh(kind, **params):
    """Dispatch to the synthetic generators.

    Parameters
    ----------
    kind : {'cube', 'bar', 'bent_bar'}
    **params
        ``res`` (and ``side`` for cubes, ``size`` for bars, ``bend`` for
        bent bars).

    Returns
    -------
    TetMesh, or ``(straight, bent, gt)`` for ``'bent_bar'``.
    """
    if kind == "cube":
        return cube_mesh(params.get("res", 4), params.get("side", 1.0))
    if kind == "bar":
        return bar_mesh(params.get("res", (20, 4, 4)), params.get("size"))
    if kind == "bent_bar":
        return bent_bar_pair(params.get("res", (20, 4, 4)), params.get("bend", np.pi / 4), params.get("size"))
    raise ValueError(f"unknown test mesh kind {kind!r}")
