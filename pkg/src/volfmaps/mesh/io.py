"""MEDIT (.mesh), OFF and correspondence file formats."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import MeshParseError, MeshTopologyError, SurfaceMesh, TetMesh, validated
from .geodesic import Correspondence

# MEDIT sections we may meet: entries per record (including the trailing ref).
_MEDIT_SECTIONS = {
    "vertices": 4,
    "edges": 3,
    "triangles": 4,
    "quadrilaterals": 5,
    "tetrahedra": 5,
    "hexahedra": 9,
    "corners": 1,
    "ridges": 1,
    "requiredvertices": 1,
    "requirededges": 1,
    "requiredtriangles": 1,
    "normals": 3,
    "tangents": 3,
}


def _is_number(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _tokens(text):
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        out.extend(line.split())
    return out


def read_medit(path):
    """Parse an ASCII MEDIT file.

    Returns
    -------
    sections : dict
        Lower-case section name to an array of records (without refs
        for vertices/elements; indices still 1-based).
    """
    toks = _tokens(Path(path).read_text())
    sections = {}
    i = 0
    dim = 3
    while i < len(toks):
        key = toks[i].lower()
        i += 1
        if key == "end":
            break
        if key == "meshversionformatted":
            i += 1
            continue
        if key == "dimension":
            if i >= len(toks) or not toks[i].isdigit():
                raise MeshParseError("Dimension keyword without a value")
            dim = int(toks[i])
            if dim != 3:
                raise MeshParseError(f"only 3D MEDIT files are supported, got Dimension {dim}")
            i += 1
            continue
        if key not in _MEDIT_SECTIONS:
            raise MeshParseError(f"unknown MEDIT section {toks[i - 1]!r}")
        if i >= len(toks) or not toks[i].isdigit():
            raise MeshParseError(f"section {toks[i - 1]!r} lacks an entry count")
        count = int(toks[i])
        i += 1
        width = _MEDIT_SECTIONS[key]
        chunk = toks[i : i + count * width]
        bad = next((j for j, t in enumerate(chunk) if not _is_number(t)), None)
        if len(chunk) < count * width or bad is not None:
            got = (bad if bad is not None else len(chunk)) // width
            raise MeshParseError(f"section {key!r} declares {count} entries but lists {got}")
        i += count * width
        rec = np.array(chunk, dtype=np.float64).reshape(count, width)
        sections[key] = rec
    return sections


def _medit_cells(sections, key, nv, width):
    rec = sections.get(key)
    if rec is None:
        return np.empty((0, width), dtype=np.int64)
    cells = rec[:, :width]
    if not np.all(cells == np.round(cells)):
        raise MeshParseError(f"non-integer indices in section {key!r}")
    cells = cells.astype(np.int64) - 1
    if cells.size and (cells.min() < 0 or cells.max() >= nv):
        raise MeshParseError(f"section {key!r} references vertices outside [1, {nv}]")
    return cells


def write_medit(path, vertices, tets=None, triangles=None):
    vertices = np.asarray(vertices, dtype=np.float64)
    lines = ["MeshVersionFormatted 1", "", "Dimension 3", "", f"Vertices {len(vertices)}"]
    lines += [f"{x!r} {y!r} {z!r} 0" for x, y, z in vertices.tolist()]
    if triangles is not None:
        lines += ["", f"Triangles {len(triangles)}"]
        lines += [f"{a + 1} {b + 1} {c + 1} 0" for a, b, c in np.asarray(triangles).tolist()]
    if tets is not None:
        lines += ["", f"Tetrahedra {len(tets)}"]
        lines += [f"{a + 1} {b + 1} {c + 1} {d + 1} 0" for a, b, c, d in np.asarray(tets).tolist()]
    lines += ["", "End", ""]
    Path(path).write_text("\n".join(lines))


def read_off(path):
    """Read an OFF file, returning ``(vertices, faces)``; polygon faces are fan-triangulated."""
    toks = _tokens(Path(path).read_text())
    if not toks or not toks[0].upper().endswith("OFF"):
        raise MeshParseError("missing OFF header")
    rest = toks[1:]
    if len(rest) < 3:
        raise MeshParseError("missing OFF counts")
    try:
        nv, nf = int(rest[0]), int(rest[1])
    except ValueError as exc:
        raise MeshParseError(f"bad OFF counts: {rest[:3]}") from exc
    pos = 3
    vals = rest[pos : pos + 3 * nv]
    if len(vals) < 3 * nv:
        raise MeshParseError(f"OFF declares {nv} vertices but lists {len(vals) // 3}")
    try:
        verts = np.array(vals, dtype=np.float64).reshape(nv, 3)
    except ValueError as exc:
        raise MeshParseError("non-numeric vertex coordinate") from exc
    pos += 3 * nv
    faces = []
    for f in range(nf):
        if pos >= len(rest):
            raise MeshParseError(f"OFF declares {nf} faces but lists {f}")
        k = int(rest[pos])
        idx = [int(t) for t in rest[pos + 1 : pos + 1 + k]]
        if len(idx) < k:
            raise MeshParseError(f"truncated face {f}")
        pos += 1 + k
        faces.extend([idx[0], idx[j], idx[j + 1]] for j in range(1, k - 1))
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= nv):
        raise MeshParseError("face index out of range")
    return verts, faces


def write_off(path, vertices, triangles):
    vertices = np.asarray(vertices, dtype=np.float64)
    lines = ["OFF", f"{len(vertices)} {len(triangles)} 0"]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in vertices.tolist()]
    lines += [f"3 {a} {b} {c}" for a, b, c in np.asarray(triangles).tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path, kind="tet"):
    """Load and validate a mesh; format follows the file extension.

    Parameters
    ----------
    path : str or Path
        ``.mesh`` (MEDIT) or ``.off``.
    kind : {'tet', 'surface'}

    Returns
    -------
    mesh : TetMesh or SurfaceMesh
        Tets come back positively oriented.
    """
    path = Path(path)
    ext = path.suffix.lower()
    if kind not in ("tet", "surface"):
        raise ValueError(f"kind must be 'tet' or 'surface', got {kind!r}")
    if ext == ".mesh":
        sec = read_medit(path)
        if "vertices" not in sec:
            raise MeshParseError("MEDIT file without a Vertices section")
        verts = sec["vertices"][:, :3]
        if kind == "tet":
            tets = _medit_cells(sec, "tetrahedra", len(verts), 4)
            if len(tets) == 0:
                raise MeshParseError("MEDIT file without tetrahedra")
            return validated(TetMesh(verts, tets))
        tris = _medit_cells(sec, "triangles", len(verts), 3)
        return _checked_surface(SurfaceMesh(verts, tris))
    if ext == ".off":
        if kind == "tet":
            raise MeshParseError("OFF files hold surfaces only")
        verts, faces = read_off(path)
        return _checked_surface(SurfaceMesh(verts, faces))
    raise MeshParseError(f"unsupported mesh extension {ext!r}")


def _checked_surface(surf):
    t = np.sort(surf.triangles, axis=1)
    if (np.diff(t, axis=1) == 0).any():
        raise MeshTopologyError("triangle with a repeated vertex")
    if np.unique(t, axis=0).shape[0] != t.shape[0]:
        raise MeshTopologyError("duplicated triangle")
    if (surf.areas <= 0).any():
        raise MeshTopologyError(f"{int((surf.areas <= 0).sum())} zero-area triangles")
    return surf


def save_mesh(mesh, path):
    """Write a mesh; tets as MEDIT, surfaces as MEDIT or OFF by extension."""
    path = Path(path)
    ext = path.suffix.lower()
    if isinstance(mesh, TetMesh):
        if ext != ".mesh":
            raise ValueError("tet meshes are written as .mesh")
        write_medit(path, mesh.vertices, tets=mesh.tets)
    elif isinstance(mesh, SurfaceMesh):
        if ext == ".off":
            write_off(path, mesh.vertices, mesh.triangles)
        elif ext == ".mesh":
            write_medit(path, mesh.vertices, triangles=mesh.triangles)
        else:
            raise ValueError(f"unsupported surface extension {ext!r}")
    else:
        raise TypeError(f"cannot save {type(mesh).__name__}")


def save_correspondence(corr, path):
    lines = [f"# p2p {corr.n_source} {corr.n_target}"] + [str(int(j)) for j in corr.map]
    Path(path).write_text("\n".join(lines) + "\n")


def load_correspondence(path):
    lines = Path(path).read_text().splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 4 or head[:2] != ["#", "p2p"]:
        raise MeshParseError("correspondence file must start with '# p2p <n_src> <n_dst>'")
    n_src, n_dst = int(head[2]), int(head[3])
    body = [ln.strip() for ln in lines[1:] if ln.strip()]
    if len(body) != n_src:
        raise MeshParseError(f"correspondence declares {n_src} entries but lists {len(body)}")
    return Correspondence(np.array(body, dtype=np.int64), n_dst)
