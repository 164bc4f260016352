"""
How much of the surface spectrum does the volume see?
=====================================================

Restrict volumetric eigenfunctions to the boundary and fit each surface
eigenfunction with them. The residual is in ``[0, 1]`` for unit-norm targets.
"""
# %%
from volfmaps import assemble_operators, compute_eigenbasis
from volfmaps.mesh import cube_mesh, extract_boundary
from volfmaps.metrics import boundary_trace_reconstruction_error

mesh = cube_mesh(10)
surf = extract_boundary(mesh)
vol = compute_eigenbasis(assemble_operators(mesh), 30)
sops = assemble_operators(surf)
sb = compute_eigenbasis(sops, 30)

# %%
err = boundary_trace_reconstruction_error(vol.functions[surf.parent_map], sb.functions, sops.mass_diag)
for i, e in enumerate(err):
    print(f"surface mode {i:2d}  residual {e:.3f}  " + "#" * int(40 * e))
print(f"mean residual {err.mean():.3f}")
