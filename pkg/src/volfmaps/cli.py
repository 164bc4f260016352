"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 computational failure. The
``VOLFMAPS_NUM_THREADS`` environment variable caps BLAS/LAPACK threads.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import fmap as fm
from . import metrics as mt
from . import transfer as tr
from .basis import augment_cmh, build_orthoprods, with_boundary
from .laplacian import assemble_operators, assemble_volume_operators
from .mesh import (
    GeodesicCache,
    TetMesh,
    extract_boundary,
    generate_test_mesh,
    load_correspondence,
    load_mesh,
    save_correspondence,
    save_mesh,
)
from .spectral import compute_eigenbasis, export_basis_csv, load_basis, save_basis

THREADS_ENV = "VOLFMAPS_NUM_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _existing(path):
    if not Path(path).is_file():
        raise UsageError(f"input file not found: {path}")
    return path


def _load_tet(path):
    return load_mesh(_existing(path), "tet")


def _load_any(path):
    """Tet mesh if the file holds tets, otherwise a surface."""
    _existing(path)
    if Path(path).suffix.lower() == ".off":
        return load_mesh(path, "surface")
    try:
        return load_mesh(path, "tet")
    except ValueError as exc:
        if "without tetrahedra" not in str(exc):
            raise
        return load_mesh(path, "surface")


def _mesh_key(mesh, k):
    h = hashlib.sha1()
    h.update(np.ascontiguousarray(mesh.vertices).tobytes())
    h.update(np.ascontiguousarray(mesh.tets).tobytes())
    h.update(str(k).encode())
    return h.hexdigest()[:20]


def cached_lbo(mesh, k, cache_dir=None, ops=None):
    """LBO basis of a tet mesh, read from / written to ``cache_dir`` when given."""
    ops = assemble_volume_operators(mesh) if ops is None else ops
    if cache_dir is None:
        return compute_eigenbasis(ops, k)
    path = Path(cache_dir) / f"{_mesh_key(mesh, k)}.vfmb"
    if path.is_file():
        return load_basis(path, ops.mass_diag)
    basis = compute_eigenbasis(ops, k)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_basis(basis, path)
    return basis


def _match_config(a, landmarks=True):
    return fm.MatchConfig(
        kind=a.kind,
        k_init=a.k_init,
        k_final=a.k_final,
        step=a.step,
        n_desc_eigs=a.n_desc_eigs,
        num_energies=a.num_energies,
        mu_comm=a.mu_comm,
        landmarks_M=a.landmarks_M if landmarks else None,
        landmarks_N=a.landmarks_N if landmarks else None,
        fast=a.fast,
        sampling=a.sampling,
        n_samples=a.n_samples,
        orthoprods_k0=a.orthoprods_k0,
        orthoprods_order=a.order,
        seed=a.seed,
    )


def _surface_map(pi, M, N, surf_M, surf_N):
    """Accept either a boundary map or a full volume map (restricted here)."""
    if len(pi) == M.n_vertices and pi.n_target == N.n_vertices:
        return tr.boundary_restriction(pi, surf_M, surf_N)
    return pi


def _k_from(a, n):
    if a.k is not None:
        return a.k
    return max(1, int(round(a.k_frac * n)))


def cmd_gen(a):
    params = {"res": a.res if len(a.res) > 1 else a.res[0]}
    if a.kind == "cube":
        params["side"] = a.side
    if a.kind == "bent_bar":
        params["bend"] = a.bend
    out = generate_test_mesh(a.kind, **params)
    if a.kind == "bent_bar":
        M, N, gt = out
        save_mesh(M, f"{a.output}_M.mesh")
        save_mesh(N, f"{a.output}_N.mesh")
        save_correspondence(gt, f"{a.output}_gt.txt")
    else:
        save_mesh(out, a.output)


def cmd_basis(a):
    mesh = _load_tet(a.mesh)
    ops = assemble_volume_operators(mesh)
    if a.kind == "orthoprods":
        basis = build_orthoprods(cached_lbo(mesh, a.orthoprods_k0, a.cache_dir, ops), a.order)
    else:
        basis = cached_lbo(mesh, a.k, a.cache_dir, ops)
        if a.kind == "cmh":
            basis = augment_cmh(basis, mesh.vertices)
    basis = with_boundary(basis, extract_boundary(mesh))
    save_basis(basis, a.output)
    if a.csv:
        export_basis_csv(basis, a.csv)
    print(f"kind={basis.kind} n={basis.n} k={basis.k} orthonormality={basis.orthonormality_error():.3g}")


def cmd_match(a):
    M, N = _load_tet(a.source), _load_tet(a.target)
    cfg = _match_config(a)
    k_lbo = max(cfg.n_desc_eigs, cfg.k_final, cfg.orthoprods_k0)
    shapes = [
        fm.prepare_shape(m, cfg, lbo=cached_lbo(m, min(k_lbo, m.n_vertices), a.cache_dir)) for m in (M, N)
    ]
    pi_surf, C = tr.vol2surf_match(M, N, cfg, shape_M=shapes[0], shape_N=shapes[1])
    pi_vol = fm.extract_p2p(shapes[0].basis, shapes[1].basis, C, method=cfg.nn_method)
    save_correspondence(pi_surf, f"{a.output}.surf.p2p.txt")
    save_correspondence(pi_vol, f"{a.output}.p2p.txt")
    fm.save_fmap_csv(C, f"{a.output}.fmap.csv")
    print(f"fmap {C.shape[0]}x{C.shape[1]}; boundary map {len(pi_surf)} -> {pi_surf.n_target}")


def _transfer_inputs(a):
    M, N = _load_tet(a.source), _load_tet(a.target)
    surf_M, surf_N = extract_boundary(M), extract_boundary(N)
    pi = _surface_map(load_correspondence(_existing(a.pi)), M, N, surf_M, surf_N)
    return M, N, surf_M, surf_N, pi


def _report(result, path):
    sidecar = tr.export_warm_start(result, path)
    f = result.flips
    print(f"{result.mode} k={result.k_used}: {f.flipped_count} flipped of {f.per_tet_det.size} ({100 * f.flipped_fraction:.3f}%), sidecar {sidecar}")


def cmd_transfer(a):
    M, N, surf_M, surf_N, pi = _transfer_inputs(a)
    k = _k_from(a, M.n_vertices)
    _report(tr.transfer_connectivity(M, N, pi, k, a.kind, surf_M=surf_M, surf_N=surf_N), a.output)


def cmd_extrapolate(a):
    M = _load_tet(a.source)
    target = _load_any(a.target)
    surf_M = extract_boundary(M)
    if isinstance(target, TetMesh):
        surf_N = extract_boundary(target)
        pi = _surface_map(load_correspondence(_existing(a.pi)), M, target, surf_M, surf_N)
    else:
        surf_N = target
        pi = load_correspondence(_existing(a.pi))
    k = _k_from(a, M.n_vertices)
    _report(tr.extrapolate_coordinates(M, surf_N, pi, k, a.kind, surf_M=surf_M), a.output)


def cmd_labels(a):
    pi = load_correspondence(_existing(a.pi))
    labels = np.loadtxt(_existing(a.labels), dtype=np.int64, ndmin=1)
    np.savetxt(a.output, tr.transfer_labels(pi, labels), fmt="%d")


def cmd_eval(a):
    M, N = _load_tet(a.source), _load_tet(a.target)
    pred = load_correspondence(_existing(a.pred))
    gt = load_correspondence(_existing(a.gt))
    rows = []
    if len(pred) == M.n_vertices:
        target, gt_cmp, source = N, gt, M
    else:
        surf_M, surf_N = extract_boundary(M), extract_boundary(N)
        if len(pred) != surf_M.n_vertices:
            raise ValueError(f"prediction has {len(pred)} entries; expected {M.n_vertices} or {surf_M.n_vertices}")
        target, source = surf_N, surf_M
        gt_cmp = _surface_map(gt, M, N, surf_M, surf_N)
    cache = GeodesicCache(target)
    norm = a.normalization or ("cbrt-volume" if isinstance(target, TetMesh) else "diameter")
    errors, curve = mt.geodesic_error_stats(pred, gt_cmp, target, norm, cache=cache)
    curve.to_csv(f"{a.output}.curve.csv")
    rows.append(["age", curve.age])
    q = mt.map_quality(pred, source, target, cache=cache)
    rows += [[k, v] for k, v in q.items()]
    if isinstance(target, TetMesh):
        rows.append(["flipped_fraction", mt.flip_report(M, N.vertices[pred.map]).flipped_fraction])
    if a.distortion_samples:
        d = mt.geodesic_distortion_stats(M, N, gt, a.distortion_samples, a.seed)
        rows += [["surf_distortion_mean", d["surf"][0]], ["surf_distortion_std", d["surf"][1]]]
        rows += [["vol_distortion_mean", d["vol"][0]], ["vol_distortion_std", d["vol"][1]]]
    mt.write_rows_csv(f"{a.output}.summary.csv", ["metric", "value"], rows)
    print(f"AGE = {curve.age:.6g} ({norm})")


def _unit_spectrum(mesh, k):
    if isinstance(mesh, TetMesh):
        mesh = mesh.scaled(mesh.total_volume ** (-1 / 3))
    else:
        mesh = mesh.scaled(mesh.total_area ** (-1 / 2))
    return compute_eigenbasis(assemble_operators(mesh), k).eigenvalues


def cmd_spectrum(a):
    A, B = _load_any(a.first), _load_any(a.second)
    dims = {3 if isinstance(m, TetMesh) else 2 for m in (A, B)}
    if len(dims) != 1:
        raise ValueError("cannot compare a volume spectrum with a surface spectrum")
    sc = mt.spectrum_offset_error(_unit_spectrum(A, a.k), _unit_spectrum(B, a.k), dims.pop())
    sc.to_csv(a.output)
    print(f"mean relative diff {sc.relative_diffs.mean():.4g}, mean offset diff {sc.offset_diffs.mean():.4g}")


def cmd_sweep(a):
    M, N, surf_M, surf_N, pi = _transfer_inputs(a)
    if a.k_list:
        ks = a.k_list
    else:
        ks = [max(1, int(round(f * M.n_vertices))) for f in a.k_fracs]
    rows = tr.transfer_sweep(M, N, pi, ks, a.kind, a.mode)
    tr.write_sweep_csv(rows, a.output)
    for r in rows:
        print(f"k={r['k']} flips={100 * r['flipped_fraction']:.3f}%")


def _match_args(p):
    p.add_argument("--kind", choices=("lbo", "cmh", "orthoprods"), default="lbo")
    p.add_argument("--k-init", type=int, default=20)
    p.add_argument("--k-final", type=int, default=120)
    p.add_argument("--step", type=int, default=5)
    p.add_argument("--n-desc-eigs", type=int, default=200)
    p.add_argument("--num-energies", type=int, default=100)
    p.add_argument("--mu-comm", type=float, default=None)
    p.add_argument("--landmarks-M", type=_ints, default=None, help="comma-separated vertex ids on the source")
    p.add_argument("--landmarks-N", type=_ints, default=None, help="matching vertex ids on the target")
    p.add_argument("--fast", action="store_true", help="sampled ZoomOut")
    p.add_argument("--sampling", choices=("surface", "fps"), default="surface")
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--orthoprods-k0", type=int, default=40)
    p.add_argument("--order", type=int, default=2)


def _k_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--k-frac", type=float, help="basis size as a fraction of the source vertex count")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--cache-dir", default=None, help="directory for cached VFMB bases")
    p = _Parser(prog="volfmaps", description="Volumetric functional maps on tetrahedral meshes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    s = add("gen", help="write a synthetic test mesh")
    s.add_argument("kind", choices=("cube", "bar", "bent_bar"))
    s.add_argument("--res", type=_ints, default=(4,))
    s.add_argument("--side", type=float, default=1.0)
    s.add_argument("--bend", type=float, default=np.pi / 4)
    s.add_argument("-o", "--output", required=True, help="mesh path, or a prefix for bent_bar")
    s.set_defaults(func=cmd_gen)

    s = add("basis", help="compute and cache a spectral basis")
    s.add_argument("mesh")
    s.add_argument("--k", type=int, default=120)
    s.add_argument("--kind", choices=("lbo", "cmh", "orthoprods"), default="lbo")
    s.add_argument("--orthoprods-k0", type=int, default=40)
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--csv", default=None)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_basis)

    s = add("match", help="volume-aware matching; writes boundary and volume maps plus the fmap")
    s.add_argument("source")
    s.add_argument("target")
    _match_args(s)
    s.add_argument("-o", "--output", required=True, help="output prefix")
    s.set_defaults(func=cmd_match)

    for name, func, helptext in (
        ("transfer", cmd_transfer, "functional connectivity transfer"),
        ("extrapolate", cmd_extrapolate, "spectral coordinate extrapolation"),
    ):
        s = add(name, help=helptext)
        s.add_argument("source")
        s.add_argument("target")
        s.add_argument("--pi", required=True, help="boundary (or full volume) correspondence file")
        _k_args(s)
        s.add_argument("--kind", choices=("lbo", "cmh"), default="lbo")
        s.add_argument("-o", "--output", required=True, help="output .mesh; sidecar <output>.flips.txt")
        s.set_defaults(func=func)

    s = add("labels", help="pull target labels back to the source")
    s.add_argument("--pi", required=True)
    s.add_argument("--labels", required=True, help="one integer per target vertex")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_labels)

    s = add("eval", help="geodesic error, curves and map quality against ground truth")
    s.add_argument("source")
    s.add_argument("target")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--normalization", choices=mt.NORMALIZATIONS, default=None)
    s.add_argument("--distortion-samples", type=int, default=0)
    s.add_argument("-o", "--output", required=True, help="output prefix")
    s.set_defaults(func=cmd_eval)

    s = add("spectrum", help="compare two spectra after unit-size rescaling")
    s.add_argument("first")
    s.add_argument("second")
    s.add_argument("--k", type=int, default=100)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_spectrum)

    s = add("sweep", help="flip statistics over several basis sizes")
    s.add_argument("source")
    s.add_argument("target")
    s.add_argument("--pi", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--k-list", type=_ints)
    g.add_argument("--k-fracs", type=_floats)
    s.add_argument("--kind", choices=("lbo", "cmh"), default="lbo")
    s.add_argument("--mode", choices=tr.MODES, default="transfer")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "k_init", None) is not None and args.k_init > args.k_final:
            parser.error(f"--k-init {args.k_init} exceeds --k-final {args.k_final}")
        if (getattr(args, "landmarks_M", None) is None) != (getattr(args, "landmarks_N", None) is None):
            parser.error("--landmarks-M and --landmarks-N go together")
        threads = os.environ.get(THREADS_ENV)
        with threadpool_limits(int(threads) if threads else None):
            args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    except (ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
