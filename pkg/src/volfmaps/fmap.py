"""Functional maps: descriptors, estimation, point-to-point conversion, ZoomOut.

Conventions: a functional map ``C`` of shape ``[k_M, k_N]`` sends spectral
coefficients on N to coefficients on M, so that ``Phi_M @ C ~ Phi_N[pi]``
for the vertex map ``pi : M -> N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .basis import RankDeficiencyError, augment_cmh, build_orthoprods
from .laplacian import assemble_volume_operators
from .mesh.geodesic import Correspondence
from .spectral import compute_eigenbasis

MAX_CONDITION = 1e12


def _wks_energies(evals, num_energies):
    """Log-energy grid and sigma shared by WKS and wave-kernel landmarks."""
    if evals.size == 0 or evals[0] <= 0:
        raise ValueError("WKS needs a positive second eigenvalue (is the mesh connected?)")
    lo, hi = np.log(evals[0]), np.log(evals[-1])
    if hi - lo <= 1e-8:  # flat spectrum up to rounding: one filter covers it
        return np.full(num_energies, lo), 1.0
    sigma = 7.0 * (hi - lo) / num_energies
    return np.linspace(lo + 2 * sigma, hi - 2 * sigma, num_energies), sigma


def _wks_filters(basis, num_energies):
    if basis.kind != "lbo":
        raise ValueError("descriptors need an LBO basis")
    if basis.k < 2:
        raise ValueError("descriptors need k >= 2")
    evals = basis.eigenvalues[1:]
    energies, sigma = _wks_energies(evals, num_energies)
    G = np.exp(-((energies[:, None] - np.log(evals)[None, :]) ** 2) / (2 * sigma**2))
    G /= G.sum(axis=1, keepdims=True)
    return G


def compute_wks(basis, num_energies=100):
    """Wave kernel signature.

    ``f_e(v) = sum_{i>=2} g_e(lambda_i) phi_i(v)^2`` with Gaussian filters
    ``g_e`` in log-eigenvalue, normalised to unit sum over ``i``.

    Parameters
    ----------
    basis : SpectralBasis
        LBO, ``k >= 2``.
    num_energies : int

    Returns
    -------
    desc : array, shape=[n, num_energies]
    """
    G = _wks_filters(basis, num_energies)
    return (basis.functions[:, 1:] ** 2) @ G.T


def landmark_descriptors(basis, landmarks, num_energies=100):
    """Wave-kernel bumps centred at landmark vertices, shape=[n, len(landmarks) * num_energies].

    ``f_{e,l}(v) = sum_{i>=2} g_e(lambda_i) phi_i(l) phi_i(v)``; unlike the WKS
    these are sign-sensitive, so they also fix symmetric flips.
    """
    G = _wks_filters(basis, num_energies)
    Phi = basis.functions[:, 1:]
    blocks = [Phi @ (G * Phi[l][None, :]).T for l in np.atleast_1d(landmarks)]
    return np.hstack(blocks)


def descriptors(basis, num_energies=100, landmarks=None):
    d = compute_wks(basis, num_energies)
    if landmarks is not None and len(landmarks):
        d = np.hstack([d, landmark_descriptors(basis, landmarks, num_energies)])
    return d


def _normalize_columns(desc, mass):
    nrm = np.sqrt(mass @ desc**2)
    nrm[nrm == 0] = 1.0
    return desc / nrm


def default_commutativity_weight(A_M, evals_M, evals_N):
    """``1e-3 * ||A_M||_F^2 / mean((lambda_i^M - lambda_j^N)^2)``; NaN slots ignored."""
    D = (evals_M[:, None] - evals_N[None, :]) ** 2
    D = D[np.isfinite(D)]
    m = D.mean() if D.size else 0.0
    return 0.0 if m == 0 else 1e-3 * np.linalg.norm(A_M) ** 2 / m


def estimate_fmap(desc_M, desc_N, basis_M, basis_N, k_init=20, mu_comm=None, normalize=True):
    """Descriptor-preservation functional map with a commutativity penalty.

    Minimises ``||C A_N - A_M||_F^2 + mu * sum_ij C_ij^2 (lambda_i^M - lambda_j^N)^2``
    row by row in closed form; ``A`` are the descriptors projected onto the
    first ``k_init`` basis functions.

    Parameters
    ----------
    desc_M, desc_N : array, shape=[n_M, d], [n_N, d]
    basis_M, basis_N : SpectralBasis
    k_init : int
    mu_comm : float, optional
        Default from :func:`default_commutativity_weight`.
    normalize : bool
        Scale every descriptor column to unit W-norm on its own shape first.

    Returns
    -------
    C : array, shape=[k_init, k_init]
    """
    if desc_M.shape[1] != desc_N.shape[1]:
        raise ValueError("descriptor counts differ between the shapes")
    if k_init > min(basis_M.k, basis_N.k):
        raise ValueError(f"k_init={k_init} exceeds a basis size")
    PM = basis_M.functions[:, :k_init]
    PN = basis_N.functions[:, :k_init]
    if normalize:
        desc_M = _normalize_columns(desc_M, basis_M.mass)
        desc_N = _normalize_columns(desc_N, basis_N.mass)
    A_M = PM.T @ (basis_M.mass[:, None] * desc_M)
    A_N = PN.T @ (basis_N.mass[:, None] * desc_N)
    lm, ln = basis_M.eigenvalues[:k_init], basis_N.eigenvalues[:k_init]
    if mu_comm is None:
        mu_comm = default_commutativity_weight(A_M, lm, ln)
    D = (lm[:, None] - ln[None, :]) ** 2
    D[~np.isfinite(D)] = 0.0
    AAt = A_N @ A_N.T
    rhs = A_M @ A_N.T
    C = np.empty((k_init, k_init))
    for i in range(k_init):
        lhs = AAt + mu_comm * np.diag(D[i])
        cond = np.linalg.cond(lhs)
        if not cond < MAX_CONDITION:
            raise RankDeficiencyError(
                f"normal equations for row {i} are singular (condition estimate {cond:.3g}); "
                "add descriptors or landmarks"
            )
        C[i] = np.linalg.solve(lhs, rhs[i])
    return C


def nearest_neighbors(query, data, method="kdtree", rtol=1e-12):
    """Exact nearest row of ``data`` for every row of ``query``; ties go to the smaller index."""
    query = np.ascontiguousarray(query, dtype=float)
    data = np.ascontiguousarray(data, dtype=float)
    if method == "kdtree":
        tree = cKDTree(data)
        kk = min(2, data.shape[0])
        d, idx = tree.query(query, k=kk, workers=-1)
        if kk == 1:
            return idx.astype(np.int64)
        out = idx[:, 0].astype(np.int64)
        tied = np.flatnonzero(d[:, 1] <= d[:, 0] * (1 + rtol))
        for r in tied:
            cand = tree.query_ball_point(query[r], d[r, 0] * (1 + rtol) + 1e-300)
            out[r] = min(cand) if cand else out[r]
        return out
    if method == "brute":
        out = np.empty(query.shape[0], dtype=np.int64)
        chunk = max(1, int(2e7 // max(1, data.size)))
        for s in range(0, query.shape[0], chunk):
            q = query[s : s + chunk]
            d = np.sqrt(((q[:, None, :] - data[None, :, :]) ** 2).sum(-1))
            dmin = d.min(axis=1, keepdims=True)
            out[s : s + chunk] = np.argmax(d <= dmin * (1 + rtol), axis=1)
        return out
    raise ValueError(f"unknown NN method {method!r}")


def extract_p2p(basis_M, basis_N, C, source_rows=None, target_rows=None, method="kdtree"):
    """Vertex map from a functional map by nearest neighbours of ``Phi_M C`` in ``Phi_N``.

    Parameters
    ----------
    basis_M, basis_N : SpectralBasis
    C : array, shape=[k_M, k_N]
    source_rows : array of int, optional
        Only map these M vertices.
    target_rows : array of int, optional
        Only search among these N vertices (returned indices still refer to N).
    method : {'kdtree', 'brute'}

    Returns
    -------
    pi : Correspondence
        ``len(pi) == len(source_rows)`` when given.
    """
    kM, kN = C.shape
    emb = basis_M.functions[:, :kM]
    if source_rows is not None:
        emb = emb[source_rows]
    emb = emb @ C
    tgt = basis_N.functions[:, :kN]
    if target_rows is not None:
        tgt = tgt[target_rows]
    j = nearest_neighbors(emb, tgt, method)
    if target_rows is not None:
        j = np.asarray(target_rows)[j]
    return Correspondence(j, basis_N.n)


def fmap_from_p2p(pi, basis_M, basis_N, k=None, source_rows=None):
    """Functional map induced by a vertex map.

    With a total map this is the W-adjoint ``Phi_M^T W_M Phi_N[pi]``. When
    ``source_rows`` is given (``pi`` then lists their images) or ``pi`` has
    unmapped entries, it is the least-squares fit on the mapped rows.

    Parameters
    ----------
    pi : Correspondence
    basis_M, basis_N : SpectralBasis
    k : int or (int, int), optional
        Output size; defaults to the full basis sizes.
    source_rows : array of int, optional

    Returns
    -------
    C : array, shape=[k_M, k_N]
    """
    kM, kN = (basis_M.k, basis_N.k) if k is None else ((k, k) if np.isscalar(k) else k)
    if kM > basis_M.k or kN > basis_N.k:
        raise ValueError(f"requested size {(kM, kN)} exceeds the bases {(basis_M.k, basis_N.k)}")
    target = pi.map
    if source_rows is None:
        if target.size != basis_M.n:
            raise ValueError("a total map needs one entry per source vertex")
        if pi.is_total:
            PM = basis_M.functions[:, :kM]
            return PM.T @ (basis_M.mass[:, None] * basis_N.functions[target, :kN])
        source_rows = np.flatnonzero(target >= 0)
        target = target[source_rows]
    else:
        source_rows = np.asarray(source_rows)
        if target.size != source_rows.size:
            raise ValueError("pi must list one image per source row")
    A = basis_M.functions[source_rows, :kM]
    B = basis_N.functions[target, :kN]
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 0 or sv[0] / sv[-1] > MAX_CONDITION or A.shape[0] < kM:
        raise RankDeficiencyError(f"sampled basis rows are rank deficient at k={kM}")
    return np.linalg.lstsq(A, B, rcond=None)[0]


def zoomout(C0, basis_M, basis_N, k_final, step=1, samples=None, method="kdtree"):
    """Spectral upsampling of a functional map.

    Alternates point-to-point extraction at the current size and map
    re-estimation ``step`` functions larger, until ``k_final``.

    Parameters
    ----------
    C0 : array, shape=[k0, k0]
    basis_M, basis_N : SpectralBasis
    k_final : int
    step : int
    samples : array of int, optional
        Source vertices used by the fast variant (least-squares refits on
        those rows only).

    Returns
    -------
    C : array, shape=[k_final, k_final]
    """
    k0 = C0.shape[0]
    if C0.shape != (k0, k0):
        raise ValueError("ZoomOut needs a square initial map")
    if not k0 <= k_final <= min(basis_M.k, basis_N.k):
        raise ValueError(f"need k0={k0} <= k_final={k_final} <= basis sizes")
    if step < 1:
        raise ValueError("step must be >= 1")
    C, k = C0, k0
    while k < k_final:
        pi = extract_p2p(basis_M, basis_N, C, source_rows=samples, method=method)
        k = min(k + step, k_final)
        C = fmap_from_p2p(pi, basis_M, basis_N, k, source_rows=samples)
    return C


def farthest_point_sampling(points, n_samples, seed=0):
    """Greedy Euclidean farthest-point sample indices, first point chosen by ``seed``."""
    points = np.asarray(points, dtype=float)
    n_samples = min(n_samples, len(points))
    rng = np.random.default_rng(seed)
    idx = [int(rng.integers(len(points)))]
    d = np.linalg.norm(points - points[idx[0]], axis=1)
    for _ in range(n_samples - 1):
        j = int(np.argmax(d))
        idx.append(j)
        d = np.minimum(d, np.linalg.norm(points - points[j], axis=1))
    return np.array(idx)


@dataclass
class MatchConfig:
    """Parameters of the descriptor + ZoomOut matching pipeline.

    Defaults: 20x20 initial map from descriptors built on 200 eigenfunctions,
    refined to 120x120 with step 5; Orthoprods start from 40 eigenfunctions
    and degree-2 products.
    """

    kind: str = "lbo"
    k_init: int = 20
    k_final: int = 120
    step: int = 5
    n_desc_eigs: int = 200
    num_energies: int = 100
    mu_comm: float | None = None
    landmarks_M: tuple | None = None
    landmarks_N: tuple | None = None
    fast: bool = False
    sampling: str = "surface"
    n_samples: int = 1000
    orthoprods_k0: int = 40
    orthoprods_order: int = 2
    seed: int = 0
    nn_method: str = "kdtree"

    def __post_init__(self):
        if self.kind not in ("lbo", "cmh", "orthoprods"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "orthoprods":
            self.k_init = self.orthoprods_k0
        if self.k_init > self.k_final:
            raise ValueError(f"k_init={self.k_init} > k_final={self.k_final}")
        if (self.landmarks_M is None) != (self.landmarks_N is None):
            raise ValueError("landmarks must be given on both shapes")


@dataclass(eq=False)
class PreparedShape:
    """LBO basis for descriptors and the (possibly augmented) basis used for matching."""

    lbo: object
    basis: object


def prepare_shape(mesh, cfg, ops=None, lbo=None):
    """Compute the bases a :class:`MatchConfig` needs on one tet mesh.

    ``lbo`` may be a precomputed (e.g. cached) LBO basis with enough functions.
    """
    ops = assemble_volume_operators(mesh) if ops is None else ops
    k_lbo = min(max(cfg.n_desc_eigs, cfg.k_final, cfg.orthoprods_k0), mesh.n_vertices)
    if lbo is None or lbo.k < k_lbo:
        lbo = compute_eigenbasis(ops, k_lbo)
    lbo = lbo.truncated(k_lbo)
    if cfg.kind == "lbo":
        basis = lbo.truncated(min(cfg.k_final, lbo.k))
    elif cfg.kind == "cmh":
        basis = augment_cmh(lbo.truncated(min(cfg.k_final, lbo.k)), mesh.vertices)
    else:
        basis = build_orthoprods(lbo.truncated(cfg.orthoprods_k0), cfg.orthoprods_order)
    return PreparedShape(lbo, basis)


def initial_fmap(shape_M, shape_N, cfg):
    lmM = None if cfg.landmarks_M is None else list(cfg.landmarks_M)
    lmN = None if cfg.landmarks_N is None else list(cfg.landmarks_N)
    dM = descriptors(shape_M.lbo, cfg.num_energies, lmM)
    dN = descriptors(shape_N.lbo, cfg.num_energies, lmN)
    return estimate_fmap(dM, dN, shape_M.basis, shape_N.basis, cfg.k_init, cfg.mu_comm)


def match_volumes(M, N, cfg=None, shape_M=None, shape_N=None, samples=None):
    """Descriptor-initialised, ZoomOut-refined functional map between two tet meshes.

    Returns
    -------
    C : array, shape=[k, k]
    shape_M, shape_N : PreparedShape
    C0 : array
        The initial descriptor-based map.
    """
    cfg = MatchConfig() if cfg is None else cfg
    shape_M = prepare_shape(M, cfg) if shape_M is None else shape_M
    shape_N = prepare_shape(N, cfg) if shape_N is None else shape_N
    C0 = initial_fmap(shape_M, shape_N, cfg)
    k_final = min(cfg.k_final, shape_M.basis.k, shape_N.basis.k)
    if samples is None and cfg.fast:
        if cfg.sampling == "surface":
            from .mesh.core import extract_boundary

            samples = extract_boundary(M).parent_map
        else:
            samples = farthest_point_sampling(M.vertices, cfg.n_samples, cfg.seed)
    C = zoomout(C0, shape_M.basis, shape_N.basis, k_final, cfg.step, samples=samples, method=cfg.nn_method)
    return C, shape_M, shape_N, C0


def save_fmap_csv(C, path):
    """First line ``k_M k_N``, then one comma-separated row per line."""
    with open(path, "w") as fh:
        fh.write(f"{C.shape[0]} {C.shape[1]}\n")
        np.savetxt(fh, C, delimiter=",", fmt="%.17g")


def load_fmap_csv(path):
    with open(path) as fh:
        kM, kN = (int(x) for x in fh.readline().split())
        C = np.loadtxt(fh, delimiter=",", ndmin=2)
    if C.shape != (kM, kN):
        raise ValueError(f"functional map file declares {(kM, kN)} but holds {C.shape}")
    return C
