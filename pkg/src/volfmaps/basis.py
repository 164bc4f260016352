"""Projection onto spectral bases, boundary traces, and augmented bases (CMH, Orthoprods)."""

from __future__ import annotations

from dataclasses import replace
from itertools import combinations_with_replacement

import numpy as np

from .spectral import SpectralBasis


class RankDeficiencyError(ValueError):
    pass


# Orthonormality error above which projections fall back to W-least-squares.
_ORTHO_TOL = 1e-6
# Largest condition number accepted by the boundary least squares.
MAX_CONDITION = 1e12


def _as_2d(signal):
    signal = np.asarray(signal, dtype=float)
    return (signal[:, None], True) if signal.ndim == 1 else (signal, False)


def project(basis, signal):
    """Spectral coefficients of a vertex signal.

    Parameters
    ----------
    basis : SpectralBasis
    signal : array-like, shape=[n] or [n, c]

    Returns
    -------
    coeffs : array, shape=[k] or [k, c]
    """
    f, flat = _as_2d(signal)
    if f.shape[0] != basis.n:
        raise ValueError(f"signal has {f.shape[0]} rows, basis has {basis.n} vertices")
    Phi, w = basis.functions, basis.mass
    a = Phi.T @ (w[:, None] * f)
    if basis.orthonormality_error() > _ORTHO_TOL:
        a = np.linalg.solve(Phi.T @ (w[:, None] * Phi), a)
    return a[:, 0] if flat else a


def reconstruct(basis, coeffs):
    c, flat = _as_2d(coeffs)
    if c.shape[0] != basis.k:
        raise ValueError(f"coefficients have {c.shape[0]} rows, basis has {basis.k} functions")
    f = basis.functions @ c
    return f[:, 0] if flat else f


def restrict_to_boundary(basis, surface):
    """Rows of ``basis`` at the boundary vertices, in surface vertex order."""
    if surface.parent_map is None:
        raise ValueError("surface has no parent_map; extract it with extract_boundary")
    if surface.parent_map.max(initial=-1) >= basis.n:
        raise ValueError("parent_map points outside the basis")
    return basis.functions[surface.parent_map]


def with_boundary(basis, surface):
    """Copy of ``basis`` that remembers its boundary vertices."""
    restrict_to_boundary(basis, surface)
    return replace(basis, boundary_parent=np.array(surface.parent_map))


def condition_number(A):
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf


def project_boundary(trace, signal, mass=None, max_condition=MAX_CONDITION):
    """Least-squares coefficients ``a`` with ``trace @ a ~ signal``.

    Plain Moore-Penrose solve by default; pass the surface ``mass`` to
    weight rows by it.

    Parameters
    ----------
    trace : array, shape=[n_b, k]
    signal : array, shape=[n_b] or [n_b, c]
    mass : array, shape=[n_b], optional
    max_condition : float

    Returns
    -------
    coeffs : array, shape=[k] or [k, c]
    """
    f, flat = _as_2d(signal)
    A = np.asarray(trace, dtype=float)
    if A.shape[0] != f.shape[0]:
        raise ValueError(f"trace has {A.shape[0]} rows, signal has {f.shape[0]}")
    if A.shape[1] > A.shape[0]:
        raise RankDeficiencyError(f"k = {A.shape[1]} exceeds the {A.shape[0]} boundary rows")
    if mass is not None:
        s = np.sqrt(np.asarray(mass, dtype=float))
        A, f = A * s[:, None], f * s[:, None]
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if cond > max_condition:
        raise RankDeficiencyError(f"boundary trace is rank deficient (condition estimate {cond:.3g})")
    a = Vt.T @ ((U.T @ f) / sv[:, None])
    return a[:, 0] if flat else a


def boundary_pinv(trace, mass=None, max_condition=MAX_CONDITION):
    """Explicit (optionally mass-weighted) left inverse of a trace matrix, shape=[k, n_b]."""
    return project_boundary(trace, np.eye(trace.shape[0]), mass, max_condition)


def _w_orthogonalize_against(V, Q, w, passes=2):
    for _ in range(passes):
        V = V - Q @ (Q.T @ (w[:, None] * V))
    return V


def _w_norm(v, w):
    return np.sqrt(np.einsum("i...,i,i...->...", v, w, v))


def augment_cmh(basis, coordinates, rtol=1e-8):
    """Replace the last 3 basis functions by W-orthonormalised coordinate functions.

    Parameters
    ----------
    basis : SpectralBasis
        LBO basis with ``k >= 4``.
    coordinates : array, shape=[n, 3]
    rtol : float
        A coordinate whose residual W-norm drops below ``rtol`` times its
        original norm is considered dependent.

    Returns
    -------
    cmh : SpectralBasis
        ``kind='cmh'``; eigenvalue slots of the coordinate columns are NaN.
    """
    if basis.k < 4:
        raise ValueError(f"CMH needs k >= 4, got {basis.k}")
    X = np.asarray(coordinates, dtype=float)
    if X.shape != (basis.n, 3):
        raise ValueError(f"coordinates must be ({basis.n}, 3), got {X.shape}")
    w = basis.mass
    Q = basis.functions[:, : basis.k - 3]
    cols = []
    for c in range(3):
        v = X[:, c]
        ref = _w_norm(v, w)
        B = np.column_stack([Q] + cols)
        v = _w_orthogonalize_against(v[:, None], B, w)[:, 0]
        nv = _w_norm(v, w)
        if not nv > rtol * ref:
            raise RankDeficiencyError(f"coordinate {'xyz'[c]} lies in the span of the retained basis")
        cols.append(v / nv)
    Phi = np.column_stack([Q] + cols)
    lam = np.concatenate([basis.eigenvalues[: basis.k - 3], np.full(3, np.nan)])
    return replace(basis, functions=Phi, eigenvalues=lam, kind="cmh")


def orthoprods_candidates(basis, order=2):
    """Index tuples of the candidate functions, in Gram-Schmidt order.

    Eigenfunctions first by ascending eigenvalue, then products of degree
    2..order sorted by the sum of their eigenvalues (ties by index).
    """
    lam = basis.eigenvalues
    out = [(i,) for i in range(basis.k)]
    prods = []
    for deg in range(2, order + 1):
        prods.extend(combinations_with_replacement(range(basis.k), deg))
    prods.sort(key=lambda t: (sum(lam[i] for i in t), t))
    return out + prods


def build_orthoprods(basis, order=2, tol=1e-8):
    """Eigenfunctions plus their pointwise products, W-orthonormalised.

    Parameters
    ----------
    basis : SpectralBasis
        LBO basis with ``k0`` functions.
    order : int
        Highest product degree.
    tol : float
        Candidates whose residual W-norm falls below ``tol`` times the
        largest candidate norm are dropped.

    Returns
    -------
    prods : SpectralBasis
        ``kind='orthoprods'``; the first ``k0`` columns are the input
        eigenfunctions, product columns carry NaN eigenvalues.
    """
    if basis.kind != "lbo":
        raise ValueError("Orthoprods are built from an LBO basis")
    if order < 1:
        raise ValueError("order must be >= 1")
    w = basis.mass
    Phi0 = basis.functions
    cand = orthoprods_candidates(basis, order)
    norms = np.array([_w_norm(np.prod(Phi0[:, list(t)], axis=1), w) for t in cand])
    thresh = tol * norms.max()
    Q = np.empty((basis.n, len(cand)))
    Q[:, : basis.k] = Phi0
    q = basis.k
    for t in cand[basis.k :]:
        v = np.prod(Phi0[:, list(t)], axis=1)
        v = _w_orthogonalize_against(v[:, None], Q[:, :q], w)[:, 0]
        nv = _w_norm(v, w)
        if nv > thresh:
            Q[:, q] = v / nv
            q += 1
    if q == 0:
        raise RankDeficiencyError("Orthoprods basis is empty")
    lam = np.concatenate([basis.eigenvalues, np.full(q - basis.k, np.nan)])
    return replace(basis, functions=Q[:, :q].copy(), eigenvalues=lam, kind="orthoprods")
