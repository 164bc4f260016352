"""Smallest eigenpairs of ``S phi = lambda W phi`` and the basis container.

The iterative route is ARPACK's implicitly restarted Lanczos in shift-invert
mode around a small negative shift, followed by a Rayleigh-Ritz cleanup in
the W inner product. A dense reference solver is kept for tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, splu

KINDS = ("lbo", "cmh", "orthoprods")
_KIND_CODE = {k: i for i, k in enumerate(KINDS)}
VFMB_MAGIC = b"VFMB"
_HEADER = struct.Struct("<4sQQQQ")

DENSE_LIMIT = 3000


class EigenSolverError(RuntimeError):
    pass


@dataclass(eq=False)
class SpectralBasis:
    """Basis functions on a mesh with their (pseudo-)eigenvalues.

    Attributes
    ----------
    functions : array, shape=[n, k]
        W-orthonormal columns.
    eigenvalues : array, shape=[k]
        NaN marks columns that are not Laplacian eigenfunctions
        (coordinate columns of CMH, product columns of Orthoprods).
    mass : array, shape=[n]
        Lumped mass used for the inner product.
    kind : {'lbo', 'cmh', 'orthoprods'}
    boundary_parent : array, shape=[n_b], optional
        Volume indices of the boundary vertices, in surface order.
    """

    functions: np.ndarray
    eigenvalues: np.ndarray
    mass: np.ndarray
    kind: str = "lbo"
    boundary_parent: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.functions.shape[1] != self.eigenvalues.size:
            raise ValueError("one eigenvalue slot per basis function required")
        if self.mass is not None and self.mass.size != self.functions.shape[0]:
            raise ValueError("mass size must equal the number of vertices")

    @property
    def n(self):
        return self.functions.shape[0]

    @property
    def k(self):
        return self.functions.shape[1]

    @property
    def boundary_trace(self):
        if self.boundary_parent is None:
            return None
        return self.functions[self.boundary_parent]

    def truncated(self, k):
        if not 1 <= k <= self.k:
            raise ValueError(f"cannot truncate a size-{self.k} basis to {k}")
        return replace(self, functions=self.functions[:, :k], eigenvalues=self.eigenvalues[:k])

    def orthonormality_error(self):
        """``||Phi^T W Phi - I||_F / sqrt(k)``."""
        G = self.functions.T @ (self.mass[:, None] * self.functions)
        return float(np.linalg.norm(G - np.eye(self.k)) / np.sqrt(self.k))


def eigen_residual(ops, basis):
    """``||S Phi - W Phi Lambda||_F / ||W Phi Lambda||_F``.

    Falls back to a stiffness-scaled denominator when the spectrum is
    (numerically) all zeros, e.g. a basis holding only the constant mode.
    """
    Phi = basis.functions
    WPL = ops.mass_diag[:, None] * Phi * basis.eigenvalues[None, :]
    num = np.linalg.norm(ops.stiffness @ Phi - WPL)
    den = np.linalg.norm(WPL)
    floor = sparse.linalg.norm(ops.stiffness) * np.linalg.norm(Phi) / np.sqrt(basis.n)
    return float(num / max(den, floor))


def _sign_fix(Phi, rtol=1e-6):
    """Make the lowest-index entry of (near-)maximal magnitude positive in each column."""
    A = np.abs(Phi)
    top = A.max(axis=0)
    idx = np.argmax(A >= (1 - rtol) * top[None, :], axis=0)
    s = np.sign(Phi[idx, np.arange(Phi.shape[1])])
    s[s == 0] = 1
    return Phi * s[None, :]


def w_orthonormalize(V, mass):
    """Cholesky-based W-orthonormalisation of the columns of ``V`` (applied twice)."""
    for _ in range(2):
        G = V.T @ (mass[:, None] * V)
        L = np.linalg.cholesky(0.5 * (G + G.T))
        V = scipy.linalg.solve_triangular(L, V.T, lower=True).T
    return V


def rayleigh_ritz(ops, V):
    """Best eigenpair approximations within ``span(V)``, ascending."""
    Q = w_orthonormalize(V, ops.mass_diag)
    H = Q.T @ (ops.stiffness @ Q)
    lam, U = np.linalg.eigh(0.5 * (H + H.T))
    return lam, Q @ U


def _default_shift(ops):
    d = ops.stiffness.diagonal() / ops.mass_diag
    return -1e-6 * float(np.median(d[d > 0])) if (d > 0).any() else -1.0


def _subspace_iteration(ops, k, sigma, tol, maxiter):
    """Block shift-invert iteration; used when ``k`` is too close to ``n`` for ARPACK."""
    n = ops.n
    lu = splu((ops.stiffness - sigma * ops.mass).tocsc())
    rng = np.random.default_rng(0)
    V = rng.standard_normal((n, k))
    lam_old = None
    for _ in range(maxiter):
        V = lu.solve(ops.mass_diag[:, None] * V)
        lam, V = rayleigh_ritz(ops, V)
        if lam_old is not None and np.all(np.abs(lam - lam_old) <= tol * np.maximum(np.abs(lam), 1.0)):
            break
        lam_old = lam
    return lam, V


def compute_eigenbasis(ops, k, sigma=None, tol=1e-12, maxiter=None, residual_tol=1e-8):
    """``k`` algebraically smallest eigenpairs of ``S phi = lambda W phi``.

    Parameters
    ----------
    ops : LaplacianOperators
    k : int
    sigma : float, optional
        Shift for shift-invert; default is a small negative multiple of the
        median diagonal ratio of ``S`` and ``W``.
    tol : float
        ARPACK tolerance.
    maxiter : int, optional
        Restart limit, default ``50 * k``.
    residual_tol : float
        Maximum accepted relative eigen-residual.

    Returns
    -------
    basis : SpectralBasis
        Ascending eigenvalues, deterministic signs.
    """
    n = ops.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    sigma = _default_shift(ops) if sigma is None else float(sigma)
    maxiter = 50 * k if maxiter is None else maxiter
    if k >= n - 1:
        lam, Phi = _subspace_iteration(ops, k, sigma, tol, maxiter)
    else:
        try:
            lam, Phi = eigsh(
                ops.stiffness.tocsc(), k=k, M=ops.mass.tocsc(), sigma=sigma, which="LM",
                tol=tol, maxiter=maxiter, v0=np.ones(n),
            )
        except ArpackNoConvergence as exc:
            raise EigenSolverError(
                f"shift-invert Lanczos did not converge after {maxiter} restarts "
                f"({len(exc.eigenvalues)}/{k} pairs converged)"
            ) from exc
        lam, Phi = rayleigh_ritz(ops, Phi)
    basis = SpectralBasis(_sign_fix(Phi), lam, ops.mass_diag.copy(), "lbo")
    res = eigen_residual(ops, basis)
    if not res < residual_tol:
        raise EigenSolverError(f"eigen-residual {res:.3g} exceeds {residual_tol:g}")
    return basis


def dense_eigen_oracle(ops, k=None):
    """Full decomposition through ``W^-1/2 S W^-1/2`` (small meshes only)."""
    n = ops.n
    if n > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to n <= {DENSE_LIMIT}, got {n}")
    k = n if k is None else k
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    s = 1.0 / np.sqrt(ops.mass_diag)
    A = ops.stiffness.toarray() * s[:, None] * s[None, :]
    lam, U = np.linalg.eigh(0.5 * (A + A.T))
    Phi = s[:, None] * U[:, :k]
    return SpectralBasis(_sign_fix(Phi), lam[:k], ops.mass_diag.copy(), "lbo")


def save_basis(basis, path):
    """Binary VFMB cache: header, eigenvalues, row-major functions, optional trace block."""
    parent = basis.boundary_parent
    nb = 0 if parent is None else parent.size
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(VFMB_MAGIC, basis.n, basis.k, _KIND_CODE[basis.kind], nb))
        fh.write(np.ascontiguousarray(basis.eigenvalues, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(basis.functions, dtype="<f8").tobytes())
        if nb:
            fh.write(np.ascontiguousarray(parent, dtype="<i8").tobytes())
            fh.write(np.ascontiguousarray(basis.functions[parent], dtype="<f8").tobytes())


def load_basis(path, mass=None):
    """Read a VFMB cache; ``mass`` is not stored and must be supplied for projections."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated VFMB file")
    magic, n, k, code, nb = _HEADER.unpack_from(raw, 0)
    if magic != VFMB_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {VFMB_MAGIC!r}")
    if code >= len(KINDS):
        raise ValueError(f"unknown basis kind code {code}")
    expected = _HEADER.size + 8 * (k + n * k) + (8 * nb + 8 * nb * k if nb else 0)
    if len(raw) != expected:
        raise ValueError(f"VFMB size mismatch: {len(raw)} bytes, expected {expected}")
    off = _HEADER.size
    lam = np.frombuffer(raw, "<f8", k, off).copy()
    off += 8 * k
    Phi = np.frombuffer(raw, "<f8", n * k, off).reshape(n, k).copy()
    off += 8 * n * k
    parent = None
    if nb:
        parent = np.frombuffer(raw, "<i8", nb, off).copy()
    mass = np.full(n, np.nan) if mass is None else np.asarray(mass, dtype=float)
    return SpectralBasis(Phi, lam, mass, KINDS[code], parent)


def export_basis_csv(basis, path):
    """First row: eigenvalues; then one row per vertex."""
    np.savetxt(path, np.vstack([basis.eigenvalues, basis.functions]), delimiter=",", fmt="%.17g")
