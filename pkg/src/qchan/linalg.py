"""Dense complex linear algebra on numpy arrays.

Every spectral quantity in the package goes through :func:`eig_hermitian`;
singular values of a non-Hermitian matrix ``m`` are obtained from the
eigenvalues of ``m^dagger m``.

Choi operators are stored with factor order ``out (x) in``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotHermitianError

#: relative eigenvalue cutoff for :func:`pinv_on_support`
PINV_REL_TOL = 1e-10
#: relative eigenvalue cutoff for :func:`support_projector`
SUPPORT_REL_TOL = 1e-9
#: containment tolerance for :func:`support_contains`
CONTAINS_TOL = 1e-7


def as_matrix(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    return m


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def hermitian_residual(m):
    """``max|m - m^dagger|`` relative to ``max|m|`` (0 for the zero matrix)."""
    m = np.asarray(m)
    scale = np.abs(m).max() if m.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.abs(m - dagger(m)).max() / scale)


def is_hermitian(m, rel_tol=1e-12):
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and hermitian_residual(m) <= rel_tol


def hermitian(m, rel_tol=1e-12):
    """Validate and return the exactly-Hermitian part of ``m``."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"Hermitian matrix must be square, got {m.shape}")
    res = hermitian_residual(m)
    if res > rel_tol:
        raise NotHermitianError(f"matrix is not Hermitian (relative residual {res:.3e})")
    return (m + dagger(m)) / 2


def kron(a, b):
    """Kronecker product ``a (x) b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def _factor_index(keep):
    if keep in ("out", "first", 0):
        return 0
    if keep in ("in", "second", 1):
        return 1
    raise ValueError(f"keep must be 'out'/'first' or 'in'/'second', got {keep!r}")


def partial_trace(m, dims, keep="in"):
    """Trace out one factor of a bipartite operator.

    Parameters
    ----------
    m : (d0*d1, d0*d1) array
        Operator on ``H_0 (x) H_1``. For Choi operators ``dims = (d_out, d_in)``.
    dims : tuple of two ints
    keep : {"in", "out", "first", "second", 0, 1}
        Factor that survives. ``"out"``/``"first"`` keep ``H_0``.
    """
    m = as_matrix(m)
    d0, d1 = int(dims[0]), int(dims[1])
    if m.shape != (d0 * d1, d0 * d1):
        raise DimensionError(f"matrix of shape {m.shape} does not match dims {dims}")
    t = m.reshape(d0, d1, d0, d1)
    if _factor_index(keep) == 0:
        return np.einsum("ajbj->ab", t)
    return np.einsum("iaib->ab", t)


def permute_subsystems(m, dims, perm):
    """Reorder the tensor factors of a square operator.

    The factor at position ``perm[k]`` of the input becomes factor ``k`` of
    the output.
    """
    m = as_matrix(m)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionError(f"matrix of shape {m.shape} does not match dims {dims}")
    if sorted(perm) != list(range(len(dims))):
        raise ValueError(f"{perm} is not a permutation of {len(dims)} factors")
    k = len(dims)
    t = m.reshape(dims + dims)
    axes = list(perm) + [k + p for p in perm]
    return t.transpose(axes).reshape(total, total)


def eig_hermitian(m, rel_tol=1e-10):
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.

    Raises :class:`NotHermitianError` when ``m`` deviates from Hermiticity by
    more than ``rel_tol`` (relative to its largest entry).
    """
    h = hermitian(m, rel_tol)
    w, u = np.linalg.eigh(h)
    return w, u


def singular_values(m):
    """Singular values in descending order, via the spectrum of ``m^dagger m``."""
    m = as_matrix(m)
    g = dagger(m) @ m
    w, _ = np.linalg.eigh((g + dagger(g)) / 2)
    return np.sqrt(np.clip(w, 0.0, None))[::-1]


def op_norm_inf(m):
    """Largest singular value."""
    m = as_matrix(m)
    if m.shape[0] == m.shape[1] and is_hermitian(m, 1e-10):
        w, _ = eig_hermitian(m)
        return float(np.abs(w).max())
    return float(singular_values(m)[0])


def trace_norm(m):
    """Sum of singular values of a square matrix."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError("trace_norm requires a square matrix")
    if is_hermitian(m, 1e-10):
        w, _ = eig_hermitian(m)
        return float(np.abs(w).sum())
    return float(singular_values(m).sum())


def pinv_on_support(m, rel_tol=PINV_REL_TOL):
    """Moore-Penrose inverse of a Hermitian PSD matrix.

    Eigenvalues ``lambda <= rel_tol * lambda_max`` are treated as zero. The
    zero matrix maps to the zero matrix.
    """
    w, u = eig_hermitian(m)
    lam_max = np.abs(w).max()
    if lam_max == 0.0:
        return np.zeros_like(u)
    keep = w > rel_tol * lam_max
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return (u * inv) @ dagger(u)


@dataclass(frozen=True)
class SupportProjector:
    projector: np.ndarray
    rank: int
    tolerance: float

    @property
    def dim(self):
        return self.projector.shape[0]


def support_projector(m, abs_tol=None):
    """Projector onto the span of eigenvectors with ``|lambda| > abs_tol``.

    The default ``abs_tol`` is ``1e-9 * max|lambda|``. Works for any Hermitian
    input; for PSD input this is the usual support.
    """
    w, u = eig_hermitian(m)
    scale = np.abs(w).max() if w.size else 0.0
    tol = SUPPORT_REL_TOL * scale if abs_tol is None else float(abs_tol)
    keep = np.abs(w) > tol
    if scale == 0.0:
        keep[:] = False
    v = u[:, keep]
    return SupportProjector(v @ dagger(v), int(keep.sum()), tol)


def support_contains(a, b, tol=CONTAINS_TOL):
    """True iff the support of ``b`` lies inside the support of ``a``."""
    if a.dim != b.dim:
        raise DimensionError(f"projectors act on different spaces ({a.dim} vs {b.dim})")
    if b.rank == 0:
        return True
    resid = (np.eye(a.dim) - a.projector) @ b.projector
    return op_norm_inf(resid) <= tol


def is_psd(m, tol=1e-9):
    w, _ = eig_hermitian(m)
    scale = max(1.0, float(np.abs(w).max()))
    return bool(w.min() >= -tol * scale)


def vec(m):
    """Row-major vectorization ``|m>> = (m (x) I)|I>>``."""
    return as_matrix(m).reshape(-1)


def unvec(v, shape):
    return np.asarray(v, dtype=complex).reshape(shape)


def max_entangled(d):
    """Unnormalized ``|I>> = sum_k |k>|k>``."""
    return np.eye(d, dtype=complex).reshape(-1)
