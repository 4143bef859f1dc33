"""
Dense complex linear algebra on bipartite operators.

Matrices are plain ``numpy`` arrays of dtype ``complex128`` with shape
``(n, n)``. A bipartite index ``(i, k)`` with ``i`` on subsystem A and ``k``
on subsystem B maps to the flat index ``i * dB + k``: A is always the slow
(left Kronecker) factor and B the fast one.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import BipartitionError, DimensionLimitError, NumericError, SymmetryError

__all__ = [
    "ATOL",
    "DEFAULT_MAX_DIM",
    "Bipartition",
    "as_matrix",
    "max_dim",
    "matrices_close",
    "max_abs_diff",
    "hermiticity_residual",
    "tensor",
    "partial_transpose",
    "partial_trace_B",
    "herm_eig",
    "min_eigenvalue",
    "schmidt_coefficients",
    "hs_inner",
    "matrix_to_dict",
    "matrix_from_dict",
]

#: Absolute tolerance for structural checks (Hermiticity, trace, completeness).
ATOL = 1e-10

DEFAULT_MAX_DIM = 4096


def max_dim() -> int:
    """Largest matrix side length allowed; ``HQMODEL_MAX_DIM`` overrides it."""
    value = os.environ.get("HQMODEL_MAX_DIM")
    if value is None:
        return DEFAULT_MAX_DIM
    try:
        limit = int(value)
    except ValueError:
        raise ValueError(f"HQMODEL_MAX_DIM must be an integer, got {value!r}") from None
    if limit < 1:
        raise ValueError(f"HQMODEL_MAX_DIM must be positive, got {limit}")
    return limit


def check_dim(dim: int) -> int:
    limit = max_dim()
    if dim > limit:
        raise DimensionLimitError(dim, limit)
    return dim


@dataclass(frozen=True)
class Bipartition:
    """Split of a ``dA * dB`` dimensional space into subsystems A and B."""

    dA: int
    dB: int

    def __post_init__(self):
        if int(self.dA) < 1 or int(self.dB) < 1:
            raise BipartitionError(f"local dimensions must be positive, got ({self.dA}, {self.dB})")

    @property
    def dim(self) -> int:
        return self.dA * self.dB

    def check(self, dim: int) -> None:
        if dim != self.dim:
            raise BipartitionError(
                f"dimension {dim} does not match bipartition {self.dA}x{self.dB}"
            )


def as_matrix(x) -> np.ndarray:
    """Return ``x`` as a square ``complex128`` array, raising on bad shapes."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("matrix must have positive dimension")
    return arr


def max_abs_diff(x, y) -> float:
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - y)))


def matrices_close(x, y, tol: float = ATOL) -> bool:
    """Tolerance-based equality: max entrywise deviation at most ``tol``."""
    return max_abs_diff(x, y) <= tol


def hermiticity_residual(x) -> float:
    x = np.asarray(x)
    return float(np.max(np.abs(x - x.conj().T)))


def tensor(x, y) -> np.ndarray:
    """Kronecker product with ``x`` as the slow index.

    ``tensor(x, y)[i*m + k, j*m + l] == x[i, j] * y[k, l]`` where ``m`` is the
    side length of ``y``.
    """
    x = as_matrix(x)
    y = as_matrix(y)
    check_dim(x.shape[0] * y.shape[0])
    return np.kron(x, y)


def _split(x: np.ndarray, part: Bipartition) -> np.ndarray:
    part.check(x.shape[0])
    return x.reshape(part.dA, part.dB, part.dA, part.dB)


def partial_transpose(x, part: Bipartition) -> np.ndarray:
    """Transpose the B factor only: ``[(i,k),(j,l)] <- [(i,l),(j,k)]``."""
    x = as_matrix(x)
    blocks = _split(x, part)
    return np.ascontiguousarray(blocks.transpose(0, 3, 2, 1)).reshape(x.shape)


def partial_trace_B(x, part: Bipartition) -> np.ndarray:
    """Trace out subsystem B, leaving a ``dA x dA`` matrix."""
    x = as_matrix(x)
    return np.einsum("ikjk->ij", _split(x, part))


def herm_eig(x, tol: float = ATOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    x : array_like
        Square matrix, Hermitian to within ``tol``.
    tol : float
        Maximum allowed entry of ``|x - x^dagger|``.

    Returns
    -------
    eigenvalues : ndarray of float
        Sorted in descending order.
    eigenvectors : ndarray
        Unitary matrix whose columns are the matching eigenvectors, so that
        ``x == V @ diag(eigenvalues) @ V^dagger``.

    Raises
    ------
    SymmetryError
        If ``x`` is not Hermitian within ``tol``.
    NumericError
        If the solver fails or the reconstruction residual exceeds ``1e-9``
        (relative to the largest entry of ``x`` when that exceeds one).
    """
    x = as_matrix(x)
    if not np.all(np.isfinite(x)):
        raise NumericError("matrix has non-finite entries")
    asym = hermiticity_residual(x)
    if asym > tol:
        raise SymmetryError(f"matrix is not Hermitian (residual {asym:.3e})")
    herm = 0.5 * (x + x.conj().T)
    try:
        vals, vecs = np.linalg.eigh(herm)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver did not converge: {exc}") from exc
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()

    scale = max(1.0, float(np.max(np.abs(herm))))
    recon = max_abs_diff((vecs * vals) @ vecs.conj().T, herm) / scale
    if recon > 1e-9:
        raise NumericError(f"eigendecomposition residual {recon:.3e} above 1e-9", residual=recon)
    return vals, vecs


def min_eigenvalue(x, tol: float = ATOL) -> float:
    x = as_matrix(x)
    if not np.all(np.isfinite(x)):
        raise NumericError("matrix has non-finite entries")
    asym = hermiticity_residual(x)
    if asym > tol:
        raise SymmetryError(f"matrix is not Hermitian (residual {asym:.3e})")
    try:
        vals = np.linalg.eigvalsh(0.5 * (x + x.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver did not converge: {exc}") from exc
    return float(vals[0])


def schmidt_coefficients(psi, part: Bipartition) -> np.ndarray:
    """Singular values of the ``dA x dB`` matricization of a pure state vector."""
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    if psi.size != part.dim:
        raise BipartitionError(
            f"vector length {psi.size} does not match bipartition {part.dA}x{part.dB}"
        )
    return np.linalg.svd(psi.reshape(part.dA, part.dB), compute_uv=False)


def hs_inner(x, y) -> complex:
    """``Tr(x @ y)`` computed as ``sum_ij x[i, j] * y[j, i]``."""
    x = as_matrix(x)
    y = as_matrix(y)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch {x.shape[0]} vs {y.shape[0]}")
    return complex(np.sum(x * y.T))


def matrix_to_dict(x) -> dict:
    """Serialize to the ``{"dim", "re", "im"}`` row-major exchange format."""
    x = as_matrix(x)
    flat = x.ravel()
    return {"dim": int(x.shape[0]), "re": flat.real.tolist(), "im": flat.imag.tolist()}


def matrix_from_dict(data: dict) -> np.ndarray:
    dim = int(data["dim"])
    re = np.asarray(data["re"], dtype=float)
    im = np.asarray(data["im"], dtype=float)
    if dim < 1 or re.size != dim * dim or im.size != dim * dim:
        raise ValueError(f"expected {dim * dim} real and imaginary entries for dim {dim}")
    check_dim(dim)
    return (re + 1j * im).reshape(dim, dim)
