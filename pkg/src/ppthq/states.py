"""
Bipartite density operators, the PPT family with a low-Schmidt-number
partial transpose, and Schmidt-number diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import BipartitionError, ConstructionError, DomainError
from .linalg import (
    ATOL,
    Bipartition,
    as_matrix,
    check_dim,
    hermiticity_residual,
    min_eigenvalue,
    partial_transpose,
    schmidt_coefficients,
    tensor,
)

__all__ = [
    "EXTERNAL_CLAIM",
    "TRIVIAL",
    "WITNESS_CERTIFIED",
    "SchmidtBound",
    "DensityOperator",
    "FamilyState",
    "max_entangled_projector",
    "max_entangled_vector",
    "maximally_mixed",
    "family_denominator",
    "build_family_state",
    "regroup_to_bipartition",
    "fidelity_witness_lower_bound",
    "schmidt_rank_pure",
]

EXTERNAL_CLAIM = "external-claim"
WITNESS_CERTIFIED = "witness-certified"
TRIVIAL = "trivial"
_PROVENANCE = (EXTERNAL_CLAIM, WITNESS_CERTIFIED, TRIVIAL)


@dataclass(frozen=True)
class SchmidtBound:
    """A Schmidt-number value together with where it comes from.

    ``external-claim`` values are proved elsewhere and are never checked here;
    ``trivial`` is the local-dimension bound ``min(dA, dB)``.
    """

    value: int
    provenance: str

    def __post_init__(self):
        if self.provenance not in _PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if int(self.value) < 1:
            raise ValueError("Schmidt bounds are positive integers")


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, unit-trace, positive semidefinite bipartite operator.

    The invariants are verified on construction (``check=False`` skips the
    eigenvalue computation for callers that have already validated ``mat``);
    the stored matrix is a read-only copy.
    """

    mat: np.ndarray
    part: Bipartition
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        mat = as_matrix(self.mat).copy()
        self.part.check(mat.shape[0])
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        if self.check:
            validate_state(mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def partial_transpose(self) -> DensityOperator:
        """Partially transposed state; raises ``ConstructionError`` if not PPT."""
        return DensityOperator(partial_transpose(self.mat, self.part), self.part)

    def min_eigenvalue(self) -> float:
        return min_eigenvalue(self.mat)


def state_residuals(mat: np.ndarray) -> dict[str, float]:
    """Hermiticity and trace residuals plus the smallest eigenvalue."""
    return {
        "hermiticity": hermiticity_residual(mat),
        "trace": abs(complex(np.trace(mat)) - 1.0),
        "min_eig": min_eigenvalue(mat, tol=np.inf),
    }


def validate_state(mat: np.ndarray, tol: float = ATOL, label: str = "") -> dict[str, float]:
    res = state_residuals(mat)
    if res["hermiticity"] > tol:
        raise ConstructionError(label + "hermitian", res["hermiticity"])
    if res["trace"] > tol:
        raise ConstructionError(label + "unit-trace", res["trace"])
    if res["min_eig"] < -tol:
        raise ConstructionError(label + "positive-semidefinite", -res["min_eig"])
    return res


def max_entangled_vector(d: int) -> np.ndarray:
    if d < 1:
        raise DomainError(f"d must be positive, got {d}")
    psi = np.zeros(d * d, dtype=np.complex128)
    psi[np.arange(d) * (d + 1)] = 1.0 / math.sqrt(d)
    return psi


def max_entangled_projector(d: int) -> np.ndarray:
    """Projector onto ``sum_i |ii> / sqrt(d)``; entries ``[(i,i),(j,j)] = 1/d``."""
    if d < 1:
        raise DomainError(f"d must be positive, got {d}")
    check_dim(d * d)
    out = np.zeros((d * d, d * d), dtype=np.complex128)
    diag = np.arange(d) * (d + 1)
    out[np.ix_(diag, diag)] = 1.0 / d
    return out


def maximally_mixed(part: Bipartition) -> DensityOperator:
    return DensityOperator(np.eye(part.dim, dtype=np.complex128) / part.dim, part)


@lru_cache(maxsize=64)
def _regroup_axes(local_dims: tuple[tuple[int, int], ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    n = len(local_dims)
    # row axes are (A1, B1, ..., An, Bn); target order is (A1..An, B1..Bn)
    row = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    axes = tuple(row + [2 * n + r for r in row])
    shape = tuple(d for pair in local_dims for d in pair) * 2
    return axes, shape


def regroup_to_bipartition(x, local_dims: Sequence[tuple[int, int]], inverse: bool = False) -> np.ndarray:
    """Reorder tensor factors from ``(A1 B1)(A2 B2)...`` to ``(A1 A2 ...)(B1 B2 ...)``.

    Parameters
    ----------
    x : array_like
        Operator on ``prod(dA_i * dB_i)`` dimensions in factor order.
    local_dims : sequence of (int, int)
        The ``(dA_i, dB_i)`` pair of each factor.
    inverse : bool
        Undo the regrouping instead, taking ``(A...)(B...)`` back to factor
        order.

    Returns
    -------
    ndarray
        The permutation-conjugated matrix. After regrouping, the bipartition
        is ``(prod dA_i, prod dB_i)``.
    """
    x = as_matrix(x)
    key = tuple((int(a), int(b)) for a, b in local_dims)
    if math.prod(a * b for a, b in key) != x.shape[0]:
        raise BipartitionError(f"local dimensions {key} do not multiply to {x.shape[0]}")
    axes, shape = _regroup_axes(key)
    if inverse:
        target = tuple([a for a, _ in key] + [b for _, b in key]) * 2
        return np.ascontiguousarray(x.reshape(target).transpose(np.argsort(axes))).reshape(x.shape)
    return np.ascontiguousarray(x.reshape(shape).transpose(axes)).reshape(x.shape)


def family_denominator(d: int) -> int:
    """Trace of the unnormalized family operator, ``3d^2/4 + d/2 - 2``."""
    return 3 * d * d // 4 + d // 2 - 2


@dataclass(frozen=True, eq=False)
class FamilyState:
    """Member of the PPT family on ``d x d`` with its externally claimed bounds."""

    d: int
    state: DensityOperator
    claimed_schmidt_lower: SchmidtBound
    claimed_pt_schmidt_upper: SchmidtBound
    residuals: dict = field(default_factory=dict, repr=False)

    @property
    def denominator(self) -> int:
        return family_denominator(self.d)

    @property
    def pt_state(self) -> DensityOperator:
        return self.state.partial_transpose()


def build_family_state(d: int) -> FamilyState:
    """Construct the normalized PPT family state for even ``d`` in ``4..64``.

    The 4-dimensional factor acts on ``A1 B1`` (qubits) and the
    ``d^2/4``-dimensional one on ``A2 B2``; the result is regrouped to the
    cut ``A1 A2 | B1 B2`` with local dimension ``d`` on each side. Both the
    state and its partial transpose are validated as density operators.
    """
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool):
        raise DomainError(f"d must be an integer, got {d!r}")
    d = int(d)
    if d % 2 or not 4 <= d <= 64:
        raise DomainError(f"d must be even with 4 <= d <= 64, got {d}")
    half = d // 2
    check_dim(d * d)

    w2 = max_entangled_projector(2)
    wh = max_entangled_projector(half)
    numerator = tensor(np.eye(4) - w2, np.eye(half * half) - wh) + (half + 1) * tensor(w2, wh)
    mat = regroup_to_bipartition(numerator / family_denominator(d), [(2, 2), (half, half)])

    part = Bipartition(d, d)
    residuals = validate_state(mat)
    pt = partial_transpose(mat, part)
    pt_res = validate_state(pt, label="partial-transpose-")
    residuals["min_eig_pt"] = pt_res["min_eig"]
    return FamilyState(
        d=d,
        state=DensityOperator(mat, part, check=False),
        claimed_schmidt_lower=SchmidtBound(math.ceil(d / 4), EXTERNAL_CLAIM),
        claimed_pt_schmidt_upper=SchmidtBound(4, EXTERNAL_CLAIM),
        residuals=residuals,
    )


def fidelity_witness_lower_bound(rho: DensityOperator, slack: float = 1e-9) -> int:
    """Schmidt-number lower bound from the maximally entangled fidelity.

    A state of Schmidt number ``k`` has ``Tr(omega_d rho) <= k/d``, so
    ``ceil(d * F)`` bounds the Schmidt number from below. ``slack`` is
    subtracted before rounding up so that ``d * F`` landing a few ulps above
    an integer does not inflate the bound.
    """
    if rho.part.dA != rho.part.dB:
        raise DomainError(f"witness needs equal local dimensions, got {rho.part.dA}x{rho.part.dB}")
    d = rho.part.dA
    psi = max_entangled_vector(d)
    fidelity = float(np.real(psi.conj() @ rho.mat @ psi))
    return int(min(d, max(1, math.ceil(d * fidelity - slack))))


def schmidt_rank_pure(psi, part: Bipartition, tol: float = 1e-10) -> int:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > ATOL:
        raise DomainError(f"state vector is not normalized (norm {norm:.12g})")
    return int(np.count_nonzero(schmidt_coefficients(psi, part) > tol))
