"""
Behaviors of bipartite measurement scenarios and hidden quantum models.

A behavior is the table ``p(a, b | x, y)`` of outcome probabilities given
settings. For a PPT state, moving the partial transpose from the state onto
Bob's measurements yields a second quantum model (partially transposed
state, transposed effects) with exactly the same behavior. The same trick
covers sequential Kraus chains on Bob's side (conjugate every Kraus
operator) and many copies measured jointly (transpose each copy's B part).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import CapacityError, DomainError, NumericError
from .linalg import ATOL, Bipartition, check_dim, max_dim, min_eigenvalue, partial_transpose
from .measurements import (
    KrausInstrument,
    MeasurementAssignment,
    conjugate_instrument,
    effective_sequential_povm,
)
from .states import (
    TRIVIAL,
    DensityOperator,
    FamilyState,
    SchmidtBound,
    regroup_to_bipartition,
)

__all__ = [
    "MAX_CHAIN_LENGTH",
    "BehaviorTable",
    "HqModel",
    "MultiCopyState",
    "BobChain",
    "simulate_behavior",
    "hq_transform",
    "model_from_family",
    "behavior_distance",
    "sequential_assignment",
    "simulate_sequential",
    "sequential_hq_transform",
    "tensor_power_state",
    "multicopy_state",
]

MAX_CHAIN_LENGTH = 4

#: A sequential chain: for each step, one instrument per setting.
BobChain = Sequence[Sequence[KrausInstrument]]


@dataclass(frozen=True, eq=False)
class BehaviorTable:
    """Joint conditional probabilities ``probs[x, y, a, b] = p(a, b | x, y)``.

    For sequential scenarios the flat setting and outcome indices enumerate
    tuples lexicographically; ``y_shape`` and ``b_shape`` give the per-step
    ranges so indices can be unravelled with ``np.unravel_index``.
    """

    probs: np.ndarray
    norm_tol: float = ATOL
    y_shape: tuple[int, ...] | None = None
    b_shape: tuple[int, ...] | None = None
    residuals: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 4:
            raise ValueError(f"behavior tables are 4-dimensional, got shape {probs.shape}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        res = self._check()
        object.__setattr__(self, "residuals", res)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(self.probs.shape)

    def _check(self) -> dict:
        p = self.probs
        low = float(p.min())
        high = float(p.max())
        if low < -1e-12 or high > 1 + 1e-12:
            raise NumericError(f"probabilities outside [0, 1]: [{low:.3e}, {high:.3e}]")
        norm = float(np.max(np.abs(p.sum(axis=(2, 3)) - 1.0)))
        if norm > self.norm_tol:
            raise NumericError(f"behavior is not normalized (residual {norm:.3e})", residual=norm)
        alice = p.sum(axis=3)  # p(a | x, y)
        bob = p.sum(axis=2)  # p(b | x, y)
        signalling = max(
            float(np.max(np.abs(alice - alice[:, :1]))),
            float(np.max(np.abs(bob - bob[:1]))),
        )
        if signalling > self.norm_tol:
            raise NumericError(f"behavior is signalling (residual {signalling:.3e})", residual=signalling)
        return {"normalization": norm, "signalling": signalling}


@dataclass(frozen=True, eq=False)
class HqModel:
    """A quantum realization of a behavior: state, both parties' measurements
    and the Schmidt-number bound the realization claims.

    ``dual_bound`` is the bound for the partially transposed state, so that
    ``hq_transform`` can swap the two.
    """

    state: DensityOperator
    alice: MeasurementAssignment
    bob: MeasurementAssignment
    schmidt_bound: SchmidtBound | None = None
    dual_bound: SchmidtBound | None = None

    def __post_init__(self):
        part = self.state.part
        if self.alice.dim != part.dA:
            raise DomainError(f"Alice measures dim {self.alice.dim} but the state has dA={part.dA}")
        if self.bob.dim != part.dB:
            raise DomainError(f"Bob measures dim {self.bob.dim} but the state has dB={part.dB}")
        trivial = SchmidtBound(min(part.dA, part.dB), TRIVIAL)
        if self.schmidt_bound is None:
            object.__setattr__(self, "schmidt_bound", trivial)
        if self.dual_bound is None:
            object.__setattr__(self, "dual_bound", trivial)

    def behavior(self) -> BehaviorTable:
        return simulate_behavior(self.state, self.alice, self.bob)


def model_from_family(fs: FamilyState, alice: MeasurementAssignment, bob: MeasurementAssignment) -> HqModel:
    return HqModel(
        fs.state,
        alice,
        bob,
        schmidt_bound=SchmidtBound(fs.d, TRIVIAL),
        dual_bound=fs.claimed_pt_schmidt_upper,
    )


def _behavior_probs(state: DensityOperator, alice: MeasurementAssignment, bob: MeasurementAssignment) -> np.ndarray:
    part = state.part
    if alice.dim != part.dA or bob.dim != part.dB:
        raise DomainError(
            f"measurement dims ({alice.dim}, {bob.dim}) do not match state bipartition ({part.dA}, {part.dB})"
        )
    rho = state.mat.reshape(part.dA, part.dB, part.dA, part.dB)
    ma = alice.effects_array()
    mb = bob.effects_array()
    # Tr((Ma (x) Mb) rho) = sum Ma[j,i] Mb[l,k] rho[(i,k),(j,l)]
    half = np.einsum("xaji,ikjl->xakl", ma, rho, optimize=True)
    probs = np.einsum("yblk,xakl->xyab", mb, half, optimize=True)
    imag = float(np.max(np.abs(probs.imag)))
    if imag > ATOL:
        raise NumericError(f"probabilities have imaginary part {imag:.3e}", residual=imag)
    return probs.real


def simulate_behavior(state: DensityOperator, alice: MeasurementAssignment, bob: MeasurementAssignment) -> BehaviorTable:
    """Behavior ``p(a, b | x, y) = Re Tr((M_a|x (x) M_b|y) rho)``.

    Settings with fewer outcomes than the maximum are padded with
    zero-probability outcomes.
    """
    return BehaviorTable(_behavior_probs(state, alice, bob))


def hq_transform(model: HqModel) -> HqModel:
    """Move the partial transpose from the state onto Bob's effects.

    Raises
    ------
    DomainError
        If the state is not PPT, since the partial transpose would then not
        be a valid state.
    """
    pt = partial_transpose(model.state.mat, model.state.part)
    low = min_eigenvalue(pt)
    if low < -ATOL:
        raise DomainError(f"state is not PPT: partial transpose has min eigenvalue {low:.3e}")
    # Hermiticity and trace are preserved by the partial transpose
    return HqModel(
        DensityOperator(pt, model.state.part, check=False),
        model.alice,
        model.bob.transposed(),
        schmidt_bound=model.dual_bound,
        dual_bound=model.schmidt_bound,
    )


def behavior_distance(p: BehaviorTable, q: BehaviorTable) -> float:
    """Largest total variation distance over setting pairs."""
    if p.dims != q.dims:
        raise ValueError(f"behavior shapes differ: {p.dims} vs {q.dims}")
    return float(np.max(0.5 * np.abs(p.probs - q.probs).sum(axis=(2, 3))))


def _check_chain(bob_chain: BobChain) -> tuple[tuple[KrausInstrument, ...], ...]:
    chain = tuple(tuple(step) for step in bob_chain)
    if not chain:
        raise DomainError("a sequential chain needs at least one step")
    if len(chain) > MAX_CHAIN_LENGTH:
        raise CapacityError(len(chain), MAX_CHAIN_LENGTH)
    for k, step in enumerate(chain):
        if not step:
            raise DomainError(f"step {k} has no instruments")
    dims = {inst.dim for step in chain for inst in step}
    if len(dims) != 1:
        raise DomainError(f"chain instruments act on mixed dimensions {sorted(dims)}")
    settings = math.prod(len(step) for step in chain)
    outcomes = math.prod(max(inst.num_outcomes for inst in step) for step in chain)
    for size in (settings, outcomes):
        if size > 4096:
            raise CapacityError(size, 4096)
    return chain


def sequential_assignment(bob_chain: BobChain) -> MeasurementAssignment:
    """Effective POVM of every setting tuple of a chain, tuples in lexicographic order.

    All instruments of a step must have the same number of outcomes, so that
    outcome tuples mean the same thing for every setting tuple.
    """
    chain = _check_chain(bob_chain)
    for k, step in enumerate(chain):
        if len({inst.num_outcomes for inst in step}) != 1:
            raise DomainError(f"instruments of step {k} have different outcome counts")
    povms = [
        effective_sequential_povm(list(zip(chain, settings)))
        for settings in itertools.product(*(range(len(step)) for step in chain))
    ]
    return MeasurementAssignment(tuple(povms))


def simulate_sequential(state: DensityOperator, alice: MeasurementAssignment, bob_chain: BobChain) -> BehaviorTable:
    """Behavior over Bob's setting and outcome tuples for a sequential chain."""
    chain = _check_chain(bob_chain)
    bob = sequential_assignment(chain)
    return BehaviorTable(
        _behavior_probs(state, alice, bob),
        norm_tol=1e-9,
        y_shape=tuple(len(step) for step in chain),
        b_shape=tuple(step[0].num_outcomes for step in chain),
    )


def sequential_hq_transform(bob_chain: BobChain) -> tuple[tuple[KrausInstrument, ...], ...]:
    """Complex-conjugate every Kraus operator of the chain."""
    return tuple(tuple(conjugate_instrument(inst) for inst in step) for step in bob_chain)


@dataclass(frozen=True, eq=False)
class MultiCopyState:
    """``copies``-fold tensor power regrouped to ``(A1 ... An | B1 ... Bn)``."""

    state: DensityOperator
    copies: int
    pt_schmidt_bound: SchmidtBound

    def model(self, alice: MeasurementAssignment, bob: MeasurementAssignment) -> HqModel:
        local = self.state.part.dA
        return HqModel(
            self.state, alice, bob,
            schmidt_bound=SchmidtBound(local, TRIVIAL),
            dual_bound=self.pt_schmidt_bound,
        )


def tensor_power_state(rho: DensityOperator, n: int) -> DensityOperator:
    """``rho`` tensored with itself ``n`` times, regrouped to the global A|B cut."""
    if n < 1:
        raise DomainError(f"need at least one copy, got {n}")
    total = rho.dim**n
    limit = max_dim()
    if total > limit:
        raise CapacityError(total, limit)
    mat = rho.mat
    for _ in range(n - 1):
        mat = np.kron(mat, rho.mat)
    part = rho.part
    local = [(part.dA, part.dB)] * n
    regrouped = regroup_to_bipartition(mat, local)
    global_part = Bipartition(part.dA**n, part.dB**n)
    check_dim(global_part.dim)
    return DensityOperator(regrouped, global_part, check=False)


def multicopy_state(fs: FamilyState, n: int) -> MultiCopyState:
    """``n`` copies of a family state; the transposed copies carry the
    externally claimed bound of at most 4 per copy."""
    state = tensor_power_state(fs.state, n)
    return MultiCopyState(
        state=state,
        copies=n,
        pt_schmidt_bound=replace(fs.claimed_pt_schmidt_upper, value=fs.claimed_pt_schmidt_upper.value**n),
    )
