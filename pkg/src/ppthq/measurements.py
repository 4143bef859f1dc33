"""
POVMs, single-Kraus-per-outcome instruments and their transpose/conjugate duals.

Sequential chains compose instruments step by step; the effective POVM of a
chain is indexed by outcome tuples ``(b1, ..., bm)`` in lexicographic order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DomainError, HQError
from .linalg import ATOL, as_matrix, hermiticity_residual, matrix_from_dict, matrix_to_dict

__all__ = [
    "MAX_TUPLE_OUTCOMES",
    "Povm",
    "KrausInstrument",
    "MeasurementAssignment",
    "haar_unitary",
    "random_povm",
    "random_instrument",
    "random_assignment",
    "transpose_povm",
    "conjugate_instrument",
    "effective_sequential_povm",
]

MAX_TUPLE_OUTCOMES = 4096


def _frozen(mats: Iterable) -> tuple[np.ndarray, ...]:
    out = []
    for m in mats:
        arr = as_matrix(m).copy()
        arr.setflags(write=False)
        out.append(arr)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Povm:
    """Positive effects on ``dim`` dimensions that sum to the identity."""

    effects: tuple[np.ndarray, ...]

    def __post_init__(self):
        effects = _frozen(self.effects)
        if not effects:
            raise DomainError("a POVM needs at least one effect")
        dims = {e.shape[0] for e in effects}
        if len(dims) != 1:
            raise DomainError(f"effects have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "effects", effects)
        for a, e in enumerate(effects):
            herm = hermiticity_residual(e)
            if herm > ATOL:
                raise HQError(f"effect {a} is not Hermitian (residual {herm:.3e})")
            low = float(np.linalg.eigvalsh(0.5 * (e + e.conj().T))[0])
            if low < -ATOL:
                raise HQError(f"effect {a} is not positive (min eigenvalue {low:.3e})")
        resid = self.completeness_residual()
        if resid > ATOL:
            raise HQError(f"effects do not sum to identity (residual {resid:.3e})")

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @property
    def num_outcomes(self) -> int:
        return len(self.effects)

    def completeness_residual(self) -> float:
        total = np.sum(self.effects, axis=0)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def as_array(self) -> np.ndarray:
        return np.stack(self.effects)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "effects": [matrix_to_dict(e) for e in self.effects]}

    @classmethod
    def from_dict(cls, data: dict) -> Povm:
        effects = [matrix_from_dict(e) for e in data["effects"]]
        povm = cls(effects)
        if povm.dim != int(data["dim"]):
            raise DomainError(f"declared dim {data['dim']} but effects have dim {povm.dim}")
        return povm


@dataclass(frozen=True, eq=False)
class KrausInstrument:
    """One Kraus operator per outcome, with ``sum F^dagger F = 1``."""

    branches: tuple[np.ndarray, ...]

    def __post_init__(self):
        branches = _frozen(self.branches)
        if not branches:
            raise DomainError("an instrument needs at least one Kraus operator")
        dims = {f.shape[0] for f in branches}
        if len(dims) != 1:
            raise DomainError(f"Kraus operators have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "branches", branches)
        resid = self.completeness_residual()
        if resid > ATOL:
            raise HQError(f"Kraus operators are not complete (residual {resid:.3e})")

    @property
    def dim(self) -> int:
        return self.branches[0].shape[0]

    @property
    def num_outcomes(self) -> int:
        return len(self.branches)

    def completeness_residual(self) -> float:
        total = sum(f.conj().T @ f for f in self.branches)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def induced_povm(self) -> Povm:
        return Povm([f.conj().T @ f for f in self.branches])


@dataclass(frozen=True, eq=False)
class MeasurementAssignment:
    """One POVM per setting, all on the same space."""

    settings: tuple[Povm, ...]

    def __post_init__(self):
        settings = tuple(self.settings)
        if not settings:
            raise DomainError("a measurement assignment needs at least one setting")
        dims = {p.dim for p in settings}
        if len(dims) != 1:
            raise DomainError(f"settings act on mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "settings", settings)

    @property
    def dim(self) -> int:
        return self.settings[0].dim

    @property
    def num_settings(self) -> int:
        return len(self.settings)

    @property
    def max_outcomes(self) -> int:
        return max(p.num_outcomes for p in self.settings)

    def effects_array(self) -> np.ndarray:
        """Effects as ``(settings, max_outcomes, dim, dim)``, zero-padded."""
        out = np.zeros((self.num_settings, self.max_outcomes, self.dim, self.dim), dtype=np.complex128)
        for x, povm in enumerate(self.settings):
            out[x, : povm.num_outcomes] = povm.as_array()
        return out

    def transposed(self) -> MeasurementAssignment:
        return MeasurementAssignment(tuple(transpose_povm(p) for p in self.settings))


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ``n x n`` unitary from the QR decomposition of a Ginibre matrix.

    The columns of ``Q`` are rephased by the phases of ``diag(R)`` so that the
    distribution is exactly Haar rather than biased by the QR sign convention.
    """
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    phases = diag / np.abs(diag)
    return q * phases


def _isometry_blocks(dim: int, outcomes: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    v = haar_unitary(dim * outcomes, rng)[:, :dim]
    return [v[a * dim : (a + 1) * dim, :] for a in range(outcomes)]


def random_povm(dim: int, outcomes: int, seed: int) -> Povm:
    """Random POVM with effects ``V_a^dagger V_a`` from the blocks of a Haar isometry."""
    if dim < 2:
        raise DomainError(f"dim must be at least 2, got {dim}")
    if outcomes < 2:
        raise DomainError(f"a POVM needs at least 2 outcomes, got {outcomes}")
    blocks = _isometry_blocks(dim, outcomes, seed)
    effects = []
    for v in blocks:
        e = v.conj().T @ v
        effects.append(0.5 * (e + e.conj().T))
    return Povm(effects)


def random_instrument(dim: int, outcomes: int, seed: int) -> KrausInstrument:
    """Random instrument whose Kraus operators are the blocks of a Haar isometry.

    ``outcomes=1`` yields a single unitary branch.
    """
    if dim < 1:
        raise DomainError(f"dim must be positive, got {dim}")
    if outcomes < 1:
        raise DomainError(f"outcomes must be positive, got {outcomes}")
    return KrausInstrument(_isometry_blocks(dim, outcomes, seed))


def random_assignment(dim: int, settings: int, outcomes: int, seed: int) -> MeasurementAssignment:
    """``settings`` independent random POVMs; sub-seeds are derived from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(settings, dtype=np.uint64)
    return MeasurementAssignment(tuple(random_povm(dim, outcomes, int(s)) for s in seeds))


def transpose_povm(m: Povm) -> Povm:
    return Povm([e.T for e in m.effects])


def conjugate_instrument(k: KrausInstrument) -> KrausInstrument:
    return KrausInstrument([f.conj() for f in k.branches])


def effective_sequential_povm(chain: Sequence[tuple[Sequence[KrausInstrument], int]]) -> Povm:
    """POVM of a sequence of instruments applied one after another.

    Parameters
    ----------
    chain : sequence of (instruments, setting)
        For each step, the instruments available at that step (one per
        setting) and the setting chosen for this run.

    Returns
    -------
    Povm
        Effect for the outcome tuple ``(b1, ..., bm)`` is
        ``F1^dagger ... Fm^dagger Fm ... F1`` where ``Fk`` is the Kraus
        operator of step ``k`` for outcome ``bk``. Tuples are ordered
        lexicographically.
    """
    steps = [instruments[setting] for instruments, setting in chain]
    if not steps:
        raise DomainError("a sequential chain needs at least one step")
    dims = {k.dim for k in steps}
    if len(dims) != 1:
        raise DomainError(f"chain steps act on mixed dimensions {sorted(dims)}")
    total = int(np.prod([k.num_outcomes for k in steps]))
    if total > MAX_TUPLE_OUTCOMES:
        raise CapacityError(total, MAX_TUPLE_OUTCOMES)

    effects = []
    for outcome in itertools.product(*(range(k.num_outcomes) for k in steps)):
        # accumulate G = Fm ... F1, effect = G^dagger G
        g = np.eye(steps[0].dim, dtype=np.complex128)
        for k, b in zip(steps, outcome):
            g = k.branches[b] @ g
        effects.append(g.conj().T @ g)
    return Povm(effects)
