"""
Randomized verification campaigns and their report records.

Every campaign derives one seed per trial from the master seed with
``numpy.random.SeedSequence(master, spawn_key=(campaign, d, trial))``, so a
single trial can be replayed without running the ones before it. Residuals
are aggregated over trials by taking the maximum.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .hqmodel import (
    behavior_distance,
    hq_transform,
    model_from_family,
    multicopy_state,
    sequential_hq_transform,
    simulate_sequential,
    tensor_power_state,
)
from .linalg import Bipartition, hs_inner, max_abs_diff, partial_transpose
from .measurements import (
    conjugate_instrument,
    effective_sequential_povm,
    random_assignment,
    random_instrument,
    transpose_povm,
)
from .states import build_family_state, fidelity_witness_lower_bound

__all__ = [
    "BEHAVIOR_TOL",
    "TENSOR_TOL",
    "FAMILY_FIELDS",
    "VERIFY_FIELDS",
    "derive_seed",
    "balanced_bipartition",
    "family_report",
    "verify_duality",
    "verify_behavior",
    "verify_sequential",
    "verify_multicopy",
    "full_suite",
]

BEHAVIOR_TOL = 1e-10
TENSOR_TOL = 1e-12

FAMILY_FIELDS = (
    "scenario_id",
    "d",
    "denominator",
    "hermiticity_residual",
    "trace_residual",
    "min_eig",
    "min_eig_pt",
    "witness_lower_bound",
    "claimed_schmidt_lower",
    "claimed_pt_schmidt_upper",
    "claims_provenance",
    "pass",
)

VERIFY_FIELDS = (
    "scenario_id",
    "d",
    "n_copies",
    "chain_length",
    "settings",
    "outcomes",
    "seed",
    "trials",
    "tv_distance",
    "identity_residual",
    "max_residual",
    "pass",
)

_CAMPAIGN_KEYS = {"duality": 1, "behavior": 2, "sequential": 3, "multicopy": 4}


def derive_seed(master: int, *key: int) -> int:
    """64-bit seed for the stream identified by ``key`` under ``master``."""
    seq = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def balanced_bipartition(dim: int) -> Bipartition:
    """Split ``dim`` as ``dA * dB`` with ``dA`` the largest divisor not above ``sqrt(dim)``."""
    da = max(a for a in range(1, math.isqrt(dim) + 1) if dim % a == 0)
    return Bipartition(da, dim // da)


def family_report(d: int) -> dict:
    fs = build_family_state(d)
    res = fs.residuals
    ok = (
        res["hermiticity"] <= 1e-10
        and res["trace"] <= 1e-12
        and res["min_eig"] >= -1e-10
        and res["min_eig_pt"] >= -1e-10
    )
    return {
        "scenario_id": f"family-d{d}",
        "d": d,
        "denominator": fs.denominator,
        "hermiticity_residual": res["hermiticity"],
        "trace_residual": res["trace"],
        "min_eig": res["min_eig"],
        "min_eig_pt": res["min_eig_pt"],
        "witness_lower_bound": fidelity_witness_lower_bound(fs.state),
        "claimed_schmidt_lower": fs.claimed_schmidt_lower.value,
        "claimed_pt_schmidt_upper": fs.claimed_pt_schmidt_upper.value,
        "claims_provenance": fs.claimed_schmidt_lower.provenance,
        "pass": bool(ok),
    }


def _verify_record(scenario_id, *, d, seed, trials, n_copies=1, chain_length=0, settings=None,
                   outcomes=None, tv=None, identity=None, residual=0.0, identity_tol=BEHAVIOR_TOL):
    ok = residual <= BEHAVIOR_TOL
    if tv is not None:
        ok = ok and tv <= BEHAVIOR_TOL
    if identity is not None:
        ok = ok and identity <= identity_tol
    return {
        "scenario_id": scenario_id,
        "d": d,
        "n_copies": n_copies,
        "chain_length": chain_length,
        "settings": settings,
        "outcomes": outcomes,
        "seed": seed,
        "trials": trials,
        "tv_distance": tv,
        "identity_residual": identity,
        "max_residual": residual,
        "pass": bool(ok),
    }


def _gaussian_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def duality_residual(x, y, part: Bipartition) -> float:
    """``|Tr(x y^T_B) - Tr(x^T_B y)|``."""
    return abs(hs_inner(x, partial_transpose(y, part)) - hs_inner(partial_transpose(x, part), y))


def verify_duality(dim: int, trials: int, seed: int) -> dict:
    part = balanced_bipartition(dim)
    worst = 0.0
    for t in range(trials):
        rng = np.random.default_rng(derive_seed(seed, _CAMPAIGN_KEYS["duality"], dim, t))
        x = _gaussian_matrix(rng, dim)
        y = _gaussian_matrix(rng, dim)
        worst = max(worst, duality_residual(x, y, part))
    return _verify_record(f"duality-dim{dim}", d=dim, seed=seed, trials=trials, residual=worst)


def _table_residual(p, q) -> float:
    return max(
        max_abs_diff(p.probs, q.probs),
        p.residuals["normalization"], p.residuals["signalling"],
        q.residuals["normalization"], q.residuals["signalling"],
    )


def _random_sides(rng, dim, settings, outcomes, seed_key):
    sides = []
    for side in range(2):
        n_set = int(rng.integers(1, settings + 1))
        n_out = int(rng.integers(2, outcomes + 1))
        sides.append(random_assignment(dim, n_set, n_out, derive_seed(seed_key, side)))
    return sides


def verify_behavior(d: int, trials: int, seed: int, settings: int = 4, outcomes: int = 4) -> dict:
    """Single-copy equivalence between a family state and its transformed model.

    Each trial draws the number of settings per side in ``1..settings`` and
    outcomes per side in ``2..outcomes``.
    """
    fs = build_family_state(d)
    tv = 0.0
    worst = 0.0
    for t in range(trials):
        trial_seed = derive_seed(seed, _CAMPAIGN_KEYS["behavior"], d, t)
        rng = np.random.default_rng(trial_seed)
        alice, bob = _random_sides(rng, d, settings, outcomes, trial_seed)
        model = model_from_family(fs, alice, bob)
        p = model.behavior()
        q = hq_transform(model).behavior()
        tv = max(tv, behavior_distance(p, q))
        worst = max(worst, _table_residual(p, q))
    return _verify_record(
        f"behavior-d{d}", d=d, seed=seed, trials=trials, settings=settings,
        outcomes=outcomes, tv=tv, residual=worst,
    )


def random_chain(rng, dim: int, chain_len: int, settings: int, outcomes: int, seed_key: int):
    """Chain of ``chain_len`` steps, each with ``1..settings`` instruments sharing
    one outcome count drawn from ``2..outcomes``."""
    chain = []
    for k in range(chain_len):
        n_set = int(rng.integers(1, settings + 1))
        n_out = int(rng.integers(2, outcomes + 1))
        chain.append(tuple(
            random_instrument(dim, n_out, derive_seed(seed_key, 100 + k, s)) for s in range(n_set)
        ))
    return tuple(chain)


def chain_identity_residual(chain) -> float:
    """Max entrywise gap between the effective POVM of the conjugated chain and
    the transpose of the original chain's effective POVM, over all setting tuples."""
    worst = 0.0
    conj = tuple(tuple(conjugate_instrument(k) for k in step) for step in chain)
    for ys in itertools.product(*(range(len(step)) for step in chain)):
        orig = transpose_povm(effective_sequential_povm(list(zip(chain, ys))))
        dual = effective_sequential_povm(list(zip(conj, ys)))
        worst = max(worst, max_abs_diff(orig.as_array(), dual.as_array()))
    return worst


def verify_sequential(d: int, trials: int, seed: int, settings: int = 2, outcomes: int = 2,
                      chain_len: int = 3) -> dict:
    fs = build_family_state(d)
    pt_state = fs.pt_state
    tv = 0.0
    identity = 0.0
    worst = 0.0
    for t in range(trials):
        trial_seed = derive_seed(seed, _CAMPAIGN_KEYS["sequential"], d, t)
        rng = np.random.default_rng(trial_seed)
        chain = random_chain(rng, d, chain_len, settings, outcomes, trial_seed)
        n_set = int(rng.integers(1, settings + 1))
        n_out = int(rng.integers(2, outcomes + 1))
        alice = random_assignment(d, n_set, n_out, derive_seed(trial_seed, 0))
        p = simulate_sequential(fs.state, alice, chain)
        q = simulate_sequential(pt_state, alice, sequential_hq_transform(chain))
        tv = max(tv, behavior_distance(p, q))
        identity = max(identity, chain_identity_residual(chain))
        worst = max(worst, _table_residual(p, q))
    return _verify_record(
        f"sequential-d{d}-m{chain_len}", d=d, seed=seed, trials=trials, chain_length=chain_len,
        settings=settings, outcomes=outcomes, tv=tv, identity=identity, residual=worst,
    )


def verify_multicopy(d: int, copies: int, trials: int, seed: int, settings: int = 4,
                     outcomes: int = 4) -> dict:
    """Tensor stability of the partial transpose plus behavior equivalence under
    global POVMs on all copies at once."""
    fs = build_family_state(d)
    mc = multicopy_state(fs, copies)
    state = mc.state
    dual_of_power = partial_transpose(state.mat, state.part)
    power_of_dual = tensor_power_state(fs.pt_state, copies).mat
    identity = max_abs_diff(dual_of_power, power_of_dual)

    local = state.part.dA
    tv = 0.0
    worst = 0.0
    for t in range(trials):
        trial_seed = derive_seed(seed, _CAMPAIGN_KEYS["multicopy"], d * 100 + copies, t)
        rng = np.random.default_rng(trial_seed)
        alice, bob = _random_sides(rng, local, settings, outcomes, trial_seed)
        model = mc.model(alice, bob)
        p = model.behavior()
        q = hq_transform(model).behavior()
        tv = max(tv, behavior_distance(p, q))
        worst = max(worst, _table_residual(p, q))
    return _verify_record(
        f"multicopy-d{d}-n{copies}", d=d, seed=seed, trials=trials, n_copies=copies,
        settings=settings, outcomes=outcomes, tv=tv, identity=identity, residual=worst,
        identity_tol=TENSOR_TOL,
    )


def full_suite(seed: int) -> list[dict]:
    """Every acceptance campaign at its stated size, in a fixed order."""
    reports = [family_report(d) for d in (4, 6, 8, 12)]
    reports.append(verify_duality(9, 1000, seed))
    reports.extend(verify_behavior(d, 200, seed, settings=4, outcomes=4) for d in (4, 6, 8))
    reports.extend(verify_sequential(d, 100, seed, settings=2, outcomes=2, chain_len=3) for d in (4, 6))
    reports.append(verify_multicopy(4, 2, 50, seed, settings=4, outcomes=4))
    return reports
