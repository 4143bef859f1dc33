import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_density
from ppthq.errors import CapacityError, DomainError, NumericError
from ppthq.hqmodel import (
    BehaviorTable,
    HqModel,
    behavior_distance,
    hq_transform,
    model_from_family,
    multicopy_state,
    sequential_assignment,
    sequential_hq_transform,
    simulate_behavior,
    simulate_sequential,
    tensor_power_state,
)
from ppthq.linalg import Bipartition, hs_inner, matrices_close, partial_transpose, tensor
from ppthq.measurements import (
    KrausInstrument,
    MeasurementAssignment,
    Povm,
    random_assignment,
    random_instrument,
)
from ppthq.states import (
    EXTERNAL_CLAIM,
    TRIVIAL,
    DensityOperator,
    SchmidtBound,
    build_family_state,
    max_entangled_projector,
    maximally_mixed,
)

seeds = st.integers(0, 2**32 - 1)


def behavior_oracle(rho, alice, bob):
    """p(a,b|x,y) by materializing every M_a|x (x) M_b|y."""
    out = np.zeros((alice.num_settings, bob.num_settings, alice.max_outcomes, bob.max_outcomes))
    for x, pa in enumerate(alice.settings):
        for y, pb in enumerate(bob.settings):
            for a, ea in enumerate(pa.effects):
                for b, eb in enumerate(pb.effects):
                    out[x, y, a, b] = hs_inner(tensor(ea, eb), rho.mat).real
    return out


def sequential_oracle(rho, alice, chain):
    """Apply Bob's Kraus operators to the state one step at a time, then let
    Alice measure what is left."""
    da, db = rho.part.dA, rho.part.dB
    y_tuples = list(itertools.product(*(range(len(step)) for step in chain)))
    b_tuples = list(itertools.product(*(range(step[0].num_outcomes) for step in chain)))
    out = np.zeros((alice.num_settings, len(y_tuples), alice.max_outcomes, len(b_tuples)))
    for yi, ys in enumerate(y_tuples):
        for bi, bs in enumerate(b_tuples):
            post = rho.mat
            for step, y, b in zip(chain, ys, bs):
                lift = np.kron(np.eye(da), step[y].branches[b])
                post = lift @ post @ lift.conj().T
            for x, pa in enumerate(alice.settings):
                for a, ea in enumerate(pa.effects):
                    out[x, yi, a, bi] = np.trace(np.kron(ea, np.eye(db)) @ post).real
    return out


def z_basis(dim):
    return Povm([np.diag(np.eye(dim)[i]) for i in range(dim)])


def random_chain(dim, steps, settings_per_step, outcomes, seed):
    rng = np.random.default_rng(seed)
    return tuple(
        tuple(random_instrument(dim, outcomes, int(rng.integers(2**32))) for _ in range(settings_per_step))
        for _ in range(steps)
    )


# --- BehaviorTable ----------------------------------------------------------

def test_behavior_table_rejects_unnormalized():
    with pytest.raises(NumericError, match="normalized"):
        BehaviorTable(np.full((1, 1, 2, 2), 0.3))


def test_behavior_table_rejects_signalling():
    p = np.zeros((1, 2, 2, 2))
    p[0, 0, 0, 0] = 1  # Alice outputs 0 when y=0 ...
    p[0, 1, 1, 0] = 1  # ... and 1 when y=1
    with pytest.raises(NumericError, match="signalling"):
        BehaviorTable(p)


def test_behavior_table_rejects_out_of_range():
    p = np.zeros((1, 1, 2, 2))
    p[0, 0, 0, 0] = 1.5
    p[0, 0, 1, 1] = -0.5
    with pytest.raises(NumericError):
        BehaviorTable(p)


# --- simulate_behavior ------------------------------------------------------

def test_maximally_mixed_gives_product_behavior():
    rho = maximally_mixed(Bipartition(3, 4))
    alice = random_assignment(3, 2, 3, seed=1)
    bob = random_assignment(4, 3, 2, seed=2)
    p = simulate_behavior(rho, alice, bob).probs
    for x, pa in enumerate(alice.settings):
        for y, pb in enumerate(bob.settings):
            for a, ea in enumerate(pa.effects):
                for b, eb in enumerate(pb.effects):
                    assert abs(p[x, y, a, b] - np.trace(ea).real * np.trace(eb).real / 12) <= 1e-12


def test_bell_pair_in_computational_basis():
    rho = DensityOperator(max_entangled_projector(2), Bipartition(2, 2))
    z = MeasurementAssignment((z_basis(2),))
    p = simulate_behavior(rho, z, z).probs[0, 0]
    assert np.allclose(p, [[0.5, 0], [0, 0.5]], atol=1e-15)


def test_simulate_behavior_matches_oracle(rng):
    rho = DensityOperator(random_density(rng, 12), Bipartition(3, 4))
    alice = random_assignment(3, 3, 4, seed=5)
    bob = random_assignment(4, 2, 3, seed=6)
    assert matrices_close(simulate_behavior(rho, alice, bob).probs, behavior_oracle(rho, alice, bob), 1e-13)


def test_family_behavior_normalization():
    fs = build_family_state(4)
    for seed in range(10):
        p = simulate_behavior(fs.state, random_assignment(4, 2, 4, seed), random_assignment(4, 2, 4, seed + 100))
        assert np.max(np.abs(p.probs.sum(axis=(2, 3)) - 1)) <= 1e-10
        assert p.residuals["signalling"] <= 1e-10


def test_mixed_outcome_counts_are_padded():
    fs = build_family_state(4)
    alice = MeasurementAssignment((random_assignment(4, 1, 2, 0).settings[0], z_basis(4)))
    p = simulate_behavior(fs.state, alice, MeasurementAssignment((z_basis(4),)))
    assert p.dims == (2, 1, 4, 4)
    assert np.all(p.probs[0, :, 2:, :] == 0)


def test_simulate_behavior_dim_mismatch():
    rho = maximally_mixed(Bipartition(2, 3))
    with pytest.raises(DomainError):
        simulate_behavior(rho, random_assignment(3, 1, 2, 0), random_assignment(2, 1, 2, 0))


# --- hq_transform -----------------------------------------------------------

def test_transform_of_maximally_mixed_keeps_state():
    rho = maximally_mixed(Bipartition(3, 3))
    model = HqModel(rho, random_assignment(3, 2, 2, 1), random_assignment(3, 2, 2, 2))
    assert np.array_equal(hq_transform(model).state.mat, rho.mat)


def test_transform_of_family_is_valid_quantum_model():
    fs = build_family_state(8)
    model = model_from_family(fs, random_assignment(8, 3, 4, 7), random_assignment(8, 2, 3, 8))
    out = hq_transform(model)
    mat = out.state.mat
    assert abs(np.trace(mat) - 1) <= 1e-10
    assert np.linalg.eigvalsh(mat)[0] >= -1e-10
    for povm in out.bob.settings:
        assert povm.completeness_residual() <= 1e-10
        assert all(np.linalg.eigvalsh(e)[0] >= -1e-10 for e in povm.effects)
    assert out.schmidt_bound == SchmidtBound(4, EXTERNAL_CLAIM)
    assert out.dual_bound == SchmidtBound(8, TRIVIAL)


def test_transform_is_involution():
    fs = build_family_state(6)
    model = model_from_family(fs, random_assignment(6, 2, 3, 1), random_assignment(6, 2, 3, 2))
    back = hq_transform(hq_transform(model))
    assert matrices_close(back.state.mat, model.state.mat, 1e-12)
    for p, q in zip(back.bob.settings, model.bob.settings):
        assert matrices_close(p.as_array(), q.as_array(), 1e-12)
    assert back.schmidt_bound == model.schmidt_bound


def test_transform_rejects_npt_state():
    rho = DensityOperator(max_entangled_projector(3), Bipartition(3, 3))
    model = HqModel(rho, random_assignment(3, 1, 2, 0), random_assignment(3, 1, 2, 1))
    with pytest.raises(DomainError, match="-3.333e-01"):
        hq_transform(model)


def test_model_dimension_check():
    with pytest.raises(DomainError):
        HqModel(maximally_mixed(Bipartition(2, 3)), random_assignment(3, 1, 2, 0), random_assignment(3, 1, 2, 0))


@settings(max_examples=20, deadline=None)
@given(seed=seeds, d=st.sampled_from([4, 6, 8]))
def test_hidden_model_reproduces_behavior(seed, d):
    rng = np.random.default_rng(seed)
    fs = build_family_state(d)
    alice = random_assignment(d, int(rng.integers(1, 5)), int(rng.integers(2, 5)), int(rng.integers(2**32)))
    bob = random_assignment(d, int(rng.integers(1, 5)), int(rng.integers(2, 5)), int(rng.integers(2**32)))
    model = model_from_family(fs, alice, bob)
    assert behavior_distance(model.behavior(), hq_transform(model).behavior()) <= 1e-10


def test_hidden_model_through_brute_force_route():
    fs = build_family_state(4)
    for seed in range(5):
        model = model_from_family(fs, random_assignment(4, 2, 3, seed), random_assignment(4, 3, 2, seed + 7))
        dual = hq_transform(model)
        p = behavior_oracle(model.state, model.alice, model.bob)
        q = behavior_oracle(dual.state, dual.alice, dual.bob)
        assert np.max(0.5 * np.abs(p - q).sum(axis=(2, 3))) <= 1e-10


def test_equivalence_is_not_vacuous():
    # neither half of the transform alone preserves the behavior
    fs = build_family_state(4)
    alice = random_assignment(4, 2, 3, 11)
    bob = random_assignment(4, 2, 3, 12)
    p = simulate_behavior(fs.state, alice, bob)
    only_state = simulate_behavior(fs.pt_state, alice, bob)
    only_effects = simulate_behavior(fs.state, alice, bob.transposed())
    assert behavior_distance(p, only_state) > 1e-3
    assert behavior_distance(p, only_effects) > 1e-3


# --- behavior_distance ------------------------------------------------------

def test_distance_identical_is_zero():
    fs = build_family_state(4)
    p = simulate_behavior(fs.state, random_assignment(4, 2, 2, 0), random_assignment(4, 2, 2, 1))
    assert behavior_distance(p, p) == 0.0


def test_distance_deterministic_vs_antideterministic():
    p = np.zeros((1, 1, 2, 2))
    q = np.zeros((1, 1, 2, 2))
    p[0, 0, 0, 0] = 1
    q[0, 0, 1, 1] = 1
    assert behavior_distance(BehaviorTable(p), BehaviorTable(q)) == 1.0


def test_distance_shape_mismatch():
    with pytest.raises(ValueError):
        behavior_distance(BehaviorTable(np.full((1, 1, 2, 2), 0.25)), BehaviorTable(np.full((1, 1, 1, 4), 0.25)))


# --- sequential -------------------------------------------------------------

def test_single_step_reduces_to_simulate_behavior():
    fs = build_family_state(4)
    alice = random_assignment(4, 2, 3, 1)
    chain = random_chain(4, 1, 3, 2, seed=2)
    seq = simulate_sequential(fs.state, alice, chain)
    direct = simulate_behavior(fs.state, alice, MeasurementAssignment(tuple(k.induced_povm() for k in chain[0])))
    assert matrices_close(seq.probs, direct.probs, 1e-14)


def test_identity_chain_reproduces_alice_marginals():
    fs = build_family_state(6)
    alice = random_assignment(6, 3, 3, 4)
    ident = ((KrausInstrument([np.eye(6)]),),) * 2
    seq = simulate_sequential(fs.state, alice, ident)
    local = np.array([[np.trace(e @ np.eye(6) / 6).real for e in p.effects] for p in alice.settings])
    # Alice's reduced state of the family is maximally mixed
    assert matrices_close(seq.probs.sum(axis=3)[:, 0, :], local, 1e-12)


def test_sequential_matches_step_by_step_oracle():
    fs = build_family_state(4)
    alice = random_assignment(4, 2, 2, 3)
    chain = random_chain(4, 3, 2, 2, seed=9)
    seq = simulate_sequential(fs.state, alice, chain)
    assert seq.y_shape == (2, 2, 2) and seq.b_shape == (2, 2, 2)
    assert matrices_close(seq.probs, sequential_oracle(fs.state, alice, chain), 1e-13)


def test_sequential_hidden_model_family_d4():
    fs = build_family_state(4)
    for seed in range(5):
        alice = random_assignment(4, 2, 3, seed)
        chain = random_chain(4, 3, 2, 2, seed=seed + 50)
        p = simulate_sequential(fs.state, alice, chain)
        q = simulate_sequential(fs.pt_state, alice, sequential_hq_transform(chain))
        assert behavior_distance(p, q) <= 1e-10
        assert p.residuals["normalization"] <= 1e-9


def test_sequential_transform_real_chain_unchanged():
    chain = ((KrausInstrument([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]),),)
    out = sequential_hq_transform(chain)
    assert np.array_equal(out[0][0].branches[1], chain[0][0].branches[1])


def test_sequential_transform_involution():
    chain = random_chain(3, 2, 2, 3, seed=1)
    back = sequential_hq_transform(sequential_hq_transform(chain))
    for s1, s2 in zip(chain, back):
        for k1, k2 in zip(s1, s2):
            assert all(np.array_equal(a, b) for a, b in zip(k1.branches, k2.branches))


@settings(max_examples=15, deadline=None)
@given(seed=seeds, steps=st.integers(1, 3))
def test_sequential_hidden_model_family_d6(seed, steps):
    fs = build_family_state(6)
    alice = random_assignment(6, 2, 2, seed)
    chain = random_chain(6, steps, 2, 2, seed=seed ^ 0xABCDEF)
    p = simulate_sequential(fs.state, alice, chain)
    q = simulate_sequential(fs.pt_state, alice, sequential_hq_transform(chain))
    assert behavior_distance(p, q) <= 1e-10


def test_both_parties_sequential():
    fs = build_family_state(4)
    alice = sequential_assignment(random_chain(4, 2, 2, 2, seed=70))
    chain = random_chain(4, 2, 2, 2, seed=71)
    p = simulate_sequential(fs.state, alice, chain)
    q = simulate_sequential(fs.pt_state, alice, sequential_hq_transform(chain))
    assert p.dims == (4, 4, 4, 4)
    assert behavior_distance(p, q) <= 1e-10


def test_sequential_chain_length_cap():
    fs = build_family_state(4)
    chain = random_chain(4, 5, 1, 2, seed=0)
    with pytest.raises(CapacityError):
        simulate_sequential(fs.state, random_assignment(4, 1, 2, 0), chain)


def test_sequential_dim_mismatch():
    fs = build_family_state(4)
    with pytest.raises(DomainError):
        simulate_sequential(fs.state, random_assignment(4, 1, 2, 0), random_chain(3, 1, 1, 2, seed=0))


# --- multi-copy -------------------------------------------------------------

def test_single_copy_is_original_state():
    fs = build_family_state(4)
    mc = multicopy_state(fs, 1)
    assert np.array_equal(mc.state.mat, fs.state.mat)
    assert mc.pt_schmidt_bound == SchmidtBound(4, EXTERNAL_CLAIM)


def test_two_copies_partial_transpose_factorizes():
    fs = build_family_state(4)
    mc = multicopy_state(fs, 2)
    assert mc.state.part == Bipartition(16, 16)
    assert mc.pt_schmidt_bound == SchmidtBound(16, EXTERNAL_CLAIM)
    lhs = partial_transpose(mc.state.mat, mc.state.part)
    rhs = tensor_power_state(fs.pt_state, 2).mat
    assert matrices_close(lhs, rhs, 1e-12)


def test_two_copies_global_measurements():
    fs = build_family_state(4)
    mc = multicopy_state(fs, 2)
    for seed in range(5):
        model = mc.model(random_assignment(16, 2, 4, seed), random_assignment(16, 2, 4, seed + 1000))
        assert behavior_distance(model.behavior(), hq_transform(model).behavior()) <= 1e-10


def test_multicopy_of_product_states_is_product(rng):
    # regrouped copies of a product state stay a product across the global cut
    a = random_density(rng, 2)
    b = random_density(rng, 3)
    rho = DensityOperator(np.kron(a, b), Bipartition(2, 3))
    two = tensor_power_state(rho, 2)
    assert matrices_close(two.mat, np.kron(np.kron(a, a), np.kron(b, b)), 1e-14)


def test_multicopy_capacity():
    with pytest.raises(CapacityError):
        multicopy_state(build_family_state(4), 4)
    with pytest.raises(DomainError):
        multicopy_state(build_family_state(4), 0)
