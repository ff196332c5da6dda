import math

import numpy as np
import pytest
from scipy.linalg import expm

from qsymm.dynamics import evolve
from qsymm.errors import ConfigError, NormDrift, StepTooLarge
from qsymm.generators import UnitaryNoiseSpec, UnitaryTerm, WeightSchedule, unitary_generator
from qsymm.lifted import (
    check_weights,
    delta_identity,
    evolve_lifted,
    kl_rate,
    kl_to_uniform,
    lifted_rhs,
    rate_matrix,
    reconstruct_state,
    uniform,
)
from qsymm.operators import NetworkLayout, basis_state, random_density
from qsymm import config
from qsymm.permutations import Permutation, all_permutations, generates_full_group, permutation_unitary, symmetrize


def complete_layout(m):
    return NetworkLayout(m, 2, tuple((i, j) for i in range(1, m + 1) for j in range(i + 1, m + 1)))


def random_pairwise_spec(m, rng):
    # random spanning-ish subset of the complete graph with random rates
    lay = complete_layout(m)
    pairs = [(i, j) for i in range(1, m + 1) for j in range(i + 1, m + 1)]
    keep = [p for p in pairs if rng.random() < 0.6] or pairs[:1]
    terms = tuple(
        UnitaryTerm(Permutation.transposition(i, j, m), WeightSchedule.constant(rng.uniform(0.3, 1.5)), pairs.index((i, j)))
        for i, j in keep
    )
    return UnitaryNoiseSpec(lay, terms)


def oracle_rate_matrix(spec):
    # A[σ, π] collects α_k whenever U_k U_π = U_σ, found by comparing dense matrices
    lay = NetworkLayout(spec.layout.m, 2)
    perms = all_permutations(lay.m)
    mats = [permutation_unitary(p, lay).matrix for p in perms]
    size = len(perms)
    a = np.zeros((size, size))
    for term in spec.terms:
        uk = permutation_unitary(term.perm, lay).matrix
        for j, up in enumerate(mats):
            prod = uk @ up
            i = next(i for i, u in enumerate(mats) if np.array_equal(u, prod))
            a[i, j] += term.schedule(0.0)
            a[j, j] -= term.schedule(0.0)
    return a


def test_uniform_is_fixed_point():
    spec = UnitaryNoiseSpec.pairwise(NetworkLayout.path(3))
    assert np.array_equal(lifted_rhs(spec, uniform(3)), np.zeros(6))
    traj = evolve_lifted(spec, uniform(3), 1.0, 0.01)
    assert np.abs(traj.weights - 1 / 6).max() < 1e-15


def test_two_state_analytic():
    spec = UnitaryNoiseSpec.pairwise(NetworkLayout.path(2))
    traj = evolve_lifted(spec, np.array([1.0, 0.0]), 2.0, 0.01, stride=50)
    for t, w in zip(traj.times, traj.weights):
        assert abs(w[0] - 0.5 * (1 + np.exp(-2 * t))) < 1e-9


@pytest.mark.parametrize("m", [2, 3, 4])
def test_rate_matrix_matches_representation_oracle(m):
    rng = np.random.default_rng(m)
    spec = random_pairwise_spec(m, rng)
    assert np.array_equal(rate_matrix(spec), oracle_rate_matrix(spec))
    # also non-transposition terms, where the inverse direction matters
    lay = NetworkLayout(3, 2, ((1, 2, 3),))
    cyc = UnitaryNoiseSpec(lay, (UnitaryTerm(Permutation((2, 3, 1)), WeightSchedule.constant(0.7), 0),))
    assert np.array_equal(rate_matrix(cyc), oracle_rate_matrix(cyc))


def test_m3_endpoint_against_matrix_exponential():
    spec = UnitaryNoiseSpec.pairwise(NetworkLayout.path(3))
    traj = evolve_lifted(spec, delta_identity(3), 10.0, 0.01, stride=100)
    want = expm(oracle_rate_matrix(spec) * 10.0) @ delta_identity(3)
    assert np.abs(traj.weights[-1] - want).max() < 1e-10
    assert np.abs(traj.weights[-1] - 1 / 6).max() < 1e-4


def test_kl_examples():
    assert kl_to_uniform(uniform(3)) == pytest.approx(0, abs=1e-15)
    assert kl_to_uniform(delta_identity(2)) == pytest.approx(math.log(2))
    assert kl_to_uniform(delta_identity(3)) == pytest.approx(math.log(6))
    spec = UnitaryNoiseSpec.pairwise(NetworkLayout.path(3))
    assert kl_rate(spec, uniform(3)) == pytest.approx(0, abs=1e-15)
    assert kl_rate(spec, delta_identity(3)) == -math.inf


def test_kl_rate_matches_finite_difference():
    rng = np.random.default_rng(7)
    for m in (2, 3, 4):
        spec = random_pairwise_spec(m, rng)
        p0 = rng.dirichlet(5 * np.ones(math.factorial(m)))
        dt = 1e-3
        traj = evolve_lifted(spec, p0, 2 * dt, dt)
        fd = (traj.D[2] - traj.D[0]) / (2 * dt)
        rate = kl_rate(spec, traj.weights[1])
        assert rate <= 0
        assert abs(fd - rate) <= 1e-4 * abs(rate)


def test_kl_rate_matches_chain_rule_oracle():
    # dD/dt = Σ_π (A p)_π log p_π with A taken from the representation oracle
    rng = np.random.default_rng(8)
    for spec in (random_pairwise_spec(3, rng), random_pairwise_spec(4, rng)):
        p = rng.dirichlet(np.ones(math.factorial(spec.layout.m)))
        want = float(oracle_rate_matrix(spec) @ p @ np.log(p))
        assert kl_rate(spec, p) == pytest.approx(want, rel=1e-10)
    lay = NetworkLayout(3, 2, ((1, 2, 3),))
    cyc = UnitaryNoiseSpec(lay, (UnitaryTerm(Permutation((2, 3, 1)), WeightSchedule.constant(0.7), 0),))
    p = rng.dirichlet(np.ones(6))
    assert kl_rate(cyc, p) == pytest.approx(float(oracle_rate_matrix(cyc) @ p @ np.log(p)), rel=1e-10)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_lift_reproduces_quantum_evolution(m):
    rng = np.random.default_rng(20 + m)
    for _ in range(2):
        spec = random_pairwise_spec(m, rng)
        rho0 = random_density(2**m, rng)
        T = 2.0
        stride = math.ceil(T * 2 * spec.sup_rate_sum() / 0.1 / 10)
        dt = T / (10 * stride)
        lt = evolve_lifted(spec, None, T, dt, stride=stride)
        qt = evolve(unitary_generator(spec), rho0, T, dt, stride=stride)
        assert len(lt.times) == len(qt.times) == 11
        for p, rho in zip(lt.weights, qt.states):
            assert np.linalg.norm(reconstruct_state(p, rho0, spec.layout) - rho) < 1e-6


def test_monotone_min_weight_and_D():
    rng = np.random.default_rng(9)
    for m in (2, 3, 4):
        spec = random_pairwise_spec(m, rng)
        traj = evolve_lifted(spec, None, 5.0, 0.01, stride=5)
        assert np.all(np.diff(traj.min_p) >= -1e-9)
        assert np.all(np.diff(traj.D) <= 1e-9)
        if generates_full_group(spec.perms, m).generates:
            assert np.all(traj.weights[1:].min(axis=1) > 0)


@pytest.mark.parametrize("name,m", [("path", 3), ("complete", 3), ("complete", 4)])
def test_converges_to_uniform(name, m):
    lay = NetworkLayout.path(m) if name == "path" else complete_layout(m)
    spec = UnitaryNoiseSpec.pairwise(lay, 1.0)
    dt = 0.1 / (2 * spec.sup_rate_sum())
    dt = 20.0 / math.ceil(20.0 / dt)
    traj = evolve_lifted(spec, None, 20.0, dt, stride=10**6)
    assert np.abs(traj.weights[-1] - 1 / math.factorial(m)).max() < 1e-6


def test_path4_convergence_is_gap_limited():
    # path on 4 sites: gap 2 - √2, so δ_e has not reached 1e-6 by T = 20
    spec = UnitaryNoiseSpec.pairwise(NetworkLayout.path(4))
    ev = np.linalg.eigvalsh(rate_matrix(spec))
    assert -ev[ev < -1e-9].max() == pytest.approx(2 - math.sqrt(2), abs=1e-12)
    traj = evolve_lifted(spec, None, 20.0, 1 / 60, stride=10**6)
    dev = np.abs(traj.weights[-1] - 1 / 24).max()
    assert 1e-7 < dev < 2e-6


def test_reconstruct_examples():
    rng = np.random.default_rng(10)
    lay = NetworkLayout(3, 2)
    rho0 = random_density(8, rng)
    assert np.array_equal(reconstruct_state(delta_identity(3), rho0, lay), rho0)
    assert np.abs(reconstruct_state(uniform(3), rho0, lay) - symmetrize(rho0, lay)).max() < 1e-12
    lay2 = NetworkLayout(2, 2)
    p = np.array([0.5 * (1 + np.exp(-2)), 0.5 * (1 - np.exp(-2))])
    got = reconstruct_state(p, basis_state([0, 1]), lay2)
    assert got[1, 1].real == pytest.approx(0.5 * (1 + np.exp(-2)), abs=1e-15)
    assert got[2, 2].real == pytest.approx(0.5 * (1 - np.exp(-2)), abs=1e-15)


def test_weight_and_step_validation():
    with pytest.raises(ConfigError):
        check_weights(np.array([0.5, 0.6]), 2)
    with pytest.raises(ConfigError):
        check_weights(np.array([1.0, 0.0, 0.0]), 2)
    with pytest.raises(ConfigError):
        check_weights(np.array([1.5, -0.5]), 2)
    spec = UnitaryNoiseSpec.pairwise(NetworkLayout.path(3))
    with pytest.raises(StepTooLarge):
        evolve_lifted(spec, None, 1.0, 0.05)
    tight = config.TOL.with_overrides(norm_drift=0.0)
    p0 = np.random.default_rng(11).dirichlet(np.ones(6))
    with pytest.raises(NormDrift):
        evolve_lifted(spec, p0, 10.0, 0.025, tol=tight)
