import math

import numpy as np
import pytest

from xychain.ed import (MAX_SITES, dense_ground_state, dense_hamiltonian, ed_block_entropy,
                        ed_energy, ed_magnetization_profile, product_state_vector)
from xychain.model import Explicit, GaussianRandom, SpinChainModel, Staggered, Uniform
from xychain.tebd import initial_state
from xychain.tebd import energy as mps_energy


def free_fermion_open_xx(n):
    """Ground energy of -sum(XX + YY) on an open chain: fill modes with -4 cos(pi m/(n+1)) < 0."""
    eps = [-4 * math.cos(math.pi * m / (n + 1)) for m in range(1, n + 1)]
    return sum(e for e in eps if e < 0)


def test_two_sites_zero_field():
    gs = dense_ground_state(SpinChainModel.from_spec(Uniform(0.0), 2))
    assert gs.energy == pytest.approx(-2)
    assert ed_block_entropy(gs, 1) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [3, 4, 7, 10])
def test_zero_field_matches_free_fermions(n):
    gs = dense_ground_state(SpinChainModel.from_spec(Uniform(0.0), n))
    assert gs.energy == pytest.approx(free_fermion_open_xx(n), abs=1e-10)


def test_four_sites_minus_two_sqrt_five():
    gs = dense_ground_state(SpinChainModel.from_spec(Uniform(0.0), 4))
    assert gs.energy == pytest.approx(-2 * math.sqrt(5), abs=1e-12)


def test_strong_field_polarizes():
    model = SpinChainModel.from_spec(Uniform(100.0), 2)
    gs = dense_ground_state(model)
    exact = np.linalg.eigvalsh(dense_hamiltonian(model))[0]
    assert gs.energy == pytest.approx(exact, abs=1e-12)
    # polarized pair: XX contributes -1, YY only at second order
    assert -201 - 0.05 < gs.energy < -201
    m_par, _ = ed_magnetization_profile(gs, 0.0)
    assert np.all(m_par > 0.999)


def test_eigen_residual_and_norm():
    model = SpinChainModel.from_spec(GaussianRandom(0.8, 2), 9)
    gs = dense_ground_state(model)
    h = dense_hamiltonian(model)
    assert np.linalg.norm(gs.vector) == pytest.approx(1, abs=1e-12)
    assert np.linalg.norm(h @ gs.vector - gs.energy * gs.vector) < 1e-9


def test_hermitian_exactly():
    h = dense_hamiltonian(SpinChainModel.from_spec(GaussianRandom(1.0, 4), 7, axis_angle=0.9))
    assert np.array_equal(h, h.conj().T)


def test_field_sign_flip_preserves_spectrum():
    spec = GaussianRandom(1.0, 8)
    m1 = SpinChainModel.from_spec(spec, 8)
    m2 = SpinChainModel.from_spec(Explicit(tuple(-m1.field.values)), 8)
    assert np.allclose(np.linalg.eigvalsh(dense_hamiltonian(m1)),
                       np.linalg.eigvalsh(dense_hamiltonian(m2)), atol=1e-10)


def test_zero_field_magnetizations_vanish():
    gs = dense_ground_state(SpinChainModel.from_spec(Uniform(0.0), 6))
    m_par, m_perp = ed_magnetization_profile(gs, 0.0)
    assert np.allclose(m_par, 0, atol=1e-10) and np.allclose(m_perp, 0, atol=1e-10)


def test_product_state_entropy_zero():
    from xychain.ed import DenseGroundState
    psi = product_state_vector([np.array([1, 1j]) / math.sqrt(2)] * 5)
    gs = DenseGroundState(5, psi, 0.0, 1.0, False)
    assert all(abs(ed_block_entropy(gs, p)) < 1e-10 for p in range(1, 5))


def test_variational_bound():
    model = SpinChainModel.from_spec(Staggered(1.5), 8)
    gs = dense_ground_state(model)
    for seed in range(3):
        assert gs.energy <= mps_energy(initial_state(model, seed=seed), model) + 1e-9


def test_mps_energy_matches_dense_energy():
    model = SpinChainModel.from_spec(GaussianRandom(1.0, 1), 6, axis_angle=0.3)
    s = initial_state(model, seed=4)
    assert mps_energy(s, model) == pytest.approx(ed_energy(s.to_dense(), model), abs=1e-12)


def test_degenerate_pair_resolved_toward_positive_perp():
    # compensated staggered field at the factorization point: exactly degenerate product pair
    h0 = 2 * math.sqrt(2)
    v = [(-1) ** i * h0 for i in range(1, 9)]
    v[0] /= 2
    v[-1] /= 2
    gs = dense_ground_state(SpinChainModel.from_spec(Explicit(tuple(v)), 8))
    assert gs.degenerate
    _, m_perp = ed_magnetization_profile(gs, 0.0)
    assert m_perp.sum() > 1


def test_size_guard():
    with pytest.raises(ValueError):
        dense_ground_state(SpinChainModel.from_spec(Uniform(0.0), MAX_SITES + 1))
