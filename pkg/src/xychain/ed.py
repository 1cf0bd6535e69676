"""Exact diagonalization of short chains by dense assembly.

Basis ordering matches :meth:`MatrixProductState.to_dense`: site 1 is the
most significant qubit, ``|0>`` is spin up along Z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import SIGMA_X, SIGMA_Y, SpinChainModel, parallel_operator, perpendicular_operator

MAX_SITES = 14
DEGENERACY_TOL = 1e-10


@dataclass
class DenseGroundState:
    n_sites: int
    vector: np.ndarray
    energy: float
    gap: float
    degenerate: bool


def _embed(op: np.ndarray, first_site: int, n_sites: int) -> np.ndarray:
    """Dense operator acting as ``op`` on consecutive sites starting at ``first_site``."""
    k = int(round(np.log2(op.shape[0])))
    left = np.eye(2 ** (first_site - 1))
    right = np.eye(2 ** (n_sites - first_site - k + 1))
    return np.kron(left, np.kron(op, right))


def dense_hamiltonian(model: SpinChainModel) -> np.ndarray:
    """The full 2**N x 2**N Hamiltonian, term by term."""
    n = model.n_sites
    if n > MAX_SITES:
        raise ValueError(f"dense assembly limited to N <= {MAX_SITES}, got {n}")
    sn = parallel_operator(model.axis_angle)
    exchange = np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Y, SIGMA_Y)
    real = abs(np.sin(model.axis_angle)) < 1e-15
    dtype = float if real else complex
    if real:
        sn, exchange = sn.real, exchange.real
    h = np.zeros((2**n, 2**n), dtype=dtype)
    for i in range(1, n):
        h -= _embed(exchange, i, n)
    for i, hi in enumerate(model.field.values, start=1):
        if hi != 0:
            h -= hi * _embed(sn, i, n)
    return h


def apply_site_operator(psi: np.ndarray, site: int, op, n_sites: int) -> np.ndarray:
    t = psi.reshape(2 ** (site - 1), 2, 2 ** (n_sites - site))
    return np.einsum("st,atb->asb", np.asarray(op), t).reshape(-1)


def apply_two_site_dense(psi: np.ndarray, bond: int, gate, n_sites: int) -> np.ndarray:
    """Apply a 4x4 gate on sites (bond, bond + 1) of a dense state."""
    t = psi.reshape(2 ** (bond - 1), 4, 2 ** (n_sites - bond - 1))
    return np.einsum("st,atb->asb", np.asarray(gate), t).reshape(-1)


def product_state_vector(local_states) -> np.ndarray:
    psi = np.ones(1, dtype=complex)
    for v in local_states:
        psi = np.kron(psi, np.asarray(v, dtype=complex))
    return psi


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = np.argmax(np.abs(v))
    return v * (abs(v[k]) / v[k])


def dense_ground_state(model: SpinChainModel) -> DenseGroundState:
    """Lowest eigenpair of the dense Hamiltonian.

    When the two lowest levels lie within ``DEGENERACY_TOL`` the returned
    vector is the combination in that doublet with the largest total
    perpendicular magnetization, i.e. the symmetry-broken representative.
    """
    n = model.n_sites
    h = dense_hamiltonian(model)
    w, v = scipy.linalg.eigh(h, subset_by_index=[0, 1])
    gap = float(w[1] - w[0])
    degenerate = gap < DEGENERACY_TOL
    vec = v[:, 0].astype(complex)
    if degenerate:
        perp = perpendicular_operator(model.axis_angle)
        sub = v.astype(complex)
        m = np.zeros((2, 2), dtype=complex)
        for b in range(2):
            mb = sum(apply_site_operator(sub[:, b], i, perp, n) for i in range(1, n + 1))
            for a in range(2):
                m[a, b] = np.vdot(sub[:, a], mb)
        _, c = np.linalg.eigh(m)
        vec = sub @ c[:, -1]
        vec /= np.linalg.norm(vec)
    return DenseGroundState(n, _fix_phase(vec), float(w[0]), gap, degenerate)


def reduced_density_matrix(psi: np.ndarray, p: int, n_sites: int) -> np.ndarray:
    """Density matrix of the first ``p`` spins."""
    m = psi.reshape(2**p, 2 ** (n_sites - p))
    return m @ m.conj().T


def ed_block_entropy(gs: DenseGroundState, p: int) -> float:
    """S(p) in bits from the eigenvalues of the dense reduced density matrix."""
    if not 1 <= p <= gs.n_sites - 1:
        raise IndexError(f"bond {p} outside 1..{gs.n_sites - 1}")
    lam = np.linalg.eigvalsh(reduced_density_matrix(gs.vector, p, gs.n_sites))
    lam = lam[lam > 1e-14]
    return float(-np.sum(lam * np.log2(lam)))


def dense_expectation(psi: np.ndarray, ops: dict, n_sites: int) -> float:
    """<psi| prod_site ops[site] |psi> for single-site operators on distinct sites."""
    phi = psi
    for site, op in ops.items():
        phi = apply_site_operator(phi, site, op, n_sites)
    return float(np.vdot(psi, phi).real)


def ed_magnetization_profile(gs: DenseGroundState, axis_angle: float):
    """Exact (m_parallel, m_perp) per site."""
    par = parallel_operator(axis_angle)
    perp = perpendicular_operator(axis_angle)
    n = gs.n_sites
    m_par = np.array([dense_expectation(gs.vector, {i: par}, n) for i in range(1, n + 1)])
    m_perp = np.array([dense_expectation(gs.vector, {i: perp}, n) for i in range(1, n + 1)])
    return m_par, m_perp


def ed_energy(psi: np.ndarray, model: SpinChainModel) -> float:
    h = dense_hamiltonian(model)
    return float(np.vdot(psi, h @ psi).real)
