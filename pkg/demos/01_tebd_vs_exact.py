"""
Imaginary-time TEBD against exact diagonalization on short chains.

For a few staggered fields on N = 10 sites we run the ground-state search
and compare energy, the parallel magnetization profile and the block
entropies with the dense ground state.
"""

import math

import numpy as np

from xychain import SpinChainModel, Staggered, TruncationPolicy, ground_state_search
from xychain.ed import dense_ground_state, ed_block_entropy, ed_magnetization_profile
from xychain.model import parallel_operator

N = 10
print(f"{'h0':>7} {'E (TEBD)':>16} {'E (exact)':>16} {'rel dE':>9} {'max dm':>9} {'max dS':>9}")
for h0 in (0.5, 2.0, 2 * math.sqrt(2), 4.0):
    model = SpinChainModel.from_spec(Staggered(h0), N)
    state, diag = ground_state_search(model, policy=TruncationPolicy(max_bond=32))
    exact = dense_ground_state(model)
    m_exact, _ = ed_magnetization_profile(exact, model.axis_angle)
    m_tebd = np.array([state.expectation_one_site(i, parallel_operator(0.0))
                       for i in range(1, N + 1)])
    d_s = max(abs(state.block_entropy(p) - ed_block_entropy(exact, p)) for p in range(1, N))
    print(f"{h0:7.4f} {diag.final_energy:16.10f} {exact.energy:16.10f} "
          f"{abs(diag.final_energy - exact.energy) / abs(exact.energy):9.1e} "
          f"{np.max(np.abs(m_tebd - m_exact)):9.1e} {d_s:9.1e}")
