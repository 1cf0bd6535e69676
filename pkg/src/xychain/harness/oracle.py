"""TEBD against exact diagonalization on small chains."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from ..analysis import measure_record
from ..ed import dense_ground_state, ed_block_entropy, ed_magnetization_profile
from ..model import GaussianRandom, SpinChainModel, Staggered
from ..mps import TruncationPolicy
from ..tebd import EvolutionSchedule, ground_state_search, initial_state

ORACLE_SIZES = (6, 8, 10, 12)
ORACLE_STAGGERED = (0.5, 2.0, 2 * math.sqrt(2), 4.0)
ORACLE_GAUSSIAN = GaussianRandom(0.5, 7)

ENERGY_TOL = 1e-6
MAGNETIZATION_TOL = 1e-3
ENTROPY_TOL = 1e-3


@dataclass
class OracleResult:
    n_sites: int
    field: str
    energy_ed: float
    energy_tebd: float
    rel_energy_error: float
    max_dm_parallel: float
    max_d_entropy: float
    converged: bool
    sweeps: int
    wall_time: float

    @property
    def passed(self) -> bool:
        return (self.rel_energy_error < ENERGY_TOL and self.max_dm_parallel < MAGNETIZATION_TOL
                and self.max_d_entropy < ENTROPY_TOL)

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def oracle_cases(sizes=ORACLE_SIZES):
    """(N, field spec) pairs of the default oracle matrix."""
    specs = [Staggered(h) for h in ORACLE_STAGGERED] + [ORACLE_GAUSSIAN]
    return [(n, s) for n in sizes for s in specs]


def check_case(n: int, spec, schedule: EvolutionSchedule | None = None,
               policy: TruncationPolicy | None = None, axis_angle: float = 0.0,
               bias_angle: float = math.pi / 2, init_seed: int = 0) -> OracleResult:
    model = SpinChainModel.from_spec(spec, n, axis_angle)
    policy = policy or TruncationPolicy(max_bond=32)
    start = time.perf_counter()
    state, diag = ground_state_search(model, schedule, policy,
                                      initial_state(model, bias_angle, init_seed))
    wall = time.perf_counter() - start
    rec = measure_record(state, model, 0, energy=diag.final_energy)
    gs = dense_ground_state(model)
    m_par, _ = ed_magnetization_profile(gs, model.axis_angle)
    s_ed = np.array([ed_block_entropy(gs, p) for p in range(1, n)])
    return OracleResult(n, repr(spec), gs.energy, diag.final_energy,
                        abs(diag.final_energy - gs.energy) / abs(gs.energy),
                        float(np.max(np.abs(rec.m_parallel - m_par))),
                        float(np.max(np.abs(rec.entropy - s_ed))),
                        diag.converged, diag.sweeps_used, wall)


def format_results(results) -> str:
    lines = [f"{'N':>3}  {'field':<36} {'rel dE':>9} {'max dm':>9} {'max dS':>9} {'time':>7}  result"]
    for r in results:
        lines.append(f"{r.n_sites:>3}  {r.field:<36} {r.rel_energy_error:9.2e} {r.max_dm_parallel:9.2e} "
                     f"{r.max_d_entropy:9.2e} {r.wall_time:6.1f}s  {'PASS' if r.passed else 'FAIL'}")
    total = sum(r.wall_time for r in results)
    ok = sum(r.passed for r in results)
    lines.append(f"{ok}/{len(results)} passed, TEBD time {total:.1f} s")
    return "\n".join(lines)
