"""Imaginary-time TEBD ground-state search.

Each step applies ``odd/2 . even . odd/2`` gate layers.  Odd layers sweep
left to right and even layers right to left, so the orthogonality center
travels with the gates and every SVD sees an exactly canonical two-site
wavefunction even though the gates are not unitary.  Consecutive half layers
are fused between energy checks.

The evolution itself runs in the frame of :func:`model.working_frame`, where
the Hamiltonian and in-plane product states are real; states are returned in
the lab frame.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import (SIGMA_Z, SpinChainModel, TrotterGateSet, build_gates,
                    perpendicular_operator, working_frame)
from .mps import MatrixProductState, TruncationPolicy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stage:
    dt: float
    max_sweeps: int
    tol: float  # per-site energy change per sweep


# A long first stage lets slowly decaying contamination from the quasi-degenerate
# partner level die out; the final step keeps the O(dt^2) state error near 1e-4.
DEFAULT_STAGES = (Stage(0.1, 4000, 1e-11), Stage(0.03, 2000, 1e-10), Stage(0.01, 2000, 1e-10))


@dataclass(frozen=True)
class EvolutionSchedule:
    """Annealing schedule of Trotter steps.

    Energy is checked every ``check_every`` sweeps; a stage ends when the
    per-site energy change divided by the sweeps between checks drops below
    the stage tolerance.
    """

    stages: tuple = DEFAULT_STAGES
    check_every: int = 10

    def __post_init__(self):
        stages = tuple(s if isinstance(s, Stage) else Stage(*s) for s in self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ValueError("schedule needs at least one stage")
        for s in stages:
            if not s.dt > 0 or not s.tol > 0 or s.max_sweeps < 1:
                raise ValueError(f"invalid stage {s}")
        for a, b in zip(stages, stages[1:]):
            if not b.dt < a.dt:
                raise ValueError("step sizes must strictly decrease across stages")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


@dataclass
class RunDiagnostics:
    final_energy: float = math.nan
    energy_history: list = field(default_factory=list)
    history_sweeps: list = field(default_factory=list)
    history_stage: list = field(default_factory=list)
    perp_history: list = field(default_factory=list)
    total_discarded_weight: float = 0.0
    sweeps_used: int = 0
    converged: bool = False
    stage_converged: list = field(default_factory=list)
    max_bond_reached: int = 1
    truncation_alarm: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def initial_state(model: SpinChainModel, bias_angle: float = math.pi / 2, seed: int = 0,
                  direction: int = 1) -> MatrixProductState:
    """In-plane product state tilted toward +perp (``direction=-1``: toward -perp).

    Site angles are drawn uniformly from ``perp +- bias_angle``.  With equal
    seeds the two directions are exact mirror images about the field axis.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    n = model.n_sites
    offsets = np.random.Generator(np.random.PCG64(seed)).uniform(-1.0, 1.0, n)
    angles = model.axis_angle + direction * (math.pi / 2 + bias_angle * offsets)
    spins = [np.array([1.0, np.exp(1j * a)]) / math.sqrt(2) for a in angles]
    return MatrixProductState.product_state(spins)


def _decompose(op: np.ndarray):
    """Split a 4x4 two-site operator into sum_k A_k (x) B_k."""
    m = op.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(m)
    terms = []
    for k in np.nonzero(s > 1e-14)[0]:
        a = (u[:, k] * s[k]).reshape(2, 2)
        b = vh[k].reshape(2, 2)
        if np.max(np.abs(a.imag)) < 1e-15 and np.max(np.abs(b.imag)) < 1e-15:
            a, b = a.real, b.real
        terms.append((a, b))
    return terms


def local_sums(state: MatrixProductState, bond_terms, site_op=None):
    """<sum_b h_b> and <sum_i site_op> by one environment sweep.

    ``bond_terms[b]`` is the decomposition of bond ``b + 1`` from
    :func:`_decompose`.  Works in any gauge.
    """
    env = np.ones((1, 1))
    acc = np.zeros((1, 1))
    macc = np.zeros((1, 1))
    pending = []
    n = state.n_sites
    for i, t in enumerate(state.tensors):
        chi_a, _, chi_b = t.shape
        flat = t.reshape(chi_a, -1)
        tc = t.conj()
        plain = tc.reshape(-1, chi_b).T

        def push(e):
            return (e @ flat).reshape(-1, chi_b)

        def dressed(op):
            return np.matmul(op.T, tc).reshape(-1, chi_b).T

        x_env = push(env)
        new_acc = plain @ push(acc)
        for penv, b in pending:
            new_acc = new_acc + dressed(b) @ push(penv)
        if site_op is not None:
            macc = plain @ push(macc) + dressed(site_op) @ x_env
        if i < n - 1:
            pending = [(dressed(a) @ x_env, b) for a, b in bond_terms[i]]
        env = plain @ x_env
        acc = new_acc
    norm = env[0, 0]
    energy = complex(acc[0, 0] / norm)
    perp = complex(macc[0, 0] / norm)
    if abs(energy.imag) > 1e-10 * max(1.0, abs(energy.real)):
        raise ValueError(f"energy has imaginary part {energy.imag:.3e}")
    return energy.real, perp.real


def energy(state: MatrixProductState, model: SpinChainModel) -> float:
    """<H> for the model, computed in the lab frame."""
    if state.n_sites != model.n_sites:
        raise ValueError("state and model sizes differ")
    terms = [_decompose(h) for h in model.bond_hamiltonians()]
    return local_sums(state, terms)[0]


def to_frame(state: MatrixProductState, u: np.ndarray, realify: bool = False) -> MatrixProductState:
    """Copy of ``state`` with the single-site unitary ``u`` applied on every site.

    With ``realify`` each site tensor is also rephased so that its largest
    entry is real and positive; if everything is then real the copy is cast
    to float64.  Both operations keep the canonical form and spectra.
    """
    out = state.copy()
    for k in range(out.n_sites):
        out.apply_site_operator(k + 1, u)
    if realify:
        for k, t in enumerate(out.tensors):
            flat = t.reshape(-1)
            pivot = flat[np.argmax(np.abs(flat))]
            out.tensors[k] = t * (abs(pivot) / pivot)
        if all(np.max(np.abs(t.imag)) < 1e-13 for t in out.tensors):
            out.tensors = [np.ascontiguousarray(t.real) for t in out.tensors]
    return out


def _layer(state, bonds, gates, policy, move):
    disc = 0.0
    order = zip(bonds, gates) if move == "right" else zip(reversed(bonds), reversed(gates))
    for b, g in order:
        disc += state.apply_two_site_gate(b, g, policy, move=move, unitary=False)
    return disc


def evolve(state: MatrixProductState, gates: TrotterGateSet, steps: int,
           policy: TruncationPolicy | None) -> float:
    """Apply ``steps`` second-order Trotter steps in place; returns discarded weight."""
    disc = _layer(state, gates.odd_bonds, gates.odd_half, policy, "right")
    for s in range(steps):
        disc += _layer(state, gates.even_bonds, gates.even, policy, "left")
        odd = gates.odd_full if s < steps - 1 else gates.odd_half
        disc += _layer(state, gates.odd_bonds, odd, policy, "right")
    return disc


def ground_state_search(model: SpinChainModel, schedule: EvolutionSchedule | None = None,
                        policy: TruncationPolicy | None = None,
                        init: MatrixProductState | None = None, *,
                        alarm_threshold: float = 1e-4):
    """Project onto the ground state by imaginary-time evolution.

    Returns ``(state, diagnostics)``.  The state is canonical and normalized.
    Runs that exhaust ``max_sweeps`` in the final stage come back with
    ``converged=False`` and the lowest-energy state seen; a total discarded
    weight above ``alarm_threshold`` sets ``truncation_alarm``.
    """
    schedule = schedule or EvolutionSchedule()
    policy = policy or TruncationPolicy()
    if init is None:
        init = initial_state(model)
    n = model.n_sites
    if init.n_sites != n:
        raise ValueError(f"initial state has {init.n_sites} sites, model has {n}")

    u = working_frame(model.axis_angle)
    uu = np.kron(u, u)
    state = to_frame(init, u, realify=True)
    state.discarded_weight = 0.0
    terms = [_decompose(uu @ h @ uu.conj().T) for h in model.bond_hamiltonians()]
    perp = (u @ perpendicular_operator(model.axis_angle) @ u.conj().T)
    perp = perp.real if np.allclose(perp, SIGMA_Z) else perp

    diag = RunDiagnostics()
    best_state, best_energy = state.copy(), math.inf
    sweeps_total = 0
    for stage_index, stage in enumerate(schedule.stages):
        gates = build_gates(model, stage.dt).transformed(u)
        prev, _ = local_sums(state, terms)
        done = 0
        stage_ok = False
        while done < stage.max_sweeps:
            steps = min(schedule.check_every, stage.max_sweeps - done)
            diag.total_discarded_weight += evolve(state, gates, steps, policy)
            done += steps
            sweeps_total += steps
            diag.max_bond_reached = max(diag.max_bond_reached, max(state.bond_dims))
            e, m = local_sums(state, terms, perp)
            diag.energy_history.append(e)
            diag.history_sweeps.append(sweeps_total)
            diag.history_stage.append(stage_index)
            diag.perp_history.append(m / n)
            if e < best_energy:
                best_energy = e
                best_state = state.copy()
            if abs(e - prev) / (n * steps) < stage.tol:
                stage_ok = True
                break
            prev = e
        diag.stage_converged.append(stage_ok)
        log.debug("stage %d (dt=%g): %d sweeps, E=%.12f, converged=%s",
                  stage_index, stage.dt, done, prev, stage_ok)

    diag.sweeps_used = sweeps_total
    diag.converged = diag.stage_converged[-1]
    if not diag.converged:
        state = best_state
    result = to_frame(state, u.conj().T)
    result.canonicalize()
    result.discarded_weight = diag.total_discarded_weight
    result.max_bond = policy.max_bond
    diag.final_energy = energy(result, model)
    diag.truncation_alarm = diag.total_discarded_weight > alarm_threshold
    return result, diag


def save_checkpoint(path, state: MatrixProductState, diagnostics: RunDiagnostics,
                    model: SpinChainModel):
    state.save(path, metadata={"diagnostics": diagnostics.to_dict(),
                               "model_digest": model.digest()})


def load_checkpoint(path, model: SpinChainModel | None = None):
    """Returns ``(state, diagnostics)``; checks the model hash when ``model`` is given."""
    state, meta = MatrixProductState.load(path)
    if model is not None and meta.get("model_digest") != model.digest():
        raise ValueError(f"{path}: checkpoint was written for a different model")
    return state, RunDiagnostics(**meta["diagnostics"])
