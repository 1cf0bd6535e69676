"""XY chain in a site-dependent in-plane field.

    H = -sum_{i=1}^{N-1} (X_i X_{i+1} + Y_i Y_{i+1}) - sum_{i=1}^{N} h_i sigma_n^i

with ``sigma_n = cos(theta) X + sin(theta) Y``.  Sites are numbered from 1,
so a staggered field is ``h_i = (-1)**i * h0`` and starts with ``-h0``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

EXCHANGE = -(np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Y, SIGMA_Y))


def sigma_along_axis(angle: float) -> np.ndarray:
    """Pauli operator along the in-plane direction (cos a, sin a, 0)."""
    return math.cos(angle) * SIGMA_X + math.sin(angle) * SIGMA_Y


def parallel_operator(axis_angle: float) -> np.ndarray:
    return sigma_along_axis(axis_angle)


def perpendicular_operator(axis_angle: float) -> np.ndarray:
    """In-plane Pauli operator rotated +90 degrees from the field axis."""
    return sigma_along_axis(axis_angle + math.pi / 2)


# field specifications -------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    h0: float


@dataclass(frozen=True)
class Staggered:
    h0: float


@dataclass(frozen=True)
class Sinusoidal:
    amplitude: float
    wave_number: float


@dataclass(frozen=True)
class GaussianRandom:
    std_dev: float
    seed: int


@dataclass(frozen=True)
class Explicit:
    values: tuple


FieldSpec = Uniform | Staggered | Sinusoidal | GaussianRandom | Explicit


def gaussian_samples(n: int, seed: int) -> np.ndarray:
    """Standard normal deviates from a pinned, documented generator.

    Raw 64-bit words come from numpy's ``PCG64(seed)`` bit generator (seeded
    through ``SeedSequence``).  Each word becomes a uniform
    ``u = (word >> 11) * 2**-53`` in [0, 1).  Consecutive pairs ``(u1, u2)``
    map by Box-Muller to ``r cos(2 pi u2), r sin(2 pi u2)`` with
    ``r = sqrt(-2 log(1 - u1))``; the first ``n`` outputs are returned.
    """
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    pairs = (n + 1) // 2
    raw = np.random.PCG64(seed).random_raw(2 * pairs)
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2 * np.pi * u2)
    z[1::2] = r * np.sin(2 * np.pi * u2)
    return z[:n]


def field_values(spec: FieldSpec, n_sites: int) -> np.ndarray:
    """Per-site field amplitudes h_1..h_N for a field specification."""
    if n_sites < 2:
        raise ValueError(f"need at least 2 sites, got {n_sites}")
    sites = np.arange(1, n_sites + 1)
    if isinstance(spec, Uniform):
        return np.full(n_sites, float(spec.h0))
    if isinstance(spec, Staggered):
        return np.where(sites % 2 == 0, 1.0, -1.0) * float(spec.h0)
    if isinstance(spec, Sinusoidal):
        if not 0 < spec.wave_number <= math.pi:
            raise ValueError(f"wave number must lie in (0, pi], got {spec.wave_number}")
        return float(spec.amplitude) * np.sin(spec.wave_number * sites)
    if isinstance(spec, GaussianRandom):
        if spec.std_dev < 0:
            raise ValueError(f"standard deviation must be >= 0, got {spec.std_dev}")
        return float(spec.std_dev) * gaussian_samples(n_sites, spec.seed)
    if isinstance(spec, Explicit):
        values = np.asarray(spec.values, dtype=float)
        if values.shape != (n_sites,):
            raise ValueError(f"explicit field has {values.size} values, chain has {n_sites} sites")
        return values.copy()
    raise TypeError(f"unknown field specification {spec!r}")


def load_explicit_field(path) -> Explicit:
    """Read a one-column numeric text file into an :class:`Explicit` spec."""
    values = np.loadtxt(path, ndmin=1, dtype=float)
    if values.ndim != 1:
        raise ValueError(f"{path}: expected a single column of numbers")
    return Explicit(tuple(values.tolist()))


@dataclass(frozen=True)
class FieldConfiguration:
    values: np.ndarray
    axis_angle: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "axis_angle", float(self.axis_angle) % (2 * math.pi))

    @property
    def n_sites(self) -> int:
        return self.values.size


def build_field(spec: FieldSpec, n_sites: int, axis_angle: float = 0.0) -> FieldConfiguration:
    return FieldConfiguration(field_values(spec, n_sites), axis_angle)


@dataclass(frozen=True)
class SpinChainModel:
    """Ferromagnetic XY chain (coupling -1) in the given field."""

    field: FieldConfiguration

    def __post_init__(self):
        if self.field.n_sites < 2:
            raise ValueError("a chain needs at least 2 sites")

    @classmethod
    def from_spec(cls, spec: FieldSpec, n_sites: int, axis_angle: float = 0.0):
        return cls(build_field(spec, n_sites, axis_angle))

    @property
    def n_sites(self) -> int:
        return self.field.n_sites

    @property
    def axis_angle(self) -> float:
        return self.field.axis_angle

    def digest(self) -> str:
        """Stable hash of the model parameters (for checkpoints)."""
        payload = json.dumps({"axis_angle": repr(self.axis_angle),
                              "field": [repr(float(h)) for h in self.field.values]})
        return hashlib.sha256(payload.encode()).hexdigest()

    def field_weights(self) -> np.ndarray:
        """Share of each site's field term given to a bond: 1 at the edges, 1/2 inside."""
        w = np.full(self.n_sites, 0.5)
        w[0] = w[-1] = 1.0
        return w

    def bond_hamiltonians(self) -> list[np.ndarray]:
        """4x4 terms h_b, b = 1..N-1, whose sum is the full Hamiltonian."""
        sn = parallel_operator(self.axis_angle)
        h = self.field.values
        w = self.field_weights()
        terms = []
        for b in range(self.n_sites - 1):
            term = EXCHANGE.copy()
            term -= w[b] * h[b] * np.kron(sn, IDENTITY)
            term -= w[b + 1] * h[b + 1] * np.kron(IDENTITY, sn)
            terms.append(term)
        return terms


def hermitian_exp(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-t h) for Hermitian h via its eigendecomposition."""
    e, v = np.linalg.eigh(h)
    return (v * np.exp(-t * e)) @ v.conj().T


@dataclass
class TrotterGateSet:
    """Second-order split of exp(-dt H) into odd- and even-bond layers.

    One step is ``odd_half . even . odd_half``; ``odd_full`` holds the squared
    half gates so consecutive steps can share an odd layer.
    """

    step_size: float
    odd_bonds: list[int]
    even_bonds: list[int]
    odd_half: list[np.ndarray]
    even: list[np.ndarray]
    odd_full: list[np.ndarray] = field(repr=False)
    order: int = 2

    def all_gates(self):
        """(bond, gate) pairs in application order for one full step."""
        return ([(b, g) for b, g in zip(self.odd_bonds, self.odd_half)]
                + [(b, g) for b, g in zip(self.even_bonds, self.even)]
                + [(b, g) for b, g in zip(self.odd_bonds, self.odd_half)])

    def transformed(self, u: np.ndarray) -> "TrotterGateSet":
        """Gate set in the single-site frame ``u`` (each gate -> (u x u) g (u x u)^+)."""
        uu = np.kron(u, u)

        def conj(gates):
            out = []
            for g in gates:
                g2 = uu @ g @ uu.conj().T
                if np.max(np.abs(g2.imag)) < 1e-14:
                    g2 = g2.real.copy()
                out.append(g2)
            return out

        return TrotterGateSet(self.step_size, self.odd_bonds, self.even_bonds,
                              conj(self.odd_half), conj(self.even), conj(self.odd_full))


def build_gates(model: SpinChainModel, dt: float) -> TrotterGateSet:
    """Imaginary-time gates exp(-dt' h_b) for one second-order step of size ``dt``."""
    if not dt > 0:
        raise ValueError(f"step size must be positive, got {dt}")
    terms = model.bond_hamiltonians()
    odd_bonds = list(range(1, model.n_sites, 2))
    even_bonds = list(range(2, model.n_sites, 2))
    odd_half = [hermitian_exp(terms[b - 1], dt / 2) for b in odd_bonds]
    odd_full = [hermitian_exp(terms[b - 1], dt) for b in odd_bonds]
    even = [hermitian_exp(terms[b - 1], dt) for b in even_bonds]
    return TrotterGateSet(dt, odd_bonds, even_bonds, odd_half, even, odd_full)


def working_frame(axis_angle: float) -> np.ndarray:
    """Single-site unitary taking sigma_n -> X and sigma_perp -> Z.

    In this frame the Hamiltonian and in-plane product states are real.
    """
    rz = np.diag([np.exp(0.5j * axis_angle), np.exp(-0.5j * axis_angle)])
    rx = (IDENTITY - 1j * SIGMA_X) / math.sqrt(2)
    return rx @ rz
