"""Open-boundary matrix product states for spin-1/2 chains.

Site tensors have shape ``(left_bond, 2, right_bond)``.  The state is kept in
mixed canonical form: every tensor left of ``center`` is a left isometry and
every tensor right of it is a right isometry, so the norm lives in the center
tensor.  Bond spectra are stored as Schmidt *weights* (squared singular
values, summing to one); the singular values are their square roots.

Sites and bonds are numbered from 1 in the public methods.  Bond ``b`` sits
between sites ``b`` and ``b + 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

NOISE_FLOOR = 1e-14
CHECKPOINT_FORMAT = "xychain-mps"
CHECKPOINT_VERSION = 1


class NotCanonicalError(RuntimeError):
    """The requested quantity needs a canonical form the state is not in."""


class TruncationError(RuntimeError):
    """Truncation left an empty Schmidt spectrum."""


@dataclass(frozen=True)
class TruncationPolicy:
    """How Schmidt spectra are cut after each SVD.

    ``cutoff`` is the largest total weight that may be discarded from the
    tail.  With ``keep_degenerate`` the kept spectrum is extended past
    ``max_bond`` until the cut no longer splits a degenerate multiplet, so
    bond dimensions can exceed ``max_bond`` by the multiplet size.
    """

    max_bond: int = 64
    cutoff: float = 1e-10
    keep_degenerate: bool = True
    degeneracy_tol: float = 1e-9

    def __post_init__(self):
        if self.max_bond < 1:
            raise ValueError(f"max_bond must be >= 1, got {self.max_bond}")
        if self.cutoff < 0:
            raise ValueError(f"cutoff must be >= 0, got {self.cutoff}")


def entropy_bits(weights) -> float:
    """Von Neumann entropy (base 2) of a probability vector."""
    w = np.asarray(weights, dtype=float)
    w = w[w > NOISE_FLOOR]
    return float(-np.sum(w * np.log2(w)))


def truncation_rank(weights: np.ndarray, policy: TruncationPolicy | None) -> int:
    """Number of leading weights kept; ``weights`` is normalized and descending."""
    n = int(np.count_nonzero(weights >= NOISE_FLOOR))
    if n == 0:
        raise TruncationError("all Schmidt weights fell below the noise floor")
    if policy is None:
        return n
    keep = n
    if policy.cutoff > 0:
        # tail[k] = sum(weights[k:n]); keep the shortest prefix whose tail is below cutoff
        tail = np.cumsum(weights[:n][::-1])[::-1]
        below = np.nonzero(tail < policy.cutoff)[0]
        if below.size:
            keep = max(int(below[0]), 1)
    keep = min(keep, policy.max_bond)
    if policy.keep_degenerate:
        last = weights[keep - 1]
        while keep < n and weights[keep] >= last * (1.0 - policy.degeneracy_tol):
            keep += 1
    return keep


def gauge_fixed_svd(m: np.ndarray):
    """Thin SVD with the phase of each singular pair pinned.

    The largest-magnitude entry of every left singular vector is made real
    and positive (first occurrence on ties).
    """
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    cols = np.arange(u.shape[1])
    pivot = u[np.argmax(np.abs(u), axis=0), cols]
    phase = pivot / np.abs(pivot)
    if np.iscomplexobj(u):
        u = u * phase.conj()
    else:
        u = u * phase
    vh = vh * phase[:, None]
    return u, s, vh


def _transfer(env: np.ndarray, t: np.ndarray, op: np.ndarray | None = None) -> np.ndarray:
    """Push a left environment (bra, ket) through one site, optionally inserting ``op``."""
    chi_a, _, chi_b = t.shape
    x = (env @ t.reshape(chi_a, -1)).reshape(-1, chi_b)
    bra = t.conj() if op is None else np.matmul(op.T, t.conj())
    return bra.reshape(-1, chi_b).T @ x


class MatrixProductState:
    """Finite open-chain MPS with per-bond Schmidt weights."""

    physical_dim = 2

    def __init__(self, tensors, spectra=None, center: int = 0, max_bond: int | None = None):
        self.tensors = [np.asarray(t) for t in tensors]
        n = len(self.tensors)
        if n < 2:
            raise ValueError(f"need at least 2 sites, got {n}")
        if spectra is None:
            spectra = [np.ones(1) for _ in range(n - 1)]
            fresh = [False] * (n - 1)
        else:
            fresh = [True] * (n - 1)
        self.spectra = [np.asarray(s, dtype=float) for s in spectra]
        self.fresh = fresh
        self.center = center
        self.max_bond = max_bond
        self.discarded_weight = 0.0
        self.canonical = False

    # construction ---------------------------------------------------------

    @classmethod
    def product_state(cls, local_states, max_bond: int | None = None) -> "MatrixProductState":
        """Product state from one normalized 2-vector per site."""
        local_states = [np.asarray(v, dtype=complex).reshape(2) for v in local_states]
        if len(local_states) < 2:
            raise ValueError(f"need at least 2 sites, got {len(local_states)}")
        for i, v in enumerate(local_states, start=1):
            norm = np.linalg.norm(v)
            if abs(norm - 1.0) > 1e-10:
                raise ValueError(f"local state at site {i} has norm {norm!r}, expected 1")
        tensors = [v.reshape(1, 2, 1).copy() for v in local_states]
        state = cls(tensors, [np.ones(1) for _ in local_states[1:]], center=0, max_bond=max_bond)
        state.canonical = True
        return state

    @classmethod
    def from_dense(cls, psi, policy: TruncationPolicy | None = None) -> "MatrixProductState":
        """Decompose a dense 2**N amplitude vector (site 1 most significant)."""
        psi = np.asarray(psi)
        n = int(round(np.log2(psi.size)))
        if 2**n != psi.size or n < 2:
            raise ValueError(f"vector length {psi.size} is not 2**N with N >= 2")
        psi = psi / np.linalg.norm(psi)
        tensors = []
        spectra = []
        rest = psi.reshape(1, -1)
        for _ in range(n - 1):
            chi_l = rest.shape[0]
            m = rest.reshape(chi_l * 2, -1)
            u, s, vh = gauge_fixed_svd(m)
            w = s**2 / np.sum(s**2)
            k = truncation_rank(w, policy)
            tensors.append(u[:, :k].reshape(chi_l, 2, k))
            spectra.append(w[:k] / np.sum(w[:k]))
            s_k = s[:k] / np.sqrt(np.sum(s[:k] ** 2))
            rest = s_k[:, None] * vh[:k]
        tensors.append(rest.reshape(rest.shape[0], 2, 1))
        state = cls(tensors, spectra, center=n - 1,
                    max_bond=None if policy is None else policy.max_bond)
        return state.canonicalize()

    def copy(self) -> "MatrixProductState":
        other = MatrixProductState([t.copy() for t in self.tensors],
                                   [s.copy() for s in self.spectra],
                                   center=self.center, max_bond=self.max_bond)
        other.fresh = list(self.fresh)
        other.discarded_weight = self.discarded_weight
        other.canonical = self.canonical
        return other

    # basic properties -----------------------------------------------------

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        """Dimensions of the N - 1 interior bonds."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def dtype(self):
        return np.result_type(*self.tensors)

    def norm(self) -> float:
        env = np.ones((1, 1))
        for t in self.tensors:
            env = _transfer(env, t)
        return float(np.sqrt(abs(env[0, 0])))

    def to_dense(self) -> np.ndarray:
        """Full amplitude vector; site 1 is the most significant qubit."""
        psi = self.tensors[0].reshape(2, -1)
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=(1, 0)).reshape(-1, t.shape[2])
        return psi.reshape(-1)

    # gauge moves ----------------------------------------------------------

    def _move_center_right(self):
        c = self.center
        t = self.tensors[c]
        chi_l, d, chi_r = t.shape
        q, r = np.linalg.qr(t.reshape(chi_l * d, chi_r))
        self.tensors[c] = q.reshape(chi_l, d, q.shape[1])
        nxt = self.tensors[c + 1]
        self.tensors[c + 1] = (r @ nxt.reshape(nxt.shape[0], -1)).reshape(r.shape[0], *nxt.shape[1:])
        self.center = c + 1

    def _move_center_left(self):
        c = self.center
        t = self.tensors[c]
        chi_l, d, chi_r = t.shape
        q, r = np.linalg.qr(t.reshape(chi_l, d * chi_r).T)
        self.tensors[c] = q.T.reshape(q.shape[1], d, chi_r)
        prv = self.tensors[c - 1]
        self.tensors[c - 1] = (prv.reshape(-1, prv.shape[2]) @ r.T).reshape(*prv.shape[:2], r.shape[0])
        self.center = c - 1

    def move_center(self, site0: int):
        """Shift the orthogonality center to 0-based ``site0`` by QR steps."""
        if not 0 <= site0 < self.n_sites:
            raise IndexError(f"site {site0} outside 0..{self.n_sites - 1}")
        if site0 != self.center:
            self.canonical = False
        while self.center < site0:
            self._move_center_right()
        while self.center > site0:
            self._move_center_left()

    def normalize(self) -> float:
        """Rescale the center tensor to unit norm; returns the old norm."""
        t = self.tensors[self.center]
        nrm = float(np.linalg.norm(t))
        self.tensors[self.center] = t / nrm
        return nrm

    def canonicalize(self, policy: TruncationPolicy | None = None) -> "MatrixProductState":
        """Bring the state to right-canonical form with exact spectra on every bond.

        Weights below the noise floor are always removed; ``policy`` may
        truncate further.  Returns ``self``.
        """
        self.move_center(self.n_sites - 1)
        self.normalize()
        for c in range(self.n_sites - 1, 0, -1):
            t = self.tensors[c]
            chi_l, d, chi_r = t.shape
            u, s, vh = gauge_fixed_svd(t.reshape(chi_l, d * chi_r))
            w = s**2 / np.sum(s**2)
            k = truncation_rank(w, policy)
            self.discarded_weight += float(np.sum(w[k:]))
            s_k = s[:k] / np.sqrt(np.sum(s[:k] ** 2))
            self.tensors[c] = vh[:k].reshape(k, d, chi_r)
            self.tensors[c - 1] = np.tensordot(self.tensors[c - 1], u[:, :k] * s_k, axes=(2, 0))
            self.spectra[c - 1] = s_k**2
            self.fresh[c - 1] = True
        self.center = 0
        self.normalize()
        self.canonical = True
        return self

    def require_canonical(self):
        if not self.canonical:
            raise NotCanonicalError("state is not in canonical form; call canonicalize() first")

    # gates ----------------------------------------------------------------

    def apply_two_site_gate(self, bond: int, gate, policy: TruncationPolicy | None = None,
                            move: str = "right", unitary: bool | None = None) -> float:
        """Apply a 4x4 gate on sites (bond, bond + 1) and re-split by SVD.

        The gate acts on the pair basis ``|s_b s_{b+1}>`` with index
        ``2 * s_b + s_{b+1}``.  The result is truncated, renormalized, and
        the orthogonality center is left on site ``bond + 1`` (``move="right"``)
        or ``bond`` (``move="left"``).  Returns the discarded weight.

        Spectra on other bonds stay valid only for unitary gates; pass
        ``unitary`` to skip the numerical check.
        """
        n = self.n_sites
        if not 1 <= bond <= n - 1:
            raise IndexError(f"bond {bond} outside 1..{n - 1}")
        i = bond - 1
        if self.center < i:
            self.move_center(i)
        elif self.center > i + 1:
            self.move_center(i + 1)
        gate = np.asarray(gate)
        if unitary is None:
            unitary = np.allclose(gate.conj().T @ gate, np.eye(4), atol=1e-13)

        a, b = self.tensors[i], self.tensors[i + 1]
        chi_l, chi_m, chi_r = a.shape[0], a.shape[2], b.shape[2]
        theta = (a.reshape(-1, chi_m) @ b.reshape(chi_m, -1)).reshape(chi_l, 4, chi_r)
        theta = np.matmul(gate, theta)
        u, s, vh = gauge_fixed_svd(theta.reshape(chi_l * 2, 2 * chi_r))
        norm2 = np.sum(s**2)
        if not norm2 > 0:
            raise TruncationError(f"gate on bond {bond} annihilated the state")
        w = s**2 / norm2
        k = truncation_rank(w, policy)
        discarded = float(np.sum(w[k:]))
        s_k = s[:k] / np.sqrt(np.sum(s[:k] ** 2))
        u = u[:, :k].reshape(chi_l, 2, k)
        vh = vh[:k].reshape(k, 2, chi_r)
        if move == "right":
            self.tensors[i] = u
            self.tensors[i + 1] = s_k[:, None, None] * vh
            self.center = i + 1
        elif move == "left":
            self.tensors[i] = u * s_k
            self.tensors[i + 1] = vh
            self.center = i
        else:
            raise ValueError(f"move must be 'right' or 'left', got {move!r}")
        if not unitary:
            self.fresh = [False] * (n - 1)
        self.spectra[i] = s_k**2
        self.fresh[i] = True
        self.discarded_weight += discarded
        self.canonical = False
        return discarded

    def apply_site_operator(self, site: int, op):
        """Apply a 2x2 unitary to one site without changing the canonical form."""
        t = self.tensors[site - 1]
        self.tensors[site - 1] = np.tensordot(np.asarray(op), t, axes=(1, 1)).transpose(1, 0, 2)

    # measurements ---------------------------------------------------------

    def block_entropy(self, p: int) -> float:
        """Entropy in bits of the first ``p`` spins, S(p) = -sum w log2 w."""
        if not 1 <= p <= self.n_sites - 1:
            raise IndexError(f"bond {p} outside 1..{self.n_sites - 1}")
        if not self.fresh[p - 1]:
            raise NotCanonicalError(f"spectrum at bond {p} is stale; call canonicalize() first")
        return entropy_bits(self.spectra[p - 1])

    def entropy_profile(self) -> np.ndarray:
        return np.array([self.block_entropy(p) for p in range(1, self.n_sites)])

    def _left_weights(self, site: int) -> np.ndarray:
        return np.ones(1) if site == 1 else self.spectra[site - 2]

    def site_density_matrix(self, site: int) -> np.ndarray:
        """Reduced 2x2 density matrix of one site (canonical state only)."""
        self.require_canonical()
        if not 1 <= site <= self.n_sites:
            raise IndexError(f"site {site} outside 1..{self.n_sites}")
        t = self.tensors[site - 1]
        lam = self._left_weights(site)
        return np.einsum("a,atb,asb->ts", lam, t, t.conj())

    def expectation_one_site(self, site: int, op) -> float:
        """<psi| op_site |psi> for a Hermitian 2x2 ``op``."""
        val = np.trace(np.asarray(op) @ self.site_density_matrix(site))
        return _real_part(val)

    def expectation_two_site(self, i: int, j: int, op_i, op_j) -> float:
        """<psi| op_i op_j |psi> for sites i < j."""
        self.require_canonical()
        n = self.n_sites
        if not 1 <= i < j <= n:
            raise IndexError(f"need 1 <= i < j <= {n}, got i={i}, j={j}")
        env = np.diag(self._left_weights(i)).astype(self.dtype)
        env = _transfer(env, self.tensors[i - 1], np.asarray(op_i))
        for k in range(i + 1, j):
            env = _transfer(env, self.tensors[k - 1])
        env = _transfer(env, self.tensors[j - 1], np.asarray(op_j))
        return _real_part(np.trace(env))

    def correlations(self, i: int, op, r_max: int) -> np.ndarray:
        """<op_i op_{i+r}> for r = 1..r_max in a single pass."""
        self.require_canonical()
        op = np.asarray(op)
        r_max = min(r_max, self.n_sites - i)
        out = np.empty(r_max)
        env = _transfer(np.diag(self._left_weights(i)).astype(self.dtype), self.tensors[i - 1], op)
        for r in range(1, r_max + 1):
            t = self.tensors[i + r - 1]
            out[r - 1] = _real_part(np.trace(_transfer(env, t, op)))
            env = _transfer(env, t)
        return out

    def left_block_gram(self, p: int) -> np.ndarray:
        """Overlap matrix of the normalized left Schmidt states at bond ``p``.

        Equals the identity for a canonical state.
        """
        self.require_canonical()
        env = np.ones((1, 1))
        for t in self.tensors[:p]:
            env = _transfer(env, t)
        lam = np.sqrt(self.spectra[p - 1])
        return env / np.outer(lam, lam)

    # persistence ----------------------------------------------------------

    def save(self, path, metadata: dict | None = None):
        """Write a versioned ``.npz`` checkpoint."""
        header = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "n_sites": self.n_sites,
            "center": self.center,
            "max_bond": self.max_bond,
            "discarded_weight": self.discarded_weight,
            "fresh": self.fresh,
            "canonical": self.canonical,
            "metadata": metadata or {},
        }
        arrays = {f"tensor_{k}": t for k, t in enumerate(self.tensors)}
        arrays.update({f"spectrum_{k}": s for k, s in enumerate(self.spectra)})
        path = Path(path)
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header)), **arrays)

    @classmethod
    def load(cls, path):
        """Read a checkpoint written by :meth:`save`; returns ``(state, metadata)``."""
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            if header.get("format") != CHECKPOINT_FORMAT:
                raise ValueError(f"{path}: not an MPS checkpoint")
            if header.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: checkpoint version {header.get('version')} "
                                 f"!= supported {CHECKPOINT_VERSION}")
            n = header["n_sites"]
            tensors = [data[f"tensor_{k}"] for k in range(n)]
            spectra = [data[f"spectrum_{k}"] for k in range(n - 1)]
        state = cls(tensors, spectra, center=header["center"], max_bond=header["max_bond"])
        state.fresh = list(header["fresh"])
        state.discarded_weight = header["discarded_weight"]
        state.canonical = header["canonical"]
        return state, header["metadata"]


def _real_part(val) -> float:
    val = complex(val)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation value has imaginary part {val.imag:.3e}")
    return val.real
