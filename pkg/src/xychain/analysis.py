"""Observables and scaling fits for converged chain states."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
import scipy.stats

from .model import SpinChainModel, parallel_operator, perpendicular_operator
from .mps import MatrixProductState


class UnfittableError(ValueError):
    """The data cannot support the requested fit."""


# observable records -------------------------------------------------------


@dataclass
class ObservableRecord:
    """Profiles and bulk means of one converged run.

    Means are taken over sites ``1 + boundary_exclusion .. N - boundary_exclusion``.
    """

    m_parallel: np.ndarray
    m_perp: np.ndarray
    entropy: np.ndarray
    energy: float
    field_values: np.ndarray
    boundary_exclusion: int = 0
    axis_angle: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.m_parallel = np.asarray(self.m_parallel, dtype=float)
        self.m_perp = np.asarray(self.m_perp, dtype=float)
        self.entropy = np.asarray(self.entropy, dtype=float)
        self.field_values = np.asarray(self.field_values, dtype=float)
        n = self.n_sites
        if not (self.m_perp.shape == self.field_values.shape == (n,)
                and self.entropy.shape == (n - 1,)):
            raise ValueError("profile lengths do not match the chain length")
        if not 0 <= self.boundary_exclusion < n / 2:
            raise ValueError(f"boundary exclusion {self.boundary_exclusion} must lie in [0, N/2)")
        total = np.hypot(self.m_parallel, self.m_perp)
        if np.any(total > 1 + 1e-9):
            raise ValueError("local magnetization exceeds 1")

    @property
    def n_sites(self) -> int:
        return self.m_parallel.size

    @property
    def bulk(self) -> slice:
        e = self.boundary_exclusion
        return slice(e, self.n_sites - e)

    @property
    def mean_m_parallel(self) -> float:
        return float(np.mean(self.m_parallel[self.bulk]))

    @property
    def mean_m_perp(self) -> float:
        return float(np.mean(self.m_perp[self.bulk]))

    @property
    def mean_abs_m_perp(self) -> float:
        return float(np.mean(np.abs(self.m_perp[self.bulk])))

    @property
    def mid_entropy(self) -> float:
        return float(self.entropy[self.n_sites // 2 - 1])

    def to_dict(self) -> dict:
        return {
            "m_parallel": self.m_parallel.tolist(),
            "m_perp": self.m_perp.tolist(),
            "entropy": self.entropy.tolist(),
            "energy": self.energy,
            "field_values": self.field_values.tolist(),
            "boundary_exclusion": self.boundary_exclusion,
            "axis_angle": self.axis_angle,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObservableRecord":
        return cls(**{k: d[k] for k in ("m_parallel", "m_perp", "entropy", "energy",
                                         "field_values", "boundary_exclusion", "axis_angle")},
                   diagnostics=d.get("diagnostics", {}))


def measure_record(state: MatrixProductState, model: SpinChainModel,
                   boundary_exclusion: int = 4, energy: float | None = None,
                   diagnostics: dict | None = None) -> ObservableRecord:
    """Magnetization and entropy profiles of a canonical state."""
    state.require_canonical()
    n = model.n_sites
    if not 0 <= boundary_exclusion < n / 2:
        raise ValueError(f"boundary exclusion {boundary_exclusion} must lie in [0, {n}/2)")
    par = parallel_operator(model.axis_angle)
    perp = perpendicular_operator(model.axis_angle)
    m_par = np.empty(n)
    m_perp = np.empty(n)
    for i in range(1, n + 1):
        rho = state.site_density_matrix(i)
        m_par[i - 1] = np.trace(par @ rho).real
        m_perp[i - 1] = np.trace(perp @ rho).real
    if energy is None:
        from .tebd import energy as mps_energy
        energy = mps_energy(state, model)
    return ObservableRecord(m_par, m_perp, state.entropy_profile(), float(energy),
                            np.array(model.field.values), boundary_exclusion,
                            model.axis_angle, dict(diagnostics or {}))


# power laws ---------------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    """y = prefactor * x**exponent, fitted in log-log space."""

    exponent: float
    exponent_stderr: float
    prefactor: float
    window: tuple
    residual: float
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def _in_window(xs, ys, window):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys differ in length")
    if window is not None:
        lo, hi = window
        keep = (xs >= lo) & (xs <= hi)
        xs, ys = xs[keep], ys[keep]
    return xs, ys


def fit_power_law(xs, ys, window=None, min_points: int = 4) -> PowerLawFit:
    """Least-squares line through (log x, log y) for points with x in ``window``."""
    xs, ys = _in_window(xs, ys, window)
    if xs.size < min_points:
        raise UnfittableError(f"need at least {min_points} points in the window, got {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise UnfittableError("power-law fit needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    if np.ptp(lx) == 0:
        raise UnfittableError("all abscissae coincide")
    res = scipy.stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    stderr = float(res.stderr) if xs.size > 2 else 0.0
    return PowerLawFit(float(res.slope), stderr, float(math.exp(res.intercept)),
                       (float(xs.min()), float(xs.max())),
                       float(np.sqrt(np.mean(resid**2))), int(xs.size))


def bootstrap_exponent(xs, ys, window=None, n_resamples: int = 1000, seed: int = 0):
    """Bootstrap mean and standard deviation of the fitted exponent."""
    xs, ys = _in_window(xs, ys, window)
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_resamples):
        idx = rng.integers(0, xs.size, xs.size)
        if np.unique(xs[idx]).size < 2:
            continue
        values.append(fit_power_law(xs[idx], ys[idx], min_points=2).exponent)
    values = np.array(values)
    return float(values.mean()), float(values.std(ddof=1))


def order_parameter_fit(fields, m_perp, h_c: float, window=(0.02, 0.2)) -> PowerLawFit:
    """Fit |m_perp| against the reduced distance 1 - h/h_c."""
    fields = np.asarray(fields, dtype=float)
    t = 1.0 - fields / h_c
    keep = t > 0
    return fit_power_law(t[keep], np.abs(np.asarray(m_perp, dtype=float)[keep]), window)


def locate_onset(xs, ys, threshold: float = 0.05) -> float:
    """Field value where an order parameter first drops below ``threshold``.

    Points are sorted by x.  The crossing between the last point at or above
    threshold and the following point is linearly interpolated.
    """
    order = np.argsort(xs, kind="stable")
    xs = np.asarray(xs, dtype=float)[order]
    ys = np.abs(np.asarray(ys, dtype=float)[order])
    above = np.nonzero(ys >= threshold)[0]
    if above.size == 0:
        raise UnfittableError("order parameter never reaches the threshold")
    k = above[-1]
    if k == xs.size - 1:
        raise UnfittableError("order parameter never drops below the threshold")
    x0, x1, y0, y1 = xs[k], xs[k + 1], ys[k], ys[k + 1]
    return float(x0 + (y0 - threshold) / (y0 - y1) * (x1 - x0))


# entanglement scaling -----------------------------------------------------


@dataclass(frozen=True)
class CentralChargeFit:
    c: float
    c_stderr: float
    offset: float
    method: str
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


CENTRAL_CHARGE_METHODS = ("entropy-vs-xi", "entropy-vs-n")


def fit_central_charge(points, method: str = "entropy-vs-xi") -> CentralChargeFit:
    """Fit S = (c/6) log2(L) + a, with L the correlation length or chain length.

    ``points`` is a sequence of ``(L, S)`` pairs.
    """
    if method not in CENTRAL_CHARGE_METHODS:
        raise ValueError(f"method must be one of {CENTRAL_CHARGE_METHODS}")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 4:
        raise UnfittableError(f"need at least 4 points, got {pts.shape[0]}")
    if np.any(pts[:, 0] <= 1):
        raise UnfittableError("length scales must exceed 1")
    lx = np.log2(pts[:, 0])
    if np.ptp(lx) == 0:
        raise UnfittableError("all length scales coincide")
    res = scipy.stats.linregress(lx, pts[:, 1])
    return CentralChargeFit(6 * float(res.slope), 6 * float(res.stderr),
                            float(res.intercept), method, int(pts.shape[0]))


def connected_correlator(state: MatrixProductState, axis_angle: float, site: int,
                         r_max: int) -> np.ndarray:
    """C(r) = <s_i s_{i+r}> - <s_i><s_{i+r}> of the perpendicular spin, r = 1..r_max."""
    op = perpendicular_operator(axis_angle)
    raw = state.correlations(site, op, r_max)
    local = np.array([state.expectation_one_site(site + r, op) for r in range(0, raw.size + 1)])
    return raw - local[0] * local[1:]


@dataclass(frozen=True)
class CorrelationFit:
    xi: float
    window: tuple
    residual: float
    reference_site: int


def correlation_fit(state: MatrixProductState, axis_angle: float = 0.0, window=None,
                    reference_site: int | None = None) -> CorrelationFit:
    """Exponential fit of the connected perpendicular correlator.

    The reference site defaults to ``N/2 - N/8``.  Without an explicit window
    the fit first uses r in [3, N/4], then refits once over
    [3, min(N/4, 8 xi)].
    """
    n = state.n_sites
    i = reference_site if reference_site is not None else max(1, n // 2 - n // 8)
    r_cap = max(3, n // 4)
    c = connected_correlator(state, axis_angle, i, r_cap)
    r = np.arange(1, c.size + 1)

    def fit(lo, hi):
        sel = (r >= lo) & (r <= hi)
        cs = c[sel]
        if cs.size < 3:
            raise UnfittableError(f"fewer than 3 correlator points in [{lo}, {hi}]")
        if np.any(cs <= 0):
            raise UnfittableError("connected correlator is not positive over the fit window")
        res = scipy.stats.linregress(r[sel], np.log(cs))
        if not res.slope < 0:
            raise UnfittableError("correlator does not decay")
        resid = np.log(cs) - (res.intercept + res.slope * r[sel])
        return -1.0 / res.slope, float(np.sqrt(np.mean(resid**2)))

    if window is not None:
        lo, hi = window
        xi, resid = fit(lo, hi)
    else:
        lo, hi = 3, r_cap
        xi, resid = fit(lo, hi)
        hi2 = int(min(r_cap, max(math.floor(8 * xi), lo + 2)))
        if hi2 != hi:
            hi = hi2
            xi, resid = fit(lo, hi)
    return CorrelationFit(float(xi), (lo, hi), resid, i)


def correlation_length(state: MatrixProductState, axis_angle: float = 0.0, window=None) -> float:
    """Correlation length in sites; raises :class:`UnfittableError`."""
    return correlation_fit(state, axis_angle, window).xi


# islands ------------------------------------------------------------------


@dataclass(frozen=True)
class IslandRecord:
    """A contiguous run of perpendicular magnetization.

    ``size`` counts the sites in the run; ``width`` is the distance between
    the linearly interpolated threshold crossings on either side.
    """

    center_index: int
    size: int
    amplitude: float
    sign: int
    start: int
    stop: int
    width: float


def field_zeros(values) -> list[float]:
    """Positions (1-based, interpolated) where the field vanishes or changes sign."""
    h = np.asarray(values, dtype=float)
    scale = np.max(np.abs(h)) if h.size else 0.0
    if scale == 0:
        return []
    zeros = [float(i + 1) for i in np.nonzero(np.abs(h) <= 1e-12 * scale)[0]]
    for i in range(h.size - 1):
        if h[i] * h[i + 1] < 0:
            zeros.append(i + 1 + h[i] / (h[i] - h[i + 1]))
    return sorted(zeros)


def detect_islands(record: ObservableRecord, amplitude_floor: float = 0.05) -> list[IslandRecord]:
    """Maximal runs with |m_perp| > floor that stay clear of the excluded edges."""
    if not amplitude_floor > 0:
        raise ValueError("amplitude floor must be positive")
    m = record.m_perp
    a = np.abs(m)
    n = m.size
    excl = record.boundary_exclusion
    zeros = field_zeros(record.field_values)
    islands = []
    i = 0
    while i < n:
        if a[i] <= amplitude_floor:
            i += 1
            continue
        j = i
        while j + 1 < n and a[j + 1] > amplitude_floor:
            j += 1
        start, stop = i + 1, j + 1  # 1-based inclusive
        i = j + 1
        if start <= excl or stop > n - excl:
            continue
        run = a[start - 1:stop]
        peak = start + int(np.argmax(run))
        mid = 0.5 * (start + stop)
        center = peak if not zeros else int(round(min(zeros, key=lambda z: abs(z - mid))))
        left = start - (a[start - 1] - amplitude_floor) / (a[start - 1] - a[start - 2])
        right = stop + (a[stop - 1] - amplitude_floor) / (a[stop - 1] - a[stop])
        sign = int(np.sign(m[peak - 1]))
        islands.append(IslandRecord(center, stop - start + 1, float(run.max()), sign,
                                    start, stop, float(right - left)))
    return islands


# Kibble-Zurek -------------------------------------------------------------


@dataclass(frozen=True)
class KZExponents:
    nu: object
    inverse_delta: object
    predicted_size_exponent: object
    predicted_amplitude_exponent: object


def kz_predictions(nu, inverse_delta) -> KZExponents:
    """Island exponents nu/(nu+1) and (1/delta)/(nu+1); exact for Fraction or int input."""
    if not nu > 0 or not inverse_delta > 0:
        raise ValueError("nu and 1/delta must be positive")
    if isinstance(nu, int) and not isinstance(nu, bool):
        nu = Fraction(nu)
    if isinstance(inverse_delta, int) and not isinstance(inverse_delta, bool):
        inverse_delta = Fraction(inverse_delta)
    return KZExponents(nu, inverse_delta, nu / (nu + 1), inverse_delta / (nu + 1))


# disorder averages --------------------------------------------------------


@dataclass(frozen=True)
class DisorderAverage:
    n_realizations: int
    abs_profile: np.ndarray
    abs_profile_stderr: np.ndarray
    signed_profile: np.ndarray
    signed_profile_stderr: np.ndarray
    bulk_abs: float
    bulk_abs_stderr: float
    bulk_signed: float
    bulk_signed_stderr: float

    def summary(self) -> dict:
        return {"n_realizations": self.n_realizations,
                "bulk_abs_m_perp": self.bulk_abs, "bulk_abs_m_perp_stderr": self.bulk_abs_stderr,
                "bulk_signed_m_perp": self.bulk_signed,
                "bulk_signed_m_perp_stderr": self.bulk_signed_stderr}


def _mean_stderr(values) -> tuple[float, float]:
    """Order-independent mean and standard error (exactly rounded sums).

    Values are shifted by their minimum first, so identical inputs give
    their common value and a standard error of exactly zero.
    """
    values = [float(v) for v in values]
    n = len(values)
    shift = min(values)
    d = [v - shift for v in values]
    dmean = math.fsum(d) / n
    if n < 2:
        return shift + dmean, math.nan
    var = math.fsum((x - dmean) ** 2 for x in d) / (n - 1)
    return shift + dmean, math.sqrt(var / n)


def disorder_average(records) -> DisorderAverage:
    """Average |m_perp| and signed m_perp over realizations, per site and in the bulk."""
    records = list(records)
    if not records:
        raise ValueError("no records to average")
    n = records[0].n_sites
    excl = records[0].boundary_exclusion
    for r in records:
        if r.n_sites != n:
            raise ValueError(f"records have different chain lengths ({r.n_sites} vs {n})")
        if r.boundary_exclusion != excl:
            raise ValueError("records use different boundary exclusions")
    per_site_abs = [_mean_stderr(abs(r.m_perp[i]) for r in records) for i in range(n)]
    per_site_sig = [_mean_stderr(r.m_perp[i] for r in records) for i in range(n)]
    bulk_abs = _mean_stderr(r.mean_abs_m_perp for r in records)
    bulk_sig = _mean_stderr(r.mean_m_perp for r in records)
    return DisorderAverage(len(records),
                           np.array([m for m, _ in per_site_abs]),
                           np.array([s for _, s in per_site_abs]),
                           np.array([m for m, _ in per_site_sig]),
                           np.array([s for _, s in per_site_sig]),
                           bulk_abs[0], bulk_abs[1], bulk_sig[0], bulk_sig[1])
