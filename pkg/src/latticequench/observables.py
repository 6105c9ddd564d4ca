"""Density, region moments, long-time variance measures and Fourier branches.

Whole-line identities used for the spectral forms, with z_ij = c_i* X_ij c_j
and X = x^2_L / N in the post-quench eigenbasis:

    time average - sigma^2(0)  ->  -2 sum_{i>j} Re z_ij
    temporal variance          ->   2 sum_w |sum_{(i,j): E_i-E_j=w} z_ij|^2

Pairs closer in energy than 2 pi / T do not dephase within the window and
are accounted for separately in finite-T comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .hamiltonian import RegionSpec

__all__ = [
    "RegionMoments",
    "VarianceForms",
    "BranchSpectrum",
    "ResponseScan",
    "one_body_density",
    "one_body_rdm",
    "region_operators",
    "region_moments",
    "variance_series",
    "pair_terms",
    "time_averaged_variance",
    "temporal_variance",
    "fourier_branches",
    "response_scan",
    "find_peaks_with_widths",
]

MISSING_THRESHOLD = 1e-12
DEGENERATE_TOL = 1e-9


# -- densities ----------------------------------------------------------------

def one_body_rdm(model, states: np.ndarray, parity: str = "even") -> np.ndarray:
    """gamma_pq = <a_p^+ a_q> for block state(s); shape (M, M) or (n, M, M)."""
    states = np.asarray(states)
    single = states.ndim == 1
    fock = model.to_fock(states.reshape(states.shape[0], -1), parity)
    ann = _annihilation(model)
    m = model.basis.n_orbitals
    phi = (ann @ fock).T.reshape(fock.shape[1], -1, m)
    gamma = np.einsum("nkp,nkq->npq", phi.conj(), phi)
    gamma = np.real_if_close(gamma)
    return gamma[0] if single else gamma


def _annihilation(model):
    cache = model.__dict__.setdefault("_annihilation_cache", {})
    if "a" not in cache:
        cache["a"] = model.basis.annihilation_matrix()
    return cache["a"]


def one_body_density(model, states: np.ndarray, parity: str = "even") -> np.ndarray:
    """rho(x_j) on the grid; integrates to N with the grid weight."""
    gamma = one_body_rdm(model, states, parity)
    phi = model.orbitals.vectors
    if gamma.ndim == 2:
        return np.real(np.einsum("jp,pq,jq->j", phi, gamma, phi))
    return np.real(np.einsum("jp,npq,jq->nj", phi, gamma, phi))


# -- region moments -----------------------------------------------------------

@dataclass(frozen=True)
class RegionOperators:
    region: RegionSpec
    number: object
    x: object
    x2: object


def region_operators(model, region: RegionSpec | None = None, parity: str = "even") -> RegionOperators:
    """Block matrices of N_D, x_D and x^2_D."""
    region = region or RegionSpec.whole()
    x = model.grid.points
    return RegionOperators(
        region,
        model.one_body_operator(np.ones_like(x), region, parity),
        model.one_body_operator(x, region, parity),
        model.one_body_operator(x**2, region, parity),
    )


@dataclass(frozen=True)
class RegionMoments:
    """Particle number, mean position and position variance in a region.

    ``mean`` and ``variance`` are NaN wherever the region is empty.
    """

    region: RegionSpec
    number: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    times: np.ndarray | None = None


def _moments(region, n, x1, x2, times=None):
    n = np.atleast_1d(np.asarray(n, dtype=float))
    ok = n >= MISSING_THRESHOLD
    safe = np.where(ok, n, 1.0)
    mean = np.where(ok, x1 / safe, np.nan)
    var = np.where(ok, x2 / safe - mean**2, np.nan)
    return RegionMoments(region, n, mean, var, times)


def region_moments(model, state_or_result, region: RegionSpec | None = None,
                   parity: str = "even", times=None) -> RegionMoments:
    """Moments for a block state vector or for every sample of a QuenchResult."""
    ops = region_operators(model, region, parity)
    if hasattr(state_or_result, "amplitudes"):
        res = state_or_result
        vals = res.expectations([res.project(op) for op in (ops.number, ops.x, ops.x2)], times)
        t = res.times if times is None else np.atleast_1d(times)
        return _moments(ops.region, *vals, times=t)
    psi = np.asarray(state_or_result, dtype=float)
    vals = [float(psi @ (op @ psi)) for op in (ops.number, ops.x, ops.x2)]
    return _moments(ops.region, *vals)


def variance_series(result, region: RegionSpec | None = None, times=None) -> np.ndarray:
    """sigma^2_{x,D}(t) sampled at the result's times."""
    return region_moments(result.model, result, region, result.parity, times).variance


# -- long-time forms ----------------------------------------------------------

def _x2_eig(result) -> np.ndarray:
    cache = result.__dict__.setdefault("_x2_eig", None)
    if cache is None:
        ops = region_operators(result.model, RegionSpec.whole(), result.parity)
        cache = result.project(ops.x2) / result.model.config.n_particles
        result.__dict__["_x2_eig"] = cache
    return cache


@dataclass(frozen=True)
class PairTerms:
    """z_ij = c_i X_ij c_j for i > j with frequencies E_i - E_j."""

    omega: np.ndarray
    z: np.ndarray

    def grouped(self, tol: float = DEGENERATE_TOL):
        """Distinct frequencies and summed amplitudes (frequencies equal within ``tol``)."""
        if self.omega.size == 0:
            return self.omega, self.z
        order = np.argsort(self.omega, kind="stable")
        w, z = self.omega[order], self.z[order]
        starts = np.concatenate([[0], np.flatnonzero(np.diff(w) > tol) + 1])
        return w[starts], np.add.reduceat(z, starts)


def pair_terms(result) -> PairTerms:
    x = _x2_eig(result)
    c = result.coefficients
    i, j = np.tril_indices(len(c), -1)
    return PairTerms(result.energies[i] - result.energies[j], c[i] * x[i, j] * c[j])


@dataclass(frozen=True)
class VarianceForms:
    """Finite-T integral and T -> infinity spectral values of one measure.

    ``spectral_finite`` drops the pairs with |E_i - E_j| < 2 pi / T, whose
    contribution is listed in ``near_degenerate``; ``rel_error`` compares it
    with ``integral`` relative to ``scale``.
    """

    integral: float
    spectral: float
    spectral_finite: float
    near_degenerate: float
    scale: float
    rel_error: float
    converged: bool = True
    drift: float = 0.0
    n_near_degenerate: int = 0


def _running_mean(t, y):
    acc = np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))])
    with np.errstate(invalid="ignore", divide="ignore"):
        out = acc / t
    out[0] = y[0]
    return out


def _split_pairs(result):
    terms = pair_terms(result)
    t_final = result.times[-1]
    cut = 2 * np.pi / t_final
    nd = (terms.omega < cut) & (terms.omega >= DEGENERATE_TOL)
    exact = terms.omega < DEGENERATE_TOL
    return terms, nd, exact


def time_averaged_variance(result, sigma2: np.ndarray | None = None,
                           drift_tol: float = 0.02) -> VarianceForms:
    """Time-averaged whole-line variance minus its initial value, both forms."""
    t = result.times
    s = variance_series(result) if sigma2 is None else sigma2
    integral = trapezoid(s, t) / t[-1] - s[0]
    terms, nd, exact = _split_pairs(result)
    dyn = ~exact
    spectral = -2.0 * np.sum(terms.z[dyn].real)
    finite = -2.0 * np.sum(terms.z[dyn & ~nd].real)
    near = -2.0 * np.sum(terms.z[nd].real)
    scale = max(2.0 * np.sum(np.abs(terms.z[dyn])), 1e-300)
    run = _running_mean(t, s) - s[0]
    tail = run[t >= 0.8 * t[-1]]
    drift = float(np.ptp(tail)) / scale if tail.size else 0.0
    return VarianceForms(float(integral), float(spectral), float(finite), float(near), float(scale),
                         float(abs(integral - finite) / scale), drift <= drift_tol, drift, int(nd.sum()))


def temporal_variance(result, sigma2: np.ndarray | None = None,
                      drift_tol: float = 0.02) -> VarianceForms:
    """Delta_T of the whole-line variance, time integral and grouped spectral sum."""
    t = result.times
    s = variance_series(result) if sigma2 is None else sigma2
    mean = trapezoid(s, t) / t[-1]
    integral = trapezoid((s - mean) ** 2, t) / t[-1]
    terms, nd, exact = _split_pairs(result)
    dyn = ~exact
    w_all, a_all = PairTerms(terms.omega[dyn], terms.z[dyn]).grouped()
    spectral = 2.0 * np.sum(np.abs(a_all) ** 2)
    keep = dyn & ~nd
    _, a_fin = PairTerms(terms.omega[keep], terms.z[keep]).grouped()
    finite = 2.0 * np.sum(np.abs(a_fin) ** 2)
    near = spectral - finite
    scale = max(spectral, 1e-300)
    # drift of the running temporal variance over the last fifth of the window
    m = t >= 0.8 * t[-1]
    run = np.array([trapezoid((s[: k + 1] - mean) ** 2, t[: k + 1]) / t[k] for k in np.flatnonzero(m)[::10]])
    drift = float(np.ptp(run) / scale) if run.size > 1 else 0.0
    return VarianceForms(float(integral), float(spectral), float(finite), float(near), float(scale),
                         float(abs(integral - finite) / scale), drift <= drift_tol, drift, int(nd.sum()))


# -- Fourier branches ---------------------------------------------------------

@dataclass
class BranchSpectrum:
    """DFT magnitude of the mean-subtracted variance and predicted lines.

    ``lines`` holds (frequency, amplitude) with amplitude 2|sum z| per distinct
    frequency; ``peaks`` pairs each significant DFT peak with the nearest line.
    """

    frequency: np.ndarray
    magnitude: np.ndarray
    lines: np.ndarray
    bin_width: float
    peaks: list = field(default_factory=list)
    unmatched: list = field(default_factory=list)

    def significant_lines(self, rel: float = 0.01) -> np.ndarray:
        if self.lines.size == 0:
            return self.lines
        amp = self.lines[:, 1]
        return self.lines[amp > rel * amp.max()]


def _local_maxima(y):
    if y.size < 3:
        return np.array([], dtype=int)
    inner = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
    return inner


def fourier_branches(result, sigma2: np.ndarray | None = None, peak_rel: float = 0.05,
                     line_rel: float = 0.01) -> BranchSpectrum:
    """Rectangular-window DFT of sigma^2_{x,L}(t) with peak-to-line pairing."""
    t = result.times
    s = variance_series(result) if sigma2 is None else sigma2
    n = len(s)
    dt = t[1] - t[0]
    spec = np.fft.rfft(s - s.mean())
    freq = 2 * np.pi * np.fft.rfftfreq(n, dt)
    mag = 2 * np.abs(spec) / n
    terms = pair_terms(result)
    dyn = terms.omega >= DEGENERATE_TOL
    w, a = PairTerms(terms.omega[dyn], terms.z[dyn]).grouped()
    lines = np.column_stack([w, 2 * np.abs(a)]) if w.size else np.zeros((0, 2))
    out = BranchSpectrum(freq, mag, lines, 2 * np.pi / (n * dt))
    strong = out.significant_lines(line_rel)
    if mag.size and mag.max() > 0:
        for k in _local_maxima(mag):
            if mag[k] < peak_rel * mag.max():
                continue
            if strong.size:
                d = np.abs(strong[:, 0] - freq[k])
                j = int(np.argmin(d))
                rec = {"frequency": float(freq[k]), "magnitude": float(mag[k]),
                       "line": float(strong[j, 0]), "line_amplitude": float(strong[j, 1]),
                       "offset_bins": float(d[j] / out.bin_width)}
            else:
                rec = {"frequency": float(freq[k]), "magnitude": float(mag[k]),
                       "line": None, "line_amplitude": None, "offset_bins": np.inf}
            out.peaks.append(rec)
            if rec["offset_bins"] > 1.0:
                out.unmatched.append(rec)
    return out


# -- response scans -----------------------------------------------------------

@dataclass
class ResponseScan:
    """Long-time measures as a function of the post-quench curvature."""

    omega_i_sq: float
    omega_f_sq: np.ndarray
    temporal: list
    averaged: list
    core_temporal: np.ndarray | None = None

    def column(self, measure: str = "temporal", form: str = "integral") -> np.ndarray:
        data = self.temporal if measure == "temporal" else self.averaged
        return np.array([getattr(v, form) for v in data])


def response_scan(model, omega_i_sq: float, omega_f_sq, t_final: float = 300.0,
                  dt_sample: float = 0.1, core: RegionSpec | None = None,
                  threads: int = 1, prune: float = 1e-14) -> ResponseScan:
    """Quench from the ground state at ``omega_i_sq`` to every ``omega_f_sq``.

    With ``core`` set, the temporal variance of sigma^2 restricted to that
    region (time-integral form only) is recorded as well. Eigenstates with
    weight below ``prune`` are dropped before sampling.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .quench import QuenchProtocol, evolve, ground_state

    omega_f_sq = np.sort(np.asarray(omega_f_sq, dtype=float))
    psi0, _ = ground_state(model, omega_i_sq)

    def one(wf):
        res = evolve(model, QuenchProtocol(omega_i_sq, wf, t_final, dt_sample), psi0).pruned(prune)
        s = variance_series(res)
        tv, av = temporal_variance(res, s), time_averaged_variance(res, s)
        ct = np.nan
        if core is not None:
            sc = variance_series(res, core)
            t = res.times
            m = trapezoid(sc, t) / t[-1]
            ct = trapezoid((sc - m) ** 2, t) / t[-1]
        return tv, av, ct

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, omega_f_sq))
    else:
        rows = [one(wf) for wf in omega_f_sq]
    core_t = np.array([r[2] for r in rows]) if core is not None else None
    return ResponseScan(omega_i_sq, omega_f_sq, [r[0] for r in rows], [r[1] for r in rows], core_t)


def find_peaks_with_widths(x: np.ndarray, y: np.ndarray, rel_height: float = 0.0):
    """Interior local maxima of y(x) with half widths at half maximum.

    The half level is taken relative to zero; each side stops at the first
    crossing of the half level or at the neighbouring minimum, whichever
    comes first, and is linearly interpolated.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    peaks = []
    if y.size < 3:
        return peaks
    top = np.nanmax(y)
    for k in _local_maxima(y):
        if y[k] < rel_height * top:
            continue
        half = 0.5 * y[k]
        edges = []
        for step in (-1, 1):
            i = k
            while 0 <= i + step < len(y) and y[i + step] > half and y[i + step] <= y[i]:
                i += step
            j = i + step
            if 0 <= j < len(y) and y[j] <= half:
                frac = (y[i] - half) / (y[i] - y[j])
                edges.append(x[i] + frac * (x[j] - x[i]))
            else:
                edges.append(x[i])
        peaks.append({"omega_sq": float(x[k]), "height": float(y[k]),
                      "half_width": float(0.5 * (edges[1] - edges[0])),
                      "left": float(edges[0]), "right": float(edges[1])})
    return peaks
