import numpy as np
import pytest

from latticequench.hamiltonian import RegionSpec
from latticequench.observables import (
    find_peaks_with_widths,
    fourier_branches,
    one_body_density,
    one_body_rdm,
    pair_terms,
    region_moments,
    response_scan,
    temporal_variance,
    time_averaged_variance,
    variance_series,
)
from latticequench.quench import QuenchProtocol, evolve, ground_state


@pytest.fixture(scope="module")
def quench(model):
    return evolve(model, QuenchProtocol(0.8, 0.58, 300.0, 0.1))


def test_rdm_trace_and_hermiticity(model):
    psi, _ = ground_state(model, 0.8)
    g = one_body_rdm(model, psi)
    assert g.shape == (9, 9)
    assert np.trace(g) == pytest.approx(4.0)
    np.testing.assert_allclose(g, g.T, atol=1e-12)
    assert np.linalg.eigvalsh(g).min() > -1e-12


def test_density_integrates_to_n(model, quench):
    psi, _ = ground_state(model, 0.8)
    rho = one_body_density(model, psi)
    assert rho.sum() * model.grid.weight == pytest.approx(4.0)
    np.testing.assert_allclose(rho, rho[::-1], atol=1e-10)
    many = one_body_density(model, quench.states(quench.times[:3]))
    np.testing.assert_allclose(many.sum(axis=1) * model.grid.weight, 4.0)


def test_region_moments_of_symmetric_state(model):
    psi, _ = ground_state(model, 0.8)
    mom = region_moments(model, psi)
    assert mom.number[0] == pytest.approx(4.0)
    assert abs(mom.mean[0]) < 1e-10
    x = model.grid.points
    rho = one_body_density(model, psi)
    var = np.sum(rho * x**2) * model.grid.weight / 4
    assert mom.variance[0] == pytest.approx(var, rel=1e-10)


def test_empty_region_gives_nan(model):
    psi, _ = ground_state(model, 0.8)
    # a sliver inside the wall where no orbital has weight
    sliver = RegionSpec(model.grid.x_max - 1e-9, None, "edge")
    mom = region_moments(model, psi, sliver)
    assert mom.number[0] < 1e-12 and np.isnan(mom.variance[0])


def test_core_equals_whole_for_three_sites(model, quench):
    np.testing.assert_allclose(variance_series(quench, RegionSpec.core(3)),
                               variance_series(quench), atol=1e-8)


def test_variance_series_matches_density(model, quench):
    s = variance_series(quench)
    t_idx = [0, 1234]
    rho = one_body_density(model, quench.states(quench.times[t_idx]))
    x = model.grid.points
    w = model.grid.weight
    direct = rho @ x**2 * w / 4 - (rho @ x * w / 4) ** 2
    np.testing.assert_allclose(s[t_idx], direct, rtol=1e-10)


def test_pair_terms_reconstruct_signal(quench):
    s = variance_series(quench)
    terms = pair_terms(quench)
    x2 = np.real(np.sum(quench.coefficients**2 * np.diag(
        quench.project(_x2_op(quench)))))
    t = quench.times[::500]
    recon = x2 + 2 * np.real(terms.z[None, :] * np.exp(-1j * np.outer(t, terms.omega))).sum(axis=1)
    # the mean position vanishes by parity, so sigma^2 = <x^2>/N
    np.testing.assert_allclose(recon, s[::500], rtol=1e-10)


def _x2_op(res):
    from latticequench.observables import region_operators
    return region_operators(res.model, None, res.parity).x2 / res.model.config.n_particles


def test_dual_forms_agree(quench):
    tv = temporal_variance(quench)
    av = time_averaged_variance(quench)
    assert tv.rel_error < 0.02 and av.rel_error < 0.02
    assert tv.spectral >= tv.spectral_finite - 1e-15
    assert tv.n_near_degenerate == av.n_near_degenerate


def test_grouping_merges_equal_frequencies(quench):
    terms = pair_terms(quench)
    w, z = terms.grouped()
    assert np.all(np.diff(w) > 0)
    assert np.sum(z) == pytest.approx(np.sum(terms.z))


def test_fourier_single_line_for_free_bosons(free_model):
    res = evolve(free_model, QuenchProtocol(0.8, 0.05, 300.0, 0.1))
    br = fourier_branches(res)
    assert len(br.peaks) == 1 and not br.unmatched
    p = br.peaks[0]
    assert p["offset_bins"] <= 1.0
    assert p["magnitude"] == pytest.approx(p["line_amplitude"], rel=0.35)


def test_find_peaks_lorentzians():
    x = np.linspace(0, 1, 2001)
    y = 1 / (1 + ((x - 0.3) / 0.01) ** 2) + 0.5 / (1 + ((x - 0.7) / 0.05) ** 2)
    pk = find_peaks_with_widths(x, y)
    assert [round(p["omega_sq"], 3) for p in pk] == [0.3, 0.7]
    assert pk[0]["half_width"] == pytest.approx(0.01, rel=0.02)
    assert pk[1]["half_width"] == pytest.approx(0.05, rel=0.1)
    assert find_peaks_with_widths(x[:2], y[:2]) == []


def test_response_scan_small(model):
    wf = np.array([0.6, 0.2, 0.4])
    r = response_scan(model, 0.8, wf, 100.0, 0.5, core=RegionSpec.core(3))
    np.testing.assert_array_equal(r.omega_f_sq, np.sort(wf))
    assert r.column("temporal").shape == (3,)
    assert r.core_temporal.shape == (3,)
    np.testing.assert_allclose(r.core_temporal, r.column("temporal"), rtol=1e-6)
    twin = response_scan(model, 0.8, wf, 100.0, 0.5, threads=2)
    np.testing.assert_array_equal(twin.column("averaged", "spectral"), r.column("averaged", "spectral"))
