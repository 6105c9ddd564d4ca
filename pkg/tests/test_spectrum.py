import numpy as np
import pytest

from latticequench.fock import format_label
from latticequench.spectrum import detect_crossings, dominant_label, scan_spectrum


@pytest.fixture(scope="module")
def scan(model):
    return scan_spectrum(model, np.linspace(0.4, 0.8, 41), 4)


def test_scan_shapes(scan):
    assert scan.energies.shape == (41, 4)
    assert scan.vectors.shape == (41, 255, 4)
    assert np.all(scan.gaps() > 0)
    assert scan.continuation.shape == (40, 4)


def test_threads_do_not_change_results(model, scan):
    par = scan_spectrum(model, np.linspace(0.4, 0.8, 41), 4, threads=3)
    np.testing.assert_array_equal(par.energies, scan.energies)


def test_rejects_bad_requests(model):
    with pytest.raises(ValueError):
        scan_spectrum(model, [], 3)
    with pytest.raises(ValueError):
        scan_spectrum(model, [0.1], 1000)


def test_ground_state_labels(model, scan):
    assert format_label(scan.labels[-1][0], 3) == "|0,4,0>"
    v = model.diagonalize(0.2, "even", 1).vectors[:, 0]
    lab, w = dominant_label(model, v)
    assert format_label(lab, 3) == "|1,2,1>" and 0.3 < w <= 1.0


def test_crossings_in_window(model, scan):
    found = detect_crossings(model, scan)
    by_pair = {(c.lower, round(c.omega_sq_c, 2)): c for c in found}
    wide = [c for c in found if c.involves_ground]
    assert {round(c.omega_sq_c, 2) for c in wide} == {0.47, 0.72}
    assert all(c.kind == "wide" for c in wide)
    c = by_pair[(1, 0.6)]
    assert c.kind == "narrow" and c.exchanged and c.resolved
    assert {format_label(l, 3) for l in c.labels_before} == {"|1,2,1>", "|0,4,0>"}
    assert c.labels_before == c.labels_after[::-1]
    d = c.as_dict(3)
    assert d["labels_before"][0].startswith("|") and isinstance(d["width"], float)


def test_width_is_gap_over_slope_difference(model, scan):
    for c in detect_crossings(model, scan):
        ds = abs(c.diabatic_slopes[1] - c.diabatic_slopes[0])
        assert c.width == pytest.approx(c.min_gap / ds)


def test_refined_gap_not_above_nearby_grid_gaps(model, scan):
    w = scan.omega_sq
    for c in detect_crossings(model, scan):
        near = np.abs(w - c.omega_sq_c) <= 0.0101
        assert c.min_gap <= scan.gaps()[near, c.lower].min() + 1e-12


def test_unexchanged_minima_can_be_listed(model, scan):
    all_min = detect_crossings(model, scan, include_unexchanged=True)
    assert len(all_min) >= len(detect_crossings(model, scan))
