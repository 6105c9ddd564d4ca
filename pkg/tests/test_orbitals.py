import numpy as np
import pytest

from latticequench.dvr import PotentialSpec, build_grid, single_particle_eigs
from latticequench.orbitals import (
    BandOverlapError,
    band_position_operator,
    classify_bands,
    lattice_wannier_basis,
    write_wannier_csv,
)


@pytest.fixture(scope="module")
def wannier():
    return lattice_wannier_basis(build_grid(300, 3), PotentialSpec(9.0, 0.0, 3), 3)


def test_three_bands_of_three_below_nine():
    eig = single_particle_eigs(build_grid(300, 3), PotentialSpec(9.0, 0.0, 3), 12)
    assert np.sum(eig.energies < 9.0) >= 6
    bands = classify_bands(eig, 3, 3)
    np.testing.assert_array_equal(bands, np.repeat([0, 1, 2], 3))


def test_flat_potential_has_no_bands():
    eig = single_particle_eigs(build_grid(200, 3), PotentialSpec(0.0, 0.0, 3), 10)
    with pytest.raises(BandOverlapError):
        classify_bands(eig, 3, 3)


def test_wannier_orthonormal(wannier):
    np.testing.assert_allclose(wannier.overlap(), np.eye(9), atol=1e-10)


def test_centres_ordered_and_symmetric(wannier):
    for b in range(3):
        c = wannier.centers[wannier.band_of == b]
        assert np.all(np.diff(c) > 0)
        np.testing.assert_allclose(c, -c[::-1], atol=1e-10)
    # lowest band sits on the minima; the walls pull higher-band outer orbitals inwards
    np.testing.assert_allclose(wannier.centers[:3], [-np.pi, 0.0, np.pi], atol=0.05)


def test_position_operator_is_diagonal_in_wannier_band(wannier):
    x = wannier.grid.points
    for b in range(3):
        sel = wannier.vectors[:, wannier.band_of == b]
        xm = wannier.grid.weight * sel.T @ (x[:, None] * sel)
        off = xm - np.diag(np.diag(xm))
        assert np.abs(off).max() < 1e-10


def test_reflection_relation(wannier):
    # phi_{b,s}(-x) = (-1)^b phi_{b,S-1-s}(x)
    v = wannier.vectors
    for p in range(9):
        b, s = wannier.band_of[p], wannier.site_of[p]
        q = b * 3 + (2 - s)
        np.testing.assert_allclose(v[::-1, p], (-1) ** b * v[:, q], atol=1e-9)


def test_phase_rule(wannier):
    x = wannier.grid.points
    for p in range(9):
        b, c = wannier.band_of[p], wannier.centers[p]
        assert np.sum(wannier.vectors[:, p] * (x - c) ** b) > 0


def test_band_projection_rank():
    eig = single_particle_eigs(build_grid(300, 3), PotentialSpec(9.0, 0.0, 3), 9)
    proj = band_position_operator(eig, 1, 3)
    assert proj.rank == 3
    assert proj.eigenvalues().shape == (3,)


def test_csv_dump(tmp_path, wannier):
    path = tmp_path / "w.csv"
    write_wannier_csv(wannier, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("x,phi_b0_s0")
    assert len(lines) == 301
