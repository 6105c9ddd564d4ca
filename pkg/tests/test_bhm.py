import math

import numpy as np
import pytest

from latticequench.bhm import (
    BhmParams,
    assemble_bhm,
    bhm_basis,
    diagonal_crossing,
    diagonal_energy,
    extract_params,
    write_bhm_table,
)
from latticequench.model import LatticeModel, ModelConfig
from latticequench.oracles import dense_hamiltonian


@pytest.fixture(scope="module")
def params(model):
    return extract_params(model.one_body, model.two_body, 0.0, 3)


def test_extracted_values_are_consistent(model, params):
    assert params.J > 0 and params.U > 0
    assert params.U == pytest.approx(model.two_body.W[1, 1, 1, 1])
    assert params.u_over_j == pytest.approx(params.U / params.J)
    # trap part of eps: <x^2/4> difference between neighbouring sites
    t = model.one_body.trap
    assert params.eps_per_omega_sq == pytest.approx(t[0, 0] - t[1, 1], rel=1e-10)
    p8 = extract_params(model.one_body, model.two_body, 0.8, 3)
    assert p8.eps == pytest.approx(params.eps + 0.8 * params.eps_per_omega_sq, rel=1e-10)


def test_coupling_121_to_130s(params):
    b = bhm_basis(4, 3)
    h = assemble_bhm(b, BhmParams(1.0, 0.0, 0.0, 0.0, 3)).toarray()
    sym = np.zeros(len(b))
    sym[b.index((1, 3, 0))] = sym[b.index((0, 3, 1))] = math.sqrt(0.5)
    assert h[b.index((1, 2, 1))] @ sym == pytest.approx(-math.sqrt(6.0))


def test_diagonal_crossings(params):
    assert diagonal_crossing((1, 2, 1), (1, 3, 0), params) == pytest.approx(2 * params.U)
    assert diagonal_crossing((0, 4, 0), (1, 3, 0), params) == pytest.approx(3 * params.U)
    with pytest.raises(ValueError):
        diagonal_crossing((1, 2, 1), (2, 2, 0), params)
    assert diagonal_energy((0, 4, 0), params) == pytest.approx(6 * params.U)


def test_bhm_vs_dense_oracle():
    p = BhmParams(0.05, 0.6, 0.1, 2.0, 3)
    b = bhm_basis(3, 3)
    e = np.linalg.eigvalsh(assemble_bhm(b, p).toarray())
    h = np.diag([p.eps, 0.0, p.eps]) + p.e0 * np.eye(3) - p.J * (np.eye(3, k=1) + np.eye(3, k=-1))
    W = np.zeros((3,) * 4)
    for s in range(3):
        W[s, s, s, s] = p.U
    ref = np.linalg.eigvalsh(dense_hamiltonian(h, W, 3)[0])
    np.testing.assert_allclose(e, ref, atol=1e-12)


def test_bhm_tracks_ci_low_spectrum(model):
    p = extract_params(model.one_body, model.two_body, 0.8, 3)
    b = bhm_basis(4, 3)
    pe, _ = b.parity.block_projectors()
    h = assemble_bhm(b, p).matrix
    e_bhm = np.linalg.eigvalsh((pe.T @ h @ pe).toarray())[:6]
    e_ci = model.diagonalize(0.8, "even", 6).energies
    # band-0 physics: agreement up to interband interaction corrections
    assert np.max(np.abs(e_bhm - e_ci)) < 0.15


def test_assemble_checks_basis():
    with pytest.raises(ValueError):
        assemble_bhm(bhm_basis(2, 5), BhmParams(1.0, 1.0, 0.0, 0.0, 3))


def test_table(tmp_path, params):
    path = tmp_path / "bhm.csv"
    write_bhm_table([params], path)
    head, row = path.read_text().splitlines()
    assert head == "omega_sq,J,U,eps,e0,eps_per_omega_sq"
    assert float(row.split(",")[2]) == params.U
