"""Quick consistency checks against the oracles, and regeneration of derived constants."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["run_checks", "derived_constants"]


def _check(name, ok, detail):
    return {"name": name, "ok": bool(ok), "detail": detail}


def run_checks() -> list[dict]:
    from .bhm import BhmParams, assemble_bhm, bhm_basis
    from .dvr import PotentialSpec, build_grid, kinetic_matrix, single_particle_eigs
    from .fock import FockBasis
    from .hamiltonian import TwoBodyIntegrals, assemble_operator
    from .model import LatticeModel, ModelConfig
    from .oracles import dense_brute_force, dense_hamiltonian, two_site_two_boson
    from .quench import QuenchProtocol, evolve

    out = []
    grid = build_grid(300, 3)
    e = np.linalg.eigvalsh(kinetic_matrix(grid))
    err = abs(e[0] - 1 / 9) + abs(e[1] - 4 / 9)
    out.append(_check("particle-in-box levels", err < 1e-8, f"|dE|={err:.1e}"))

    ho = single_particle_eigs(build_grid(600, 9), PotentialSpec(0.0, 4.0, 9, 0.0), 4)
    err = np.max(np.abs(ho.energies - (2 * np.arange(4) + 1)))
    out.append(_check("harmonic-oscillator limit", err < 1e-4, f"max |dE|={err:.1e}"))

    sizes = (len(FockBasis(4, 9)), len(FockBasis(5, 15)))
    out.append(_check("Fock basis sizes", sizes == (495, 11628), f"{sizes}"))

    cfg = ModelConfig()
    model = LatticeModel(cfg)
    full = np.sort(np.concatenate([model.diagonalize(0.8, p).energies for p in ("even", "odd")]))
    ref = dense_brute_force(cfg, 0.8)
    err = np.max(np.abs(full - ref))
    out.append(_check("dense oracle vs sparse CI (N=4, M=9, g=1)", err < 1e-9, f"max |dE|={err:.1e}"))

    J, U, eps = 0.037, 0.41, 0.13
    closed = two_site_two_boson(J, U, eps)
    h = np.array([[0.0, -J], [-J, eps]])
    W = np.zeros((2, 2, 2, 2))
    W[0, 0, 0, 0] = W[1, 1, 1, 1] = U
    sparse_e = np.linalg.eigvalsh(assemble_operator(FockBasis(2, 2), h, TwoBodyIntegrals(W, 1.0)).toarray())
    dense_e = np.linalg.eigvalsh(dense_hamiltonian(h, W, 2)[0])
    err = max(np.max(np.abs(sparse_e - closed)), np.max(np.abs(dense_e - closed)))
    out.append(_check("two-site closed form", err < 1e-12, f"max |dE|={err:.1e}"))

    p = BhmParams(J, U, 0.0, 0.0, 3)
    b = bhm_basis(2, 3)
    e_bhm = np.linalg.eigvalsh(assemble_bhm(b, p).toarray())
    h3 = -J * (np.eye(3, k=1) + np.eye(3, k=-1))
    W3 = np.zeros((3,) * 4)
    for s in range(3):
        W3[s, s, s, s] = U
    e_ref = np.linalg.eigvalsh(dense_hamiltonian(h3, W3, 2)[0])
    err = np.max(np.abs(e_bhm - e_ref))
    out.append(_check("BHM vs dense oracle (N=2, S=3)", err < 1e-12, f"max |dE|={err:.1e}"))

    free = LatticeModel(ModelConfig(g=0.0))
    ob = free.one_body
    e1 = np.linalg.eigvalsh(ob.lattice + 0.8 * ob.trap)[0]
    e_ci = free.diagonalize(0.8, "even", 1).energies[0]
    out.append(_check("g=0 ground state = N x lowest orbital level", abs(e_ci - 4 * e1) < 1e-9,
                      f"|dE|={abs(e_ci - 4 * e1):.1e}"))
    e_grid = single_particle_eigs(free.grid, free.config.spec(0.8), 1).energies[0]
    trunc = abs(e1 - e_grid)
    out.append(_check("orbital truncation at omega^2=0.8", trunc < 1e-3, f"|dE|={trunc:.1e} per particle"))

    res = evolve(model, QuenchProtocol(0.8, 0.5, 50.0, 0.5))
    dn = np.max(np.abs(res.norm() - 1))
    de = np.ptp(res.energy()) / abs(res.energies[0])
    out.append(_check("quench norm and energy conservation", dn < 1e-10 and de < 1e-10,
                      f"norm {dn:.1e}, energy {de:.1e}"))
    return out


def derived_constants() -> dict:
    """Values that are computed rather than quoted; regenerated on demand."""
    from .bhm import BhmParams, assemble_bhm, bhm_basis, diagonal_crossing, extract_params
    from .model import LatticeModel, ModelConfig
    from .spectrum import detect_crossings, scan_spectrum

    model = LatticeModel(ModelConfig())
    par = model.basis.parity
    p = extract_params(model.one_body, model.two_body, 0.0, 3)
    unit = BhmParams(1.0, 0.0, 0.0, 0.0, 3)
    b = bhm_basis(4, 3)
    h = assemble_bhm(b, unit).toarray()
    i121 = b.index((1, 2, 1))
    sym = np.zeros(len(b))
    sym[b.index((1, 3, 0))] = sym[b.index((0, 3, 1))] = math.sqrt(0.5)
    coupling = float(h[i121] @ sym)
    scan = scan_spectrum(model, np.linspace(0, 0.8, 81), 9)
    cr = detect_crossings(model, scan)
    return {
        "basis_size": len(model.basis),
        "self_symmetric_states": int(len(par.self_symmetric())),
        "even_block": model.block_dimension("even"),
        "odd_block": model.block_dimension("odd"),
        "U": p.U, "J": p.J, "U_over_J": p.u_over_j, "eps_per_omega_sq": p.eps_per_omega_sq,
        "coupling_121_130S_over_J": coupling,
        "diag_crossing_121_130_over_U": diagonal_crossing((1, 2, 1), (1, 3, 0), p) / p.U,
        "diag_crossing_040_130_over_U": diagonal_crossing((0, 4, 0), (1, 3, 0), p) / p.U,
        "crossings_even_g1": [
            {"omega_sq_c": c.omega_sq_c, "curves": [c.lower, c.upper], "min_gap": c.min_gap,
             "width": c.width, "kind": c.kind} for c in cr
        ],
    }
