"""Lowest-band Bose-Hubbard reduction of the continuum model.

    H = -J sum_<ij> (a_i^+ a_j + h.c.) + U/2 sum_i n_i (n_i - 1)
        + eps sum_i (i - c)^2 n_i + e0 N

with c the centre site. Parameters come from the band-0 Wannier integrals.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .fock import FockBasis
from .hamiltonian import ManyBodyOperator, OneBodyIntegrals, TwoBodyIntegrals, assemble_one_body

__all__ = [
    "BhmParams",
    "extract_params",
    "assemble_bhm",
    "bhm_basis",
    "diagonal_energy",
    "diagonal_crossing",
    "write_bhm_table",
]


@dataclass(frozen=True)
class BhmParams:
    J: float
    U: float
    eps: float
    e0: float
    n_sites: int
    eps_per_omega_sq: float = np.nan
    omega_sq: float = 0.0

    @property
    def center(self) -> int:
        return self.n_sites // 2

    @property
    def u_over_j(self) -> float:
        return self.U / self.J


def extract_params(one_body: OneBodyIntegrals, two_body: TwoBodyIntegrals, omega_sq: float | None = None,
                   n_sites: int | None = None, asym_tol: float = 1e-8) -> BhmParams:
    """J, U, eps and e0 from band-0 Wannier integrals (orbitals 0..S-1).

    ``eps`` is the full offset of the sites next to the centre at ``omega_sq``,
    including the hard-wall contribution, and ``eps_per_omega_sq`` its trap part.
    """
    if omega_sq is None:
        omega_sq = one_body.omega_sq
    if n_sites is None:
        n_sites = _guess_sites(one_body.lattice.shape[0])
    c = n_sites // 2
    h = one_body.lattice + omega_sq * one_body.trap
    if n_sites == 1:
        J = 0.0
    else:
        left, right = -h[c, c - 1], -h[c, c + 1]
        if abs(left - right) > asym_tol:
            warnings.warn(f"hopping asymmetry {abs(left - right):.2e} (broken parity?)", stacklevel=2)
        J = 0.5 * (left + right)
    U = float(two_body.W[c, c, c, c])
    if n_sites > 1:
        nb = [c - 1, c + 1]
        eps = float(np.mean([h[s, s] for s in nb]) - h[c, c])
        slope = float(np.mean([one_body.trap[s, s] for s in nb]) - one_body.trap[c, c])
    else:
        eps, slope = 0.0, np.nan
    return BhmParams(float(J), U, eps, float(one_body.lattice[c, c]), n_sites, slope, float(omega_sq))


def _guess_sites(n_orbitals):
    # n_sites must be supplied for multi-band sets; a single band is the fallback
    return n_orbitals


def bhm_basis(n_particles: int, n_sites: int) -> FockBasis:
    return FockBasis(n_particles, n_sites, n_sites)


def assemble_bhm(basis: FockBasis, params: BhmParams) -> ManyBodyOperator:
    """Sparse BHM matrix over a single-band basis."""
    if basis.n_bands != 1 or basis.n_sites != params.n_sites:
        raise ValueError("BHM needs a lowest-band basis with matching site count")
    s = params.n_sites
    c = params.center
    h = np.diag(params.eps * (np.arange(s) - c) ** 2 + params.e0)
    h -= params.J * (np.eye(s, k=1) + np.eye(s, k=-1))
    mat = assemble_one_body(basis, h)
    occ = basis.occupations
    inter = 0.5 * params.U * np.sum(occ * (occ - 1), axis=1)
    from scipy import sparse

    mat = (mat + sparse.diags(inter)).tocsr()
    return ManyBodyOperator(0.5 * (mat + mat.T), basis)


def _diag_parts(occupations, n_sites):
    n = np.asarray(occupations, dtype=float)[:n_sites]
    c = n_sites // 2
    return 0.5 * np.sum(n * (n - 1)), float(np.sum((np.arange(n_sites) - c) ** 2 * n))


def diagonal_energy(occupations, params: BhmParams, eps: float | None = None) -> float:
    """J = 0 energy of a lowest-band number state (without e0 N)."""
    inter, slope = _diag_parts(occupations, params.n_sites)
    return params.U * inter + (params.eps if eps is None else eps) * slope


def diagonal_crossing(state_a, state_b, params: BhmParams) -> float:
    """Offset eps* at which the J = 0 energies of two number states coincide."""
    ia, sa = _diag_parts(state_a, params.n_sites)
    ib, sb = _diag_parts(state_b, params.n_sites)
    if sa == sb:
        raise ValueError("no crossing: the two diagonal energies are parallel in eps")
    return params.U * (ib - ia) / (sa - sb)


def write_bhm_table(rows: list[BhmParams], path: str | Path) -> None:
    """CSV with one row per extraction: omega_sq, J, U, eps, e0, eps_per_omega_sq."""
    cols = ["omega_sq", "J", "U", "eps", "e0", "eps_per_omega_sq"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for p in rows:
            d = asdict(p)
            w.writerow([f"{d[k]:.17g}" for k in cols])
