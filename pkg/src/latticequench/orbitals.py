"""Band grouping and single-band Wannier states from the band-projected position operator."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dvr import Grid, OrbitalSet, PotentialSpec, single_particle_eigs

__all__ = [
    "BandOverlapError",
    "BandProjection",
    "classify_bands",
    "band_position_operator",
    "wannier_states",
    "lattice_wannier_basis",
    "write_wannier_csv",
]


class BandOverlapError(ValueError):
    """Adjacent energy groups overlap, so the band truncation is not meaningful."""


@dataclass(frozen=True)
class BandProjection:
    band: int
    rank: int
    position_matrix: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.position_matrix)


def classify_bands(orbitals: OrbitalSet, n_sites: int, n_bands: int) -> np.ndarray:
    """Band index for the lowest ``n_sites * n_bands`` orbitals.

    States are grouped by energy in consecutive blocks of ``n_sites``. Raises
    :class:`BandOverlapError` when the gap above a group is not larger than the
    spread of that group, i.e. when the group does not stand out as a band.
    """
    needed = n_sites * n_bands
    if orbitals.n_orbitals < needed:
        raise ValueError(f"need {needed} orbitals, got {orbitals.n_orbitals}")
    e = np.asarray(orbitals.energies[:needed])
    groups = e.reshape(n_bands, n_sites)
    spreads = groups[:, -1] - groups[:, 0]
    for b in range(n_bands - 1):
        gap = groups[b + 1, 0] - groups[b, -1]
        if gap <= spreads[b]:
            raise BandOverlapError(
                f"bands {b} and {b + 1} overlap: gap {gap:.3e} vs spread {spreads[b]:.3e}"
            )
    return np.repeat(np.arange(n_bands), n_sites)


def band_position_operator(orbitals: OrbitalSet, band: int, n_sites: int) -> BandProjection:
    """Matrix of x within the eigenstates of one band."""
    sl = slice(band * n_sites, (band + 1) * n_sites)
    block = orbitals.vectors[:, sl]
    x = orbitals.grid.points
    xmat = orbitals.grid.weight * block.T @ (x[:, None] * block)
    return BandProjection(band, n_sites, 0.5 * (xmat + xmat.T))


def _wannier_phase(vec: np.ndarray, x: np.ndarray, center: float, band: int) -> np.ndarray:
    # the band-th moment about the center is made positive; for band 0 this is
    # the integral of the orbital, for band 1 the dipole moment, and so on
    moment = np.sum(vec * (x - center) ** band)
    return -vec if moment < 0 else vec


def wannier_states(orbitals: OrbitalSet, n_bands: int, n_sites: int | None = None) -> OrbitalSet:
    """Site-localized orbitals, ordered by (band, site) left to right."""
    if n_sites is None:
        n_sites = orbitals.grid.n_sites
    classify_bands(orbitals, n_sites, n_bands)
    x = orbitals.grid.points
    vecs, energies, bands, sites, centers = [], [], [], [], []
    for b in range(n_bands):
        proj = band_position_operator(orbitals, b, n_sites)
        pos, rot = np.linalg.eigh(proj.position_matrix)
        block = orbitals.vectors[:, b * n_sites:(b + 1) * n_sites] @ rot
        e_band = orbitals.energies[b * n_sites:(b + 1) * n_sites]
        for s in range(n_sites):
            vecs.append(_wannier_phase(block[:, s], x, pos[s], b))
            energies.append(np.sum(rot[:, s] ** 2 * e_band))
            bands.append(b)
            sites.append(s)
            centers.append(pos[s])
    return OrbitalSet(
        orbitals.grid,
        np.array(energies),
        np.column_stack(vecs),
        basis_kind="wannier",
        band_of=np.array(bands),
        site_of=np.array(sites),
        centers=np.array(centers),
    )


def lattice_wannier_basis(
    grid: Grid, spec: PotentialSpec, n_bands: int, at_trap: bool = False
) -> OrbitalSet:
    """Wannier orbitals of the bare lattice (``at_trap=False``) or of ``spec`` itself."""
    build_spec = spec if at_trap else spec.with_omega_sq(0.0)
    eig = single_particle_eigs(grid, build_spec, spec.n_sites * n_bands + 1)
    return wannier_states(eig, n_bands, spec.n_sites)


def write_wannier_csv(orbitals: OrbitalSet, path: str | Path) -> None:
    """Columns: x, then one amplitude column per orbital named ``phi_b<band>_s<site>``."""
    names = [f"phi_b{b}_s{s}" for b, s in zip(orbitals.band_of, orbitals.site_of)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", *names])
        for x, row in zip(orbitals.grid.points, orbitals.vectors):
            w.writerow([f"{x:.17g}", *(f"{v:.17g}" for v in row)])
