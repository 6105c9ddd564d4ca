"""Sine-DVR grid and single-particle solver for a lattice with a harmonic trap.

Units: energies in recoil energies E_R, lengths in 1/k, times in hbar/E_R.
The single-particle Hamiltonian reads

    h = -d^2/dx^2 + v0 sin^2(x) + (omega_sq / 4) x^2

on the hard-wall box (-S pi/2, +S pi/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

__all__ = [
    "Grid",
    "PotentialSpec",
    "OrbitalSet",
    "EigenSolverError",
    "build_grid",
    "kinetic_matrix",
    "potential_on_grid",
    "single_particle_hamiltonian",
    "single_particle_eigs",
    "fix_phase",
]

DEGENERACY_GAP = 1e-9


class EigenSolverError(RuntimeError):
    """Raised when a dense symmetric diagonalization fails."""


@dataclass(frozen=True)
class Grid:
    """Interior points of a sine-DVR on ``(x_min, x_max)``."""

    n_points: int
    x_min: float
    x_max: float
    points: np.ndarray = field(repr=False)
    weight: float

    @property
    def n_sites(self) -> int:
        return int(round((self.x_max - self.x_min) / np.pi))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def reflection_index(self) -> np.ndarray:
        """Index map of x -> -x (the grid is symmetric about the origin)."""
        return np.arange(self.n_points)[::-1]


@dataclass(frozen=True)
class PotentialSpec:
    """Lattice depth, trap curvature, number of sites and contact coupling."""

    v0: float = 9.0
    omega_sq: float = 0.0
    n_sites: int = 3
    g: float = 1.0

    def __post_init__(self):
        if self.v0 < 0 or self.omega_sq < 0 or self.g < 0:
            raise ValueError("v0, omega_sq and g must be non-negative")
        if self.n_sites < 1 or self.n_sites % 2 == 0:
            raise ValueError(f"n_sites must be a positive odd integer, got {self.n_sites}")

    def with_omega_sq(self, omega_sq: float) -> "PotentialSpec":
        return PotentialSpec(self.v0, omega_sq, self.n_sites, self.g)


@dataclass(frozen=True)
class OrbitalSet:
    """Single-particle orbitals sampled on a grid.

    ``vectors[:, i]`` holds grid amplitudes of orbital ``i``; orthonormality is
    with respect to the uniform quadrature weight of the grid.
    """

    grid: Grid
    energies: np.ndarray
    vectors: np.ndarray
    basis_kind: str = "eigen"
    band_of: np.ndarray | None = None
    site_of: np.ndarray | None = None
    centers: np.ndarray | None = None

    @property
    def n_orbitals(self) -> int:
        return self.vectors.shape[1]

    def overlap(self) -> np.ndarray:
        return self.grid.weight * self.vectors.T @ self.vectors

    def matrix_elements(self, values: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        """Quadrature of ``phi_p(x) f(x) phi_q(x)`` with optional per-point weights."""
        w = self.grid.weight * np.asarray(values, dtype=float)
        if mask is not None:
            w = w * mask
        return self.vectors.T @ (w[:, None] * self.vectors)


def build_grid(n_points: int, n_sites: int) -> Grid:
    """Hard walls at +-S pi/2 with ``n_points`` equally spaced interior points."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if n_sites < 1 or n_sites % 2 == 0:
        raise ValueError(f"number of sites must be odd, got {n_sites}")
    x_max = n_sites * np.pi / 2
    x_min = -x_max
    spacing = (x_max - x_min) / (n_points + 1)
    points = x_min + spacing * np.arange(1, n_points + 1)
    # exact symmetry about the origin
    points = 0.5 * (points - points[::-1])
    return Grid(n_points, x_min, x_max, points, spacing)


def kinetic_matrix(grid: Grid) -> np.ndarray:
    """-d^2/dx^2 in the DVR basis, exact within the sine basis of the box."""
    n = grid.n_points
    j = np.arange(1, n + 1)
    transform = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(j, j) * np.pi / (n + 1))
    levels = (j * np.pi / grid.length) ** 2
    t = transform.T @ (levels[:, None] * transform)
    return 0.5 * (t + t.T)


def potential_on_grid(grid: Grid, spec: PotentialSpec) -> np.ndarray:
    x = grid.points
    return spec.v0 * np.sin(x) ** 2 + 0.25 * spec.omega_sq * x**2


def single_particle_hamiltonian(grid: Grid, spec: PotentialSpec) -> np.ndarray:
    h = kinetic_matrix(grid)
    h[np.diag_indices_from(h)] += potential_on_grid(grid, spec)
    return h


def fix_phase(vectors: np.ndarray, threshold: float = 1e-6) -> np.ndarray:
    """Make the first entry exceeding ``threshold`` in magnitude positive, per column."""
    out = np.array(vectors, dtype=float, copy=True)
    for k in range(out.shape[1]):
        col = out[:, k]
        big = np.flatnonzero(np.abs(col) > threshold)
        if big.size and col[big[0]] < 0:
            out[:, k] = -col
    return out


def _resolve_parity(energies, coeffs, reflect):
    """Rotate near-degenerate clusters onto reflection eigenvectors."""
    n = len(energies)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[stop - 1] < DEGENERACY_GAP:
            stop += 1
        if stop - start > 1:
            block = coeffs[:, start:stop]
            r = block.T @ block[reflect]
            _, rot = np.linalg.eigh(0.5 * (r + r.T))
            coeffs[:, start:stop] = block @ rot
        start = stop
    return coeffs


def single_particle_eigs(grid: Grid, spec: PotentialSpec, n_states: int) -> OrbitalSet:
    """Lowest ``n_states`` eigenpairs of the single-particle Hamiltonian."""
    if n_states > grid.n_points:
        raise ValueError("n_states exceeds the number of grid points")
    h = single_particle_hamiltonian(grid, spec)
    try:
        energies, coeffs = linalg.eigh(h, subset_by_index=[0, n_states - 1])
    except linalg.LinAlgError as exc:
        raise EigenSolverError(f"single-particle diagonalization failed: {exc}") from exc
    coeffs = _resolve_parity(energies, coeffs, grid.reflection_index())
    amplitudes = fix_phase(coeffs / np.sqrt(grid.weight))
    return OrbitalSet(grid, energies, amplitudes, basis_kind="eigen")
