"""A lattice-plus-trap few-boson model with operators cached for fast trap sweeps.

The Hamiltonian is linear in the trap curvature, ``H(w2) = H_lattice + w2 * H_trap``,
so both pieces are assembled once (in the Fock basis and in the reflection
blocks) and every scan or quench point is a cheap linear combination.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackError, eigsh

from .dvr import EigenSolverError, PotentialSpec, build_grid
from .fock import FockBasis, NumberLabel, build_basis, format_label
from .hamiltonian import (
    ManyBodyOperator,
    RegionSpec,
    assemble_one_body,
    assemble_operator,
    compute_integrals,
    one_body_matrix,
    parity_blocks,
)
from .orbitals import lattice_wannier_basis

__all__ = ["ModelConfig", "LatticeModel", "Spectrum"]

# blocks at least this large use Lanczos when only a few low states are wanted
LANCZOS_MIN_DIM = 2000
LANCZOS_MAX_STATES = 64


@dataclass(frozen=True)
class ModelConfig:
    n_particles: int = 4
    n_sites: int = 3
    v0: float = 9.0
    g: float = 1.0
    n_grid: int = 300
    n_bands: int = 3
    wannier_at_initial_trap: bool = False
    wannier_omega_sq: float = 0.0
    basis_cap: int = 2_000_000

    def spec(self, omega_sq: float = 0.0) -> PotentialSpec:
        return PotentialSpec(self.v0, omega_sq, self.n_sites, self.g)


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs of one reflection block; ``vectors`` are block coordinates."""

    energies: np.ndarray
    vectors: np.ndarray
    parity: str


class LatticeModel:
    """Grid, Wannier orbitals, Fock basis and cached many-body operators."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.grid = build_grid(config.n_grid, config.n_sites)
        wspec = config.spec(config.wannier_omega_sq if config.wannier_at_initial_trap else 0.0)
        self.orbitals = lattice_wannier_basis(self.grid, wspec, config.n_bands,
                                              at_trap=config.wannier_at_initial_trap)
        self.basis: FockBasis = build_basis(config.n_particles, self.orbitals.n_orbitals,
                                            config.n_sites, cap=config.basis_cap)
        self.one_body, self.two_body = compute_integrals(self.orbitals, config.spec(0.0))
        self._h_lattice = assemble_operator(self.basis, self.one_body.lattice, self.two_body)
        self._h_trap = assemble_operator(self.basis, self.one_body.trap)
        self._proj_even, self._proj_odd = self.basis.parity.block_projectors()

    def __repr__(self) -> str:
        c = self.config
        return (f"LatticeModel(N={c.n_particles}, S={c.n_sites}, v0={c.v0}, g={c.g}, "
                f"n_bands={c.n_bands}, dim={len(self.basis)})")

    @property
    def n_sites(self) -> int:
        return self.config.n_sites

    def hamiltonian(self, omega_sq: float) -> ManyBodyOperator:
        return self._h_lattice + self._h_trap.scaled(omega_sq)

    @cached_property
    def _blocks(self):
        lat_e, lat_o = parity_blocks(self._h_lattice)
        trap_e, trap_o = parity_blocks(self._h_trap)
        return {"even": (lat_e, trap_e), "odd": (lat_o, trap_o)}

    @cached_property
    def _sparse_blocks(self):
        out = {}
        for parity in ("even", "odd"):
            p = self.projector(parity)
            lat = sparse.csr_matrix(p.T @ self._h_lattice.matrix @ p)
            trap = sparse.csr_matrix(p.T @ self._h_trap.matrix @ p)
            out[parity] = (lat, trap)
        return out

    def block_hamiltonian(self, omega_sq: float, parity: str = "even") -> np.ndarray:
        lat, trap = self._blocks[parity]
        return lat + omega_sq * trap

    def trap_derivative(self, parity: str = "even") -> np.ndarray:
        """dH/d(omega_sq) in one block (Hellmann-Feynman slopes)."""
        return self._blocks[parity][1]

    def trap_elements(self, vectors: np.ndarray, parity: str = "even") -> np.ndarray:
        """``V^T (dH/d omega_sq) V`` for block vectors, without forming dense blocks of large models."""
        if self.block_dimension(parity) >= LANCZOS_MIN_DIM:
            b = self._sparse_blocks[parity][1]
        else:
            b = self.trap_derivative(parity)
        m = vectors.T @ (b @ vectors)
        return 0.5 * (m + m.T)

    def projector(self, parity: str = "even"):
        return self._proj_even if parity == "even" else self._proj_odd

    def block_dimension(self, parity: str = "even") -> int:
        return self.projector(parity).shape[1]

    def diagonalize(self, omega_sq: float, parity: str = "even", n_states: int | None = None) -> Spectrum:
        """Lowest ``n_states`` eigenpairs of one block (all when ``None``).

        Recent results are cached; treat the returned arrays as read-only.
        """
        dim = self.block_dimension(parity)
        k = dim if n_states is None else min(n_states, dim)
        key = (float(omega_sq), parity, k)
        cache = self.__dict__.setdefault("_eig_cache", {})
        if key in cache:
            return cache[key]
        for (w2, par, kk), sp in list(cache.items()):
            if w2 == key[0] and par == parity and kk >= k:
                return Spectrum(sp.energies[:k], sp.vectors[:, :k], parity)
        sp = self._diagonalize(omega_sq, parity, k)
        if dim >= 1000:
            # only large blocks are worth keeping; bound the memory
            while len(cache) >= 4:
                cache.pop(next(iter(cache), None), None)
            cache[key] = sp
        return sp

    def _diagonalize(self, omega_sq, parity, k):
        dim = self.block_dimension(parity)
        if dim >= LANCZOS_MIN_DIM and k <= min(LANCZOS_MAX_STATES, dim // 20):
            return self._lanczos(omega_sq, parity, k)
        h = self.block_hamiltonian(omega_sq, parity)
        try:
            if k < dim:
                e, v = linalg.eigh(h, subset_by_index=[0, k - 1])
            else:
                e, v = linalg.eigh(h)
        except linalg.LinAlgError as exc:
            raise EigenSolverError(f"many-body diagonalization failed: {exc}") from exc
        return Spectrum(e, _fix_signs(v), parity)

    def _lanczos(self, omega_sq, parity, k):
        lat, trap = self._sparse_blocks[parity]
        h = (lat + omega_sq * trap).tocsr()
        # a fixed start vector keeps repeated runs bit-identical
        v0 = np.linspace(1.0, 2.0, h.shape[0])
        try:
            e, v = eigsh(h, k=k, which="SA", v0=v0, tol=0.0, ncv=min(h.shape[0], max(2 * k + 1, 40)))
        except ArpackError as exc:
            raise EigenSolverError(f"Lanczos solver failed: {exc}") from exc
        order = np.argsort(e)
        return Spectrum(e[order], _fix_signs(v[:, order]), parity)

    def to_fock(self, block_vectors: np.ndarray, parity: str = "even") -> np.ndarray:
        return self.projector(parity) @ block_vectors

    def one_body_operator(self, values: np.ndarray, region: RegionSpec | None = None,
                          parity: str | None = "even"):
        """Sparse many-body matrix of a local one-body observable f(x) restricted to ``region``.

        With ``parity`` set the matrix is returned in that reflection block.
        """
        mat = assemble_one_body(self.basis, one_body_matrix(self.orbitals, values, region))
        mat = 0.5 * (mat + mat.T)
        if parity is None:
            return mat.tocsr()
        p = self.projector(parity)
        return (p.T @ mat @ p).tocsr()

    @cached_property
    def _block_labels(self):
        parity = self.basis.parity
        out = {"even": [], "odd": []}
        for i in range(len(self.basis)):
            j = int(parity.partner[i])
            occ = self.basis.state(i)
            if j == i:
                out["even" if parity.sign[i] > 0 else "odd"].append(NumberLabel(occ, None))
            elif i < j:
                out["even"].append(NumberLabel(occ, "S"))
                out["odd"].append(NumberLabel(occ, "A"))
        return out

    def block_labels(self, parity: str = "even") -> list[NumberLabel]:
        """Number-state label of every block basis vector.

        ``S`` marks the reflection-even combination, ``A`` the reflection-odd one.
        """
        return self._block_labels[parity]

    def label_vector(self, label: NumberLabel, parity: str = "even") -> np.ndarray:
        """Block coordinates of a number state or its S/A combination."""
        basis = self.basis
        i = basis.index(label.occupations)
        j = int(basis.parity.partner[i])
        s = int(basis.parity.sign[i])
        vec = np.zeros(len(basis))
        if label.parity is None or i == j:
            vec[i] = 1.0
        else:
            vec[i] = np.sqrt(0.5)
            vec[j] += (s if label.parity == "S" else -s) * np.sqrt(0.5)
        return self.projector(parity).T @ vec

    def label_text(self, label: NumberLabel) -> str:
        return format_label(label, self.n_sites)

    def band0_label(self, *site_occupations: int, parity: str | None = None) -> NumberLabel:
        """Label with every boson in band 0, e.g. ``band0_label(1, 3, 0, parity="S")``."""
        occ = list(site_occupations) + [0] * (self.basis.n_orbitals - self.n_sites)
        return NumberLabel(tuple(occ), parity)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Largest-magnitude component of every eigenvector made positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs
