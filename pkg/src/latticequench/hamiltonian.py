"""Second-quantized many-body operators from one- and two-body orbital integrals.

Matrix elements are scattered through the (N-1)- and (N-2)-particle bases:
every state ``n`` reached by creating one boson (or a pair) on an intermediate
state ``m`` contributes ``amp_p * h_pq * amp_q`` (or the pair analogue), which
visits exactly the connected states and nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .dvr import OrbitalSet, PotentialSpec, kinetic_matrix

__all__ = [
    "RegionSpec",
    "OneBodyIntegrals",
    "TwoBodyIntegrals",
    "ManyBodyOperator",
    "ParityMismatch",
    "region_mask",
    "compute_integrals",
    "one_body_matrix",
    "assemble_operator",
    "assemble_one_body",
    "assemble_two_body",
    "parity_blocks",
]


class ParityMismatch(ValueError):
    """Operator does not commute with the site reflection."""


@dataclass(frozen=True)
class RegionSpec:
    """Interval ``(x_lo, x_hi)`` of the box; ``None`` bounds mean the box edge."""

    x_lo: float | None = None
    x_hi: float | None = None
    label: str = "L"

    @classmethod
    def whole(cls) -> "RegionSpec":
        return cls(None, None, "L")

    @classmethod
    def core(cls, n_core_sites: int = 3) -> "RegionSpec":
        half = n_core_sites * np.pi / 2
        return cls(-half, half, f"{n_core_sites}w")

    @property
    def is_whole(self) -> bool:
        return self.x_lo is None and self.x_hi is None


def region_mask(points: np.ndarray, region: RegionSpec | None, tol: float = 1e-12) -> np.ndarray:
    """Quadrature mask: 1 inside, 1/2 on an edge, 0 outside."""
    mask = np.ones_like(points, dtype=float)
    if region is None or region.is_whole:
        return mask
    lo = -np.inf if region.x_lo is None else region.x_lo
    hi = np.inf if region.x_hi is None else region.x_hi
    if not lo < hi:
        raise ValueError(f"empty region ({lo}, {hi})")
    mask[(points < lo - tol) | (points > hi + tol)] = 0.0
    mask[np.abs(points - lo) <= tol] = 0.5
    mask[np.abs(points - hi) <= tol] = 0.5
    return mask


def one_body_matrix(orbitals: OrbitalSet, values: np.ndarray, region: RegionSpec | None = None):
    mask = region_mask(orbitals.grid.points, region)
    m = orbitals.matrix_elements(values, mask)
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class OneBodyIntegrals:
    """Orbital matrices of the single-particle Hamiltonian and of x, x^2.

    ``h = lattice + omega_sq * trap`` where ``trap`` is the matrix of x^2/4.
    ``x1`` and ``x2`` may be restricted to a region.
    """

    lattice: np.ndarray
    trap: np.ndarray
    omega_sq: float
    x1: np.ndarray
    x2: np.ndarray
    region: RegionSpec = field(default_factory=RegionSpec.whole)

    @property
    def h(self) -> np.ndarray:
        return self.lattice + self.omega_sq * self.trap


@dataclass(frozen=True)
class TwoBodyIntegrals:
    """Contact-interaction tensor ``W_pqrs = g sum_j w phi_p phi_q phi_r phi_s``."""

    W: np.ndarray
    g: float


def compute_integrals(orbitals: OrbitalSet, spec: PotentialSpec,
                      region: RegionSpec | None = None) -> tuple[OneBodyIntegrals, TwoBodyIntegrals]:
    grid = orbitals.grid
    x = grid.points
    phi = orbitals.vectors
    coeff = phi * np.sqrt(grid.weight)
    lattice = coeff.T @ kinetic_matrix(grid) @ coeff
    lattice += orbitals.matrix_elements(spec.v0 * np.sin(x) ** 2)
    lattice = 0.5 * (lattice + lattice.T)
    trap = one_body_matrix(orbitals, 0.25 * x**2)
    region = region or RegionSpec.whole()
    x1 = one_body_matrix(orbitals, x, region)
    x2 = one_body_matrix(orbitals, x**2, region)
    if spec.g == 0:
        W = np.zeros((orbitals.n_orbitals,) * 4)
    else:
        W = spec.g * np.einsum("jp,jq,jr,js->pqrs", phi, phi, phi, phi * grid.weight, optimize=True)
    return (OneBodyIntegrals(lattice, trap, spec.omega_sq, x1, x2, region),
            TwoBodyIntegrals(W, spec.g))


@dataclass(frozen=True)
class ManyBodyOperator:
    """Real symmetric sparse matrix over a :class:`FockBasis`."""

    matrix: sparse.csr_matrix
    basis: object

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other: "ManyBodyOperator") -> "ManyBodyOperator":
        return ManyBodyOperator((self.matrix + other.matrix).tocsr(), self.basis)

    def scaled(self, factor: float) -> "ManyBodyOperator":
        return ManyBodyOperator((factor * self.matrix).tocsr(), self.basis)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def _lower_basis(basis, k):
    from .fock import FockBasis

    return FockBasis(basis.n_particles - k, basis.n_orbitals, basis.n_sites)


def assemble_one_body(basis, h: np.ndarray, drop: float = 0.0) -> sparse.csr_matrix:
    """Matrix of sum_pq h_pq a_p^dagger a_q."""
    h = np.asarray(h, dtype=float)
    n = len(basis)
    if basis.n_particles == 0:
        return sparse.csr_matrix((n, n))
    lower = _lower_basis(basis, 1)
    target, amp = basis.creation_map(lower)
    pairs = np.argwhere(np.abs(h) > drop)
    rows = target[:, pairs[:, 0]].ravel()
    cols = target[:, pairs[:, 1]].ravel()
    vals = (amp[:, pairs[:, 0]] * amp[:, pairs[:, 1]] * h[pairs[:, 0], pairs[:, 1]]).ravel()
    out = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    out.sum_duplicates()
    return out


def _pair_creation(basis, lower):
    """Targets and amplitudes of a_p^dagger a_q^dagger (p <= q) on the (N-2)-basis."""
    m = basis.n_orbitals
    pairs = [(p, q) for p in range(m) for q in range(p, m)]
    occ = lower.occupations
    target = np.empty((len(lower), len(pairs)), dtype=np.int64)
    amp = np.empty((len(lower), len(pairs)))
    for k, (p, q) in enumerate(pairs):
        raised = occ.copy()
        raised[:, p] += 1
        if p == q:
            amp[:, k] = np.sqrt((occ[:, p] + 1.0) * (occ[:, p] + 2.0))
        else:
            amp[:, k] = np.sqrt((occ[:, p] + 1.0) * (occ[:, q] + 1.0))
        raised[:, q] += 1
        target[:, k] = basis.rank(raised)
    return np.array(pairs), target, amp


def assemble_two_body(basis, W: np.ndarray, drop: float = 1e-14) -> sparse.csr_matrix:
    """Matrix of (1/2) sum_pqrs W_pqrs a_p^dagger a_q^dagger a_r a_s."""
    n = len(basis)
    if basis.n_particles < 2 or not np.any(W):
        return sparse.csr_matrix((n, n))
    lower = _lower_basis(basis, 2)
    pairs, target, amp = _pair_creation(basis, lower)
    mult = np.where(pairs[:, 0] == pairs[:, 1], 1.0, 2.0)
    K = 0.5 * mult[:, None] * mult[None, :] * W[pairs[:, 0], pairs[:, 1]][:, pairs[:, 0], pairs[:, 1]]
    keep = np.argwhere(np.abs(K) > drop * np.abs(K).max())
    # bounded chunks keep the coo buffers small for large bases
    step = max(1, 4_000_000 // max(1, len(lower)))
    out = sparse.csr_matrix((n, n))
    for start in range(0, len(keep), step):
        kk = keep[start:start + step]
        rows = target[:, kk[:, 0]].ravel()
        cols = target[:, kk[:, 1]].ravel()
        vals = (amp[:, kk[:, 0]] * amp[:, kk[:, 1]] * K[kk[:, 0], kk[:, 1]]).ravel()
        out = out + sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    out.sum_duplicates()
    return out


def assemble_operator(basis, one_body, two_body: TwoBodyIntegrals | None = None) -> ManyBodyOperator:
    """H = sum h_pq a_p^+ a_q + (1/2) sum W_pqrs a_p^+ a_q^+ a_r a_s on ``basis``.

    ``one_body`` is a :class:`OneBodyIntegrals` (its ``h`` is used) or a plain matrix.
    """
    h = one_body.h if isinstance(one_body, OneBodyIntegrals) else np.asarray(one_body)
    if h.shape != (basis.n_orbitals, basis.n_orbitals):
        raise ValueError(f"one-body matrix {h.shape} does not match M={basis.n_orbitals}")
    mat = assemble_one_body(basis, h)
    if two_body is not None:
        mat = mat + assemble_two_body(basis, two_body.W)
    mat = mat.tocsr()
    mat = 0.5 * (mat + mat.T)
    return ManyBodyOperator(mat.tocsr(), basis)


def parity_blocks(op: ManyBodyOperator, parity=None, tol: float = 1e-8):
    """Even and odd reflection blocks as dense arrays.

    Raises :class:`ParityMismatch` when ``||HR - RH||_max > tol``.
    """
    parity = parity if parity is not None else op.basis.parity
    R = parity.reflection_matrix()
    comm = (op.matrix @ R - R @ op.matrix)
    err = abs(comm).max() if comm.nnz else 0.0
    if err > tol:
        raise ParityMismatch(f"operator breaks reflection symmetry (commutator {err:.2e})")
    pe, po = parity.block_projectors()
    even = (pe.T @ op.matrix @ pe).toarray()
    odd = (po.T @ op.matrix @ po).toarray()
    return 0.5 * (even + even.T), 0.5 * (odd + odd.T)
