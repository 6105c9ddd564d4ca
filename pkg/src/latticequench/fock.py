"""Bosonic number-state basis over (band, site) orbitals.

Occupation vectors are stored band-major: band 0 sites left to right, then
band 1, and so on. States are ordered lexicographically descending, so the
first state has every boson in orbital 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations_with_replacement
from math import comb
from typing import NamedTuple

import numpy as np
from scipy import sparse

__all__ = [
    "BasisTooLarge",
    "FockBasis",
    "NumberLabel",
    "ParityInfo",
    "build_basis",
    "reflect_state",
    "classify_state",
    "format_label",
    "parse_label",
]

DEFAULT_CAP = 2_000_000

_I_CLASSES = {(2, 1, 1): "SP", (2, 2, 0): "DP", (3, 1, 0): "T", (4, 0, 0): "Q"}


class BasisTooLarge(MemoryError):
    """Requested Fock space exceeds the configured size cap."""


class NumberLabel(NamedTuple):
    """A number state, or its reflection-symmetric (S) / antisymmetric (A) combination."""

    occupations: tuple
    parity: str | None = None


def _count(sites: int, particles: int) -> int:
    if sites == 0:
        return 1 if particles == 0 else 0
    return comb(particles + sites - 1, sites - 1)


class FockBasis:
    """All occupation vectors of ``n_particles`` bosons in ``n_orbitals`` modes."""

    def __init__(self, n_particles: int, n_orbitals: int, n_sites: int | None = None,
                 cap: int = DEFAULT_CAP):
        if n_particles < 0 or n_orbitals < 1:
            raise ValueError("need n_particles >= 0 and n_orbitals >= 1")
        size = _count(n_orbitals, n_particles)
        if size > cap:
            raise BasisTooLarge(
                f"basis of {size} states (N={n_particles}, M={n_orbitals}) exceeds cap {cap}"
            )
        self.n_particles = n_particles
        self.n_orbitals = n_orbitals
        self.n_sites = n_sites if n_sites is not None else n_orbitals
        if self.n_orbitals % self.n_sites:
            raise ValueError("n_orbitals must be a multiple of n_sites")
        self.n_bands = self.n_orbitals // self.n_sites
        occ = np.zeros((size, n_orbitals), dtype=np.int64)
        for row, combo in enumerate(combinations_with_replacement(range(n_orbitals), n_particles)):
            for p in combo:
                occ[row, p] += 1
        self.occupations = occ
        self.occupations.setflags(write=False)
        self._table = self._rank_table()

    def __len__(self) -> int:
        return self.occupations.shape[0]

    def __repr__(self) -> str:
        return f"FockBasis(N={self.n_particles}, M={self.n_orbitals}, size={len(self)})"

    def _rank_table(self) -> np.ndarray:
        m, n = self.n_orbitals, self.n_particles
        table = np.zeros((m, n + 1, n + 1), dtype=np.int64)
        for i in range(m):
            rest = m - i - 1
            for r in range(n + 1):
                for v in range(r + 1):
                    table[i, r, v] = sum(_count(rest, r - u) for u in range(v + 1, r + 1))
        return table

    def rank(self, occupations) -> np.ndarray:
        """Positions of one or many occupation vectors (no validity check)."""
        occ = np.atleast_2d(np.asarray(occupations, dtype=np.int64))
        remaining = self.n_particles - np.concatenate(
            [np.zeros((occ.shape[0], 1), dtype=np.int64), np.cumsum(occ[:, :-1], axis=1)], axis=1
        )
        cols = np.arange(self.n_orbitals)
        return self._table[cols[None, :], remaining, occ].sum(axis=1)

    def index(self, occupations) -> int:
        occ = np.asarray(occupations, dtype=np.int64)
        if occ.shape != (self.n_orbitals,) or occ.min() < 0 or occ.sum() != self.n_particles:
            raise KeyError(f"{tuple(occupations)} is not a state of {self!r}")
        return int(self.rank(occ)[0])

    def state(self, i: int) -> tuple:
        return tuple(int(v) for v in self.occupations[i])

    def by_band(self, i: int) -> np.ndarray:
        return self.occupations[i].reshape(self.n_bands, self.n_sites)

    def band0_only(self) -> np.ndarray:
        """Indices of states with every boson in band 0."""
        return np.flatnonzero(self.occupations[:, : self.n_sites].sum(axis=1) == self.n_particles)

    @cached_property
    def parity(self) -> "ParityInfo":
        return ParityInfo.from_basis(self)

    def creation_map(self, lower: "FockBasis") -> tuple[np.ndarray, np.ndarray]:
        """Targets and amplitudes of ``a_p^dagger`` applied to every state of ``lower``.

        Returns ``(target, amp)`` of shape ``(len(lower), M)``.
        """
        occ = lower.occupations
        target = np.empty((len(lower), self.n_orbitals), dtype=np.int64)
        amp = np.sqrt(occ + 1.0)
        for p in range(self.n_orbitals):
            raised = occ.copy()
            raised[:, p] += 1
            target[:, p] = self.rank(raised)
        return target, amp

    def annihilation_matrix(self) -> sparse.csr_matrix:
        """Sparse map psi -> <m|a_p|psi>, rows ``m * M + p`` over the (N-1)-particle basis."""
        lower = FockBasis(self.n_particles - 1, self.n_orbitals, self.n_sites)
        target, amp = self.creation_map(lower)
        rows = np.arange(len(lower) * self.n_orbitals)
        return sparse.csr_matrix(
            (amp.ravel(), (rows, target.ravel())), shape=(len(lower) * self.n_orbitals, len(self))
        )


@dataclass(frozen=True)
class ParityInfo:
    """Reflection partner and sign of every basis state.

    The reflection maps Wannier orbital (b, s) to (-1)^b times (b, S-1-s), so
    ``R|n> = sign * |partner(n)>`` with sign = (-1)^(number of bosons in odd bands).
    """

    partner: np.ndarray
    sign: np.ndarray

    @classmethod
    def from_basis(cls, basis: FockBasis) -> "ParityInfo":
        occ = basis.occupations.reshape(len(basis), basis.n_bands, basis.n_sites)
        reflected = occ[:, :, ::-1].reshape(len(basis), basis.n_orbitals)
        partner = basis.rank(reflected)
        odd = occ[:, 1::2, :].sum(axis=(1, 2))
        sign = np.where(odd % 2 == 0, 1, -1)
        return cls(partner, sign)

    def reflection_matrix(self) -> sparse.csr_matrix:
        n = len(self.partner)
        return sparse.csr_matrix((self.sign.astype(float), (self.partner, np.arange(n))), shape=(n, n))

    def self_symmetric(self) -> np.ndarray:
        return np.flatnonzero(self.partner == np.arange(len(self.partner)))

    def block_projectors(self) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
        """Isometries onto the reflection-even and reflection-odd subspaces.

        Columns are ordered by the representative (lower-index) state of each orbit.
        """
        n = len(self.partner)
        even_cols: list[tuple] = []
        odd_cols: list[tuple] = []
        h = np.sqrt(0.5)
        for i in range(n):
            j = int(self.partner[i])
            s = int(self.sign[i])
            if j == i:
                (even_cols if s > 0 else odd_cols).append(((i,), (1.0,)))
            elif i < j:
                even_cols.append(((i, j), (h, s * h)))
                odd_cols.append(((i, j), (h, -s * h)))
        return _columns_to_matrix(even_cols, n), _columns_to_matrix(odd_cols, n)


def _columns_to_matrix(cols, n):
    rows, colidx, vals = [], [], []
    for c, (idx, v) in enumerate(cols):
        rows.extend(idx)
        colidx.extend([c] * len(idx))
        vals.extend(v)
    return sparse.csr_matrix((vals, (rows, colidx)), shape=(n, len(cols)))


def build_basis(n_particles: int, n_orbitals: int, n_sites: int | None = None,
                cap: int = DEFAULT_CAP) -> FockBasis:
    if n_particles < 1:
        raise ValueError("need at least one boson")
    return FockBasis(n_particles, n_orbitals, n_sites, cap)


def reflect_state(occupations, n_sites: int) -> tuple[tuple, int]:
    """Site-reversed occupations per band and the accompanying sign."""
    occ = np.asarray(occupations, dtype=np.int64).reshape(-1, n_sites)
    odd = int(occ[1::2].sum())
    return tuple(int(v) for v in occ[:, ::-1].ravel()), (-1) ** odd


def classify_state(occupations, n_sites: int) -> tuple[int, str]:
    """Trap class (weighted displacement from the centre) and interaction class.

    The interaction class names the lowest-band occupation multiset of four
    bosons (SP, DP, T, Q); other lowest-band patterns get the multiset written
    out, and any higher-band quantum gives ``"mixed"``.
    """
    occ = np.asarray(occupations, dtype=np.int64).reshape(-1, n_sites)
    center = n_sites // 2
    per_site = occ.sum(axis=0)
    h_class = int(np.sum(per_site * (np.arange(n_sites) - center) ** 2))
    if occ[1:].any():
        return h_class, "mixed"
    pattern = tuple(sorted((int(v) for v in occ[0]), reverse=True))
    key = pattern[:3] if all(v == 0 for v in pattern[3:]) else None
    if key in _I_CLASSES and sum(pattern) == 4:
        return h_class, _I_CLASSES[key]
    return h_class, "{" + ",".join(str(v) for v in pattern if v) + "}"


def format_label(label, n_sites: int) -> str:
    """Text such as ``|1,3,0>``, ``|1,3,0>_S`` or ``|1,1(0)x1(1),1>``."""
    if isinstance(label, NumberLabel):
        occupations, parity = label.occupations, label.parity
    else:
        occupations, parity = label, None
    occ = np.asarray(occupations, dtype=np.int64).reshape(-1, n_sites)
    higher = bool(occ[1:].any())
    parts = []
    for s in range(n_sites):
        col = occ[:, s]
        if not higher or (col[1:].sum() == 0):
            parts.append(str(int(col[0])))
        else:
            terms = [f"{int(n)}({b})" for b, n in enumerate(col) if n]
            parts.append("x".join(terms))
    text = "|" + ",".join(parts) + ">"
    if parity:
        text += "_" + parity
    return text


def parse_label(text: str, n_sites: int, n_bands: int = 1) -> NumberLabel:
    """Inverse of :func:`format_label`, e.g. ``"|2,2,0>_S"`` or ``"|1,1(0)x1(1),1>"``."""
    body = text.strip()
    parity = None
    for suffix in ("_S", "_A"):
        if body.endswith(suffix):
            parity, body = suffix[1], body[: -len(suffix)]
    if not (body.startswith("|") and body.endswith(">")):
        raise ValueError(f"cannot parse state label {text!r}")
    parts = body[1:-1].split(",")
    if len(parts) != n_sites:
        raise ValueError(f"label {text!r} has {len(parts)} sites, expected {n_sites}")
    occ = np.zeros((n_bands, n_sites), dtype=np.int64)
    for s, part in enumerate(parts):
        for term in part.strip().split("x"):
            if "(" in term:
                count, band = term.rstrip(")").split("(")
                b = int(band)
            else:
                count, b = term, 0
            if b >= n_bands:
                raise ValueError(f"label {text!r} uses band {b} but only {n_bands} are kept")
            occ[b, s] += int(count)
    return NumberLabel(tuple(int(v) for v in occ.ravel()), parity)
