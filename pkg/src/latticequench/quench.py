"""Sudden trap quench: pre-quench ground state evolved in the post-quench eigenbasis.

The state is expanded as psi(t) = sum_i c_i exp(-i E_i t) |i>, so sampling is
exact and timestep free. Only the lowest K eigenstates may be kept; the norm
missing from the expansion (the completeness defect) bounds the error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .fock import NumberLabel

__all__ = [
    "QuenchProtocol",
    "QuenchResult",
    "CompletenessError",
    "DegenerateGroundState",
    "ground_state",
    "evolve",
    "population_timeseries",
    "state_prep_search",
]

log = logging.getLogger(__name__)

DEFECT_TOL = 1e-8


class CompletenessError(RuntimeError):
    """The kept eigenstates do not capture the initial state."""


class DegenerateGroundState(RuntimeError):
    pass


@dataclass(frozen=True)
class QuenchProtocol:
    """Trap curvature jumps from ``omega_i_sq`` to ``omega_f_sq`` at t = 0."""

    omega_i_sq: float = 0.8
    omega_f_sq: float = 0.58
    t_final: float = 300.0
    dt_sample: float = 0.1

    def __post_init__(self):
        if self.omega_f_sq < 0 or self.omega_i_sq < 0:
            raise ValueError("trap curvatures must be non-negative")
        if self.omega_f_sq > self.omega_i_sq:
            raise ValueError("quench must lower the trap: omega_f_sq <= omega_i_sq")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if not 0 < self.dt_sample <= self.t_final:
            raise ValueError("need 0 < dt_sample <= t_final")

    @property
    def times(self) -> np.ndarray:
        n = int(round(self.t_final / self.dt_sample))
        return self.dt_sample * np.arange(n + 1)


def ground_state(model, omega_sq: float, parity: str = "even", gap_tol: float = 1e-10):
    """Lowest eigenvector of one block and its energy.

    The largest-magnitude component is positive. A gap below ``gap_tol`` to
    the next state of the block raises :class:`DegenerateGroundState`.
    """
    n = min(2, model.block_dimension(parity))
    sp = model.diagonalize(omega_sq, parity, n)
    if n > 1 and sp.energies[1] - sp.energies[0] < gap_tol:
        raise DegenerateGroundState(
            f"ground state gap {sp.energies[1] - sp.energies[0]:.2e} below {gap_tol:.0e} at omega_sq={omega_sq}"
        )
    return sp.vectors[:, 0].copy(), float(sp.energies[0])


@dataclass
class QuenchResult:
    """Post-quench eigenbasis, expansion coefficients and sample times.

    ``vectors`` are block coordinates of the kept eigenstates, ``coefficients``
    the overlaps c_i = <i|psi0>.
    """

    model: object
    protocol: QuenchProtocol
    parity: str
    energies: np.ndarray
    vectors: np.ndarray
    coefficients: np.ndarray
    times: np.ndarray
    defect: float
    psi0: np.ndarray

    @property
    def n_kept(self) -> int:
        return len(self.energies)

    def amplitudes(self, times=None) -> np.ndarray:
        """c_i(t) with shape (K, n_times); phases measured from the lowest kept level."""
        t = self.times if times is None else np.atleast_1d(np.asarray(times, dtype=float))
        e = self.energies - self.energies[0]
        return self.coefficients[:, None] * np.exp(-1j * np.outer(e, t))

    def states(self, times=None) -> np.ndarray:
        """Block coordinates of psi(t), shape (dim, n_times)."""
        return self.vectors @ self.amplitudes(times)

    def project(self, op) -> np.ndarray:
        """Matrix of a block operator (dense or sparse) in the kept eigenbasis."""
        av = op @ self.vectors
        m = self.vectors.T @ np.asarray(av)
        return 0.5 * (m + m.T)

    def expectation(self, op_eig: np.ndarray, times=None) -> np.ndarray:
        """<psi(t)|A|psi(t)> for A given in the kept eigenbasis."""
        return self.expectations([op_eig], times)[0]

    def expectations(self, ops_eig, times=None) -> list[np.ndarray]:
        """Several expectation values sharing one evaluation of the amplitudes."""
        a = self.amplitudes(times)
        return [np.real(np.sum(a.conj() * (op @ a), axis=0)) for op in ops_eig]

    def norm(self, times=None) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes(times)) ** 2, axis=0)

    def energy(self, times=None) -> np.ndarray:
        return self.expectation(np.diag(self.energies), times)

    def fidelity(self, times=None) -> np.ndarray:
        """|<psi(0)|psi(t)>|."""
        return np.abs(self.psi0 @ self.states(times))

    def pruned(self, weight_tol: float = 1e-14) -> "QuenchResult":
        """Copy without the eigenstates with |c_i|^2 <= ``weight_tol``; their weight joins the defect."""
        keep = self.coefficients**2 > weight_tol
        if keep.all():
            return self
        dropped = float(np.sum(self.coefficients[~keep] ** 2))
        return replace(self, energies=self.energies[keep], vectors=self.vectors[:, keep],
                       coefficients=self.coefficients[keep], defect=self.defect + dropped)

    def fock_populations(self, times=None) -> np.ndarray:
        """|<n|psi(t)>|^2 for every Fock state, shape (basis size, n_times)."""
        fock = self.model.to_fock(self.states(times), self.parity)
        return np.abs(fock) ** 2


def _default_keep(model, parity):
    dim = model.block_dimension(parity)
    return dim if model.n_sites <= 3 else min(400, dim)


def evolve(model, protocol: QuenchProtocol, psi0: np.ndarray | None = None,
           parity: str = "even", n_keep: int | None = None,
           defect_tol: float = DEFECT_TOL) -> QuenchResult:
    """Expand ``psi0`` (default: ground state at ``omega_i_sq``) in the post-quench basis.

    With a truncated basis the kept count grows fourfold until the completeness
    defect drops below ``defect_tol``; reaching the full block without
    success raises :class:`CompletenessError`.
    """
    if psi0 is None:
        psi0, _ = ground_state(model, protocol.omega_i_sq, parity)
    psi0 = np.asarray(psi0, dtype=float)
    psi0 = psi0 / np.linalg.norm(psi0)
    dim = model.block_dimension(parity)
    k = min(dim, n_keep or _default_keep(model, parity))
    while True:
        sp = model.diagonalize(protocol.omega_f_sq, parity, k)
        c = sp.vectors.T @ psi0
        defect = float(max(0.0, 1.0 - np.sum(c**2)))
        if defect <= defect_tol:
            break
        if k >= dim:
            raise CompletenessError(
                f"completeness defect {defect:.2e} exceeds {defect_tol:.0e} even with the full block"
            )
        log.info("defect %.2e with K=%d, enlarging the kept set", defect, k)
        k = min(dim, 4 * k)
    return QuenchResult(model, protocol, parity, sp.energies, sp.vectors, c,
                        protocol.times, defect, psi0)


def _target_vector(result: QuenchResult, target) -> np.ndarray:
    if not isinstance(target, NumberLabel):
        target = NumberLabel(tuple(target), None)
    return result.model.label_vector(target, result.parity)


def population_timeseries(result: QuenchResult, target, times=None) -> np.ndarray:
    """|<n|psi(t)>|^2 for a number state or its S/A combination.

    ``target`` is a :class:`NumberLabel` or a bare occupation tuple.
    """
    v = _target_vector(result, target) @ result.vectors
    return np.abs(v @ result.amplitudes(times)) ** 2


def state_prep_search(result: QuenchResult, target, threshold: float = 0.6):
    """Earliest sampled time with population >= ``threshold``, or ``None``."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    pop = population_timeseries(result, target)
    hit = np.flatnonzero(pop >= threshold)
    return float(result.times[hit[0]]) if hit.size else None
