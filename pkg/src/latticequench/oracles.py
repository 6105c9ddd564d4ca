"""Reference calculations on code paths independent of the production assembly.

Nothing here uses the Fock ranking tables, the sparse creation maps or the
vectorised integrals: states are enumerated recursively, operators are
applied to occupation tuples one term at a time and the dense matrix is
filled entry by entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OracleCase",
    "OracleTooLarge",
    "two_site_two_boson",
    "symmetric_3x3_eigvals",
    "enumerate_states",
    "dense_hamiltonian",
    "dense_brute_force",
    "reference_integrals",
    "convergence_report",
    "ORACLE_CAP",
]

ORACLE_CAP = 5000


class OracleTooLarge(MemoryError):
    pass


@dataclass(frozen=True)
class OracleCase:
    name: str
    inputs: dict
    reference: object
    tolerance: float
    note: str = ""


def symmetric_3x3_eigvals(a: np.ndarray) -> np.ndarray:
    """Closed-form (trigonometric) eigenvalues of a real symmetric 3x3 matrix, ascending."""
    a = np.asarray(a, dtype=float)
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    q = np.trace(a) / 3.0
    if p1 == 0.0:
        return np.sort(np.diag(a))
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2 * p1
    p = math.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    r = np.linalg.det(b) / 2.0
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    e1 = q + 2 * p * math.cos(phi)
    e3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    e2 = 3 * q - e1 - e3
    return np.sort([e1, e2, e3])


def two_site_two_boson(J: float, U: float, eps: float = 0.0) -> np.ndarray:
    """Eigenvalues of two bosons on two sites, right site offset by ``eps``.

    Basis |2,0>, |1,1>, |0,2>:  diag(U, eps, U + 2 eps), couplings -sqrt(2) J.
    """
    t = -math.sqrt(2.0) * J
    a = np.array([[U, t, 0.0], [t, eps, t], [0.0, t, U + 2 * eps]])
    return symmetric_3x3_eigvals(a)


def enumerate_states(n_particles: int, n_modes: int) -> list[tuple]:
    """All occupation tuples, recursive, first mode filled first."""
    if n_modes == 1:
        return [(n_particles,)]
    out = []
    for k in range(n_particles, -1, -1):
        for rest in enumerate_states(n_particles - k, n_modes - 1):
            out.append((k, *rest))
    return out


def _annihilate(state, p):
    n = state[p]
    if n == 0:
        return None, 0.0
    s = list(state)
    s[p] -= 1
    return tuple(s), math.sqrt(n)


def _create(state, p):
    s = list(state)
    s[p] += 1
    return tuple(s), math.sqrt(s[p])


def dense_hamiltonian(h: np.ndarray, W: np.ndarray | None, n_particles: int,
                      cap: int = ORACLE_CAP) -> tuple[np.ndarray, list]:
    """Dense H = sum h_pq a_p^+ a_q + 1/2 sum W_pqrs a_p^+ a_q^+ a_r a_s, term by term."""
    m = h.shape[0]
    states = enumerate_states(n_particles, m)
    if len(states) > cap:
        raise OracleTooLarge(f"{len(states)} states exceed the oracle cap {cap}")
    index = {s: i for i, s in enumerate(states)}
    H = np.zeros((len(states), len(states)))
    for col, st in enumerate(states):
        for q in range(m):
            s1, a1 = _annihilate(st, q)
            if s1 is None:
                continue
            for p in range(m):
                if h[p, q] == 0.0:
                    continue
                s2, a2 = _create(s1, p)
                H[index[s2], col] += h[p, q] * a1 * a2
        if W is None:
            continue
        for s_ in range(m):
            t1, b1 = _annihilate(st, s_)
            if t1 is None:
                continue
            for r in range(m):
                t2, b2 = _annihilate(t1, r)
                if t2 is None:
                    continue
                for q in range(m):
                    t3, b3 = _create(t2, q)
                    for p in range(m):
                        w = W[p, q, r, s_]
                        if w == 0.0:
                            continue
                        t4, b4 = _create(t3, p)
                        H[index[t4], col] += 0.5 * w * b1 * b2 * b3 * b4
    return H, states


def reference_integrals(orbitals, v0: float, omega_sq: float, g: float):
    """One- and two-body integrals by explicit loops (sine-basis kinetic energy)."""
    grid = orbitals.grid
    n = grid.n_points
    x = grid.points
    L = grid.length
    dx = grid.weight
    coeff = orbitals.vectors * math.sqrt(dx)
    # kinetic energy through the sine transform, independent of the DVR matrix
    j = np.arange(1, n + 1)
    sine = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(j, j) * math.pi / (n + 1))
    ck = sine @ coeff
    kin = (ck * ((j * math.pi / L) ** 2)[:, None]).T @ ck
    m = coeff.shape[1]
    pot = v0 * np.sin(x) ** 2 + 0.25 * omega_sq * x**2
    h = np.empty((m, m))
    for p in range(m):
        for q in range(m):
            h[p, q] = kin[p, q] + np.sum(coeff[:, p] * pot * coeff[:, q])
    h = 0.5 * (h + h.T)
    W = np.zeros((m, m, m, m))
    if g != 0:
        phi = orbitals.vectors
        for p in range(m):
            for q in range(p, m):
                pq = phi[:, p] * phi[:, q]
                for r in range(m):
                    for s in range(r, m):
                        val = g * dx * np.sum(pq * phi[:, r] * phi[:, s])
                        for a, b in ((p, q), (q, p)):
                            for c, d in ((r, s), (s, r)):
                                W[a, b, c, d] = val
    return h, W


def dense_brute_force(config, omega_sq: float, cap: int = ORACLE_CAP) -> np.ndarray:
    """Full spectrum of a :class:`ModelConfig` at ``omega_sq`` from the dense oracle path."""
    from .dvr import build_grid
    from .orbitals import lattice_wannier_basis

    n_modes = config.n_sites * config.n_bands
    if math.comb(config.n_particles + n_modes - 1, config.n_particles) > cap:
        raise OracleTooLarge("basis exceeds the oracle cap")
    grid = build_grid(config.n_grid, config.n_sites)
    spec = config.spec(config.wannier_omega_sq if config.wannier_at_initial_trap else 0.0)
    orb = lattice_wannier_basis(grid, spec, config.n_bands, at_trap=config.wannier_at_initial_trap)
    h, W = reference_integrals(orb, config.v0, omega_sq, config.g)
    H, _ = dense_hamiltonian(h, W if config.g else None, config.n_particles, cap)
    return np.linalg.eigvalsh(0.5 * (H + H.T))


def convergence_report(ladder, omega_i_sq: float, omega_f_sq: float, t_final: float = 300.0,
                       dt_sample: float = 0.1, t_max: float | None = None, base=None) -> list[dict]:
    """Observable changes between consecutive rungs of (n_grid, n_bands).

    Each row holds the rung, its ground-state energy at ``omega_i_sq``, and
    versus the previous rung the energy change and the maximum pointwise
    relative change of sigma^2_{x,L}(t) for t <= ``t_max``.
    """
    from dataclasses import replace

    from .model import LatticeModel, ModelConfig
    from .observables import variance_series
    from .quench import QuenchProtocol, evolve, ground_state

    base = base or ModelConfig()
    proto = QuenchProtocol(omega_i_sq, omega_f_sq, t_final, dt_sample)
    t_max = t_final if t_max is None else t_max
    rows, prev = [], None
    for n_grid, n_bands in ladder:
        model = LatticeModel(replace(base, n_grid=n_grid, n_bands=n_bands))
        psi0, e0 = ground_state(model, omega_i_sq)
        res = evolve(model, proto, psi0)
        s = variance_series(res)
        row = {"n_grid": n_grid, "n_bands": n_bands, "ground_energy": e0,
               "delta_energy": None, "max_rel_sigma2": None}
        if prev is not None:
            m = res.times <= t_max + 1e-12
            row["delta_energy"] = e0 - prev[0]
            row["max_rel_sigma2"] = float(np.max(np.abs(s[m] - prev[1][m]) / np.abs(prev[1][m])))
        rows.append(row)
        prev = (e0, s)
    return rows
