"""Eigenvalue curves versus trap curvature and avoided-crossing detection."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .fock import NumberLabel, format_label

__all__ = [
    "SpectralScan",
    "AvoidedCrossing",
    "dominant_label",
    "scan_spectrum",
    "detect_crossings",
    "VERY_NARROW_WIDTH",
]

log = logging.getLogger(__name__)

VERY_NARROW_WIDTH = 4e-3
AMBIGUITY = 1e-3


def dominant_label(model, vec: np.ndarray, parity: str = "even") -> tuple[NumberLabel, float]:
    """Block basis state (number state or S/A combination) with the largest weight.

    Ties go to the earlier basis state.
    """
    w = np.abs(np.asarray(vec)) ** 2
    k = int(np.argmax(w))
    return model.block_labels(parity)[k], float(w[k])


@dataclass
class SpectralScan:
    """Lowest eigenpairs of one reflection block on a grid of trap curvatures.

    Curve ``k`` is the k-th eigenvalue of the block at each point; the overlap
    continuation between neighbouring points is kept in ``continuation``.
    """

    omega_sq: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    labels: list
    weights: np.ndarray
    parity: str
    continuation: np.ndarray
    ambiguities: list = field(default_factory=list)

    @property
    def n_states(self) -> int:
        return self.energies.shape[1]

    def gaps(self) -> np.ndarray:
        return np.diff(self.energies, axis=1)


@dataclass
class AvoidedCrossing:
    lower: int
    upper: int
    omega_sq_c: float
    min_gap: float
    width: float
    kind: str
    labels_before: tuple
    labels_after: tuple
    slopes_before: tuple
    slopes_after: tuple
    diabatic_slopes: tuple
    exchanged: bool
    resolved: bool = True
    involves_ground: bool = False

    def as_dict(self, n_sites: int) -> dict:
        d = asdict(self)
        d["labels_before"] = [format_label(lab, n_sites) for lab in self.labels_before]
        d["labels_after"] = [format_label(lab, n_sites) for lab in self.labels_after]
        d["omega_sq_c"] = float(self.omega_sq_c)
        for key in ("min_gap", "width"):
            d[key] = float(d[key])
        for key in ("slopes_before", "slopes_after", "diabatic_slopes"):
            d[key] = [float(v) for v in d[key]]
        return d


def _diag(model, w2, parity, n_states):
    sp = model.diagonalize(w2, parity, n_states)
    return sp.energies, sp.vectors


def scan_spectrum(model, omega_sq, n_states: int, parity: str = "even", threads: int = 1) -> SpectralScan:
    """Diagonalize one block at every ``omega_sq`` value (sorted ascending)."""
    omega_sq = np.sort(np.asarray(omega_sq, dtype=float))
    if omega_sq.size == 0:
        raise ValueError("empty omega_sq range")
    dim = model.block_dimension(parity)
    if n_states > dim:
        raise ValueError(f"n_states={n_states} exceeds the {parity} block dimension {dim}")
    work = [(float(w2), parity, n_states) for w2 in omega_sq]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda a: _diag(model, *a), work))
    else:
        results = [_diag(model, *a) for a in work]
    energies = np.array([r[0] for r in results])
    vectors = np.array([r[1] for r in results])
    labels, weights = [], np.empty_like(energies)
    for p in range(len(omega_sq)):
        row = []
        for k in range(n_states):
            lab, w = dominant_label(model, vectors[p, :, k], parity)
            row.append(lab)
            weights[p, k] = w
        labels.append(row)
    cont = np.empty((max(len(omega_sq) - 1, 0), n_states), dtype=int)
    ambiguities = []
    for p in range(len(omega_sq) - 1):
        ov = np.abs(vectors[p].T @ vectors[p + 1])
        rows, cols = linear_sum_assignment(-ov)
        cont[p, rows] = cols
        srt = np.sort(ov, axis=1)
        if n_states > 1:
            close = np.flatnonzero(srt[:, -1] - srt[:, -2] < AMBIGUITY)
            for k in close:
                ambiguities.append((p, int(k)))
                log.warning("ambiguous continuation at point %d (omega_sq=%.6g), curve %d",
                            p, omega_sq[p], k)
    return SpectralScan(omega_sq, energies, vectors, labels, weights, parity, cont, ambiguities)


def _gap_at(model, w2, k, parity):
    e, _ = _diag(model, w2, parity, k + 2)
    return e[k + 1] - e[k]


def _refine(model, k, lo, hi, parity, max_levels=12, rel_change=0.01):
    """Zoom on the gap minimum of curves (k, k+1) inside ``[lo, hi]``."""
    best = None
    for level in range(max_levels):
        pts = np.linspace(lo, hi, 5)
        gaps = np.array([_gap_at(model, w2, k, parity) for w2 in pts])
        i = int(np.argmin(gaps))
        new_best = (pts[i], gaps[i])
        lo, hi = pts[max(i - 1, 0)], pts[min(i + 1, 4)]
        if best is not None and abs(best[1] - new_best[1]) <= rel_change * new_best[1] and level >= 2:
            return new_best[0], new_best[1], True
        best = new_best
    return best[0], best[1], False


def _labels_and_slopes(model, w2, k, parity):
    sp = model.diagonalize(w2, parity, k + 2)
    v = sp.vectors[:, k:k + 2]
    slopes = tuple(float(s) for s in np.diag(model.trap_elements(v, parity)))
    labels = tuple(dominant_label(model, v[:, j], parity)[0] for j in range(2))
    return labels, slopes


def detect_crossings(model, scan: SpectralScan, max_levels: int = 12,
                     very_narrow_width: float = VERY_NARROW_WIDTH,
                     include_unexchanged: bool = False) -> list[AvoidedCrossing]:
    """Locate avoided crossings between adjacent curves of ``scan``.

    Candidates are interior local minima of each gap on the scan grid plus grid
    intervals where the overlap continuation swaps the pair. Each candidate is
    refined, fitted with a two-level model and kept when the dominant labels of
    the pair are exchanged across it.
    """
    w = scan.omega_sq
    parity = scan.parity
    gaps = scan.gaps()
    candidates = []
    for k in range(scan.n_states - 1):
        g = gaps[:, k]
        for i in range(1, len(w) - 1):
            if g[i] < g[i - 1] and g[i] <= g[i + 1]:
                candidates.append((k, w[i - 1], w[i + 1]))
        for p in range(len(w) - 1):
            if scan.continuation[p, k] == k + 1 and scan.continuation[p, k + 1] == k:
                candidates.append((k, w[max(p - 1, 0)], w[min(p + 2, len(w) - 1)]))

    # refinements of one pair closer than a grid step are the same minimum
    merge_tol = float(np.min(np.diff(w))) if len(w) > 1 else 0.0
    found: list[tuple] = []
    for k, lo, hi in candidates:
        wc, gap, ok = _refine(model, k, lo, hi, parity, max_levels)
        if not ok:
            log.warning("gap minimum of curves %d/%d near omega_sq=%.6g not resolved", k, k + 1, wc)
        dup = [i for i, f in enumerate(found) if f[0] == k and abs(f[1] - wc) <= merge_tol]
        if dup:
            if gap < found[dup[0]][2]:
                found[dup[0]] = (k, wc, gap, ok)
            continue
        found.append((k, wc, gap, ok))
    found.sort(key=lambda f: (f[1], f[0]))

    w_lo, w_hi = float(w[0]), float(w[-1])
    crossings = []
    for k, wc, gap, ok in found:
        sp = model.diagonalize(wc, parity, k + 2)
        v = sp.vectors[:, k:k + 2]
        diab = np.linalg.eigvalsh(model.trap_elements(v, parity))
        dslope = abs(diab[1] - diab[0])
        width = gap / dslope if dslope > 0 else np.inf
        # evaluation points: three widths away, but never past a neighbouring
        # crossing of either curve or the scan edge
        reach = 3.0 * width
        left = wc - reach
        right = wc + reach
        for k2, wc2, _, _ in found:
            if abs(k2 - k) <= 1 and wc2 != wc:
                if wc2 < wc:
                    left = max(left, 0.5 * (wc + wc2))
                else:
                    right = min(right, 0.5 * (wc + wc2))
        left = max(left, w_lo)
        right = min(right, w_hi)
        lab_l, sl_l = _labels_and_slopes(model, left, k, parity)
        lab_r, sl_r = _labels_and_slopes(model, right, k, parity)
        exchanged = lab_l[0] == lab_r[1] and lab_l[1] == lab_r[0] and lab_l[0] != lab_l[1]
        if not exchanged and not include_unexchanged:
            continue
        ground = k == 0 and parity == "even"
        if width < very_narrow_width:
            kind = "very_narrow"
        elif ground:
            kind = "wide"
        else:
            kind = "narrow"
        crossings.append(AvoidedCrossing(
            lower=k, upper=k + 1, omega_sq_c=float(wc), min_gap=float(gap), width=float(width),
            kind=kind, labels_before=lab_l, labels_after=lab_r, slopes_before=sl_l,
            slopes_after=sl_r, diabatic_slopes=(float(diab[0]), float(diab[1])),
            exchanged=exchanged, resolved=ok, involves_ground=ground,
        ))
    return crossings
