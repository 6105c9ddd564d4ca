"""Command-line entry point: ``latticequench <command> [--preset NAME] [--config FILE] ...``.

Exit codes: 0 success, 2 configuration error, 3 convergence or numerical
check failure, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, list_presets, load_config
from .dvr import EigenSolverError
from .fock import BasisTooLarge, format_label, parse_label
from .hamiltonian import RegionSpec
from .io import OUTPUT_ENV, RunRecorder
from .oracles import OracleTooLarge
from .orbitals import BandOverlapError
from .quench import CompletenessError, DegenerateGroundState

log = logging.getLogger("latticequench")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_RESOURCE = 0, 2, 3, 4


class CheckFailed(RuntimeError):
    pass


# -- helpers ------------------------------------------------------------------

def _model(cfg: RunConfig):
    from .model import LatticeModel

    return LatticeModel(cfg.model)


def _core(model, n_core):
    n_core = min(n_core, model.n_sites)
    return RegionSpec.core(n_core)


def _scan_grid(cfg: RunConfig):
    s = cfg.scan
    return np.linspace(s.omega_sq_min, s.omega_sq_max, s.n_points)


def _crossings(model, cfg: RunConfig, omega_sq=None, parity=None):
    from .spectrum import detect_crossings, scan_spectrum

    grid = _scan_grid(cfg) if omega_sq is None else omega_sq
    n_states = min(cfg.scan.n_states, model.block_dimension(parity or cfg.scan.parity))
    scan = scan_spectrum(model, grid, n_states, parity or cfg.scan.parity, cfg.run.threads)
    return scan, detect_crossings(model, scan, cfg.scan.max_refine_levels)


# -- commands -----------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig, rec: RunRecorder) -> None:
    with rec.stage("model"):
        model = _model(cfg)
    with rec.stage("scan"):
        scan, crossings = _crossings(model, cfg)
    rows = []
    for p, w2 in enumerate(scan.omega_sq):
        for k in range(scan.n_states):
            rows.append((w2, k, scan.energies[p, k], scan.parity,
                         format_label(scan.labels[p][k], model.n_sites), scan.weights[p, k]))
    rec.csv("spectrum.csv", ["omega_sq", "curve", "energy", "parity", "label", "weight"], rows)
    rec.json("crossings.json", {
        "crossings": [c.as_dict(model.n_sites) for c in crossings],
        "ambiguous_continuation": [{"point": p, "omega_sq": scan.omega_sq[p], "curve": k}
                                   for p, k in scan.ambiguities],
    })
    rec.diagnostics.update(n_crossings=len(crossings), basis_size=len(model.basis),
                           unresolved=sum(not c.resolved for c in crossings))
    print(f"{len(crossings)} avoided crossings ({scan.parity} block, {scan.n_states} curves)")
    for c in crossings:
        print(f"  curves {c.lower}/{c.upper}  omega_sq={c.omega_sq_c:.5f}  gap={c.min_gap:.3e}  "
              f"width={c.width:.3e}  {c.kind}")


def _targets(model, result, cfg: RunConfig):
    q = cfg.quench
    nb = model.config.n_bands
    if q.targets:
        return [parse_label(t, model.n_sites, nb) for t in q.targets]
    # automatic: the block basis states reaching the largest populations
    labels = model.block_labels(result.parity)
    pops = np.abs(result.vectors @ result.amplitudes(result.times[::10])) ** 2
    order = np.argsort(-pops.max(axis=1), kind="stable")[: q.n_targets]
    return [labels[i] for i in sorted(order)]


def _run_quench(model, cfg: RunConfig, omega_i_sq=None, omega_f_sq=None):
    from .quench import QuenchProtocol, evolve

    q = cfg.quench
    proto = QuenchProtocol(q.omega_i_sq if omega_i_sq is None else omega_i_sq,
                           q.omega_f_sq if omega_f_sq is None else omega_f_sq,
                           q.t_final, q.dt_sample)
    return evolve(model, proto, n_keep=q.n_keep or None, defect_tol=q.defect_tol)


def cmd_quench(cfg: RunConfig, rec: RunRecorder) -> None:
    from .observables import (fourier_branches, region_moments, temporal_variance,
                              time_averaged_variance)
    from .quench import population_timeseries

    with rec.stage("model"):
        model = _model(cfg)
    with rec.stage("evolve"):
        res = _run_quench(model, cfg)
    with rec.stage("observables"):
        whole = region_moments(model, res, RegionSpec.whole())
        core = region_moments(model, res, _core(model, 3))
        n = model.config.n_particles
        rec.csv("timeseries.csv", ["t", "sigma2_L", "sigma2_3w", "n3w_over_n", "x_core"],
                zip(res.times, whole.variance, core.variance, core.number / n, core.mean))
        targets = _targets(model, res, cfg)
        pops = [population_timeseries(res, t) for t in targets]
        rec.csv("populations.csv", ["t", *(format_label(t, model.n_sites) for t in targets)],
                zip(res.times, *pops))
        fb = fourier_branches(res, whole.variance)
        rec.csv("fourier.csv", ["omega_fourier", "magnitude"], zip(fb.frequency, fb.magnitude))
        rec.csv("lines.csv", ["omega", "amplitude"], fb.lines.tolist())
        av = time_averaged_variance(res, whole.variance)
        tv = temporal_variance(res, whole.variance)
    rec.json("branches.json", {"bin_width": fb.bin_width, "peaks": fb.peaks, "unmatched": fb.unmatched,
                               "time_average": vars(av), "temporal_variance": vars(tv)})
    rec.diagnostics.update(defect=res.defect, n_kept=res.n_kept, basis_size=len(model.basis))
    print(f"quench {res.protocol.omega_i_sq} -> {res.protocol.omega_f_sq}: K={res.n_kept}, "
          f"defect={res.defect:.2e}")
    print(f"  Delta_T sigma2_L: integral {tv.integral:.6e}  spectral {tv.spectral_finite:.6e}")
    print(f"  time average - sigma2(0): integral {av.integral:.6e}  spectral {av.spectral_finite:.6e}")
    for t, p in zip(targets, pops):
        print(f"  {format_label(t, model.n_sites):>24s}  max population {p.max():.3f}")


def response_grid(cfg: RunConfig, crossings=()) -> np.ndarray:
    """Uniform post-quench grid plus extra points around each detected crossing."""
    r = cfg.response
    grid = np.linspace(r.omega_f_min, r.omega_f_max, r.n_points)
    if r.refine_near_crossings and crossings:
        step = grid[1] - grid[0]
        extra = []
        for c in crossings:
            for f in (-2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0):
                extra.append(c.omega_sq_c + f * max(c.width, 1e-4))
            extra.extend(c.omega_sq_c + np.array([-0.5, 0.5]) * step)
        extra = [e for e in extra if r.omega_f_min <= e <= min(r.omega_f_max, cfg.quench.omega_i_sq)]
        grid = np.unique(np.round(np.concatenate([grid, extra]), 12))
    return grid[grid <= cfg.quench.omega_i_sq]


def annotate_peaks(peaks, crossings, n_sites):
    for p in peaks:
        if crossings:
            c = min(crossings, key=lambda c: abs(c.omega_sq_c - p["omega_sq"]))
            p["nearest_crossing"] = {"omega_sq_c": c.omega_sq_c, "curves": [c.lower, c.upper],
                                     "kind": c.kind, "distance": p["omega_sq"] - c.omega_sq_c,
                                     "labels": [format_label(x, n_sites) for x in c.labels_before]}
    return peaks


def cmd_response_scan(cfg: RunConfig, rec: RunRecorder) -> None:
    from .observables import find_peaks_with_widths, response_scan

    with rec.stage("model"):
        model = _model(cfg)
    with rec.stage("crossings"):
        hi = min(cfg.response.omega_f_max, cfg.quench.omega_i_sq)
        lo = cfg.response.omega_f_min
        npts = max(3, int(round(cfg.scan.n_points * (hi - lo) / max(cfg.scan.omega_sq_max - cfg.scan.omega_sq_min, 1e-12))))
        _, crossings = _crossings(model, cfg, np.linspace(lo, hi, npts), "even")
    grid = response_grid(cfg, crossings)
    core = _core(model, cfg.multiwell.core_sites) if (cfg.response.measure == "core" or model.n_sites > 3) else None
    with rec.stage("scan"):
        scan = response_scan(model, cfg.quench.omega_i_sq, grid, cfg.quench.t_final,
                             cfg.quench.dt_sample, core, cfg.run.threads)
    cols = {
        "omega_f_sq": scan.omega_f_sq,
        "dT_integral": scan.column("temporal", "integral"),
        "dT_spectral": scan.column("temporal", "spectral"),
        "dT_spectral_finite": scan.column("temporal", "spectral_finite"),
        "avg_integral": scan.column("averaged", "integral"),
        "avg_spectral": scan.column("averaged", "spectral"),
        "avg_spectral_finite": scan.column("averaged", "spectral_finite"),
        "dT_core_integral": scan.core_temporal if scan.core_temporal is not None
        else np.full(len(grid), np.nan),
    }
    rec.csv("response.csv", list(cols), zip(*cols.values()))
    measure = cols["dT_core_integral"] if cfg.response.measure == "core" else cols["dT_integral"]
    peaks = annotate_peaks(find_peaks_with_widths(scan.omega_f_sq, measure), crossings, model.n_sites)
    rec.json("peaks.json", {"measure": cfg.response.measure, "peaks": peaks,
                            "crossings": [c.as_dict(model.n_sites) for c in crossings]})
    rec.diagnostics.update(n_points=len(grid), n_peaks=len(peaks))
    print(f"response scan: {len(grid)} points, {len(peaks)} local maxima of Delta_T ({cfg.response.measure})")
    for p in sorted(peaks, key=lambda p: -p["height"])[:10]:
        near = p.get("nearest_crossing")
        extra = f"  nearest crossing {near['omega_sq_c']:.4f}" if near else ""
        print(f"  omega_f_sq={p['omega_sq']:.4f}  height={p['height']:.4e}  half-width={p['half_width']:.2e}{extra}")


def cmd_multiwell(cfg: RunConfig, rec: RunRecorder) -> None:
    from .observables import one_body_density, region_moments

    with rec.stage("model"):
        model = _model(cfg)
    mw = cfg.multiwell
    core = _core(model, mw.core_sites)
    n = model.config.n_particles
    fractions, sig, table = [], [], []
    times = None
    for k, wi in enumerate(mw.omega_i_sq_list):
        with rec.stage("evolve"):
            res = _run_quench(model, cfg, wi, mw.omega_f_sq)
        with rec.stage("observables"):
            times = res.times
            frac = region_moments(model, res, core).number / n
            whole = region_moments(model, res, RegionSpec.whole())
            fractions.append(frac)
            sig.append(whole.variance)
            every = max(1, int(round(mw.density_every / cfg.quench.dt_sample)))
            t_sl = res.times[::every]
            dens = one_body_density(model, res.states(t_sl), res.parity)
            rec.csv(f"density_wi{k}.csv", ["x", *(f"t={t:g}" for t in t_sl)],
                    zip(model.grid.points, *dens))
        esc = 1.0 - frac
        table.append((wi, esc[-1], esc.max(), float(np.mean(esc)), res.n_kept, res.defect))
        rec.diagnostics.setdefault("defects", []).append(res.defect)
    rec.csv("core_fraction.csv", ["t", *(f"wi={w:g}" for w in mw.omega_i_sq_list)], zip(times, *fractions))
    rec.csv("sigma2_L.csv", ["t", *(f"wi={w:g}" for w in mw.omega_i_sq_list)], zip(times, *sig))
    rec.csv("comparison.csv", ["omega_i_sq", "escaped_final", "escaped_max", "escaped_mean", "n_kept",
                               "defect"], table)
    print(f"multiwell S={model.n_sites}, N={n}, quench to omega_f_sq={mw.omega_f_sq}")
    for row in table:
        fin, top = (0.0 if abs(v) < 5e-5 else v for v in row[1:3])
        print(f"  omega_i_sq={row[0]:<6g} escaped fraction: final {fin:.4f}  max {top:.4f}")


def cmd_wannier_dump(cfg: RunConfig, rec: RunRecorder) -> None:
    from .bhm import extract_params
    from .orbitals import write_wannier_csv

    model = _model(cfg)
    path = rec.path("wannier.csv")
    write_wannier_csv(model.orbitals, path)
    rec.add_file(path)
    rows = []
    for w2 in _scan_grid(cfg):
        p = extract_params(model.one_body, model.two_body, w2, model.n_sites)
        rows.append((w2, p.J, p.U, p.eps, p.e0, p.eps_per_omega_sq))
    rec.csv("bhm.csv", ["omega_sq", "J", "U", "eps", "e0", "eps_per_omega_sq"], rows)
    orb = model.orbitals
    rec.csv("orbitals.csv", ["band", "site", "center", "energy"],
            zip(orb.band_of, orb.site_of, orb.centers, orb.energies))
    p0 = extract_params(model.one_body, model.two_body, 0.0, model.n_sites)
    print(f"Wannier orbitals: {orb.n_orbitals} ({model.config.n_bands} bands x {model.n_sites} sites)")
    print(f"  J={p0.J:.6g}  U={p0.U:.6g}  U/J={p0.u_over_j:.4g}  eps/omega_sq={p0.eps_per_omega_sq:.6g}")


def cmd_selftest(cfg: RunConfig, rec: RunRecorder, emit_derived: bool = False) -> None:
    from .selftest import derived_constants, run_checks

    with rec.stage("checks"):
        results = run_checks()
    width = max(len(r["name"]) for r in results)
    for r in results:
        print(f"{'PASS' if r['ok'] else 'FAIL'}  {r['name']:<{width}}  {r['detail']}")
    rec.json("selftest.json", results)
    if emit_derived:
        with rec.stage("derived"):
            rec.json("derived.json", derived_constants())
        print(f"derived constants written to {rec.path('derived.json')}")
    failed = [r["name"] for r in results if not r["ok"]]
    rec.diagnostics["failed"] = failed
    if failed:
        raise CheckFailed(f"{len(failed)} self-test check(s) failed")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "quench": cmd_quench,
    "response-scan": cmd_response_scan,
    "multiwell": cmd_multiwell,
    "wannier-dump": cmd_wannier_dump,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latticequench", description=__doc__.splitlines()[0])
    ap.add_argument("--list-presets", action="store_true", help="print the bundled presets and exit")
    sub = ap.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--preset", help="bundled preset, e.g. spectrum-g1 (see --list-presets)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one key (repeatable)")
        p.add_argument("--output-dir", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
        p.add_argument("--threads", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "selftest":
            p.add_argument("--emit-derived", action="store_true",
                           help="also write the oracle-derived constants")
    return ap


def resolve_config(args) -> RunConfig:
    overrides = list(args.set)
    cfg = load_config(args.config, overrides, preset=args.preset)
    out = args.output_dir or os.environ.get(OUTPUT_ENV)
    run = cfg.run
    if out:
        run = replace(run, output_dir=out)
    if args.threads is not None:
        run = replace(run, threads=args.threads)
    return replace(cfg, run=run).validate()


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.list_presets:
        print("\n".join(list_presets()))
        return EXIT_OK
    if not args.command:
        ap.print_help()
        return EXIT_CONFIG
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level="INFO" if args.verbose else cfg.run.log_level,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(cfg.run.output_dir)
    rec = RunRecorder(out, args.command, cfg.to_toml())
    code, status = EXIT_OK, "ok"
    try:
        if args.command == "selftest":
            cmd_selftest(cfg, rec, args.emit_derived)
        else:
            COMMANDS[args.command](cfg, rec)
    except (ConfigError, BandOverlapError, ValueError) as exc:
        code, status = EXIT_CONFIG, f"config error: {exc}"
    except (CompletenessError, EigenSolverError, DegenerateGroundState, CheckFailed) as exc:
        code, status = EXIT_CONVERGENCE, f"convergence error: {exc}"
    except (BasisTooLarge, OracleTooLarge, MemoryError) as exc:
        hint = " (reduce model.n_bands or model.n_particles)" if isinstance(exc, BasisTooLarge) else ""
        code, status = EXIT_RESOURCE, f"resource cap: {exc}{hint}"
    rec.diagnostics["exit_code"] = code
    rec.finalize(status)
    if code:
        print(status, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
