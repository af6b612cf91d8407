"""Command-line front end.

Subcommands map onto the library one-to-one:

  sweep    transition curves versus field magnitude or angle -> CSV
  synth    synthetic sweep traces or whole scan grids -> CSV
  fit      dispersive multi-peak fit of one trace
  invert   four line positions -> vector field
  asd      averaged amplitude spectral density of a time series
  map      full pipeline: scan directory -> frequency + field maps
  stats    central-region statistics of an emitted field map

Exit codes: 0 success, 1 data or processing failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .config import load_kv_file
from .crystal import SphericalField
from .errors import NvmagError
from .inversion import (
    InversionConfig,
    TransitionAssignment,
    default_assignment,
    invert,
)
from .noise import (
    SlopeCalibration,
    TimeSeries,
    asd_averaged,
    band_sensitivity,
    volts_to_field,
)
from .scanpipe import (
    FieldMap,
    PipelineConfig,
    PixelResult,
    central_stats,
    emit,
    ingest,
    process,
    read_field_map,
    read_timeseries_csv,
    read_trace_csv,
    synthesize_scan,
    write_asd_csv,
    write_records_csv,
    write_sweep_csv,
    write_trace_csv,
)
from .spectrum import SpectrumModel, fit_spectrum, initial_guess, sample_grid, synthesize
from .spinmodel import SpinModelParams, sweep_vs_angle, sweep_vs_field, transition_frequencies
from .crystal import spherical_to_cartesian


def _parse_direction(text):
    """Accept compact lattice directions like 100 or 111, or x,y,z floats."""
    t = text.strip()
    if "," in t:
        parts = [p for p in t.split(",") if p.strip()]
        if len(parts) != 3:
            raise ValueError(f"direction needs 3 components, got {text!r}")
        return np.array([float(p) for p in parts])
    if len(t) == 3 and all(c in "01" for c in t):
        vec = np.array([float(c) for c in t])
        if vec.any():
            return vec
    raise ValueError(f"cannot parse direction {text!r}")


def _parse_floats(text, n, what):
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != n:
        raise ValueError(f"{what} needs {n} comma-separated values, got {len(parts)}")
    return [float(p) for p in parts]


def _cmd_sweep(args):
    params = SpinModelParams(args.d_zfs_mhz, args.gamma)
    if args.vary:
        values = np.linspace(args.angle_from, args.angle_to, args.points)
        curves = sweep_vs_angle(params, args.b_mt, args.vary, values, args.fixed_deg)
    else:
        direction = _parse_direction(args.direction)
        mags = np.linspace(0.0, args.bmax_mt, args.points)
        curves = sweep_vs_field(params, direction, mags)
    write_sweep_csv(curves, args.out)
    print(f"wrote {args.out}: {curves.sweep_values.size} sweep points x 12 transitions")
    return 0


def _auto_assignment(params, fld):
    """Four strongest lines at the field, in ascending frequency order."""
    table = transition_frequencies(params, spherical_to_cartesian(fld))
    lines = sorted(table.all_lines(), key=lambda l: -l[3])[:4]
    lines.sort(key=lambda l: l[2])
    return TransitionAssignment(tuple((a, k) for a, k, _, _ in lines))


def _cmd_synth(args):
    params = SpinModelParams(args.d_zfs_mhz, args.gamma)
    fld = SphericalField(args.b_mt, args.theta_deg, args.phi_deg)
    if args.assign:
        assignment = TransitionAssignment.parse(args.assign)
    else:
        assignment = _auto_assignment(params, fld)
        print(f"auto assignment: {assignment}")

    if args.map:
        ys = [args.y0 + i * args.y_step_mm for i in range(args.ny)]
        zs = [args.z0 + i * args.z_step_mm for i in range(args.nz)]

        def field_at(y, z):
            # Mild bilinear magnitude inhomogeneity across the grid.
            if args.inhomogeneity == 0 or (len(ys) < 2 and len(zs) < 2):
                return fld
            fy = (y - ys[0]) / max(ys[-1] - ys[0], 1e-12)
            fz = (z - zs[0]) / max(zs[-1] - zs[0], 1e-12)
            scale = 1.0 + args.inhomogeneity * (fy - 0.5 + 0.5 * (fz - 0.5))
            return SphericalField(fld.b_m_mt * scale, fld.theta_deg, fld.phi_deg)

        records = synthesize_scan(
            params, field_at, ys, zs, assignment,
            fwhm_mhz=args.fwhm_mhz, amplitude=args.amplitude,
            noise_sigma=args.noise, seed=args.seed,
        )
        write_records_csv(records, args.out)
        print(f"wrote {args.out}: {len(records)} positions ({len(ys)}x{len(zs)} grid)")
    else:
        from .inversion import predict_frequencies

        centers = predict_frequencies(params, fld, assignment, warn_unobservable=False)
        centers = np.sort(centers)
        freqs = sample_grid(centers)
        model = SpectrumModel(tuple(centers), (args.amplitude,) * 4, args.fwhm_mhz)
        trace = synthesize(model, freqs, noise_sigma=args.noise, seed=args.seed)
        write_trace_csv(trace, args.out)
        print(f"wrote {args.out}: {trace.n_points} points, centers at "
              + ", ".join(f"{c:.3f}" for c in centers) + " MHz")
    return 0


def _cmd_fit(args):
    trace = read_trace_csv(args.infile)
    guess = initial_guess(trace, n_components=args.components)
    fit = fit_spectrum(trace, guess)
    for i, (c, sc, a, sa) in enumerate(
        zip(fit.model.centers_mhz, fit.center_sigmas_mhz,
            fit.model.amplitudes, fit.amplitude_sigmas)
    ):
        print(f"line {i + 1}: center = {c:.6f} +- {sc:.6f} MHz, amplitude = {a:.6g} +- {sa:.3g}")
    print(f"fwhm = {fit.model.fwhm_mhz:.6f} +- {fit.fwhm_sigma_mhz:.6f} MHz")
    print(f"baseline = {fit.model.baseline:.6g} +- {fit.baseline_sigma:.3g}")
    print(f"residual rms = {fit.residual_rms:.6g}")
    print(f"converged = {fit.converged} ({fit.iterations} iterations, {fit.message})")
    return 0 if fit.converged else 1


def _cmd_invert(args):
    params = SpinModelParams(args.d_zfs_mhz, args.gamma)
    measured = _parse_floats(args.freqs, 4, "--freqs")
    cfg = InversionConfig(
        nominal_b_mt=args.nominal_mt,
        magnitude_band=args.band,
        theta0_deg=args.theta0_deg,
        phi0_deg=args.phi0_deg,
        multistart=args.multistart,
        seed=args.seed,
    )
    if args.assign:
        assignment = TransitionAssignment.parse(args.assign)
    else:
        seed_field = SphericalField(cfg.nominal_b_mt, cfg.theta0_deg, cfg.phi0_deg)
        assignment = default_assignment(params, seed_field, measured)
        print(f"auto assignment: {assignment}")
    sigma = args.sigma_mhz if args.sigma_mhz > 0 else None
    res = invert(measured, cfg, assignment, params, sigma_mhz=sigma)
    f = res.field
    print(f"B = {f.b_m_mt:.6f} +- {res.sigma_b_mt:.6f} mT")
    print(f"theta = {f.theta_deg:.6f} +- {res.sigma_theta_deg:.6f} deg")
    print(f"phi = {f.phi_deg:.6f} +- {res.sigma_phi_deg:.6f} deg")
    print(f"residual rms = {res.residual_rms_mhz:.6g} MHz")
    print(f"unique = {res.unique}, at_band_edge = {res.at_band_edge}, "
          f"mismatch = {res.mismatch}")
    return 0


def _cmd_asd(args):
    rate, samples = read_timeseries_csv(args.infile)
    ts = TimeSeries(rate, samples)
    units = "V"
    if args.slope_v_per_hz:
        ts = volts_to_field(ts, SlopeCalibration(args.slope_v_per_hz, args.gamma))
        units = "T"
    asd = asd_averaged(ts, args.segment_s)
    if args.out:
        write_asd_csv(asd, args.out, units=units)
        print(f"wrote {args.out}: {asd.frequencies_hz.size} bins, "
              f"{asd.segment_count} segments averaged")
    if args.band:
        lo, hi = _parse_floats(args.band, 2, "--band")
        sens = band_sensitivity(asd, lo, hi)
        print(f"band sensitivity [{lo:g}, {hi:g}] Hz = {sens:.6g} {units}/sqrt(Hz)")
    return 0


def _cmd_map(args):
    cfg_dict = load_kv_file(args.config)
    cfg = PipelineConfig.from_dict(cfg_dict)
    if args.workers:
        cfg = PipelineConfig(
            params=cfg.params, inversion=cfg.inversion, assignment=cfg.assignment,
            n_components=cfg.n_components,
            rotation_lab_to_crystal=cfg.rotation_lab_to_crystal,
            y_step_mm=cfg.y_step_mm, z_step_mm=cfg.z_step_mm,
            region_mm=cfg.region_mm, workers=args.workers,
            min_strength=cfg.min_strength,
        )
    scan = ingest(args.infile)
    for w in scan.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not scan.records:
        print("error: no scan records to process", file=sys.stderr)
        return 1
    fmap = process(scan, cfg)
    for w in fmap.warnings:
        if w not in scan.warnings:
            print(f"warning: {w}", file=sys.stderr)
    formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    written = emit(fmap, args.out, formats=formats)
    ok = sum(1 for p in fmap.pixels if p.ok)
    print(f"processed {len(fmap.pixels)} pixels ({ok} ok, {fmap.n_failed} failed)")
    for path in written:
        print(f"wrote {path}")
    if cfg.region_mm is not None:
        st = central_stats(fmap, cfg.region_mm)
        _print_stats(st)
    return 0


def _print_stats(st):
    print(f"pixels = {st.n_pixels}")
    print(f"B = {st.mean_b_mt:.6f} +- {st.se_b_mt:.6f} mT")
    print(f"theta = {st.mean_theta_deg:.6f} +- {st.se_theta_deg:.6f} deg")
    print(f"phi = {st.mean_phi_deg:.6f} +- {st.se_phi_deg:.6f} deg")


def _cmd_stats(args):
    rows = read_field_map(args.infile)
    pixels = []
    for r in rows:
        pixels.append(
            PixelResult(
                y_mm=r["y_mm"], z_mm=r["z_mm"], centers_mhz=(math.nan,) * 4,
                fwhm_mhz=math.nan, b_mt=r["B_mT"], theta_deg=r["theta_deg"],
                phi_deg=r["phi_deg"], sigma_b_mt=r["sigma_B"],
                sigma_theta_deg=r["sigma_theta"], sigma_phi_deg=r["sigma_phi"],
                residual_rms_mhz=r["residual_MHz"], unique=bool(r["unique_flag"]),
                reason=r["reason"],
            )
        )
    fmap = FieldMap(
        pixels=tuple(pixels),
        y_values=tuple(sorted({p.y_mm for p in pixels})),
        z_values=tuple(sorted({p.z_mm for p in pixels})),
        assignment=None,
    )
    region = _parse_floats(args.region, 4, "--region")
    st = central_stats(fmap, region)
    _print_stats(st)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvmag",
        description="Vector magnetometry analysis for spin-1 defect ensembles",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_args(p):
        p.add_argument("--d-zfs-MHz", dest="d_zfs_mhz", type=float, default=2870.0,
                       help="zero-field splitting (default 2870)")
        p.add_argument("--gamma", type=float, default=28.024,
                       help="gyromagnetic ratio in MHz/mT (default 28.024)")

    p = sub.add_parser("sweep", help="transition curves versus field or angle")
    add_model_args(p)
    p.add_argument("--direction", default="100",
                   help="field direction: 100/111 style or x,y,z (default 100)")
    p.add_argument("--bmax-mT", dest="bmax_mt", type=float, default=150.0,
                   help="sweep magnitude from 0 to this (default 150)")
    p.add_argument("--vary", choices=("theta", "phi"),
                   help="sweep an angle instead of the magnitude")
    p.add_argument("--b-mT", dest="b_mt", type=float, default=104.5,
                   help="fixed magnitude for angle sweeps")
    p.add_argument("--from-deg", dest="angle_from", type=float, default=-90.0)
    p.add_argument("--to-deg", dest="angle_to", type=float, default=90.0)
    p.add_argument("--fixed-deg", dest="fixed_deg", type=float, default=0.0,
                   help="the angle held constant during an angle sweep")
    p.add_argument("--points", type=int, default=301)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("synth", help="generate synthetic traces or scan grids")
    add_model_args(p)
    p.add_argument("--b-mT", dest="b_mt", type=float, required=True)
    p.add_argument("--theta-deg", dest="theta_deg", type=float, required=True)
    p.add_argument("--phi-deg", dest="phi_deg", type=float, required=True)
    p.add_argument("--assign", help="axis:kind list; default picks the 4 strongest lines")
    p.add_argument("--fwhm-MHz", dest="fwhm_mhz", type=float, default=11.48)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0, help="white noise sigma (V)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--map", action="store_true", help="generate a whole scan grid")
    p.add_argument("--y0", type=float, default=0.0)
    p.add_argument("--z0", type=float, default=0.0)
    p.add_argument("--ny", type=int, default=21)
    p.add_argument("--nz", type=int, default=21)
    p.add_argument("--y-step-mm", dest="y_step_mm", type=float, default=1.5)
    p.add_argument("--z-step-mm", dest="z_step_mm", type=float, default=1.0)
    p.add_argument("--inhomogeneity", type=float, default=0.0,
                   help="relative magnitude variation across the grid")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="fit one sweep trace")
    p.add_argument("--in", dest="infile", required=True, help="trace CSV (freq_MHz, signal)")
    p.add_argument("--components", type=int, default=4)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("invert", help="four line positions -> vector field")
    add_model_args(p)
    p.add_argument("--freqs", required=True, help="f1,f2,f3,f4 in MHz")
    p.add_argument("--nominal-mT", dest="nominal_mt", type=float, required=True,
                   help="nominal field magnitude in mT")
    p.add_argument("--band", type=float, default=0.10,
                   help="fractional magnitude search band (default 0.10)")
    p.add_argument("--theta0-deg", dest="theta0_deg", type=float, default=0.0)
    p.add_argument("--phi0-deg", dest="phi0_deg", type=float, default=0.0)
    p.add_argument("--multistart", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-MHz", dest="sigma_mhz", type=float, default=0.0,
                   help="per-line measurement sigma; 0 = unknown")
    p.add_argument("--assign", help="axis:kind list; default matches nearest predicted")
    p.set_defaults(func=_cmd_invert)

    p = sub.add_parser("asd", help="averaged amplitude spectral density")
    p.add_argument("--in", dest="infile", required=True, help="time-series CSV (t_s, value)")
    p.add_argument("--segment-s", dest="segment_s", type=float, default=1.0)
    p.add_argument("--slope-V-per-Hz", dest="slope_v_per_hz", type=float, default=0.0,
                   help="lock-in slope; nonzero converts volts to tesla")
    p.add_argument("--gamma", type=float, default=28.024)
    p.add_argument("--band", help="f_lo,f_hi in Hz: print mean density in band")
    p.add_argument("--out", help="output ASD CSV path")
    p.set_defaults(func=_cmd_asd)

    p = sub.add_parser("map", help="full pipeline: scans -> frequency and field maps")
    p.add_argument("--config", required=True, help="key=value configuration file")
    p.add_argument("--in", dest="infile", required=True, help="scan CSV file or directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--formats", default="csv", help="comma list: csv,pgm (default csv)")
    p.add_argument("--workers", type=int, default=0,
                   help="override pipeline.workers from the config")
    p.set_defaults(func=_cmd_map)

    p = sub.add_parser("stats", help="central-region statistics of a field map")
    p.add_argument("--in", dest="infile", required=True, help="field_map.csv path")
    p.add_argument("--region", required=True, help="y0,y1,z0,z1 in mm")
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (NvmagError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
