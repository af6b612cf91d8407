"""Grid-scan pipeline: ingest sweeps, fit, invert, aggregate, emit maps.

A scan is a set of frequency sweeps recorded on a rectangular (y, z) grid.
Each pixel goes through peak finding, dispersive-line fitting, and field
inversion; the results form per-transition frequency maps and a vector
field map.  Failed pixels keep their grid slot with NaN values and a
reason code, so maps stay rectangular.

File formats (all CSV, comma-separated, '#' lines are comments):

  - scan input:   y_mm, z_mm, freq_MHz, signal   (long format)
  - trace:        freq_MHz, signal
  - field map:    y_mm, z_mm, B_mT, theta_deg, phi_deg, sigma_B,
                  sigma_theta, sigma_phi, residual_MHz, unique_flag, reason
  - frequency map: y_mm, z_mm, freq_MHz
  - time series:  t_s, value
  - spectral density: freq_Hz, density

Floats are written with repr(), so emitted CSVs re-ingest bit-exactly.
Optional 16-bit grayscale rasters (binary portable graymap) visualize the
field maps; their min-max scaling is recorded in a sidecar text file and
the CSV stays the authoritative output.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import config as cfgmod
from .crystal import SphericalField, as_rotation, cartesian_to_spherical, spherical_to_cartesian
from .errors import ConfigError, DataError
from .inversion import (
    InversionConfig,
    TransitionAssignment,
    default_assignment,
    invert,
    predict_frequencies,
)
from .inversion import _spherical_chain
from .spectrum import SpectrumModel, SweepTrace, initial_guess, fit_spectrum, sample_grid, synthesize
from .spinmodel import SpinModelParams, SweepCurves
from .errors import GuessError, InversionError

__all__ = [
    "ScanRecord",
    "ScanSet",
    "PipelineConfig",
    "PixelResult",
    "FieldMap",
    "FIELD_MAP_COLUMNS",
    "ingest",
    "process",
    "central_stats",
    "CentralStats",
    "emit",
    "read_field_map",
    "synthesize_scan",
    "write_records_csv",
    "read_trace_csv",
    "write_trace_csv",
    "write_sweep_csv",
    "read_timeseries_csv",
    "write_timeseries_csv",
    "write_asd_csv",
]

SCAN_COLUMNS = ("y_mm", "z_mm", "freq_MHz", "signal")
FIELD_MAP_COLUMNS = (
    "y_mm",
    "z_mm",
    "B_mT",
    "theta_deg",
    "phi_deg",
    "sigma_B",
    "sigma_theta",
    "sigma_phi",
    "residual_MHz",
    "unique_flag",
)


@dataclass(frozen=True)
class ScanRecord:
    """One sweep at one grid position."""

    y_mm: float
    z_mm: float
    trace: SweepTrace
    source: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.y_mm) and math.isfinite(self.z_mm)):
            raise DataError("positions must be finite")


@dataclass(frozen=True)
class ScanSet:
    """Ingested records plus grid-completeness findings."""

    records: tuple
    missing: tuple
    warnings: tuple


def _parse_float(text, where):
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{where}: not a number: {text!r}") from None


def _read_scan_file(path, by_pos, sources):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            cells = [c.strip() for c in row]
            if lineno == 1 and cells == list(SCAN_COLUMNS):
                continue
            if len(cells) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(cells)}")
            where = f"{path}:{lineno}"
            y = _parse_float(cells[0], where)
            z = _parse_float(cells[1], where)
            f = _parse_float(cells[2], where)
            s = _parse_float(cells[3], where)
            key = (y, z)
            if key in sources and sources[key] != str(path):
                raise DataError(
                    f"duplicate position (y={y:g}, z={z:g}) in {path} "
                    f"and {sources[key]}"
                )
            sources[key] = str(path)
            by_pos.setdefault(key, []).append((f, s))


def ingest(path) -> ScanSet:
    """Read scan CSVs from a file or a directory of files.

    Records come back sorted by (y, z).  The same position appearing in
    two files is an error naming both; gaps in the rectangular grid
    spanned by the observed y and z values are reported, not fatal.
    """
    paths = []
    if os.path.isdir(path):
        paths = sorted(
            os.path.join(path, name)
            for name in os.listdir(path)
            if name.lower().endswith(".csv")
        )
    elif os.path.exists(path):
        paths = [path]
    else:
        raise DataError(f"no such file or directory: {path}")

    by_pos: dict[tuple, list] = {}
    sources: dict[tuple, str] = {}
    for p in paths:
        _read_scan_file(p, by_pos, sources)

    warns = []
    if not by_pos:
        warns.append(f"no scan rows found under {path}")
        return ScanSet((), (), tuple(warns))

    records = []
    for (y, z) in sorted(by_pos):
        rows = sorted(by_pos[(y, z)])
        freqs = np.array([r[0] for r in rows])
        signal = np.array([r[1] for r in rows])
        try:
            trace = SweepTrace(freqs, signal, y_mm=y, z_mm=z)
        except DataError as exc:
            raise DataError(
                f"{sources[(y, z)]}: bad sweep at (y={y:g}, z={z:g}): {exc}"
            ) from None
        records.append(ScanRecord(y, z, trace, source=sources[(y, z)]))

    ys = sorted({r.y_mm for r in records})
    zs = sorted({r.z_mm for r in records})
    present = {(r.y_mm, r.z_mm) for r in records}
    missing = tuple(
        (y, z) for y in ys for z in zs if (y, z) not in present
    )
    if missing:
        warns.append(
            f"grid has {len(missing)} missing pixel(s) out of {len(ys) * len(zs)}"
        )
    return ScanSet(tuple(records), missing, tuple(warns))


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the per-pixel chain needs: model, inversion, assignment.

    ``assignment`` may be None, in which case every pixel matches its own
    fitted centers to the lines predicted at the nominal field (each pixel
    stands alone, so processing subsets cannot change results).  The
    optional lab-to-crystal rotation lets seeds and reported fields live in
    the lab frame while the inversion works in the crystal frame.
    """

    params: SpinModelParams
    inversion: InversionConfig
    assignment: TransitionAssignment | None = None
    n_components: int = 4
    rotation_lab_to_crystal: np.ndarray | None = None
    y_step_mm: float = 1.5
    z_step_mm: float = 1.0
    region_mm: tuple | None = None
    workers: int = 1
    min_strength: float = 1e-4

    def __post_init__(self):
        if not 1 <= self.n_components <= 8:
            raise ConfigError("n_components must be 1..8")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.min_strength < 0:
            raise ConfigError("min_strength must be >= 0")
        if self.rotation_lab_to_crystal is not None:
            object.__setattr__(
                self, "rotation_lab_to_crystal", as_rotation(self.rotation_lab_to_crystal)
            )

    @classmethod
    def from_dict(cls, cfg: dict) -> "PipelineConfig":
        """Build from a parsed key=value dict (see the config module)."""
        params = SpinModelParams(
            d_zfs_mhz=cfgmod.get_float(cfg, "spinmodel.d_zfs_MHz", 2870.0),
            gamma_mhz_per_mt=cfgmod.get_float(cfg, "spinmodel.gamma_MHz_per_mT", 28.024),
        )
        nominal = cfgmod.get_float(cfg, "inversion.nominal_b_mT")
        if nominal is None:
            raise ConfigError("inversion.nominal_b_mT is required")
        inv = InversionConfig(
            nominal_b_mt=nominal,
            magnitude_band=cfgmod.get_float(cfg, "inversion.magnitude_band", 0.10),
            theta0_deg=cfgmod.get_float(cfg, "inversion.theta0_deg", 0.0),
            phi0_deg=cfgmod.get_float(cfg, "inversion.phi0_deg", 0.0),
            multistart=cfgmod.get_int(cfg, "inversion.multistart", 8),
            angle_spread_deg=cfgmod.get_float(cfg, "inversion.angle_spread_deg", 10.0),
            step_tol=cfgmod.get_float(cfg, "inversion.step_tol", 1e-9),
            max_iterations=cfgmod.get_int(cfg, "inversion.max_iterations", 200),
            seed=cfgmod.get_int(cfg, "inversion.seed", 0),
        )
        assignment = None
        if "assignment.lines" in cfg:
            try:
                assignment = TransitionAssignment.parse(cfg["assignment.lines"])
            except ValueError as exc:
                raise ConfigError(f"assignment.lines: {exc}") from None
        rotation = cfgmod.get_floats(cfg, "crystal.rotation_lab_to_crystal", 9)
        region = cfgmod.get_floats(cfg, "stats.region_mm", 4)
        return cls(
            params=params,
            inversion=inv,
            assignment=assignment,
            n_components=cfgmod.get_int(cfg, "spectrum.components", 4),
            rotation_lab_to_crystal=(
                np.array(rotation).reshape(3, 3) if rotation is not None else None
            ),
            y_step_mm=cfgmod.get_float(cfg, "scan.y_step_mm", 1.5),
            z_step_mm=cfgmod.get_float(cfg, "scan.z_step_mm", 1.0),
            region_mm=region,
            workers=cfgmod.get_int(cfg, "pipeline.workers", 1),
            min_strength=cfgmod.get_float(cfg, "pipeline.min_strength", 1e-4),
        )


@dataclass(frozen=True)
class PixelResult:
    """Outcome of one pixel; NaN fields plus a reason code on failure."""

    y_mm: float
    z_mm: float
    centers_mhz: tuple
    fwhm_mhz: float
    b_mt: float
    theta_deg: float
    phi_deg: float
    sigma_b_mt: float
    sigma_theta_deg: float
    sigma_phi_deg: float
    residual_rms_mhz: float
    unique: bool
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.reason == ""


@dataclass(frozen=True)
class FieldMap:
    """Per-pixel results on the scan grid plus processing metadata."""

    pixels: tuple
    y_values: tuple
    z_values: tuple
    assignment: TransitionAssignment | None
    warnings: tuple = ()
    failure_histogram: dict = dc_field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(1 for p in self.pixels if not p.ok)

    def pixel_at(self, y_mm, z_mm) -> PixelResult:
        for p in self.pixels:
            if p.y_mm == y_mm and p.z_mm == z_mm:
                return p
        raise KeyError(f"no pixel at (y={y_mm:g}, z={z_mm:g})")


def _failed_pixel(rec, reason, centers=None, fwhm=math.nan):
    nan4 = (math.nan,) * 4
    return PixelResult(
        y_mm=rec.y_mm,
        z_mm=rec.z_mm,
        centers_mhz=tuple(centers) if centers is not None else nan4,
        fwhm_mhz=fwhm,
        b_mt=math.nan,
        theta_deg=math.nan,
        phi_deg=math.nan,
        sigma_b_mt=math.nan,
        sigma_theta_deg=math.nan,
        sigma_phi_deg=math.nan,
        residual_rms_mhz=math.nan,
        unique=False,
        reason=reason,
    )


def _rotate_to_lab(rot, b_mt, theta_deg, phi_deg, sigmas):
    """Crystal-frame spherical solution -> lab-frame spherical + sigmas."""
    b_cryst = spherical_to_cartesian(SphericalField(b_mt, theta_deg, phi_deg))
    b_lab = rot.T @ b_cryst
    fld = cartesian_to_spherical(b_lab)
    if not np.all(np.isfinite(sigmas)):
        return fld, (math.nan, math.nan, math.nan)
    # Propagate the diagonal spherical covariance through the rotation.
    t_cryst = _spherical_chain(b_mt, theta_deg, phi_deg)
    cov_cart = t_cryst @ np.diag(np.square(sigmas)) @ t_cryst.T
    cov_lab = rot.T @ cov_cart @ rot
    t_lab = _spherical_chain(fld.b_m_mt, fld.theta_deg, fld.phi_deg)
    try:
        s = np.linalg.inv(t_lab)
    except np.linalg.LinAlgError:
        return fld, (math.nan, math.nan, math.nan)
    cov_sph = s @ cov_lab @ s.T
    out = tuple(float(x) for x in np.sqrt(np.maximum(np.diag(cov_sph), 0.0)))
    return fld, out


def _process_one(task):
    """Fit and invert one record; never raises, returns a PixelResult."""
    rec, cfg = task
    try:
        guess = initial_guess(rec.trace, n_components=cfg.n_components)
    except GuessError as exc:
        return _failed_pixel(rec, f"guess: {exc}")
    try:
        fit = fit_spectrum(rec.trace, guess)
    except (DataError, ValueError) as exc:
        return _failed_pixel(rec, f"fit: {exc}")
    if not fit.converged:
        return _failed_pixel(
            rec, f"fit: {fit.message}", centers=fit.model.centers_mhz, fwhm=fit.model.fwhm_mhz
        )

    centers = fit.model.centers_mhz
    inv_cfg = cfg.inversion
    seed_field = SphericalField(inv_cfg.nominal_b_mt, inv_cfg.theta0_deg, inv_cfg.phi0_deg)
    rot = cfg.rotation_lab_to_crystal
    if rot is not None:
        # Seeds are lab-frame; the inversion runs in the crystal frame.
        seed_cryst = cartesian_to_spherical(rot @ spherical_to_cartesian(seed_field))
        inv_cfg = InversionConfig(
            nominal_b_mt=inv_cfg.nominal_b_mt,
            magnitude_band=inv_cfg.magnitude_band,
            theta0_deg=seed_cryst.theta_deg,
            phi0_deg=seed_cryst.phi_deg,
            multistart=inv_cfg.multistart,
            angle_spread_deg=inv_cfg.angle_spread_deg,
            step_tol=inv_cfg.step_tol,
            max_iterations=inv_cfg.max_iterations,
            seed=inv_cfg.seed,
        )
        seed_field = seed_cryst

    assignment = cfg.assignment
    if assignment is None:
        try:
            assignment = default_assignment(
                cfg.params, seed_field, centers, min_strength=cfg.min_strength
            )
        except InversionError as exc:
            return _failed_pixel(rec, f"assign: {exc}", centers=centers, fwhm=fit.model.fwhm_mhz)

    sigma = np.asarray(fit.center_sigmas_mhz, dtype=float)
    sigma_arg = sigma if np.all(np.isfinite(sigma)) and np.all(sigma > 0) else None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = invert(centers, inv_cfg, assignment, cfg.params, sigma_mhz=sigma_arg)
    except (InversionError, ValueError) as exc:
        return _failed_pixel(rec, f"invert: {exc}", centers=centers, fwhm=fit.model.fwhm_mhz)

    fld = res.field
    sigmas = (res.sigma_b_mt, res.sigma_theta_deg, res.sigma_phi_deg)
    if rot is not None:
        fld, sigmas = _rotate_to_lab(
            rot, fld.b_m_mt, fld.theta_deg, fld.phi_deg, np.asarray(sigmas)
        )
    return PixelResult(
        y_mm=rec.y_mm,
        z_mm=rec.z_mm,
        centers_mhz=centers,
        fwhm_mhz=fit.model.fwhm_mhz,
        b_mt=fld.b_m_mt,
        theta_deg=fld.theta_deg,
        phi_deg=fld.phi_deg,
        sigma_b_mt=float(sigmas[0]),
        sigma_theta_deg=float(sigmas[1]),
        sigma_phi_deg=float(sigmas[2]),
        residual_rms_mhz=res.residual_rms_mhz,
        unique=res.unique,
        reason="",
    )


def process(records, cfg: PipelineConfig) -> FieldMap:
    """Run guess -> fit -> invert on every record.

    Accepts a ScanSet or a plain record list.  Pixels are independent;
    with ``cfg.workers > 1`` they are distributed over a process pool and
    collected in grid order, so the output does not depend on scheduling.
    Emits a warning when more than 20% of pixels fail.
    """
    carried = ()
    if isinstance(records, ScanSet):
        carried = records.warnings
        records = records.records
    records = sorted(records, key=lambda r: (r.y_mm, r.z_mm))
    tasks = [(rec, cfg) for rec in records]

    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            pixels = list(pool.map(_process_one, tasks, chunksize=8))
    else:
        pixels = [_process_one(t) for t in tasks]

    histogram = Counter(p.reason.split(":", 1)[0] for p in pixels if not p.ok)
    warns = list(carried)
    if pixels and len(histogram) and sum(histogram.values()) > 0.2 * len(pixels):
        msg = (
            f"{sum(histogram.values())} of {len(pixels)} pixels failed "
            f"({dict(histogram)})"
        )
        warns.append(msg)
        warnings.warn(msg, stacklevel=2)

    return FieldMap(
        pixels=tuple(pixels),
        y_values=tuple(sorted({p.y_mm for p in pixels})),
        z_values=tuple(sorted({p.z_mm for p in pixels})),
        assignment=cfg.assignment,
        warnings=tuple(warns),
        failure_histogram=dict(histogram),
    )


@dataclass(frozen=True)
class CentralStats:
    """Unweighted means and standard errors over a rectangular region."""

    n_pixels: int
    mean_b_mt: float
    mean_theta_deg: float
    mean_phi_deg: float
    se_b_mt: float
    se_theta_deg: float
    se_phi_deg: float


def central_stats(fmap: FieldMap, region_mm) -> CentralStats:
    """Statistics of (B, theta, phi) over pixels inside ``region_mm``.

    ``region_mm`` is (y0, y1, z0, z1), inclusive.  Failed pixels are
    excluded; a region with no successful pixels is an error.
    """
    y0, y1, z0, z1 = (float(v) for v in region_mm)
    if y1 < y0 or z1 < z0:
        raise ValueError("region must have y0 <= y1 and z0 <= z1")
    sel = [
        p
        for p in fmap.pixels
        if p.ok and y0 <= p.y_mm <= y1 and z0 <= p.z_mm <= z1
    ]
    if not sel:
        raise DataError("no successful pixels inside the region")
    b = np.array([p.b_mt for p in sel])
    th = np.array([p.theta_deg for p in sel])
    ph = np.array([p.phi_deg for p in sel])

    def se(a):
        return float(np.std(a, ddof=1) / math.sqrt(a.size)) if a.size > 1 else math.nan

    return CentralStats(
        n_pixels=len(sel),
        mean_b_mt=float(b.mean()),
        mean_theta_deg=float(th.mean()),
        mean_phi_deg=float(ph.mean()),
        se_b_mt=se(b),
        se_theta_deg=se(th),
        se_phi_deg=se(ph),
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _check_writable(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise DataError(f"output directory not writable: {out_dir}")


def emit(fmap: FieldMap, out_dir, formats=("csv",)) -> list:
    """Write frequency maps, the field map, and optional rasters.

    Returns the list of paths written.  With "csv" in ``formats`` this is
    one frequency map per fitted line (ascending center order) and the
    field-map report; with "pgm" also one 16-bit graymap per field
    quantity, min-max scaled, scaling recorded in a sidecar.
    """
    for f in formats:
        if f not in ("csv", "pgm"):
            raise ValueError(f"unknown format {f!r}")
    _check_writable(out_dir)
    written = []

    n_lines = 4
    for p in fmap.pixels:
        n_lines = len(p.centers_mhz)
        break

    if "csv" in formats:
        for i in range(n_lines):
            if fmap.assignment is not None:
                axis, kind = fmap.assignment.pairs[i]
                name = f"freq_map_{i + 1}_axis{axis}_{kind}.csv"
            else:
                name = f"freq_map_{i + 1}.csv"
            path = os.path.join(out_dir, name)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["y_mm", "z_mm", "freq_MHz"])
                for p in fmap.pixels:
                    w.writerow([_fmt(p.y_mm), _fmt(p.z_mm), _fmt(p.centers_mhz[i])])
            written.append(path)

        path = os.path.join(out_dir, "field_map.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(list(FIELD_MAP_COLUMNS) + ["reason"])
            for p in fmap.pixels:
                w.writerow(
                    [
                        _fmt(p.y_mm),
                        _fmt(p.z_mm),
                        _fmt(p.b_mt),
                        _fmt(p.theta_deg),
                        _fmt(p.phi_deg),
                        _fmt(p.sigma_b_mt),
                        _fmt(p.sigma_theta_deg),
                        _fmt(p.sigma_phi_deg),
                        _fmt(p.residual_rms_mhz),
                        1 if p.unique else 0,
                        p.reason,
                    ]
                )
        written.append(path)

    if "pgm" in formats:
        quantities = (
            ("B_mT", lambda p: p.b_mt),
            ("theta_deg", lambda p: p.theta_deg),
            ("phi_deg", lambda p: p.phi_deg),
            ("residual_MHz", lambda p: p.residual_rms_mhz),
        )
        for name, getter in quantities:
            written.extend(_write_pgm(fmap, out_dir, name, getter))

    return written


def _write_pgm(fmap, out_dir, name, getter):
    ys = list(fmap.y_values)
    zs = list(fmap.z_values)
    grid = np.full((len(zs), len(ys)), np.nan)
    for p in fmap.pixels:
        grid[zs.index(p.z_mm), ys.index(p.y_mm)] = getter(p)

    finite = grid[np.isfinite(grid)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 0.0
    span = hi - lo
    scaled = np.zeros_like(grid)
    if span > 0:
        scaled = (grid - lo) / span
    scaled = np.where(np.isfinite(grid), scaled, 0.0)
    pixels = np.round(scaled * 65535).astype(">u2")

    path = os.path.join(out_dir, f"field_{name}.pgm")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{len(ys)} {len(zs)}\n65535\n".encode("ascii"))
        fh.write(pixels.tobytes())
    sidecar = path + ".scale.txt"
    with open(sidecar, "w", encoding="utf-8") as fh:
        fh.write(f"quantity = {name}\n")
        fh.write(f"min = {_fmt(lo)}\n")
        fh.write(f"max = {_fmt(hi)}\n")
        fh.write(f"rows = z ascending, columns = y ascending\n")
        fh.write(f"value = min + (pixel / 65535) * (max - min)\n")
        fh.write(f"nan_pixels = {int(np.sum(~np.isfinite(grid)))} (written as 0)\n")
    return [path, sidecar]


def read_field_map(path) -> list:
    """Rows of an emitted field-map CSV as dicts with floats parsed back."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[: len(FIELD_MAP_COLUMNS)] != list(FIELD_MAP_COLUMNS):
            raise DataError(f"{path}: not a field-map CSV (header mismatch)")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < len(FIELD_MAP_COLUMNS):
                raise DataError(f"{path}:{lineno}: short row")
            rec = {
                col: _parse_float(row[i], f"{path}:{lineno}")
                for i, col in enumerate(FIELD_MAP_COLUMNS)
                if col != "unique_flag"
            }
            rec["unique_flag"] = int(row[FIELD_MAP_COLUMNS.index("unique_flag")])
            rec["reason"] = row[len(FIELD_MAP_COLUMNS)] if len(row) > len(FIELD_MAP_COLUMNS) else ""
            rows.append(rec)
    return rows


def synthesize_scan(
    params: SpinModelParams,
    field_at,
    y_values_mm,
    z_values_mm,
    assignment: TransitionAssignment,
    fwhm_mhz=11.48,
    amplitude=1.0,
    baseline=0.0,
    noise_sigma=0.0,
    seed=0,
    half_width_mhz=20.0,
    step_mhz=1.0,
) -> list:
    """Forward-model a grid of sweeps for pipeline tests and demos.

    ``field_at(y, z)`` returns the SphericalField at a position.  Each
    sweep samples clustered windows around the four assigned line
    positions.  All lines get the same dispersive amplitude, a synthetic
    simplification (real line depths vary with drive strength and
    contrast).  Noise is seeded per position for reproducibility.
    """
    records = []
    for iy, y in enumerate(y_values_mm):
        for iz, z in enumerate(z_values_mm):
            fld = field_at(y, z)
            centers = predict_frequencies(params, fld, assignment, warn_unobservable=False)
            order = np.argsort(centers)
            freqs = sample_grid(centers[order], half_width_mhz, step_mhz)
            model = SpectrumModel(
                tuple(centers[order]),
                (amplitude,) * len(centers),
                fwhm_mhz,
                baseline,
            )
            trace = synthesize(
                model, freqs, noise_sigma=noise_sigma,
                seed=seed + 1000003 * iy + 1009 * iz,
            )
            records.append(
                ScanRecord(float(y), float(z), SweepTrace(trace.freqs_mhz, trace.signal, y_mm=float(y), z_mm=float(z)), source="synthetic")
            )
    return records


def write_records_csv(records, path):
    """Write scan records in the long input format (one file)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SCAN_COLUMNS)
        for rec in records:
            for f, s in zip(rec.trace.freqs_mhz, rec.trace.signal):
                w.writerow([_fmt(rec.y_mm), _fmt(rec.z_mm), _fmt(float(f)), _fmt(float(s))])


def read_trace_csv(path) -> SweepTrace:
    """Read a single-sweep CSV with columns freq_MHz, signal."""
    freqs = []
    signal = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            cells = [c.strip() for c in row]
            if lineno == 1 and cells == ["freq_MHz", "signal"]:
                continue
            if len(cells) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(cells)}")
            where = f"{path}:{lineno}"
            freqs.append(_parse_float(cells[0], where))
            signal.append(_parse_float(cells[1], where))
    if not freqs:
        raise DataError(f"{path}: no data rows")
    return SweepTrace(np.array(freqs), np.array(signal))


def write_trace_csv(trace: SweepTrace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_MHz", "signal"])
        for f, s in zip(trace.freqs_mhz, trace.signal):
            w.writerow([_fmt(float(f)), _fmt(float(s))])


def write_sweep_csv(curves: SweepCurves, path):
    """Write sweep curves in long format: sweep_value, axis, transition, freq_MHz, strength."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep_value", "axis", "transition", "freq_MHz", "strength"])
        for i, v in enumerate(curves.sweep_values):
            for axis in range(4):
                for kind in ("minus", "plus", "dq"):
                    w.writerow(
                        [
                            _fmt(float(v)),
                            axis + 1,
                            kind,
                            _fmt(float(getattr(curves, f"f_{kind}")[i, axis])),
                            _fmt(float(getattr(curves, f"s_{kind}")[i, axis])),
                        ]
                    )


def read_timeseries_csv(path):
    """Read a t_s, value CSV; returns (sample_rate_hz, samples array).

    The time column must be uniformly spaced within 1e-6 relative.
    """
    ts = []
    vs = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            cells = [c.strip() for c in row]
            if cells == ["t_s", "value"]:
                continue
            if len(cells) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(cells)}")
            where = f"{path}:{lineno}"
            ts.append(_parse_float(cells[0], where))
            vs.append(_parse_float(cells[1], where))
    if len(ts) < 2:
        raise DataError(f"{path}: need at least two samples")
    dt = np.diff(np.array(ts))
    if dt.min() <= 0 or (dt.max() - dt.min()) > 1e-6 * dt.mean():
        raise DataError(f"{path}: time axis is not uniformly increasing")
    return 1.0 / float(dt.mean()), np.array(vs)


def write_timeseries_csv(sample_rate_hz, samples, path, units="V"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# time series, value in {units}\n")
        w = csv.writer(fh)
        w.writerow(["t_s", "value"])
        for i, v in enumerate(np.asarray(samples, dtype=float)):
            w.writerow([_fmt(i / sample_rate_hz), _fmt(float(v))])


def write_asd_csv(asd, path, units="V"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# one-sided amplitude spectral density, density in {units}/sqrt(Hz)\n")
        fh.write(
            f"# {asd.segment_count} segments of {_fmt(asd.segment_duration_s)} s, "
            "rectangular window, no overlap\n"
        )
        w = csv.writer(fh)
        w.writerow(["freq_Hz", "density"])
        for f, d in zip(asd.frequencies_hz, asd.density):
            w.writerow([_fmt(float(f)), _fmt(float(d))])
