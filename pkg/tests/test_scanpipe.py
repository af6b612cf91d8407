import math
import os

import numpy as np
import pytest

from nvmag.config import load_kv_file, parse_kv_text
from nvmag.crystal import SphericalField, cartesian_to_spherical, spherical_to_cartesian
from nvmag.errors import ConfigError, DataError
from nvmag.inversion import InversionConfig, TransitionAssignment
from nvmag.spectrum import SweepTrace
from nvmag.spinmodel import SpinModelParams, sweep_vs_field
from nvmag.noise import TimeSeries, asd_averaged
from nvmag.scanpipe import (
    FIELD_MAP_COLUMNS,
    CentralStats,
    PipelineConfig,
    ScanRecord,
    ScanSet,
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
    write_timeseries_csv,
    write_trace_csv,
)

PARAMS = SpinModelParams()
TRUTH = SphericalField(104.5, 35.46, -2.43)
# the magnet operating point uses double-quantum lines on the two
# best-aligned axes and lower-branch lines on the other two
ASSIGNMENT = TransitionAssignment.parse("1:dq,4:dq,3:minus,2:minus")
YS = (-1.5, 0.0, 1.5)
ZS = (-1.0, 0.0, 1.0)


def pipe_config(**overrides):
    inv = InversionConfig(
        nominal_b_mt=overrides.pop("nominal", 104.5),
        theta0_deg=overrides.pop("theta0", 35.0),
        phi0_deg=overrides.pop("phi0", -2.0),
        multistart=overrides.pop("multistart", 2),
        angle_spread_deg=overrides.pop("spread", 5.0),
        seed=overrides.pop("seed", 1),
        max_iterations=overrides.pop("max_iterations", 200),
        step_tol=overrides.pop("step_tol", 1e-9),
    )
    kw = dict(params=PARAMS, inversion=inv, assignment=ASSIGNMENT)
    kw.update(overrides)
    return PipelineConfig(**kw)


@pytest.fixture(scope="module")
def uniform_records():
    return synthesize_scan(
        PARAMS, lambda y, z: TRUTH, YS, ZS, ASSIGNMENT, noise_sigma=0.01, seed=3
    )


@pytest.fixture(scope="module")
def uniform_map(uniform_records):
    return process(uniform_records, pipe_config())


def noise_record(y, z, seed=0):
    rng = np.random.default_rng(seed)
    freqs = np.arange(4000.0, 4164.0)
    return ScanRecord(y, z, SweepTrace(freqs, rng.normal(0.0, 0.01, freqs.size)))


class TestIngest:
    def test_roundtrip_single_file(self, uniform_records, tmp_path):
        path = tmp_path / "scan.csv"
        write_records_csv(uniform_records, path)
        got = ingest(path)
        assert isinstance(got, ScanSet)
        assert got.missing == () and got.warnings == ()
        assert [(r.y_mm, r.z_mm) for r in got.records] == sorted(
            (r.y_mm, r.z_mm) for r in uniform_records
        )
        by_pos = {(r.y_mm, r.z_mm): r for r in uniform_records}
        for rec in got.records:
            src = by_pos[(rec.y_mm, rec.z_mm)]
            # repr-format floats survive the CSV round trip bit-exactly
            assert np.array_equal(rec.trace.freqs_mhz, src.trace.freqs_mhz)
            assert np.array_equal(rec.trace.signal, src.trace.signal)
            assert rec.source == str(path)

    def test_directory_merge(self, uniform_records, tmp_path):
        write_records_csv(uniform_records[:4], tmp_path / "a.csv")
        write_records_csv(uniform_records[4:], tmp_path / "b.csv")
        (tmp_path / "notes.txt").write_text("ignored, not a csv\n")
        got = ingest(tmp_path)
        assert len(got.records) == len(uniform_records)
        assert {r.source for r in got.records} == {
            str(tmp_path / "a.csv"),
            str(tmp_path / "b.csv"),
        }

    def test_header_optional_and_comments_skipped(self, tmp_path):
        path = tmp_path / "scan.csv"
        path.write_text(
            "# comment at the top\n"
            "0,0,4000,0.5\n"
            "\n"
            "0,0,4001,0.25\n"
        )
        got = ingest(path)
        assert len(got.records) == 1
        assert np.array_equal(got.records[0].trace.freqs_mhz, [4000.0, 4001.0])

    def test_rows_sorted_within_a_sweep(self, tmp_path):
        path = tmp_path / "scan.csv"
        path.write_text("0,0,4002,0.3\n0,0,4000,0.1\n0,0,4001,0.2\n")
        trace = ingest(path).records[0].trace
        assert np.array_equal(trace.freqs_mhz, [4000.0, 4001.0, 4002.0])
        assert np.array_equal(trace.signal, [0.1, 0.2, 0.3])

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "scan.csv"
        path.write_text("0,0,4000\n")
        with pytest.raises(DataError, match=r"scan\.csv:1: expected 4 columns, got 3"):
            ingest(path)

    def test_non_numeric_cell_names_line(self, tmp_path):
        path = tmp_path / "scan.csv"
        path.write_text("0,0,4000,0.5\n0,0,oops,0.5\n")
        with pytest.raises(DataError, match=r"scan\.csv:2: not a number: 'oops'"):
            ingest(path)

    def test_duplicate_position_across_files(self, uniform_records, tmp_path):
        write_records_csv(uniform_records[:2], tmp_path / "a.csv")
        write_records_csv(uniform_records[1:3], tmp_path / "b.csv")
        with pytest.raises(DataError, match="duplicate position") as exc:
            ingest(tmp_path)
        assert "a.csv" in str(exc.value) and "b.csv" in str(exc.value)

    def test_duplicate_frequency_is_a_bad_sweep(self, tmp_path):
        path = tmp_path / "scan.csv"
        path.write_text("0,0,4000,0.5\n0,0,4000,0.6\n")
        with pytest.raises(DataError, match=r"bad sweep at \(y=0, z=0\)"):
            ingest(path)

    def test_missing_pixels_reported(self, uniform_records, tmp_path):
        path = tmp_path / "scan.csv"
        write_records_csv(uniform_records[:-1], path)  # drop one corner
        got = ingest(path)
        dropped = uniform_records[-1]
        assert got.missing == ((dropped.y_mm, dropped.z_mm),)
        assert any("1 missing pixel(s) out of 9" in w for w in got.warnings)

    def test_empty_directory_warns(self, tmp_path):
        got = ingest(tmp_path)
        assert got.records == ()
        assert any("no scan rows" in w for w in got.warnings)

    def test_missing_path(self, tmp_path):
        with pytest.raises(DataError, match="no such file or directory"):
            ingest(tmp_path / "nope")


class TestPipelineConfig:
    FULL = """\
    spinmodel.d_zfs_MHz = 2869.5
    spinmodel.gamma_MHz_per_mT = 28.0
    spectrum.components = 4
    inversion.nominal_b_mT = 104.5
    inversion.magnitude_band = 0.08
    inversion.theta0_deg = 35.0
    inversion.phi0_deg = -2.0
    inversion.multistart = 3
    inversion.angle_spread_deg = 7.5
    inversion.step_tol = 1e-8
    inversion.max_iterations = 150
    inversion.seed = 42
    assignment.lines = 1:dq,4:dq,3:minus,2:minus
    crystal.rotation_lab_to_crystal = 1,0,0, 0,1,0, 0,0,1
    scan.y_step_mm = 2.0
    scan.z_step_mm = 0.5
    stats.region_mm = -3,3,-2,2
    pipeline.workers = 2
    pipeline.min_strength = 0.001
    """

    def test_from_dict_full(self):
        cfg = PipelineConfig.from_dict(parse_kv_text(self.FULL))
        assert cfg.params.d_zfs_mhz == 2869.5
        assert cfg.params.gamma_mhz_per_mt == 28.0
        assert cfg.n_components == 4
        inv = cfg.inversion
        assert inv.nominal_b_mt == 104.5 and inv.magnitude_band == 0.08
        assert inv.theta0_deg == 35.0 and inv.phi0_deg == -2.0
        assert inv.multistart == 3 and inv.angle_spread_deg == 7.5
        assert inv.step_tol == 1e-8 and inv.max_iterations == 150 and inv.seed == 42
        assert cfg.assignment == ASSIGNMENT
        assert np.array_equal(cfg.rotation_lab_to_crystal, np.eye(3))
        assert cfg.y_step_mm == 2.0 and cfg.z_step_mm == 0.5
        assert cfg.region_mm == (-3.0, 3.0, -2.0, 2.0)
        assert cfg.workers == 2 and cfg.min_strength == 0.001

    def test_from_dict_defaults(self):
        cfg = PipelineConfig.from_dict({"inversion.nominal_b_mT": "104.5"})
        assert cfg.params.d_zfs_mhz == 2870.0
        assert cfg.assignment is None and cfg.rotation_lab_to_crystal is None
        assert cfg.n_components == 4 and cfg.workers == 1
        assert cfg.y_step_mm == 1.5 and cfg.z_step_mm == 1.0
        assert cfg.region_mm is None
        assert cfg.inversion.multistart == 8

    def test_nominal_required(self):
        with pytest.raises(ConfigError, match="inversion.nominal_b_mT is required"):
            PipelineConfig.from_dict({})

    def test_bad_assignment_text(self):
        cfg = {"inversion.nominal_b_mT": "104.5", "assignment.lines": "1:dq,2:dq,3:dq"}
        with pytest.raises(ConfigError, match="assignment.lines"):
            PipelineConfig.from_dict(cfg)

    @pytest.mark.parametrize(
        "kw",
        [
            {"n_components": 0},
            {"n_components": 9},
            {"workers": 0},
            {"min_strength": -1.0},
        ],
    )
    def test_field_validation(self, kw):
        with pytest.raises(ConfigError):
            pipe_config(**kw)

    def test_rotation_must_be_proper(self):
        with pytest.raises(ValueError, match="determinant"):
            pipe_config(rotation_lab_to_crystal=np.diag([1.0, 1.0, -1.0]))


class TestProcess:
    def test_uniform_field_recovered(self, uniform_map):
        assert uniform_map.n_failed == 0
        assert uniform_map.y_values == YS and uniform_map.z_values == ZS
        for p in uniform_map.pixels:
            assert p.ok and p.unique
            assert abs(p.b_mt - TRUTH.b_m_mt) < 0.05
            assert abs(p.theta_deg - TRUTH.theta_deg) < 0.05
            assert abs(p.phi_deg - TRUTH.phi_deg) < 0.05
            assert p.residual_rms_mhz < 0.5
            assert p.sigma_b_mt > 0 and p.sigma_theta_deg > 0

    def test_pixels_are_independent(self, uniform_records, uniform_map):
        # any subset reproduces the full run bit for bit
        sub = process(uniform_records[2:5], pipe_config())
        for p in sub.pixels:
            full = uniform_map.pixel_at(p.y_mm, p.z_mm)
            assert p == full

    def test_rerun_is_identical(self, uniform_records, uniform_map):
        again = process(uniform_records, pipe_config())
        assert again.pixels == uniform_map.pixels

    def test_parallel_matches_serial(self, uniform_records, uniform_map, tmp_path):
        par = process(uniform_records, pipe_config(workers=2))
        emit(par, tmp_path / "par")
        emit(uniform_map, tmp_path / "ser")
        a = (tmp_path / "par" / "field_map.csv").read_bytes()
        b = (tmp_path / "ser" / "field_map.csv").read_bytes()
        assert a == b

    def test_scanset_warnings_carried(self, uniform_records):
        scan = ScanSet(tuple(uniform_records[:2]), (), ("grid has 1 missing pixel(s)",))
        fmap = process(scan, pipe_config())
        assert "grid has 1 missing pixel(s)" in fmap.warnings

    def test_guess_failure_keeps_slot(self, uniform_records):
        records = list(uniform_records[:8]) + [noise_record(*YS[-1:] + ZS[-1:])]
        fmap = process(records, pipe_config())
        assert fmap.n_failed == 1
        bad = fmap.pixel_at(YS[-1], ZS[-1])
        assert bad.reason.startswith("guess:")
        assert math.isnan(bad.b_mt) and math.isnan(bad.sigma_b_mt)
        assert all(math.isnan(c) for c in bad.centers_mhz)
        assert not bad.unique
        assert fmap.failure_histogram == {"guess": 1}
        assert fmap.warnings == ()  # 1 of 9 is under the warning threshold

    def test_invert_failure_reason(self, uniform_records):
        cfg = pipe_config(max_iterations=1, step_tol=1e-30)
        with pytest.warns(UserWarning, match="1 of 1 pixels failed"):
            fmap = process(uniform_records[:1], cfg)
        p = fmap.pixels[0]
        assert p.reason.startswith("invert:")
        # the fit succeeded, so its outputs are kept for diagnosis
        assert all(math.isfinite(c) for c in p.centers_mhz)
        assert math.isfinite(p.fwhm_mhz)
        assert math.isnan(p.b_mt)
        assert fmap.failure_histogram == {"invert": 1}

    def test_assign_failure_reason(self, uniform_records):
        cfg = pipe_config(assignment=None, min_strength=100.0)
        with pytest.warns(UserWarning, match="failed"):
            fmap = process(uniform_records[:1], cfg)
        assert fmap.pixels[0].reason.startswith("assign:")

    def test_auto_assignment_matches_explicit(self, uniform_records, uniform_map):
        fmap = process(uniform_records[:3], pipe_config(assignment=None))
        for p in fmap.pixels:
            full = uniform_map.pixel_at(p.y_mm, p.z_mm)
            assert p.b_mt == full.b_mt
            assert p.theta_deg == full.theta_deg
            assert p.phi_deg == full.phi_deg

    def test_pixel_at_unknown_position(self, uniform_map):
        with pytest.raises(KeyError):
            uniform_map.pixel_at(99.0, 99.0)


class TestRotation:
    def test_identity_rotation_changes_nothing(self, uniform_records, uniform_map):
        fmap = process(uniform_records[:1], pipe_config(rotation_lab_to_crystal=np.eye(3)))
        p, q = fmap.pixels[0], uniform_map.pixels[0]
        assert abs(p.b_mt - q.b_mt) < 1e-9
        assert abs(p.theta_deg - q.theta_deg) < 1e-9
        assert abs(p.phi_deg - q.phi_deg) < 1e-9
        assert abs(p.sigma_b_mt - q.sigma_b_mt) < 1e-9 * max(q.sigma_b_mt, 1e-12)

    def test_quarter_turn_reports_lab_frame(self):
        # crystal sees TRUTH; the lab frame is rotated a quarter turn about z
        rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        lab = cartesian_to_spherical(rot.T @ spherical_to_cartesian(TRUTH))
        records = synthesize_scan(
            PARAMS, lambda y, z: TRUTH, [0.0], [0.0], ASSIGNMENT, noise_sigma=0.0
        )
        cfg = pipe_config(
            theta0=lab.theta_deg, phi0=lab.phi_deg, rotation_lab_to_crystal=rot
        )
        p = process(records, cfg).pixels[0]
        assert p.ok
        assert abs(p.b_mt - lab.b_m_mt) < 1e-6
        assert abs(p.theta_deg - lab.theta_deg) < 1e-6
        assert abs(p.phi_deg - lab.phi_deg) < 1e-6
        assert math.isfinite(p.sigma_theta_deg)


class TestCentralStats:
    def test_full_region_matches_plain_means(self, uniform_map):
        stats = central_stats(uniform_map, (-2.0, 2.0, -1.5, 1.5))
        b = np.array([p.b_mt for p in uniform_map.pixels])
        th = np.array([p.theta_deg for p in uniform_map.pixels])
        assert stats.n_pixels == 9
        assert stats.mean_b_mt == pytest.approx(b.mean(), rel=1e-15)
        assert stats.mean_theta_deg == pytest.approx(th.mean(), rel=1e-15)
        assert stats.se_b_mt == pytest.approx(np.std(b, ddof=1) / 3.0, rel=1e-12)

    def test_region_bounds_inclusive(self, uniform_map):
        stats = central_stats(uniform_map, (0.0, 1.5, 0.0, 1.0))
        assert stats.n_pixels == 4

    def test_single_pixel_region_has_nan_se(self, uniform_map):
        stats = central_stats(uniform_map, (0.0, 0.0, 0.0, 0.0))
        assert stats.n_pixels == 1
        assert stats.mean_b_mt == uniform_map.pixel_at(0.0, 0.0).b_mt
        assert math.isnan(stats.se_b_mt)

    def test_failed_pixels_excluded(self, uniform_records):
        records = list(uniform_records[:8]) + [noise_record(YS[-1], ZS[-1])]
        fmap = process(records, pipe_config())
        stats = central_stats(fmap, (-2.0, 2.0, -1.5, 1.5))
        assert stats.n_pixels == 8

    def test_empty_region(self, uniform_map):
        with pytest.raises(DataError, match="no successful pixels"):
            central_stats(uniform_map, (50.0, 60.0, 50.0, 60.0))

    def test_inverted_region(self, uniform_map):
        with pytest.raises(ValueError, match="y0 <= y1"):
            central_stats(uniform_map, (2.0, -2.0, -1.5, 1.5))


@pytest.fixture(scope="module")
def mixed_map(uniform_records):
    # 8 good pixels plus one guess failure, for emit tests
    records = list(uniform_records[:8]) + [noise_record(YS[-1], ZS[-1])]
    return process(records, pipe_config())


class TestEmit:
    def test_csv_files_named_by_assignment(self, mixed_map, tmp_path):
        written = emit(mixed_map, tmp_path)
        names = sorted(os.path.basename(p) for p in written)
        assert names == [
            "field_map.csv",
            "freq_map_1_axis1_dq.csv",
            "freq_map_2_axis4_dq.csv",
            "freq_map_3_axis3_minus.csv",
            "freq_map_4_axis2_minus.csv",
        ]

    def test_plain_freq_map_names_without_assignment(self, uniform_records, tmp_path):
        fmap = process(uniform_records[:1], pipe_config(assignment=None))
        written = emit(fmap, tmp_path)
        assert os.path.basename(written[0]) == "freq_map_1.csv"

    def test_field_map_roundtrip_bit_exact(self, mixed_map, tmp_path):
        emit(mixed_map, tmp_path)
        rows = read_field_map(tmp_path / "field_map.csv")
        assert len(rows) == len(mixed_map.pixels)
        for row, p in zip(rows, mixed_map.pixels):
            assert row["y_mm"] == p.y_mm and row["z_mm"] == p.z_mm
            for col, val in (
                ("B_mT", p.b_mt),
                ("theta_deg", p.theta_deg),
                ("phi_deg", p.phi_deg),
                ("sigma_B", p.sigma_b_mt),
                ("sigma_theta", p.sigma_theta_deg),
                ("sigma_phi", p.sigma_phi_deg),
                ("residual_MHz", p.residual_rms_mhz),
            ):
                if math.isnan(val):
                    assert math.isnan(row[col])
                else:
                    assert row[col] == val  # repr round trip is exact
            assert row["unique_flag"] == (1 if p.unique else 0)
            assert row["reason"] == p.reason

    def test_freq_map_contents(self, mixed_map, tmp_path):
        emit(mixed_map, tmp_path)
        lines = (tmp_path / "freq_map_1_axis1_dq.csv").read_text().splitlines()
        assert lines[0] == "y_mm,z_mm,freq_MHz"
        assert len(lines) == 1 + len(mixed_map.pixels)
        first = lines[1].split(",")
        p = mixed_map.pixels[0]
        assert float(first[0]) == p.y_mm and float(first[2]) == p.centers_mhz[0]

    def test_read_field_map_rejects_other_csv(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="header mismatch"):
            read_field_map(path)

    def test_unknown_format(self, mixed_map, tmp_path):
        with pytest.raises(ValueError, match="unknown format"):
            emit(mixed_map, tmp_path, formats=("csv", "png"))

    def test_pgm_raster_and_sidecar(self, mixed_map, tmp_path):
        written = emit(mixed_map, tmp_path, formats=("csv", "pgm"))
        pgms = [p for p in written if p.endswith(".pgm")]
        assert sorted(os.path.basename(p) for p in pgms) == [
            "field_B_mT.pgm",
            "field_phi_deg.pgm",
            "field_residual_MHz.pgm",
            "field_theta_deg.pgm",
        ]
        path = os.path.join(tmp_path, "field_B_mT.pgm")
        blob = open(path, "rb").read()
        header = f"P5\n{len(YS)} {len(ZS)}\n65535\n".encode()
        assert blob.startswith(header)
        assert len(blob) == len(header) + 2 * len(YS) * len(ZS)
        pixels = np.frombuffer(blob[len(header):], dtype=">u2").reshape(len(ZS), len(YS))
        finite = [p.b_mt for p in mixed_map.pixels if p.ok]
        # min-max scaling puts the extremes at 0 and 65535; NaN renders as 0
        assert pixels.max() == 65535
        assert pixels[ZS.index(ZS[-1]), YS.index(YS[-1])] == 0  # the failed pixel
        scale = open(path + ".scale.txt").read()
        assert "quantity = B_mT" in scale
        assert f"min = {min(finite)!r}" in scale
        assert f"max = {max(finite)!r}" in scale
        assert "nan_pixels = 1" in scale


class TestSynthesizeScan:
    def test_grid_order_and_positions(self, uniform_records):
        assert [(r.y_mm, r.z_mm) for r in uniform_records] == [
            (y, z) for y in YS for z in ZS
        ]
        for r in uniform_records:
            assert r.trace.freqs_mhz.size == 4 * 41
            assert np.all(np.diff(r.trace.freqs_mhz) > 0)
            assert r.trace.y_mm == r.y_mm and r.trace.z_mm == r.z_mm
            assert r.source == "synthetic"

    def test_seed_reproducibility(self):
        kw = dict(noise_sigma=0.05)
        a = synthesize_scan(PARAMS, lambda y, z: TRUTH, YS, ZS, ASSIGNMENT, seed=7, **kw)
        b = synthesize_scan(PARAMS, lambda y, z: TRUTH, YS, ZS, ASSIGNMENT, seed=7, **kw)
        c = synthesize_scan(PARAMS, lambda y, z: TRUTH, YS, ZS, ASSIGNMENT, seed=8, **kw)
        for ra, rb, rc in zip(a, b, c):
            assert np.array_equal(ra.trace.signal, rb.trace.signal)
            assert not np.array_equal(ra.trace.signal, rc.trace.signal)

    def test_positions_get_independent_noise(self):
        recs = synthesize_scan(
            PARAMS, lambda y, z: TRUTH, YS, ZS, ASSIGNMENT, noise_sigma=0.05, seed=7
        )
        assert not np.array_equal(recs[0].trace.signal, recs[1].trace.signal)

    def test_noiseless_ignores_seed(self):
        a = synthesize_scan(PARAMS, lambda y, z: TRUTH, [0.0], [0.0], ASSIGNMENT, seed=1)
        b = synthesize_scan(PARAMS, lambda y, z: TRUTH, [0.0], [0.0], ASSIGNMENT, seed=2)
        assert np.array_equal(a[0].trace.signal, b[0].trace.signal)


class TestEndToEnd:
    CONFIG = """\
    inversion.nominal_b_mT = 104.5
    inversion.theta0_deg = 35.0
    inversion.phi0_deg = -2.0
    inversion.multistart = 2
    inversion.angle_spread_deg = 5.0
    inversion.seed = 1
    assignment.lines = 1:dq,4:dq,3:minus,2:minus
    stats.region_mm = -1.5,1.5,-1.0,1.0
    """

    def test_config_file_to_field_map(self, uniform_records, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(self.CONFIG)
        scan_dir = tmp_path / "scan"
        scan_dir.mkdir()
        write_records_csv(uniform_records, scan_dir / "scan.csv")

        cfg = PipelineConfig.from_dict(load_kv_file(cfg_path))
        fmap = process(ingest(scan_dir), cfg)
        out = tmp_path / "maps"
        emit(fmap, out)
        rows = read_field_map(out / "field_map.csv")
        assert len(rows) == 9
        assert all(r["reason"] == "" for r in rows)
        assert all(abs(r["B_mT"] - TRUTH.b_m_mt) < 0.05 for r in rows)
        stats = central_stats(fmap, cfg.region_mm)
        assert abs(stats.mean_theta_deg - TRUTH.theta_deg) < 0.05
        assert isinstance(stats, CentralStats)


class TestTraceCsv:
    def test_roundtrip(self, uniform_records, tmp_path):
        path = tmp_path / "trace.csv"
        trace = uniform_records[0].trace
        write_trace_csv(trace, path)
        back = read_trace_csv(path)
        assert np.array_equal(back.freqs_mhz, trace.freqs_mhz)
        assert np.array_equal(back.signal, trace.signal)

    def test_header_and_comments_optional(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("# comment\n4000,0.5\n4001,0.25\n")
        back = read_trace_csv(path)
        assert np.array_equal(back.freqs_mhz, [4000.0, 4001.0])

    def test_wrong_columns(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("4000,0.5,9\n")
        with pytest.raises(DataError, match="expected 2 columns"):
            read_trace_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("# nothing\n")
        with pytest.raises(DataError, match="no data rows"):
            read_trace_csv(path)


class TestTimeseriesCsv:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        samples = rng.normal(0.0, 1.0, 256)
        path = tmp_path / "ts.csv"
        write_timeseries_csv(500.0, samples, path)
        fs, back = read_timeseries_csv(path)
        assert fs == pytest.approx(500.0, rel=1e-9)
        assert np.array_equal(back, samples)

    def test_non_uniform_time_axis(self, tmp_path):
        path = tmp_path / "ts.csv"
        path.write_text("t_s,value\n0,1\n1,1\n3,1\n")
        with pytest.raises(DataError, match="not uniformly increasing"):
            read_timeseries_csv(path)

    def test_too_short(self, tmp_path):
        path = tmp_path / "ts.csv"
        path.write_text("t_s,value\n0,1\n")
        with pytest.raises(DataError, match="at least two samples"):
            read_timeseries_csv(path)


class TestCurveAndAsdCsv:
    def test_sweep_csv_layout(self, tmp_path):
        curves = sweep_vs_field(PARAMS, (0.0, 0.0, 1.0), np.array([0.0, 5.0, 10.0]))
        path = tmp_path / "sweep.csv"
        write_sweep_csv(curves, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "sweep_value,axis,transition,freq_MHz,strength"
        assert len(lines) == 1 + 3 * 4 * 3  # points x axes x kinds
        cells = lines[1].split(",")
        assert cells[:3] == ["0.0", "1", "minus"]
        assert float(cells[3]) == curves.f_minus[0, 0]

    def test_asd_csv(self, tmp_path):
        rng = np.random.default_rng(1)
        ts = TimeSeries(1000.0, rng.normal(0.0, 1.0, 4000))
        asd = asd_averaged(ts, 1.0)
        path = tmp_path / "asd.csv"
        write_asd_csv(asd, path, units="T")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# one-sided amplitude spectral density")
        assert "T/sqrt(Hz)" in lines[0]
        assert "4 segments of 1.0 s" in lines[1]
        assert lines[2] == "freq_Hz,density"
        assert len(lines) == 3 + asd.frequencies_hz.size
        cells = lines[3].split(",")
        assert float(cells[0]) == asd.frequencies_hz[0]
        assert float(cells[1]) == asd.density[0]
