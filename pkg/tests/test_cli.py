import numpy as np
import pytest

from pulsepair import cli
from pulsepair.calib import FWHM_PER_SIGMA, utc_at_lst
from pulsepair.kvconfig import read_kv_file
from pulsepair.phasefilter import PhaseMetricParams
from pulsepair.pipeline import ExperimentManifest
from pulsepair.sigsim import ObservationConfig

OBS_LON = -79.8398


def _write_config(path, manifest) -> str:
    with open(path, "w") as fh:
        for k, v in sorted(manifest.to_kv().items()):
            fh.write(f"{k} = {v}\n")
    return str(path)


def _events_manifest(**kwargs):
    m = ExperimentManifest(
        config=ObservationConfig(
            band_low_hz=1445.0e6, band_high_hz=1446.0e6, frame_seconds=0.52,
            polarization_tags=("LHCP", "RHCP"), seed=3),
        accept_band_low_hz=1445.0e6, accept_band_high_hz=1446.0e6,
        excision_low_hz=1445.0e6, excision_high_hz=1445.0e6,
        mode="events", n_transits=2,
        window_lo_hr=5.0, window_hi_hr=5.5, ra_bin_hr=0.1)
    for key, value in kwargs.items():
        setattr(m, key, value)
    return m


def test_events_chain(tmp_path):
    cfg = _write_config(tmp_path / "exp.cfg", _events_manifest())
    out = str(tmp_path / "out")
    assert cli.main(["simulate", "--config", cfg, "--out", out]) == 0
    assert (tmp_path / "out" / "level1.csv").exists()
    assert cli.main(["refilter", "--config", cfg, "--out", out,
                     "--diagnostics"]) == 0
    assert (tmp_path / "out" / "candidates.csv").exists()
    diag = (tmp_path / "out" / "metric_diagnostics.csv").read_text()
    assert diag.splitlines()[0] == ("delta_f_hz,log10_delta_f_mhz,"
                                    "phase_metric_rad,verdict")
    assert cli.main(["analyze", "--config", cfg, "--out", out]) == 0
    report = read_kv_file(tmp_path / "out" / "report.txt")
    assert int(report["n_trials"]) > 0
    assert "peak.cohens_d" in report
    assert cli.main(["report", "--config", cfg, "--out", out]) == 0
    svg = (tmp_path / "out" / "figure.svg").read_text()
    assert svg.lstrip().startswith("<") and "<svg" in svg
    assert cli.main(["report", "--config", cfg, "--out", out,
                     "--format", "csv"]) == 0
    caption = (tmp_path / "out" / "figure_caption.csv").read_text().splitlines()
    assert caption[0] == "caption"
    assert caption[1].startswith('"') and caption[1].endswith('"')
    # exposure-weighted probabilities re-read the level-1 archive
    cfg2 = _write_config(tmp_path / "exp2.cfg",
                         _events_manifest(p_mode="exposure"))
    assert cli.main(["analyze", "--config", cfg2, "--out", out]) == 0


def test_seed_override_changes_archive(tmp_path):
    cfg = _write_config(tmp_path / "exp.cfg", _events_manifest())
    out_a, out_b, out_c = (str(tmp_path / d) for d in ("a", "b", "c"))
    cli.main(["simulate", "--config", cfg, "--out", out_a])
    cli.main(["simulate", "--config", cfg, "--out", out_b, "--seed", "3"])
    cli.main(["simulate", "--config", cfg, "--out", out_c, "--seed", "4"])
    a = (tmp_path / "a" / "level1.csv").read_bytes()
    assert a == (tmp_path / "b" / "level1.csv").read_bytes()
    assert a != (tmp_path / "c" / "level1.csv").read_bytes()


def test_frames_chain(tmp_path):
    m = ExperimentManifest(
        config=ObservationConfig(
            band_low_hz=1445.0e6, band_high_hz=1446.0e6,
            frame_seconds=0.001024, polarization_tags=("LHCP", "RHCP"),
            seed=11),
        snr_threshold_db=5.0,
        accept_band_low_hz=1445.0e6, accept_band_high_hz=1446.0e6,
        excision_low_hz=1445.0e6, excision_high_hz=1445.0e6,
        mode="freq", n_frames=8)
    cfg = _write_config(tmp_path / "frames.cfg", m)
    out = str(tmp_path / "out")
    assert cli.main(["simulate", "--config", cfg, "--out", out]) == 0
    assert (tmp_path / "out" / "frames.npz").exists()
    assert cli.main(["detect", "--config", cfg, "--out", out]) == 0
    level1 = (tmp_path / "out" / "level1.csv").read_text().splitlines()
    assert len(level1) > 1          # noise crossings at a 5 dB threshold
    assert cli.main(["refilter", "--config", cfg, "--out", out]) == 0
    assert (tmp_path / "out" / "candidates.csv").exists()


def test_calibrate(tmp_path):
    fwhm_deg, snr_db, n = 9.0, 3.0, 4000
    sigma_hr = fwhm_deg / 15.0 / FWHM_PER_SIGMA
    amp = 10.0 ** (snr_db / 10.0) - 1.0
    utc0 = utc_at_lst(5.25, OBS_LON, near_utc_s=1.7e9)
    utc = utc0 + np.linspace(-1.5, 1.5, n) * 3600.0
    lst_rate = 1.0027379093507949 / 3600.0
    ra = 5.25 + (utc - utc0) * lst_rate
    power = 1.0 + amp * np.exp(-0.5 * ((ra - 5.25) / sigma_hr) ** 2)
    power += np.random.default_rng(5).normal(0.0, 0.01, n)
    scan_path = tmp_path / "scan.csv"
    with open(scan_path, "w") as fh:
        fh.write("utc_s,power\n")
        for t, p in zip(utc, power):
            fh.write(f"{t:.3f},{p:.6f}\n")
    out = str(tmp_path / "out")
    assert cli.main(["calibrate", "--scan", str(scan_path), "--out", out,
                     "--source-name", "calsrc"]) == 0
    report = read_kv_file(tmp_path / "out" / "calib_report.txt")
    assert report["source_name"] == "calsrc"
    assert float(report["center_ra_hr"]) == pytest.approx(5.25, abs=0.01)
    assert float(report["fwhm_ra_deg"]) == pytest.approx(9.0, rel=0.05)
    assert float(report["continuum_snr_db"]) == pytest.approx(3.0, abs=0.1)


def test_tune_tau_cli(tmp_path):
    m = _events_manifest(phase=PhaseMetricParams(
        tau_search_low_s=-8e-9, tau_search_high_s=8e-9,
        tau_search_step_s=4e-9))
    cfg = _write_config(tmp_path / "exp.cfg", m)
    out = str(tmp_path / "out")
    assert cli.main(["simulate", "--config", cfg, "--out", out]) == 0
    assert cli.main(["tune-tau", "--config", cfg, "--out", out]) == 0
    report = read_kv_file(tmp_path / "out" / "tune_report.txt")
    assert report["n_taps"] == "5"
    assert -8e-9 <= float(report["best_tau_int_s"]) <= 8e-9
    scan = (tmp_path / "out" / "tau_scan.csv").read_text().splitlines()
    assert scan[0] == "tau_int_s,peak_cohens_d"
    assert len(scan) == 6


def test_null_mc_cli(tmp_path):
    cfg = _write_config(tmp_path / "exp.cfg", _events_manifest())
    out = str(tmp_path / "out")
    assert cli.main(["null-mc", "--config", cfg, "--out", out,
                     "--n-seeds", "2"]) == 0
    rows = (tmp_path / "out" / "null_mc.csv").read_text().splitlines()
    assert rows[0] == "seed,n_trials,max_cohens_d,peak_ra_low_hr"
    assert len(rows) == 3
    summary = read_kv_file(tmp_path / "out" / "null_summary.txt")
    assert summary["n_seeds"] == "2"
    assert 0.0 <= float(summary["fraction_below"]) <= 1.0


def test_usage_errors(tmp_path, capsys):
    cfg = _write_config(tmp_path / "exp.cfg", _events_manifest())
    assert cli.main([]) == 1                       # no subcommand
    assert cli.main(["frobnicate"]) == 1           # unknown subcommand
    assert cli.main(["simulate"]) == 1             # --config required
    assert cli.main(["simulate", "--config", cfg, "--seed", "-1"]) == 1
    assert cli.main(["simulate", "--config", cfg, "--threads", "x"]) == 1
    assert cli.main(["calibrate"]) == 1            # --scan required
    capsys.readouterr()


def test_validation_exit_codes(tmp_path, capsys):
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("run.not_a_key = 1\n")
    out = str(tmp_path / "out")
    assert cli.main(["simulate", "--config", str(bad_cfg), "--out", out]) == 3
    cfg = _write_config(tmp_path / "exp.cfg", _events_manifest())
    assert cli.main(["refilter", "--config", cfg, "--out", out]) == 3
    assert cli.main(["report", "--config", cfg, "--out", out]) == 3
    assert cli.main(["detect", "--config", cfg, "--out", out]) == 3
    capsys.readouterr()


def test_os_error_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "out")
    missing = str(tmp_path / "missing.cfg")
    assert cli.main(["simulate", "--config", missing, "--out", out]) == 2
    assert cli.main(["calibrate", "--scan", str(tmp_path / "no.csv"),
                     "--out", out]) == 2
    capsys.readouterr()


def test_help_and_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    assert "simulate" in capsys.readouterr().out
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    capsys.readouterr()
