"""Staged experiment runner: manifest in, artifacts plus manifest out.

Stages are simulate (or ingest an existing level-1 archive), refilter,
analyze, report.  Every artifact is written with fixed formats, hashed with
sha256, and recorded in `manifest.txt` together with a hash of exactly the
parameters that can change that artifact's bytes; a rerun in the same output
directory skips any stage whose parameter hash, input hashes, and output
hashes all still match.  Thread count and output location are deliberately
excluded from the hashes: they must never change results.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import warnings
from dataclasses import dataclass, field, fields as dc_fields, replace

import numpy as np

from . import kvconfig
from .calib import SIDEREAL_DAY_S, lst_hours
from .errors import ArchiveFormatError, StageError, ValidationError
from .pairdetect import (FirstLevelFilterParams, PulseEvent,
                         first_level_filter_frame, form_pairs,
                         read_level1_archive, write_level1_archive)
from .phasefilter import (PhaseMetricParams, second_level_filter,
                          tune_tau_int)
from .plotting import caption_line, save_stats_figure
from .sigsim import (ObservationConfig, RfiSpec, SourceSpec, simulate_frames,
                     simulate_level1_events)
from .skystats import AnalysisResult, analyze, write_stats_csv

CANDIDATE_COLUMNS = [
    "utc_a_s", "utc_b_s", "frame_a", "frame_b", "bin_a", "bin_b",
    "rf_a_hz", "rf_b_hz", "polarization_a", "polarization_b",
    "delta_t_s", "delta_f_hz", "log10_delta_f_mhz", "phase_metric_rad",
    "ra_pointing_hr",
]


@dataclass
class CandidateRow:
    """One row of candidates.csv (enough to re-run the statistics)."""

    utc_a_s: float
    utc_b_s: float
    frame_a: int
    frame_b: int
    bin_a: int
    bin_b: int
    rf_a_hz: float
    rf_b_hz: float
    polarization_a: str
    polarization_b: str
    delta_t_s: float
    delta_f_hz: float
    log10_delta_f_mhz: float
    phase_metric_rad: float
    ra_pointing_hr: float


def write_candidates_csv(path, candidates) -> None:
    """Write candidates (typically second-level survivors) as CSV."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(CANDIDATE_COLUMNS) + "\n")
        for c in candidates:
            a, b = c.event_a, c.event_b
            log_df = (f"{c.log10_delta_f_mhz:.6g}"
                      if math.isfinite(c.log10_delta_f_mhz) else "-inf")
            metric = (f"{c.phase_metric_rad:.6g}"
                      if c.phase_metric_rad is not None else "nan")
            fh.write(f"{a.utc_s:.3f},{b.utc_s:.3f},"
                     f"{a.frame_index},{b.frame_index},"
                     f"{a.bin_index},{b.bin_index},"
                     f"{a.rf_freq_hz:.1f},{b.rf_freq_hz:.1f},"
                     f"{a.polarization_tag},{b.polarization_tag},"
                     f"{c.delta_t_s:.3f},{c.delta_f_hz:.6g},"
                     f"{log_df},{metric},{c.ra_pointing_hr:.6g}\n")


def read_candidates_csv(path) -> list[CandidateRow]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ArchiveFormatError(f"{path}: empty file") from None
        if header != CANDIDATE_COLUMNS:
            raise ArchiveFormatError(f"{path}: bad header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CANDIDATE_COLUMNS):
                raise ArchiveFormatError(
                    f"expected {len(CANDIDATE_COLUMNS)} columns", line_no)
            try:
                out.append(CandidateRow(
                    utc_a_s=float(row[0]), utc_b_s=float(row[1]),
                    frame_a=int(row[2]), frame_b=int(row[3]),
                    bin_a=int(row[4]), bin_b=int(row[5]),
                    rf_a_hz=float(row[6]), rf_b_hz=float(row[7]),
                    polarization_a=row[8], polarization_b=row[9],
                    delta_t_s=float(row[10]), delta_f_hz=float(row[11]),
                    log10_delta_f_mhz=float(row[12]),
                    phase_metric_rad=float(row[13]),
                    ra_pointing_hr=float(row[14]),
                ))
            except ValueError as exc:
                raise ArchiveFormatError(f"bad value: {exc}", line_no) from None
    return out


@dataclass
class ExperimentManifest:
    """Full description of one experiment; serializes to key = value text."""

    config: ObservationConfig = field(default_factory=ObservationConfig)
    sources: list = field(default_factory=list)
    rfi: list = field(default_factory=list)
    phase: PhaseMetricParams = field(default_factory=PhaseMetricParams)
    snr_threshold_db: float = 8.5
    accept_band_low_hz: float = 1405.0e6
    accept_band_high_hz: float = 1455.0e6
    excision_low_hz: float = 1424.0e6
    excision_high_hz: float = 1426.0e6
    mode: str = "events"                 # events | freq | time
    n_transits: int = 1
    window_lo_hr: float = 3.25
    window_hi_hr: float = 7.25
    n_frames: int | None = None          # frame modes only
    start_utc_s: float = 0.0
    ra_bin_hr: float = 0.1
    p_mode: str = "uniform"
    per_day: bool = False
    pairing_window_frames: int = 0
    require_pol_match: bool = False
    fwhm_center_hr: float | None = None
    fwhm_width_hr: float | None = None
    level1_in: str | None = None
    title: str = "RA-binned pair excess"
    threads: int = 1                     # never hashed
    out_dir: str = "."                   # never hashed

    def __post_init__(self):
        if self.mode not in ("events", "freq", "time"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if not self.window_hi_hr > self.window_lo_hr:
            raise ValidationError("window_hi_hr must exceed window_lo_hr")
        if self.ra_bin_hr <= 0:
            raise ValidationError("ra_bin_hr must be > 0")
        if self.p_mode not in ("uniform", "exposure"):
            raise ValidationError(f"unknown p_mode {self.p_mode!r}")
        if self.n_transits < 1:
            raise ValidationError("n_transits must be >= 1")
        if self.mode in ("freq", "time") and self.level1_in is None:
            if self.n_frames is None or self.n_frames < 1:
                raise ValidationError("frame modes need n_frames >= 1")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        n_windows = (self.window_hi_hr - self.window_lo_hr) / self.ra_bin_hr
        if abs(n_windows - round(n_windows)) > 1e-9:
            raise ValidationError(
                "the analysis window must be an integer number of RA bins")

    def first_level(self) -> FirstLevelFilterParams:
        return FirstLevelFilterParams(
            snr_threshold_db=self.snr_threshold_db,
            band_low_hz=self.accept_band_low_hz,
            band_high_hz=self.accept_band_high_hz,
            excision_low_hz=self.excision_low_hz,
            excision_high_hz=self.excision_high_hz,
            bins_per_segment=self.config.bins_per_segment,
            include_self=self.config.segment_include_self,
        )

    def bin_edges(self) -> np.ndarray:
        n = int(round((self.window_hi_hr - self.window_lo_hr)
                      / self.ra_bin_hr))
        return self.window_lo_hr + self.ra_bin_hr * np.arange(n + 1)

    # -- serialization ----------------------------------------------------

    def to_kv(self) -> dict:
        kv: dict[str, str] = {}
        for f in dc_fields(ObservationConfig):
            value = getattr(self.config, f.name)
            if f.name == "polarization_tags":
                kv["config.polarization_tags"] = ",".join(value)
            else:
                kv[f"config.{f.name}"] = _fmt(value)
        for i, src in enumerate(self.sources):
            for f in dc_fields(SourceSpec):
                kv[f"source.{i}.{f.name}"] = _fmt(getattr(src, f.name))
        for i, r in enumerate(self.rfi):
            for f in dc_fields(RfiSpec):
                kv[f"rfi.{i}.{f.name}"] = _fmt(getattr(r, f.name))
        for f in dc_fields(PhaseMetricParams):
            kv[f"phase.{f.name}"] = _fmt(getattr(self.phase, f.name))
        for name in ("snr_threshold_db", "accept_band_low_hz",
                     "accept_band_high_hz", "excision_low_hz",
                     "excision_high_hz"):
            kv[f"filter.{name}"] = _fmt(getattr(self, name))
        for name in ("mode", "n_transits", "window_lo_hr", "window_hi_hr",
                     "n_frames", "start_utc_s", "ra_bin_hr", "p_mode",
                     "per_day", "pairing_window_frames", "require_pol_match",
                     "fwhm_center_hr", "fwhm_width_hr", "level1_in", "title"):
            kv[f"run.{name}"] = _fmt(getattr(self, name))
        return kv

    @classmethod
    def from_kv(cls, kv: dict, source: str = "<config>") -> "ExperimentManifest":
        known = set()
        cfg_kwargs = {}
        for f in dc_fields(ObservationConfig):
            key = f"config.{f.name}"
            known.add(key)
            if key not in kv:
                continue
            if f.name == "polarization_tags":
                tags = tuple(t.strip() for t in kv[key].split(",") if t.strip())
                cfg_kwargs[f.name] = tags
            else:
                cfg_kwargs[f.name] = _parse(kv[key], f.name, key)
        sources = []
        i = 0
        while f"source.{i}.name" in kv:
            src_kwargs = {}
            for f in dc_fields(SourceSpec):
                key = f"source.{i}.{f.name}"
                known.add(key)
                if key in kv:
                    src_kwargs[f.name] = _parse(kv[key], f.name, key)
            sources.append(SourceSpec(**src_kwargs))
            i += 1
        for i in range(len(sources)):
            for f in dc_fields(SourceSpec):
                known.add(f"source.{i}.{f.name}")
        rfi = []
        i = 0
        while f"rfi.{i}.kind" in kv:
            rfi_kwargs = {}
            for f in dc_fields(RfiSpec):
                key = f"rfi.{i}.{f.name}"
                known.add(key)
                if key in kv:
                    rfi_kwargs[f.name] = _parse(kv[key], f.name, key)
            rfi.append(RfiSpec(**rfi_kwargs))
            i += 1
        phase_kwargs = {}
        for f in dc_fields(PhaseMetricParams):
            key = f"phase.{f.name}"
            known.add(key)
            if key in kv:
                phase_kwargs[f.name] = _parse(kv[key], f.name, key)
        top_kwargs = {}
        for name in ("snr_threshold_db", "accept_band_low_hz",
                     "accept_band_high_hz", "excision_low_hz",
                     "excision_high_hz"):
            key = f"filter.{name}"
            known.add(key)
            if key in kv:
                top_kwargs[name] = _parse(kv[key], name, key)
        for name in ("mode", "n_transits", "window_lo_hr", "window_hi_hr",
                     "n_frames", "start_utc_s", "ra_bin_hr", "p_mode",
                     "per_day", "pairing_window_frames", "require_pol_match",
                     "fwhm_center_hr", "fwhm_width_hr", "level1_in", "title"):
            key = f"run.{name}"
            known.add(key)
            if key in kv:
                top_kwargs[name] = _parse(kv[key], name, key)
        unknown = set(kv) - known
        if unknown:
            raise ValidationError(
                f"{source}: unknown keys: {', '.join(sorted(unknown))}")
        return cls(config=ObservationConfig(**cfg_kwargs), sources=sources,
                   rfi=rfi, phase=PhaseMetricParams(**phase_kwargs),
                   **top_kwargs)

    # -- hashing ----------------------------------------------------------

    def _hash_subset(self, prefixes: tuple) -> str:
        kv = self.to_kv()
        subset = {k: v for k, v in kv.items()
                  if any(k.startswith(p) for p in prefixes)}
        text = kvconfig.format_kv(subset)
        return hashlib.sha256(text.encode()).hexdigest()

    def simulate_params_hash(self) -> str:
        return self._hash_subset(("config.", "source.", "rfi.", "filter.",
                                  "run.mode", "run.n_transits",
                                  "run.window_lo_hr", "run.window_hi_hr",
                                  "run.n_frames", "run.start_utc_s",
                                  "run.level1_in"))

    def refilter_params_hash(self) -> str:
        return self._hash_subset(("phase.", "run.pairing_window_frames",
                                  "run.require_pol_match"))

    def analyze_params_hash(self) -> str:
        return self._hash_subset(("run.ra_bin_hr", "run.p_mode",
                                  "run.per_day", "run.window_lo_hr",
                                  "run.window_hi_hr"))

    def report_params_hash(self) -> str:
        return self._hash_subset(("run.fwhm_center_hr", "run.fwhm_width_hr",
                                  "run.title"))


_BOOL_FIELDS = {"segment_include_self", "per_day", "require_pol_match"}
_INT_FIELDS = {"bins_per_segment", "seed", "n_transits", "n_frames",
               "pairing_window_frames", "delta_t_frames"}
_STR_FIELDS = {"mode", "p_mode", "level1_in", "title", "name",
               "polarization_tag", "kind", "direction"}


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, field_name: str, key: str):
    if text == "none":
        return None
    try:
        if field_name in _BOOL_FIELDS:
            if text.lower() in ("true", "yes", "1"):
                return True
            if text.lower() in ("false", "no", "0"):
                return False
            raise ValueError("not a boolean")
        if field_name in _INT_FIELDS:
            return int(text)
        if field_name in _STR_FIELDS:
            return text
        return float(text)
    except ValueError:
        raise ValidationError(f"key {key!r}: cannot parse {text!r}") from None


def manifest_from_file(path, overrides: dict | None = None) -> ExperimentManifest:
    kv = kvconfig.read_kv_file(path)
    if overrides:
        kv.update(overrides)
    return ExperimentManifest.from_kv(kv, source=str(path))


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# -- frame store (simulate/detect handoff in frame modes) ------------------

def save_frames_npz(path, config: ObservationConfig, frame_pairs) -> None:
    """Persist channelized frame pairs for the detect stage.

    frame_pairs is an iterable of (east, west) FrameSpectrum tuples as
    yielded by simulate_frames.
    """
    frame_index, utc, pols, east, west = [], [], [], [], []
    for fe, fw in frame_pairs:
        if (fe.frame_index != fw.frame_index
                or fe.polarization_tag != fw.polarization_tag):
            raise ValidationError("misaligned east/west frame pair")
        frame_index.append(fe.frame_index)
        utc.append(fe.utc_s)
        pols.append(fe.polarization_tag)
        east.append(fe.bins)
        west.append(fw.bins)
    if not frame_index:
        raise ValidationError("no frames to save")
    np.savez_compressed(
        path,
        frame_index=np.asarray(frame_index, dtype=np.int64),
        utc_s=np.asarray(utc, dtype=float),
        polarization_tag=np.asarray(pols),
        east=np.asarray(east), west=np.asarray(west),
        rf_freqs_hz=config.rf_freqs())


def load_frames_npz(path):
    """Yield (frame_index, utc_s, pol_tag, east_bins, west_bins, rf_freqs)."""
    with np.load(path) as data:
        required = {"frame_index", "utc_s", "polarization_tag", "east",
                    "west", "rf_freqs_hz"}
        missing = required - set(data.files)
        if missing:
            raise ValidationError(
                f"{path}: missing arrays: {', '.join(sorted(missing))}")
        rf = data["rf_freqs_hz"]
        for i in range(data["frame_index"].size):
            yield (int(data["frame_index"][i]), float(data["utc_s"][i]),
                   str(data["polarization_tag"][i]), data["east"][i],
                   data["west"][i], rf)


def detect_frames(manifest: ExperimentManifest, frames) -> list[PulseEvent]:
    """First-level filter a stream of loaded frames into events."""
    config = manifest.config
    params = manifest.first_level()
    events: list[PulseEvent] = []
    for (frame_index, utc, pol, east, west, rf) in frames:
        lst = float(lst_hours(utc, config.longitude_deg))
        ra = float(config.pointing_ra(lst))
        events.extend(first_level_filter_frame(
            frame_index, utc, pol, east, west, rf, params, ra))
    return events


# -- staged runner ----------------------------------------------------------

@dataclass
class ExperimentResult:
    status: str
    out_dir: str
    paths: dict
    skipped: list
    n_events: int = 0
    n_candidates: int = 0
    n_survivors: int = 0
    analysis: AnalysisResult | None = None


def _events_from_manifest(manifest: ExperimentManifest) -> list[PulseEvent]:
    config = manifest.config
    if manifest.mode == "events":
        return simulate_level1_events(
            config, manifest.sources, manifest.first_level(),
            manifest.n_transits, manifest.window_lo_hr, manifest.window_hi_hr,
            start_utc_s=manifest.start_utc_s, threads=manifest.threads)
    frames = simulate_frames(config, manifest.sources, manifest.rfi,
                             n_frames=manifest.n_frames,
                             start_utc_s=manifest.start_utc_s,
                             mode=manifest.mode)
    stream = ((fe.frame_index, fe.utc_s, fe.polarization_tag, fe.bins,
               fw.bins, config.rf_freqs()) for fe, fw in frames)
    return detect_frames(manifest, stream)


def run_experiment(manifest: ExperimentManifest,
                   resume: bool = True) -> ExperimentResult:
    """Run simulate -> refilter -> analyze -> report with hash-based resume."""
    out = manifest.out_dir
    os.makedirs(out, exist_ok=True)
    manifest_path = os.path.join(out, "manifest.txt")
    prior = {}
    if resume and os.path.exists(manifest_path):
        prior = kvconfig.read_kv_file(manifest_path)
    record = manifest.to_kv()
    record["run.threads"] = str(manifest.threads)
    record["run.out_dir"] = str(out)
    paths = {
        "level1": manifest.level1_in or os.path.join(out, "level1.csv"),
        "candidates": os.path.join(out, "candidates.csv"),
        "stats": os.path.join(out, "stats.csv"),
        "report": os.path.join(out, "report.txt"),
        "figure": os.path.join(out, "figure.svg"),
    }
    skipped: list[str] = []
    result = ExperimentResult("running", out, paths, skipped)

    def artifact_current(stage: str, params_hash: str, inputs_hash: str,
                         outputs: list) -> bool:
        if not resume or prior.get(f"stage.{stage}.params") != params_hash:
            return False
        if prior.get(f"stage.{stage}.inputs") != inputs_hash:
            return False
        for p in outputs:
            name = os.path.basename(p)
            if not os.path.exists(p):
                return False
            if prior.get(f"artifact.{name}") != sha256_file(p):
                return False
        return True

    def mark(stage: str, params_hash: str, inputs_hash: str,
             outputs: list) -> None:
        record[f"stage.{stage}.params"] = params_hash
        record[f"stage.{stage}.inputs"] = inputs_hash
        for p in outputs:
            record[f"artifact.{os.path.basename(p)}"] = sha256_file(p)

    def fail(stage: str, exc: Exception):
        record["status"] = f"failed:{stage}"
        record["error"] = str(exc).replace("\n", " ")
        kvconfig.write_kv_file(manifest_path, record)
        if isinstance(exc, ValidationError):
            return exc
        return StageError(stage, str(exc))

    # --- simulate ---------------------------------------------------------
    stage = "simulate"
    sim_hash = manifest.simulate_params_hash()
    if manifest.level1_in is not None:
        if not os.path.exists(paths["level1"]):
            raise ValidationError(
                f"level1 archive {paths['level1']} does not exist")
        mark(stage, sim_hash, "external", [paths["level1"]])
        skipped.append("simulate (external archive)")
    elif artifact_current(stage, sim_hash, "none", [paths["level1"]]):
        mark(stage, sim_hash, "none", [paths["level1"]])
        skipped.append(stage)
    else:
        try:
            events = _events_from_manifest(manifest)
            write_level1_archive(paths["level1"], events)
        except Exception as exc:
            raise fail(stage, exc) from exc
        mark(stage, sim_hash, "none", [paths["level1"]])

    # --- refilter -----------------------------------------------------------
    stage = "refilter"
    refilter_hash = manifest.refilter_params_hash()
    level1_hash = sha256_file(paths["level1"])
    if artifact_current(stage, refilter_hash, level1_hash,
                        [paths["candidates"]]):
        mark(stage, refilter_hash, level1_hash, [paths["candidates"]])
        skipped.append(stage)
        survivors = None
    else:
        try:
            events = read_level1_archive(paths["level1"])
            result.n_events = len(events)
            pairs = form_pairs(events, manifest.pairing_window_frames,
                               manifest.require_pol_match)
            result.n_candidates = len(pairs)
            survivors = second_level_filter(pairs, manifest.phase)
            result.n_survivors = len(survivors)
            write_candidates_csv(paths["candidates"], survivors)
        except Exception as exc:
            raise fail(stage, exc) from exc
        mark(stage, refilter_hash, level1_hash, [paths["candidates"]])

    # --- analyze ------------------------------------------------------------
    stage = "analyze"
    analyze_hash = manifest.analyze_params_hash()
    cand_hash = sha256_file(paths["candidates"])
    need = not artifact_current(stage, analyze_hash, cand_hash,
                                [paths["stats"], paths["report"]])
    try:
        rows = read_candidates_csv(paths["candidates"])
        ra = np.array([r.ra_pointing_hr for r in rows], dtype=float)
        day = None
        exposure = None
        if manifest.per_day and rows:
            t0 = min(r.utc_b_s for r in rows)
            day = np.floor((np.array([r.utc_b_s for r in rows]) - t0)
                           / SIDEREAL_DAY_S).astype(int)
        if manifest.p_mode == "exposure":
            level1 = read_level1_archive(paths["level1"])
            exposure = np.array([e.ra_pointing_hr for e in level1])
        analysis = analyze(ra, manifest.bin_edges(), manifest.p_mode,
                           exposure_ra_hr=exposure, day_index=day)
        result.analysis = analysis
        if need:
            write_stats_csv(paths["stats"], analysis.stats)
            _write_report(paths["report"], manifest, analysis)
    except Exception as exc:
        raise fail(stage, exc) from exc
    if need:
        mark(stage, analyze_hash, cand_hash, [paths["stats"], paths["report"]])
    else:
        mark(stage, analyze_hash, cand_hash, [paths["stats"], paths["report"]])
        skipped.append(stage)

    # --- report -------------------------------------------------------------
    stage = "report"
    report_hash = manifest.report_params_hash()
    stats_hash = sha256_file(paths["stats"])
    if artifact_current(stage, report_hash, stats_hash, [paths["figure"]]):
        mark(stage, report_hash, stats_hash, [paths["figure"]])
        skipped.append(stage)
    else:
        try:
            save_stats_figure(paths["figure"], result.analysis.stats,
                              manifest.fwhm_center_hr, manifest.fwhm_width_hr,
                              title=manifest.title)
        except Exception as exc:
            raise fail(stage, exc) from exc
        mark(stage, report_hash, stats_hash, [paths["figure"]])

    record["status"] = "ok"
    kvconfig.write_kv_file(manifest_path, record)
    result.status = "ok"
    return result


def _write_report(path, manifest: ExperimentManifest,
                  analysis: AnalysisResult) -> None:
    kv = {
        "n_trials": str(analysis.n_trials),
        "window_lo_hr": f"{analysis.window_lo_hr:.6g}",
        "window_hi_hr": f"{analysis.window_hi_hr:.6g}",
        "p_mode": manifest.p_mode,
    }
    peak = analysis.peak
    if peak is None:
        kv["peak"] = "none"
    else:
        kv.update({
            "peak.ra_low_hr": f"{peak.ra_low_hr:.6g}",
            "peak.ra_high_hr": f"{peak.ra_high_hr:.6g}",
            "peak.observed_count": str(peak.observed_count),
            "peak.expected_mean": f"{peak.expected_mean:.8g}",
            "peak.sigma": f"{peak.sigma:.8g}",
            "peak.cohens_d": f"{peak.cohens_d:.8g}",
            "peak.tail_prob_ge": f"{peak.tail_prob_ge:.8g}",
            "peak.tail_prob_gt": f"{peak.tail_prob_gt:.8g}",
            "caption": caption_line(peak),
        })
    kvconfig.write_kv_file(path, kv)


def run_null_mc(manifest: ExperimentManifest, n_seeds: int,
                significance_d: float = 3.5):
    """Source-free reruns: the distribution of the peak bin's excess.

    Runs the full events-mode chain (sample, pair, filter, analyze) with all
    sources removed for seeds seed0 .. seed0+n_seeds-1.  Returns (rows,
    fraction_clean) where each row is (seed, n_trials, max_d, peak_ra_low)
    and fraction_clean is the share of seeds whose peak stays below
    `significance_d`.
    """
    if n_seeds < 1:
        raise ValidationError("n_seeds must be >= 1")
    if manifest.mode != "events":
        raise ValidationError("null-mc runs on the events mode")
    rows = []
    clean = 0
    params = manifest.first_level()
    edges = manifest.bin_edges()
    for i in range(n_seeds):
        seed = manifest.config.seed + i
        config = replace(manifest.config, seed=seed)
        events = simulate_level1_events(
            config, [], params, manifest.n_transits, manifest.window_lo_hr,
            manifest.window_hi_hr, threads=manifest.threads)
        pairs = form_pairs(events, manifest.pairing_window_frames,
                           manifest.require_pol_match)
        survivors = second_level_filter(pairs, manifest.phase)
        ra = np.array([c.ra_pointing_hr for c in survivors], dtype=float)
        res = analyze(ra, edges, manifest.p_mode)
        if res.peak is None:
            max_d, peak_lo = 0.0, float(edges[0])
        else:
            max_d, peak_lo = res.peak.cohens_d, res.peak.ra_low_hr
        if max_d < significance_d:
            clean += 1
        rows.append((seed, res.n_trials, max_d, peak_lo))
    return rows, clean / n_seeds


def write_null_mc_csv(path, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("seed,n_trials,max_cohens_d,peak_ra_low_hr\n")
        for (seed, n, d, lo) in rows:
            fh.write(f"{seed},{n},{d:.8g},{lo:.6g}\n")


def make_peak_stat_fn(bin_edges, p_mode: str = "uniform"):
    """Scoring callback for tune_tau_int: peak in-window Cohen's d.

    Returns 0 for an empty survivor set (no signal is no evidence).
    """
    edges = np.asarray(bin_edges, dtype=float)

    def stat(survivors) -> float:
        if not survivors:
            return 0.0
        ra = np.array([c.ra_pointing_hr for c in survivors], dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = analyze(ra, edges, p_mode)
        if res.peak is None:
            return 0.0
        return res.peak.cohens_d

    return stat


def run_tune_tau(manifest: ExperimentManifest, level1_path):
    """Scan assumed instrument delays against an existing archive.

    Returns (best_tau_s, best_stat, taus, stats).
    """
    events = read_level1_archive(level1_path)
    pairs = form_pairs(events, manifest.pairing_window_frames,
                       manifest.require_pol_match)
    stat_fn = make_peak_stat_fn(manifest.bin_edges(), manifest.p_mode)
    return tune_tau_int(pairs, manifest.phase, stat_fn)


def write_tau_scan_csv(path, taus, stats) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("tau_int_s,peak_cohens_d\n")
        for tau, s in zip(taus, stats):
            fh.write(f"{tau:.12g},{s:.8g}\n")
