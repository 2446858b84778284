"""First-level event filtering, pair formation, and the level-1 archive.

A pulse EVENT is an FFT bin whose segment-relative SNR clears the threshold
on BOTH elements simultaneously, inside the accepted RF band and outside the
excision band.  Events are paired by sorting each block of (2K+1) frames in
(bin_index, frame_index, polarization_tag, utc_s) order and joining
consecutive entries, so a pair's two members are adjacent in frequency-major
order and at most 2K frames apart.  K = 0 pairs only within single frames.

The level-1 archive is the package's interchange format: one CSV row per
event with fixed column order and fixed numeric formats, so identical inputs
produce byte-identical archives.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .channelizer import frame_bin_stats
from .errors import ArchiveFormatError, ValidationError

ARCHIVE_SCHEMA_VERSION = 1
ARCHIVE_COLUMNS = [
    "schema_version", "utc_s", "frame_index", "bin_index", "rf_freq_hz",
    "snr_east_db", "snr_west_db", "phase_east_rad", "phase_west_rad",
    "polarization_tag", "ra_pointing_hr",
]


@dataclass
class PulseEvent:
    """A dual-element threshold crossing in one FFT bin of one frame."""

    frame_index: int
    utc_s: float
    bin_index: int
    rf_freq_hz: float
    snr_east_db: float
    snr_west_db: float
    phase_east_rad: float
    phase_west_rad: float
    polarization_tag: str
    ra_pointing_hr: float


@dataclass
class PairCandidate:
    """Two events joined by the pairing pass.

    event_a precedes event_b in the block sort order, so delta_f_hz
    (= rf_b - rf_a) is non-negative and delta_t_s is |utc_b - utc_a|.
    log10_delta_f_mhz is -inf for the degenerate delta_f = 0 case (same bin,
    different polarization); such pairs never survive the frequency-offset
    filter.  phase_metric_rad is filled in by the second-level filter.
    """

    event_a: PulseEvent
    event_b: PulseEvent
    delta_t_s: float
    delta_f_hz: float
    log10_delta_f_mhz: float
    phase_metric_rad: float | None = None

    @property
    def ra_pointing_hr(self) -> float:
        return self.event_b.ra_pointing_hr


@dataclass
class FirstLevelFilterParams:
    """Dual-element SNR threshold plus the accepted RF band.

    Defaults are the survey values: 8.5 dB on both elements, 1405-1455 MHz
    with 1424-1426 MHz excised.  An excision band lying outside the accepted
    band simply excises nothing (narrow-band test configurations keep the
    default excision without effect).
    """

    snr_threshold_db: float = 8.5
    band_low_hz: float = 1405.0e6
    band_high_hz: float = 1455.0e6
    excision_low_hz: float = 1424.0e6
    excision_high_hz: float = 1426.0e6
    bins_per_segment: int = 256
    include_self: bool = True

    def __post_init__(self):
        if not self.band_high_hz > self.band_low_hz:
            raise ValidationError("band_high_hz must exceed band_low_hz")
        if self.excision_high_hz < self.excision_low_hz:
            raise ValidationError("excision_high_hz below excision_low_hz")
        if not math.isfinite(self.snr_threshold_db):
            raise ValidationError("snr_threshold_db must be finite")
        if self.bins_per_segment < 2:
            raise ValidationError("bins_per_segment must be >= 2")

    def rf_accepted(self, rf_hz) -> np.ndarray:
        """Boolean mask: inside the band (inclusive) and not excised."""
        rf = np.asarray(rf_hz, dtype=float)
        inside = (rf >= self.band_low_hz) & (rf <= self.band_high_hz)
        excised = (rf >= self.excision_low_hz) & (rf <= self.excision_high_hz)
        return inside & ~excised


def first_level_filter_frame(frame_index: int, utc_s: float,
                             polarization_tag: str,
                             east_bins, west_bins, rf_freqs_hz,
                             params: FirstLevelFilterParams,
                             ra_pointing_hr: float) -> list[PulseEvent]:
    """Score one dual-element frame and return its surviving events.

    Both elements' bins must be the same length as rf_freqs_hz and aligned
    bin-for-bin; a frame where only one element crosses threshold yields
    nothing (the dual requirement is what suppresses single-dish RFI).
    """
    rf = np.asarray(rf_freqs_hz, dtype=float)
    east = np.asarray(east_bins)
    west = np.asarray(west_bins)
    if east.size != rf.size or west.size != rf.size:
        raise ValidationError(
            f"frame {frame_index}: element/frequency lengths differ "
            f"({east.size}, {west.size}, {rf.size})")
    _, snr_e, ph_e, scored_e = frame_bin_stats(
        east, params.bins_per_segment, params.include_self)
    _, snr_w, ph_w, scored_w = frame_bin_stats(
        west, params.bins_per_segment, params.include_self)
    keep = (scored_e & scored_w
            & (snr_e > params.snr_threshold_db)
            & (snr_w > params.snr_threshold_db)
            & params.rf_accepted(rf))
    out = []
    for k in np.flatnonzero(keep):
        out.append(PulseEvent(
            frame_index=frame_index,
            utc_s=utc_s,
            bin_index=int(k),
            rf_freq_hz=float(rf[k]),
            snr_east_db=float(snr_e[k]),
            snr_west_db=float(snr_w[k]),
            phase_east_rad=float(ph_e[k]),
            phase_west_rad=float(ph_w[k]),
            polarization_tag=polarization_tag,
            ra_pointing_hr=ra_pointing_hr,
        ))
    return out


def first_level_filter(east_measurements, west_measurements,
                       params: FirstLevelFilterParams,
                       ra_pointing_hr: float = math.nan) -> list[PulseEvent]:
    """Apply the dual-element threshold to aligned per-bin measurements.

    The two sequences must be the same length and aligned entry-for-entry on
    (frame_index, bin_index, polarization_tag) with elements EAST and WEST
    respectively; anything else is a wiring error and is rejected.
    """
    east = list(east_measurements)
    west = list(west_measurements)
    if len(east) != len(west):
        raise ValidationError(
            f"{len(east)} east vs {len(west)} west measurements")
    out = []
    for me, mw in zip(east, west):
        if (me.frame_index != mw.frame_index or me.bin_index != mw.bin_index
                or me.polarization_tag != mw.polarization_tag):
            raise ValidationError(
                f"misaligned measurements: east (frame {me.frame_index}, bin "
                f"{me.bin_index}, {me.polarization_tag}) vs west (frame "
                f"{mw.frame_index}, bin {mw.bin_index}, {mw.polarization_tag})")
        if me.element != "EAST" or mw.element != "WEST":
            raise ValidationError(
                f"expected elements EAST/WEST, got {me.element}/{mw.element}")
        if not (me.snr_db > params.snr_threshold_db
                and mw.snr_db > params.snr_threshold_db):
            continue
        if not bool(params.rf_accepted(me.rf_freq_hz)):
            continue
        out.append(PulseEvent(
            frame_index=me.frame_index,
            utc_s=me.utc_s,
            bin_index=me.bin_index,
            rf_freq_hz=me.rf_freq_hz,
            snr_east_db=me.snr_db,
            snr_west_db=mw.snr_db,
            phase_east_rad=me.phase_rad,
            phase_west_rad=mw.phase_rad,
            polarization_tag=me.polarization_tag,
            ra_pointing_hr=ra_pointing_hr,
        ))
    return out


def _sort_key(e: PulseEvent):
    return (e.bin_index, e.frame_index, e.polarization_tag, e.utc_s)


def form_pairs(events, pairing_window_frames: int = 0,
               require_pol_match: bool = False) -> list[PairCandidate]:
    """Pair events by sorted adjacency within frame blocks.

    Frames are grouped into fixed blocks of (2K+1) consecutive frame indices
    (block = frame_index // (2K+1)); events of one block (and, when
    require_pol_match is set, one polarization) are sorted by
    (bin_index, frame_index, polarization_tag, utc_s) and every consecutive
    pair becomes a candidate.  An event can therefore appear in at most two
    candidates (as the later and as the earlier member), matching the
    fixed-block reading of the pairing window.
    """
    if pairing_window_frames < 0:
        raise ValidationError("pairing_window_frames must be >= 0")
    block_len = 2 * pairing_window_frames + 1
    groups: dict = {}
    for e in events:
        key = (e.frame_index // block_len,
               e.polarization_tag if require_pol_match else None)
        groups.setdefault(key, []).append(e)
    pairs: list[PairCandidate] = []
    for key in sorted(groups, key=lambda k: (k[0], k[1] or "")):
        block = sorted(groups[key], key=_sort_key)
        for a, b in zip(block, block[1:]):
            delta_f = b.rf_freq_hz - a.rf_freq_hz
            if delta_f != 0.0:
                log_df = math.log10(abs(delta_f) / 1.0e6)
            else:
                log_df = -math.inf
            pairs.append(PairCandidate(
                event_a=a,
                event_b=b,
                delta_t_s=abs(b.utc_s - a.utc_s),
                delta_f_hz=delta_f,
                log10_delta_f_mhz=log_df,
            ))
    return pairs


def delta_f_filter(candidate: PairCandidate, log_low: float = -5.1,
                   log_high: float = 0.3) -> bool:
    """True when log10(|delta_f| / 1 MHz) lies in the closed window.

    The default window [-5.1, +0.3] spans 7.9433 Hz to 1.9953 MHz.  A
    degenerate candidate with delta_f = 0 is rejected outright (its offset
    is below any window).
    """
    if log_low > log_high:
        raise ValidationError("log_low must not exceed log_high")
    if candidate.delta_f_hz == 0.0:
        return False
    return log_low <= candidate.log10_delta_f_mhz <= log_high


def write_level1_archive(path, events, append: bool = False) -> None:
    """Write events as a level-1 archive CSV (schema version 1).

    Fixed formats (utc to ms, rf to 0.1 Hz, SNR/phase/RA to 6 significant
    digits) make the file a function of the data alone.  With append=True
    the file must already exist with a matching header; rows are added
    without rewriting (resume after partial runs).
    """
    rows = [_format_row(e) for e in events]
    if append:
        if not os.path.exists(path):
            raise ValidationError(f"cannot append, {path} does not exist")
        with open(path, newline="") as fh:
            first = fh.readline().strip()
        if first.split(",") != ARCHIVE_COLUMNS:
            raise ArchiveFormatError(f"{path}: header mismatch, cannot append")
        mode = "a"
    else:
        mode = "w"
    with open(path, mode, newline="\n") as fh:
        if mode == "w":
            fh.write(",".join(ARCHIVE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _format_row(e: PulseEvent) -> list[str]:
    tag = str(e.polarization_tag)
    if not tag or any(c in tag for c in ",\n\r"):
        raise ValidationError(f"bad polarization_tag {tag!r}")
    return [
        str(ARCHIVE_SCHEMA_VERSION),
        f"{e.utc_s:.3f}",
        str(int(e.frame_index)),
        str(int(e.bin_index)),
        f"{e.rf_freq_hz:.1f}",
        f"{e.snr_east_db:.6g}",
        f"{e.snr_west_db:.6g}",
        f"{e.phase_east_rad:.6g}",
        f"{e.phase_west_rad:.6g}",
        tag,
        f"{e.ra_pointing_hr:.6g}",
    ]


def archive_precision(e: PulseEvent) -> PulseEvent:
    """The event as it will read back from an archive (quantized fields)."""
    row = _format_row(e)
    return _parse_row(row, line_no=0)


def _parse_row(row: list[str], line_no: int) -> PulseEvent:
    if len(row) != len(ARCHIVE_COLUMNS):
        raise ArchiveFormatError(
            f"expected {len(ARCHIVE_COLUMNS)} columns, got {len(row)}", line_no)
    if row[0] != str(ARCHIVE_SCHEMA_VERSION):
        raise ArchiveFormatError(
            f"unsupported schema_version {row[0]!r}", line_no)
    try:
        return PulseEvent(
            frame_index=int(row[2]),
            utc_s=float(row[1]),
            bin_index=int(row[3]),
            rf_freq_hz=float(row[4]),
            snr_east_db=float(row[5]),
            snr_west_db=float(row[6]),
            phase_east_rad=float(row[7]),
            phase_west_rad=float(row[8]),
            polarization_tag=row[9],
            ra_pointing_hr=float(row[10]),
        )
    except ValueError as exc:
        raise ArchiveFormatError(f"bad value: {exc}", line_no) from None


def read_level1_archive(path) -> list[PulseEvent]:
    """Read a level-1 archive, validating header, width, and every value."""
    events: list[PulseEvent] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ArchiveFormatError(f"{path}: empty file") from None
        if header != ARCHIVE_COLUMNS:
            raise ArchiveFormatError(
                f"{path}: bad header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            events.append(_parse_row(row, line_no))
    return events


def write_bin_measurements_csv(path, measurements) -> None:
    """Debug dump of raw scored bins (not part of the archive contract)."""
    with open(path, "w", newline="\n") as fh:
        fh.write("frame_index,utc_s,element,polarization_tag,bin_index,"
                 "rf_freq_hz,power,snr_db,phase_rad\n")
        for m in measurements:
            fh.write(f"{m.frame_index},{m.utc_s:.3f},{m.element},"
                     f"{m.polarization_tag},{m.bin_index},{m.rf_freq_hz:.1f},"
                     f"{m.power:.6g},{m.snr_db:.6g},{m.phase_rad:.6g}\n")
