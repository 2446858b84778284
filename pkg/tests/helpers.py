"""Shared builders for the test suite.

Kept deliberately small: anything a test asserts against should be visible
in the test itself, not buried here.
"""
import warnings

import numpy as np

from pulsepair.calib import lst_hours
from pulsepair.pairdetect import (FirstLevelFilterParams,
                                  first_level_filter_frame, form_pairs)
from pulsepair.phasefilter import PhaseMetricParams, second_level_filter
from pulsepair.sigsim import (ObservationConfig, SourceSpec,
                              simulate_frames, simulate_level1_events)
from pulsepair.skystats import analyze

OBS_LON = -79.8398


def detect_events(config, sources, rfi, n_frames, params, start_utc_s=0.0,
                  mode="freq"):
    """Simulate frames and run the first-level filter on every one."""
    events = []
    rf = config.rf_freqs()
    for fe, fw in simulate_frames(config, sources, rfi, n_frames,
                                  start_utc_s=start_utc_s, mode=mode):
        lst = float(lst_hours(fe.utc_s, config.longitude_deg))
        events.extend(first_level_filter_frame(
            fe.frame_index, fe.utc_s, fe.polarization_tag,
            fe.bins, fw.bins, rf, params, float(config.pointing_ra(lst))))
    return events


def wide_band_params(snr_threshold_db=12.0):
    """First-level params for the 2.5 MHz synthetic band (no excision)."""
    return FirstLevelFilterParams(
        snr_threshold_db=snr_threshold_db,
        band_low_hz=1445.0e6, band_high_hz=1447.5e6,
        excision_low_hz=1445.0e6, excision_high_hz=1445.0e6)


def scaled_survey_cohens_d(seed, inject):
    """One scaled survey realization; returns per-bin Cohen's d (40 bins).

    1 MHz band, 0.52 s frames, two polarizations, six passes over the
    3.30-7.30 hr window.  Noise-only candidate mean is ~8.8 per 0.1 hr bin;
    the optional beacon at RA 5.25 hr adds ~24 expected survivors, all inside
    bin 19 ([5.20, 5.30) hr).
    """
    config = ObservationConfig(
        band_low_hz=1445.0e6, band_high_hz=1446.0e6, frame_seconds=0.52,
        polarization_tags=("LHCP", "RHCP"), seed=seed)
    params = FirstLevelFilterParams(
        snr_threshold_db=8.5, band_low_hz=1445.0e6, band_high_hz=1446.0e6,
        excision_low_hz=1445.0e6, excision_high_hz=1445.0e6)
    sources = []
    if inject:
        sources = [SourceSpec(name="beacon", ra_hr=5.25, dec_deg=-8.0,
                              snr_db=45.0, pulse_rate_per_frame=0.0058,
                              emission_window_hr=0.1)]
    events = simulate_level1_events(config, sources, params, 6, 3.30, 7.30)
    pairs = form_pairs(events)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        survivors = second_level_filter(pairs, PhaseMetricParams())
        ra = np.array([c.ra_pointing_hr for c in survivors], dtype=float)
        result = analyze(ra, 3.30 + 0.1 * np.arange(41), "uniform")
    return np.array([b.cohens_d for b in result.stats])
