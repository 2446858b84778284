"""Second-level candidate filtering on the inter-element differential phase.

For a pair of events (a, b) with frequency offset delta_f = f_b - f_a, the
metric is the wrapped change of the east-west phase difference, corrected
for the instrument delay tau_int:

    m = wrap[ (phi_W(b) - phi_E(b)) - (phi_W(a) - phi_E(a))
              + 2 pi delta_f tau_int ]

A genuine point source on the meridian imprints phi_W - phi_E =
-2 pi f (tau_geom + tau_int) on each event; the difference cancels the
frequency-independent pieces and the +2 pi delta_f tau_int term removes the
instrument delay, leaving m ~ -2 pi delta_f tau_geom, which is tiny near
transit.  Uncorrelated noise pairs have m uniform on (-pi, pi], so a
half-width of 0.04 rad keeps a fraction 0.04/pi ~ 1.27% of them.

tune_tau_int scans assumed tau_int values and keeps the one whose surviving
candidates maximize the in-window detection statistic; it is how the
pipeline confirms (or discovers) the instrument delay epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channelizer import wrap_phase
from .errors import ValidationError
from .pairdetect import PairCandidate

TWO_PI = 2.0 * math.pi


@dataclass
class PhaseMetricParams:
    """Second-level filter settings.

    tau_int_s is the assumed instrument delay (negative means the west arm
    is electrically short).  The closed frequency-offset window is expressed
    in log10(|delta_f|/MHz); defaults span 7.9433 Hz to 1.9953 MHz.
    """

    tau_int_s: float = 0.0
    filter_halfwidth_rad: float = 0.04
    log_delta_f_low: float = -5.1
    log_delta_f_high: float = 0.3
    tau_search_low_s: float | None = None
    tau_search_high_s: float | None = None
    tau_search_step_s: float = 1.0e-9

    def __post_init__(self):
        if not self.filter_halfwidth_rad > 0:
            raise ValidationError("filter_halfwidth_rad must be > 0")
        if self.log_delta_f_low > self.log_delta_f_high:
            raise ValidationError("log_delta_f window is inverted")
        if self.tau_search_step_s <= 0:
            raise ValidationError("tau_search_step_s must be > 0")
        if (self.tau_search_low_s is None) != (self.tau_search_high_s is None):
            raise ValidationError("set both or neither tau search bound")
        if (self.tau_search_low_s is not None
                and self.tau_search_high_s <= self.tau_search_low_s):
            raise ValidationError("tau search range is inverted")


def phase_metric(candidate: PairCandidate, tau_int_s: float) -> float:
    """Differential-phase metric of one candidate, wrapped to (-pi, pi]."""
    a, b = candidate.event_a, candidate.event_b
    for e in (a, b):
        if not (math.isfinite(e.phase_east_rad)
                and math.isfinite(e.phase_west_rad)):
            raise ValidationError(
                f"event at frame {e.frame_index} bin {e.bin_index} has "
                "non-finite phases; cannot form the metric")
    diff_b = b.phase_west_rad - b.phase_east_rad
    diff_a = a.phase_west_rad - a.phase_east_rad
    return float(wrap_phase(diff_b - diff_a
                            + TWO_PI * candidate.delta_f_hz * tau_int_s))


def _candidate_arrays(candidates):
    """Pull the metric ingredients into flat arrays once."""
    n = len(candidates)
    diff = np.empty(n)
    delta_f = np.empty(n)
    log_df = np.empty(n)
    for i, c in enumerate(candidates):
        a, b = c.event_a, c.event_b
        diff[i] = ((b.phase_west_rad - b.phase_east_rad)
                   - (a.phase_west_rad - a.phase_east_rad))
        delta_f[i] = c.delta_f_hz
        log_df[i] = c.log10_delta_f_mhz
    if n and not (np.isfinite(diff).all()):
        raise ValidationError("candidate with non-finite phases")
    return diff, delta_f, log_df


def phase_metrics(candidates, tau_int_s: float) -> np.ndarray:
    """Vectorized phase_metric over a candidate list."""
    diff, delta_f, _ = _candidate_arrays(candidates)
    return wrap_phase(diff + TWO_PI * delta_f * tau_int_s)


def second_level_filter(candidates, params: PhaseMetricParams,
                        explain: bool = False):
    """Keep candidates passing the frequency-offset AND phase windows.

    Both windows are closed.  Every candidate's phase_metric_rad field is
    filled in as a side effect (diagnostics plots use the rejected ones
    too).  With explain=True returns (survivors, reasons) where reasons is a
    list aligned with the input: "pass", "delta_f", "phase", or both.
    """
    candidates = list(candidates)
    diff, delta_f, log_df = _candidate_arrays(candidates)
    metric = wrap_phase(diff + TWO_PI * delta_f * params.tau_int_s)
    df_ok = ((delta_f != 0.0)
             & (log_df >= params.log_delta_f_low)
             & (log_df <= params.log_delta_f_high))
    ph_ok = np.abs(metric) <= params.filter_halfwidth_rad
    survivors = []
    reasons = []
    for i, c in enumerate(candidates):
        c.phase_metric_rad = float(metric[i])
        if df_ok[i] and ph_ok[i]:
            survivors.append(c)
            reasons.append("pass")
        elif not df_ok[i] and not ph_ok[i]:
            reasons.append("delta_f+phase")
        elif not df_ok[i]:
            reasons.append("delta_f")
        else:
            reasons.append("phase")
    if explain:
        return survivors, reasons
    return survivors


def tune_tau_int(candidates, params: PhaseMetricParams, stat_fn):
    """Scan assumed instrument delays; keep the best-scoring one.

    For each tau on the grid [tau_search_low_s, tau_search_high_s] (step
    tau_search_step_s) the second-level filter is applied with that tau and
    `stat_fn(survivors)` is evaluated (typically the peak in-window binomial
    significance).  Returns (best_tau_s, best_stat, taus, stats).

    Ties are broken toward the smallest |tau - center of the search range|
    (first such tap on equal distance), so a flat plateau of equally good
    delays reports the tap nearest the scan center rather than an
    arbitrary edge.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValidationError("no candidates to tune against")
    if params.tau_search_low_s is None:
        raise ValidationError("tau search range is not set")
    lo, hi, step = (params.tau_search_low_s, params.tau_search_high_s,
                    params.tau_search_step_s)
    taus = np.arange(lo, hi + 0.5 * step, step)
    diff, delta_f, log_df = _candidate_arrays(candidates)
    df_ok = ((delta_f != 0.0)
             & (log_df >= params.log_delta_f_low)
             & (log_df <= params.log_delta_f_high))
    stats = np.empty(taus.size)
    for j, tau in enumerate(taus):
        metric = wrap_phase(diff + TWO_PI * delta_f * tau)
        keep = df_ok & (np.abs(metric) <= params.filter_halfwidth_rad)
        survivors = [candidates[i] for i in np.flatnonzero(keep)]
        stats[j] = float(stat_fn(survivors))
    best = float(np.max(stats))
    tied = np.flatnonzero(stats == best)
    center = 0.5 * (lo + hi)
    pick = tied[np.argmin(np.abs(taus[tied] - center))]
    return float(taus[pick]), best, taus, stats


def write_metric_diagnostics_csv(path, candidates,
                                 params: PhaseMetricParams) -> None:
    """Dump (delta_f, metric, verdict) per candidate for offline inspection."""
    survivors, reasons = second_level_filter(candidates, params, explain=True)
    del survivors
    with open(path, "w", newline="\n") as fh:
        fh.write("delta_f_hz,log10_delta_f_mhz,phase_metric_rad,verdict\n")
        for c, r in zip(candidates, reasons):
            log_df = c.log10_delta_f_mhz
            log_str = f"{log_df:.6g}" if math.isfinite(log_df) else "-inf"
            fh.write(f"{c.delta_f_hz:.6g},{log_str},"
                     f"{c.phase_metric_rad:.6g},{r}\n")
