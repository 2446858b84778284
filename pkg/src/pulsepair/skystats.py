"""RA-binned binomial statistics for surviving candidates.

Under the null hypothesis surviving candidates arrive uniformly in pointing
right ascension across the analysis window, so the count in one RA bin of
probability p out of n total candidates is Binomial(n, p).  Significance is
quoted two ways: the effect size (Cohen's d, the excess over the expected
mean in units of the binomial sigma) and the exact binomial tail
probability, computed in log space so n in the tens of thousands with
p ~ 0.025 cannot underflow or lose the tail to cancellation.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ArchiveFormatError, ValidationError

STATS_COLUMNS = [
    "ra_low_hr", "ra_high_hr", "trials_n", "p_bin", "expected_mean",
    "sigma", "observed_count", "cohens_d", "tail_prob_ge", "tail_prob_gt",
]


@dataclass
class RABinStats:
    """Binomial verdict for one RA bin."""

    ra_low_hr: float
    ra_high_hr: float
    trials_n: int
    p_bin: float
    expected_mean: float
    sigma: float
    observed_count: int
    cohens_d: float
    tail_prob_ge: float
    tail_prob_gt: float

    @property
    def center_hr(self) -> float:
        return 0.5 * (self.ra_low_hr + self.ra_high_hr)


@dataclass
class AnalysisResult:
    """Per-bin stats over one analysis window plus the peak bin."""

    stats: list
    peak: RABinStats | None
    n_trials: int
    window_lo_hr: float
    window_hi_hr: float
    per_day: dict | None = None


def _check_np(n: int, p: float) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    if not 0.0 < p < 1.0:
        raise ValidationError(f"p must be inside (0, 1), got {p}")


def binomial_pmf(n: int, k: int, p: float) -> float:
    """Exact P(X = k) for X ~ Binomial(n, p), via log-gamma."""
    _check_np(n, p)
    if not 0 <= k <= n:
        return 0.0
    logp = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
            + k * math.log(p) + (n - k) * math.log1p(-p))
    return float(math.exp(logp))


def binomial_tail(n: int, p: float, k: int, strict: bool = False) -> float:
    """Exact upper tail of Binomial(n, p): P(X >= k), or P(X > k) if strict.

    Summed in log space from the far tail inward (smallest terms first) so
    the result is accurate even when it is ~1e-300.  k = 0 non-strict
    returns exactly 1.0.
    """
    _check_np(n, p)
    if not isinstance(k, (int, np.integer)):
        raise ValidationError(f"k must be an integer, got {k!r}")
    if k < 0 or k > n:
        raise ValidationError(f"k = {k} outside [0, {n}]")
    lo = k + 1 if strict else k
    if lo > n:
        return 0.0
    if lo <= 0:
        return 1.0
    j = np.arange(lo, n + 1, dtype=float)
    log_terms = (gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
                 + j * math.log(p) + (n - j) * math.log1p(-p))
    top = float(np.max(log_terms))
    # Ascending sort accumulates the tiny far-tail terms before the big ones.
    scaled = np.sort(np.exp(log_terms - top))
    total = top + math.log(float(np.sum(scaled)))
    return float(min(1.0, math.exp(total)))


def enumerate_tail(n: int, p: float, k: int, strict: bool = False) -> float:
    """Brute-force tail by enumerating all 2**n outcomes (oracle, n <= 20)."""
    _check_np(n, p)
    if n > 20:
        raise ValidationError("enumeration oracle is limited to n <= 20")
    masks = np.arange(1 << n, dtype=np.uint32)
    ones = np.zeros(masks.size, dtype=np.int64)
    for b in range(n):
        ones += (masks >> np.uint32(b)) & np.uint32(1)
    weights = (p ** ones) * ((1.0 - p) ** (n - ones))
    sel = ones > k if strict else ones >= k
    return float(np.sum(weights[sel]))


def cohens_d(observed: int, n: int, p: float) -> float:
    """Effect size (observed - n p) / sqrt(n p (1 - p))."""
    _check_np(n, p)
    return (observed - n * p) / math.sqrt(n * p * (1.0 - p))


def bin_probabilities(bin_edges, mode: str = "uniform",
                      exposure_ra_hr=None) -> np.ndarray:
    """Null per-bin probabilities for the RA bins defined by `bin_edges`.

    uniform: p_i proportional to bin width (exactly width/window for equal
    coverage).  exposure: p_i proportional to the number of first-level
    events landing in the bin, for sessions with uneven time on sky.
    """
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValidationError("need at least 2 bin edges")
    if not np.all(np.diff(edges) > 0):
        raise ValidationError("bin edges must be strictly increasing")
    if mode == "uniform":
        widths = np.diff(edges)
        return widths / (edges[-1] - edges[0])
    if mode == "exposure":
        if exposure_ra_hr is None:
            raise ValidationError("exposure mode needs first-level event RAs")
        ra = np.asarray(exposure_ra_hr, dtype=float)
        counts, _ = np.histogram(ra, edges)
        total = counts.sum()
        if total == 0:
            raise ValidationError("no exposure events inside the window")
        if np.any(counts == 0):
            raise ValidationError(
                "exposure mode found an empty bin; its null probability "
                "would be 0 and the binomial model undefined")
        return counts / total
    raise ValidationError(f"unknown probability mode {mode!r}")


def analyze(candidate_ra_hr, bin_edges, p_mode: str = "uniform",
            exposure_ra_hr=None, day_index=None) -> AnalysisResult:
    """Bin candidate RAs and score every bin against the binomial null.

    Candidates outside [edges[0], edges[-1]) are not trials (the window IS
    the experiment).  With day_index (one integer per candidate, e.g. the
    transit number) a per-day breakdown is attached: for each day, that
    day's candidates are scored alone, giving one d value per (day, bin).

    An empty window is not an error: it warns and returns empty stats with
    peak None, so a pipeline run on a quiet sky still completes.
    """
    ra = np.asarray(candidate_ra_hr, dtype=float)
    if ra.ndim != 1:
        raise ValidationError("candidate RAs must be 1-D")
    edges = np.asarray(bin_edges, dtype=float)
    probs = bin_probabilities(edges, p_mode, exposure_ra_hr)
    inside = (ra >= edges[0]) & (ra < edges[-1])
    ra_in = ra[inside]
    n = int(ra_in.size)
    if n == 0:
        warnings.warn("no candidates inside the analysis window",
                      stacklevel=2)
        return AnalysisResult([], None, 0, float(edges[0]), float(edges[-1]))
    counts, _ = np.histogram(ra_in, edges)
    stats = _score_bins(counts, n, probs, edges)
    peak = max(stats, key=lambda s: s.cohens_d)
    per_day = None
    if day_index is not None:
        day = np.asarray(day_index)
        if day.shape != ra.shape:
            raise ValidationError("day_index must align with candidate RAs")
        per_day = {}
        for d in np.unique(day[inside]):
            sel = ra_in[day[inside] == d]
            c_d, _ = np.histogram(sel, edges)
            per_day[int(d)] = _score_bins(c_d, int(sel.size), probs, edges)
    return AnalysisResult(stats, peak, n, float(edges[0]), float(edges[-1]),
                          per_day)


def _score_bins(counts, n: int, probs, edges) -> list:
    out = []
    for i, k in enumerate(counts):
        p = float(probs[i])
        mean = n * p
        sigma = math.sqrt(n * p * (1.0 - p))
        out.append(RABinStats(
            ra_low_hr=float(edges[i]),
            ra_high_hr=float(edges[i + 1]),
            trials_n=n,
            p_bin=p,
            expected_mean=mean,
            sigma=sigma,
            observed_count=int(k),
            cohens_d=cohens_d(int(k), n, p),
            tail_prob_ge=binomial_tail(n, p, int(k), strict=False),
            tail_prob_gt=binomial_tail(n, p, int(k), strict=True),
        ))
    return out


@dataclass
class FalseAlarmCheck:
    """Monte Carlo vs analytic single-element crossing rates."""

    empirical_rate: float
    predicted_ideal: float
    predicted_corrected: float
    n_trials: int
    n_crossings: int
    low_stats_warning: bool


def false_alarm_tail_check(threshold_db: float, n_trials: int, seed: int = 0,
                           bins_per_segment: int = 256,
                           include_self: bool = True) -> FalseAlarmCheck:
    """Empirical noise crossing rate vs exp(-r0) and the corrected form.

    Draws unit-mean exponential segment powers and counts bins whose power
    exceeds r0 times their own segment's mean estimate.  Sets
    low_stats_warning when fewer than 100 crossings are expected, in which
    case the empirical rate is too noisy to compare at the percent level.
    """
    from .channelizer import (estimator_corrected_crossing_prob,
                              single_element_crossing_prob)
    if n_trials < bins_per_segment:
        raise ValidationError("n_trials smaller than one segment")
    r0 = 10.0 ** (threshold_db / 10.0)
    m = bins_per_segment
    n_seg = n_trials // m
    rng = np.random.default_rng(seed)
    crossings = 0
    chunk = max(1, min(n_seg, 2_000_000 // m))
    done = 0
    while done < n_seg:
        take = min(chunk, n_seg - done)
        powers = rng.exponential(1.0, size=(take, m))
        if include_self:
            mean = powers.mean(axis=1, keepdims=True)
        else:
            mean = (powers.sum(axis=1, keepdims=True) - powers) / (m - 1)
        crossings += int(np.count_nonzero(powers > r0 * mean))
        done += take
    n_used = n_seg * m
    predicted = single_element_crossing_prob(threshold_db)
    corrected = estimator_corrected_crossing_prob(threshold_db, m, include_self)
    return FalseAlarmCheck(
        empirical_rate=crossings / n_used,
        predicted_ideal=predicted,
        predicted_corrected=corrected,
        n_trials=n_used,
        n_crossings=crossings,
        low_stats_warning=(n_used * corrected) < 100.0,
    )


def write_stats_csv(path, stats) -> None:
    """Write per-bin stats with the fixed column set and formats."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(STATS_COLUMNS) + "\n")
        for s in stats:
            fh.write(f"{s.ra_low_hr:.6g},{s.ra_high_hr:.6g},{s.trials_n},"
                     f"{s.p_bin:.8g},{s.expected_mean:.8g},{s.sigma:.8g},"
                     f"{s.observed_count},{s.cohens_d:.8g},"
                     f"{s.tail_prob_ge:.8g},{s.tail_prob_gt:.8g}\n")


def read_stats_csv(path) -> list:
    """Read back a stats CSV (round-trips write_stats_csv)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ArchiveFormatError(f"{path}: empty file") from None
        if header != STATS_COLUMNS:
            raise ArchiveFormatError(f"{path}: bad header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(STATS_COLUMNS):
                raise ArchiveFormatError(
                    f"expected {len(STATS_COLUMNS)} columns", line_no)
            try:
                out.append(RABinStats(
                    ra_low_hr=float(row[0]), ra_high_hr=float(row[1]),
                    trials_n=int(row[2]), p_bin=float(row[3]),
                    expected_mean=float(row[4]), sigma=float(row[5]),
                    observed_count=int(row[6]), cohens_d=float(row[7]),
                    tail_prob_ge=float(row[8]), tail_prob_gt=float(row[9]),
                ))
            except ValueError as exc:
                raise ArchiveFormatError(f"bad value: {exc}", line_no) from None
    return out
