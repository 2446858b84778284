"""FFT channelization and per-bin detection statistics.

Conventions, fixed across the package:

* Frames of `frame_seconds` of complex baseband are transformed with a plain
  DFT scaled by 1/N, so a bin-centered tone of voltage amplitude A lands in
  one bin with power A**2 regardless of frame length.  Under that gain a
  noise stream of per-sample variance N yields unit mean bin power; the
  simulator targets a unit per-bin noise floor, and every SNR in the package
  is relative to that floor's local estimate.
* Bin k of a frame spans rf = band_low + k / frame_seconds; bin width is
  exactly 1 / frame_seconds (3.7037 Hz for the standard 0.27 s frame).
* SNR is segment-relative: bins are grouped into consecutive segments of
  `bins_per_segment` (256 by default) and each bin's power is compared with
  the mean power of its own segment.  By default the bin under test is
  included in that mean, which biases strong bins down slightly; the
  estimator-corrected crossing probability below accounts for it exactly.
* Phases are wrapped to the half-open interval (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_BINS_PER_SEGMENT = 256


@dataclass
class BinMeasurement:
    """One scored FFT bin of one element's frame."""

    frame_index: int
    utc_s: float
    element: str            # "EAST" or "WEST"
    polarization_tag: str
    bin_index: int
    rf_freq_hz: float
    power: float
    snr_db: float
    phase_rad: float


def wrap_phase(phi):
    """Wrap angle(s) into (-pi, pi]."""
    arr = np.mod(np.asarray(phi, dtype=float), 2.0 * np.pi)
    arr = np.where(arr > np.pi, arr - 2.0 * np.pi, arr)
    if np.isscalar(phi):
        return float(arr)
    return arr


def phase_rad(z):
    """Argument of complex value(s), mapped into (-pi, pi].

    numpy's angle() returns [-pi, pi]; the single point -pi (negative real
    axis approached from below) is folded to +pi so downstream wrapped
    arithmetic has one representation per angle.  Zero input is rejected:
    a zero-power bin has no phase.
    """
    zarr = np.asarray(z)
    if np.any(zarr == 0):
        raise ValidationError("phase of a zero-power bin is undefined")
    a = np.angle(zarr)
    a = np.where(a <= -np.pi, a + 2.0 * np.pi, a)
    if np.isscalar(z) or zarr.ndim == 0:
        return float(a)
    return a


def fft_frame(samples, frame_seconds: float, sample_rate_hz: float,
              pad_policy: str = "none") -> np.ndarray:
    """Channelize one frame of complex baseband: FFT(samples) / N.

    The sample count must equal round(frame_seconds * sample_rate_hz) and
    match it to better than half a sample; a stream that drifts off the
    frame grid is a configuration error, not something to hide with
    resampling.  pad_policy "none" accepts any conforming length; "pow2"
    additionally requires a power-of-two length (for rigs whose FFT demands
    it) and rejects anything else.
    """
    x = np.asarray(samples)
    if x.ndim != 1:
        raise ValidationError("samples must be 1-D")
    if frame_seconds <= 0 or sample_rate_hz <= 0:
        raise ValidationError("frame_seconds and sample_rate_hz must be > 0")
    expected = frame_seconds * sample_rate_hz
    n = x.size
    if abs(n - expected) > 0.5:
        raise ValidationError(
            f"got {n} samples for a {frame_seconds} s frame at "
            f"{sample_rate_hz} Hz (expected {expected:.1f})")
    if pad_policy == "pow2":
        if n == 0 or (n & (n - 1)) != 0:
            raise ValidationError(f"pad_policy 'pow2' requires a power-of-two "
                                  f"length, got {n}")
    elif pad_policy != "none":
        raise ValidationError(f"unknown pad_policy {pad_policy!r}")
    if n == 0:
        raise ValidationError("empty frame")
    return np.fft.fft(x) / n


def snr_db(bin_power: float, segment_powers, include_self: bool = True) -> float:
    """Segment-relative SNR of one bin: 10 log10(power / segment mean).

    `segment_powers` is the full segment including the bin under test.  With
    include_self=False the bin's own power is removed from the mean first.
    """
    seg = np.asarray(segment_powers, dtype=float)
    if seg.ndim != 1 or seg.size < 2:
        raise ValidationError("segment must be a 1-D array of at least 2 bins")
    if bin_power <= 0:
        raise ValidationError(f"non-positive bin power {bin_power}")
    if include_self:
        mean = float(np.mean(seg))
    else:
        mean = (float(np.sum(seg)) - bin_power) / (seg.size - 1)
    if mean <= 0:
        raise ValidationError("non-positive segment mean power")
    return 10.0 * math.log10(bin_power / mean)


def frame_bin_stats(bins: np.ndarray,
                    bins_per_segment: int = DEFAULT_BINS_PER_SEGMENT,
                    include_self: bool = True):
    """Vectorized per-bin statistics for one channelized frame.

    Returns (power, snr_db, phase_rad, scored): scored marks bins belonging
    to a complete segment; trailing bins of a partial segment are left
    unscored (snr = -inf) rather than judged against a truncated mean.
    """
    b = np.asarray(bins)
    if b.ndim != 1:
        raise ValidationError("bins must be 1-D")
    if bins_per_segment < 2:
        raise ValidationError("bins_per_segment must be >= 2")
    n = b.size
    m = bins_per_segment
    n_seg = n // m
    power = (b.real * b.real + b.imag * b.imag).astype(float)
    snr = np.full(n, -np.inf)
    scored = np.zeros(n, dtype=bool)
    if n_seg > 0:
        head = power[:n_seg * m].reshape(n_seg, m)
        if include_self:
            denom = head.mean(axis=1, keepdims=True)
        else:
            denom = (head.sum(axis=1, keepdims=True) - head) / (m - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = head / denom
            snr_head = 10.0 * np.log10(ratio, where=ratio > 0,
                                       out=np.full_like(ratio, -np.inf))
        snr[:n_seg * m] = snr_head.ravel()
        scored[:n_seg * m] = True
    safe = np.where(b == 0, 1.0, b)
    phase = np.angle(safe)
    phase = np.where(phase <= -np.pi, phase + 2.0 * np.pi, phase)
    phase = np.where(b == 0, np.nan, phase)
    return power, snr, phase, scored


def single_element_crossing_prob(threshold_db: float) -> float:
    """P(bin SNR > threshold) for a pure-noise bin against the TRUE mean.

    Rayleigh voltage noise gives exponentially distributed bin power, so the
    idealized crossing probability is exp(-10**(threshold/10)).
    """
    return math.exp(-(10.0 ** (threshold_db / 10.0)))


def estimator_corrected_crossing_prob(
        threshold_db: float,
        bins_per_segment: int = DEFAULT_BINS_PER_SEGMENT,
        include_self: bool = True) -> float:
    """Exact noise crossing probability against the ESTIMATED segment mean.

    For unit-mean exponential bin powers and a segment of m bins the event
    "p > r0 * mean" has closed form:

        include_self:  P = (1 + r0/(m - r0))**-(m-1)   (0 if r0 >= m)
        exclude_self:  P = (1 + r0/(m - 1))**-(m-1)

    where r0 = 10**(threshold/10).  Including the bin under test deflates
    the rate (the bin inflates its own denominator): about -6.9% at 8.5 dB
    with 256-bin segments, versus +10.1% inflation when excluding it.
    """
    if bins_per_segment < 2:
        raise ValidationError("bins_per_segment must be >= 2")
    r0 = 10.0 ** (threshold_db / 10.0)
    m = bins_per_segment
    if include_self:
        if r0 >= m:
            return 0.0
        base = 1.0 + r0 / (m - r0)
    else:
        base = 1.0 + r0 / (m - 1)
    return float(base ** (-(m - 1)))
