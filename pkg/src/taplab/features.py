"""The 13 clinically interpretable finger-tapping features.

Feature groups and canonical column order:

* hypokinesia: ``amp_max``, ``amp_avg`` (dimensionless)
* bradykinesia: ``ti_avg`` (s)
* combined hypo-/bradykinesia: ``cas_avg``, ``cms_avg`` (1/s)
* sequence effect: ``amp_slope``, ``ti_slope`` (s/cycle), ``speed_slope``
  (all per cycle index)
* hesitation-halts: ``cov_amp``, ``cov_ti``, ``cov_cms``, ``cov_cas``,
  ``n_interruptions``

COVs divide the population standard deviation of each per-cycle series by
its mean. An interval counts as an interruption when it strictly exceeds
twice the median interval.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DegenerateCyclesError, InsufficientCyclesError
from .signal import CycleSeries, TapSignal, detect_cycles

FEATURE_NAMES = (
    "amp_max",
    "amp_avg",
    "ti_avg",
    "cas_avg",
    "cms_avg",
    "amp_slope",
    "ti_slope",
    "speed_slope",
    "cov_amp",
    "cov_ti",
    "cov_cms",
    "cov_cas",
    "n_interruptions",
)


@dataclass(frozen=True)
class FeatureVector:
    """The 13 features in canonical order; see module docstring for units."""

    amp_max: float
    amp_avg: float
    ti_avg: float
    cas_avg: float
    cms_avg: float
    amp_slope: float
    ti_slope: float
    speed_slope: float
    cov_amp: float
    cov_ti: float
    cov_cms: float
    cov_cas: float
    n_interruptions: int

    def __post_init__(self):
        vals = [getattr(self, f.name) for f in fields(self)]
        if not all(np.isfinite(vals)):
            raise ValueError("features must be finite")
        if not (self.amp_max >= self.amp_avg > 0):
            raise ValueError("need amp_max >= amp_avg > 0")
        if self.ti_avg <= 0:
            raise ValueError("ti_avg must be positive")
        for name in ("cov_amp", "cov_ti", "cov_cms", "cov_cas"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n_interruptions < 0 or self.n_interruptions != int(self.n_interruptions):
            raise ValueError("n_interruptions must be a nonnegative integer")

    def as_array(self):
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=float)


def _ols_slope(y):
    """Least-squares slope of y against 0, 1, 2, ...

    The numerator is folded into symmetric (first minus last) pairs so that
    reversing ``y`` negates the slope exactly, bit for bit.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    xbar = (n - 1) / 2.0
    num = 0.0
    for i in range(n // 2):
        num += (i - xbar) * (y[i] - y[n - 1 - i])
    den = sum((i - xbar) ** 2 for i in range(n))
    return num / den


def _cov(values):
    """Coefficient of variation: population std over mean."""
    values = np.asarray(values, dtype=float)
    mean = values.mean()
    if mean == 0:
        raise DegenerateCyclesError("zero mean in a COV denominator")
    return float(values.std(ddof=0) / mean)


def hypokinesia(c: CycleSeries):
    """(amp_max, amp_avg): peak opening and mean opening across taps."""
    if len(c.amplitudes) < 3:
        raise InsufficientCyclesError(f"need at least 3 amplitudes, got {len(c.amplitudes)}")
    amp_max = float(c.amplitudes.max())
    # Summation rounding can push the mean one ulp above the max when all
    # amplitudes are equal; the mean can never genuinely exceed the max.
    amp_avg = min(float(c.amplitudes.mean()), amp_max)
    return amp_max, amp_avg


def bradykinesia(c: CycleSeries):
    """Mean peak-to-peak tapping interval in seconds."""
    if len(c.intervals) < 2:
        raise InsufficientCyclesError("need at least 2 intervals")
    return float(c.intervals.mean())


def combined_speed(c: CycleSeries):
    """(cas_avg, cms_avg): means of per-cycle average and maximum speed."""
    if c.n_cycles < 2:
        raise InsufficientCyclesError("need at least 2 cycles")
    return float(c.cas.mean()), float(c.cms.mean())


def sequence_effect(c: CycleSeries):
    """(amp_slope, ti_slope, speed_slope): linear trends over cycle index."""
    if c.n_cycles < 3:
        raise InsufficientCyclesError("need at least 3 cycles")
    return (
        float(_ols_slope(c.amplitudes)),
        float(_ols_slope(c.intervals)),
        float(_ols_slope(c.cas)),
    )


def hesitation_halts(c: CycleSeries):
    """(cov_amp, cov_ti, cov_cms, cov_cas, n_interruptions).

    Variability of amplitude, interval and cycle speeds, plus the number of
    intervals strictly above twice the median interval.
    """
    if c.n_cycles < 3:
        raise InsufficientCyclesError("need at least 3 cycles")
    threshold = 2.0 * float(np.median(c.intervals))
    n_int = int(np.sum(c.intervals > threshold))
    return _cov(c.amplitudes), _cov(c.intervals), _cov(c.cms), _cov(c.cas), n_int


def features_from_cycles(c: CycleSeries) -> FeatureVector:
    amp_max, amp_avg = hypokinesia(c)
    ti_avg = bradykinesia(c)
    cas_avg, cms_avg = combined_speed(c)
    amp_slope, ti_slope, speed_slope = sequence_effect(c)
    cov_amp, cov_ti, cov_cms, cov_cas, n_int = hesitation_halts(c)
    return FeatureVector(
        amp_max=amp_max,
        amp_avg=amp_avg,
        ti_avg=ti_avg,
        cas_avg=cas_avg,
        cms_avg=cms_avg,
        amp_slope=amp_slope,
        ti_slope=ti_slope,
        speed_slope=speed_slope,
        cov_amp=cov_amp,
        cov_ti=cov_ti,
        cov_cms=cov_cms,
        cov_cas=cov_cas,
        n_interruptions=n_int,
    )


def extract_features(s: TapSignal) -> FeatureVector:
    """Detect cycles and compute the full 13-feature vector."""
    return features_from_cycles(detect_cycles(s))
