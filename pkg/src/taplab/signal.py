"""Distance/angle tap signals, the speed signal, and cycle detection.

The distance signal is the thumb-tip to index-tip Euclidean distance scaled
by palm length (wrist to index MCP), which makes it invariant to camera
distance, global translation and rotation. The angle signal is the angle
between the wrist-to-thumb and wrist-to-index vectors and is kept for
viewpoint-robustness comparisons.

Frames with failed landmark detection are filled by linear interpolation
over the dense frame range and flagged; interpolated stretches are excluded
from the per-cycle maximum-speed percentile pools so they cannot fabricate
flat speed plateaus.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .errors import DegenerateGeometryError, InsufficientCyclesError
from .ingest import INDEX_MCP, INDEX_TIP, THUMB_TIP, WRIST, Recording

# Peak detection: prominence relative to the robust signal range, and a
# refractory distance so tremor ripple cannot split one tap into two.
PROMINENCE_FRACTION = 0.15
MIN_PEAK_SEPARATION_S = 0.1
CMS_PERCENTILE = 95.0


@dataclass(frozen=True)
class TapSignal:
    """Per-frame scalar signal (scaled distance or inter-finger angle)."""

    samples: np.ndarray
    fps: float
    kind: str = "distance"
    interpolated: np.ndarray | None = None
    first_frame: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("signal needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal contains non-finite samples")
        if self.kind not in ("distance", "angle"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.kind == "distance" and np.any(samples < 0):
            raise ValueError("distance signal must be nonnegative")
        interp = self.interpolated
        interp = np.zeros(samples.size, dtype=bool) if interp is None else np.asarray(interp, dtype=bool)
        if interp.shape != samples.shape:
            raise ValueError("interpolation mask must match sample count")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "interpolated", interp)

    def times(self):
        """Sample timestamps in seconds."""
        return (self.first_frame + np.arange(self.samples.size)) / self.fps


@dataclass(frozen=True)
class SpeedSignal:
    """Absolute frame-to-frame displacement rate, |Δs|·fps, units 1/s."""

    samples: np.ndarray
    fps: float
    interpolated: np.ndarray | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if np.any(samples < 0) or not np.all(np.isfinite(samples)):
            raise ValueError("speed samples must be finite and nonnegative")
        interp = self.interpolated
        interp = np.zeros(samples.size, dtype=bool) if interp is None else np.asarray(interp, dtype=bool)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "interpolated", interp)


@dataclass(frozen=True)
class CycleSeries:
    """Detected tapping cycles and their per-cycle statistics.

    Peaks and troughs alternate starting with a trough and ending with a
    peak, so every peak pairs with the trough immediately before it.
    ``amplitudes[j]`` is that peak-minus-trough difference, ``intervals[j]``
    the j-th peak-to-peak time, and ``cas``/``cms`` the mean and 95th
    percentile of the speed samples inside each peak-to-peak window.
    """

    peak_indices: np.ndarray
    trough_indices: np.ndarray
    peak_times: np.ndarray
    amplitudes: np.ndarray
    intervals: np.ndarray
    cas: np.ndarray
    cms: np.ndarray
    fps: float = field(default=25.0)

    def __post_init__(self):
        for name in ("peak_indices", "trough_indices", "peak_times", "amplitudes", "intervals", "cas", "cms"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        m = len(self.peak_indices)
        if np.any(np.diff(self.peak_times) <= 0):
            raise ValueError("peak times must be strictly increasing")
        if len(self.amplitudes) != min(m, len(self.trough_indices)):
            raise ValueError("one amplitude per paired peak/trough")
        if np.any(self.amplitudes <= 0):
            raise ValueError("amplitudes must be positive")
        if len(self.intervals) != m - 1:
            raise ValueError("one interval per successive peak pair")
        if np.any(self.cas < 0) or np.any(self.cms < 0):
            raise ValueError("cycle speeds must be nonnegative")

    @property
    def n_cycles(self):
        """Number of tapping cycles (one per detected peak)."""
        return len(self.peak_indices)


def _dense_series(r: Recording, per_frame):
    """Evaluate ``per_frame`` over the dense index range with gap filling.

    Returns (values, interpolated mask, first frame index). ``per_frame``
    maps a LandmarkFrame to a scalar; frames that are absent or flagged
    missing are linearly interpolated from their valid neighbours (edges are
    held at the nearest valid value).
    """
    idx = r.frame_indices
    first, last = int(idx.min()), int(idx.max())
    n = last - first + 1
    values = np.full(n, np.nan)
    for f in r.frames:
        if not f.is_missing():
            values[f.index - first] = per_frame(f)
    valid = ~np.isnan(values)
    if not valid.any():
        raise DegenerateGeometryError("recording has no valid landmark frames")
    interpolated = ~valid
    if interpolated.any():
        pos = np.arange(n)
        values = np.interp(pos, pos[valid], values[valid])
    return values, interpolated, first


def distance_signal(r: Recording) -> TapSignal:
    """Thumb-to-index distance divided by palm length, one value per frame."""

    def scaled(frame):
        p = frame.points
        d1 = float(np.hypot(*(p[THUMB_TIP] - p[INDEX_TIP])))
        d2 = float(np.hypot(*(p[WRIST] - p[INDEX_MCP])))
        if d2 == 0.0:
            raise DegenerateGeometryError(
                f"zero palm length at frame {frame.index}", frame=frame.index
            )
        return d1 / d2

    values, interp, first = _dense_series(r, scaled)
    return TapSignal(values, fps=r.fps, kind="distance", interpolated=interp, first_frame=first)


def angle_signal(r: Recording) -> TapSignal:
    """Angle (radians, in [0, pi]) between wrist-to-thumb and wrist-to-index."""

    def angle(frame):
        p = frame.points
        u = p[THUMB_TIP] - p[WRIST]
        v = p[INDEX_TIP] - p[WRIST]
        nu, nv = np.hypot(*u), np.hypot(*v)
        if nu == 0.0 or nv == 0.0:
            raise DegenerateGeometryError(
                f"zero-length finger vector at frame {frame.index}", frame=frame.index
            )
        c = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
        return float(np.arccos(c))

    values, interp, first = _dense_series(r, angle)
    return TapSignal(values, fps=r.fps, kind="angle", interpolated=interp, first_frame=first)


def speed_signal(s: TapSignal) -> SpeedSignal:
    """Absolute displacement between consecutive frames divided by 1/fps."""
    speeds = np.abs(np.diff(s.samples)) * s.fps
    # A transition is interpolated when either endpoint frame was filled in.
    interp = s.interpolated[:-1] | s.interpolated[1:]
    return SpeedSignal(speeds, fps=s.fps, interpolated=interp)


def _alternating_extrema(x, peaks, troughs):
    """Merge raw peak/trough indices into a strict trough/peak alternation.

    Runs of same-type extrema collapse to the most extreme member; a leading
    peak (no preceding trough) and a trailing trough (no following peak) are
    partial cycles and are dropped.
    """
    events = [(i, +1) for i in peaks] + [(i, -1) for i in troughs]
    events.sort()
    merged = []
    for i, kind in events:
        if merged and merged[-1][1] == kind:
            j, _ = merged[-1]
            better = (x[i] > x[j]) if kind == +1 else (x[i] < x[j])
            if better:
                merged[-1] = (i, kind)
        else:
            merged.append((i, kind))
    if merged and merged[0][1] == +1:
        merged = merged[1:]
    if merged and merged[-1][1] == -1:
        merged = merged[:-1]
    out_troughs = [i for i, kind in merged if kind == -1]
    out_peaks = [i for i, kind in merged if kind == +1]
    return np.array(out_peaks, dtype=int), np.array(out_troughs, dtype=int)


def detect_cycles(s: TapSignal) -> CycleSeries:
    """Detect tapping cycles from a tap signal.

    Local maxima/minima with prominence at least ``0.15 * (p95 - p5)`` of
    the samples and at least 0.1 s apart; troughs are found on the negated
    signal with the same parameters. Fewer than 3 surviving peaks raises
    :class:`InsufficientCyclesError`.
    """
    x = s.samples
    lo, hi = np.percentile(x, [5.0, 95.0])
    prominence = PROMINENCE_FRACTION * (hi - lo)
    if prominence <= 0:
        raise InsufficientCyclesError("signal has no dynamic range")
    separation = max(1, int(round(MIN_PEAK_SEPARATION_S * s.fps)))
    raw_peaks, _ = find_peaks(x, prominence=prominence, distance=separation)
    raw_troughs, _ = find_peaks(-x, prominence=prominence, distance=separation)
    peaks, troughs = _alternating_extrema(x, raw_peaks, raw_troughs)
    if len(peaks) < 3:
        raise InsufficientCyclesError(
            f"only {len(peaks)} tapping peaks detected; at least 3 required"
        )

    amplitudes = x[peaks] - x[troughs[: len(peaks)]]
    peak_times = (s.first_frame + peaks) / s.fps
    intervals = np.diff(peak_times)

    sp = speed_signal(s)
    cas = np.empty(len(peaks) - 1)
    cms = np.empty(len(peaks) - 1)
    for j in range(1, len(peaks)):
        a, b = peaks[j - 1], peaks[j]
        # Transitions landing strictly inside (a, b] feed the cycle mean.
        window = sp.samples[a:b]
        cas[j - 1] = window.mean()
        # The percentile pool also includes the transition into the opening
        # peak, minus any interpolated stretches.
        pool_lo = max(0, a - 1)
        pool = sp.samples[pool_lo:b]
        keep = ~sp.interpolated[pool_lo:b]
        if keep.any():
            pool = pool[keep]
        cms[j - 1] = np.percentile(pool, CMS_PERCENTILE)

    return CycleSeries(
        peak_indices=peaks + s.first_frame,
        trough_indices=troughs + s.first_frame,
        peak_times=peak_times,
        amplitudes=amplitudes,
        intervals=intervals,
        cas=cas,
        cms=cms,
        fps=s.fps,
    )
