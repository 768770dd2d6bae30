"""Deterministic synthetic tapping signals, landmark recordings, and cohorts.

Each tapping cycle is a raised-cosine open-close pulse sitting on a fixed
rest level. Per-cycle amplitude and duration follow programmed geometric
decay multiplied by mean-one lognormal jitter (lognormal keeps both
positive); optional pauses hold the signal at rest between cycles. The
ground-truth cycle table records every programmed cycle, which makes the
generator usable as an independent oracle for the analysis pipeline.

Landmark embeddings place thumb/index tips around a fixed wrist and index
MCP so that the scaled-distance pipeline reproduces the programmed signal
to float precision. The ``collinear`` view lines the three points up to
mimic the camera angle that flattens angle-based signals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .classify import TrainingTable
from .errors import ConfigurationError
from .features import FEATURE_NAMES, extract_features
from .ingest import INDEX_MCP, INDEX_TIP, N_POINTS, THUMB_TIP, WRIST, LandmarkFrame, Recording
from .pca import FeatureTable
from .signal import TapSignal, distance_signal

REST_LEVEL = 0.15
PALM_PX = 200.0
WRIST_XY = (320.0, 420.0)
# Front view: tips swing on a radius of 1.25 palm lengths, so scaled
# distances up to 2.5 are representable.
TIP_RADIUS_FACTOR = 1.25
# Collinear view: both tips sit essentially on the wrist-MCP ray.
COLLINEAR_OFFSET_PX = 0.3
COLLINEAR_BASE_FACTOR = 0.6

VIEWS = ("front", "collinear")


@dataclass(frozen=True)
class SynthParams:
    """Programmed tapping behaviour for one synthetic recording."""

    base_amplitude: float = 1.0
    tap_rate: float = 2.5
    amp_decay: float = 0.0
    rate_decay: float = 0.0
    amp_jitter_cov: float = 0.0
    interval_jitter_cov: float = 0.0
    pause_prob: float = 0.0
    pause_duration_s: float = 0.0
    duration_s: float = 10.0
    fps: float = 25.0
    seed: int = 0

    def __post_init__(self):
        if not self.base_amplitude > 0:
            raise ConfigurationError("base_amplitude must be positive")
        if not self.tap_rate > 0:
            raise ConfigurationError("tap_rate must be positive")
        for name in ("amp_decay", "rate_decay"):
            if not 0.0 <= getattr(self, name) <= 0.2:
                raise ConfigurationError(f"{name} must lie in [0, 0.2]")
        for name in ("amp_jitter_cov", "interval_jitter_cov"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.pause_prob <= 1.0:
            raise ConfigurationError("pause_prob must lie in [0, 1]")
        if self.pause_duration_s < 0:
            raise ConfigurationError("pause_duration_s must be nonnegative")
        if self.duration_s <= 0 or self.fps <= 0:
            raise ConfigurationError("duration_s and fps must be positive")


@dataclass(frozen=True)
class CycleTruth:
    """One programmed cycle, anchored at its peak.

    ``gap_to_next_s`` is the programmed peak-to-peak interval (pause
    included); it is 0 for the last cycle.
    """

    index: int
    peak_s: float
    amplitude: float
    gap_to_next_s: float
    pause_after_s: float


def truth_intervals(cycles):
    """Programmed peak-to-peak intervals, one per successive cycle pair."""
    return np.array([c.gap_to_next_s for c in cycles[:-1]])


def _lognormal_factor(rng, cov):
    """Mean-one multiplicative jitter with the given coefficient of variation."""
    if cov == 0.0:
        return 1.0
    sigma2 = math.log1p(cov * cov)
    return math.exp(rng.normal(-sigma2 / 2.0, math.sqrt(sigma2)))


def generate_signal(p: SynthParams):
    """Build the programmed tap signal and its ground-truth cycle table.

    Peaks are placed first: the j-th peak-to-peak gap is the nominal tap
    period (with rate decay) times lognormal jitter, plus an optional
    pause. Each peak then gets cosine rise/fall flanks of half a nominal
    period (shorter if the gap is tight), with the signal at rest in
    between, so pauses appear as flat stretches at the rest level.
    """
    rng = np.random.default_rng(p.seed)
    nominal0 = 1.0 / p.tap_rate
    peaks = []  # (peak time, amplitude, half-width, gap after, pause after)
    t = nominal0 / 2.0
    j = 0
    while True:
        half = (nominal0 / (1.0 - p.rate_decay) ** j) / 2.0
        if t + half > p.duration_s + 1e-9:
            break
        amp = p.base_amplitude * (1.0 - p.amp_decay) ** j * _lognormal_factor(rng, p.amp_jitter_cov)
        nominal = nominal0 / (1.0 - p.rate_decay) ** j
        gap = nominal * _lognormal_factor(rng, p.interval_jitter_cov)
        pause = p.pause_duration_s if (p.pause_prob > 0 and rng.random() < p.pause_prob) else 0.0
        gap += pause
        peaks.append((t, amp, half, gap, pause))
        t += gap
        j += 1
    if not peaks:
        raise ConfigurationError("duration too short for a single tapping cycle")

    n = int(round(p.duration_s * p.fps))
    times = np.arange(n) / p.fps
    samples = np.full(n, REST_LEVEL)
    for i, (tp, amp, half, gap, _) in enumerate(peaks):
        rise = half
        if i > 0:
            rise = min(rise, peaks[i - 1][3] / 2.0)
        fall = half
        if i < len(peaks) - 1:
            fall = min(fall, gap / 2.0)
        lo = int(np.searchsorted(times, tp - rise - 1e-12, side="left"))
        mid = int(np.searchsorted(times, tp - 1e-12, side="left"))
        hi = int(np.searchsorted(times, tp + fall - 1e-12, side="left"))
        up = np.clip((times[lo:mid] - (tp - rise)) / rise, 0.0, 1.0)
        samples[lo:mid] = REST_LEVEL + amp * (1.0 - np.cos(np.pi * up)) / 2.0
        down = np.clip((times[mid:hi] - tp) / fall, 0.0, 1.0)
        samples[mid:hi] = REST_LEVEL + amp * (1.0 + np.cos(np.pi * down)) / 2.0

    cycles = tuple(
        CycleTruth(
            index=i,
            peak_s=tp,
            amplitude=amp,
            gap_to_next_s=gap if i < len(peaks) - 1 else 0.0,
            pause_after_s=pause,
        )
        for i, (tp, amp, half, gap, pause) in enumerate(peaks)
    )
    return TapSignal(samples, fps=p.fps, kind="distance"), cycles


def _static_template():
    """Plausible nonzero positions for the landmarks the signals ignore."""
    wx, wy = WRIST_XY
    pts = np.empty((N_POINTS, 2))
    for k in range(N_POINTS):
        pts[k] = (wx - 70.0 + 7.0 * k, wy - 40.0 - 6.0 * k)
    pts[WRIST] = (wx, wy)
    return pts


def generate_landmarks(
    p: SynthParams,
    view: str = "front",
    patient_id: str = "synth",
    video_id: str | None = None,
    med_state: str = "unknown",
    rater_scores=(),
) -> Recording:
    """Embed the programmed signal into 21-point landmark frames.

    ``front`` spreads thumb and index symmetrically around the wrist-MCP
    axis (angle and distance both track the tapping); ``collinear`` puts
    wrist, thumb, and index nearly in a line, which preserves the distance
    signal but collapses the angle signal.
    """
    if view not in VIEWS:
        raise ConfigurationError(f"unknown view {view!r}; expected one of {VIEWS}")
    sig, _ = generate_signal(p)
    wx, wy = WRIST_XY
    template = _static_template()
    template[INDEX_MCP] = (wx, wy - PALM_PX)
    radius = TIP_RADIUS_FACTOR * PALM_PX

    frames = []
    for i, s in enumerate(sig.samples):
        pts = template.copy()
        if view == "front":
            ratio = s * PALM_PX / (2.0 * radius)
            if ratio > 1.0:
                raise ConfigurationError(f"scaled distance {s:.3f} too large to embed")
            phi = math.asin(ratio)
            pts[THUMB_TIP] = (wx - radius * math.sin(phi), wy - radius * math.cos(phi))
            pts[INDEX_TIP] = (wx + radius * math.sin(phi), wy - radius * math.cos(phi))
        else:
            base = COLLINEAR_BASE_FACTOR * PALM_PX
            pts[THUMB_TIP] = (wx - COLLINEAR_OFFSET_PX, wy - base)
            pts[INDEX_TIP] = (wx + COLLINEAR_OFFSET_PX, wy - base - s * PALM_PX)
        frames.append(LandmarkFrame(index=i, points=pts))

    return Recording(
        frames=tuple(frames),
        fps=p.fps,
        patient_id=patient_id,
        video_id=video_id if video_id is not None else f"synth-{p.seed:08d}",
        med_state=med_state,
        rater_scores=tuple(rater_scores),
    )


def severity_profiles(duration_s: float = 60.0, fps: float = 25.0):
    """Five severity levels anchored to tapping intervals of 0.28 s and 0.56 s.

    Intermediate levels interpolate geometrically; amplitude shrinks and
    amplitude/interval jitter grow with severity.
    """
    profiles = []
    for level in range(5):
        f = level / 4.0
        ti = 0.28 * 2.0**f
        profiles.append(
            SynthParams(
                base_amplitude=1.0 * 0.42**f,
                tap_rate=1.0 / ti,
                amp_decay=0.001 * level,
                rate_decay=0.0,
                amp_jitter_cov=0.03 * (0.25 / 0.03) ** f,
                interval_jitter_cov=0.04 * (0.30 / 0.04) ** f,
                pause_prob=0.0,
                pause_duration_s=0.0,
                duration_s=duration_s,
                fps=fps,
            )
        )
    return tuple(profiles)


def generate_cohort(
    profiles=None,
    patients: int = 4,
    videos_per_patient: int = 2,
    seed: int = 0,
    view: str = "front",
    signal_kind: str = "distance",
) -> TrainingTable:
    """Feature table for a synthetic cohort; labels are profile indices.

    ``patients`` patients are generated per profile, each with its own
    mild multiplicative perturbation of amplitude and tap rate shared by
    all of that patient's videos.
    """
    from .signal import angle_signal

    if profiles is None:
        profiles = severity_profiles()
    if not 1 <= len(profiles) <= 5:
        raise ConfigurationError("between 1 and 5 severity profiles required")
    if patients < 1 or videos_per_patient < 1:
        raise ConfigurationError("patients and videos_per_patient must be positive")
    rng = np.random.default_rng(seed)
    rows, labels, video_ids, patient_ids = [], [], [], []
    for level, prof in enumerate(profiles):
        for q in range(patients):
            pid = f"L{level}P{q:03d}"
            amp_factor = _lognormal_factor(rng, 0.06)
            rate_factor = _lognormal_factor(rng, 0.05)
            for v in range(videos_per_patient):
                params = replace(
                    prof,
                    base_amplitude=prof.base_amplitude * amp_factor,
                    tap_rate=prof.tap_rate * rate_factor,
                    seed=int(rng.integers(2**31)),
                )
                rec = generate_landmarks(params, view=view, patient_id=pid,
                                         video_id=f"{pid}V{v}")
                sig = distance_signal(rec) if signal_kind == "distance" else angle_signal(rec)
                rows.append(extract_features(sig).as_array())
                labels.append(level)
                video_ids.append(f"{pid}V{v}")
                patient_ids.append(pid)
    table = FeatureTable(
        values=np.array(rows),
        columns=FEATURE_NAMES,
        video_ids=tuple(video_ids),
        patient_ids=tuple(patient_ids),
    )
    return TrainingTable(table=table, labels=np.array(labels, dtype=int))
