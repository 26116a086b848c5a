"""RR-interval processing: metrics, footprints, emotion classification.

The pipeline turns per-person streams of (timestamp, RR) samples into sliding
window HR / RMSSD / LF-HF metrics, discretizes them against a rolling personal
baseline, matches the high/low footprint against the emotion table, and
resolves ambiguity with hysteresis. Multiple people aggregate by plurality.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from statistics import median
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.signal import welch

from .emotions import CANONICAL_ORDER, Emotion

RR_MIN_MS = 300.0
RR_MAX_MS = 2000.0

LF_BAND = (0.04, 0.15)  # Hz
HF_BAND = (0.15, 0.40)  # Hz
RESAMPLE_HZ = 4.0
WELCH_SEGMENT_S = 64.0

DEFAULT_WINDOW_MS = 60_000
DEFAULT_HOP_MS = 5_000
DEFAULT_BASELINE_HORIZON_MS = 600_000
WARMUP_WINDOWS = 3


class EmptySeriesError(ValueError):
    """No samples survived the artifact filter."""


class UndefinedRatioError(ValueError):
    """LF/HF is undefined: the high-frequency band carries no power."""


@dataclass(frozen=True)
class RRSeries:
    """Clean, monotonic RR series for one person; timestamps in ms epoch."""

    person_id: str
    samples: tuple[tuple[int, float], ...]

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples], dtype=float)

    @property
    def rr(self) -> np.ndarray:
        return np.array([r for _, r in self.samples], dtype=float)


def ingest_rr(
    raw: Iterable[tuple[int, float]], person_id: str = "anon"
) -> tuple[RRSeries, int]:
    """Filter a raw (timestamp, rr) stream; returns (series, dropped count).

    Drops RR values outside [300, 2000] ms and any sample whose timestamp is
    not strictly greater than the last kept one.
    """
    kept: list[tuple[int, float]] = []
    dropped = 0
    for ts, rr in raw:
        if not (RR_MIN_MS <= rr <= RR_MAX_MS) or not math.isfinite(rr):
            dropped += 1
            continue
        if kept and ts <= kept[-1][0]:
            dropped += 1
            continue
        kept.append((int(ts), float(rr)))
    if not kept:
        raise EmptySeriesError(f"no valid RR samples for {person_id!r} after filtering")
    return RRSeries(person_id, tuple(kept)), dropped


def heart_rate(rr_ms: Sequence[float]) -> float:
    """Mean heart rate in bpm: 60000 / mean(rr)."""
    rr = np.asarray(rr_ms, dtype=float)
    if len(rr) < 2:
        raise ValueError(f"heart_rate needs >= 2 samples, got {len(rr)}")
    return 60_000.0 / float(rr.mean())


def rmssd(rr_ms: Sequence[float]) -> float:
    """Root mean square of successive RR differences, in ms.

    Accumulates the running sum of squared differences so it can consume an
    arbitrary iterable; tests cross-check it against the direct formula.
    """
    total = 0.0
    count = 0
    prev: Optional[float] = None
    for value in rr_ms:
        v = float(value)
        if prev is not None:
            d = v - prev
            total += d * d
            count += 1
        prev = v
    if count < 2:
        raise ValueError(f"rmssd needs >= 3 samples, got {count + 1}")
    return math.sqrt(total / count)


def _band_mask(freqs: np.ndarray, low: float, high: float, closed_high: bool) -> np.ndarray:
    upper = freqs <= high if closed_high else freqs < high
    return (freqs >= low) & upper


def spectral_band_powers(
    timestamps_ms: Sequence[float], rr_ms: Sequence[float]
) -> tuple[float, float, float]:
    """(LF power, HF power, total power) of the resampled tachogram.

    Tachogram is linearly resampled to 4 Hz, mean-removed, then run through a
    Welch periodogram (Hann taper, 64 s segments or the full window if
    shorter, 50% overlap). Band powers integrate the density over
    0.04-0.15 Hz (LF) and 0.15-0.40 Hz (HF); the shared 0.15 Hz edge belongs
    to HF.
    """
    ts = np.asarray(timestamps_ms, dtype=float) / 1000.0
    rr = np.asarray(rr_ms, dtype=float)
    span = ts[-1] - ts[0]
    if span < 60.0 or len(rr) < 30:
        raise ValueError(
            f"spectral analysis needs a window spanning >= 60 s with >= 30 samples, "
            f"got {span:.1f} s with {len(rr)}"
        )
    n_out = int(span * RESAMPLE_HZ) + 1
    grid = ts[0] + np.arange(n_out) / RESAMPLE_HZ
    x = np.interp(grid, ts, rr)
    x = x - x.mean()
    nperseg = min(int(WELCH_SEGMENT_S * RESAMPLE_HZ), len(x))
    freqs, psd = welch(
        x,
        fs=RESAMPLE_HZ,
        window="hann",
        nperseg=nperseg,
        noverlap=nperseg // 2,
        detrend=False,
    )
    df = freqs[1] - freqs[0]
    lf = float(psd[_band_mask(freqs, *LF_BAND, closed_high=False)].sum() * df)
    hf = float(psd[_band_mask(freqs, *HF_BAND, closed_high=True)].sum() * df)
    total = float(psd.sum() * df)
    return lf, hf, total


def lf_hf(timestamps_ms: Sequence[float], rr_ms: Sequence[float]) -> float:
    """LF/HF spectral power ratio of an RR window."""
    lf, hf, total = spectral_band_powers(timestamps_ms, rr_ms)
    if total <= 0 or hf <= 1e-12 * total:
        raise UndefinedRatioError("HF band power is (near) zero; LF/HF undefined")
    return lf / hf


class Level(Enum):
    HIGH = "H"
    LOW = "L"


@dataclass(frozen=True)
class Footprint:
    hr: Level
    rmssd: Level
    lf_hf: Level

    @property
    def letters(self) -> str:
        return self.hr.value + self.rmssd.value + self.lf_hf.value

    @classmethod
    def from_letters(cls, letters: str) -> "Footprint":
        if len(letters) != 3 or any(c not in "HL" for c in letters):
            raise ValueError(f"footprint must be three H/L letters, got {letters!r}")
        return cls(*(Level(c) for c in letters))


@dataclass(frozen=True)
class HrvMetrics:
    hr: float
    rmssd: float
    lf_hf: Optional[float]
    window: tuple[int, int]


@dataclass(frozen=True)
class Baseline:
    """Rolling medians of the three metrics over the trailing horizon."""

    person_id: str
    hr_median: float
    rmssd_median: float
    lf_hf_median: Optional[float]


# Footprint letters (HR, RMSSD, LF/HF) -> candidate emotions. The two missing
# patterns (LLL, LHH) deliberately have no entry: they are a no-match outcome.
FOOTPRINT_TABLE: dict[str, tuple[Emotion, ...]] = {
    "HLL": (Emotion.JOY,),
    "HHH": (Emotion.DISGUST,),
    "HHL": (Emotion.TRUST, Emotion.SURPRISE),
    "HLH": (Emotion.ANGER,),
    "LHL": (Emotion.ANTICIPATION,),
    "LLH": (Emotion.SADNESS, Emotion.FEAR),
}


def discretize(metrics: HrvMetrics, baseline: Baseline) -> Footprint:
    """High when strictly above the personal baseline median, else Low.

    An undefined LF/HF (either side) counts as Low: a missing ratio can never
    witness "strictly above".
    """

    def level(value: Optional[float], ref: Optional[float]) -> Level:
        if value is None or ref is None:
            return Level.LOW
        return Level.HIGH if value > ref else Level.LOW

    return Footprint(
        hr=level(metrics.hr, baseline.hr_median),
        rmssd=level(metrics.rmssd, baseline.rmssd_median),
        lf_hf=level(metrics.lf_hf, baseline.lf_hf_median),
    )


def classify(footprint: Footprint) -> tuple[Emotion, ...]:
    """Candidate emotions for a footprint; empty tuple means no match."""
    return FOOTPRINT_TABLE.get(footprint.letters, ())


def resolve(candidates: Sequence[Emotion], prior: Optional[Emotion] = None) -> Emotion:
    """Pick one emotion: singleton wins; ambiguous pairs keep the prior if it
    is among the candidates, otherwise the first in canonical order."""
    if not candidates:
        raise ValueError("resolve requires a non-empty candidate set")
    if len(candidates) == 1:
        return candidates[0]
    if prior is not None and prior in candidates:
        return prior
    return min(candidates, key=CANONICAL_ORDER.index)


@dataclass(frozen=True)
class EmotionAssessment:
    person_id: str
    footprint: Footprint
    candidates: tuple[Emotion, ...]
    chosen: Emotion


def aggregate(assessments: Sequence[EmotionAssessment]) -> Emotion:
    """Plurality vote over chosen emotions; canonical order breaks ties."""
    if not assessments:
        raise ValueError("aggregate requires at least one assessment")
    votes: dict[Emotion, int] = {}
    for a in assessments:
        votes[a.chosen] = votes.get(a.chosen, 0) + 1
    best = max(votes.values())
    winners = [e for e, v in votes.items() if v == best]
    return min(winners, key=CANONICAL_ORDER.index)


@dataclass
class WindowResult:
    """One closed sliding window for one person.

    Metrics are None when their preconditions were not met; footprint and
    candidates are only present once the baseline has warmed up. An empty
    candidate tuple with a footprint is a no-match outcome; ``chosen`` then
    carries the retained prior emotion (or None before any match).
    """

    person_id: str
    window_start: int
    window_end: int
    hr: Optional[float] = None
    rmssd: Optional[float] = None
    lf_hf: Optional[float] = None
    footprint: Optional[Footprint] = None
    candidates: tuple[Emotion, ...] = ()
    chosen: Optional[Emotion] = None

    def to_record(self) -> dict:
        return {
            "person_id": self.person_id,
            "window_start_ms": self.window_start,
            "window_end_ms": self.window_end,
            "hr": self.hr,
            "rmssd": self.rmssd,
            "lf_hf": self.lf_hf,
            "footprint": self.footprint.letters if self.footprint else None,
            "candidates": [e.value for e in self.candidates],
            "chosen": self.chosen.value if self.chosen else None,
        }


class PersonPipeline:
    """Streaming sliding-window pipeline for a single person.

    Windows are closed intervals [end - window, end]; the first window ends
    one window length after the first accepted sample and subsequent windows
    hop by ``hop_ms``. A window closes when a sample arrives strictly past its
    end. Baselines are rolling medians of past window metrics within the
    trailing horizon and need at least ``WARMUP_WINDOWS`` windows.
    """

    def __init__(
        self,
        person_id: str,
        window_ms: int = DEFAULT_WINDOW_MS,
        hop_ms: int = DEFAULT_HOP_MS,
        baseline_horizon_ms: int = DEFAULT_BASELINE_HORIZON_MS,
        warmup_windows: int = WARMUP_WINDOWS,
    ) -> None:
        if window_ms <= 0 or hop_ms <= 0:
            raise ValueError("window and hop must be positive")
        self.person_id = person_id
        self.window_ms = int(window_ms)
        self.hop_ms = int(hop_ms)
        self.baseline_horizon_ms = int(baseline_horizon_ms)
        self.warmup_windows = int(warmup_windows)
        self.dropped = 0
        self.prior: Optional[Emotion] = None
        self.last_assessment: Optional[EmotionAssessment] = None
        self._samples: list[tuple[int, float]] = []
        self._next_end: Optional[int] = None
        # (window_end, hr, rmssd, lf_hf|None) per metric-bearing window
        self._history: list[tuple[int, float, float, Optional[float]]] = []

    def add_sample(self, timestamp_ms: int, rr_ms: float) -> list[WindowResult]:
        """Feed one sample; returns results for any windows this closes."""
        ts = int(timestamp_ms)
        if (
            not (RR_MIN_MS <= rr_ms <= RR_MAX_MS)
            or not math.isfinite(rr_ms)
            or (self._samples and ts <= self._samples[-1][0])
        ):
            self.dropped += 1
            return []
        closed: list[WindowResult] = []
        if self._next_end is None:
            self._next_end = ts + self.window_ms
        else:
            while ts > self._next_end:
                closed.append(self._close_window(self._next_end))
                self._next_end += self.hop_ms
        self._samples.append((ts, float(rr_ms)))
        self._trim(ts)
        return closed

    def _trim(self, now_ms: int) -> None:
        horizon = now_ms - self.window_ms - self.hop_ms
        keep_from = bisect.bisect_left(self._samples, (horizon, -1.0))
        if keep_from > 0:
            del self._samples[:keep_from]
        cutoff = now_ms - self.baseline_horizon_ms - self.window_ms
        while self._history and self._history[0][0] < cutoff:
            self._history.pop(0)

    def _close_window(self, end: int) -> WindowResult:
        start = end - self.window_ms
        window = [(t, r) for t, r in self._samples if start <= t <= end]
        result = WindowResult(self.person_id, start, end, chosen=self.prior)
        rr = [r for _, r in window]
        ts = [t for t, _ in window]
        if len(rr) >= 2:
            result.hr = heart_rate(rr)
        if len(rr) >= 3:
            result.rmssd = rmssd(rr)
        try:
            result.lf_hf = lf_hf(ts, rr)
        except (ValueError, UndefinedRatioError):
            result.lf_hf = None
        if result.hr is None or result.rmssd is None:
            return result
        self._history.append((end, result.hr, result.rmssd, result.lf_hf))
        floor = end - self.baseline_horizon_ms
        recent = [h for h in self._history if h[0] >= floor]
        if len(recent) < self.warmup_windows:
            return result
        lf_values = [h[3] for h in recent if h[3] is not None]
        baseline = Baseline(
            person_id=self.person_id,
            hr_median=median(h[1] for h in recent),
            rmssd_median=median(h[2] for h in recent),
            lf_hf_median=median(lf_values) if lf_values else None,
        )
        metrics = HrvMetrics(result.hr, result.rmssd, result.lf_hf, (start, end))
        result.footprint = discretize(metrics, baseline)
        result.candidates = classify(result.footprint)
        if result.candidates:
            chosen = resolve(result.candidates, self.prior)
            self.prior = chosen
            result.chosen = chosen
            self.last_assessment = EmotionAssessment(
                self.person_id, result.footprint, result.candidates, chosen
            )
        else:
            # No-match: the previous emotion is retained downstream.
            result.chosen = self.prior
        return result
