"""The eight basic emotions and their flock motion configurations."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .flock import FlockConfig

DEFAULT_FLOCK_SIZE = 100
DEFAULT_TRANSITION_S = 2.0


class Emotion(Enum):
    """Closed set of eight; declaration order is the canonical tie-break order."""

    JOY = "joy"
    SADNESS = "sadness"
    FEAR = "fear"
    ANGER = "anger"
    TRUST = "trust"
    DISGUST = "disgust"
    SURPRISE = "surprise"
    ANTICIPATION = "anticipation"


CANONICAL_ORDER: tuple[Emotion, ...] = tuple(Emotion)

# (separation, alignment, cohesion, perception_range, separation_range, max_speed)
_MOTION_TABLE: dict[Emotion, tuple[float, float, float, float, float, float]] = {
    Emotion.JOY: (0.05, 0.05, 0.05, 60, 30, 2),
    Emotion.SADNESS: (0.05, 0.05, 0.05, 0, 30, 1),
    Emotion.FEAR: (0.1, 0.05, 0.05, 60, 30, 1),
    Emotion.ANGER: (0.01, 0.1, 0.1, 0, 0, 10),
    Emotion.TRUST: (0.05, 0.1, 0.05, 60, 30, 2),
    Emotion.DISGUST: (0.1, 0.05, 0.1, 60, 60, 5),
    Emotion.SURPRISE: (0.05, 0.05, 0.1, 60, 60, 5),
    Emotion.ANTICIPATION: (0.1, 0.1, 0.05, 60, 30, 4),
}


def config_for(emotion: Emotion, flock_size: int = DEFAULT_FLOCK_SIZE) -> FlockConfig:
    """Motion configuration for ``emotion``; flock size comes from the caller."""
    s, m, k, big_r, small_r, v = _MOTION_TABLE[emotion]
    return FlockConfig(
        separation_coeff=s,
        alignment_coeff=m,
        cohesion_coeff=k,
        perception_range=big_r,
        separation_range=small_r,
        max_speed=v,
        flock_size=flock_size,
    )


def parse_emotion(name: str) -> Emotion:
    """Case-insensitive lookup of one of the eight emotion names."""
    try:
        return Emotion(name.strip().lower())
    except (ValueError, AttributeError):
        valid = ", ".join(e.value for e in Emotion)
        raise ValueError(f"unknown emotion {name!r}; valid names: {valid}") from None


@dataclass(frozen=True)
class EmotionTransition:
    """A blend in progress from an arbitrary config toward an emotion's config."""

    from_config: FlockConfig
    to_emotion: Emotion
    duration_s: float
    elapsed_s: float = 0.0

    def __post_init__(self) -> None:
        if self.duration_s < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration_s!r}")
        if not 0 <= self.elapsed_s <= max(self.duration_s, 0):
            raise ValueError(
                f"elapsed must lie in [0, {self.duration_s}], got {self.elapsed_s!r}"
            )

    @property
    def done(self) -> bool:
        return self.elapsed_s >= self.duration_s


def transition(t: EmotionTransition) -> FlockConfig:
    """Componentwise linear blend at fraction elapsed/duration.

    Zero duration means the target config immediately. Perception and
    separation ranges interpolate linearly like the other parameters even
    though they gate neighbor sets.
    """
    target = config_for(t.to_emotion, t.from_config.flock_size)
    if t.duration_s == 0:
        return target
    fraction = t.elapsed_s / t.duration_s
    if fraction >= 1.0:
        return target
    return t.from_config.lerp(target, fraction)
