"""Exception hierarchy shared across the package."""


class TwicError(Exception):
    """Base class for all package errors."""


class ScenarioError(TwicError):
    """Invalid scenario/config or a violated construction precondition."""


class RankDeficientError(TwicError):
    """A linear system's rows (or columns) are dependent up to tolerance."""


class MissingRelayError(TwicError):
    """A relay-side quantity was requested in a relay-free scenario."""


class EffectiveGainVanishedError(TwicError):
    """The post-construction desired gain fell below the configured floor.

    Measure-zero event for continuous channel draws; callers resample.
    """


class CognitionInsufficientError(TwicError):
    """Partially cognitive relay cannot decode the remaining streams."""


class SchemeMismatchError(TwicError):
    """A symbol frame's active streams disagree with the beamformer set."""


class ResampleBudgetError(TwicError):
    """Too many channel resamples; the scenario is numerically degenerate."""
