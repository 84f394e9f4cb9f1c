"""Exception hierarchy shared by every stage of the pipeline."""


class RadclassError(Exception):
    """Base class for all library errors."""


class ConfigError(RadclassError):
    """Invalid or inconsistent pipeline configuration."""


# signal_io
class ZeroSignal(RadclassError):
    """Signal has (numerically) zero power."""


class FormatError(RadclassError):
    """Malformed dataset manifest or sample blob."""


class ValidationError(RadclassError):
    """Recording violates an invariant (NaN/Inf, too short, bad sample rate)."""


class UnsupportedModulation(RadclassError):
    pass


class TooFewSamples(RadclassError):
    """A class has fewer members than the requested number of folds."""


# features
class TooShort(RadclassError):
    """Recording too short for the requested analysis window."""


class FeatureError(RadclassError):
    """A feature failed on a specific recording of a batch."""

    def __init__(self, index, feature, cause):
        self.index = index
        self.feature = feature
        self.cause = cause
        super().__init__(f"sample {index}: {feature}: {type(cause).__name__}: {cause}")


# lda
class EmptyClass(RadclassError):
    pass


class RankDeficient(RadclassError):
    pass


class SingularScatter(RadclassError):
    pass


class DimensionMismatch(RadclassError):
    pass


class DegenerateDenominator(RadclassError):
    pass


# nrs
class EmptyAttributeSet(RadclassError):
    pass


class AttributeAlreadyPresent(RadclassError):
    pass


# classify
class FoldClassMissing(RadclassError):
    """A training split lost every member of some class."""


class BadTargetCount(RadclassError):
    pass


# cli
class MissingArtifact(RadclassError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"missing artifact: {path}")


class SchemaError(RadclassError):
    """Artifact file does not have the expected columns or fields."""


class ArtifactMismatch(RadclassError):
    """Artifacts produced under different configurations were mixed."""
