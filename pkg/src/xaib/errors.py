"""Exception hierarchy shared across the package."""


class XaibError(ValueError):
    """Base class for all library errors."""


# raster / model shapes
class ShapeMismatch(XaibError):
    pass


class DimensionMismatch(XaibError):
    pass


# preprocessing
class AllBackground(XaibError):
    """Thresholding found no foreground pixel."""


class InvalidGamma(XaibError):
    pass


# splitting / augmentation
class TooFewSamples(XaibError):
    pass


class NonSquare(XaibError):
    pass


# training
class EmptyDataset(XaibError):
    pass


# tensor-exchange files
class BadMagic(XaibError):
    pass


class BadVersion(XaibError):
    pass


class ShapeOverflow(XaibError):
    pass


class TruncatedFile(XaibError):
    pass


# explainers
class LengthMismatch(XaibError):
    pass


class DegenerateSamples(XaibError):
    """All perturbed model outputs identical; no surrogate can be fit."""


class TooManySegments(XaibError):
    pass


# mask evaluation
class RuleMismatch(XaibError):
    pass


class EmptyList(XaibError):
    pass


class EmptyMask(XaibError):
    pass


class NoRois(XaibError):
    pass


# ingestion
class MissingFile(XaibError):
    pass


class BadLabel(XaibError):
    pass
