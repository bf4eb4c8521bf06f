"""
Exception types raised across the toolkit.

Every data-level failure derives from PermRankError, which is a ValueError so
callers that only guard against ValueError keep working. The command line maps
ConfigError to a usage error and every other PermRankError to a data error.
"""


class PermRankError(ValueError):
    """Base class for all toolkit errors."""


class ConfigError(PermRankError):
    """A configuration value is missing, malformed or out of range."""


class AxmlError(PermRankError):
    """Structural violation inside a binary XML document."""


class MalformedHeader(AxmlError):
    """Bad magic, bad header size or a declared length that cannot be right."""


class TruncatedChunk(AxmlError):
    """A chunk claims more bytes than the input still holds."""


class BadStringIndex(AxmlError):
    """A reference points outside the string pool."""


class XmlSyntax(PermRankError):
    """Plain-text manifest is not well-formed or has the wrong root."""


class WidthMismatch(PermRankError):
    """A vector or row does not have the expected number of features."""


class EmptyMatrix(PermRankError):
    """An operation needs at least one row."""


class ClassTooSmall(PermRankError):
    """A class has too few rows to be split."""


class BadProbability(PermRankError):
    """A generator probability lies outside [0, 1]."""


class SchemaError(PermRankError):
    """A CSV file does not follow the feature-matrix layout."""


class IoError(PermRankError):
    """Reading or writing a file failed."""


class BadColumn(PermRankError):
    """A column index is out of range."""


class InvalidTable(PermRankError):
    """A contingency table has negative cells or no observations."""


class SingleClass(PermRankError):
    """Only one class is present where both are required."""


class UnknownFeature(PermRankError):
    """A feature name is not part of the matrix."""


class EmptyInput(PermRankError):
    """Training or evaluation input is empty."""


class BadMtry(PermRankError):
    """Random forest candidate count is outside 1..feature_count."""


class BadParameter(PermRankError):
    """A model or split parameter is outside its valid range."""


class LengthMismatch(PermRankError):
    """Prediction and truth sequences differ in length."""


class MissingClass(PermRankError):
    """The test set lacks one of the two classes."""


class ModelFormatError(PermRankError):
    """A serialized model has the wrong format or version."""
