"""Exception taxonomy shared across the toolkit."""


class ApksiftError(Exception):
    """Base class for all toolkit errors."""


class IoFailure(ApksiftError):
    """Underlying I/O failed (wraps OSError)."""


# -- archive ingestion ------------------------------------------------------

class NotAZipArchive(ApksiftError):
    """File is not a readable zip archive (bad magic / truncated directory)."""


class NoDexFound(ApksiftError):
    """Valid archive, but no classes.dex / classesN.dex entries."""


class MalformedLine(ApksiftError):
    """Invoke-list text file has a bad line; reports the first offender."""

    def __init__(self, line_no: int, message: str = ""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if message else f"line {line_no}")


# -- DEX parsing ------------------------------------------------------------

class TruncatedEncoding(ApksiftError):
    """Variable-length integer ran past the end of the buffer."""


class Overlong(ApksiftError):
    """ULEB128 encoding used more than 5 bytes."""


class InvalidSequence(ApksiftError):
    """Byte run is not valid modified UTF-8."""


class BadMagic(ApksiftError):
    """Blob does not start with a DEX magic."""


class UnsupportedVersion(ApksiftError):
    """DEX magic carries a version outside 035..039."""


class ChecksumMismatch(ApksiftError):
    """Header Adler-32 disagrees with file contents (strict mode only)."""


class StructuralError(ApksiftError):
    """Out-of-bounds offset/index or inconsistent structure inside a DEX."""


# -- reference lists --------------------------------------------------------

class GranularityMismatch(ApksiftError):
    """Reference file declares a different granularity than expected."""


class MalformedKey(ApksiftError):
    """Reference list entry does not match the canonical key syntax."""

    def __init__(self, line_no: int, message: str = ""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if message else f"line {line_no}")


class InvalidProjection(ApksiftError):
    """Requested projection target is not coarser than the source list."""


# -- classification ---------------------------------------------------------

class EmptySet(ApksiftError):
    """Entropy of an empty sample set is undefined."""


class NoUsefulSplit(ApksiftError):
    """No candidate feature/threshold has positive information gain."""


class SingleClassData(ApksiftError):
    """Training data contains fewer than two classes."""


class InvalidHyperparams(ApksiftError):
    """Hyperparameter values outside their legal ranges."""


class TooFewSamples(ApksiftError):
    """Not enough samples for the requested protocol."""


class FingerprintMismatch(ApksiftError):
    """Feature vector / model / dataset built against different reference lists."""


class CorruptModel(ApksiftError):
    """Model file is truncated or structurally invalid."""


class VersionMismatch(ApksiftError):
    """Model file format version is not supported by this build."""


# -- evaluation harness -----------------------------------------------------

class MissingClass(ApksiftError):
    """Test population lacks a class required by the protocol."""


class EmptyBin(ApksiftError):
    """A protocol step received zero samples."""

    def __init__(self, label: str):
        self.label = label
        super().__init__(label)


class ConfigError(ApksiftError):
    """Protocol configuration is inconsistent (e.g. train/test id overlap)."""


class UsageError(ApksiftError):
    """Bad command-line or report-format request."""
