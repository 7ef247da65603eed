"""Exception types raised across the engine.

Everything inherits from PhrasematchError so callers (the CLI in
particular) can catch engine failures in one place. File-not-found is
left to the builtin FileNotFoundError.
"""


class PhrasematchError(Exception):
    """Base class for all errors raised by this package."""


# -- audio ----------------------------------------------------------------

class UnsupportedFormatError(PhrasematchError):
    """Audio file is not a PCM WAV we can decode."""


class EmptyAudioError(PhrasematchError):
    """Audio file decoded to zero samples."""


class TooShortError(PhrasematchError):
    """Clip shorter than one analysis window."""


class SilentNoiseError(PhrasematchError):
    """Noise clip has zero RMS; cannot be scaled to a target SNR."""


class SilentSpeechError(PhrasematchError):
    """Speech clip has no frames above the activity gate."""


# -- weight / phrase-set files --------------------------------------------

class BadMagicError(PhrasematchError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(PhrasematchError):
    """File format version is not supported by this reader."""


class ShapeMismatchError(PhrasematchError):
    """A tensor is missing, unexpected, or has the wrong shape."""


class TruncatedFileError(PhrasematchError):
    """File ended before the declared payload was read."""


class CorruptFileError(PhrasematchError):
    """Checksum failure or otherwise unreadable content."""


class BackendMismatchError(PhrasematchError):
    """Stored phrase set was built with a different embedding backend."""


# -- sequences / DTW -------------------------------------------------------

class DimensionMismatchError(PhrasematchError):
    """Feature dimensions of the two operands disagree."""


class EmptySequenceError(PhrasematchError):
    """A feature sequence with zero frames was passed in."""


class BandTooNarrowError(PhrasematchError):
    """Alignment band excludes every complete warping path."""


# -- matching ---------------------------------------------------------------

class InsufficientTemplatesError(PhrasematchError):
    """A phrase label was enrolled with fewer than two renditions."""


class EmptyEmbeddingError(PhrasematchError):
    """An enrollment utterance produced an empty embedding."""


class EmptyPhraseSetError(PhrasematchError):
    """Detection was attempted against a set with no templates."""


class NoSpeechDetectedError(PhrasematchError):
    """No frame of the clip reached the speech-activity threshold."""


# -- evaluation --------------------------------------------------------------

class ParseError(PhrasematchError):
    """Malformed manifest line; message includes the line number."""


class MissingAudioError(PhrasematchError):
    """Manifest references audio paths that do not exist."""


class DuplicateEntryError(PhrasematchError):
    """Two manifest rows share (speaker, phrase, session, repetition)."""


class InsufficientDataError(PhrasematchError):
    """Not enough recordings to satisfy the requested trial layout."""


class NoInDomainPredictionsError(PhrasematchError):
    """Metrics requested over a prediction list with no in-domain rows."""
