"""Exception and warning classes.

Errors fall into two families that the CLI maps to exit codes:
``InputError`` (bad files, bad arguments, bad config; exit 2) and
``ProcessingError`` (inputs were readable but the operation cannot proceed;
exit 3).
"""


class AdCorpusError(Exception):
    """Base class for every error raised by this package."""


class InputError(AdCorpusError, ValueError):
    pass


class ProcessingError(AdCorpusError, ValueError):
    pass


# -- audio / dsp --------------------------------------------------------------

class FormatError(InputError):
    pass


class NotStereo(ProcessingError):
    pass


class NotMono(ProcessingError):
    pass


class EmptyInput(ProcessingError):
    pass


class RateMismatch(ProcessingError):
    pass


class LengthMismatch(ProcessingError):
    pass


class LagTooLarge(ProcessingError):
    pass


class OffsetTooLarge(ProcessingError):
    pass


class BadParam(ProcessingError):
    pass


class FramingMismatch(ProcessingError):
    pass


class EmptyEnvelope(ProcessingError):
    pass


# -- text ---------------------------------------------------------------------

class EmptyFile(InputError):
    pass


class NoAnchors(ProcessingError):
    pass


# -- corpus -------------------------------------------------------------------

class ClipLongerThanMovie(ProcessingError):
    pass


class BadPattern(InputError):
    pass


class SplitError(InputError):
    pass


class UnassignedMovie(SplitError):
    pass


class SplitConflict(SplitError):
    pass


# -- metrics ------------------------------------------------------------------

class EmptyCorpus(ProcessingError):
    pass


class TooFewClips(ProcessingError):
    pass


class DimMismatch(InputError):
    pass


class ZeroVector(InputError):
    pass


class MalformedJson(InputError):
    pass


class _IdListError(InputError):
    def __init__(self, ids):
        self.ids = sorted(ids)
        shown = ", ".join(self.ids[:20])
        more = "" if len(self.ids) <= 20 else f" (+{len(self.ids) - 20} more)"
        super().__init__(f"{shown}{more}")


class MissingIds(_IdListError):
    pass


class ExtraIds(_IdListError):
    pass


class DuplicateIds(_IdListError):
    pass


# -- config -------------------------------------------------------------------

class BadConfig(InputError):
    def __init__(self, key, reason="unknown key"):
        self.key = key
        super().__init__(f"{key}: {reason}")


# -- warnings -----------------------------------------------------------------

class LowConfidenceWarning(UserWarning):
    """Offset estimate whose correlation peak barely beats the runner-up."""


class DegenerateThresholdWarning(UserWarning):
    """Quantile threshold collapsed to zero; a mean-based fallback was used."""


class SrtBlockWarning(UserWarning):
    pass
