"""Exception hierarchy shared by the pipeline stages."""


class VoicewellError(Exception):
    """Base class for all pipeline errors."""


class UnsupportedFormat(VoicewellError):
    pass


class EmptyAudio(VoicewellError):
    pass


class DegenerateFrame(VoicewellError):
    """Zero-energy input to linear prediction."""


class EmptyReference(VoicewellError):
    pass


class EmptyTranscript(VoicewellError):
    pass


class MissingPrompt(VoicewellError):
    pass


class IncompleteSession(VoicewellError):
    pass


class LengthMismatch(VoicewellError):
    pass


class TooFewRows(VoicewellError):
    pass


class NTooLarge(VoicewellError):
    pass


class DimensionMismatch(VoicewellError):
    pass


class NonFiniteLoss(VoicewellError):
    pass


class TooFewSubjects(VoicewellError):
    pass


class MalformedManifest(VoicewellError):
    pass


class IoFailure(VoicewellError):
    pass
