"""Exception hierarchy shared by all photonstat modules."""


class PhotonStatError(Exception):
    """Base class for all package errors."""


# --- codec / stream ---------------------------------------------------------

class BadMagic(PhotonStatError):
    pass


class VersionUnsupported(PhotonStatError):
    pass


class TruncatedStream(PhotonStatError):
    pass


class UnsortedRecords(PhotonStatError):
    pass


class MicrotimeOverflow(PhotonStatError):
    pass


class ChannelOutOfRange(PhotonStatError):
    pass


# --- simulator --------------------------------------------------------------

class InvalidParams(PhotonStatError):
    pass


class UnsupportedBlinkingModel(PhotonStatError):
    pass


# --- correlation ------------------------------------------------------------

class EmptyStream(PhotonStatError):
    pass


class SingleChannelStream(PhotonStatError):
    pass


class WindowTooWide(PhotonStatError):
    pass


class TraceTooShort(PhotonStatError):
    pass


class NotBimodal(PhotonStatError):
    pass


class ZeroTotalRate(PhotonStatError):
    pass


# --- lifetime / FLID --------------------------------------------------------

class InsufficientCounts(PhotonStatError):
    pass


class FitDiverged(PhotonStatError):
    pass


class TooFewPhotons(PhotonStatError):
    pass


class NonPositiveDelays(PhotonStatError):
    pass


class InsufficientBins(PhotonStatError):
    pass


# --- fitting ----------------------------------------------------------------

class SingularCurvature(PhotonStatError):
    """Degenerate curvature at the optimum; carries an identifiability note."""


class InsufficientSpan(PhotonStatError):
    pass


class NegativeFluence(PhotonStatError):
    pass


# --- cli --------------------------------------------------------------------

class ConfigInvalid(PhotonStatError):
    pass


class IoError(PhotonStatError):
    pass
