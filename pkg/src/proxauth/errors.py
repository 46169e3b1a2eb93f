"""Exception hierarchy for proxauth."""


class ProxAuthError(Exception):
    """Base class for every error raised by this package."""


class MalformedDocument(ProxAuthError, ValueError):
    pass


class DuplicateBssid(ProxAuthError, ValueError):
    pass


class InvalidBssid(ProxAuthError, ValueError):
    pass


class NonFiniteRssi(ProxAuthError, ValueError):
    pass


class EmptySnapshot(ProxAuthError, ValueError):
    pass


class EmptyUniverse(ProxAuthError, ValueError):
    pass


class EmptyCalibrationSet(ProxAuthError, ValueError):
    pass


class NoAccessPoints(ProxAuthError, ValueError):
    pass


class InvalidArea(ProxAuthError, ValueError):
    pass


class InvalidEnvironment(ProxAuthError, ValueError):
    pass


class VerifierNotAuthenticated(ProxAuthError):
    pass


class NotAuthenticated(ProxAuthError):
    pass


class InvalidScenario(ProxAuthError, ValueError):
    pass


class CalibrationOverlap(UserWarning):
    """Near and far calibration distances overlap; threshold fell back to max(near)."""
