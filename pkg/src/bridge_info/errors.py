"""Exception types raised across the package."""


class BridgeInfoError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


class InvalidLaw(BridgeInfoError, ValueError):
    pass


class NonIntegrable(BridgeInfoError):
    """Adaptive quadrature did not reach the requested tolerance."""


class DegenerateObservation(BridgeInfoError):
    """The normalising integral of the posterior vanished or overflowed."""


class DefaultedNeedsTau(BridgeInfoError):
    """The observation lies on the defaulted branch; the realised default time is required."""


class ZeroSurvival(BridgeInfoError):
    pass


class DegenerateFeeLeg(BridgeInfoError):
    pass


class EmptyBin(BridgeInfoError):
    pass


class ConfigError(Exception):
    """Malformed or invalid run configuration (CLI exit code 2)."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
