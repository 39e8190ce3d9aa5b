"""Exception types raised across the package."""


class UoraSimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(UoraSimError, ValueError):
    """Invalid or unsupported configuration."""


class MalformedElementError(UoraSimError, ValueError):
    """A UORA Parameter Set element could not be built or parsed."""


class MalformedFrameError(UoraSimError, ValueError):
    """A frame (trigger, BSR, Block Ack) could not be built or parsed."""
