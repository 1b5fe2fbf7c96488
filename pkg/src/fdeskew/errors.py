"""Exception types shared across the package."""


class DeskewError(Exception):
    """Base class for all package errors."""


class ValidationError(DeskewError, ValueError):
    """An argument or value violates a documented precondition."""


class ImageFormatError(DeskewError):
    """The file exists but is not a decodable image."""


class NoContentError(DeskewError):
    """The page has no foreground after binarization, so it has no skew."""


class PresetError(DeskewError, LookupError):
    """Requested a preset height that does not exist."""
