"""Exception types shared across the package."""


class GushehError(Exception):
    """Base class for all package errors."""


class FormatError(GushehError, ValueError):
    """Input text or bytes could not be parsed.

    ``row`` (1-based data row) or ``position`` (0-based character offset)
    is set when the location is known.
    """

    def __init__(self, message, row=None, position=None):
        if row is not None:
            message = f"row {row}: {message}"
        elif position is not None:
            message = f"position {position}: {message}"
        super().__init__(message)
        self.row = row
        self.position = position


class ValidationError(FormatError):
    """Parsed data violates a domain constraint (bend, duration, ...)."""


class IntegrityError(GushehError):
    """A grammar is not expandable: dangling rule reference or a cycle."""


class NoApplicableMutation(GushehError):
    """No mutation could be applied within the retry budget."""


class UnsupportedMidiError(FormatError):
    """MIDI content outside what the importer handles (e.g. polyphony)."""
