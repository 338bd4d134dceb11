"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ValidationError -> 1, NumericalError -> 2.
"""


class FFPSurvError(Exception):
    """Base class for all package errors."""


class ValidationError(FFPSurvError):
    """Malformed or inconsistent input data / configuration."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class DimensionMismatchError(ValidationError):
    """Vector lengths that must agree do not."""

    def __init__(self, expected, got, what="feature vector"):
        super().__init__(
            f"{what} has length {got}, expected {expected}"
        )
        self.expected = expected
        self.got = got


class NumericalError(FFPSurvError):
    """Numerical failure: non-finite objective, degenerate model, failed quadrature."""


class PanelLikelihoodError(NumericalError):
    """A spell's likelihood is non-positive; names the offending subject and spell."""

    def __init__(self, subject_id, spell_index, value):
        super().__init__(
            f"non-positive spell likelihood {value!r} for subject "
            f"{subject_id!r}, spell {spell_index}"
        )
        self.subject_id = subject_id
        self.spell_index = spell_index
        self.value = value
