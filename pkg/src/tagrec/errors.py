"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, data/format
errors exit 2, numeric failures exit 3.
"""


class TagrecError(Exception):
    """Base class for all package-specific errors."""


class UsageError(TagrecError):
    """Invalid arguments or an invalid parameter combination."""


class DataError(TagrecError):
    """Unreadable, malformed, or mutually inconsistent input data."""


class FormatError(DataError):
    """A serialized artifact does not conform to its file format."""


class MissingEmbeddingsError(DataError):
    """Objects referenced by a dataset have no record in the embedding store."""

    def __init__(self, ids):
        self.ids = tuple(ids)
        shown = ", ".join(self.ids[:10])
        more = "" if len(self.ids) <= 10 else f" (+{len(self.ids) - 10} more)"
        super().__init__(f"no embedding record for {len(self.ids)} id(s): {shown}{more}")


class MinimumLengthError(DataError):
    """A sequence is shorter than the largest convolution region."""


class NumericError(TagrecError):
    """Non-finite values appeared where finite ones are required."""
