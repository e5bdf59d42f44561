"""Exception hierarchy shared by all docdp modules."""


class DocDPError(Exception):
    """Base class for every error raised by docdp."""


class EmbeddingFormatError(DocDPError, ValueError):
    """Malformed embedding text file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OOVError(DocDPError, KeyError):
    """A token is not in the embedding vocabulary."""

    def __init__(self, token, context=None):
        self.token = token
        self.context = context
        super().__init__(token)

    def __str__(self):
        msg = f"out-of-vocabulary word {self.token!r}"
        if self.context:
            msg += f" ({self.context})"
        return msg


class DimensionMismatchError(DocDPError, ValueError):
    pass


class EmptyDocumentError(DocDPError, ValueError):
    pass


class EnumerationBoundError(DocDPError, ValueError):
    """Input exceeds the size limit of an exhaustive enumeration."""


class CorpusError(DocDPError):
    """One or more documents in a corpus failed; ``errors`` holds (index, exception)."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"document {i}: {e}" for i, e in self.errors]
        super().__init__(f"{len(self.errors)} document(s) failed:\n" + "\n".join(lines))
