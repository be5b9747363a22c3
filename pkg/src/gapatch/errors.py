"""Exception types shared across the toolkit."""


class InvalidArgumentError(ValueError):
    """A precondition on an argument was violated."""


class NotFoundError(KeyError):
    """A requested identity, photo, or file does not exist."""


class DegenerateEmbeddingError(RuntimeError):
    """The raw feature vector was all-zero and cannot be normalized."""


class OracleError(RuntimeError):
    """Base class for failures of a similarity oracle."""


class TransportError(OracleError):
    """Network-level failure talking to a remote oracle."""


class ProtocolError(OracleError):
    """The remote oracle returned a malformed or out-of-contract response."""


class BudgetExceededError(OracleError):
    """The oracle refused further queries (rate limit retries exhausted)."""
