"""Exception hierarchy shared by the engine, the CLI, and the HTTP service.

The service maps these onto status codes (NotFoundError -> 404,
StateError -> 409, DataError -> 422); the CLI maps them onto exit code 2.
"""


class SemfeatError(Exception):
    """Base class for all engine errors."""

    #: short machine-readable reason, overridable per instance
    code = "error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class NotFoundError(SemfeatError):
    """A referenced entity (document, dictionary, session) does not exist."""

    code = "not_found"


class StateError(SemfeatError):
    """A precondition on model/session state is unmet (untrained model,
    uncalibrated dictionary, stale model)."""

    code = "precondition"


class DataError(SemfeatError):
    """Input data is malformed or violates a contract (duplicate ids,
    single-class training sets, invalid dictionaries)."""

    code = "invalid_data"
