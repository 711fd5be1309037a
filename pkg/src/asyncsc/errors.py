"""Exception hierarchy shared by every layer of the package."""


class AsyncScError(Exception):
    """Base class for all package errors."""


class ParameterError(AsyncScError, ValueError):
    pass


class InputError(AsyncScError, ValueError):
    pass


class AggregationError(AsyncScError):
    """A partial signature handed to the aggregator failed verification."""

    def __init__(self, pk, message: str = "invalid partial signature"):
        self.pk = pk
        super().__init__(f"{message} from signer {pk.data.hex()[:16]}")


class TimingError(AsyncScError):
    pass


class UnknownTransaction(AsyncScError, KeyError):
    pass


class ConfigurationError(AsyncScError, ValueError):
    pass


class RoundError(AsyncScError):
    """Too few committee signatures were collected."""


class CommitteeIntegrityError(AsyncScError):
    """Aggregate key check failed while building a proof."""


class AuthorizationError(AsyncScError):
    pass


class ConfirmationError(AsyncScError):
    pass


class Backpressure(AsyncScError):
    """Buffer pool is full; the caller should pause epoch packing."""

    def __init__(self, accepted: int, rejected: int):
        self.accepted = accepted
        self.rejected = rejected
        super().__init__(f"buffer pool full: accepted {accepted}, rejected {rejected}")


class NotReady(AsyncScError):
    """Transaction not yet deep enough to be proven."""


class RunError(AsyncScError):
    def __init__(self, message: str, event=None):
        self.event = event
        super().__init__(message)


class PropertyViolation(AsyncScError):
    def __init__(self, prop: str, detail: str = ""):
        self.prop = prop
        super().__init__(f"{prop}: {detail}" if detail else prop)
