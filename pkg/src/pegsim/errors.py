"""Exception hierarchy shared by all protocol modules."""


class ProtocolError(Exception):
    """Base class for every rejected protocol action."""


class InsufficientFunds(ProtocolError):
    pass


class UnknownAccount(ProtocolError):
    pass


class UnknownAsset(ProtocolError):
    pass


class UnauthorizedMinter(ProtocolError):
    pass


class InsufficientMargin(ProtocolError):
    pass


class BadTick(ProtocolError):
    pass


class BadLot(ProtocolError):
    pass


class UnknownOrder(ProtocolError):
    pass


class NotOwner(ProtocolError):
    pass


class LeverageExceeded(ProtocolError):
    pass


class StaleIndex(ProtocolError):
    pass


class MissingIndex(ProtocolError):
    pass


class NoVenueData(ProtocolError):
    pass


class InsufficientReporters(ProtocolError):
    pass


class NoLiquidity(ProtocolError):
    pass


class BelowMinimum(ProtocolError):
    pass


class InsufficientTokens(ProtocolError):
    pass


class WrongRegime(ProtocolError):
    pass


class InsufficientCapital(ProtocolError):
    pass


class ConfigInvalid(ProtocolError):
    pass


class InvariantViolation(AssertionError):
    """Raised by runtime invariant checks; never caught by the step loop."""
