"""Exception types raised across the package."""


class FctnRankError(Exception):
    """Base class for all package errors."""


# tensor / decomposition layer

class InvalidMode(FctnRankError, IndexError):
    pass


class ShapeMismatch(FctnRankError, ValueError):
    pass


class InvalidAxes(FctnRankError, ValueError):
    pass


class DegenerateReference(FctnRankError, ValueError):
    """Reference tensor has zero Frobenius norm."""

    def __init__(self, message="reference tensor has zero norm", index=None):
        if index is not None:
            message = f"{message} (tensor index {index})"
        super().__init__(message)
        self.index = index


class SingularSystem(FctnRankError, ArithmeticError):
    pass


class InvalidRank(FctnRankError, ValueError):
    pass


# objective / search

class EmptyCollection(FctnRankError, ValueError):
    pass


class SpaceTooLarge(FctnRankError, ValueError):
    pass


class StrategyError(FctnRankError):
    """A proposer could not produce a rank assignment."""


class ProposalFailed(StrategyError):
    pass


# LLM response parsing

class ParseFailure(StrategyError, ValueError):
    pass


class MissingEdge(ParseFailure):
    def __init__(self, i, j):
        super().__init__(f"RANKS block is missing edge R({i},{j})")
        self.edge = (i, j)


class InvalidRankToken(ParseFailure):
    pass


class DuplicateEdge(ParseFailure):
    def __init__(self, i, j):
        super().__init__(f"RANKS block lists edge R({i},{j}) more than once")
        self.edge = (i, j)


# LLM transport

class ClientError(StrategyError):
    pass


class ContextOverflow(ClientError):
    pass


class ClientUnavailable(ClientError):
    pass


class ProtocolError(ClientError):
    pass


class ScriptExhausted(ClientError):
    pass


# data

class DataError(FctnRankError, ValueError):
    pass


class SeriesTooShort(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class MissingCell(DataError):
    def __init__(self, cells):
        shown = ", ".join(str(c) for c in cells[:10])
        more = f" (+{len(cells) - 10} more)" if len(cells) > 10 else ""
        super().__init__(f"missing cells (timestamp, coordinates): {shown}{more}")
        self.cells = list(cells)


class DuplicateCell(DataError):
    def __init__(self, cells):
        shown = ", ".join(str(c) for c in cells[:10])
        super().__init__(f"duplicate cells (timestamp, coordinates): {shown}")
        self.cells = list(cells)


class UnknownColumn(DataError):
    pass


# reporting / config

class ReportError(FctnRankError, ValueError):
    pass


class ConfigError(FctnRankError, ValueError):
    pass
