"""Exception hierarchy shared by every module."""


class TamePairsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDescriptor(TamePairsError):
    pass


class IndexOutOfRange(TamePairsError):
    pass


class ParseError(TamePairsError):
    def __init__(self, message, text=None, position=None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class GradeOutOfRange(TamePairsError):
    pass


class EmptyOperator(TamePairsError):
    pass


class InvalidCertificate(TamePairsError):
    pass


class InvalidS(TamePairsError):
    pass


class PreconditionFailed(TamePairsError):
    pass


class UnsupportedSpace(TamePairsError):
    pass
